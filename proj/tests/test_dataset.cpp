#include "doctest.h"

#include "attnmask/attncore.hpp"
#include "attnmask/binarize.hpp"
#include "attnmask/dataset.hpp"
#include "attnmask/fixture.hpp"
#include "attnmask/image_io.hpp"
#include "support.hpp"

using namespace attnmask;

namespace {

std::size_t count_fg(const BinaryMask& m) {
  std::size_t n = 0;
  for (auto v : m) n += v;
  return n;
}

EmitItem item(const std::string& id, Rng& rng, bool pruned = false) {
  EmitItem it;
  it.entry.sample_id = id;
  it.entry.class_id = 13;
  it.entry.class_name = "horse";
  it.entry.prompt = "a photograph of a horse";
  it.entry.seed = rng.next_u64();
  it.entry.gamma = 0.42;
  it.entry.q = 0.9;
  it.entry.pruned = pruned;
  it.entry.augment_trace = {"blur 7"};
  it.entry.stats = {{"fg_seeds", 12}};
  it.sample.image = testing::random_image(16, 20, rng);
  it.sample.mask = SegMask(16, 20);
  for (auto& v : it.sample.mask) {
    const double u = rng.uniform01();
    v = u < 0.1 ? kIgnoreLabel : u < 0.5 ? 13 : 0;
  }
  return it;
}

}  // namespace

TEST_CASE("clean_mask examples") {
  Rng rng(1);
  const BinaryMask r = testing::random_mask(12, 12, rng);
  CHECK(clean_mask(r, 0) == r);
  BinaryMask three(10, 10);
  three(2, 2) = three(3, 3) = three(4, 4) = 1;  // diagonal: one 8-connected blob
  CHECK(count_fg(clean_mask(three, 4)) == 0);
  CHECK(clean_mask(three, 3) == three);

  BinaryMask two(20, 20);
  two(0, 0) = two(0, 1) = two(1, 0) = 1;
  for (int y = 10; y < 15; ++y)
    for (int x = 5; x < 15; ++x) two(y, x) = 1;
  const BinaryMask c = clean_mask(two, 10);
  CHECK(count_fg(c) == 50);
  CHECK(c(0, 0) == 0);
  CHECK(c(12, 7) == 1);
  CHECK_THROWS_AS(clean_mask(two, -1), ValidationError);
}

TEST_CASE("emit round trip, train split, determinism") {
  testing::TempDir a("emit_a"), b("emit_b");
  Rng rng(2);
  std::vector<EmitItem> items{item("s0", rng), item("s1", rng, true), item("s2", rng)};
  EmitOptions opts;
  opts.meta = {{"seed", "7"}};
  opts.voc_palette = true;
  const DatasetManifest m = emit(items, opts, a.path());
  CHECK(m.samples.size() == 3);
  CHECK(m.samples[1].pruned);
  const auto train = testing::slurp(a.path() / "train.txt");
  CHECK(std::string(train.begin(), train.end()) == "s0\ns2\n");
  for (const auto& it : items) {
    CHECK(read_png_gray(a.path() / "masks" / (it.entry.sample_id + ".png")) == it.sample.mask);
    CHECK(read_png_rgb(a.path() / "images" / (it.entry.sample_id + ".png")) == it.sample.image);
    CHECK(std::filesystem::exists(a.path() / "masks_voc" / (it.entry.sample_id + ".png")));
  }
  const DatasetManifest back = read_manifest(a.path());
  CHECK(back == m);
  CHECK(back.samples[0].image_path == "images/s0.png");
  CHECK(back.samples[0].gamma == 0.42);

  const DatasetManifest m2 = emit(items, opts, b.path());
  CHECK(manifest_hash(m2) == manifest_hash(m));
  CHECK(testing::tree_hash(a.path()) == testing::tree_hash(b.path()));
  CHECK(hex64(0xabc) == "0000000000000abc");
}

TEST_CASE("emit with everything pruned and emit errors") {
  testing::TempDir t("emit_c");
  Rng rng(3);
  std::vector<EmitItem> items{item("a", rng, true), item("b", rng, true)};
  emit(items, {}, t.path());
  CHECK(testing::slurp(t.path() / "train.txt").empty());
  std::vector<EmitItem> dup{item("x", rng), item("x", rng)};
  CHECK_THROWS_AS(emit(dup, {}, t.path() / "d"), ValidationError);
  std::vector<EmitItem> bad{item("../x", rng)};
  CHECK_THROWS_AS(emit(bad, {}, t.path() / "e"), ValidationError);
  testing::spit(t.path() / "file", "x");
  std::vector<EmitItem> ok{item("y", rng)};
  CHECK_THROWS_AS(emit(ok, {}, t.path() / "file" / "sub"), RuntimeError);
  CHECK_THROWS_AS(parse_manifest("{\"format_version\": 99, \"meta\": {}, \"samples\": []}"), ValidationError);
  CHECK_THROWS_AS(parse_manifest("not json"), ValidationError);
}

TEST_CASE("mIoU hand-counted 4x4") {
  // gt: left half class 1, right half class 2; pred shifts one column right.
  SegMask gt(4, 4), pred(4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      gt(y, x) = x < 2 ? 1 : 2;
      pred(y, x) = x < 3 ? 1 : 2;
    }
  const std::vector<int> classes{1, 2};
  const EvalReport r = evaluate_miou({{"a", pred}}, {{"a", gt}}, classes);
  // class 1: tp 8, fp 4, fn 0; class 2: tp 4, fp 0, fn 4
  CHECK(r.counts.at(1) == ClassCounts{8, 4, 0});
  CHECK(r.counts.at(2) == ClassCounts{4, 0, 4});
  CHECK(r.per_class_iou.at(1) == 8.0 / 12.0);
  CHECK(r.per_class_iou.at(2) == 4.0 / 8.0);
  CHECK(r.miou == doctest::Approx((8.0 / 12.0 + 0.5) / 2.0).epsilon(1e-15));

  SegMask ign = gt;
  for (int y = 0; y < 4; ++y) ign(y, 2) = kIgnoreLabel;
  const EvalReport q = evaluate_miou({{"a", pred}}, {{"a", ign}}, classes);
  // column 2 ignored: class 1 tp 8, fp 0; class 2 tp 4, fn 0
  CHECK(q.per_class_iou.at(1) == 1.0);
  CHECK(q.per_class_iou.at(2) == 1.0);
  CHECK(q.miou == 1.0);
}

TEST_CASE("mIoU: perfect, ignore-only class, permutation, errors") {
  Rng rng(4);
  std::map<std::string, SegMask> gts;
  for (int i = 0; i < 3; ++i) {
    SegMask m(8, 8);
    for (auto& v : m) v = static_cast<std::uint8_t>(rng.below(3));
    gts["g" + std::to_string(i)] = m;
  }
  const std::vector<int> classes{0, 1, 2, 3};
  const EvalReport perfect = evaluate_miou(gts, gts, classes);
  CHECK(perfect.miou == 1.0);
  CHECK(!perfect.per_class_iou.contains(3));

  std::map<std::string, SegMask> preds;
  for (const auto& [id, g] : gts) {
    SegMask p = g;
    for (auto& v : p) v = rng.uniform01() < 0.3 ? static_cast<std::uint8_t>(rng.below(3)) : v;
    preds[id] = p;
  }
  const EvalReport base = evaluate_miou(preds, gts, classes);
  const std::uint8_t perm[3] = {2, 0, 1};
  auto relabel = [&](std::map<std::string, SegMask> m) {
    for (auto& [id, s] : m)
      for (auto& v : s) v = perm[v];
    return m;
  };
  const EvalReport permuted = evaluate_miou(relabel(preds), relabel(gts), classes);
  CHECK(permuted.miou == doctest::Approx(base.miou).epsilon(1e-15));
  for (int c = 0; c < 3; ++c) CHECK(permuted.per_class_iou.at(perm[c]) == base.per_class_iou.at(c));

  std::map<std::string, SegMask> missing = preds;
  missing.erase("g1");
  CHECK_THROWS_AS(evaluate_miou(missing, gts, classes), ValidationError);
  CHECK(evaluate_miou({}, {}, classes).miou == 0.0);
}

TEST_CASE("fixture: noise-free aggregate thresholded at 0.5 equals gt") {
  FixtureSpec spec;
  spec.height = spec.width = 64;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Fixture f = gen_fixture(spec, seed);
    const ProbabilityMap agg = aggregate(f.bundle, f.class_tokens, f.bundle.image.dims());
    const BinaryMask t = threshold(agg, 0.5);
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(t[i] == (f.gt.mask[i] == spec.class_id ? 1 : 0));
    const double area = double(count_fg(t)) / double(t.size());
    CHECK(area >= spec.area_fraction.first);
    CHECK(area <= spec.area_fraction.second);
  }
  testing::TempDir a("fx_a"), b("fx_b");
  write_bundle(gen_fixture(spec, 9).bundle, a.path());
  write_bundle(gen_fixture(spec, 9).bundle, b.path());
  CHECK(testing::tree_hash(a.path()) == testing::tree_hash(b.path()));
  FixtureSpec bad = spec;
  bad.height = 16;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}
