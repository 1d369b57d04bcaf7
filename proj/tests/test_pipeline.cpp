#include "doctest.h"

#include "attnmask/binarize.hpp"
#include "attnmask/dataset.hpp"
#include "attnmask/pipeline.hpp"
#include "support.hpp"

using namespace attnmask;

namespace {

PipelineConfig small_config(int n) {
  PipelineConfig c;
  c.seed = 3;
  c.fixtures = n;
  c.fixture.height = c.fixture.width = 64;
  c.fixture.resolutions = {8, 16, 32};
  c.fixture.timesteps = 2;
  return c;
}

std::vector<Token> tokens_of(std::initializer_list<const char*> pieces) {
  std::vector<Token> out;
  int i = 0;
  for (const char* p : pieces) out.push_back({i++, p});
  return out;
}

}  // namespace

TEST_CASE("find_class_tokens") {
  const auto t = tokens_of({"<|startoftext|>", "a</w>", "Potted</w>", "pl", "ant</w>", "on</w>", "a</w>", "table</w>"});
  CHECK(find_class_tokens(t, "potted plant") == std::vector<int>{2, 3, 4});
  CHECK(find_class_tokens(t, "TABLE") == std::vector<int>{7});
  CHECK(find_class_tokens(t, "plant") == std::vector<int>{3, 4});
  CHECK(find_class_tokens(t, "ant").empty());
  CHECK(find_class_tokens(t, "horse").empty());
  CHECK(find_class_tokens(t, "pl").empty());
}

TEST_CASE("process_sample recovers a noise-free fixture") {
  const PipelineConfig c = small_config(1);
  const Fixture f = gen_fixture(c.fixture, 17);
  const SampleResult r = process_sample(SampleInput{"one", f.bundle, f.class_tokens, {"horse", 13}, 17}, c);
  BinaryMask gt(f.gt.mask.dims());
  for (std::size_t i = 0; i < gt.size(); ++i) gt[i] = f.gt.mask[i] != 0;
  CHECK(iou(r.mask, gt) >= 0.95);
  CHECK(r.gamma == doctest::Approx(0.5).epsilon(0.05));
  CHECK(r.stats.at("fg_seeds") > 0);
  CHECK(r.stats.at("bg_seeds") > 0);

  SampleInput bad{"two", f.bundle, {99}, {"horse", 13}, 1};
  try {
    process_sample(bad, c);
    FAIL("expected StageError");
  } catch (const StageError& e) {
    CHECK(e.sample_id() == "two");
    CHECK(e.stage() == "aggregate");
  }
}

TEST_CASE("run_pipeline is deterministic and records provenance") {
  PipelineConfig c = small_config(6);
  c.folds = 2;
  c.alpha = 0.5;
  c.templates = {"a photograph of a [class]"};
  testing::TempDir a("pipe_a"), b("pipe_b");
  c.output = a.path();
  const PipelineResult r1 = run_pipeline(c);
  c.output = b.path();
  const PipelineResult r2 = run_pipeline(c);
  CHECK(r1.hash == r2.hash);
  CHECK(testing::tree_hash(a.path()) == testing::tree_hash(b.path()));
  c.output.clear();
  CHECK(run_pipeline(c).hash == r1.hash);

  CHECK(r1.manifest.samples.size() == 6 + 3);  // kept originals get one augmented copy each
  std::size_t pruned = 0, augmented = 0;
  for (const auto& e : r1.manifest.samples) {
    if (e.source_id.empty()) {
      CHECK(e.gamma.has_value());
      CHECK(e.q.has_value());
      pruned += e.pruned;
    } else {
      ++augmented;
      CHECK(e.sample_id == e.source_id + "_aug0");
    }
    CHECK(e.prompt == "a photograph of a horse");
  }
  CHECK(pruned == 3);
  CHECK(augmented == 3);
  CHECK(std::filesystem::exists(a.path() / "prompts.jsonl"));
  CHECK(read_manifest(a.path()) == r1.manifest);

  c.seed = 4;
  CHECK(run_pipeline(c).hash != r1.hash);
}

TEST_CASE("alpha = 1 prunes everything") {
  PipelineConfig c = small_config(4);
  c.folds = 2;
  c.alpha = 1.0;
  testing::TempDir t("pipe_all");
  c.output = t.path();
  const PipelineResult r = run_pipeline(c);
  CHECK(testing::slurp(t.path() / "train.txt").empty());
  for (const auto& e : r.manifest.samples) CHECK(e.pruned);
}

TEST_CASE("bundle inputs, class lookup failures, proxy predictor") {
  testing::TempDir t("pipe_bundles");
  const FixtureSpec spec = small_config(1).fixture;
  for (int i = 0; i < 3; ++i) write_bundle(gen_fixture(spec, 40 + i).bundle, t.path() / ("b" + std::to_string(i)));

  PipelineConfig c = small_config(0);
  c.noise_learning = false;
  c.augment = false;
  c.classes = {{"horse", 13}};
  for (int i = 0; i < 3; ++i) c.bundles.push_back(t.path() / ("b" + std::to_string(i)));
  const PipelineResult r = run_pipeline(c);
  REQUIRE(r.manifest.samples.size() == 3);
  CHECK(r.manifest.samples[0].sample_id == "b0");
  CHECK(r.manifest.samples[0].class_id == 13);
  CHECK(!r.manifest.samples[0].q.has_value());

  c.classes = {{"zebra", 20}};
  try {
    run_pipeline(c);
    FAIL("expected StageError");
  } catch (const StageError& e) {
    CHECK(e.sample_id() == "b0");
    CHECK(e.stage() == "token_lookup");
  }
  c.classes = {{"horse", 13}};
  c.bundles.push_back(t.path() / "missing");
  try {
    run_pipeline(c);
    FAIL("expected StageError");
  } catch (const StageError& e) {
    CHECK(e.sample_id() == "missing");
    CHECK(e.stage() == "read_bundle");
  }

  const CrfParams p = proxy_crf_params(CrfParams{});
  CHECK(p.w_app == doctest::Approx(8.0));
  CHECK(p.theta_beta == doctest::Approx(16.25));

  const PipelineConfig pc = small_config(1);
  std::vector<SampleResult> samples;
  for (int i = 0; i < 3; ++i) {
    const Fixture f = gen_fixture(pc.fixture, 70 + i);
    samples.push_back(process_sample(SampleInput{"p" + std::to_string(i), f.bundle, f.class_tokens, {"horse", 13}, 1}, pc));
  }
  ClassicalProxyPredictor proxy(samples, pc);
  std::vector<SampleRecord> recs;
  for (const auto& s : samples) recs.push_back({s.sample_id, 13, s.mask, "", std::nullopt});
  proxy.fit(std::span<const SampleRecord>(recs).subspan(0, 2));
  CHECK(proxy.fitted_gamma() == doctest::Approx((samples[0].gamma + samples[1].gamma) / 2));
  CHECK(iou(proxy.predict(recs[2]), samples[2].mask) > 0.8);
}
