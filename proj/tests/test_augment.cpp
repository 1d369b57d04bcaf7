#include "doctest.h"

#include <cmath>
#include <set>

#include "attnmask/augment.hpp"
#include "attnmask/binarize.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace attnmask;

namespace {

Sample flat_sample(int h, int w, std::uint8_t v, std::uint8_t label) {
  return Sample{RgbImage(h, w, Rgb{v, v, v}), SegMask(h, w, label)};
}

Sample random_sample(int h, int w, Rng& rng, std::uint8_t label) {
  Sample s{testing::random_image(h, w, rng), SegMask(h, w)};
  for (auto& m : s.mask) m = rng.uniform01() < 0.5 ? label : 0;
  return s;
}

}  // namespace

TEST_CASE("splice 2x2 of 512 images gives 256 tiles") {
  std::vector<Sample> pool;
  for (int i = 0; i < 4; ++i) pool.push_back(flat_sample(512, 512, static_cast<std::uint8_t>(40 * (i + 1)), static_cast<std::uint8_t>(i + 1)));
  const std::vector<std::size_t> picks{0, 1, 2, 3};
  const Sample s = splice_with(pool, {2, 2}, {512, 512}, picks);
  CHECK(s.image.dims() == Dims{512, 512});
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c)
      for (int y = r * 256; y < r * 256 + 256; y += 17)
        for (int x = c * 256; x < c * 256 + 256; x += 17) {
          CHECK(s.mask(y, x) == r * 2 + c + 1);
          CHECK(s.image(y, x).r == 40 * (r * 2 + c + 1));
        }
}

TEST_CASE("splice 1x1, label subset, remainders, errors") {
  Rng rng(1);
  const Sample a = random_sample(20, 30, rng, 5);
  const std::vector<Sample> one{a};
  const std::vector<std::size_t> pick0{0};
  CHECK(splice_with(one, {1, 1}, {20, 30}, pick0) == a);

  std::vector<Sample> pool{random_sample(16, 16, rng, 3), random_sample(24, 12, rng, 7), random_sample(9, 9, rng, 11)};
  for (const SpliceGrid g : kSpliceGrids) {
    const Sample s = splice(pool, g, {37, 41}, 99);
    CHECK(s.image.dims() == Dims{37, 41});
    CHECK(s.mask.dims() == Dims{37, 41});
    for (auto v : s.mask) CHECK((v == 0 || v == 3 || v == 7 || v == 11));
    CHECK(splice(pool, g, {37, 41}, 99) == s);
  }
  const std::vector<std::size_t> three{0, 1, 2};
  CHECK_THROWS_AS(splice_with(pool, {2, 2}, {10, 10}, three), ValidationError);
  CHECK_THROWS_AS(splice(std::vector<Sample>{}, {2, 2}, {10, 10}, 1), ValidationError);
  CHECK_THROWS_AS(splice(pool, {8, 8}, {4, 4}, 1), ValidationError);
}

TEST_CASE("resize helpers") {
  Rng rng(2);
  const Sample s = random_sample(10, 10, rng, 1);
  CHECK(resize_bilinear(s.image, {10, 10}) == s.image);
  CHECK(resize_nearest(s.mask, {10, 10}) == s.mask);
  const SegMask up = resize_nearest(s.mask, {20, 20});
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 20; ++x) CHECK(up(y, x) == s.mask(y / 2, x / 2));
}

TEST_CASE("blur kernel lengths and sigma") {
  CHECK_THROWS_AS(effective_kernel_length(5), ValidationError);
  CHECK_THROWS_AS(effective_kernel_length(23), ValidationError);
  CHECK(effective_kernel_length(6) == 7);
  CHECK(effective_kernel_length(7) == 7);
  CHECK(effective_kernel_length(22) == 23);
  CHECK(kernel_sigma(7) == doctest::Approx(1.4));
  for (int len = 6; len <= 22; ++len) {
    const auto k = gaussian_kernel(len);
    CHECK(static_cast<int>(k.size()) == effective_kernel_length(len));
    double sum = 0.0;
    for (double v : k) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t i = 0; i < k.size(); ++i) CHECK(k[i] == doctest::Approx(k[k.size() - 1 - i]).epsilon(1e-15));
  }
}

TEST_CASE("blur: constant image, impulse, range") {
  const RgbImage flat(30, 30, Rgb{77, 12, 200});
  for (int len : {6, 11, 22}) CHECK(gaussian_blur(flat, len) == flat);

  RgbImage impulse(41, 41);
  impulse(20, 20) = Rgb{255, 255, 255};
  const RgbImage b = gaussian_blur_sigma(impulse, 1.0, 4);
  std::uint64_t total = 0;
  for (const auto& p : b) total += p.r;
  CHECK(std::abs(static_cast<double>(total) - 255.0) <= 41.0);  // rounding per pixel
  CHECK(b(20, 20).r == std::lround(255.0 / (2 * M_PI)));
  CHECK(b(20, 21) == b(21, 20));

  Rng rng(3);
  const RgbImage img = testing::random_image(25, 31, rng);
  const RgbImage blurred = gaussian_blur(img, 13);
  std::uint8_t lo = 255, hi = 0, blo = 255, bhi = 0;
  for (std::size_t i = 0; i < img.size(); ++i) {
    lo = std::min(lo, img[i].g), hi = std::max(hi, img[i].g);
    blo = std::min(blo, blurred[i].g), bhi = std::max(bhi, blurred[i].g);
  }
  CHECK(blo >= lo);
  CHECK(bhi <= hi);
  CHECK(serial::gaussian_blur_sigma(img, 2.2, 7) == gaussian_blur_sigma(img, 2.2, 7));
}

TEST_CASE("blur semigroup: two sigma blurs equal one sqrt(2) sigma blur") {
  RgbImage img(48, 48);
  for (int y = 0; y < 48; ++y)
    for (int x = 0; x < 48; ++x) {
      const auto v = static_cast<std::uint8_t>(((x / 8 + y / 8) % 2) * 200 + 20);
      img(y, x) = Rgb{v, v, v};
    }
  const double s = 1.5;
  const RgbImage twice = gaussian_blur_sigma(gaussian_blur_sigma(img, s, 8), s, 8);
  const RgbImage once = gaussian_blur_sigma(img, std::sqrt(2.0) * s, 11);
  for (int y = 12; y < 36; ++y)
    for (int x = 12; x < 36; ++x) CHECK(std::abs(int(twice(y, x).r) - int(once(y, x).r)) <= 1);
}

TEST_CASE("occlusion") {
  Rng rng(4);
  const Sample target = random_sample(32, 40, rng, 2);
  const Sample source = random_sample(32, 40, rng, 9);
  CHECK(paste_region(target, source, {0, 0, 32, 40}) == source);
  CHECK(paste_region(target, source, {5, 5, 0, 0}) == target);
  CHECK_THROWS_AS(paste_region(target, source, {30, 0, 5, 5}), ValidationError);
  for (int t = 0; t < 20; ++t) {
    Rect r;
    const Sample o = occlude(target, source, {0.1, 0.4}, 100 + t, &r);
    const double area = double(r.height) * r.width / (32.0 * 40.0);
    CHECK(area >= 0.07);
    CHECK(area <= 0.45);
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 40; ++x) {
        const bool in = y >= r.y && y < r.y + r.height && x >= r.x && x < r.x + r.width;
        const Sample& from = in ? source : target;
        CHECK(o.mask(y, x) == from.mask(y, x));
        CHECK(o.image(y, x) == from.image(y, x));
      }
  }
  CHECK_THROWS_AS(occlude(target, source, {0.0, 0.4}, 1), ValidationError);
  CHECK_THROWS_AS(occlude(target, random_sample(8, 8, rng, 1), {0.1, 0.4}, 1), ValidationError);
}

TEST_CASE("homography agrees with a DLT solve") {
  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    std::array<Point2, 4> from{{{0, 0}, {63, 0}, {63, 47}, {0, 47}}};
    std::array<Point2, 4> to = from;
    for (auto& p : to) {
      p.x += rng.uniform(-9, 9);
      p.y += rng.uniform(-7, 7);
    }
    const Homography h = homography_from_quads(from, to);
    std::array<std::array<double, 2>, 4> f, g;
    for (int i = 0; i < 4; ++i) {
      f[i] = {from[i].x, from[i].y};
      g[i] = {to[i].x, to[i].y};
      const Point2 q = h.apply(from[i]);
      CHECK(std::abs(q.x - to[i].x) < 1e-9);
      CHECK(std::abs(q.y - to[i].y) < 1e-9);
    }
    const auto d = oracle::homography_dlt(f, g);
    for (int i = 0; i < 9; ++i) CHECK(std::abs(h.m[i] - d[i]) < 1e-9);
  }
  const std::array<Point2, 4> sq{{{0, 0}, {1, 0}, {1, 1}, {0, 1}}};
  const std::array<Point2, 4> bowtie{{{0, 0}, {1, 1}, {1, 0}, {0, 1}}};
  CHECK_THROWS_AS(homography_from_quads(sq, bowtie), ValidationError);
}

TEST_CASE("perspective: identity, determinism, co-registration") {
  Rng rng(6);
  const Sample s = testing::indicator_sample(testing::ellipse_mask(96, 128, 48, 60, 30, 40));
  Homography h;
  CHECK(perspective(s, 0.0, 3, &h) == s);
  CHECK(h.m == Homography{}.m);
  CHECK(warp_perspective(s, Homography{}) == s);
  const Sample a = perspective(s, 0.15, 9, &h);
  CHECK(perspective(s, 0.15, 9) == a);
  CHECK(serial::warp_perspective(s, h) == a);
  CHECK_THROWS_AS(perspective(s, 0.3, 1), ValidationError);

  BinaryMask from_img(96, 128), from_mask(96, 128);
  std::size_t valid = 0;
  for (std::size_t i = 0; i < a.mask.size(); ++i) {
    if (a.mask[i] == kIgnoreLabel) {
      CHECK(a.image[i] == Rgb{0, 0, 0});
      continue;
    }
    ++valid;
    from_img[i] = a.image[i].r >= 128;
    from_mask[i] = a.mask[i];
  }
  CHECK(valid > 0);
  CHECK(iou(from_img, from_mask) >= 0.99);
}

TEST_CASE("augment_sample") {
  Rng rng(7);
  std::vector<Sample> pool;
  for (int i = 0; i < 4; ++i) pool.push_back(random_sample(32, 32, rng, static_cast<std::uint8_t>(i + 1)));
  AugmentConfig all;
  all.p_splice = all.p_blur = all.p_occlude = all.p_perspective = 1.0;
  const AugmentOutcome out = augment_sample(pool[0], pool, all, 5);
  REQUIRE(out.trace.size() == 4);
  CHECK(out.trace[0].rfind("splice ", 0) == 0);
  CHECK(out.trace[1].rfind("blur ", 0) == 0);
  CHECK(out.trace[2].rfind("occlude ", 0) == 0);
  CHECK(out.trace[3].rfind("perspective ", 0) == 0);
  CHECK(out.sample.image.dims() == pool[0].image.dims());
  const AugmentOutcome again = augment_sample(pool[0], pool, all, 5);
  CHECK(again.sample == out.sample);
  CHECK(again.trace == out.trace);

  AugmentConfig none = all;
  none.p_splice = none.p_blur = none.p_occlude = none.p_perspective = 0.0;
  const AugmentOutcome id = augment_sample(pool[0], pool, none, 5);
  CHECK(id.sample == pool[0]);
  CHECK(id.trace.empty());

  AugmentConfig bad;
  bad.p_blur = 1.5;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = AugmentConfig{};
  bad.blur_min = 4;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}
