#include "doctest.h"

#include "attnmask/binarize.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace attnmask;

TEST_CASE("iou examples") {
  Rng rng(1);
  const BinaryMask m = testing::random_mask(6, 6, rng);
  CHECK(iou(m, m) == 1.0);
  BinaryMask a(2, 2), b(2, 2);
  a(0, 0) = a(0, 1) = 1;
  b(0, 1) = b(1, 1) = 1;
  CHECK(iou(a, b) == doctest::Approx(1.0 / 3.0));
  BinaryMask c(2, 2), d(2, 2);
  c(0, 0) = 1;
  d(1, 1) = 1;
  CHECK(iou(c, d) == 0.0);
  CHECK(iou(BinaryMask(3, 3), BinaryMask(3, 3)) == 1.0);
  CHECK_THROWS_AS(iou(BinaryMask(2, 2), BinaryMask(2, 3)), ValidationError);
}

TEST_CASE("iou is symmetric and bounded") {
  Rng rng(2);
  for (int t = 0; t < 50; ++t) {
    const BinaryMask a = testing::random_mask(5, 5, rng), b = testing::random_mask(5, 5, rng);
    CHECK(iou(a, b) == iou(b, a));
    CHECK((iou(a, b) >= 0.0 && iou(a, b) <= 1.0));
    CHECK((iou(a, b) == 1.0) == (a == b));
  }
}

TEST_CASE("threshold examples and monotonicity") {
  CHECK(threshold(ProbabilityMap(Grid<double>(3, 3, 0.9)), 0.5) == BinaryMask(3, 3, 1));
  CHECK(threshold(ProbabilityMap(Grid<double>(3, 3, 0.1)), 0.5) == BinaryMask(3, 3, 0));
  CHECK(threshold(ProbabilityMap(Grid<double>(1, 2, std::vector<double>{0.3, 0.7})), 0.5) ==
        BinaryMask(1, 2, std::vector<std::uint8_t>{0, 1}));
  CHECK(threshold(ProbabilityMap(Grid<double>(1, 1, 0.5)), 0.5)[0] == 1);
  CHECK_THROWS_AS(threshold(ProbabilityMap(Grid<double>(1, 1, 0.5)), 0.0), ValidationError);
  CHECK_THROWS_AS(threshold(ProbabilityMap(Grid<double>(1, 1, 0.5)), 1.0), ValidationError);
  Rng rng(3);
  Grid<double> g(8, 8);
  for (auto& v : g) v = rng.uniform01();
  const ProbabilityMap p(g);
  for (double g1 = 0.05; g1 < 0.9; g1 += 0.1) {
    const BinaryMask lo = threshold(p, g1), hi = threshold(p, g1 + 0.05);
    for (std::size_t i = 0; i < lo.size(); ++i) CHECK((hi[i] <= lo[i]));
  }
}

TEST_CASE("search space validation") {
  CHECK_THROWS_AS(ThresholdSearchSpace(std::vector<double>{}), ValidationError);
  CHECK_THROWS_AS(ThresholdSearchSpace(std::vector<double>{0.5, 0.4}), ValidationError);
  CHECK_THROWS_AS(ThresholdSearchSpace(std::vector<double>{0.0, 0.4}), ValidationError);
  const auto d = ThresholdSearchSpace::default_space();
  CHECK(d.size() == 91);
  CHECK(d.gammas().front() == 0.05);
  CHECK(d.gammas().back() == 0.95);
  CHECK(d.gammas()[35] == 0.4);
}

TEST_CASE("adaptive threshold recovers a planted threshold") {
  Rng rng(4);
  Grid<double> g(16, 16);
  for (auto& v : g) v = rng.uniform(0.01, 0.99);
  const ProbabilityMap map(g);
  const BinaryMask aff = threshold(map, 0.4);
  const ThresholdSearchSpace space({0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9});
  const AdaptiveThreshold at = adaptive_threshold(map, aff, space);
  CHECK(at.gamma == 0.4);
  CHECK(at.score == 1.0);
  CHECK(at.mask == aff);
}

TEST_CASE("ties go to the smallest gamma") {
  const ProbabilityMap map(Grid<double>(4, 4, 0.5));
  const BinaryMask all_fg(4, 4, 1);
  CHECK(adaptive_threshold(map, all_fg, ThresholdSearchSpace({0.2, 0.3, 0.5, 0.7})).gamma == 0.2);
  CHECK(adaptive_threshold(map, all_fg, ThresholdSearchSpace::default_space()).gamma == 0.05);
}

TEST_CASE("adaptive threshold matches the exhaustive scan and its own scores") {
  Rng rng(5);
  const auto space = ThresholdSearchSpace::default_space();
  for (int t = 0; t < 50; ++t) {
    Grid<double> g(12, 17);
    for (auto& v : g) v = rng.uniform01();
    const ProbabilityMap map(g);
    const BinaryMask aff = testing::random_mask(12, 17, rng, rng.uniform01());
    double oracle_score = 0.0;
    const double expect = oracle::best_gamma(std::vector<double>(g.begin(), g.end()),
                                             std::vector<std::uint8_t>(aff.begin(), aff.end()), space.gammas(), &oracle_score);
    const AdaptiveThreshold at = adaptive_threshold(map, aff, space);
    CHECK(at.gamma == expect);
    CHECK(at.score == oracle_score);
    for (double s : threshold_scores(map, aff, space)) CHECK(s <= at.score);
    CHECK(serial::adaptive_threshold(map, aff, space).gamma == at.gamma);
  }
  CHECK_THROWS_AS(adaptive_threshold(ProbabilityMap(Grid<double>(2, 2, 0.5)), BinaryMask(3, 2), space), ValidationError);
}

TEST_CASE("strictly increasing rescale of map and gammas keeps the mask") {
  Rng rng(6);
  Grid<double> g(10, 10);
  for (auto& v : g) v = rng.uniform01();
  const BinaryMask aff = testing::random_mask(10, 10, rng);
  auto f = [](double v) { return v * v; };
  Grid<double> g2 = g;
  for (auto& v : g2) v = f(v);
  std::vector<double> gammas, gammas2;
  for (double x = 0.1; x < 0.95; x += 0.05) {
    gammas.push_back(x);
    gammas2.push_back(f(x));
  }
  const auto a = adaptive_threshold(ProbabilityMap(g), aff, ThresholdSearchSpace(gammas));
  const auto b = adaptive_threshold(ProbabilityMap(g2), aff, ThresholdSearchSpace(gammas2));
  CHECK(a.mask == b.mask);
}
