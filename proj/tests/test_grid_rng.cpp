#include "doctest.h"

#include <cmath>
#include <set>

#include "attnmask/grid.hpp"
#include "attnmask/parallel.hpp"
#include "attnmask/rng.hpp"

using namespace attnmask;

TEST_CASE("grid indexing is row-major") {
  Grid<int> g(2, 3, std::vector<int>{0, 1, 2, 3, 4, 5});
  CHECK(g(1, 0) == 3);
  CHECK(g.row(1)[2] == 5);
  CHECK_THROWS_AS(Grid<int>(2, 2, std::vector<int>{1, 2, 3}), ValidationError);
  CHECK_THROWS_AS(Grid<int>(-1, 2), ValidationError);
}

TEST_CASE("probability map rejects values outside [0,1]") {
  CHECK_THROWS_AS(ProbabilityMap(Grid<double>(1, 2, std::vector<double>{0.5, 1.5})), ValidationError);
  CHECK_THROWS_AS(ProbabilityMap(Grid<double>(1, 1, std::vector<double>{std::nan("")})), ValidationError);
  CHECK(ProbabilityMap(Grid<double>(1, 2, std::vector<double>{0.25, 1.0})).max() == 1.0);
}

TEST_CASE("binary helpers") {
  BinaryMask m(1, 3, std::vector<std::uint8_t>{0, 1, 2});
  CHECK_THROWS_AS(require_binary(m, "m"), ValidationError);
  m[2] = 1;
  const ProbabilityMap p = to_probability(m);
  CHECK(p[0] == 0.0);
  CHECK(p[2] == 1.0);
  CHECK_THROWS_AS(require_same_dims({1, 2}, {2, 1}, "x"), ValidationError);
}

TEST_CASE("rng is deterministic and in range") {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const auto va = a.next_u64();
    CHECK(va == b.next_u64());
    (void)c.next_u64();
  }
  CHECK(Rng(1).next_u64() != Rng(2).next_u64());
  Rng r(7);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform01();
    CHECK((u >= 0.0 && u < 1.0));
    CHECK(r.below(7) < 7u);
  }
  CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
  CHECK(derive_seed(1, "a") != derive_seed(2, "a"));
  CHECK(derive_seed(1, "a") == derive_seed(1, "a"));
}

TEST_CASE("rng normal has unit moments") {
  Rng r(3);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double v = r.normal();
    s += v;
    s2 += v * v;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(std::abs(s2 / n - 1.0) < 0.02);
}

TEST_CASE("fnv1a reference values") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("exception slot rethrows the captured error") {
  ExceptionSlot slot;
  slot.run([] {});
  CHECK_NOTHROW(slot.rethrow());
  slot.run([] { throw RuntimeError("boom"); });
  CHECK_THROWS_AS(slot.rethrow(), RuntimeError);
}
