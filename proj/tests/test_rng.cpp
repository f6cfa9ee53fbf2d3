#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "mdsrecover/rng.hpp"

using namespace mdsr;

TEST_CASE("philox known-answer vectors") {
  using A4 = std::array<std::uint32_t, 4>;
  CHECK(philox4x32_10({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(philox4x32_10({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}) ==
        A4{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
}

TEST_CASE("generator output starts with the zero-counter block") {
  Philox g(0);
  CHECK(g() == 0x6627e8d5u);
  CHECK(g() == 0xe169c58du);
  CHECK(g() == 0xbc57ac4cu);
  CHECK(g() == 0x9b00dbd8u);
  CHECK(g() == philox4x32_10({1, 0, 0, 0}, {0, 0})[0]);
}

TEST_CASE("streams and keys are reproducible and distinct") {
  Philox a(42), b(42), c(43), d(42, 1);
  std::vector<std::uint32_t> va, vb, vc, vd;
  for (int i = 0; i < 16; ++i) {
    va.push_back(a());
    vb.push_back(b());
    vc.push_back(c());
    vd.push_back(d());
  }
  CHECK(va == vb);
  CHECK(va != vc);
  CHECK(va != vd);
}

TEST_CASE("derive_seed separates tags and indices") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 10; ++i)
    for (std::uint64_t j = 0; j < 10; ++j) seen.insert(derive_seed(7, "phase", {i, j}));
  CHECK(seen.size() == 100);
  CHECK(derive_seed(7, "a") != derive_seed(7, "b"));
  CHECK(derive_seed(7, "a", {1, 2}) != derive_seed(7, "a", {2, 1}));
  CHECK(derive_seed(7, "a", {3}) == derive_seed(7, "a", {3}));
}

TEST_CASE("uniform and normal moments") {
  Philox g(derive_seed(1, "moments"));
  const int n = 200000;
  double su = 0, su2 = 0, sn = 0, sn2 = 0, sn4 = 0;
  double umin = 1, umax = 0;
  for (int i = 0; i < n; ++i) {
    const double u = g.uniform();
    umin = std::min(umin, u);
    umax = std::max(umax, u);
    su += u;
    su2 += u * u;
    const double z = g.normal();
    sn += z;
    sn2 += z * z;
    sn4 += z * z * z * z;
  }
  CHECK(umin >= 0.0);
  CHECK(umax < 1.0);
  CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(su2 / n - (su / n) * (su / n) == doctest::Approx(1.0 / 12).epsilon(0.02));
  CHECK(std::abs(sn / n) < 0.01);
  CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.02));
  CHECK(sn4 / n == doctest::Approx(3.0).epsilon(0.05));
}

TEST_CASE("below is uniform over its range") {
  Philox g(9);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) ++counts[g.below(7)];
  for (int c : counts) CHECK(std::abs(c - n / 7) < 5 * std::sqrt(n / 7.0));
  CHECK(g.below(1) == 0);
  CHECK(g.below(0) == 0);
}

TEST_CASE("uniform_open_low never returns zero") {
  Philox g(3);
  for (int i = 0; i < 10000; ++i) {
    const double u = g.uniform_open_low();
    CHECK(u > 0.0);
    CHECK(u <= 1.0);
  }
}
