#include <doctest.h>

#include <cmath>
#include <random>

#include "mdsrecover/clustering.hpp"
#include "mdsrecover/cmds.hpp"
#include "mdsrecover/error.hpp"
#include "mdsrecover/phase.hpp"

using namespace mdsr;

namespace {

PhaseGridConfig two_point_grid(double sigma, int n, int reps) {
  PhaseGridConfig c;
  c.model.means = Matrix(2, 1);
  c.model.means << 0.0, 1.0;
  c.axis = SweepAxis::N;
  c.fixed_value = 1;
  c.axis_values = {n};
  c.sigma_values = {sigma};
  c.replicates = reps;
  c.rank = {RankMode::Fixed, 1};
  c.base_seed = 11;
  return c;
}

PhaseGridConfig small_1a() {
  PhaseGridConfig c;
  c.model.preset = "1a";
  c.axis = SweepAxis::N;
  c.fixed_value = 2;
  c.axis_values = {8, 16, 32};
  for (int i = 0; i < 6; ++i) c.sigma_values.push_back(1e-8 * std::pow(2.0, i) * 0.5);
  c.replicates = 20;
  c.rank = {RankMode::Fixed, 2};
  c.base_seed = 3;
  return c;
}

// Hand-made result with given fractions and log-SNR equal to -sigma index.
PhaseGridResult planted(const Matrix& fractions, const std::vector<int>& axis, SweepAxis ax = SweepAxis::D) {
  PhaseGridResult r;
  r.config.axis = ax;
  r.config.axis_values = axis;
  r.fractions = fractions;
  r.snr_values.resize(fractions.rows(), fractions.cols());
  for (Eigen::Index s = 0; s < fractions.rows(); ++s)
    for (Eigen::Index a = 0; a < fractions.cols(); ++a) r.snr_values(s, a) = std::exp(-static_cast<double>(s));
  return r;
}

// O(n^2) reference for the nonincreasing least-squares fit: repeatedly
// average any adjacent increasing pair of level sets until none remain.
std::vector<double> isotonic_oracle(const std::vector<double>& v) {
  std::vector<std::vector<double>> groups;
  for (double x : v) groups.push_back({x});
  auto mean = [](const std::vector<double>& g) {
    double s = 0;
    for (double x : g) s += x;
    return s / static_cast<double>(g.size());
  };
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i + 1 < groups.size(); ++i) {
      if (mean(groups[i]) < mean(groups[i + 1]) - 1e-15) {
        groups[i].insert(groups[i].end(), groups[i + 1].begin(), groups[i + 1].end());
        groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(i) + 1);
        changed = true;
        break;
      }
    }
  }
  std::vector<double> out;
  for (const auto& g : groups) out.insert(out.end(), g.size(), mean(g));
  return out;
}

}  // namespace

TEST_CASE("noise-free single cell recovers every replicate") {
  const auto r = run_phase(two_point_grid(0.0, 10, 5));
  CHECK(r.fractions(0, 0) == 1.0);
  CHECK(r.recovered[0][0] == 5);
  CHECK_FALSE(r.unreliable);
  CHECK(std::isinf(r.snr_values(0, 0)));
}

TEST_CASE("overwhelming noise almost never recovers") {
  const auto r = run_phase(two_point_grid(1e6, 40, 20));
  CHECK(r.fractions(0, 0) <= 0.05);
}

TEST_CASE("fractions are counts over J and independent of thread count") {
  PhaseGridConfig c = small_1a();
  c.threads = 1;
  const auto one = run_phase(c);
  c.threads = 3;
  const auto three = run_phase(c);
  c.threads = 0;
  const auto all = run_phase(c);
  CHECK(one.fractions == three.fractions);
  CHECK(one.fractions == all.fractions);
  for (Eigen::Index i = 0; i < one.fractions.size(); ++i) {
    const double f = one.fractions.data()[i];
    CHECK(f >= 0.0);
    CHECK(f <= 1.0);
    CHECK(f * c.replicates == doctest::Approx(std::round(f * c.replicates)).epsilon(1e-12));
  }
}

TEST_CASE("recovery is nonincreasing in sigma up to binomial noise") {
  const PhaseGridConfig c = small_1a();
  const auto r = run_phase(c);
  const double j = c.replicates;
  for (Eigen::Index a = 0; a < r.fractions.cols(); ++a) {
    for (Eigen::Index s = 0; s + 1 < r.fractions.rows(); ++s) {
      const double p = 0.5 * (r.fractions(s, a) + r.fractions(s + 1, a));
      const double sd = std::sqrt(std::max(p * (1 - p), 1.0 / j) * 2.0 / j);
      CHECK(r.fractions(s + 1, a) <= r.fractions(s, a) + 3.0 * sd);
    }
  }
  // The grid spans both sides of the boundary.
  CHECK(r.fractions(0, 2) == 1.0);
  CHECK(r.fractions(r.fractions.rows() - 1, 0) < 0.5);
}

TEST_CASE("debiasing with zero trace changes nothing") {
  PhaseGridConfig c = small_1a();
  c.sigma_values = {0.0};
  const auto plain = run_phase(c);
  c.debias = true;
  const auto debiased = run_phase(c);
  CHECK(plain.fractions == debiased.fractions);
}

TEST_CASE("replicate fast path matches the literal pipeline") {
  PhaseGridConfig c;
  c.model.preset = "2a";
  c.axis = SweepAxis::D;
  c.fixed_value = 30;
  c.axis_values = {64};
  c.sigma_values = {0.25};
  c.rank = {RankMode::Fixed, 2};
  const ClusterModel model = c.model.build(30, 64, 0.25);
  const GaussianNoise noise(model);
  int agree = 0, recovered = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto fast = run_replicate(c, model, noise, seed);
    const SampleSet s = sample(model, noise, seed);
    const Embedding e = embed(double_center(DissimilarityMatrix::from_coordinates(s.x)), 2);
    const LabelVector pred = hierarchical(e.coordinates, 2, Linkage::Single);
    const bool literal = agreement(LabelVector(s.labels, 2), pred) == 1.0;
    agree += fast.recovered == literal;
    recovered += literal;
    CHECK_FALSE(fast.failed);
  }
  CHECK(agree == 40);
  // Both outcomes occur, so the comparison is not vacuous.
  CHECK(recovered > 0);
  CHECK(recovered < 40);
}

TEST_CASE("pgr criterion on separated clusters") {
  PhaseGridConfig c = two_point_grid(1e-3, 12, 4);
  c.criterion = RecoveryCriterion::Pgr;
  CHECK(run_phase(c).fractions(0, 0) == 1.0);
}

TEST_CASE("failed replicates mark the grid unreliable") {
  // Rank larger than the sample size fails every replicate.
  PhaseGridConfig c = two_point_grid(0.1, 3, 5);
  c.rank = {RankMode::Fixed, 5};
  const auto r = run_phase(c);
  CHECK(r.failures[0][0] == 5);
  CHECK(r.fractions(0, 0) == 0.0);
  CHECK(r.unreliable);
}

TEST_CASE("grid validation") {
  auto bad = [](auto mutate) {
    PhaseGridConfig c = small_1a();
    mutate(c);
    CHECK_THROWS_AS(validate(c), Error);
  };
  bad([](PhaseGridConfig& c) { c.axis_values.clear(); });
  bad([](PhaseGridConfig& c) { c.sigma_values.clear(); });
  bad([](PhaseGridConfig& c) { c.replicates = 0; });
  bad([](PhaseGridConfig& c) { c.axis_values = {16, 8}; });
  bad([](PhaseGridConfig& c) { c.sigma_values = {0.2, 0.1}; });
  bad([](PhaseGridConfig& c) { c.sigma_values = {-1.0}; });
  bad([](PhaseGridConfig& c) { c.clustering = "ward"; });
  bad([](PhaseGridConfig& c) { c.rank = {RankMode::Fixed, 0}; });
  bad([](PhaseGridConfig& c) { c.axis_values = {2, 8}; });  // N < k
  bad([](PhaseGridConfig& c) { c.threads = -1; });
  CHECK_NOTHROW(validate(small_1a()));
}

TEST_CASE("isotonic fit matches the merge oracle") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> v(1 + gen() % 12);
    for (auto& x : v) x = std::round(u(gen) * 20) / 20;
    const auto fit = isotonic_nonincreasing(v);
    const auto ref = isotonic_oracle(v);
    REQUIRE(fit.size() == v.size());
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(fit[i] == doctest::Approx(ref[i]).epsilon(1e-12));
    for (std::size_t i = 0; i + 1 < v.size(); ++i) CHECK(fit[i] >= fit[i + 1] - 1e-15);
  }
  CHECK(isotonic_nonincreasing({1.0, 0.5, 0.0}) == std::vector<double>{1.0, 0.5, 0.0});
  CHECK(isotonic_nonincreasing({0.0, 1.0}) == std::vector<double>{0.5, 0.5});
}

TEST_CASE("boundary fit recovers a planted line") {
  // Column a switches from 1 to 0 between sigma rows a and a+1, so the
  // crossing log-SNR is -(a + 0.5).
  const std::vector<int> axis = {2, 4, 8, 16};
  Matrix f = Matrix::Zero(6, 4);
  for (int a = 0; a < 4; ++a)
    for (int s = 0; s <= a; ++s) f(s, a) = 1.0;
  const BoundaryFit fit = fit_boundary(planted(f, axis));
  REQUIRE(fit.crossings.size() == 4);
  CHECK(fit.transform == "logd");
  // log SNR = -(a + 0.5) with x = log 2^(a+1) = (a + 1) log 2.
  CHECK(fit.slope == doctest::Approx(-1.0 / std::log(2.0)));
  CHECK(fit.intercept == doctest::Approx(0.5));
  CHECK(fit.r_squared == doctest::Approx(1.0));

  const BoundaryFit nfit = fit_boundary(planted(f, {4, 16, 256, 65536}, SweepAxis::N));
  CHECK(nfit.transform == "loglogN");
  CHECK(nfit.crossings.front().x == doctest::Approx(std::log(std::log(4.0))));
}

TEST_CASE("boundary fit is unchanged by a duplicated sigma row") {
  const std::vector<int> axis = {2, 4, 8};
  Matrix f(4, 3);
  f << 1.0, 1.0, 1.0,  //
      0.6, 0.9, 1.0,   //
      0.1, 0.3, 0.7,   //
      0.0, 0.0, 0.2;
  const BoundaryFit base = fit_boundary(planted(f, axis));

  // Repeat row 2 with the same SNR; the isotonic fit and every crossing stay put.
  PhaseGridResult dup = planted(f, axis);
  Matrix f2(5, 3), snr2(5, 3);
  f2 << f.topRows(3), f.row(2), f.row(3);
  snr2 << dup.snr_values.topRows(3), dup.snr_values.row(2), dup.snr_values.row(3);
  dup.fractions = f2;
  dup.snr_values = snr2;
  const BoundaryFit again = fit_boundary(dup);
  CHECK(again.slope == doctest::Approx(base.slope).epsilon(1e-12));
  CHECK(again.intercept == doctest::Approx(base.intercept).epsilon(1e-12));
}

TEST_CASE("boundary fit needs two crossing columns") {
  const std::vector<int> axis = {2, 4, 8};
  CHECK_THROWS_AS(fit_boundary(planted(Matrix::Constant(5, 3, 1.0), axis)), Error);
  CHECK_THROWS_AS(fit_boundary(planted(Matrix::Zero(5, 3), axis)), Error);
  try {
    fit_boundary(planted(Matrix::Constant(5, 3, 1.0), axis));
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InsufficientCrossings);
  }
  // One crossing column and two excluded ones.
  Matrix f = Matrix::Constant(5, 3, 1.0);
  f.col(1) << 1, 1, 0, 0, 0;
  CHECK_THROWS_AS(fit_boundary(planted(f, axis)), Error);
}

TEST_CASE("excluded columns are reported") {
  const std::vector<int> axis = {2, 4, 8};
  Matrix f(3, 3);
  f << 1, 1, 1,  //
      0, 1, 1,   //
      0, 0, 1;
  const BoundaryFit fit = fit_boundary(planted(f, axis));
  CHECK(fit.crossings.size() == 2);
  REQUIRE(fit.excluded_columns.size() == 1);
  CHECK(fit.excluded_columns[0] == 2);
}

TEST_CASE("grid snr follows the mean gap and sigma") {
  const PhaseGridConfig c = two_point_grid(0.5, 10, 1);
  const Matrix snr = grid_snr(c);
  CHECK(snr(0, 0) == doctest::Approx(4.0));
}

TEST_CASE("replicate seeds are distinct across cells") {
  CHECK(replicate_seed(1, 0, 0, 0) != replicate_seed(1, 0, 0, 1));
  CHECK(replicate_seed(1, 0, 1, 0) != replicate_seed(1, 1, 0, 0));
  CHECK(replicate_seed(1, 2, 3, 4) == replicate_seed(1, 2, 3, 4));
  CHECK(replicate_seed(1, 2, 3, 4) != replicate_seed(2, 2, 3, 4));
}
