#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>

#include "mdsrecover/cmds.hpp"
#include "mdsrecover/datagen.hpp"
#include "mdsrecover/diagnostics.hpp"
#include "mdsrecover/error.hpp"
#include "mdsrecover/rng.hpp"
#include "oracles.hpp"

using namespace mdsr;

namespace {

Matrix random_matrix(Philox& g, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = g.normal();
  return m;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::InvalidInput;
}

double relative_distance_error(const Matrix& a, const Matrix& b) {
  const Matrix da = oracle::distances(a), db = oracle::distances(b);
  return (da - db).cwiseAbs().maxCoeff() / std::max(1e-300, da.cwiseAbs().maxCoeff());
}

}  // namespace

TEST_CASE("dissimilarity validation") {
  Matrix d(2, 2);
  d << 0, 1, 2, 0;
  CHECK(kind_of([&] { DissimilarityMatrix x(d); }) == ErrorKind::InvalidInput);
  d << 0, -1, -1, 0;
  CHECK(kind_of([&] { DissimilarityMatrix x(d); }) == ErrorKind::InvalidInput);
  d << 1, 1, 1, 0;
  CHECK(kind_of([&] { DissimilarityMatrix x(d); }) == ErrorKind::InvalidInput);
  CHECK(kind_of([] { DissimilarityMatrix x(Matrix(2, 3)); }) == ErrorKind::InvalidInput);
  d << 0, NAN, NAN, 0;
  CHECK(kind_of([&] { DissimilarityMatrix x(d); }) == ErrorKind::InvalidInput);
  d << 0, 3, 3, 0;
  const DissimilarityMatrix ok(d);
  CHECK(ok.squared_values()(0, 1) == 9.0);
  const DissimilarityMatrix sq(d, true);
  CHECK(sq.squared_values()(0, 1) == 3.0);
}

TEST_CASE("double centering") {
  SUBCASE("zero matrix") {
    const SymmetricMatrix b = double_center(DissimilarityMatrix(Matrix::Zero(3, 3)));
    CHECK(b.values().cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("two points at distance 2") {
    Matrix d(2, 2);
    d << 0, 2, 2, 0;
    const SymmetricMatrix b = double_center(DissimilarityMatrix(d));
    Matrix x(2, 1);
    x << -1, 1;
    CHECK((b.values() - oracle::centered_gram(x)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(b(0, 0) == doctest::Approx(1.0));
    CHECK(b(0, 1) == doctest::Approx(-1.0));
  }
  SUBCASE("random coordinates match the Gram oracle") {
    Philox g(21);
    for (int t = 0; t < 50; ++t) {
      const Matrix x = random_matrix(g, 6, 3);
      const SymmetricMatrix b = double_center(DissimilarityMatrix(oracle::distances(x)));
      CHECK((b.values() - oracle::centered_gram(x)).cwiseAbs().maxCoeff() <= 1e-8);
      CHECK(b.values().rowwise().sum().cwiseAbs().maxCoeff() <= 1e-8 * 6 * b.values().cwiseAbs().maxCoeff());
    }
  }
}

TEST_CASE("embedding") {
  SUBCASE("2x2 eigenpair") {
    Matrix b(2, 2);
    b << 1, -1, -1, 1;
    const Embedding e = embed(SymmetricMatrix(b), 1);
    CHECK(e.kept_eigenvalues(0) == doctest::Approx(2.0));
    CHECK(std::abs(e.coordinates(0, 0)) == doctest::Approx(1.0));
    CHECK(e.coordinates(0, 0) == doctest::Approx(-e.coordinates(1, 0)));
    CHECK(e.all_eigenvalues.size() == 2);
  }
  SUBCASE("errors") {
    CHECK(kind_of([] { embed(SymmetricMatrix::zeros(3), 1); }) == ErrorKind::RankTooLarge);
    CHECK(kind_of([] { embed(SymmetricMatrix(Matrix::Identity(3, 3)), 0); }) == ErrorKind::InvalidInput);
    try {
      embed(SymmetricMatrix(Matrix::Identity(3, 3)), 4);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::RankTooLarge);
      CHECK(std::string(e.what()).find('3') != std::string::npos);
    }
  }
  SUBCASE("column norms equal kept eigenvalues") {
    Philox g(22);
    const Matrix x = random_matrix(g, 12, 5);
    const Embedding e = embed(double_center(DissimilarityMatrix::from_coordinates(x)), 4);
    for (int j = 0; j < 4; ++j) {
      CHECK(e.coordinates.col(j).squaredNorm() == doctest::Approx(e.kept_eigenvalues(j)).epsilon(1e-8));
      CHECK(e.kept_eigenvalues(j) > 0.0);
    }
  }
}

TEST_CASE("noise-free two clusters preserve distances") {
  const ClusterModel m = build_simulation_model("2a", 40, 30, 0.0);
  const SampleSet s = sample(m, 0);
  const SymmetricMatrix b = double_center(DissimilarityMatrix::from_coordinates(s.x));
  const Embedding e = embed(b, positive_eigenvalue_count(sym_eigenvalues_desc(b)));
  CHECK(e.rank == 1);
  CHECK(relative_distance_error(s.x, e.coordinates) <= 1e-8);
}

TEST_CASE("round trip, translation and rotation invariance") {
  Philox g(23);
  for (int t = 0; t < 50; ++t) {
    const Eigen::Index n = 3 + static_cast<Eigen::Index>(g.below(15));
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(g.below(6));
    const Matrix x = random_matrix(g, n, d);
    const SymmetricMatrix b = double_center(DissimilarityMatrix::from_coordinates(x));
    const int rank = positive_eigenvalue_count(sym_eigenvalues_desc(b));
    CHECK(rank == std::min<Eigen::Index>(n - 1, d));
    const Embedding e = embed(b, rank);
    CHECK(relative_distance_error(x, e.coordinates) <= 1e-8);

    Vector shift = random_matrix(g, d, 1).col(0) * 100.0;
    const Matrix moved = x.rowwise() + shift.transpose();
    const SymmetricMatrix bt = double_center(DissimilarityMatrix::from_coordinates(moved));
    CHECK((bt.values() - b.values()).cwiseAbs().maxCoeff() <= 1e-8 * std::max(1.0, b.values().cwiseAbs().maxCoeff()));

    const Matrix q = Eigen::HouseholderQR<Matrix>(random_matrix(g, d, d)).householderQ();
    const Embedding er = embed(double_center(DissimilarityMatrix::from_coordinates(x * q)), rank);
    CHECK(relative_distance_error(e.coordinates, er.coordinates) <= 1e-8);
  }
}

TEST_CASE("thin-side embedding equals the literal pipeline") {
  Philox g(24);
  for (int t = 0; t < 20; ++t) {
    const Eigen::Index n = 10 + static_cast<Eigen::Index>(g.below(30));
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(g.below(8));
    const Matrix x = random_matrix(g, n, d);
    const int r = 1 + static_cast<int>(g.below(d));
    const Embedding fast = embed_coordinates(x, r);
    const Embedding literal = embed(double_center(DissimilarityMatrix::from_coordinates(x)), r);
    CHECK((fast.kept_eigenvalues - literal.kept_eigenvalues).cwiseAbs().maxCoeff() <=
          1e-9 * literal.kept_eigenvalues(0));
    CHECK(fast.all_eigenvalues.size() == n);
    CHECK((oracle::distances(fast.coordinates) - oracle::distances(literal.coordinates)).cwiseAbs().maxCoeff() <=
          1e-8 * oracle::distances(literal.coordinates).maxCoeff());
  }
  // Wide input goes through the N x N Gram.
  const Matrix wide = random_matrix(g, 6, 20);
  const Embedding a = embed_coordinates(wide, 3);
  const Embedding b = embed(double_center(DissimilarityMatrix::from_coordinates(wide)), 3);
  CHECK((a.kept_eigenvalues - b.kept_eigenvalues).cwiseAbs().maxCoeff() <= 1e-9 * b.kept_eigenvalues(0));
}

TEST_CASE("eigenratio rank selection") {
  Vector a(4);
  a << 100, 90, 1, 0.5;
  CHECK(select_rank_eigenratio(a, 1e-8) == 2);
  Vector b(3);
  b << 5, 1, 1e-12;
  CHECK(select_rank_eigenratio(b, 1e-8) == 1);
  Vector tie(4);
  tie << 8, 4, 2, 1;
  CHECK(select_rank_eigenratio(tie) == 1);
  Vector none(3);
  none << 1e-9, 0, 0;
  CHECK(kind_of([&] { select_rank_eigenratio(none); }) == ErrorKind::NotEnoughSignal);
  Vector unsorted(3);
  unsorted << 1, 2, 0;
  CHECK(kind_of([&] { select_rank_eigenratio(unsorted); }) == ErrorKind::InvalidInput);

  SUBCASE("noise-free balanced simplex gives k - 1") {
    for (int k = 2; k <= 6; ++k) {
      ClusterModel m;
      m.means = Matrix::Identity(k, k);
      m.sizes = balanced_sizes(10 * k, k);
      m.covariance.sigma = 0.0;
      const Vector ev = sym_eigenvalues_desc(double_center(DissimilarityMatrix::from_coordinates(m.mean_rows())));
      // Exhaustive scan: the first k - 1 eigenvalues are equal, the rest vanish.
      for (int i = 0; i + 1 < k - 1; ++i) CHECK(ev(i) == doctest::Approx(ev(i + 1)).epsilon(1e-10));
      CHECK(std::abs(ev(k - 1)) < 1e-10 * ev(0));
      CHECK(select_rank_eigenratio(ev) == k - 1);
    }
  }
}

TEST_CASE("debiasing") {
  Vector kept(2);
  kept << 10, 5;
  CHECK(debias_eigenvalues(kept, 0.0) == kept);
  const Vector out = debias_eigenvalues(kept, 2.0);
  CHECK(out(0) == 8.0);
  CHECK(out(1) == 3.0);
  CHECK(kind_of([&] { debias_eigenvalues(kept, 5.0); }) == ErrorKind::DebiasUnderflow);
  CHECK(kind_of([&] { debias_eigenvalues(kept, -1.0); }) == ErrorKind::InvalidInput);

  SUBCASE("embedding columns are rescaled and order is kept") {
    Philox g(25);
    const Matrix x = random_matrix(g, 20, 6) * 3.0;
    const Embedding e = embed_coordinates(x, 3);
    const Embedding d = debias(e, 1.0);
    CHECK(d.debiased);
    for (int j = 0; j < 3; ++j)
      CHECK(d.coordinates.col(j).squaredNorm() == doctest::Approx(e.kept_eigenvalues(j) - 1.0).epsilon(1e-10));
    for (int j = 0; j + 1 < 3; ++j) CHECK(d.kept_eigenvalues(j) >= d.kept_eigenvalues(j + 1));
    const Embedding same = debias(e, 0.0);
    CHECK(same.coordinates == e.coordinates);
  }

  SUBCASE("debiased eigenvalues are closer to the ideal spectrum in high dimension") {
    const ClusterModel m = build_simulation_model("2b", 100, 2000, 0.3);
    const Vector ideal = ideal_spectrum(m).eigenvalues;
    const GaussianNoise noise(m);
    double err_biased = 0.0, err_debiased = 0.0;
    for (std::uint64_t s = 0; s < 20; ++s) {
      const SampleSet data = sample(m, noise, derive_seed(26, "debias", {s}));
      const Embedding e = embed_coordinates(data.x, 4);
      const Vector fixed = debias_eigenvalues(e.kept_eigenvalues, m.trace_sigma());
      err_biased += (e.kept_eigenvalues - ideal.head(4)).cwiseAbs().mean();
      err_debiased += (fixed - ideal.head(4)).cwiseAbs().mean();
    }
    CHECK(err_debiased < err_biased);
  }
}

TEST_CASE("PSD projection") {
  SUBCASE("Euclidean input is a fixed point") {
    Philox g(27);
    const Matrix x = random_matrix(g, 8, 3);
    const DissimilarityMatrix d = DissimilarityMatrix::from_coordinates(x);
    const SymmetricMatrix b = double_center(d);
    const PsdProjection p = psd_project(d);
    CHECK((p.gram.values() - b.values()).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(p.discarded_mass <= 1e-8 * spectral_norm(b.values()));
  }
  SUBCASE("spectrum {1, -1} clips to {1, 0}") {
    Matrix b(2, 2);
    b << 0, 1, 1, 0;
    const PsdProjection p = psd_clip(SymmetricMatrix(b));
    const Vector ev = sym_eigenvalues_desc(p.gram);
    CHECK(ev(0) == doctest::Approx(1.0));
    CHECK(std::abs(ev(1)) < 1e-12);
    CHECK(p.discarded_mass == doctest::Approx(1.0));
  }
  SUBCASE("non-Euclidean dissimilarities match the clip oracle") {
    Philox g(28);
    for (int t = 0; t < 50; ++t) {
      Matrix d = Matrix::Zero(4, 4);
      for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j) d(i, j) = d(j, i) = 0.1 + 3.0 * g.uniform();
      const DissimilarityMatrix dm(d, false, false);
      const PsdProjection p = psd_project(dm);
      const Matrix j = Matrix::Identity(4, 4) - Matrix::Constant(4, 4, 0.25);
      const Matrix bref = -0.5 * j * d.cwiseProduct(d) * j;
      Eigen::SelfAdjointEigenSolver<Matrix> es(bref);
      const Matrix clipped =
          es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() * es.eigenvectors().transpose();
      CHECK((p.gram.values() - clipped).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, bref.cwiseAbs().maxCoeff()));
      const Vector ev = sym_eigenvalues_desc(p.gram);
      CHECK(ev(3) >= -1e-10 * std::max(ev(0), 0.0));
      double neg = 0.0;
      for (int i = 0; i < 4; ++i) neg += std::max(0.0, -es.eigenvalues()(i));
      CHECK(p.discarded_mass == doctest::Approx(neg).epsilon(1e-10));
    }
  }
}

TEST_CASE("delocalization of ideal eigenvectors") {
  Philox g(29);
  for (int t = 0; t < 100; ++t) {
    const int k = 2 + static_cast<int>(g.below(5));
    const int d = 1 + static_cast<int>(g.below(6));
    ClusterModel m;
    m.means = random_matrix(g, k, d);
    for (int j = 0; j < k; ++j) m.sizes.push_back(1 + static_cast<int>(g.below(15)));
    const int n_min = *std::min_element(m.sizes.begin(), m.sizes.end());
    const Matrix mm = m.mean_rows();
    const auto eig = sym_eig_desc(SymmetricMatrix(mm * mm.transpose()));
    for (Eigen::Index i = 0; i < eig.eigenvalues.size(); ++i) {
      if (eig.eigenvalues(i) <= 1e-8 * eig.eigenvalues(0)) break;
      CHECK(eig.eigenvectors.col(i).cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(static_cast<double>(n_min)) + 1e-10);
    }
  }
}
