#include "mdsrecover/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mdsrecover/error.hpp"
#include "mdsrecover/rng.hpp"

namespace mdsr {

std::string to_string(CovarianceKind kind) {
  switch (kind) {
    case CovarianceKind::Isotropic: return "isotropic";
    case CovarianceKind::Toeplitz: return "toeplitz";
    case CovarianceKind::Knn: return "knn";
  }
  return "isotropic";
}

CovarianceKind covariance_kind_from_string(const std::string& name) {
  if (name == "isotropic") return CovarianceKind::Isotropic;
  if (name == "toeplitz") return CovarianceKind::Toeplitz;
  if (name == "knn") return CovarianceKind::Knn;
  fail(ErrorKind::InvalidInput, "unknown covariance kind '" + name + "'");
}

Matrix make_toeplitz_cov(double sigma, int d) {
  require(std::isfinite(sigma) && sigma > 0.0, "toeplitz covariance needs sigma > 0");
  require(d >= 1, "toeplitz covariance needs d >= 1");
  const double var = sigma * sigma;
  Matrix cov(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) cov(i, j) = var * std::pow(0.7, std::abs(i - j));
  return cov;
}

KnnCovariance make_knn_cov_from_points(double sigma, const Matrix& points, int neighbors) {
  require(std::isfinite(sigma) && sigma > 0.0, "knn covariance needs sigma > 0");
  const int d = static_cast<int>(points.rows());
  require(neighbors >= 1, "knn covariance needs K >= 1");
  require(neighbors < d, "knn covariance needs K < d");
  const double var = sigma * sigma;

  Matrix dist(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) dist(i, j) = (points.row(i) - points.row(j)).norm();

  // Directed relation: i is among j's K nearest (ties by index), then OR.
  std::vector<char> linked(static_cast<std::size_t>(d) * d, 0);
  std::vector<int> order(d);
  for (int j = 0; j < d; ++j) {
    order.resize(d);
    std::iota(order.begin(), order.end(), 0);
    order.erase(order.begin() + j);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return dist(a, j) < dist(b, j); });
    for (int t = 0; t < neighbors; ++t) {
      const int i = order[t];
      linked[static_cast<std::size_t>(i) * d + j] = 1;
      linked[static_cast<std::size_t>(j) * d + i] = 1;
    }
  }

  KnnCovariance out;
  out.raw = Matrix::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    out.raw(i, i) = var;
    for (int j = 0; j < d; ++j)
      if (i != j && linked[static_cast<std::size_t>(i) * d + j]) out.raw(i, j) = var * dist(i, j);
  }

  const SpectralDecomposition eig = sym_eig_desc(SymmetricMatrix(out.raw));
  if (eig.eigenvalues(d - 1) < 0.0) {
    out.repaired = true;
    for (int i = 0; i < d; ++i)
      if (eig.eigenvalues(i) < 0.0) out.clipped_mass += -eig.eigenvalues(i);
    const Vector clipped = eig.eigenvalues.cwiseMax(0.0);
    out.covariance = eig.eigenvectors * clipped.asDiagonal() * eig.eigenvectors.transpose();
    out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  } else {
    out.covariance = out.raw;
  }
  return out;
}

KnnCovariance make_knn_cov(double sigma, int d, int neighbors, double cube_side, std::uint64_t seed) {
  require(d >= 2, "knn covariance needs d >= 2");
  require(neighbors < d, "knn covariance needs K < d");
  require(std::isfinite(cube_side) && cube_side > 0.0, "knn covariance needs c > 0");
  Philox rng(derive_seed(seed, "knn-points"));
  Matrix points(d, 2);
  for (int i = 0; i < d; ++i) {
    points(i, 0) = cube_side * rng.uniform();
    points(i, 1) = cube_side * rng.uniform();
  }
  return make_knn_cov_from_points(sigma, points, neighbors);
}

int ClusterModel::n() const { return std::accumulate(sizes.begin(), sizes.end(), 0); }

std::vector<int> ClusterModel::labels() const {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(n()));
  for (std::size_t j = 0; j < sizes.size(); ++j) out.insert(out.end(), static_cast<std::size_t>(sizes[j]), static_cast<int>(j) + 1);
  return out;
}

Matrix ClusterModel::mean_rows() const {
  Matrix m(n(), d());
  Eigen::Index row = 0;
  for (std::size_t j = 0; j < sizes.size(); ++j)
    for (int t = 0; t < sizes[j]; ++t) m.row(row++) = means.row(static_cast<Eigen::Index>(j));
  return m;
}

double ClusterModel::trace_sigma() const {
  // Every construction keeps sigma^2 on the diagonal, except a repaired KNN
  // matrix whose diagonal moves slightly.
  if (covariance.sigma == 0.0) return 0.0;
  if (covariance.kind == CovarianceKind::Knn) return realize_covariance(*this).trace();
  return static_cast<double>(d()) * covariance.sigma * covariance.sigma;
}

void validate(const ClusterModel& model) {
  require(model.k() >= 1, "cluster model needs k >= 1");
  require(model.d() >= 1, "cluster model needs d >= 1");
  require(static_cast<int>(model.sizes.size()) == model.k(), "cluster model: sizes must have k entries");
  for (int s : model.sizes) require(s >= 1, "cluster model: every cluster size must be >= 1");
  require_finite(model.means, "cluster means");
  require(std::isfinite(model.covariance.sigma) && model.covariance.sigma >= 0.0, "cluster model: sigma must be >= 0");
}

Matrix realize_covariance(const ClusterModel& model) {
  const int d = model.d();
  const double sigma = model.covariance.sigma;
  if (sigma == 0.0) return Matrix::Zero(d, d);
  switch (model.covariance.kind) {
    case CovarianceKind::Isotropic: return sigma * sigma * Matrix::Identity(d, d);
    case CovarianceKind::Toeplitz: return make_toeplitz_cov(sigma, d);
    case CovarianceKind::Knn: {
      const auto& p = model.covariance.knn;
      return make_knn_cov(sigma, d, p.neighbors, p.cube_side, p.seed).covariance;
    }
  }
  return Matrix::Zero(d, d);
}

GaussianNoise::GaussianNoise(const ClusterModel& model) : d_(model.d()), sigma_(model.covariance.sigma) {
  validate(model);
  if (sigma_ == 0.0 || model.covariance.kind == CovarianceKind::Isotropic) return;
  const SpectralDecomposition eig = sym_eig_desc(SymmetricMatrix(realize_covariance(model)));
  const double top = std::max(eig.eigenvalues(0), 0.0);
  if (eig.eigenvalues(d_ - 1) < -1e-10 * std::max(top, 1e-300))
    fail(ErrorKind::InvalidInput, "noise covariance is not positive semidefinite");
  const Vector root = eig.eigenvalues.cwiseMax(0.0).cwiseSqrt();
  root_ = eig.eigenvectors * root.asDiagonal() * eig.eigenvectors.transpose();
}

Matrix GaussianNoise::draw(Eigen::Index n, std::uint64_t seed) const {
  if (sigma_ == 0.0) return Matrix::Zero(n, d_);
  Philox rng(derive_seed(seed, "noise"));
  Matrix z(n, d_);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d_; ++j) z(i, j) = rng.normal();
  if (!root_) return sigma_ * z;
  return z * (*root_);
}

SampleSet sample(const ClusterModel& model, const GaussianNoise& noise, std::uint64_t seed) {
  validate(model);
  SampleSet out;
  out.labels = model.labels();
  out.mean_rows = model.mean_rows();
  out.noise = noise.draw(model.n(), seed);
  out.x = out.mean_rows + out.noise;
  return out;
}

SampleSet sample(const ClusterModel& model, std::uint64_t seed) { return sample(model, GaussianNoise(model), seed); }

const std::vector<SimulationPreset>& simulation_presets() {
  static const std::vector<SimulationPreset> presets = {
      {"1a", 4, 2, 20, CovarianceKind::Isotropic, 200, 2, true},
      {"1b", 4, 3, 50, CovarianceKind::Toeplitz, 200, 10, true},
      {"1c", 4, 3, 50, CovarianceKind::Knn, 200, 20, true},
      {"2a", 2, 1, 20, CovarianceKind::Isotropic, 200, 100, false},
      {"2b", 5, 4, 20, CovarianceKind::Isotropic, 100, 100, false},
      {"2c", 5, 4, 20, CovarianceKind::Toeplitz, 100, 100, false},
      {"2d", 5, 4, 20, CovarianceKind::Knn, 100, 100, false},
      {"2e", 3, 2, 20, CovarianceKind::Isotropic, 60, 100, false},
      {"2f", 5, 4, 20, CovarianceKind::Isotropic, 100, 100, false},
      // Five Gaussians in d = 1000 with Sigma = 0.3 I and 200 points each.
      {"toy", 5, 2, 10, CovarianceKind::Isotropic, 1000, 1000, false},
  };
  return presets;
}

const SimulationPreset& simulation_preset(const std::string& name) {
  for (const auto& p : simulation_presets())
    if (p.name == name) return p;
  fail(ErrorKind::InvalidInput, "unknown simulation preset '" + name + "'");
}

std::vector<int> balanced_sizes(int n, int k) {
  require(k >= 1 && n >= k, "balanced sizes need n >= k >= 1");
  std::vector<int> sizes(static_cast<std::size_t>(k), n / k);
  for (int j = 0; j < n % k; ++j) ++sizes[static_cast<std::size_t>(j)];
  return sizes;
}

namespace {

Matrix signal_means(const std::string& name, int d) {
  auto padded = [d](std::initializer_list<std::initializer_list<double>> rows, int signal_dims) {
    require(d >= signal_dims, "preset needs at least " + std::to_string(signal_dims) + " dimensions");
    Matrix m = Matrix::Zero(static_cast<Eigen::Index>(rows.size()), d);
    Eigen::Index i = 0;
    for (const auto& row : rows) {
      Eigen::Index j = 0;
      for (double v : row) m(i, j++) = v;
      ++i;
    }
    return m;
  };
  auto scaled_basis = [d](int k, double value) {
    require(d >= k, "preset needs at least " + std::to_string(k) + " dimensions");
    Matrix m = Matrix::Zero(k, d);
    for (int i = 0; i < k; ++i) m(i, i) = value;
    return m;
  };

  if (name == "1a") return padded({{1e-7, 0}, {-1e-7, 0}, {0, 1e-7}, {0, -1e-7}}, 2);
  if (name == "1b" || name == "1c") return scaled_basis(4, 1e-7);
  if (name == "2a") return scaled_basis(2, 1.0);
  if (name == "2b" || name == "2c" || name == "2d") return scaled_basis(5, 0.5);
  if (name == "2e") return padded({{0, 0}, {0.4, 0.6}, {1, 1}}, 2);
  if (name == "2f")
    return padded({{0, 0, 0, 0},
                   {0.49, 0.51, 0, 0},
                   {-0.49, -0.51, 0, 0},
                   {0, 0, 0.49, 0.51},
                   {0, 0, -0.49, -0.51}},
                  4);
  if (name == "toy") return padded({{0, 0}, {1, 1}, {1, -1}, {-1, 1}, {-1, -1}}, 2);
  fail(ErrorKind::InvalidInput, "unknown simulation preset '" + name + "'");
}

}  // namespace

ClusterModel build_simulation_model(const std::string& name, int n, int d, double sigma, std::uint64_t knn_seed) {
  const SimulationPreset& preset = simulation_preset(name);
  require(n >= preset.k, "preset " + name + " needs N >= " + std::to_string(preset.k));
  require(std::isfinite(sigma) && sigma >= 0.0, "sigma must be >= 0");
  ClusterModel model;
  model.means = signal_means(name, d);
  model.sizes = balanced_sizes(n, preset.k);
  model.covariance.kind = preset.covariance;
  model.covariance.sigma = sigma;
  if (name == "1c") model.covariance.knn = KnnParams{4, 1.0, knn_seed};
  if (name == "2d") model.covariance.knn = KnnParams{10, 0.5, knn_seed};
  if (preset.covariance == CovarianceKind::Knn)
    require(model.covariance.knn.neighbors < d, "preset " + name + " needs d > K");
  return model;
}

}  // namespace mdsr
