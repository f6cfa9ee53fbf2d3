#pragma once

// Gaussian cluster models and the simulation presets.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mdsrecover/spectral.hpp"

namespace mdsr {

enum class CovarianceKind { Isotropic, Toeplitz, Knn };

std::string to_string(CovarianceKind kind);
CovarianceKind covariance_kind_from_string(const std::string& name);

struct KnnParams {
  int neighbors = 4;       // K
  double cube_side = 1.0;  // c
  std::uint64_t seed = 0;
};

struct CovarianceSpec {
  CovarianceKind kind = CovarianceKind::Isotropic;
  double sigma = 1.0;  // sigma_max scale; 0 means noiseless
  KnnParams knn;
};

struct KnnCovariance {
  Matrix raw;                 // as constructed, diagonal exactly sigma^2
  Matrix covariance;          // symmetric, PSD after repair
  double clipped_mass = 0.0;  // sum of |negative eigenvalues| removed
  bool repaired = false;
};

/// Sigma_ij = sigma^2 * 0.7^|i-j|.
Matrix make_toeplitz_cov(double sigma, int d);

/// Sigma_ij = sigma^2 ||z_i - z_j|| when z_i, z_j are K-nearest neighbours
/// (in either direction) for z uniform on [0, c]^2; Sigma_ii = sigma^2.
KnnCovariance make_knn_cov(double sigma, int d, int neighbors, double cube_side, std::uint64_t seed);

/// Same construction from fixed points (rows of `points`).
KnnCovariance make_knn_cov_from_points(double sigma, const Matrix& points, int neighbors);

struct ClusterModel {
  Matrix means;            // k x d, row j is mu_j
  std::vector<int> sizes;  // n_j
  CovarianceSpec covariance;

  int k() const { return static_cast<int>(means.rows()); }
  int d() const { return static_cast<int>(means.cols()); }
  int n() const;
  /// 1-based block labels: n_1 ones, then n_2 twos, ...
  std::vector<int> labels() const;
  /// N x d matrix whose row i is mu_{l_i}.
  Matrix mean_rows() const;
  double trace_sigma() const;
};

void validate(const ClusterModel& model);

/// Realized covariance matrix (d x d). For isotropic models this is
/// sigma^2 I; avoid calling it for very large d.
Matrix realize_covariance(const ClusterModel& model);

struct SampleSet {
  Matrix x;                 // N x d
  std::vector<int> labels;  // 1-based
  Matrix mean_rows;         // M
  Matrix noise;             // H, with X = M + H
};

/// Precomputed square root of a model's covariance, reusable across draws.
class GaussianNoise {
 public:
  explicit GaussianNoise(const ClusterModel& model);

  /// n x d matrix with independent N(0, Sigma) rows.
  Matrix draw(Eigen::Index n, std::uint64_t seed) const;

 private:
  Eigen::Index d_;
  double sigma_ = 0.0;
  std::optional<Matrix> root_;  // absent for isotropic noise
};

/// Rows of H are independent N(0, Sigma), drawn as Z S with S the
/// symmetric spectral square root of Sigma (sigma * Z when isotropic).
SampleSet sample(const ClusterModel& model, std::uint64_t seed);
SampleSet sample(const ClusterModel& model, const GaussianNoise& noise, std::uint64_t seed);

/// A named simulation setting.
struct SimulationPreset {
  std::string name;
  int k = 0;
  int listed_rank = 0;  // embedding rank r listed for the preset
  int replicates = 0;   // default replicates J per grid cell
  CovarianceKind covariance = CovarianceKind::Isotropic;
  int default_n = 0;
  int default_d = 0;
  bool fixed_d = false;  // 1a-1c fix d and sweep N; 2a-2f fix N and sweep d
};

const std::vector<SimulationPreset>& simulation_presets();
const SimulationPreset& simulation_preset(const std::string& name);

/// Balanced model for a named preset. `d` must cover the signal
/// dimensions of that preset; means are zero-padded to d.
ClusterModel build_simulation_model(const std::string& name, int n, int d, double sigma,
                                    std::uint64_t knn_seed = 0);

/// Split n as evenly as possible into k positive sizes (earlier clusters
/// take the remainder).
std::vector<int> balanced_sizes(int n, int k);

}  // namespace mdsr
