#pragma once

// Monte Carlo exact-recovery grids over (noise level, N or d) and fitting
// of the 50% recovery boundary.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mdsrecover/datagen.hpp"

namespace mdsr {

/// How to build a ClusterModel for one grid cell: a named preset, or
/// explicit means (zero-padded to d) with balanced sizes.
struct ModelRecipe {
  std::string preset;  // empty when `means` is used
  Matrix means;
  CovarianceKind covariance = CovarianceKind::Isotropic;
  KnnParams knn;

  ClusterModel build(int n, int d, double sigma) const;
  int k() const;
};

enum class SweepAxis { N, D };

enum class RecoveryCriterion { Agreement, Pgr };

enum class RankMode { Fixed, ModelRank, AutoEigenratio };

struct EmbeddingRank {
  RankMode mode = RankMode::ModelRank;
  int value = 0;  // used when mode == Fixed
};

struct PhaseGridConfig {
  ModelRecipe model;
  SweepAxis axis = SweepAxis::N;
  int fixed_value = 2;  // d for an N sweep, N for a d sweep
  std::vector<int> axis_values;
  std::vector<double> sigma_values;
  int replicates = 20;
  std::string clustering = "single";  // single|complete|average|energy|kmeans
  EmbeddingRank rank;
  double eigenratio_floor = 1e-8;
  bool debias = false;
  RecoveryCriterion criterion = RecoveryCriterion::Agreement;
  std::uint64_t base_seed = 0;
  int threads = 1;
};

void validate(const PhaseGridConfig& config);

struct PhaseGridResult {
  PhaseGridConfig config;
  Matrix fractions;   // |sigma| x |axis|
  Matrix snr_values;  // same shape
  std::vector<std::vector<int>> recovered;  // per cell counts, row-major
  std::vector<std::vector<int>> failures;   // per cell numerical failures
  bool unreliable = false;
  double wall_time = 0.0;  // seconds
};

/// Outcome of a single replicate; exposed for testing.
struct ReplicateOutcome {
  bool recovered = false;
  bool failed = false;
};

ReplicateOutcome run_replicate(const PhaseGridConfig& config, const ClusterModel& model, const GaussianNoise& noise,
                               std::uint64_t seed);

/// Seed of replicate `rep` in cell (sigma_index, axis_index).
std::uint64_t replicate_seed(std::uint64_t base, std::size_t sigma_index, std::size_t axis_index, int rep);

PhaseGridResult run_phase(const PhaseGridConfig& config);

/// SNR of every cell, derived from the model means and sigma.
Matrix grid_snr(const PhaseGridConfig& config);

struct ColumnCrossing {
  double x = 0.0;             // transformed axis value
  double log_snr = 0.0;       // interpolated crossing
  std::size_t column = 0;
};

struct BoundaryFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::string transform;  // "loglogN" or "logd"
  std::vector<ColumnCrossing> crossings;
  std::vector<std::size_t> excluded_columns;
};

/// Nonincreasing least-squares fit (pool adjacent violators).
std::vector<double> isotonic_nonincreasing(const std::vector<double>& values);

BoundaryFit fit_boundary(const PhaseGridResult& result, double threshold = 0.5);

double axis_transform(SweepAxis axis, double value);

}  // namespace mdsr
