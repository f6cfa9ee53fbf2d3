#include "mdsrecover/phase.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

#include "mdsrecover/clustering.hpp"
#include "mdsrecover/cmds.hpp"
#include "mdsrecover/diagnostics.hpp"
#include "mdsrecover/error.hpp"
#include "mdsrecover/rng.hpp"

namespace mdsr {

ClusterModel ModelRecipe::build(int n, int d, double sigma) const {
  if (!preset.empty()) return build_simulation_model(preset, n, d, sigma, knn.seed);
  require(means.rows() >= 1 && means.cols() >= 1, "model recipe needs a preset or explicit means");
  require(d >= means.cols(), "model recipe: d is smaller than the means' dimension");
  ClusterModel model;
  model.means = Matrix::Zero(means.rows(), d);
  model.means.leftCols(means.cols()) = means;
  model.sizes = balanced_sizes(n, static_cast<int>(means.rows()));
  model.covariance.kind = covariance;
  model.covariance.sigma = sigma;
  model.covariance.knn = knn;
  return model;
}

int ModelRecipe::k() const { return preset.empty() ? static_cast<int>(means.rows()) : simulation_preset(preset).k; }

void validate(const PhaseGridConfig& config) {
  require(!config.axis_values.empty(), "phase grid needs axis values");
  require(!config.sigma_values.empty(), "phase grid needs sigma values");
  require(config.replicates >= 1, "phase grid needs at least one replicate");
  require(config.fixed_value >= 1, "phase grid fixed dimension must be positive");
  for (std::size_t i = 0; i < config.axis_values.size(); ++i) {
    require(config.axis_values[i] >= 1, "axis values must be positive");
    if (i) require(config.axis_values[i] > config.axis_values[i - 1], "axis values must be increasing");
  }
  for (std::size_t i = 0; i < config.sigma_values.size(); ++i) {
    require(std::isfinite(config.sigma_values[i]) && config.sigma_values[i] >= 0.0, "sigma values must be >= 0");
    if (i) require(config.sigma_values[i] > config.sigma_values[i - 1], "sigma values must be increasing");
  }
  static const char* algos[] = {"single", "complete", "average", "energy", "kmeans"};
  require(std::find(std::begin(algos), std::end(algos), config.clustering) != std::end(algos),
          "unknown clustering algorithm '" + config.clustering + "'");
  if (config.rank.mode == RankMode::Fixed) require(config.rank.value >= 1, "embedding rank must be >= 1");
  require(config.threads >= 0, "threads must be >= 0");
  const int k = config.model.k();
  const int min_n = config.axis == SweepAxis::N ? config.axis_values.front() : config.fixed_value;
  require(min_n >= k, "every grid cell needs N >= k");
}

std::uint64_t replicate_seed(std::uint64_t base, std::size_t sigma_index, std::size_t axis_index, int rep) {
  return derive_seed(base, "phase", {sigma_index, axis_index, static_cast<std::uint64_t>(rep)});
}

namespace {

int cell_n(const PhaseGridConfig& c, std::size_t axis_index) {
  return c.axis == SweepAxis::N ? c.axis_values[axis_index] : c.fixed_value;
}
int cell_d(const PhaseGridConfig& c, std::size_t axis_index) {
  return c.axis == SweepAxis::D ? c.axis_values[axis_index] : c.fixed_value;
}

LabelVector cluster_with(const std::string& algo, const Matrix& y, int k, std::uint64_t seed) {
  if (algo == "single") return single_linkage_mst(y, k);
  if (algo == "kmeans") return kmeans(y, k, KMeansOptions{derive_seed(seed, "cluster"), 300, 1}).labels;
  return hierarchical(y, k, linkage_from_string(algo));
}

}  // namespace

ReplicateOutcome run_replicate(const PhaseGridConfig& config, const ClusterModel& model, const GaussianNoise& noise,
                               std::uint64_t seed) {
  ReplicateOutcome out;
  try {
    const SampleSet data = sample(model, noise, seed);
    int r = 0;
    Embedding emb;
    switch (config.rank.mode) {
      case RankMode::Fixed:
        r = config.rank.value;
        emb = embed_coordinates(data.x, r);
        break;
      case RankMode::ModelRank:
        r = positive_eigenvalue_count(ideal_spectrum(model).eigenvalues);
        emb = embed_coordinates(data.x, r);
        break;
      case RankMode::AutoEigenratio: {
        const Embedding full = embed_coordinates(data.x, 1);
        r = select_rank_eigenratio(full.all_eigenvalues, config.eigenratio_floor);
        emb = embed_coordinates(data.x, r);
        break;
      }
    }
    if (config.debias) emb = debias(emb, model.trace_sigma());

    const LabelVector truth(data.labels, model.k());
    if (config.criterion == RecoveryCriterion::Pgr) {
      out.recovered = pgr_check(emb.coordinates, truth).is_pgr;
    } else {
      const LabelVector predicted = cluster_with(config.clustering, emb.coordinates, model.k(), seed);
      out.recovered = agreement(truth, predicted) == 1.0;
    }
  } catch (const Error&) {
    out.failed = true;
    out.recovered = false;
  }
  return out;
}

Matrix grid_snr(const PhaseGridConfig& config) {
  validate(config);
  const std::size_t rows = config.sigma_values.size(), cols = config.axis_values.size();
  Matrix snr(rows, cols);
  for (std::size_t a = 0; a < cols; ++a) {
    for (std::size_t s = 0; s < rows; ++s) {
      const ClusterModel model = config.model.build(cell_n(config, a), cell_d(config, a), config.sigma_values[s]);
      double mu_diff = std::numeric_limits<double>::infinity();
      for (int i = 0; i < model.k(); ++i)
        for (int j = i + 1; j < model.k(); ++j) mu_diff = std::min(mu_diff, (model.means.row(i) - model.means.row(j)).norm());
      const double sm = sigma_max(model);
      snr(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) =
          sm > 0.0 ? mu_diff * mu_diff / (sm * sm) : std::numeric_limits<double>::infinity();
    }
  }
  return snr;
}

PhaseGridResult run_phase(const PhaseGridConfig& config) {
  validate(config);
  const auto start = std::chrono::steady_clock::now();
  const std::size_t rows = config.sigma_values.size(), cols = config.axis_values.size();
  const int reps = config.replicates;

  // One model and noise factorization per cell, built up front.
  std::vector<ClusterModel> models;
  std::vector<GaussianNoise> noises;
  models.reserve(rows * cols);
  noises.reserve(rows * cols);
  for (std::size_t s = 0; s < rows; ++s) {
    for (std::size_t a = 0; a < cols; ++a) {
      models.push_back(config.model.build(cell_n(config, a), cell_d(config, a), config.sigma_values[s]));
      noises.emplace_back(models.back());
    }
  }

  const std::size_t total = rows * cols * static_cast<std::size_t>(reps);
  std::vector<ReplicateOutcome> outcomes(total);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t job = next++; job < total; job = next++) {
      const std::size_t cell = job / static_cast<std::size_t>(reps);
      const int rep = static_cast<int>(job % static_cast<std::size_t>(reps));
      const std::size_t s = cell / cols, a = cell % cols;
      outcomes[job] = run_replicate(config, models[cell], noises[cell], replicate_seed(config.base_seed, s, a, rep));
    }
  };
  unsigned threads = config.threads == 0 ? std::max(1u, std::thread::hardware_concurrency())
                                         : static_cast<unsigned>(config.threads);
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, total));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  PhaseGridResult result;
  result.config = config;
  result.fractions = Matrix::Zero(rows, cols);
  result.recovered.assign(rows, std::vector<int>(cols, 0));
  result.failures.assign(rows, std::vector<int>(cols, 0));
  for (std::size_t job = 0; job < total; ++job) {
    const std::size_t cell = job / static_cast<std::size_t>(reps);
    const std::size_t s = cell / cols, a = cell % cols;
    result.recovered[s][a] += outcomes[job].recovered ? 1 : 0;
    result.failures[s][a] += outcomes[job].failed ? 1 : 0;
  }
  for (std::size_t s = 0; s < rows; ++s) {
    for (std::size_t a = 0; a < cols; ++a) {
      result.fractions(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) =
          static_cast<double>(result.recovered[s][a]) / reps;
      if (10 * result.failures[s][a] > reps) result.unreliable = true;
    }
  }
  result.snr_values = grid_snr(config);
  result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::vector<double> isotonic_nonincreasing(const std::vector<double>& values) {
  // Pool adjacent violators on blocks of (mean, weight).
  struct Block {
    double sum;
    double weight;
    std::size_t count;
  };
  std::vector<Block> blocks;
  for (double v : values) {
    blocks.push_back({v, 1.0, 1});
    while (blocks.size() > 1) {
      const Block& last = blocks.back();
      const Block& prev = blocks[blocks.size() - 2];
      if (prev.sum / prev.weight >= last.sum / last.weight) break;
      Block merged{prev.sum + last.sum, prev.weight + last.weight, prev.count + last.count};
      blocks.pop_back();
      blocks.back() = merged;
    }
  }
  std::vector<double> out;
  out.reserve(values.size());
  for (const Block& b : blocks) out.insert(out.end(), b.count, b.sum / b.weight);
  return out;
}

double axis_transform(SweepAxis axis, double value) {
  return axis == SweepAxis::N ? std::log(std::log(value)) : std::log(value);
}

BoundaryFit fit_boundary(const PhaseGridResult& result, double threshold) {
  const Eigen::Index rows = result.fractions.rows(), cols = result.fractions.cols();
  require(result.snr_values.rows() == rows && result.snr_values.cols() == cols, "boundary fit: SNR grid shape mismatch");
  require(static_cast<Eigen::Index>(result.config.axis_values.size()) == cols, "boundary fit: axis values mismatch");
  BoundaryFit fit;
  fit.transform = result.config.axis == SweepAxis::N ? "loglogN" : "logd";

  for (Eigen::Index a = 0; a < cols; ++a) {
    std::vector<double> column(static_cast<std::size_t>(rows));
    for (Eigen::Index s = 0; s < rows; ++s) column[static_cast<std::size_t>(s)] = result.fractions(s, a);
    const std::vector<double> smooth = isotonic_nonincreasing(column);

    // Last sigma row still at or above the threshold, followed by one below.
    std::optional<Eigen::Index> upper;
    for (Eigen::Index s = 0; s < rows; ++s)
      if (smooth[static_cast<std::size_t>(s)] >= threshold) upper = s;
    const double x = axis_transform(result.config.axis, result.config.axis_values[static_cast<std::size_t>(a)]);
    if (!upper || *upper + 1 >= rows || !std::isfinite(result.snr_values(*upper, a)) ||
        !std::isfinite(result.snr_values(*upper + 1, a))) {
      fit.excluded_columns.push_back(static_cast<std::size_t>(a));
      continue;
    }
    const Eigen::Index i = *upper;
    const double g0 = smooth[static_cast<std::size_t>(i)], g1 = smooth[static_cast<std::size_t>(i + 1)];
    const double l0 = std::log(result.snr_values(i, a)), l1 = std::log(result.snr_values(i + 1, a));
    const double t = (g0 - threshold) / (g0 - g1);
    fit.crossings.push_back({x, l0 + t * (l1 - l0), static_cast<std::size_t>(a)});
  }

  if (fit.crossings.size() < 2)
    fail(ErrorKind::InsufficientCrossings,
         "only " + std::to_string(fit.crossings.size()) + " columns cross the recovery threshold");

  const double m = static_cast<double>(fit.crossings.size());
  double sx = 0, sy = 0;
  for (const auto& c : fit.crossings) {
    sx += c.x;
    sy += c.log_snr;
  }
  const double mx = sx / m, my = sy / m;
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& c : fit.crossings) {
    sxx += (c.x - mx) * (c.x - mx);
    sxy += (c.x - mx) * (c.log_snr - my);
    syy += (c.log_snr - my) * (c.log_snr - my);
  }
  if (sxx <= 0.0) fail(ErrorKind::InsufficientCrossings, "crossing columns share one axis value");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

}  // namespace mdsr
