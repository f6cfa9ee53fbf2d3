#include "mdsrecover/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "mdsrecover/cmds.hpp"
#include "mdsrecover/error.hpp"

namespace mdsr {

Matrix centered_means(const ClusterModel& model) {
  validate(model);
  Eigen::RowVectorXd weighted = Eigen::RowVectorXd::Zero(model.d());
  for (int j = 0; j < model.k(); ++j) weighted += model.sizes[static_cast<std::size_t>(j)] * model.means.row(j);
  weighted /= static_cast<double>(model.n());
  return model.means.rowwise() - weighted;
}

IdealSpectrum ideal_spectrum(const ClusterModel& model) {
  const Matrix c = centered_means(model);
  const int k = model.k();
  Vector root_sizes(k);
  for (int j = 0; j < k; ++j) root_sizes(j) = std::sqrt(static_cast<double>(model.sizes[static_cast<std::size_t>(j)]));
  // M M^T = Z C C^T Z^T with Z the block indicator; its nonzero spectrum is
  // that of W^{1/2} C C^T W^{1/2}, W = diag(n_j), with v = Z W^{-1/2} u.
  const Matrix small = root_sizes.asDiagonal() * (c * c.transpose()) * root_sizes.asDiagonal();
  const SpectralDecomposition eig = sym_eig_desc(SymmetricMatrix(small));

  IdealSpectrum out;
  out.eigenvalues = eig.eigenvalues;
  out.eigenvectors.resize(model.n(), k);
  Eigen::Index row = 0;
  for (int j = 0; j < k; ++j) {
    const Eigen::RowVectorXd value = eig.eigenvectors.row(j) / root_sizes(j);
    for (int t = 0; t < model.sizes[static_cast<std::size_t>(j)]; ++t) out.eigenvectors.row(row++) = value;
  }
  return out;
}

double sigma_max(const ClusterModel& model) {
  const double sigma = model.covariance.sigma;
  if (sigma == 0.0 || model.covariance.kind == CovarianceKind::Isotropic) return sigma;
  return std::sqrt(std::max(0.0, sym_eigenvalues_desc(SymmetricMatrix(realize_covariance(model)))(0)));
}

ModelStats model_stats(const ClusterModel& model, int r) {
  validate(model);
  require(r >= 1, "model stats need r >= 1");
  ModelStats st;
  st.k = model.k();
  st.n = model.n();
  st.d = model.d();
  st.r = r;
  st.n_min = *std::min_element(model.sizes.begin(), model.sizes.end());

  st.mu_diff = std::numeric_limits<double>::infinity();
  for (int a = 0; a < st.k; ++a)
    for (int b = a + 1; b < st.k; ++b) st.mu_diff = std::min(st.mu_diff, (model.means.row(a) - model.means.row(b)).norm());
  if (st.k == 1) st.mu_diff = 0.0;

  const Matrix c = centered_means(model);
  st.mu_max = c.rowwise().norm().maxCoeff();
  st.sigma_max = sigma_max(model);
  st.snr = st.sigma_max > 0.0 ? st.mu_diff * st.mu_diff / (st.sigma_max * st.sigma_max)
                              : std::numeric_limits<double>::infinity();
  st.gamma = static_cast<double>(st.d) / st.n;
  st.zeta = static_cast<double>(st.n) / st.n_min;
  st.xi = st.mu_diff > 0.0 ? st.mu_max / st.mu_diff : std::numeric_limits<double>::infinity();
  st.trace_sigma = model.trace_sigma();

  st.lambdas = ideal_spectrum(model).eigenvalues;
  st.s = positive_eigenvalue_count(st.lambdas);
  if (r > st.s)
    fail(ErrorKind::RankTooLarge, "rank " + std::to_string(r) + " exceeds rank(M M^T) = " + std::to_string(st.s));
  st.rho = st.lambdas(0) / st.lambdas(r - 1);
  return st;
}

SnrEstimate estimate_snr(const Matrix& x, const LabelVector& labels) {
  require_finite(x, "data");
  require(static_cast<Eigen::Index>(labels.size()) == x.rows(), "estimate_snr: label count must match rows");
  const int k = labels.k();
  Matrix means = Matrix::Zero(k, x.cols());
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    means.row(labels[i] - 1) += x.row(static_cast<Eigen::Index>(i));
    ++counts[static_cast<std::size_t>(labels[i] - 1)];
  }
  for (int j = 0; j < k; ++j) {
    if (counts[static_cast<std::size_t>(j)] < 2)
      fail(ErrorKind::InsufficientSamples, "label " + std::to_string(j + 1) + " has fewer than two points");
    means.row(j) /= static_cast<double>(counts[static_cast<std::size_t>(j)]);
  }
  Matrix h = x;
  for (std::size_t i = 0; i < labels.size(); ++i) h.row(static_cast<Eigen::Index>(i)) -= means.row(labels[i] - 1);

  SnrEstimate out;
  const double n = static_cast<double>(x.rows());
  const Matrix gram = h.rows() <= h.cols() ? Matrix(h * h.transpose()) : Matrix(h.transpose() * h);
  out.sigma_hat_sq = std::max(0.0, sym_eigenvalues_desc(SymmetricMatrix(gram))(0)) / n;
  // Residuals at rounding level count as zero.
  const double resolution = 1e-13 * (x.size() ? x.cwiseAbs().maxCoeff() : 0.0);
  if (out.sigma_hat_sq <= resolution * resolution) out.sigma_hat_sq = 0.0;

  out.mu_diff = std::numeric_limits<double>::infinity();
  for (int a = 0; a < k; ++a)
    for (int b = a + 1; b < k; ++b) out.mu_diff = std::min(out.mu_diff, (means.row(a) - means.row(b)).norm());
  if (k == 1) out.mu_diff = 0.0;
  out.snr_hat = out.sigma_hat_sq > 0.0 ? out.mu_diff * out.mu_diff / out.sigma_hat_sq
                                       : std::numeric_limits<double>::infinity();
  return out;
}

ConditionReport check_conditions(const ModelStats& stats, int r, double tau1, double tau2) {
  ConditionReport rep;
  const double quantities[4] = {static_cast<double>(stats.k), stats.rho, stats.zeta, stats.xi};
  const char* names[4] = {"k", "rho", "zeta", "xi"};
  double lo = quantities[0], hi = quantities[0];
  for (double q : quantities) {
    lo = std::min(lo, q);
    hi = std::max(hi, q);
  }
  rep.balance.lhs = lo;
  rep.balance.rhs = hi;
  rep.balance.holds = tau1 > 0.0 && tau1 < lo && hi < tau2 && std::isfinite(tau2);
  {
    std::ostringstream os;
    os << "tau1=" << tau1 << " min=" << lo << " max=" << hi << " tau2=" << tau2;
    rep.balance.detail = os.str();
  }
  if (!(tau1 > 0.0)) rep.violations.push_back("tau1 must be positive");
  for (int i = 0; i < 4; ++i) {
    if (!(quantities[i] > tau1) || !(quantities[i] < tau2)) {
      std::ostringstream os;
      os << names[i] << "=" << quantities[i] << " outside (" << tau1 << ", " << tau2 << ")";
      rep.violations.push_back(os.str());
    }
  }

  if (r > stats.s) {
    rep.eigenvalue.holds = false;
    rep.eigenvalue.lhs = r;
    rep.eigenvalue.rhs = stats.s;
    rep.eigenvalue.detail = "r exceeds s";
    rep.violations.push_back("r=" + std::to_string(r) + " exceeds s=" + std::to_string(stats.s));
  } else if (r == stats.s) {
    rep.eigenvalue.holds = true;
    rep.eigenvalue.detail = "r == s";
  } else {
    const double gap = stats.s - r;
    const double next = stats.lambdas(r);
    const double bound = std::max(stats.lambdas(r - 1) / (2.0 * stats.zeta * gap),
                                  stats.mu_diff * stats.mu_diff * stats.n_min / (144.0 * gap));
    rep.eigenvalue.lhs = next;
    rep.eigenvalue.rhs = bound;
    rep.eigenvalue.holds = next <= bound;
    rep.eigenvalue.detail = "lambda_{r+1} <= bound";
    if (!rep.eigenvalue.holds) rep.violations.push_back("lambda_{r+1} exceeds the eigenvalue gap bound");
  }
  return rep;
}

ErrorMatrixNorms error_matrix_norms(const Matrix& x, const ClusterModel& model) {
  validate(model);
  require(x.rows() == model.n() && x.cols() == model.d(), "error matrix: data and model dimensions differ");
  require_finite(x, "data");
  const Matrix jx = center_columns(x);
  const Matrix jm = center_columns(model.mean_rows());
  const Matrix p = jx * jx.transpose() - jm * jm.transpose();
  ErrorMatrixNorms out;
  out.spectral = spectral_norm(p);
  out.infinity = inf_norm(p);
  out.centered_spectral = spectral_norm(p - model.trace_sigma() * centering_matrix(model.n()));
  return out;
}

namespace {

double safe_ratio(double measured, double bound) {
  if (bound > 0.0) return measured / bound;
  return measured == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
}

}  // namespace

PerturbationReport perturbation_audit(const SampleSet& sample, const ClusterModel& model, int r) {
  const ModelStats stats = model_stats(model, r);
  require(sample.x.rows() == model.n() && sample.x.cols() == model.d(), "audit: sample does not match model");
  const IdealSpectrum ideal = ideal_spectrum(model);
  const double lambda1 = ideal.eigenvalues(0);
  const double next = r < ideal.eigenvalues.size() ? std::max(0.0, ideal.eigenvalues(r)) : 0.0;
  if (ideal.eigenvalues(r - 1) - next <= 1e-10 * lambda1)
    fail(ErrorKind::DegenerateGap, "no eigengap after lambda_" + std::to_string(r));

  const Matrix v_ideal = ideal.eigenvectors.leftCols(r);
  const Vector l_ideal = ideal.eigenvalues.head(r);
  const Matrix y_ideal = v_ideal * l_ideal.cwiseSqrt().asDiagonal();

  const Embedding noisy = embed_coordinates(sample.x, r);
  const Matrix v_noisy = noisy.coordinates * noisy.kept_eigenvalues.cwiseSqrt().cwiseInverse().asDiagonal();

  PerturbationReport rep;
  rep.lambda1 = lambda1;
  const ErrorMatrixNorms norms = error_matrix_norms(sample.x, model);
  rep.spec_norm_P = norms.spectral;
  rep.inf_norm_P = norms.infinity;
  rep.centered_spec_norm = norms.centered_spectral;

  // The Procrustes R minimizes the Frobenius error, not the max-norm one, so
  // the identity is kept as a second witness rotation.
  const Matrix r_vec = procrustes_rotation(v_noisy, v_ideal).rotation;
  rep.eigvec_err_identity = max_norm(v_noisy - v_ideal);
  rep.eigvec_err_max = std::min(max_norm(v_noisy * r_vec - v_ideal), rep.eigvec_err_identity);
  const Matrix r_emb = procrustes_rotation(noisy.coordinates, y_ideal).rotation;
  rep.embed_err_max =
      std::min(max_norm(noisy.coordinates * r_emb - y_ideal), max_norm(noisy.coordinates - y_ideal));

  const Eigen::Index n_all = noisy.all_eigenvalues.size();
  Vector ideal_full = Vector::Zero(n_all);
  const Eigen::Index kk = std::min<Eigen::Index>(n_all, ideal.eigenvalues.size());
  ideal_full.head(kk) = ideal.eigenvalues.head(kk).cwiseMax(0.0);
  rep.weyl_max_dev = (noisy.all_eigenvalues - ideal_full).cwiseAbs().maxCoeff();

  const double n = stats.n;
  const double log_n = std::log(n);
  const double sigma = stats.sigma_max;
  const double mu = stats.mu_max;
  const double gamma = stats.gamma;
  rep.bound_rhs_thm1 = sigma * std::sqrt(log_n) / (mu * std::sqrt(n)) +
                       (sigma * sigma) / (mu * mu) * (std::sqrt(gamma) * log_n + gamma / std::sqrt(n));
  rep.bound_rhs_thm2 = std::sqrt(sigma * mu * (1.0 + std::sqrt(gamma))) +
                       sigma * (std::sqrt(log_n) + std::sqrt(gamma)) +
                       (sigma * sigma) / mu * (std::sqrt(static_cast<double>(stats.d)) * log_n + gamma);
  rep.ratio_thm1 = safe_ratio(rep.eigvec_err_max, rep.bound_rhs_thm1);
  rep.ratio_thm2 = safe_ratio(rep.embed_err_max, rep.bound_rhs_thm2);
  return rep;
}

}  // namespace mdsr
