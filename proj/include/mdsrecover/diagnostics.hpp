#pragma once

// Model statistics, regularity-condition checks, SNR estimation from
// labelled data, error-matrix norms, and empirical audits of the embedding
// perturbation bounds.

#include <string>
#include <vector>

#include "mdsrecover/clustering.hpp"
#include "mdsrecover/datagen.hpp"

namespace mdsr {

/// Spectrum of the ideal Gram matrix (JM)(JM)^T, computed through the k x k
/// weighted mean Gram matrix. Eigenvectors are N x k with constant entries
/// on each cluster block.
struct IdealSpectrum {
  Vector eigenvalues;  // length k, descending
  Matrix eigenvectors; // N x k
};

IdealSpectrum ideal_spectrum(const ClusterModel& model);

/// Means shifted so that sum_j n_j mu_j = 0.
Matrix centered_means(const ClusterModel& model);

/// ||Sigma||_2^{1/2}.
double sigma_max(const ClusterModel& model);

struct ModelStats {
  double mu_diff = 0.0;
  double mu_max = 0.0;
  double sigma_max = 0.0;
  double snr = 0.0;  // +inf when sigma_max == 0
  double gamma = 0.0;
  double zeta = 0.0;
  double xi = 0.0;
  double rho = 0.0;
  double trace_sigma = 0.0;
  int s = 0;  // rank of the centered M M^T
  int r = 0;
  int n = 0;
  int d = 0;
  int k = 0;
  int n_min = 0;
  Vector lambdas;  // descending, length k
};

ModelStats model_stats(const ClusterModel& model, int r);

struct SnrEstimate {
  double snr_hat = 0.0;  // +inf when the residual vanishes
  double sigma_hat_sq = 0.0;
  double mu_diff = 0.0;
};

/// Plug-in SNR: mu_diff of the per-label means over ||H^T H / N||_2 with
/// H the residual after removing those means.
SnrEstimate estimate_snr(const Matrix& x, const LabelVector& labels);

struct ConditionCheck {
  bool holds = false;
  double lhs = 0.0;
  double rhs = 0.0;
  std::string detail;
};

struct ConditionReport {
  ConditionCheck balance;    // tau1 < min(k, rho, zeta, xi), max(...) < tau2
  ConditionCheck eigenvalue; // r <= s and the lambda_{r+1} gap bound
  std::vector<std::string> violations;
  bool all_hold() const { return balance.holds && eigenvalue.holds; }
};

ConditionReport check_conditions(const ModelStats& stats, int r, double tau1, double tau2);

struct ErrorMatrixNorms {
  double spectral = 0.0;           // ||P||_2
  double infinity = 0.0;           // ||P||_inf
  double centered_spectral = 0.0;  // ||P - tr(Sigma) J||_2
};

/// P = (JX)(JX)^T - (JM)(JM)^T for the model's mean rows.
ErrorMatrixNorms error_matrix_norms(const Matrix& x, const ClusterModel& model);

struct PerturbationReport {
  double spec_norm_P = 0.0;
  double inf_norm_P = 0.0;
  double centered_spec_norm = 0.0;
  double eigvec_err_max = 0.0;       // ||V~_r R - V_r||_max, best of Procrustes R and I
  double eigvec_err_identity = 0.0;  // same with R = I
  double embed_err_max = 0.0;        // ||V~_r L~^{1/2} R - V_r L^{1/2}||_max, same choice of R
  double bound_rhs_thm1 = 0.0;
  double bound_rhs_thm2 = 0.0;
  double ratio_thm1 = 0.0;  // measured / bound (0 when both vanish)
  double ratio_thm2 = 0.0;
  double weyl_max_dev = 0.0;  // max_i |lambda~_i - lambda_i|
  double lambda1 = 0.0;
};

/// Eigenvector and embedding errors in max norm after Procrustes alignment,
/// next to the bound expressions evaluated with unit constants.
PerturbationReport perturbation_audit(const SampleSet& sample, const ClusterModel& model, int r);

}  // namespace mdsr
