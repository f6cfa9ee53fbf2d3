#include "mdsrecover/cmds.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mdsrecover/error.hpp"

namespace mdsr {

DissimilarityMatrix::DissimilarityMatrix(Matrix values, bool squared, bool metric)
    : values_(std::move(values)), squared_(squared), metric_(metric) {
  require(values_.rows() == values_.cols(), "dissimilarity matrix must be square");
  require(values_.rows() >= 1, "dissimilarity matrix must be nonempty");
  require_finite(values_, "dissimilarity matrix");
  const Eigen::Index n = values_.rows();
  const double scale = std::max(1.0, values_.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(values_(i, i)) > 1e-12)
      fail(ErrorKind::InvalidInput, "dissimilarity diagonal entry " + std::to_string(i) + " is not zero");
    for (Eigen::Index j = 0; j < n; ++j) {
      if (values_(i, j) < 0.0) fail(ErrorKind::InvalidInput, "dissimilarity matrix has negative entries");
      if (std::abs(values_(i, j) - values_(j, i)) > 1e-12 * scale)
        fail(ErrorKind::InvalidInput, "dissimilarity matrix is not symmetric");
    }
  }
  values_ = 0.5 * (values_ + values_.transpose());
  values_.diagonal().setZero();
}

DissimilarityMatrix DissimilarityMatrix::from_coordinates(const Matrix& x) {
  require_finite(x, "coordinates");
  return DissimilarityMatrix(pairwise_distances(x));
}

Matrix DissimilarityMatrix::squared_values() const {
  return squared_ ? values_ : Matrix(values_.cwiseProduct(values_));
}

Matrix pairwise_distances(const Matrix& y) {
  const Eigen::Index n = y.rows();
  Matrix out = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double dist = (y.row(i) - y.row(j)).norm();
      out(i, j) = dist;
      out(j, i) = dist;
    }
  }
  return out;
}

SymmetricMatrix double_center(const DissimilarityMatrix& d) {
  const Matrix d2 = d.squared_values();
  const Eigen::VectorXd row_mean = d2.rowwise().mean();
  const Eigen::RowVectorXd col_mean = d2.colwise().mean();
  const double grand = d2.mean();
  Matrix b = d2;
  b.colwise() -= row_mean;
  b.rowwise() -= col_mean;
  b.array() += grand;
  b *= -0.5;
  return SymmetricMatrix(b);
}

double positivity_floor(double top_eigenvalue) { return top_eigenvalue > 0.0 ? 1e-10 * top_eigenvalue : 0.0; }

int positive_eigenvalue_count(const Vector& eigenvalues_desc) {
  if (eigenvalues_desc.size() == 0) return 0;
  const double floor = positivity_floor(eigenvalues_desc(0));
  int count = 0;
  for (Eigen::Index i = 0; i < eigenvalues_desc.size(); ++i)
    if (eigenvalues_desc(i) > floor) ++count;
  return count;
}

namespace {

void check_rank(const Vector& spectrum, int r) {
  require(r >= 1, "embedding rank must be at least 1");
  const int usable = positive_eigenvalue_count(spectrum);
  if (r > usable)
    fail(ErrorKind::RankTooLarge, "requested rank " + std::to_string(r) + " but only " + std::to_string(usable) +
                                      " eigenvalues are positive");
}

void fix_column_signs(Matrix& m) {
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    const double col_scale = m.col(c).cwiseAbs().maxCoeff();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      if (std::abs(m(r, c)) > 1e-12 * std::max(col_scale, 1e-300)) {
        if (m(r, c) < 0) m.col(c) *= -1.0;
        break;
      }
    }
  }
}

}  // namespace

Embedding embed(const SymmetricMatrix& b, int r) {
  const SpectralDecomposition eig = sym_eig_desc(b);
  check_rank(eig.eigenvalues, r);
  Embedding out;
  out.rank = r;
  out.all_eigenvalues = eig.eigenvalues;
  out.kept_eigenvalues = eig.eigenvalues.head(r);
  out.coordinates = eig.eigenvectors.leftCols(r) * out.kept_eigenvalues.cwiseSqrt().asDiagonal();
  return out;
}

Embedding embed_coordinates(const Matrix& x, int r) {
  require_finite(x, "coordinates");
  require(x.rows() >= 1 && x.cols() >= 1, "coordinate matrix must be nonempty");
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  const Matrix centered = center_columns(x);
  if (n <= d) return embed(SymmetricMatrix(centered * centered.transpose()), r);

  // Thin side: eigenpairs (lambda, w) of C^T C give B's nonzero spectrum and
  // V_r Lambda_r^{1/2} = C W_r.
  const SpectralDecomposition eig = sym_eig_desc(SymmetricMatrix(centered.transpose() * centered));
  Vector spectrum = Vector::Zero(n);
  spectrum.head(d) = eig.eigenvalues;
  check_rank(spectrum, r);
  Embedding out;
  out.rank = r;
  out.all_eigenvalues = spectrum;
  out.kept_eigenvalues = spectrum.head(r);
  out.coordinates = centered * eig.eigenvectors.leftCols(r);
  // Re-normalize so column norms match the eigenvalues to rounding.
  for (int j = 0; j < r; ++j) {
    const double norm = out.coordinates.col(j).norm();
    if (norm > 0.0) out.coordinates.col(j) *= std::sqrt(out.kept_eigenvalues(j)) / norm;
  }
  fix_column_signs(out.coordinates);
  return out;
}

int select_rank_eigenratio(const Vector& eigenvalues_desc, double floor) {
  const Eigen::Index n = eigenvalues_desc.size();
  for (Eigen::Index i = 0; i + 1 < n; ++i)
    require(eigenvalues_desc(i) >= eigenvalues_desc(i + 1), "eigenvalues must be non-increasing");
  Eigen::Index above = 0;
  while (above < n && eigenvalues_desc(above) > floor) ++above;
  if (above < 1) fail(ErrorKind::NotEnoughSignal, "no eigenvalue exceeds the floor");
  // R (1-based) is the largest index with lambda_{R+1} > floor.
  const Eigen::Index upper = above - 1;
  int best = 1;
  double best_ratio = -1.0;
  for (Eigen::Index i = 0; i < upper; ++i) {
    const double ratio = eigenvalues_desc(i) / eigenvalues_desc(i + 1);
    if (ratio > best_ratio) {
      best_ratio = ratio;
      best = static_cast<int>(i) + 1;
    }
  }
  // A flat spectrum above the floor has no interior gap; the only gap is the
  // drop to the floor itself.
  if (upper < 1 || best_ratio <= 1.0 + kFlatSpectrumTolerance) return static_cast<int>(above);
  return best;
}

Vector debias_eigenvalues(const Vector& kept, double trace_sigma) {
  require(std::isfinite(trace_sigma) && trace_sigma >= 0.0, "trace of the noise covariance must be >= 0");
  for (Eigen::Index i = 0; i < kept.size(); ++i) {
    if (!(kept(i) > trace_sigma))
      fail(ErrorKind::DebiasUnderflow, "eigenvalue " + std::to_string(i + 1) + " does not exceed tr(Sigma)");
  }
  return (kept.array() - trace_sigma).matrix();
}

Embedding debias(const Embedding& embedding, double trace_sigma) {
  Embedding out = embedding;
  if (trace_sigma == 0.0) {
    out.debiased = true;
    return out;
  }
  out.kept_eigenvalues = debias_eigenvalues(embedding.kept_eigenvalues, trace_sigma);
  for (Eigen::Index j = 0; j < out.coordinates.cols(); ++j)
    out.coordinates.col(j) *= std::sqrt(out.kept_eigenvalues(j) / embedding.kept_eigenvalues(j));
  out.debiased = true;
  return out;
}

PsdProjection psd_clip(const SymmetricMatrix& b) {
  const SpectralDecomposition eig = sym_eig_desc(b);
  double discarded = 0.0;
  for (Eigen::Index i = 0; i < eig.eigenvalues.size(); ++i)
    if (eig.eigenvalues(i) < 0.0) discarded += -eig.eigenvalues(i);

  const double top = std::max(0.0, eig.eigenvalues(0));
  const double bottom = eig.eigenvalues(eig.eigenvalues.size() - 1);
  if (bottom >= -1e-10 * top) return PsdProjection{b, discarded};

  const Vector clipped = eig.eigenvalues.cwiseMax(0.0);
  const Matrix rebuilt = eig.eigenvectors * clipped.asDiagonal() * eig.eigenvectors.transpose();
  return PsdProjection{SymmetricMatrix(rebuilt), discarded};
}

PsdProjection psd_project(const DissimilarityMatrix& d) { return psd_clip(double_center(d)); }

}  // namespace mdsr
