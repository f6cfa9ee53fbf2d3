#pragma once

// Dense symmetric spectral primitives shared by the rest of the library.

#include <Eigen/Dense>

namespace mdsr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Square real matrix that is symmetric by construction: the input is
/// replaced by (A + A^T) / 2, so stored entries satisfy a(i,j) == a(j,i).
class SymmetricMatrix {
 public:
  explicit SymmetricMatrix(const Matrix& values);

  static SymmetricMatrix zeros(Eigen::Index n) { return SymmetricMatrix(Matrix::Zero(n, n)); }

  const Matrix& values() const noexcept { return values_; }
  Eigen::Index size() const noexcept { return values_.rows(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return values_(i, j); }

 private:
  Matrix values_;
};

/// Eigenvalues in non-increasing order; column i of `eigenvectors` pairs
/// with eigenvalues(i). Each column's first coordinate above 1e-12 in
/// magnitude is nonnegative.
struct SpectralDecomposition {
  Vector eigenvalues;
  Matrix eigenvectors;
};

SpectralDecomposition sym_eig_desc(const SymmetricMatrix& a);

/// Eigenvalues only, non-increasing.
Vector sym_eigenvalues_desc(const SymmetricMatrix& a);

/// Largest singular value.
double spectral_norm(const Matrix& a);

/// max_i sum_j |a(i,j)|
double inf_norm(const Matrix& a);

/// max_{i,j} |a(i,j)|
double max_norm(const Matrix& a);

struct ProcrustesResult {
  Matrix rotation;  // r x r orthogonal
  bool degenerate = false;  // U^T V rank deficient; the minimizer is not unique
};

/// Orthogonal R minimizing ||U R - V||_F (reflections allowed).
ProcrustesResult procrustes_rotation(const Matrix& u, const Matrix& v);

/// Centering matrix J = I - 11^T / n.
Matrix centering_matrix(Eigen::Index n);

/// J X, i.e. X with its column means removed.
Matrix center_columns(const Matrix& x);

void require_finite(const Matrix& a, const char* what);

}  // namespace mdsr
