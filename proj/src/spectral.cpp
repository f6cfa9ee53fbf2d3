#include "mdsrecover/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "mdsrecover/error.hpp"

namespace mdsr {

void require_finite(const Matrix& a, const char* what) {
  if (!a.allFinite()) fail(ErrorKind::InvalidInput, std::string(what) + " has non-finite entries");
}

SymmetricMatrix::SymmetricMatrix(const Matrix& values) {
  require(values.rows() == values.cols(), "symmetric matrix must be square");
  require(values.rows() >= 1, "symmetric matrix must be at least 1x1");
  values_ = 0.5 * (values + values.transpose());
}

namespace {

void fix_signs(Matrix& vectors) {
  for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
    for (Eigen::Index r = 0; r < vectors.rows(); ++r) {
      const double x = vectors(r, c);
      if (std::abs(x) > 1e-12) {
        if (x < 0) vectors.col(c) *= -1.0;
        break;
      }
    }
  }
}

}  // namespace

SpectralDecomposition sym_eig_desc(const SymmetricMatrix& a) {
  require_finite(a.values(), "matrix");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a.values());
  if (solver.info() != Eigen::Success) fail(ErrorKind::NumericalFailure, "eigensolver did not converge");

  // Eigen returns ascending order.
  SpectralDecomposition out;
  out.eigenvalues = solver.eigenvalues().reverse();
  out.eigenvectors = solver.eigenvectors().rowwise().reverse();
  fix_signs(out.eigenvectors);
  return out;
}

Vector sym_eigenvalues_desc(const SymmetricMatrix& a) {
  require_finite(a.values(), "matrix");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a.values(), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) fail(ErrorKind::NumericalFailure, "eigensolver did not converge");
  return solver.eigenvalues().reverse();
}

double spectral_norm(const Matrix& a) {
  require_finite(a, "matrix");
  if (a.size() == 0) return 0.0;
  if (std::min(a.rows(), a.cols()) <= 64) {
    Eigen::JacobiSVD<Matrix> svd(a);
    return svd.singularValues()(0);
  }
  // Larger inputs: top eigenvalue of the smaller Gram side is sigma_max^2.
  const Matrix gram = a.rows() <= a.cols() ? Matrix(a * a.transpose()) : Matrix(a.transpose() * a);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(gram, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) fail(ErrorKind::NumericalFailure, "eigensolver did not converge");
  return std::sqrt(std::max(0.0, solver.eigenvalues().maxCoeff()));
}

double inf_norm(const Matrix& a) {
  require_finite(a, "matrix");
  if (a.size() == 0) return 0.0;
  return a.cwiseAbs().rowwise().sum().maxCoeff();
}

double max_norm(const Matrix& a) {
  require_finite(a, "matrix");
  if (a.size() == 0) return 0.0;
  return a.cwiseAbs().maxCoeff();
}

ProcrustesResult procrustes_rotation(const Matrix& u, const Matrix& v) {
  require(u.rows() == v.rows() && u.cols() == v.cols(), "procrustes: U and V must have equal shape");
  require(u.cols() >= 1 && u.rows() >= u.cols(), "procrustes: need N >= r >= 1");
  require_finite(u, "U");
  require_finite(v, "V");

  const Matrix cross = u.transpose() * v;
  Eigen::JacobiSVD<Matrix> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  ProcrustesResult out;
  out.rotation = svd.matrixU() * svd.matrixV().transpose();
  const auto& s = svd.singularValues();
  const double scale = std::max(1.0, s.size() ? s(0) : 0.0);
  out.degenerate = s.size() == 0 || s(s.size() - 1) <= 1e-12 * scale;
  return out;
}

Matrix centering_matrix(Eigen::Index n) {
  return Matrix::Identity(n, n) - Matrix::Constant(n, n, 1.0 / static_cast<double>(n));
}

Matrix center_columns(const Matrix& x) {
  const Eigen::RowVectorXd mean = x.colwise().mean();
  return x.rowwise() - mean;
}

}  // namespace mdsr
