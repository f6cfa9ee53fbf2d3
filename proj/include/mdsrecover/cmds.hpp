#pragma once

// Classical multidimensional scaling: double centering, rank-r embedding,
// eigenratio rank selection, eigenvalue debiasing and PSD projection.

#include <cstddef>

#include "mdsrecover/spectral.hpp"

namespace mdsr {

/// Symmetric, zero-diagonal, nonnegative pairwise dissimilarities.
///
/// Stored as plain distances unless `squared()` is set, in which case the
/// entries are already D^(2) and double centering uses them as is.
class DissimilarityMatrix {
 public:
  DissimilarityMatrix(Matrix values, bool squared = false, bool metric = true);

  /// Euclidean distances between the rows of `x`.
  static DissimilarityMatrix from_coordinates(const Matrix& x);

  const Matrix& values() const noexcept { return values_; }
  Eigen::Index size() const noexcept { return values_.rows(); }
  bool squared() const noexcept { return squared_; }
  bool metric() const noexcept { return metric_; }

  /// Entrywise squared dissimilarities D^(2).
  Matrix squared_values() const;

 private:
  Matrix values_;
  bool squared_;
  bool metric_;
};

struct Embedding {
  Matrix coordinates;      // N x r, row i is sample i
  Vector kept_eigenvalues; // length r, descending, positive
  Vector all_eigenvalues;  // full spectrum of B, descending
  int rank = 0;
  bool debiased = false;
};

/// B = -1/2 J D^(2) J.
SymmetricMatrix double_center(const DissimilarityMatrix& d);

/// Eigenvalues below this are treated as zero when counting usable
/// directions of B.
double positivity_floor(double top_eigenvalue);

/// Top-r CMDS embedding V_r Lambda_r^{1/2} of a Gram-type matrix.
Embedding embed(const SymmetricMatrix& b, int r);

/// Same result as embed(double_center(from_coordinates(x)), r) up to column
/// signs, computed from whichever of (JX)(JX)^T or (JX)^T(JX) is smaller.
/// When d < N the spectrum is padded with zeros to length N.
Embedding embed_coordinates(const Matrix& x, int r);

/// Number of eigenvalues strictly above the positivity floor.
int positive_eigenvalue_count(const Vector& eigenvalues_desc);

constexpr double kDefaultEigenratioFloor = 1e-8;
/// Interior ratios within this of 1 count as a flat spectrum.
constexpr double kFlatSpectrumTolerance = 1e-8;

/// argmax_{1 <= i <= R} lambda_i / lambda_{i+1}, R the largest index with
/// lambda_{R+1} > floor. 1-based; ties go to the smaller index. When every
/// interior ratio is 1 (or only one eigenvalue clears the floor) the count
/// of eigenvalues above the floor is returned. NotEnoughSignal if none do.
int select_rank_eigenratio(const Vector& eigenvalues_desc, double floor = kDefaultEigenratioFloor);

/// kept - trace_sigma, elementwise.
Vector debias_eigenvalues(const Vector& kept, double trace_sigma);

/// Rescales the columns of an embedding to the debiased eigenvalues.
Embedding debias(const Embedding& embedding, double trace_sigma);

struct PsdProjection {
  SymmetricMatrix gram;
  double discarded_mass = 0.0;  // sum of |negative eigenvalues| of B
};

/// Double centers and clips negative eigenvalues of B to zero.
PsdProjection psd_project(const DissimilarityMatrix& d);

/// Clips the negative spectrum of an already double-centered matrix.
PsdProjection psd_clip(const SymmetricMatrix& b);

/// Pairwise Euclidean distances between rows.
Matrix pairwise_distances(const Matrix& y);

}  // namespace mdsr
