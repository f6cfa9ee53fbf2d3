#pragma once

// Distance-based clustering with exact-recovery guarantees, the
// permutation-invariant agreement score, and the perfect geometric
// representation certificate.

#include <cstdint>
#include <string>
#include <vector>

#include "mdsrecover/spectral.hpp"

namespace mdsr {

/// Cluster assignments in {1..k}.
class LabelVector {
 public:
  LabelVector(std::vector<int> labels, int k);
  /// k taken as the largest label present.
  static LabelVector infer(std::vector<int> labels);

  const std::vector<int>& labels() const noexcept { return labels_; }
  int k() const noexcept { return k_; }
  std::size_t size() const noexcept { return labels_.size(); }
  int operator[](std::size_t i) const { return labels_[i]; }

 private:
  std::vector<int> labels_;
  int k_;
};

/// max over permutations pi of (1/N) #{i : u_i = pi(v_i)}.
/// Brute force for k <= 6, Hungarian assignment on the confusion matrix above.
double agreement(const LabelVector& u, const LabelVector& v);

/// Agreement by exhaustive permutation search, any k (factorial cost).
double agreement_brute_force(const LabelVector& u, const LabelVector& v);

/// Agreement via maximum-weight assignment on the confusion matrix.
double agreement_matching(const LabelVector& u, const LabelVector& v);

struct KMeansOptions {
  std::uint64_t seed = 0;
  int max_iter = 300;
  int restarts = 1;  // best objective kept
};

struct KMeansResult {
  LabelVector labels;
  Matrix centroids;  // k x r
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Lloyd's algorithm from furthest-point initial centroids.
KMeansResult kmeans(const Matrix& y, int k, const KMeansOptions& options = {});

struct KMeansObjective {
  double value = 0.0;
  std::vector<int> empty_clusters;  // 1-based
};

/// sum_m 1/(2|S_m|) sum_{i,j in S_m} ||y_i - y_j||^2
KMeansObjective kmeans_objective(const Matrix& y, const LabelVector& labels);

enum class Linkage { Single, Complete, Average, Energy };

std::string to_string(Linkage linkage);
Linkage linkage_from_string(const std::string& name);

/// Greedy agglomeration from singletons using the given linkage, cut at k
/// clusters. Ties go to the lexicographically smallest cluster pair, where
/// clusters are indexed by their smallest member. Output labels are
/// numbered by first appearance.
LabelVector hierarchical(const Matrix& y, int k, Linkage linkage);

/// Single linkage through a minimum spanning tree, O(N^2) time and O(N)
/// memory; matches hierarchical(y, k, Linkage::Single) whenever the merge
/// heights are distinct.
LabelVector single_linkage_mst(const Matrix& y, int k);

struct RecoveryCertificate {
  double d_in = 0.0;   // max within-cluster distance
  double d_btw = 0.0;  // min between-cluster distance
  bool is_pgr = false; // d_btw > 2 d_in
};

RecoveryCertificate pgr_check(const Matrix& y, const LabelVector& labels);

/// Relabels so that labels are numbered 1..k by first appearance.
LabelVector canonical_labels(const LabelVector& labels);

}  // namespace mdsr
