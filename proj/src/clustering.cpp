#include "mdsrecover/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mdsrecover/cmds.hpp"
#include "mdsrecover/error.hpp"
#include "mdsrecover/rng.hpp"

namespace mdsr {

LabelVector::LabelVector(std::vector<int> labels, int k) : labels_(std::move(labels)), k_(k) {
  require(k_ >= 1, "label vector needs k >= 1");
  for (int l : labels_)
    if (l < 1 || l > k_) fail(ErrorKind::InvalidInput, "label " + std::to_string(l) + " outside 1.." + std::to_string(k_));
}

LabelVector LabelVector::infer(std::vector<int> labels) {
  require(!labels.empty(), "label vector must be nonempty");
  const int k = *std::max_element(labels.begin(), labels.end());
  return LabelVector(std::move(labels), std::max(k, 1));
}

LabelVector canonical_labels(const LabelVector& labels) {
  std::vector<int> remap(static_cast<std::size_t>(labels.k()) + 1, 0);
  std::vector<int> out(labels.size());
  int next = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    int& slot = remap[static_cast<std::size_t>(labels[i])];
    if (slot == 0) slot = ++next;
    out[i] = slot;
  }
  return LabelVector(std::move(out), labels.k());
}

// ---------------------------------------------------------------------------
// agreement

namespace {

// Confusion counts padded to a common K (a label set that does not use every
// value simply contributes empty rows or columns).
std::vector<std::vector<long>> confusion(const LabelVector& u, const LabelVector& v, int& k_out) {
  require(u.size() == v.size(), "agreement: label vectors differ in length");
  require(u.size() >= 1, "agreement: label vectors are empty");
  const int k = std::max(u.k(), v.k());
  std::vector<std::vector<long>> c(static_cast<std::size_t>(k), std::vector<long>(static_cast<std::size_t>(k), 0));
  for (std::size_t i = 0; i < u.size(); ++i) ++c[static_cast<std::size_t>(u[i] - 1)][static_cast<std::size_t>(v[i] - 1)];
  k_out = k;
  return c;
}

// Hungarian algorithm (potentials form) minimizing total cost; returns the
// column assigned to each row.
std::vector<int> hungarian_min(const std::vector<std::vector<long>>& cost) {
  const int n = static_cast<int>(cost.size());
  const long inf = std::numeric_limits<long>::max() / 4;
  std::vector<long> u(n + 1, 0), v(n + 1, 0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<long> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      long delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const long cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n, 0);
  for (int j = 1; j <= n; ++j) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

}  // namespace

double agreement_brute_force(const LabelVector& u, const LabelVector& v) {
  int k = 0;
  const auto c = confusion(u, v, k);
  std::vector<int> perm(static_cast<std::size_t>(k));
  std::iota(perm.begin(), perm.end(), 0);
  long best = 0;
  do {
    long hits = 0;
    for (int b = 0; b < k; ++b) hits += c[static_cast<std::size_t>(perm[b])][static_cast<std::size_t>(b)];
    best = std::max(best, hits);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(best) / static_cast<double>(u.size());
}

double agreement_matching(const LabelVector& u, const LabelVector& v) {
  int k = 0;
  const auto c = confusion(u, v, k);
  long top = 0;
  for (const auto& row : c) top = std::max(top, *std::max_element(row.begin(), row.end()));
  std::vector<std::vector<long>> cost(c.size(), std::vector<long>(c.size()));
  for (std::size_t a = 0; a < c.size(); ++a)
    for (std::size_t b = 0; b < c.size(); ++b) cost[a][b] = top - c[a][b];
  const auto assign = hungarian_min(cost);
  long hits = 0;
  for (std::size_t a = 0; a < c.size(); ++a) hits += c[a][static_cast<std::size_t>(assign[a])];
  return static_cast<double>(hits) / static_cast<double>(u.size());
}

double agreement(const LabelVector& u, const LabelVector& v) {
  return std::max(u.k(), v.k()) <= 6 ? agreement_brute_force(u, v) : agreement_matching(u, v);
}

// ---------------------------------------------------------------------------
// k-means

namespace {

double sq_dist(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

std::vector<Eigen::Index> furthest_point_init(const Matrix& y, int k, Philox& rng) {
  const Eigen::Index n = y.rows();
  std::vector<Eigen::Index> chosen;
  chosen.reserve(static_cast<std::size_t>(k));
  std::vector<char> taken(static_cast<std::size_t>(n), 0);
  std::vector<double> nearest(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  Eigen::Index next = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
  for (int c = 0; c < k; ++c) {
    chosen.push_back(next);
    taken[static_cast<std::size_t>(next)] = 1;
    if (c + 1 == k) break;
    double best = -1.0;
    Eigen::Index best_i = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      auto& nd = nearest[static_cast<std::size_t>(i)];
      nd = std::min(nd, sq_dist(y, i, y, next));
      if (!taken[static_cast<std::size_t>(i)] && nd > best) {
        best = nd;
        best_i = i;
      }
    }
    next = best_i;
  }
  return chosen;
}

struct LloydRun {
  std::vector<int> assign;
  Matrix centroids;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
};

LloydRun lloyd(const Matrix& y, int k, int max_iter, Philox& rng) {
  const Eigen::Index n = y.rows();
  const auto seeds = furthest_point_init(y, k, rng);
  LloydRun run;
  run.centroids.resize(k, y.cols());
  for (int c = 0; c < k; ++c) run.centroids.row(c) = y.row(seeds[static_cast<std::size_t>(c)]);
  run.assign.assign(static_cast<std::size_t>(n), -1);

  std::vector<double> dist_to_own(static_cast<std::size_t>(n), 0.0);
  for (int iter = 1; iter <= max_iter; ++iter) {
    run.iterations = iter;
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = sq_dist(y, i, run.centroids, 0);
      for (int c = 1; c < k; ++c) {
        const double dd = sq_dist(y, i, run.centroids, c);
        if (dd < best_d) {
          best_d = dd;
          best = c;
        }
      }
      dist_to_own[static_cast<std::size_t>(i)] = best_d;
      if (run.assign[static_cast<std::size_t>(i)] != best) {
        run.assign[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }

    // Reseed empty clusters with the point farthest from its centroid.
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (int a : run.assign) ++counts[static_cast<std::size_t>(a)];
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      Eigen::Index far = -1;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (counts[static_cast<std::size_t>(run.assign[static_cast<std::size_t>(i)])] <= 1) continue;
        if (dist_to_own[static_cast<std::size_t>(i)] > far_d) {
          far_d = dist_to_own[static_cast<std::size_t>(i)];
          far = i;
        }
      }
      if (far < 0) break;
      --counts[static_cast<std::size_t>(run.assign[static_cast<std::size_t>(far)])];
      run.assign[static_cast<std::size_t>(far)] = c;
      counts[static_cast<std::size_t>(c)] = 1;
      dist_to_own[static_cast<std::size_t>(far)] = 0.0;
      changed = true;
    }

    if (!changed && iter > 1) {
      run.converged = true;
      break;
    }
    run.centroids.setZero();
    for (Eigen::Index i = 0; i < n; ++i) run.centroids.row(run.assign[static_cast<std::size_t>(i)]) += y.row(i);
    for (int c = 0; c < k; ++c) run.centroids.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
  }

  run.objective = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) run.objective += sq_dist(y, i, run.centroids, run.assign[static_cast<std::size_t>(i)]);
  return run;
}

}  // namespace

KMeansResult kmeans(const Matrix& y, int k, const KMeansOptions& options) {
  require_finite(y, "k-means input");
  require(k >= 1, "k-means needs k >= 1");
  if (k > y.rows()) fail(ErrorKind::InvalidInput, "k-means needs k <= N");
  require(options.max_iter >= 1 && options.restarts >= 1, "k-means needs max_iter >= 1 and restarts >= 1");

  LloydRun best;
  bool have = false;
  for (int t = 0; t < options.restarts; ++t) {
    Philox rng(derive_seed(options.seed, "kmeans", {static_cast<std::uint64_t>(t)}));
    LloydRun run = lloyd(y, k, options.max_iter, rng);
    if (!have || run.objective < best.objective) {
      best = std::move(run);
      have = true;
    }
  }
  std::vector<int> labels(best.assign.size());
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = best.assign[i] + 1;
  return KMeansResult{LabelVector(std::move(labels), k), best.centroids, best.objective, best.iterations, best.converged};
}

KMeansObjective kmeans_objective(const Matrix& y, const LabelVector& labels) {
  require(static_cast<Eigen::Index>(labels.size()) == y.rows(), "k-means objective: label count must match rows");
  const int k = labels.k();
  Matrix sums = Matrix::Zero(k, y.cols());
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    sums.row(labels[i] - 1) += y.row(static_cast<Eigen::Index>(i));
    ++counts[static_cast<std::size_t>(labels[i] - 1)];
  }
  KMeansObjective out;
  for (int c = 0; c < k; ++c) {
    if (counts[static_cast<std::size_t>(c)] == 0)
      out.empty_clusters.push_back(c + 1);
    else
      sums.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
  }
  for (std::size_t i = 0; i < labels.size(); ++i)
    out.value += (y.row(static_cast<Eigen::Index>(i)) - sums.row(labels[i] - 1)).squaredNorm();
  return out;
}

// ---------------------------------------------------------------------------
// hierarchical

std::string to_string(Linkage linkage) {
  switch (linkage) {
    case Linkage::Single: return "single";
    case Linkage::Complete: return "complete";
    case Linkage::Average: return "average";
    case Linkage::Energy: return "energy";
  }
  return "single";
}

Linkage linkage_from_string(const std::string& name) {
  if (name == "single") return Linkage::Single;
  if (name == "complete") return Linkage::Complete;
  if (name == "average") return Linkage::Average;
  if (name == "energy") return Linkage::Energy;
  fail(ErrorKind::InvalidInput, "unknown linkage '" + name + "'");
}

namespace {

// Label points by the root slot of their cluster, numbered by first appearance.
LabelVector labels_from_roots(const std::vector<Eigen::Index>& root, int k) {
  std::vector<int> out(root.size());
  std::vector<int> number(root.size(), 0);
  int next = 0;
  for (std::size_t i = 0; i < root.size(); ++i) {
    int& slot = number[static_cast<std::size_t>(root[i])];
    if (slot == 0) slot = ++next;
    out[i] = slot;
  }
  return LabelVector(std::move(out), k);
}

}  // namespace

LabelVector hierarchical(const Matrix& y, int k, Linkage linkage) {
  require_finite(y, "clustering input");
  require(k >= 1, "hierarchical clustering needs k >= 1");
  const Eigen::Index n = y.rows();
  if (k > n) fail(ErrorKind::InvalidInput, "hierarchical clustering needs k <= N");

  // Cluster slots are named by their smallest member; merging keeps the
  // smaller slot. Pair statistics: min, max and sum of cross distances, plus
  // the ordered within-cluster distance sum for the energy linkage.
  const Matrix dist = pairwise_distances(y);
  Matrix cross_min = dist, cross_max = dist, cross_sum = dist;
  std::vector<double> within(static_cast<std::size_t>(n), 0.0);
  std::vector<double> size(static_cast<std::size_t>(n), 1.0);
  std::vector<Eigen::Index> active(static_cast<std::size_t>(n));
  std::iota(active.begin(), active.end(), Eigen::Index{0});
  std::vector<Eigen::Index> owner(static_cast<std::size_t>(n));
  std::iota(owner.begin(), owner.end(), Eigen::Index{0});

  auto link = [&](Eigen::Index a, Eigen::Index b) {
    const double na = size[static_cast<std::size_t>(a)], nb = size[static_cast<std::size_t>(b)];
    switch (linkage) {
      case Linkage::Single: return cross_min(a, b);
      case Linkage::Complete: return cross_max(a, b);
      case Linkage::Average: return cross_sum(a, b) / (na * nb);
      case Linkage::Energy:
        return 2.0 * cross_sum(a, b) / (na * nb) - within[static_cast<std::size_t>(a)] / (na * na) -
               within[static_cast<std::size_t>(b)] / (nb * nb);
    }
    return 0.0;
  };

  while (static_cast<int>(active.size()) > k) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_p = 0, best_q = 1;
    for (std::size_t p = 0; p < active.size(); ++p) {
      for (std::size_t q = p + 1; q < active.size(); ++q) {
        const double value = link(active[p], active[q]);
        if (value < best) {
          best = value;
          best_p = p;
          best_q = q;
        }
      }
    }
    const Eigen::Index a = active[best_p], b = active[best_q];
    within[static_cast<std::size_t>(a)] += within[static_cast<std::size_t>(b)] + 2.0 * cross_sum(a, b);
    for (Eigen::Index c : active) {
      if (c == a || c == b) continue;
      cross_min(a, c) = cross_min(c, a) = std::min(cross_min(a, c), cross_min(b, c));
      cross_max(a, c) = cross_max(c, a) = std::max(cross_max(a, c), cross_max(b, c));
      cross_sum(a, c) = cross_sum(c, a) = cross_sum(a, c) + cross_sum(b, c);
    }
    size[static_cast<std::size_t>(a)] += size[static_cast<std::size_t>(b)];
    for (auto& o : owner)
      if (o == b) o = a;
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(best_q));
  }
  return labels_from_roots(owner, k);
}

LabelVector single_linkage_mst(const Matrix& y, int k) {
  require_finite(y, "clustering input");
  require(k >= 1, "single linkage needs k >= 1");
  const Eigen::Index n = y.rows();
  if (k > n) fail(ErrorKind::InvalidInput, "single linkage needs k <= N");

  // Prim's algorithm on the implicit complete graph.
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = y;
  const Eigen::Index dim = y.cols();
  auto distance = [&](Eigen::Index i, Eigen::Index j) {
    const double* a = rows.data() + i * dim;
    const double* b = rows.data() + j * dim;
    double s = 0.0;
    for (Eigen::Index t = 0; t < dim; ++t) s += (a[t] - b[t]) * (a[t] - b[t]);
    return std::sqrt(s);
  };
  struct Edge {
    double w;
    Eigen::Index a, b;
  };
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(n));
  std::vector<char> in_tree(static_cast<std::size_t>(n), 0);
  std::vector<double> best(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  std::vector<Eigen::Index> parent(static_cast<std::size_t>(n), 0);
  Eigen::Index current = 0;
  in_tree[0] = 1;
  for (Eigen::Index step = 1; step < n; ++step) {
    Eigen::Index next = -1;
    double next_w = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (in_tree[static_cast<std::size_t>(i)]) continue;
      const double w = distance(i, current);
      if (w < best[static_cast<std::size_t>(i)]) {
        best[static_cast<std::size_t>(i)] = w;
        parent[static_cast<std::size_t>(i)] = current;
      }
      if (next < 0 || best[static_cast<std::size_t>(i)] < next_w) {
        next_w = best[static_cast<std::size_t>(i)];
        next = i;
      }
    }
    in_tree[static_cast<std::size_t>(next)] = 1;
    edges.push_back({next_w, std::min(next, parent[static_cast<std::size_t>(next)]),
                     std::max(next, parent[static_cast<std::size_t>(next)])});
    current = next;
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& l, const Edge& r) {
    if (l.w != r.w) return l.w < r.w;
    if (l.a != r.a) return l.a < r.a;
    return l.b < r.b;
  });

  // Kruskal over the n - k lightest tree edges; roots are smallest members.
  std::vector<Eigen::Index> uf(static_cast<std::size_t>(n));
  std::iota(uf.begin(), uf.end(), Eigen::Index{0});
  auto find = [&](Eigen::Index x) {
    while (uf[static_cast<std::size_t>(x)] != x) {
      uf[static_cast<std::size_t>(x)] = uf[static_cast<std::size_t>(uf[static_cast<std::size_t>(x)])];
      x = uf[static_cast<std::size_t>(x)];
    }
    return x;
  };
  for (Eigen::Index e = 0; e < n - k; ++e) {
    const Eigen::Index ra = find(edges[static_cast<std::size_t>(e)].a), rb = find(edges[static_cast<std::size_t>(e)].b);
    if (ra < rb)
      uf[static_cast<std::size_t>(rb)] = ra;
    else
      uf[static_cast<std::size_t>(ra)] = rb;
  }
  std::vector<Eigen::Index> root(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) root[static_cast<std::size_t>(i)] = find(i);
  return labels_from_roots(root, k);
}

// ---------------------------------------------------------------------------
// certificate

RecoveryCertificate pgr_check(const Matrix& y, const LabelVector& labels) {
  require(static_cast<Eigen::Index>(labels.size()) == y.rows(), "pgr check: label count must match rows");
  require_finite(y, "embedding");
  std::vector<int> counts(static_cast<std::size_t>(labels.k()), 0);
  for (int l : labels.labels()) ++counts[static_cast<std::size_t>(l - 1)];
  for (int c = 0; c < labels.k(); ++c)
    if (counts[static_cast<std::size_t>(c)] == 0) fail(ErrorKind::InvalidInput, "pgr check: cluster " + std::to_string(c + 1) + " is empty");
  if (labels.k() < 2) fail(ErrorKind::SingleCluster, "between-cluster distance needs at least two clusters");

  RecoveryCertificate out;
  out.d_btw = std::numeric_limits<double>::infinity();
  const Eigen::Index n = y.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double dist = (y.row(i) - y.row(j)).norm();
      if (labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)])
        out.d_in = std::max(out.d_in, dist);
      else
        out.d_btw = std::min(out.d_btw, dist);
    }
  }
  out.is_pgr = out.d_btw > 2.0 * out.d_in;
  return out;
}

}  // namespace mdsr
