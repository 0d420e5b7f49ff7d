/**
 * @file clipper.hpp
 * @brief Consistency-graph construction and the dense-subgraph solver used
 *        for object-map association.
 *
 * Putative object associations become nodes of a consistency graph; edge
 * weights score the pairwise geometric compatibility of two associations.
 * The solver maximizes the density u^T M u / u^T u subject to u_p u_q = 0
 * wherever M_pq = 0. Small problems are solved exactly by clique
 * enumeration; larger ones by projected gradient ascent on the Rayleigh
 * quotient with an orthogonality-penalty homotopy, followed by a greedy
 * consistent rounding.
 */

#ifndef TCAFF_CLIPPER_HPP
#define TCAFF_CLIPPER_HPP

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "tcaff/object_map.hpp"

namespace tcaff {

struct PutativeAssociation {
  int idx_i{0};  // index into the first map's object list
  int idx_j{0};  // index into the second map's object list

  friend bool operator==(const PutativeAssociation& a, const PutativeAssociation& b)
  {
    return a.idx_i == b.idx_i && a.idx_j == b.idx_j;
  }
  friend bool operator<(const PutativeAssociation& a, const PutativeAssociation& b)
  {
    return a.idx_i != b.idx_i ? a.idx_i < b.idx_i : a.idx_j < b.idx_j;
  }
};

struct ClipperParams {
  double epsilon{0.4};   // m; consistency gate on the distance measure
  double sigma{0.15};    // m; Gaussian kernel width for edge weights
  double wh_tol{0.3};    // m; width/height gate for putative associations
  int max_solver_iters{100};
  double solver_tol{1e-9};
  // Problems at or below this size are solved exactly. Set to 0 to force
  // the continuous relaxation (used by the solver-equivalence tests).
  int exhaustive_limit{20};
};

struct ClipperProblem {
  Eigen::MatrixXd affinity;  // m x m, symmetric, unit diagonal
  std::vector<PutativeAssociation> associations;

  int size() const { return static_cast<int>(associations.size()); }
};

struct ClipperSolution {
  std::vector<int> inliers;  // indices into problem.associations, ascending
  double density{0.0};       // u^T M u / u^T u for the rounded indicator
};

/// Candidate pairings between objects of similar width and height,
/// lexicographically sorted for determinism.
inline std::vector<PutativeAssociation> putative_associations(const ObjectMap& map_i,
                                                              const ObjectMap& map_j,
                                                              const ClipperParams& params)
{
  std::vector<PutativeAssociation> out;
  for (int a = 0; a < static_cast<int>(map_i.objects.size()); ++a) {
    const auto& oi = map_i.objects[a];
    for (int b = 0; b < static_cast<int>(map_j.objects.size()); ++b) {
      const auto& oj = map_j.objects[b];
      if (std::abs(oi.width - oj.width) <= params.wh_tol &&
          std::abs(oi.height - oj.height) <= params.wh_tol) {
        out.push_back({a, b});
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Pairwise compatibility of two associations: the mismatch between the
/// intra-map centroid distances, |  ||p_i - q_i|| - ||p_j - q_j||  |.
inline double consistency_distance(const PutativeAssociation& a_p,
                                   const PutativeAssociation& a_q,
                                   const ObjectMap& map_i, const ObjectMap& map_j)
{
  const double di = (map_i.objects[a_p.idx_i].centroid - map_i.objects[a_q.idx_i].centroid).norm();
  const double dj = (map_j.objects[a_p.idx_j].centroid - map_j.objects[a_q.idx_j].centroid).norm();
  return std::abs(di - dj);
}

/**
 * Builds the affinity matrix M with M_pq = exp(-d^2 / (2 sigma^2)) gated at
 * epsilon. Associations sharing an endpoint are forced inconsistent so that
 * rounded solutions are one-to-one matchings.
 */
inline ClipperProblem build_problem(const ObjectMap& map_i, const ObjectMap& map_j,
                                    const std::vector<PutativeAssociation>& assocs,
                                    const ClipperParams& params)
{
  if (assocs.empty()) {
    throw std::invalid_argument("build_problem: empty association list");
  }
  const int m = static_cast<int>(assocs.size());
  ClipperProblem problem;
  problem.associations = assocs;
  problem.affinity = Eigen::MatrixXd::Zero(m, m);
  for (int p = 0; p < m; ++p) {
    problem.affinity(p, p) = 1.0;
    for (int q = p + 1; q < m; ++q) {
      if (assocs[p].idx_i == assocs[q].idx_i || assocs[p].idx_j == assocs[q].idx_j) {
        continue;  // mutual exclusivity
      }
      const double d = consistency_distance(assocs[p], assocs[q], map_i, map_j);
      if (d < params.epsilon) {
        const double w = std::exp(-d * d / (2.0 * params.sigma * params.sigma));
        problem.affinity(p, q) = w;
        problem.affinity(q, p) = w;
      }
    }
  }
  return problem;
}

namespace detail {

/// Density of an indicator set: (|S| + sum of off-diagonal weights) / |S|.
inline double subset_density(const Eigen::MatrixXd& M, const std::vector<int>& S)
{
  if (S.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t a = 0; a < S.size(); ++a) {
    for (std::size_t b = 0; b < S.size(); ++b) sum += M(S[a], S[b]);
  }
  return sum / static_cast<double>(S.size());
}

// Exact search: enumerate all consistent subsets (cliques of the
// consistency graph) by DFS and keep the densest. Strictly-greater update
// keeps the lexicographically first among ties, so results are
// deterministic.
inline void densest_clique_dfs(const Eigen::MatrixXd& M,
                               const std::vector<std::uint64_t>& adj,
                               const std::vector<int>& active,
                               std::vector<int>& current, double edge_sum,
                               std::uint64_t candidates, std::size_t start,
                               std::vector<int>& best, double& best_density)
{
  const double k = static_cast<double>(current.size());
  if (!current.empty()) {
    const double density = 1.0 + 2.0 * edge_sum / k;
    if (density > best_density + 1e-15) {
      best_density = density;
      best = current;
    }
  }
  for (std::size_t v = start; v < active.size(); ++v) {
    if (!((candidates >> v) & 1ULL)) continue;
    double gain = 0.0;
    for (int u : current) gain += M(u, active[v]);
    current.push_back(active[v]);
    densest_clique_dfs(M, adj, active, current, edge_sum + gain,
                       candidates & adj[v], v + 1, best, best_density);
    current.pop_back();
  }
}

inline ClipperSolution solve_exhaustive(const Eigen::MatrixXd& M, const std::vector<int>& active)
{
  const std::size_t n = active.size();
  std::vector<std::uint64_t> adj(n, 0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (a != b && M(active[a], active[b]) > 0.0) adj[a] |= (1ULL << b);
    }
  }
  std::vector<int> best, current;
  double best_density = 0.0;
  const std::uint64_t all = n >= 64 ? ~0ULL : ((1ULL << n) - 1);
  densest_clique_dfs(M, adj, active, current, 0.0, all, 0, best, best_density);
  std::sort(best.begin(), best.end());
  return {best, best_density};
}

inline ClipperSolution solve_relaxed(const Eigen::MatrixXd& Mfull, const std::vector<int>& active,
                                     const ClipperParams& params)
{
  const int n = static_cast<int>(active.size());
  Eigen::MatrixXd M(n, n);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) M(a, b) = Mfull(active[a], active[b]);
  }
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(n, n);  // 1 where u_a u_b may both be nonzero
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) C(a, b) = (a == b || M(a, b) > 0.0) ? 1.0 : 0.0;
  }
  const Eigen::MatrixXd Cb = Eigen::MatrixXd::Ones(n, n) - C;

  const double eps = 1e-9;
  const double beta = 0.25;
  const int max_inner = 200;
  const int max_ls = 99;

  // Fixed initialization: one power step from the normalized all-ones vector.
  Eigen::VectorXd u = M * Eigen::VectorXd::Ones(n).normalized();
  if (u.norm() < eps) u = Eigen::VectorXd::Ones(n);
  u.normalize();

  // Initial penalty weight from the currently active constraints.
  double d = 0.0;
  {
    const Eigen::VectorXd Cbu = Cb * u;
    const Eigen::VectorXd Mu = M * u;
    double mn = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      if (Cbu[i] > eps && u[i] > eps) mn = std::min(mn, Mu[i] / Cbu[i]);
    }
    if (std::isfinite(mn)) d = mn;
  }

  Eigen::MatrixXd Md = M - d * Cb;
  for (int outer = 0; outer < params.max_solver_iters; ++outer) {
    double F = u.dot(Md * u);
    for (int inner = 0; inner < max_inner; ++inner) {
      const Eigen::VectorXd grad = Md * u;
      double alpha = 1.0;
      Eigen::VectorXd unew;
      double Fnew = F, deltaF = 0.0;
      for (int ls = 0; ls < max_ls; ++ls) {
        unew = (u + alpha * grad).cwiseMax(0.0);
        const double nrm = unew.norm();
        if (nrm < eps) unew = u; else unew /= nrm;
        Fnew = unew.dot(Md * unew);
        deltaF = Fnew - F;
        if (deltaF < -eps) alpha *= beta; else break;
      }
      const double deltau = (unew - u).norm();
      F = Fnew;
      u = unew;
      if (deltau < params.solver_tol || std::abs(deltaF) < params.solver_tol) break;
    }
    // Raise the penalty until no constraint stays active.
    const Eigen::VectorXd Cbu = Cb * u;
    const Eigen::VectorXd Mu = M * u;
    double mn = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      if (Cbu[i] > eps && u[i] > eps) mn = std::min(mn, std::abs(Mu[i] / Cbu[i]));
    }
    if (!std::isfinite(mn)) break;
    d += mn;
    Md = M - d * Cb;
  }

  // Greedy consistent rounding: scan indices by decreasing u and keep those
  // compatible with everything kept so far.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return u[a] != u[b] ? u[a] > u[b] : a < b;
  });
  std::vector<int> kept;
  for (int idx : order) {
    if (u[idx] <= eps) break;
    bool ok = true;
    for (int k : kept) {
      if (C(idx, k) == 0.0) { ok = false; break; }
    }
    if (ok) kept.push_back(idx);
  }
  std::vector<int> inliers;
  inliers.reserve(kept.size());
  for (int k : kept) inliers.push_back(active[k]);
  std::sort(inliers.begin(), inliers.end());
  return {inliers, subset_density(Mfull, inliers)};
}

}  // namespace detail

/**
 * Maximizes u^T M u / u^T u over consistent indicator vectors. Associations
 * whose diagonal entry has been zeroed (by the multi-solution loop) are
 * excluded up front. Deterministic: no randomness in either path.
 */
inline ClipperSolution solve(const ClipperProblem& problem, const ClipperParams& params)
{
  const int m = problem.size();
  std::vector<int> active;
  for (int p = 0; p < m; ++p) {
    if (problem.affinity(p, p) > 0.0) active.push_back(p);
  }
  if (active.empty()) return {};
  if (static_cast<int>(active.size()) <= std::min(params.exhaustive_limit, 62)) {
    return detail::solve_exhaustive(problem.affinity, active);
  }
  return detail::solve_relaxed(problem.affinity, active, params);
}

}  // namespace tcaff

#endif  // TCAFF_CLIPPER_HPP
