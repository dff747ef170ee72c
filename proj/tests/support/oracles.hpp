// Independent reference implementations used to check the library. These
// deliberately avoid the library's code paths: the B-spline evaluator uses
// the textbook recursion instead of the iterative algorithm, least squares
// goes through hand-rolled normal equations, and HMM quantities come from
// exhaustive path enumeration.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace oracles {

// ---- naive Cox-de Boor recursion ----
// B_{i,1}(x) indicator with the final nonempty interval closed on the
// right, so x = domain end behaves like the clamped basis.

inline double bspline_rec(const std::vector<double>& knots, int i, int k,
                          double x) {
  if (k == 1) {
    if (knots[i] <= x && x < knots[i + 1]) return 1.0;
    const double last = knots.back();
    if (x == last && knots[i] < knots[i + 1] && knots[i + 1] == last) return 1.0;
    return 0.0;
  }
  double left = 0.0, right = 0.0;
  const double denom_l = knots[i + k - 1] - knots[i];
  if (denom_l > 0.0) left = (x - knots[i]) / denom_l * bspline_rec(knots, i, k - 1, x);
  const double denom_r = knots[i + k] - knots[i + 1];
  if (denom_r > 0.0)
    right = (knots[i + k] - x) / denom_r * bspline_rec(knots, i + 1, k - 1, x);
  return left + right;
}

inline std::vector<double> bspline_all(const std::vector<double>& knots,
                                       int n_basis, int order, double x) {
  std::vector<double> out(n_basis);
  for (int i = 0; i < n_basis; ++i) out[i] = bspline_rec(knots, i, order, x);
  return out;
}

// ---- dense normal-equations least squares ----
// Gauss-Jordan with partial pivoting on A^T A c = A^T y; no linear-algebra
// library involved.

inline std::vector<double> solve_normal_equations(
    const std::vector<std::vector<double>>& A, const std::vector<double>& y) {
  const int n = (int)A.size();
  const int p = (int)A[0].size();
  std::vector<std::vector<double>> ata(p, std::vector<double>(p, 0.0));
  std::vector<double> aty(p, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) {
      aty[j] += A[i][j] * y[i];
      for (int k = 0; k < p; ++k) ata[j][k] += A[i][j] * A[i][k];
    }
  // Augmented elimination.
  for (int col = 0; col < p; ++col) {
    int pivot = col;
    for (int r = col + 1; r < p; ++r)
      if (std::abs(ata[r][col]) > std::abs(ata[pivot][col])) pivot = r;
    std::swap(ata[col], ata[pivot]);
    std::swap(aty[col], aty[pivot]);
    if (std::abs(ata[col][col]) < 1e-14)
      throw std::runtime_error("oracle normal equations singular");
    const double d = ata[col][col];
    for (int k = col; k < p; ++k) ata[col][k] /= d;
    aty[col] /= d;
    for (int r = 0; r < p; ++r) {
      if (r == col) continue;
      const double f = ata[r][col];
      if (f == 0.0) continue;
      for (int k = col; k < p; ++k) ata[r][k] -= f * ata[col][k];
      aty[r] -= f * aty[col];
    }
  }
  return aty;
}

inline double residual_sum_of_squares(const std::vector<std::vector<double>>& A,
                                      const std::vector<double>& y,
                                      const std::vector<double>& c) {
  double rss = 0.0;
  for (size_t i = 0; i < A.size(); ++i) {
    double fit = 0.0;
    for (size_t j = 0; j < c.size(); ++j) fit += A[i][j] * c[j];
    rss += (y[i] - fit) * (y[i] - fit);
  }
  return rss;
}

// ---- exhaustive HMM enumeration ----
// Scores accumulate in the same association order as the library's
// recursions, so optimal-path ties resolve bit-identically.

struct HmmInstance {
  int n_states = 0;
  int T = 0;
  std::vector<double> log_initial;             // n
  std::vector<std::vector<double>> log_trans;  // n x n
  std::vector<std::vector<double>> log_emit;   // T x n
};

inline void enumerate_paths(const HmmInstance& inst,
                            std::vector<std::vector<int>>& paths,
                            std::vector<double>& scores) {
  const int n = inst.n_states, T = inst.T;
  long total = 1;
  for (int t = 0; t < T; ++t) total *= n;
  paths.clear();
  scores.clear();
  std::vector<int> path(T);
  for (long code = 0; code < total; ++code) {
    long c = code;
    for (int t = T - 1; t >= 0; --t) {
      path[t] = (int)(c % n);
      c /= n;
    }
    double v = inst.log_initial[path[0]];
    v += inst.log_emit[0][path[0]];
    for (int t = 1; t < T; ++t) {
      v += inst.log_trans[path[t - 1]][path[t]];
      v += inst.log_emit[t][path[t]];
    }
    paths.push_back(path);
    scores.push_back(v);
  }
}

inline double brute_force_log_likelihood(const HmmInstance& inst) {
  std::vector<std::vector<int>> paths;
  std::vector<double> scores;
  enumerate_paths(inst, paths, scores);
  const double m = *std::max_element(scores.begin(), scores.end());
  double s = 0.0;
  for (double v : scores) s += std::exp(v - m);
  return m + std::log(s);
}

inline std::vector<std::vector<double>> brute_force_posteriors(
    const HmmInstance& inst) {
  std::vector<std::vector<int>> paths;
  std::vector<double> scores;
  enumerate_paths(inst, paths, scores);
  const double m = *std::max_element(scores.begin(), scores.end());
  double total = 0.0;
  std::vector<std::vector<double>> gamma(inst.T,
                                         std::vector<double>(inst.n_states, 0.0));
  for (size_t i = 0; i < paths.size(); ++i) {
    const double w = std::exp(scores[i] - m);
    total += w;
    for (int t = 0; t < inst.T; ++t) gamma[t][paths[i][t]] += w;
  }
  for (auto& row : gamma)
    for (double& v : row) v /= total;
  return gamma;
}

// Among maximal paths, picks the one that is lexicographically smallest
// read from the last state backwards; this matches a backward-pass DP
// whose argmax prefers the lower state index.
inline std::vector<int> brute_force_viterbi(const HmmInstance& inst) {
  std::vector<std::vector<int>> paths;
  std::vector<double> scores;
  enumerate_paths(inst, paths, scores);
  size_t best = 0;
  for (size_t i = 1; i < paths.size(); ++i) {
    if (scores[i] > scores[best]) {
      best = i;
    } else if (scores[i] == scores[best]) {
      for (int t = inst.T - 1; t >= 0; --t) {
        if (paths[i][t] == paths[best][t]) continue;
        if (paths[i][t] < paths[best][t]) best = i;
        break;
      }
    }
  }
  return paths[best];
}

// ---- Hungarian assignment (O(n^3) potentials form) ----
// Returns assignment[row] = column minimizing total cost.

inline std::vector<int> hungarian(const std::vector<std::vector<double>>& cost) {
  const int n = (int)cost.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, false);
    do {
      used[j0] = true;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
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
    } while (j0);
  }
  std::vector<int> assignment(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] > 0) assignment[p[j] - 1] = j - 1;
  return assignment;
}

}  // namespace oracles
