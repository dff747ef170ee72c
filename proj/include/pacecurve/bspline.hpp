#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "pacecurve/errors.hpp"
#include "pacecurve/ingest.hpp"

namespace pacecurve {

// Clamped B-spline basis on [0, domain_m] with equally spaced interior
// knots. n_basis = interior knots + order; endpoint knots carry full
// multiplicity so the boundary is well defined.
class FunctionalBasis {
 public:
  FunctionalBasis() = default;

  FunctionalBasis(double domain_m, int n_basis, int order)
      : order_(order), n_basis_(n_basis), domain_(domain_m) {
    if (order < 2) throw Error("FunctionalBasis: order must be >= 2");
    if (order > 15) throw Error("FunctionalBasis: order must be <= 15");
    if (n_basis < order) throw Error("FunctionalBasis: n_basis must be >= order");
    if (!(domain_m > 0)) throw Error("FunctionalBasis: domain must be positive");
    const int interior = n_basis - order;
    knots_.resize(n_basis + order);
    for (int i = 0; i < order; ++i) knots_[i] = 0.0;
    for (int j = 0; j < interior; ++j)
      knots_[order + j] = domain_m * (j + 1) / (interior + 1);
    for (int i = 0; i < order; ++i) knots_[n_basis + i] = domain_m;
  }

  int order() const { return order_; }
  int n_basis() const { return n_basis_; }
  double domain() const { return domain_; }
  const std::vector<double>& knots() const { return knots_; }

  std::vector<double> interior_knots() const {
    return {knots_.begin() + order_, knots_.begin() + n_basis_};
  }

  // Unique knots including both endpoints; quadrature intervals.
  std::vector<double> breakpoints() const {
    std::vector<double> b;
    b.push_back(0.0);
    for (int j = order_; j < n_basis_; ++j) b.push_back(knots_[j]);
    b.push_back(domain_);
    return b;
  }

  bool contains(double x) const { return x >= 0.0 && x <= domain_; }

  // Knot span index i with knots[i] <= x < knots[i+1] (last span at x = domain).
  int find_span(double x) const {
    if (x >= domain_) return n_basis_ - 1;
    int lo = order_ - 1, hi = n_basis_;
    while (hi - lo > 1) {
      int mid = (lo + hi) / 2;
      if (x < knots_[mid]) hi = mid;
      else lo = mid;
    }
    return lo;
  }

  // All n_basis values at x (Cox-de Boor; only `order` of them are nonzero).
  void eval_all(double x, Eigen::VectorXd& out) const {
    if (!contains(x)) throw OutOfDomain(x);
    out.setZero(n_basis_);
    const int span = find_span(x);
    double N[16], left[16], right[16];  // order <= 15 is far beyond any use here
    N[0] = 1.0;
    for (int j = 1; j < order_; ++j) {
      left[j] = x - knots_[span + 1 - j];
      right[j] = knots_[span + j] - x;
      double saved = 0.0;
      for (int r = 0; r < j; ++r) {
        const double temp = N[r] / (right[r + 1] + left[j - r]);
        N[r] = saved + right[r + 1] * temp;
        saved = left[j - r] * temp;
      }
      N[j] = saved;
    }
    for (int j = 0; j < order_; ++j) out[span - order_ + 1 + j] = N[j];
  }

  Eigen::VectorXd eval_all(double x) const {
    Eigen::VectorXd out;
    eval_all(x, out);
    return out;
  }

  double eval_basis(int k, double x) const {
    Eigen::VectorXd v = eval_all(x);
    return v[k];
  }

  friend bool operator==(const FunctionalBasis& a, const FunctionalBasis& b) {
    return a.order_ == b.order_ && a.n_basis_ == b.n_basis_ &&
           a.domain_ == b.domain_;
  }

 private:
  int order_ = 0;
  int n_basis_ = 0;
  double domain_ = 0.0;
  std::vector<double> knots_;
};

// Basis for a race distance; refuses underdetermined least squares
// (more basis functions than 50 m grid points).
inline FunctionalBasis make_basis(int distance_m, int n_basis, int order) {
  if (distance_m <= 0 || distance_m % 50 != 0)
    throw Error("make_basis: distance_m must be a positive multiple of 50");
  const int n_points = distance_m / 50;
  if (n_basis > n_points) throw TooManyBasisFunctions(n_basis, n_points);
  return FunctionalBasis((double)distance_m, n_basis, order);
}

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

namespace detail {
// 5-point Gauss-Legendre on [-1, 1]; exact through degree 9.
inline constexpr double kGL5Nodes[5] = {
    -0.9061798459386640, -0.5384693101056831, 0.0,
    0.5384693101056831, 0.9061798459386640};
inline constexpr double kGL5Weights[5] = {
    0.23692688505618909, 0.47862867049936647, 0.56888888888888889,
    0.47862867049936647, 0.23692688505618909};
}  // namespace detail

inline QuadratureRule gauss_legendre_rule(const std::vector<double>& breakpoints) {
  QuadratureRule rule;
  for (size_t i = 0; i + 1 < breakpoints.size(); ++i) {
    const double a = breakpoints[i], b = breakpoints[i + 1];
    if (!(b > a)) continue;
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (int q = 0; q < 5; ++q) {
      rule.nodes.push_back(mid + half * detail::kGL5Nodes[q]);
      rule.weights.push_back(half * detail::kGL5Weights[q]);
    }
  }
  return rule;
}

inline QuadratureRule quadrature_for(const FunctionalBasis& basis) {
  return gauss_legendre_rule(basis.breakpoints());
}

// Composite rule on [a, b] that still respects the basis breakpoints, so
// piecewise-polynomial integrands stay exact.
inline QuadratureRule quadrature_on(const FunctionalBasis& basis, double a,
                                    double b) {
  if (!basis.contains(a)) throw OutOfDomain(a);
  if (!basis.contains(b)) throw OutOfDomain(b);
  std::vector<double> pts{a};
  for (double k : basis.breakpoints())
    if (k > a && k < b) pts.push_back(k);
  pts.push_back(b);
  return gauss_legendre_rule(pts);
}

template <typename F, typename G>
double inner_product(F&& f, G&& g, const QuadratureRule& rule) {
  double sum = 0.0;
  for (size_t q = 0; q < rule.nodes.size(); ++q)
    sum += rule.weights[q] * f(rule.nodes[q]) * g(rule.nodes[q]);
  return sum;
}

struct SmoothedProfile {
  FunctionalBasis basis;
  Eigen::VectorXd coeffs;
  double rss = 0.0;  // residual sum of squares at the fit grid
};

inline double eval_smoothed(const SmoothedProfile& s, double x) {
  return s.basis.eval_all(x).dot(s.coeffs);
}

inline std::vector<double> eval_smoothed(const SmoothedProfile& s,
                                         const std::vector<double>& xs) {
  std::vector<double> out(xs.size());
  Eigen::VectorXd b;
  for (size_t i = 0; i < xs.size(); ++i) {
    s.basis.eval_all(xs[i], b);
    out[i] = b.dot(s.coeffs);
  }
  return out;
}

// Callable view of the expansion, for quadrature.
inline auto expansion(const FunctionalBasis& basis, const Eigen::VectorXd& coeffs) {
  return [&basis, &coeffs](double x) { return basis.eval_all(x).dot(coeffs); };
}

inline Eigen::MatrixXd design_matrix(const FunctionalBasis& basis,
                                     const std::vector<double>& xs) {
  Eigen::MatrixXd A(xs.size(), basis.n_basis());
  Eigen::VectorXd row;
  for (size_t i = 0; i < xs.size(); ++i) {
    basis.eval_all(xs[i], row);
    A.row(i) = row;
  }
  return A;
}

// Plain least squares onto the basis: argmin_c sum_i (v_i - sum_k c_k B_k(x_i))^2.
inline SmoothedProfile smooth_profile(const VelocityProfile& p,
                                      const FunctionalBasis& basis) {
  if ((double)p.distance_m != basis.domain())
    throw BasisMismatch();
  if ((int)p.grid_m.size() < basis.n_basis())
    throw TooManyBasisFunctions(basis.n_basis(), (int)p.grid_m.size());

  Eigen::MatrixXd A = design_matrix(basis, p.grid_m);
  Eigen::Map<const Eigen::VectorXd> v(p.v_norm.data(), p.v_norm.size());

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  if (qr.rank() < basis.n_basis()) throw SingularDesign();

  SmoothedProfile s;
  s.basis = basis;
  s.coeffs = qr.solve(v);
  s.rss = (v - A * s.coeffs).squaredNorm();
  return s;
}

// Gram matrix G_jk = <B_j, B_k>; symmetric positive definite.
inline Eigen::MatrixXd gram_matrix(const FunctionalBasis& basis) {
  const QuadratureRule rule = quadrature_for(basis);
  const int K = basis.n_basis();
  Eigen::MatrixXd vals(rule.nodes.size(), K);
  Eigen::VectorXd row;
  for (size_t q = 0; q < rule.nodes.size(); ++q) {
    basis.eval_all(rule.nodes[q], row);
    vals.row(q) = row;
  }
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(K, K);
  for (size_t q = 0; q < rule.nodes.size(); ++q)
    G.noalias() += rule.weights[q] * vals.row(q).transpose() * vals.row(q);
  return 0.5 * (G + G.transpose());
}

}  // namespace pacecurve
