#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "pacecurve/bspline.hpp"
#include "pacecurve/errors.hpp"

namespace pacecurve {

struct FpcaModel {
  FunctionalBasis basis;
  Eigen::VectorXd mean_coeffs;            // mean function in the basis
  Eigen::MatrixXd eigenfunction_coeffs;   // n_pc x n_basis, rows are Phi_j
  Eigen::VectorXd eigenvalues;            // descending, length n_pc
  Eigen::VectorXd variance_explained;     // lambda_j / total_variance
  double total_variance = 0.0;            // sum over all eigenvalues
  int n_pc = 0;
};

struct PcScores {
  Eigen::VectorXd scores;  // length n_pc
};

namespace detail {

// G^{1/2} and G^{-1/2} via the spectral decomposition of the Gram matrix.
struct GramRoots {
  Eigen::MatrixXd sqrt;
  Eigen::MatrixXd inv_sqrt;
};

inline GramRoots gram_roots(const Eigen::MatrixXd& G) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
  if (es.info() != Eigen::Success)
    throw Error("gram_roots: eigendecomposition failed");
  const Eigen::VectorXd& ev = es.eigenvalues();
  if (ev.minCoeff() <= 0.0)
    throw Error("gram_roots: Gram matrix is not positive definite");
  Eigen::VectorXd s = ev.array().sqrt();
  GramRoots roots;
  roots.sqrt = es.eigenvectors() * s.asDiagonal() * es.eigenvectors().transpose();
  roots.inv_sqrt = es.eigenvectors() * s.cwiseInverse().asDiagonal() *
                   es.eigenvectors().transpose();
  return roots;
}

// Deterministic sign: integral over the first half of the domain must be
// non-negative; ties fall back to the value at domain/4.
inline void apply_sign_convention(const FunctionalBasis& basis,
                                  Eigen::VectorXd& coeffs) {
  const QuadratureRule half = quadrature_on(basis, 0.0, basis.domain() / 2.0);
  double integral = 0.0;
  Eigen::VectorXd b;
  for (size_t q = 0; q < half.nodes.size(); ++q) {
    basis.eval_all(half.nodes[q], b);
    integral += half.weights[q] * b.dot(coeffs);
  }
  double sign_value = integral;
  if (std::abs(integral) <= 1e-12)
    sign_value = basis.eval_all(basis.domain() / 4.0).dot(coeffs);
  if (sign_value < 0.0) coeffs = -coeffs;
}

}  // namespace detail

// Functional PCA in coefficient space: with Gram matrix G and centred
// coefficient covariance C, eigenfunctions are G^{-1/2} u_j for the
// eigenvectors u_j of G^{1/2} C G^{1/2}. Eigenvalues are the PC score
// variances (sample variance, 1/(n-1)).
inline FpcaModel fit_fpca(const std::vector<SmoothedProfile>& profiles, int n_pc) {
  if (n_pc < 1) throw InsufficientData("n_pc must be >= 1");
  if ((int)profiles.size() < n_pc + 1)
    throw InsufficientData("need at least n_pc + 1 profiles, got " +
                           std::to_string(profiles.size()));
  const FunctionalBasis& basis = profiles.front().basis;
  for (const auto& p : profiles)
    if (!(p.basis == basis)) throw BasisMismatch();
  const int K = basis.n_basis();
  if (n_pc > K) throw InsufficientData("n_pc exceeds basis dimension");

  const int n = (int)profiles.size();
  Eigen::MatrixXd coeffs(n, K);
  for (int i = 0; i < n; ++i) coeffs.row(i) = profiles[i].coeffs;
  Eigen::VectorXd mean = coeffs.colwise().mean();
  coeffs.rowwise() -= mean.transpose();

  Eigen::MatrixXd C = (coeffs.transpose() * coeffs) / double(n - 1);
  const Eigen::MatrixXd G = gram_matrix(basis);
  const detail::GramRoots roots = detail::gram_roots(G);

  Eigen::MatrixXd M = roots.sqrt * C * roots.sqrt;
  M = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
  if (es.info() != Eigen::Success) throw Error("fit_fpca: eigensolver failed");

  // Eigen returns ascending order; we want descending.
  Eigen::VectorXd lambdas(K);
  Eigen::MatrixXd vectors(K, K);
  for (int j = 0; j < K; ++j) {
    double lam = es.eigenvalues()[K - 1 - j];
    if (lam < -1e-10) throw NonPsdCovariance(lam);
    lambdas[j] = std::max(lam, 0.0);
    vectors.col(j) = es.eigenvectors().col(K - 1 - j);
  }

  const double total = lambdas.sum();
  if (total < 1e-14) throw DegenerateData();

  FpcaModel model;
  model.basis = basis;
  model.mean_coeffs = mean;
  model.n_pc = n_pc;
  model.total_variance = total;
  model.eigenvalues = lambdas.head(n_pc);
  model.variance_explained = model.eigenvalues / total;
  model.eigenfunction_coeffs.resize(n_pc, K);
  for (int j = 0; j < n_pc; ++j) {
    Eigen::VectorXd e = roots.inv_sqrt * vectors.col(j);
    detail::apply_sign_convention(basis, e);
    model.eigenfunction_coeffs.row(j) = e;
  }
  return model;
}

// beta_j = <Phi_j, f - mean>, computed both by quadrature and in
// coefficient space through the Gram matrix; the two must agree.
inline PcScores project_scores(const FpcaModel& model,
                               const SmoothedProfile& profile) {
  if (!(profile.basis == model.basis)) throw BasisMismatch();
  const FunctionalBasis& basis = model.basis;
  const Eigen::MatrixXd G = gram_matrix(basis);
  const Eigen::VectorXd centred = profile.coeffs - model.mean_coeffs;

  const QuadratureRule rule = quadrature_for(basis);
  PcScores out;
  out.scores.resize(model.n_pc);
  Eigen::VectorXd b;
  for (int j = 0; j < model.n_pc; ++j) {
    const Eigen::VectorXd phi = model.eigenfunction_coeffs.row(j);
    const double coeff_route = centred.dot(G * phi);
    double quad_route = 0.0;
    for (size_t q = 0; q < rule.nodes.size(); ++q) {
      basis.eval_all(rule.nodes[q], b);
      quad_route += rule.weights[q] * b.dot(phi) * b.dot(centred);
    }
    if (std::abs(quad_route - coeff_route) >
        1e-8 * std::max(1.0, std::abs(coeff_route)))
      throw Error("project_scores: quadrature and coefficient routes disagree");
    out.scores[j] = coeff_route;
  }
  return out;
}

// mean + sum_{j<=k} beta_j Phi_j.
inline SmoothedProfile reconstruct_profile(const FpcaModel& model,
                                           const PcScores& scores, int k) {
  if (k < 1 || k > model.n_pc)
    throw Error("reconstruct_profile: k must be in [1, n_pc]");
  SmoothedProfile s;
  s.basis = model.basis;
  s.coeffs = model.mean_coeffs;
  for (int j = 0; j < k; ++j)
    s.coeffs += scores.scores[j] * model.eigenfunction_coeffs.row(j).transpose();
  s.rss = 0.0;
  return s;
}

struct VarianceRow {
  int pc = 0;          // 1-based
  double fraction = 0.0;
  double cumulative = 0.0;
};

inline std::vector<VarianceRow> variance_report(const FpcaModel& model) {
  std::vector<VarianceRow> rows;
  double cum = 0.0;
  for (int j = 0; j < model.n_pc; ++j) {
    cum += model.variance_explained[j];
    rows.push_back(VarianceRow{j + 1, model.variance_explained[j], cum});
  }
  return rows;
}

// Phi_j evaluated at xs, for plot export. j is 1-based like the reports.
inline std::vector<double> eigenfunction_curve(const FpcaModel& model, int j,
                                               const std::vector<double>& xs) {
  if (j < 1 || j > model.n_pc)
    throw Error("eigenfunction_curve: j must be in [1, n_pc]");
  const Eigen::VectorXd phi = model.eigenfunction_coeffs.row(j - 1);
  std::vector<double> out(xs.size());
  Eigen::VectorXd b;
  for (size_t i = 0; i < xs.size(); ++i) {
    model.basis.eval_all(xs[i], b);
    out[i] = b.dot(phi);
  }
  return out;
}

}  // namespace pacecurve
