#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "pacecurve/errors.hpp"
#include "pacecurve/ingest.hpp"
#include "pacecurve/log.hpp"

namespace pacecurve {

// ---- covariate designs ----
// 500 m: x1=U21, x2=U23, x3=WorldCup/Juniors, x4=WorldChamps/Olympics.
// 1000 m: adds a leading U18 indicator. Open age and Domestic events are
// the all-zero baseline.

struct CovariateDesign {
  std::string id;
  std::vector<std::string> columns;

  int m() const { return (int)columns.size(); }

  static CovariateDesign k500() {
    return CovariateDesign{"k500", {"U21", "U23", "WCJ", "WCO"}};
  }
  static CovariateDesign k1000() {
    return CovariateDesign{"k1000", {"U18", "U21", "U23", "WCJ", "WCO"}};
  }
  static CovariateDesign for_distance(int distance_m) {
    if (distance_m == 500) return k500();
    if (distance_m == 1000) return k1000();
    throw Error("CovariateDesign: no design for distance " +
                std::to_string(distance_m));
  }
  static CovariateDesign from_id(const std::string& id) {
    if (id == "k500") return k500();
    if (id == "k1000") return k1000();
    throw Error("CovariateDesign: unknown id '" + id + "'");
  }
  friend bool operator==(const CovariateDesign& a, const CovariateDesign& b) {
    return a.id == b.id && a.columns == b.columns;
  }
};

inline Eigen::VectorXd covariates_for(const CovariateDesign& design,
                                      AgeGroup age, EventType event) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(design.m());
  auto set = [&](const char* name) {
    for (int c = 0; c < design.m(); ++c)
      if (design.columns[c] == name) {
        x[c] = 1.0;
        return;
      }
    throw UnknownCovariateLevel(std::string(name) + " (design " + design.id + ")");
  };
  switch (age) {
    case AgeGroup::Open: break;
    case AgeGroup::U18: set("U18"); break;
    case AgeGroup::U21: set("U21"); break;
    case AgeGroup::U23: set("U23"); break;
  }
  switch (event) {
    case EventType::Domestic: break;
    case EventType::WorldCupJuniors: set("WCJ"); break;
    case EventType::WorldChampsOlympics: set("WCO"); break;
  }
  return x;
}

// ---- model ----

struct EmissionModel {
  // Per state: n_pc x (1+m); column 0 is the intercept.
  std::vector<Eigen::MatrixXd> beta;
  // Per state: n_pc x n_pc symmetric positive definite.
  std::vector<Eigen::MatrixXd> sigma;
};

struct HmmModel {
  int n_states = 0;
  int n_pc = 0;
  CovariateDesign design;
  Eigen::VectorXd initial;     // length n_states
  Eigen::MatrixXd transition;  // n_states x n_states, row-stochastic
  EmissionModel emissions;
};

struct ScoreObservation {
  Eigen::VectorXd scores;      // length n_pc
  Eigen::VectorXd covariates;  // length m
};

using ScoreSequence = std::vector<ScoreObservation>;

struct DecodedCareer {
  std::string athlete_id;
  Eigen::MatrixXd posteriors;     // T x n_states, rows sum to 1
  std::vector<int> viterbi_path;  // 1-based states
  double log_likelihood = 0.0;
};

// mu_ij = beta_ij0 + sum_k beta_ijk x_k. With all-zero covariates this is
// exactly the intercept column.
inline Eigen::VectorXd emission_mean(const HmmModel& model, int state,
                                     const Eigen::VectorXd& cov) {
  const Eigen::MatrixXd& b = model.emissions.beta.at(state);
  Eigen::VectorXd mu = b.col(0);
  for (int k = 0; k < cov.size(); ++k) mu += b.col(k + 1) * cov[k];
  return mu;
}

// Probability-weighted sum of per-state means (Eq.-3-style mixture).
inline Eigen::VectorXd mixture_mean(const HmmModel& model,
                                    const Eigen::VectorXd& state_probs,
                                    const Eigen::VectorXd& cov) {
  if (state_probs.size() != model.n_states)
    throw Error("mixture_mean: state_probs length mismatch");
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(model.n_pc);
  for (int j = 0; j < model.n_states; ++j)
    mu += state_probs[j] * emission_mean(model, j, cov);
  return mu;
}

namespace detail {

struct GaussianCache {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double log_norm = 0.0;  // -(d/2) log(2*pi) - (1/2) log det Sigma
};

inline GaussianCache make_gaussian_cache(const Eigen::MatrixXd& sigma) {
  GaussianCache cache;
  cache.llt.compute(sigma);
  if (cache.llt.info() != Eigen::Success)
    throw Error("emission covariance is not positive definite");
  const int d = (int)sigma.rows();
  double log_det = 0.0;
  for (int i = 0; i < d; ++i) log_det += std::log(cache.llt.matrixL()(i, i));
  log_det *= 2.0;
  cache.log_norm = -0.5 * d * std::log(2.0 * M_PI) - 0.5 * log_det;
  return cache;
}

inline double log_density(const GaussianCache& cache, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& mu) {
  Eigen::VectorXd z = cache.llt.matrixL().solve(x - mu);
  return cache.log_norm - 0.5 * z.squaredNorm();
}

inline double logsumexp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;  // all -inf stays -inf
  double s = 0.0;
  for (int i = 0; i < v.size(); ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

// T x n_states matrix of log emission densities.
inline Eigen::MatrixXd log_emission_matrix(const HmmModel& model,
                                           const ScoreSequence& seq) {
  std::vector<GaussianCache> caches;
  caches.reserve(model.n_states);
  for (int j = 0; j < model.n_states; ++j)
    caches.push_back(make_gaussian_cache(model.emissions.sigma[j]));
  Eigen::MatrixXd logB((int)seq.size(), model.n_states);
  for (size_t t = 0; t < seq.size(); ++t)
    for (int j = 0; j < model.n_states; ++j)
      logB((int)t, j) = log_density(caches[j], seq[t].scores,
                                    emission_mean(model, j, seq[t].covariates));
  return logB;
}

inline Eigen::MatrixXd log_matrix(const Eigen::MatrixXd& a) {
  return a.array().max(0.0).log().matrix();  // log(0) = -inf
}

inline Eigen::MatrixXd forward_log(const Eigen::MatrixXd& logB,
                                   const Eigen::VectorXd& initial,
                                   const Eigen::MatrixXd& logA) {
  const int T = (int)logB.rows(), n = (int)logB.cols();
  Eigen::MatrixXd la(T, n);
  la.row(0) = initial.array().max(0.0).log().matrix().transpose() + logB.row(0);
  Eigen::VectorXd work(n);
  for (int t = 1; t < T; ++t)
    for (int j = 0; j < n; ++j) {
      work = la.row(t - 1).transpose() + logA.col(j);
      la(t, j) = logsumexp(work) + logB(t, j);
    }
  return la;
}

inline Eigen::MatrixXd backward_log(const Eigen::MatrixXd& logB,
                                    const Eigen::MatrixXd& logA) {
  const int T = (int)logB.rows(), n = (int)logB.cols();
  Eigen::MatrixXd lb(T, n);
  lb.row(T - 1).setZero();
  Eigen::VectorXd work(n);
  for (int t = T - 2; t >= 0; --t)
    for (int j = 0; j < n; ++j) {
      work = logA.row(j).transpose() + logB.row(t + 1).transpose() +
             lb.row(t + 1).transpose();
      lb(t, j) = logsumexp(work);
    }
  return lb;
}

}  // namespace detail

// Multivariate normal log-density of the scores under a state's emission.
inline double log_emission_density(const HmmModel& model, int state,
                                   const Eigen::VectorXd& cov,
                                   const Eigen::VectorXd& scores) {
  auto cache = detail::make_gaussian_cache(model.emissions.sigma.at(state));
  return detail::log_density(cache, scores, emission_mean(model, state, cov));
}

// log p(observations | model) via the log-space forward recursion.
inline double forward_log_likelihood(const HmmModel& model,
                                     const ScoreSequence& seq) {
  if (seq.empty()) throw Error("forward_log_likelihood: empty sequence");
  const Eigen::MatrixXd logB = detail::log_emission_matrix(model, seq);
  const Eigen::MatrixXd logA = detail::log_matrix(model.transition);
  const Eigen::MatrixXd la = detail::forward_log(logB, model.initial, logA);
  const double ll = detail::logsumexp(la.row(la.rows() - 1).transpose());
  if (!std::isfinite(ll)) throw NumericalUnderflow("forward log-likelihood");
  return ll;
}

struct ForwardBackwardResult {
  Eigen::MatrixXd gamma;            // T x n_states
  std::vector<Eigen::MatrixXd> xi;  // T-1 matrices, n_states x n_states
  double log_likelihood = 0.0;
};

inline ForwardBackwardResult forward_backward(const HmmModel& model,
                                              const ScoreSequence& seq) {
  if (seq.empty()) throw Error("forward_backward: empty sequence");
  const int T = (int)seq.size(), n = model.n_states;
  const Eigen::MatrixXd logB = detail::log_emission_matrix(model, seq);
  const Eigen::MatrixXd logA = detail::log_matrix(model.transition);
  const Eigen::MatrixXd la = detail::forward_log(logB, model.initial, logA);
  const Eigen::MatrixXd lb = detail::backward_log(logB, logA);
  const double ll = detail::logsumexp(la.row(T - 1).transpose());
  if (!std::isfinite(ll)) throw NumericalUnderflow("forward-backward");

  ForwardBackwardResult out;
  out.log_likelihood = ll;
  out.gamma.resize(T, n);
  for (int t = 0; t < T; ++t) {
    Eigen::VectorXd row = (la.row(t) + lb.row(t)).transpose();
    row = (row.array() - ll).exp();
    out.gamma.row(t) = row / row.sum();
  }
  out.xi.reserve(T - 1);
  for (int t = 0; t + 1 < T; ++t) {
    Eigen::MatrixXd x(n, n);
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        x(j, k) = std::exp(la(t, j) + logA(j, k) + logB(t + 1, k) +
                           lb(t + 1, k) - ll);
    out.xi.push_back(x / x.sum());
  }
  return out;
}

// Jointly most probable path; ties break toward the lower state index
// (first in the final argmax, then at each backtracking step).
inline DecodedCareer viterbi_decode(const HmmModel& model,
                                    const ScoreSequence& seq,
                                    std::string athlete_id = {}) {
  if (seq.empty()) throw Error("viterbi_decode: empty sequence");
  const int T = (int)seq.size(), n = model.n_states;
  const Eigen::MatrixXd logB = detail::log_emission_matrix(model, seq);
  const Eigen::MatrixXd logA = detail::log_matrix(model.transition);

  Eigen::MatrixXd delta(T, n);
  Eigen::MatrixXi back(T, n);
  delta.row(0) =
      model.initial.array().max(0.0).log().matrix().transpose() + logB.row(0);
  back.row(0).setConstant(-1);
  for (int t = 1; t < T; ++t)
    for (int j = 0; j < n; ++j) {
      int best_k = 0;
      double best = delta(t - 1, 0) + logA(0, j);
      for (int k = 1; k < n; ++k) {
        const double cand = delta(t - 1, k) + logA(k, j);
        if (cand > best) {
          best = cand;
          best_k = k;
        }
      }
      delta(t, j) = best + logB(t, j);
      back(t, j) = best_k;
    }

  DecodedCareer out;
  out.athlete_id = std::move(athlete_id);
  out.viterbi_path.resize(T);
  int state = 0;
  for (int j = 1; j < n; ++j)
    if (delta(T - 1, j) > delta(T - 1, state)) state = j;
  for (int t = T - 1; t >= 0; --t) {
    out.viterbi_path[t] = state + 1;
    if (t > 0) state = back(t, state);
  }

  const ForwardBackwardResult fb = forward_backward(model, seq);
  out.posteriors = fb.gamma;
  out.log_likelihood = fb.log_likelihood;
  return out;
}

// ---- EM fitting ----

struct EmConfig {
  int max_iter = 500;
  double tol = 1e-6;  // relative log-likelihood gain
  int restarts = 1;
  std::uint64_t seed = 0;
  bool diagonal_covariance = false;
  double covariance_reg = 1e-8;
  double self_loop_init = 0.7;
  // When set, the initial-state vector is tied to the stationary
  // distribution of the transition matrix instead of being a free
  // parameter (see README).
  bool stationary_initial = false;
  // Extra EM candidate per sweep cell, initialized by duplicating a state
  // of the previous cell's best model (select_states only).
  bool nested_init = false;
};

struct FitReport {
  double log_likelihood = 0.0;
  double aic = 0.0;
  int iterations = 0;
  std::uint64_t seed = 0;  // seed of the winning restart
  bool converged = false;
  std::vector<double> loglik_trace;  // winning run, one entry per iteration
  std::vector<int> dropped_columns;  // 0-based covariate indices absent in data
  std::vector<std::string> warnings;
  int n_obs = 0;
  int free_parameters = 0;
};

struct FitResult {
  HmmModel model;
  FitReport report;
};

inline int free_parameter_count(int n_states, int n_pc, int m) {
  return (n_states - 1) + n_states * (n_states - 1) +
         n_states * n_pc * (1 + m) + n_states * n_pc * (n_pc + 1) / 2;
}

inline double aic(const HmmModel& model, const std::vector<ScoreSequence>& seqs) {
  double ll = 0.0;
  for (const auto& s : seqs) ll += forward_log_likelihood(model, s);
  const int k =
      free_parameter_count(model.n_states, model.n_pc, model.design.m());
  return 2.0 * k - 2.0 * ll;
}

inline Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& transition) {
  const int n = (int)transition.rows();
  Eigen::VectorXd pi = Eigen::VectorXd::Constant(n, 1.0 / n);
  for (int it = 0; it < 500; ++it) {
    Eigen::VectorXd next = transition.transpose() * pi;
    next /= next.sum();
    const double diff = (next - pi).cwiseAbs().maxCoeff();
    pi = next;
    if (diff < 1e-15) break;
  }
  return pi;
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// k-means++ seeding plus Lloyd iterations; deterministic given the seed.
inline std::vector<Eigen::VectorXd> kmeans_centers(
    const std::vector<Eigen::VectorXd>& points, int k, std::mt19937_64& rng) {
  const int N = (int)points.size();
  std::vector<Eigen::VectorXd> centers;
  centers.reserve(k);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  centers.push_back(points[(size_t)(unif(rng) * N) % N]);
  std::vector<double> d2(N);
  while ((int)centers.size() < k) {
    double total = 0.0;
    for (int i = 0; i < N; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centers)
        best = std::min(best, (points[i] - c).squaredNorm());
      d2[i] = best;
      total += best;
    }
    int pick = 0;
    if (total > 0.0) {
      double u = unif(rng) * total, acc = 0.0;
      for (int i = 0; i < N; ++i) {
        acc += d2[i];
        if (u <= acc) {
          pick = i;
          break;
        }
      }
    } else {
      pick = (int)(unif(rng) * N) % N;
    }
    centers.push_back(points[pick]);
  }

  std::vector<int> assign(N, 0);
  for (int iter = 0; iter < 50; ++iter) {
    bool changed = false;
    for (int i = 0; i < N; ++i) {
      int best_j = 0;
      double best = (points[i] - centers[0]).squaredNorm();
      for (int j = 1; j < k; ++j) {
        const double d = (points[i] - centers[j]).squaredNorm();
        if (d < best) {
          best = d;
          best_j = j;
        }
      }
      if (assign[i] != best_j) {
        assign[i] = best_j;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;
    for (int j = 0; j < k; ++j) {
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(points[0].size());
      int count = 0;
      for (int i = 0; i < N; ++i)
        if (assign[i] == j) {
          sum += points[i];
          ++count;
        }
      if (count > 0) centers[j] = sum / count;
    }
  }
  return centers;
}

struct EmRunResult {
  HmmModel model;
  double log_likelihood = 0.0;
  std::vector<double> trace;
  int iterations = 0;
  bool converged = false;
};

inline void relabel_by_pc1_intercept(HmmModel& model) {
  const int n = model.n_states;
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return model.emissions.beta[a](0, 0) > model.emissions.beta[b](0, 0);
  });
  HmmModel relabeled = model;
  for (int j = 0; j < n; ++j) {
    relabeled.initial[j] = model.initial[order[j]];
    relabeled.emissions.beta[j] = model.emissions.beta[order[j]];
    relabeled.emissions.sigma[j] = model.emissions.sigma[order[j]];
    for (int k = 0; k < n; ++k)
      relabeled.transition(j, k) = model.transition(order[j], order[k]);
  }
  model = std::move(relabeled);
}

inline EmRunResult em_run(const std::vector<ScoreSequence>& seqs,
                          const HmmModel& init, const EmConfig& config,
                          const std::vector<int>& active_cols) {
  const int n = init.n_states, n_pc = init.n_pc;
  const int p = 1 + (int)active_cols.size();
  HmmModel model = init;

  EmRunResult result;
  double prev_ll = -std::numeric_limits<double>::infinity();

  std::vector<Eigen::MatrixXd> gammas(seqs.size());
  std::vector<Eigen::MatrixXd> logBs(seqs.size());

  for (int iter = 0; iter < config.max_iter; ++iter) {
    // E-step.
    const Eigen::MatrixXd logA = log_matrix(model.transition);
    std::vector<GaussianCache> caches;
    caches.reserve(n);
    for (int j = 0; j < n; ++j)
      caches.push_back(make_gaussian_cache(model.emissions.sigma[j]));

    double total_ll = 0.0;
    Eigen::VectorXd init_acc = Eigen::VectorXd::Zero(n);
    Eigen::MatrixXd trans_num = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd state_mass = Eigen::VectorXd::Zero(n);

    for (size_t s = 0; s < seqs.size(); ++s) {
      const ScoreSequence& seq = seqs[s];
      const int T = (int)seq.size();
      Eigen::MatrixXd& logB = logBs[s];
      logB.resize(T, n);
      for (int t = 0; t < T; ++t)
        for (int j = 0; j < n; ++j)
          logB(t, j) = log_density(caches[j], seq[t].scores,
                                   emission_mean(model, j, seq[t].covariates));

      const Eigen::MatrixXd la = forward_log(logB, model.initial, logA);
      const Eigen::MatrixXd lb = backward_log(logB, logA);
      const double ll = logsumexp(la.row(T - 1).transpose());
      if (!std::isfinite(ll)) throw NumericalUnderflow("EM E-step");
      total_ll += ll;

      Eigen::MatrixXd& gamma = gammas[s];
      gamma.resize(T, n);
      for (int t = 0; t < T; ++t) {
        Eigen::VectorXd row = ((la.row(t) + lb.row(t)).transpose().array() - ll)
                                  .exp()
                                  .matrix();
        gamma.row(t) = row / row.sum();
      }
      init_acc += gamma.row(0).transpose();
      for (int t = 0; t + 1 < T; ++t)
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k)
            trans_num(j, k) += std::exp(la(t, j) + logA(j, k) +
                                        logB(t + 1, k) + lb(t + 1, k) - ll);
      state_mass += gamma.colwise().sum().transpose();
    }

    result.trace.push_back(total_ll);
    result.iterations = iter + 1;

    for (int j = 0; j < n; ++j)
      if (state_mass[j] < 1e-6) throw DegenerateState(j);

    const bool converged =
        iter > 0 && (total_ll - prev_ll) < config.tol * std::max(1.0, std::abs(total_ll));
    prev_ll = total_ll;

    if (converged) {
      result.converged = true;
      result.log_likelihood = total_ll;
      break;
    }

    // M-step: transition and initial.
    for (int j = 0; j < n; ++j) {
      const double row_sum = trans_num.row(j).sum();
      if (row_sum > 0.0)
        model.transition.row(j) = trans_num.row(j) / row_sum;
      else
        model.transition.row(j).setConstant(1.0 / n);
    }
    model.initial = init_acc / init_acc.sum();
    if (config.stationary_initial)
      model.initial = stationary_distribution(model.transition);

    // M-step: per-state weighted regression for beta.
    for (int j = 0; j < n; ++j) {
      Eigen::MatrixXd ztz = Eigen::MatrixXd::Zero(p, p);
      Eigen::MatrixXd zty = Eigen::MatrixXd::Zero(p, n_pc);
      Eigen::VectorXd z(p);
      for (size_t s = 0; s < seqs.size(); ++s)
        for (size_t t = 0; t < seqs[s].size(); ++t) {
          const double w = gammas[s]((int)t, j);
          z[0] = 1.0;
          for (int c = 0; c < (int)active_cols.size(); ++c)
            z[c + 1] = seqs[s][t].covariates[active_cols[c]];
          ztz.noalias() += w * z * z.transpose();
          zty.noalias() += w * z * seqs[s][t].scores.transpose();
        }
      Eigen::LDLT<Eigen::MatrixXd> ldlt(ztz);
      if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
        // Near-singular weighted design; a tiny ridge keeps the step defined.
        ztz.diagonal().array() += 1e-10 * (ztz.trace() / p + 1.0);
        ldlt.compute(ztz);
        if (ldlt.info() != Eigen::Success)
          throw SingularMStep("state " + std::to_string(j + 1) +
                              " weighted design not solvable");
      }
      const Eigen::MatrixXd sol = ldlt.solve(zty);  // p x n_pc
      Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(n_pc, 1 + model.design.m());
      beta.col(0) = sol.row(0).transpose();
      for (int c = 0; c < (int)active_cols.size(); ++c)
        beta.col(active_cols[c] + 1) = sol.row(c + 1).transpose();
      model.emissions.beta[j] = beta;

      // Weighted residual covariance.
      Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n_pc, n_pc);
      double wsum = 0.0;
      for (size_t s = 0; s < seqs.size(); ++s)
        for (size_t t = 0; t < seqs[s].size(); ++t) {
          const double w = gammas[s]((int)t, j);
          const Eigen::VectorXd r =
              seqs[s][t].scores -
              emission_mean(model, j, seqs[s][t].covariates);
          cov.noalias() += w * r * r.transpose();
          wsum += w;
        }
      cov /= wsum;
      if (config.diagonal_covariance)
        cov = cov.diagonal().asDiagonal().toDenseMatrix();
      cov.diagonal().array() += config.covariance_reg;
      model.emissions.sigma[j] = 0.5 * (cov + cov.transpose());
    }
  }

  if (!result.converged) {
    // Ran out of iterations; score the final parameters.
    double total_ll = 0.0;
    for (const auto& seq : seqs) total_ll += forward_log_likelihood(model, seq);
    result.log_likelihood = total_ll;
  }
  result.model = std::move(model);
  return result;
}

inline HmmModel initial_model(const std::vector<ScoreSequence>& seqs,
                              int n_states, int n_pc,
                              const CovariateDesign& design,
                              const EmConfig& config, std::uint64_t seed) {
  std::vector<Eigen::VectorXd> points;
  for (const auto& s : seqs)
    for (const auto& o : s) points.push_back(o.scores);

  std::mt19937_64 rng(seed);
  const auto centers = kmeans_centers(points, n_states, rng);

  // Global covariance as the starting emission spread.
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(n_pc);
  for (const auto& x : points) mean += x;
  mean /= (double)points.size();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n_pc, n_pc);
  for (const auto& x : points)
    cov.noalias() += (x - mean) * (x - mean).transpose();
  cov /= std::max<double>(1.0, (double)points.size() - 1);
  cov.diagonal().array() += 1e-6;

  HmmModel model;
  model.n_states = n_states;
  model.n_pc = n_pc;
  model.design = design;
  model.initial = Eigen::VectorXd::Constant(n_states, 1.0 / n_states);
  model.transition = Eigen::MatrixXd::Constant(
      n_states, n_states,
      n_states > 1 ? (1.0 - config.self_loop_init) / (n_states - 1) : 1.0);
  if (n_states > 1)
    model.transition.diagonal().setConstant(config.self_loop_init);
  for (int j = 0; j < n_states; ++j) {
    Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(n_pc, 1 + design.m());
    beta.col(0) = centers[j];
    model.emissions.beta.push_back(beta);
    model.emissions.sigma.push_back(cov);
  }
  return model;
}

}  // namespace detail

// Covariate columns never observed in the data make the regression
// singular; they are dropped for the fit and reported.
inline std::vector<int> active_covariate_columns(
    const std::vector<ScoreSequence>& seqs, int m) {
  std::vector<int> active;
  for (int c = 0; c < m; ++c) {
    double mass = 0.0;
    for (const auto& s : seqs)
      for (const auto& o : s) mass += std::abs(o.covariates[c]);
    if (mass > 0.0) active.push_back(c);
  }
  return active;
}

// Baum-Welch over independent sequences with best-of-restarts selection
// (ties keep the earliest seed). States are relabeled by descending PC1
// intercept so repeated runs are comparable.
inline FitResult em_fit(const std::vector<ScoreSequence>& seqs, int n_states,
                        const CovariateDesign& design, const EmConfig& config) {
  if (seqs.empty()) throw InsufficientData("em_fit: no sequences");
  if (n_states < 1) throw Error("em_fit: n_states must be >= 1");
  int n_obs = 0;
  for (const auto& s : seqs) {
    if (s.empty()) throw InsufficientData("em_fit: empty sequence");
    n_obs += (int)s.size();
  }
  const int n_pc = (int)seqs.front().front().scores.size();
  for (const auto& s : seqs)
    for (const auto& o : s)
      if ((int)o.scores.size() != n_pc || (int)o.covariates.size() != design.m())
        throw Error("em_fit: inconsistent observation dimensions");

  FitReport report;
  report.n_obs = n_obs;
  report.free_parameters = free_parameter_count(n_states, n_pc, design.m());
  if (n_obs < report.free_parameters) {
    report.warnings.push_back("fewer observations (" + std::to_string(n_obs) +
                              ") than free parameters (" +
                              std::to_string(report.free_parameters) + ")");
    log_warn(report.warnings.back());
  }

  const std::vector<int> active = active_covariate_columns(seqs, design.m());
  for (int c = 0; c < design.m(); ++c)
    if (std::find(active.begin(), active.end(), c) == active.end()) {
      report.dropped_columns.push_back(c);
      report.warnings.push_back("covariate column '" + design.columns[c] +
                                "' absent in data; dropped for this fit");
      log_warn(report.warnings.back());
    }

  const detail::EmRunResult* best = nullptr;
  std::vector<detail::EmRunResult> runs;
  std::vector<std::uint64_t> run_seeds;
  std::string last_error;
  for (int r = 0; r < std::max(1, config.restarts); ++r) {
    detail::EmRunResult run;
    bool ok = false;
    for (int attempt = 0; attempt < 6 && !ok; ++attempt) {
      const std::uint64_t run_seed =
          detail::splitmix64(config.seed + 0x100000001ULL * r + attempt);
      try {
        HmmModel init = detail::initial_model(seqs, n_states, n_pc, design,
                                              config, run_seed);
        run = detail::em_run(seqs, init, config, active);
        run_seeds.push_back(run_seed);
        ok = true;
      } catch (const DegenerateState& e) {
        last_error = e.what();
        report.warnings.push_back("restart " + std::to_string(r) + ": " +
                                  e.what() + "; reseeded");
      } catch (const Error& e) {
        last_error = e.what();
        report.warnings.push_back("restart " + std::to_string(r) +
                                  " failed: " + e.what());
        break;
      }
    }
    if (ok) runs.push_back(std::move(run));
  }
  if (runs.empty())
    throw Error("em_fit: all restarts failed: " + last_error);
  size_t best_i = 0;
  for (size_t i = 1; i < runs.size(); ++i)
    if (runs[i].log_likelihood > runs[best_i].log_likelihood) best_i = i;
  best = &runs[best_i];

  FitResult result;
  result.model = best->model;
  detail::relabel_by_pc1_intercept(result.model);
  report.log_likelihood = best->log_likelihood;
  report.loglik_trace = best->trace;
  report.iterations = best->iterations;
  report.converged = best->converged;
  report.seed = run_seeds[best_i];
  report.aic = 2.0 * report.free_parameters - 2.0 * best->log_likelihood;
  result.report = report;
  return result;
}

// ---- state-count sweep (Appendix-1-style AIC table) ----

struct SweepRow {
  int n_states = 0;
  double log_likelihood = 0.0;
  double aic = 0.0;
  bool ok = false;
  std::string error;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  int chosen = 0;
};

namespace detail {

// Duplicate the heaviest state of a fitted model: inflows split in half,
// duplicated row copied, tiny intercept jitter to break the symmetry.
// The starting likelihood equals the smaller model's up to the jitter.
inline HmmModel grow_model(const HmmModel& prev) {
  const int n = prev.n_states;
  const Eigen::VectorXd pi = stationary_distribution(prev.transition);
  int s = 0;
  for (int j = 1; j < n; ++j)
    if (pi[j] > pi[s]) s = j;

  HmmModel next = prev;
  next.n_states = n + 1;
  next.initial.conservativeResize(n + 1);
  next.initial[n] = next.initial[s] / 2.0;
  next.initial[s] /= 2.0;

  Eigen::MatrixXd A(n + 1, n + 1);
  A.topLeftCorner(n, n) = prev.transition;
  A.row(n).head(n) = prev.transition.row(s);
  for (int j = 0; j <= n; ++j) {
    const double in = (j < n) ? prev.transition(j, s) : prev.transition(s, s);
    A(j, s) = in / 2.0;
    A(j, n) = in / 2.0;
  }
  next.transition = A;

  next.emissions.beta.push_back(prev.emissions.beta[s]);
  next.emissions.beta.back()(0, 0) += 1e-4;
  next.emissions.sigma.push_back(prev.emissions.sigma[s]);
  return next;
}

}  // namespace detail

// Fits every state count in [n_min, n_max] and applies the elbow rule:
// the chosen count precedes the first n whose AIC improvement over n-1
// drops below 5% of the first improvement in the sweep.
inline SweepResult select_states(const std::vector<ScoreSequence>& seqs,
                                 int n_min, int n_max,
                                 const CovariateDesign& design,
                                 const EmConfig& config) {
  if (n_min < 2) throw Error("select_states: n_min must be >= 2");
  if (n_max < n_min) throw Error("select_states: n_max must be >= n_min");

  SweepResult result;
  const HmmModel* prev_model = nullptr;
  std::vector<HmmModel> kept;
  kept.reserve(n_max - n_min + 1);
  const std::vector<int> active = active_covariate_columns(seqs, design.m());

  for (int n = n_min; n <= n_max; ++n) {
    SweepRow row;
    row.n_states = n;
    try {
      FitResult fit = em_fit(seqs, n, design, config);
      // Optionally also grow the previous best model and keep the better fit.
      if (config.nested_init && prev_model) {
        HmmModel grown = detail::grow_model(*prev_model);
        try {
          detail::EmRunResult run = detail::em_run(seqs, grown, config, active);
          if (run.log_likelihood > fit.report.log_likelihood) {
            fit.model = run.model;
            detail::relabel_by_pc1_intercept(fit.model);
            fit.report.log_likelihood = run.log_likelihood;
            fit.report.loglik_trace = run.trace;
            fit.report.iterations = run.iterations;
            fit.report.converged = run.converged;
            fit.report.aic = 2.0 * fit.report.free_parameters -
                             2.0 * run.log_likelihood;
          }
        } catch (const Error& e) {
          log_warn("nested init for n=" + std::to_string(n) + " failed: " +
                   e.what());
        }
      }
      row.ok = true;
      row.log_likelihood = fit.report.log_likelihood;
      row.aic = fit.report.aic;
      kept.push_back(std::move(fit.model));
      prev_model = &kept.back();
    } catch (const Error& e) {
      row.error = e.what();
      log_warn("select_states: n=" + std::to_string(n) + ": " + e.what());
    }
    result.rows.push_back(std::move(row));
  }

  // Elbow rule over consecutive successful cells.
  std::vector<const SweepRow*> ok_rows;
  for (const auto& r : result.rows)
    if (r.ok) ok_rows.push_back(&r);
  if (ok_rows.empty()) throw Error("select_states: every cell failed");
  result.chosen = ok_rows.back()->n_states;
  if (ok_rows.size() >= 2) {
    const double first_gain = ok_rows[0]->aic - ok_rows[1]->aic;
    const double threshold = 0.05 * std::max(first_gain, 0.0);
    for (size_t i = 1; i < ok_rows.size(); ++i) {
      const double gain = ok_rows[i - 1]->aic - ok_rows[i]->aic;
      if (gain < threshold) {
        result.chosen = ok_rows[i - 1]->n_states;
        break;
      }
    }
  }
  return result;
}

}  // namespace pacecurve
