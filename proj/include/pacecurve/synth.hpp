#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "pacecurve/bspline.hpp"
#include "pacecurve/errors.hpp"
#include "pacecurve/fpca.hpp"
#include "pacecurve/hmm.hpp"
#include "pacecurve/ingest.hpp"
#include "pacecurve/model_io.hpp"

namespace pacecurve {

// Anchor polylines describe curve shapes; they are projected onto the
// generating basis, so everything sampled lives exactly in the spline space.
using AnchorCurve = std::vector<std::pair<double, double>>;

struct SchedulePhase {
  AgeGroup age_group = AgeGroup::Open;
  int n_races = 0;
};

struct EventMix {
  double dom = 1.0;
  double wcj = 0.0;
  double wco = 0.0;
};

struct HmmGeneratorParams {
  Eigen::VectorXd initial;
  Eigen::MatrixXd transition;
  std::vector<Eigen::MatrixXd> beta;   // per state, n_pc x (1+m)
  std::vector<Eigen::MatrixXd> sigma;  // per state, n_pc x n_pc
};

struct GeneratorSpec {
  int distance_m = 500;
  int basis_order = 4;
  int basis_size = 8;
  AnchorCurve mean_anchors;
  std::vector<AnchorCurve> eigenfunction_seeds;
  Eigen::VectorXd score_variances;        // used when no hmm block
  std::optional<HmmGeneratorParams> hmm;  // scores follow the chain if set
  std::vector<SchedulePhase> schedule;
  EventMix event_mix_development;  // U18/U21/U23 phases
  EventMix event_mix_open;
  double noise_sd = 0.0;  // additive noise on normalized segment velocities
  double avg_velocity_mean = 4.5;
  double avg_velocity_sd = 0.05;
  std::uint64_t seed = 1;
  int n_athletes = 70;
  int races_per_athlete = 15;
  RaceDate start_date{2013, 1, 15};
};

struct GeneratedRace {
  RaceRecord record;
  int true_state = 1;           // 1-based; 1 in iid mode
  Eigen::VectorXd true_scores;  // noise-free scores of the emitted profile
};

struct GeneratedCareer {
  std::string athlete_id;
  std::vector<GeneratedRace> races;
};

struct SynthDataset {
  std::vector<RaceRecord> records;
  std::vector<GeneratedCareer> careers;
};

namespace detail {

inline double interp_anchors(const AnchorCurve& anchors, double x) {
  if (x <= anchors.front().first) return anchors.front().second;
  if (x >= anchors.back().first) return anchors.back().second;
  for (size_t i = 0; i + 1 < anchors.size(); ++i) {
    const auto& [x0, y0] = anchors[i];
    const auto& [x1, y1] = anchors[i + 1];
    if (x <= x1) return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
  }
  return anchors.back().second;
}

// Least-squares projection of an anchor polyline onto the basis, sampled
// on a dense grid.
inline Eigen::VectorXd fit_anchors(const FunctionalBasis& basis,
                                   const AnchorCurve& anchors) {
  const int n_samples = 200;
  std::vector<double> xs(n_samples);
  Eigen::VectorXd ys(n_samples);
  for (int i = 0; i < n_samples; ++i) {
    xs[i] = basis.domain() * i / (n_samples - 1);
    ys[i] = interp_anchors(anchors, xs[i]);
  }
  Eigen::MatrixXd A = design_matrix(basis, xs);
  return A.colPivHouseholderQr().solve(ys);
}

}  // namespace detail

// Resolved generator: basis built, mean rescaled to unit harmonic mean on
// the segment midpoints, eigenfunction seeds Gram-Schmidt orthonormalized
// in the L2 inner product.
class Generator {
 public:
  explicit Generator(GeneratorSpec spec) : spec_(std::move(spec)) {
    validate_spec();
    basis_ = make_basis(spec_.distance_m, spec_.basis_size, spec_.basis_order);
    gram_ = gram_matrix(basis_);

    mean_coeffs_ = detail::fit_anchors(basis_, spec_.mean_anchors);
    const int n_seg = spec_.distance_m / 50;
    midpoints_.resize(n_seg);
    for (int i = 0; i < n_seg; ++i) midpoints_[i] = 50.0 * i + 25.0;
    mid_design_ = design_matrix(basis_, midpoints_);
    // Unit harmonic mean at the midpoints, matching what normalization of
    // any realized race enforces.
    const Eigen::VectorXd mid = mid_design_ * mean_coeffs_;
    double inv_sum = 0.0;
    for (int i = 0; i < mid.size(); ++i) {
      if (!(mid[i] > 0))
        throw SpecValidation("mean_anchors", "mean curve must stay positive");
      inv_sum += 1.0 / mid[i];
    }
    mean_coeffs_ /= (n_seg / inv_sum);

    // Gram-Schmidt in the Gram metric.
    const int n_pc = (int)spec_.eigenfunction_seeds.size();
    eigen_coeffs_.resize(n_pc, basis_.n_basis());
    for (int j = 0; j < n_pc; ++j) {
      Eigen::VectorXd e = detail::fit_anchors(basis_, spec_.eigenfunction_seeds[j]);
      for (int i = 0; i < j; ++i) {
        const Eigen::VectorXd prev = eigen_coeffs_.row(i);
        e -= (prev.dot(gram_ * e)) * prev;
      }
      const double norm = std::sqrt(e.dot(gram_ * e));
      if (norm < 1e-10)
        throw SpecValidation("eigenfunction_seeds",
                             "seed " + std::to_string(j + 1) +
                                 " is linearly dependent on earlier seeds");
      eigen_coeffs_.row(j) = e / norm;
    }
  }

  const GeneratorSpec& spec() const { return spec_; }
  const FunctionalBasis& basis() const { return basis_; }
  const Eigen::VectorXd& mean_coeffs() const { return mean_coeffs_; }
  const Eigen::MatrixXd& eigenfunction_coeffs() const { return eigen_coeffs_; }
  int n_pc() const { return (int)eigen_coeffs_.rows(); }

  // The generating model in the same form fit_fpca produces, so generated
  // corpora can be projected on the generating basis.
  FpcaModel fpca_model() const {
    FpcaModel model;
    model.basis = basis_;
    model.mean_coeffs = mean_coeffs_;
    model.eigenfunction_coeffs = eigen_coeffs_;
    model.n_pc = n_pc();
    if (spec_.hmm) {
      model.eigenvalues = Eigen::VectorXd::Ones(n_pc());
    } else {
      model.eigenvalues = spec_.score_variances;
    }
    model.total_variance = model.eigenvalues.sum();
    model.variance_explained = model.eigenvalues / model.total_variance;
    return model;
  }

  HmmModel hmm_model() const {
    if (!spec_.hmm) throw SpecValidation("hmm", "spec has no hmm block");
    HmmModel model;
    model.n_states = (int)spec_.hmm->initial.size();
    model.n_pc = n_pc();
    model.design = CovariateDesign::for_distance(spec_.distance_m);
    model.initial = spec_.hmm->initial;
    model.transition = spec_.hmm->transition;
    model.emissions.beta = spec_.hmm->beta;
    model.emissions.sigma = spec_.hmm->sigma;
    return model;
  }

  GeneratedCareer sample_career(const std::string& athlete_id, int n_races,
                                std::uint64_t career_seed) const {
    std::mt19937_64 rng(career_seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const CovariateDesign design = CovariateDesign::for_distance(spec_.distance_m);
    const int n_seg = spec_.distance_m / 50;

    std::optional<HmmModel> chain;
    std::vector<Eigen::LLT<Eigen::MatrixXd>> chols;
    if (spec_.hmm) {
      chain = hmm_model();
      for (const auto& s : chain->emissions.sigma) {
        chols.emplace_back(s);
        if (chols.back().info() != Eigen::Success)
          throw SpecValidation("hmm.sigma", "covariance not positive definite");
      }
    }

    auto draw_categorical = [&](const Eigen::VectorXd& probs) {
      double u = unif(rng) * probs.sum();
      for (int j = 0; j < probs.size(); ++j) {
        u -= probs[j];
        if (u <= 0.0) return j;
      }
      return (int)probs.size() - 1;
    };

    GeneratedCareer career;
    career.athlete_id = athlete_id;
    long date_serial = spec_.start_date.serial() + (long)(unif(rng) * 360.0);
    int state = 0;
    for (int r = 0; r < n_races; ++r) {
      const AgeGroup age = age_for_race(r);
      const EventMix& mix = (age == AgeGroup::Open) ? spec_.event_mix_open
                                                    : spec_.event_mix_development;
      const double total = mix.dom + mix.wcj + mix.wco;
      double u = unif(rng) * total;
      EventType event = EventType::Domestic;
      if (u > mix.dom) event = (u > mix.dom + mix.wcj)
                                   ? EventType::WorldChampsOlympics
                                   : EventType::WorldCupJuniors;

      Eigen::VectorXd scores(n_pc());
      int true_state = 1;
      if (chain) {
        state = (r == 0) ? draw_categorical(chain->initial)
                         : draw_categorical(chain->transition.row(state).transpose());
        true_state = state + 1;
        const Eigen::VectorXd cov = covariates_for(design, age, event);
        Eigen::VectorXd z(n_pc());
        for (int i = 0; i < n_pc(); ++i) z[i] = normal(rng);
        scores = emission_mean(*chain, state, cov) +
                 chols[state].matrixL() * z;
      } else {
        for (int i = 0; i < n_pc(); ++i)
          scores[i] = normal(rng) * std::sqrt(spec_.score_variances[i]);
      }

      // Midpoint samples of the planted spline, then the realized profile
      // after the harmonic-mean rescale normalization will apply.
      const Eigen::VectorXd coeffs =
          mean_coeffs_ + eigen_coeffs_.transpose() * scores;
      const Eigen::VectorXd u_mid = mid_design_ * coeffs;
      double inv_sum = 0.0;
      for (int i = 0; i < n_seg; ++i) {
        if (!(u_mid[i] > 0.0))
          throw SpecValidation("score_variances",
                               "sampled profile crossed zero velocity");
        inv_sum += 1.0 / u_mid[i];
      }
      const double harmonic = n_seg / inv_sum;
      const Eigen::VectorXd realized = coeffs / harmonic;
      Eigen::VectorXd true_scores(n_pc());
      for (int j = 0; j < n_pc(); ++j)
        true_scores[j] =
            (realized - mean_coeffs_).dot(gram_ * eigen_coeffs_.row(j).transpose());

      const double v_avg =
          spec_.avg_velocity_mean + spec_.avg_velocity_sd * normal(rng);
      GeneratedRace race;
      race.true_state = true_state;
      race.true_scores = true_scores;
      race.record.athlete_id = athlete_id;
      race.record.distance_m = spec_.distance_m;
      race.record.age_group = age;
      race.record.event_type = event;
      race.record.race_phase = std::nullopt;
      race.record.race_date = RaceDate::from_serial(date_serial);
      race.record.segment_times_s.resize(n_seg);
      for (int i = 0; i < n_seg; ++i) {
        double v = u_mid[i];
        if (spec_.noise_sd > 0.0) v += spec_.noise_sd * normal(rng);
        if (!(v > 0.0))
          throw SpecValidation("noise_sd", "sampled non-positive velocity");
        race.record.segment_times_s[i] = kSegmentLengthM / (v * v_avg);
      }
      career.races.push_back(std::move(race));
      date_serial += 21 + (long)(unif(rng) * 21.0);
    }
    return career;
  }

  // Deterministic given the spec seed; per-athlete seeds are derived so
  // careers are independent.
  SynthDataset generate_dataset() const {
    SynthDataset out;
    for (int a = 0; a < spec_.n_athletes; ++a) {
      char id[16];
      std::snprintf(id, sizeof(id), "A%03d", a + 1);
      const std::uint64_t career_seed =
          pacecurve::detail::splitmix64(spec_.seed ^ (0x51ed270b9f9cull + a));
      GeneratedCareer career =
          sample_career(id, spec_.races_per_athlete, career_seed);
      for (const auto& race : career.races) out.records.push_back(race.record);
      out.careers.push_back(std::move(career));
    }
    return out;
  }

 private:
  AgeGroup age_for_race(int r) const {
    int offset = r;
    for (const auto& phase : spec_.schedule) {
      if (offset < phase.n_races) return phase.age_group;
      offset -= phase.n_races;
    }
    return spec_.schedule.back().age_group;
  }

  void validate_spec() const {
    if (spec_.distance_m != 500 && spec_.distance_m != 1000)
      throw SpecValidation("distance_m", "must be 500 or 1000");
    if (spec_.mean_anchors.size() < 2)
      throw SpecValidation("mean_anchors", "need at least two anchors");
    if (spec_.eigenfunction_seeds.empty())
      throw SpecValidation("eigenfunction_seeds", "need at least one seed");
    if (spec_.schedule.empty())
      throw SpecValidation("schedule", "need at least one phase");
    if (spec_.n_athletes < 1)
      throw SpecValidation("n_athletes", "must be positive");
    if (spec_.races_per_athlete < 1)
      throw SpecValidation("races_per_athlete", "must be positive");
    if (spec_.noise_sd < 0) throw SpecValidation("noise_sd", "must be >= 0");
    for (const auto& phase : spec_.schedule)
      if (spec_.distance_m == 500 && phase.age_group == AgeGroup::U18)
        throw SpecValidation("schedule", "U18 has no covariate in the 500 m design");
    const int n_pc = (int)spec_.eigenfunction_seeds.size();
    if (spec_.hmm) {
      const CovariateDesign design = CovariateDesign::for_distance(spec_.distance_m);
      const int n = (int)spec_.hmm->initial.size();
      if (n < 1) throw SpecValidation("hmm.initial", "must be non-empty");
      if (spec_.hmm->transition.rows() != n || spec_.hmm->transition.cols() != n)
        throw SpecValidation("hmm.transition", "must be n_states x n_states");
      if ((int)spec_.hmm->beta.size() != n || (int)spec_.hmm->sigma.size() != n)
        throw SpecValidation("hmm.states", "need beta and sigma per state");
      for (const auto& b : spec_.hmm->beta)
        if (b.rows() != n_pc || b.cols() != 1 + design.m())
          throw SpecValidation("hmm.beta", "must be n_pc x (1+m)");
      if (std::abs(spec_.hmm->initial.sum() - 1.0) > 1e-9)
        throw SpecValidation("hmm.initial", "must sum to 1");
      for (int jr = 0; jr < n; ++jr)
        if (std::abs(spec_.hmm->transition.row(jr).sum() - 1.0) > 1e-9)
          throw SpecValidation("hmm.transition", "rows must sum to 1");
    } else {
      if ((int)spec_.score_variances.size() != n_pc)
        throw SpecValidation("score_variances",
                             "length must match eigenfunction_seeds");
      for (int i = 0; i < spec_.score_variances.size(); ++i)
        if (!(spec_.score_variances[i] >= 0))
          throw SpecValidation("score_variances", "must be non-negative");
    }
  }

  GeneratorSpec spec_;
  FunctionalBasis basis_;
  Eigen::MatrixXd gram_;
  Eigen::VectorXd mean_coeffs_;
  Eigen::MatrixXd eigen_coeffs_;  // n_pc x n_basis
  std::vector<double> midpoints_;
  Eigen::MatrixXd mid_design_;
};

// ---- default specs ----
// Shapes imitate observed race profiles: an early peak then decline for
// 500 m; for 1000 m a mid-race plateau and a small late kick.

inline GeneratorSpec default_spec_500() {
  GeneratorSpec spec;
  spec.distance_m = 500;
  spec.basis_order = 4;
  spec.basis_size = 8;
  spec.mean_anchors = {{0, 0.80},   {40, 1.02},  {80, 1.08},  {150, 1.06},
                       {250, 1.03}, {350, 1.00}, {450, 0.965}, {500, 0.95}};
  spec.eigenfunction_seeds = {
      // early surplus, late deficit
      {{0, 0.2}, {80, 1.0}, {180, 0.6}, {300, -0.4}, {420, -1.0}, {500, -1.1}},
      // mid-race dip, late surge
      {{0, 0.3}, {100, -0.4}, {200, -1.0}, {300, -0.2}, {400, 0.9}, {500, 1.2}},
      // sharp early peak then trough
      {{0, -0.4}, {80, 1.2}, {130, -0.9}, {220, 0.3}, {350, -0.2}, {500, 0.1}},
      // mid-race sag with a final rise
      {{0, 0.1}, {150, 0.5}, {250, -1.1}, {350, -0.3}, {450, 0.8}, {500, 1.0}}};
  spec.score_variances = Eigen::Vector4d(0.05, 0.03, 0.015, 0.008);
  spec.schedule = {{AgeGroup::U21, 2}, {AgeGroup::U23, 2}, {AgeGroup::Open, 11}};
  spec.event_mix_development = EventMix{0.7, 0.3, 0.0};
  spec.event_mix_open = EventMix{0.9, 0.0, 0.1};
  spec.avg_velocity_mean = 4.5;
  spec.avg_velocity_sd = 0.05;
  return spec;
}

inline GeneratorSpec default_spec_1000() {
  GeneratorSpec spec;
  spec.distance_m = 1000;
  spec.basis_order = 4;
  spec.basis_size = 12;
  spec.mean_anchors = {{0, 0.82},   {60, 1.04},  {100, 1.07}, {250, 1.03},
                       {500, 0.985}, {700, 0.965}, {850, 0.99}, {950, 0.975},
                       {1000, 0.96}};
  spec.eigenfunction_seeds = {
      {{0, 0.2}, {150, 1.0}, {400, 0.3}, {650, -0.5}, {900, -1.0}, {1000, -1.1}},
      {{0, 0.3}, {250, -0.5}, {600, -1.0}, {750, 0.1}, {900, 0.9}, {1000, 1.2}},
      {{0, -0.3}, {250, -0.6}, {500, 0.5}, {750, 1.0}, {900, -0.5}, {1000, -1.0}},
      {{0, 0.2}, {300, 0.5}, {500, -1.1}, {700, -0.2}, {850, 0.7}, {1000, 0.9}}};
  spec.score_variances = Eigen::Vector4d(0.05, 0.03, 0.015, 0.008);
  spec.schedule = {{AgeGroup::U18, 2},
                   {AgeGroup::U21, 2},
                   {AgeGroup::U23, 2},
                   {AgeGroup::Open, 9}};
  spec.event_mix_development = EventMix{0.7, 0.3, 0.0};
  spec.event_mix_open = EventMix{0.9, 0.0, 0.1};
  spec.avg_velocity_mean = 5.2;
  spec.avg_velocity_sd = 0.05;
  return spec;
}

// ---- spec JSON ----

inline json spec_to_json(const GeneratorSpec& spec) {
  json j;
  j["type"] = "pacecurve-generator-spec";
  j["distance_m"] = spec.distance_m;
  j["basis"] = {{"order", spec.basis_order}, {"n_basis", spec.basis_size}};
  json anchors = json::array();
  for (auto& [x, y] : spec.mean_anchors) anchors.push_back({x, y});
  j["mean_anchors"] = anchors;
  json seeds = json::array();
  for (auto& seed : spec.eigenfunction_seeds) {
    json s = json::array();
    for (auto& [x, y] : seed) s.push_back({x, y});
    seeds.push_back(s);
  }
  j["eigenfunction_seeds"] = seeds;
  j["score_variances"] = detail::vector_to_json(spec.score_variances);
  if (spec.hmm) {
    json h;
    h["initial"] = detail::vector_to_json(spec.hmm->initial);
    h["transition"] = detail::matrix_rows_to_json(spec.hmm->transition);
    json states = json::array();
    for (size_t s = 0; s < spec.hmm->beta.size(); ++s)
      states.push_back({{"beta", detail::matrix_rows_to_json(spec.hmm->beta[s])},
                        {"sigma", detail::matrix_rows_to_json(spec.hmm->sigma[s])}});
    h["states"] = states;
    j["hmm"] = h;
  }
  json phases = json::array();
  for (auto& p : spec.schedule)
    phases.push_back({to_string(p.age_group), p.n_races});
  j["schedule"] = phases;
  j["event_mix"] = {
      {"development",
       {{"DOM", spec.event_mix_development.dom},
        {"WCJ", spec.event_mix_development.wcj},
        {"WCO", spec.event_mix_development.wco}}},
      {"open",
       {{"DOM", spec.event_mix_open.dom},
        {"WCJ", spec.event_mix_open.wcj},
        {"WCO", spec.event_mix_open.wco}}}};
  j["noise_sd"] = spec.noise_sd;
  j["avg_velocity"] = {{"mean", spec.avg_velocity_mean},
                       {"sd", spec.avg_velocity_sd}};
  j["seed"] = spec.seed;
  j["n_athletes"] = spec.n_athletes;
  j["races_per_athlete"] = spec.races_per_athlete;
  j["start_date"] = spec.start_date.to_string();
  return j;
}

inline GeneratorSpec spec_from_json(const json& j) {
  GeneratorSpec spec;
  try {
    spec.distance_m = j.at("distance_m").get<int>();
    if (j.contains("basis")) {
      spec.basis_order = j.at("basis").value("order", 4);
      spec.basis_size = j.at("basis").value("n_basis", spec.distance_m == 500 ? 8 : 12);
    } else {
      spec.basis_size = spec.distance_m == 500 ? 8 : 12;
    }
    spec.mean_anchors.clear();
    for (const auto& a : j.at("mean_anchors"))
      spec.mean_anchors.emplace_back(a.at(0).get<double>(), a.at(1).get<double>());
    spec.eigenfunction_seeds.clear();
    for (const auto& seed : j.at("eigenfunction_seeds")) {
      AnchorCurve curve;
      for (const auto& a : seed)
        curve.emplace_back(a.at(0).get<double>(), a.at(1).get<double>());
      spec.eigenfunction_seeds.push_back(std::move(curve));
    }
    if (j.contains("score_variances"))
      spec.score_variances =
          detail::vector_from_json(j.at("score_variances"), "score_variances");
    if (j.contains("hmm")) {
      HmmGeneratorParams h;
      h.initial = detail::vector_from_json(j.at("hmm").at("initial"), "hmm.initial");
      h.transition =
          detail::matrix_rows_from_json(j.at("hmm").at("transition"), "hmm.transition");
      for (const auto& st : j.at("hmm").at("states")) {
        h.beta.push_back(detail::matrix_rows_from_json(st.at("beta"), "hmm.beta"));
        h.sigma.push_back(detail::matrix_rows_from_json(st.at("sigma"), "hmm.sigma"));
      }
      spec.hmm = std::move(h);
    }
    spec.schedule.clear();
    for (const auto& p : j.at("schedule")) {
      const std::string age = p.at(0).get<std::string>();
      SchedulePhase phase;
      if (age == "U18") phase.age_group = AgeGroup::U18;
      else if (age == "U21") phase.age_group = AgeGroup::U21;
      else if (age == "U23") phase.age_group = AgeGroup::U23;
      else if (age == "OPEN") phase.age_group = AgeGroup::Open;
      else throw SpecValidation("schedule", "unknown age group '" + age + "'");
      phase.n_races = p.at(1).get<int>();
      spec.schedule.push_back(phase);
    }
    if (j.contains("event_mix")) {
      const auto& em = j.at("event_mix");
      spec.event_mix_development = EventMix{em.at("development").value("DOM", 1.0),
                                            em.at("development").value("WCJ", 0.0),
                                            em.at("development").value("WCO", 0.0)};
      spec.event_mix_open = EventMix{em.at("open").value("DOM", 1.0),
                                     em.at("open").value("WCJ", 0.0),
                                     em.at("open").value("WCO", 0.0)};
    }
    spec.noise_sd = j.value("noise_sd", 0.0);
    if (j.contains("avg_velocity")) {
      spec.avg_velocity_mean = j.at("avg_velocity").value("mean", 4.5);
      spec.avg_velocity_sd = j.at("avg_velocity").value("sd", 0.05);
    }
    spec.seed = j.value("seed", (std::uint64_t)1);
    spec.n_athletes = j.value("n_athletes", 70);
    spec.races_per_athlete = j.value("races_per_athlete", 15);
    if (j.contains("start_date")) {
      RaceDate d;
      if (!detail::parse_date(j.at("start_date").get<std::string>(), d))
        throw SpecValidation("start_date", "must be YYYY-MM-DD");
      spec.start_date = d;
    }
  } catch (const json::exception& e) {
    throw SpecValidation("spec", e.what());
  }
  return spec;
}

// Truth file: hidden state paths and true scores per career, plus the
// generating model so recovery runs can project on the generating basis.
inline json truth_to_json(const Generator& gen, const SynthDataset& dataset) {
  json j;
  j["type"] = "pacecurve-truth";
  j["seed"] = gen.spec().seed;
  j["distance_m"] = gen.spec().distance_m;
  j["fpca"] = fpca_to_json(gen.fpca_model());
  if (gen.spec().hmm) {
    const HmmModel chain = gen.hmm_model();
    j["hmm"] = hmm_to_json(chain);
  }
  json athletes = json::array();
  for (const auto& career : dataset.careers) {
    json a;
    a["athlete_id"] = career.athlete_id;
    json states = json::array(), scores = json::array();
    for (const auto& race : career.races) {
      states.push_back(race.true_state);
      scores.push_back(detail::vector_to_json(race.true_scores));
    }
    a["states"] = states;
    a["scores"] = scores;
    athletes.push_back(a);
  }
  j["athletes"] = athletes;
  return j;
}

}  // namespace pacecurve
