#pragma once

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "pacecurve/errors.hpp"
#include "pacecurve/fpca.hpp"
#include "pacecurve/hmm.hpp"
#include "pacecurve/ingest.hpp"
#include "pacecurve/log.hpp"
#include "pacecurve/model_io.hpp"
#include "pacecurve/synth.hpp"

namespace pacecurve::cli {

// Stable exit-code contract for test harnesses.
constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitIngest = 2;
constexpr int kExitFit = 3;
constexpr int kExitDecode = 4;

namespace detail {

inline void require_path(const std::string& path) {
  if (!std::filesystem::exists(path))
    throw CLI::ValidationError("path does not exist: " + path);
}

inline std::vector<RaceRecord> load_corpus(const std::string& path) {
  const std::string text = read_file(path);
  ParseResult parsed = parse_race_csv(text);
  for (const auto& bad : parsed.rejects)
    log_warn(path + ":" + std::to_string(bad.line) + ": " + bad.reason);
  if (parsed.records.empty()) throw EmptyFile();
  return parsed.records;
}

inline int corpus_distance(const std::vector<RaceRecord>& records,
                           int distance_filter) {
  if (distance_filter != 0) return distance_filter;
  const int d = records.front().distance_m;
  for (const auto& r : records)
    if (r.distance_m != d)
      throw Error(
          "corpus mixes 500 m and 1000 m races; pass --distance to select one");
  return d;
}

inline std::vector<RaceRecord> filter_distance(std::vector<RaceRecord> records,
                                               int distance_m) {
  std::erase_if(records,
                [&](const RaceRecord& r) { return r.distance_m != distance_m; });
  if (records.empty())
    throw Error("no races at distance " + std::to_string(distance_m));
  return records;
}

struct ScoredCareer {
  std::string athlete_id;
  std::vector<RaceDate> dates;
  ScoreSequence sequence;
};

inline std::vector<ScoredCareer> score_careers(
    const std::vector<RaceRecord>& records, const FpcaModel& fpca,
    const CovariateDesign& design) {
  CareerBuildResult careers = build_career_sequences(records);
  for (const auto& dup : careers.duplicates)
    log_warn("duplicate race kept: " + dup.athlete_id + " " +
             dup.race_date.to_string() + " " + to_string(dup.race_phase));
  std::vector<ScoredCareer> out;
  for (const auto& seq : careers.sequences) {
    ScoredCareer scored;
    scored.athlete_id = seq.athlete_id;
    for (const auto& race : seq.races) {
      SmoothedProfile smoothed = smooth_profile(race.profile, fpca.basis);
      PcScores scores = project_scores(fpca, smoothed);
      scored.dates.push_back(race.race_date);
      scored.sequence.push_back(ScoreObservation{
          scores.scores, covariates_for(design, race.age_group, race.event_type)});
    }
    out.push_back(std::move(scored));
  }
  return out;
}

inline std::pair<int, int> parse_sweep(const std::string& sweep) {
  const size_t pos = sweep.find("..");
  if (pos == std::string::npos)
    throw CLI::ValidationError("--sweep must look like 2..7");
  try {
    const int lo = std::stoi(sweep.substr(0, pos));
    const int hi = std::stoi(sweep.substr(pos + 2));
    return {lo, hi};
  } catch (const std::exception&) {
    throw CLI::ValidationError("--sweep must look like 2..7");
  }
}

inline std::string sweep_table(const SweepResult& sweep) {
  std::string out = "n_states,log_likelihood,aic,status\n";
  char buf[128];
  for (const auto& row : sweep.rows) {
    if (row.ok)
      std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,ok\n", row.n_states,
                    row.log_likelihood, row.aic);
    else
      std::snprintf(buf, sizeof(buf), "%d,,,error\n", row.n_states);
    out += buf;
  }
  return out;
}

inline std::string curves_path_for(const std::string& model_path) {
  std::filesystem::path p(model_path);
  p.replace_extension();
  return p.string() + "_eigenfunctions.csv";
}

}  // namespace detail

struct FitFpcaOpts {
  std::string input;
  std::string out;
  int n_pc = 4;
  int basis_size = 0;  // 0: 8 for 500 m, 12 for 1000 m
  int basis_order = 4;
  int distance = 0;  // 0: corpus must be single-distance
};

inline int cmd_fit_fpca(const FitFpcaOpts& opts, std::ostream& os = std::cout) {
  std::vector<RaceRecord> records;
  int distance = 0;
  try {
    records = detail::load_corpus(opts.input);
    distance = detail::corpus_distance(records, opts.distance);
    if (opts.distance != 0) records = detail::filter_distance(records, opts.distance);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return kExitIngest;
  }
  try {
    const int n_basis = opts.basis_size != 0 ? opts.basis_size
                        : distance == 500    ? 8
                                             : 12;
    const FunctionalBasis basis = make_basis(distance, n_basis, opts.basis_order);
    std::vector<SmoothedProfile> profiles;
    profiles.reserve(records.size());
    for (const auto& rec : records)
      profiles.push_back(smooth_profile(normalize_profile(rec), basis));
    const FpcaModel model = fit_fpca(profiles, opts.n_pc);

    atomic_write_file(opts.out, fpca_to_json(model).dump(2) + "\n");
    atomic_write_file(detail::curves_path_for(opts.out), export_plot_csv(model));
    os << variance_table(model);
    return kExitOk;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return kExitFit;
  }
}

struct FitHmmOpts {
  std::string input;
  std::string model;  // fpca model JSON
  std::string out;
  int states = 4;
  int restarts = 3;
  std::uint64_t seed = 0;
  std::string sweep;  // "a..b" -> AIC table, then fit the chosen count
  std::string sweep_out;
  bool diagonal_covariance = false;
  int distance = 0;
};

inline int cmd_fit_hmm(const FitHmmOpts& opts, std::ostream& os = std::cout) {
  FpcaModel fpca;
  std::vector<RaceRecord> records;
  try {
    fpca = fpca_from_json(json::parse(read_file(opts.model)));
    records = detail::load_corpus(opts.input);
    const int distance = detail::corpus_distance(records, opts.distance);
    if (opts.distance != 0) records = detail::filter_distance(records, opts.distance);
    if ((double)distance != fpca.basis.domain())
      throw Error("corpus distance does not match the fpca model domain");
  } catch (const json::exception& e) {
    std::cerr << "bad model JSON: " << e.what() << "\n";
    return kExitIngest;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return kExitIngest;
  }

  try {
    const CovariateDesign design =
        CovariateDesign::for_distance((int)fpca.basis.domain());
    const auto scored = detail::score_careers(records, fpca, design);
    std::vector<ScoreSequence> sequences;
    for (const auto& c : scored) sequences.push_back(c.sequence);

    EmConfig config;
    config.restarts = opts.restarts;
    config.seed = opts.seed;
    config.diagonal_covariance = opts.diagonal_covariance;

    int n_states = opts.states;
    if (!opts.sweep.empty()) {
      const auto [lo, hi] = detail::parse_sweep(opts.sweep);
      const SweepResult sweep = select_states(sequences, lo, hi, design, config);
      const std::string table = detail::sweep_table(sweep);
      os << table << "chosen," << sweep.chosen << "\n";
      if (!opts.sweep_out.empty()) atomic_write_file(opts.sweep_out, table);
      n_states = sweep.chosen;
    }

    const FitResult fit = em_fit(sequences, n_states, design, config);
    atomic_write_file(opts.out,
                      hmm_to_json(fit.model, &fit.report, &fpca).dump(2) + "\n");
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "states=%d logL=%.6f AIC=%.6f iterations=%d converged=%d\n",
                  n_states, fit.report.log_likelihood, fit.report.aic,
                  fit.report.iterations, (int)fit.report.converged);
    os << buf;
    return kExitOk;
  } catch (const CLI::Error&) {
    throw;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return kExitFit;
  }
}

struct SelectStatesOpts {
  std::string input;
  std::string model;
  std::string out;  // sweep table CSV (optional)
  std::string sweep = "2..7";
  int restarts = 3;
  std::uint64_t seed = 0;
  int distance = 0;
};

inline int cmd_select_states(const SelectStatesOpts& opts,
                             std::ostream& os = std::cout) {
  FitHmmOpts fit_opts;
  fit_opts.input = opts.input;
  fit_opts.model = opts.model;
  fit_opts.restarts = opts.restarts;
  fit_opts.seed = opts.seed;
  fit_opts.distance = opts.distance;

  FpcaModel fpca;
  std::vector<RaceRecord> records;
  try {
    fpca = fpca_from_json(json::parse(read_file(opts.model)));
    records = detail::load_corpus(opts.input);
    const int distance = detail::corpus_distance(records, opts.distance);
    if (opts.distance != 0) records = detail::filter_distance(records, opts.distance);
    if ((double)distance != fpca.basis.domain())
      throw Error("corpus distance does not match the fpca model domain");
  } catch (const json::exception& e) {
    std::cerr << "bad model JSON: " << e.what() << "\n";
    return kExitIngest;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return kExitIngest;
  }
  try {
    const CovariateDesign design =
        CovariateDesign::for_distance((int)fpca.basis.domain());
    const auto scored = detail::score_careers(records, fpca, design);
    std::vector<ScoreSequence> sequences;
    for (const auto& c : scored) sequences.push_back(c.sequence);
    EmConfig config;
    config.restarts = opts.restarts;
    config.seed = opts.seed;
    const auto [lo, hi] = detail::parse_sweep(opts.sweep);
    const SweepResult sweep = select_states(sequences, lo, hi, design, config);
    const std::string table = detail::sweep_table(sweep);
    os << table << "chosen," << sweep.chosen << "\n";
    if (!opts.out.empty()) atomic_write_file(opts.out, table);
    return kExitOk;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return kExitFit;
  }
}

struct DecodeOpts {
  std::string input;
  std::string model;  // hmm model JSON with embedded fpca
  std::string out;
  std::string plot_data;  // optional state-vs-race-index CSV
  int distance = 0;
};

inline int cmd_decode(const DecodeOpts& opts, std::ostream& os = std::cout) {
  LoadedHmm loaded;
  std::vector<RaceRecord> records;
  try {
    loaded = hmm_from_json(json::parse(read_file(opts.model)));
    if (!loaded.fpca)
      throw Error("hmm model file has no embedded fpca model; refit with fit-hmm");
    records = detail::load_corpus(opts.input);
    const int distance = detail::corpus_distance(records, opts.distance);
    if (opts.distance != 0) records = detail::filter_distance(records, opts.distance);
    if ((double)distance != loaded.fpca->basis.domain())
      throw Error("corpus distance does not match the model domain");
  } catch (const json::exception& e) {
    std::cerr << "bad model JSON: " << e.what() << "\n";
    return kExitIngest;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return kExitIngest;
  }

  try {
    std::vector<detail::ScoredCareer> scored =
        detail::score_careers(records, *loaded.fpca, loaded.model.design);
    std::string out_csv = decode_csv_header(loaded.model.n_states);
    std::string plot_csv = "athlete_id,race_index,state\n";
    int n_rows = 0;
    for (const auto& career : scored) {
      const DecodedCareer decoded =
          viterbi_decode(loaded.model, career.sequence, career.athlete_id);
      append_decode_rows(out_csv, decoded, career.dates);
      for (size_t t = 0; t < decoded.viterbi_path.size(); ++t)
        plot_csv += career.athlete_id + ',' + std::to_string(t + 1) + ',' +
                    std::to_string(decoded.viterbi_path[t]) + "\n";
      n_rows += (int)decoded.viterbi_path.size();
    }
    atomic_write_file(opts.out, out_csv);
    if (!opts.plot_data.empty()) atomic_write_file(opts.plot_data, plot_csv);
    os << "decoded " << scored.size() << " careers, " << n_rows << " races\n";
    return kExitOk;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return kExitDecode;
  }
}

struct SimulateOpts {
  std::string input;  // generator spec JSON; default 500 m spec when empty
  std::string out;    // output directory
  std::uint64_t seed = 0;
  bool seed_given = false;
};

inline int cmd_simulate(const SimulateOpts& opts, std::ostream& os = std::cout) {
  try {
    GeneratorSpec spec;
    if (!opts.input.empty())
      spec = spec_from_json(json::parse(read_file(opts.input)));
    else
      spec = default_spec_500();
    if (opts.seed_given) spec.seed = opts.seed;

    const Generator gen(spec);
    const SynthDataset dataset = gen.generate_dataset();
    const std::filesystem::path dir(opts.out);
    atomic_write_file((dir / "corpus.csv").string(),
                      serialize_race_csv(dataset.records));
    atomic_write_file((dir / "truth.json").string(),
                      truth_to_json(gen, dataset).dump(2) + "\n");
    os << "wrote " << dataset.records.size() << " races for "
       << dataset.careers.size() << " athletes\n";
    return kExitOk;
  } catch (const json::exception& e) {
    std::cerr << "bad spec JSON: " << e.what() << "\n";
    return kExitUsage;
  } catch (const SpecValidation& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return kExitFit;
  }
}

struct ExportPlotOpts {
  std::string model;  // fpca model JSON, or hmm model with embedded fpca
  std::string out;
};

inline int cmd_export_plot(const ExportPlotOpts& opts) {
  try {
    const json j = json::parse(read_file(opts.model));
    FpcaModel fpca;
    if (j.value("type", "") == "pacecurve-fpca") {
      fpca = fpca_from_json(j);
    } else if (j.value("type", "") == "pacecurve-hmm") {
      LoadedHmm loaded = hmm_from_json(j);
      if (!loaded.fpca) throw Error("hmm model file has no embedded fpca model");
      fpca = *loaded.fpca;
    } else {
      throw Error("unrecognized model type");
    }
    atomic_write_file(opts.out, export_plot_csv(fpca));
    return kExitOk;
  } catch (const json::exception& e) {
    std::cerr << "bad model JSON: " << e.what() << "\n";
    return kExitIngest;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return kExitIngest;
  }
}

inline int run(std::vector<std::string> args, std::ostream& os = std::cout) {
  CLI::App app{"pacecurve: pacing-profile fPCA + HMM toolkit"};
  app.require_subcommand(1);

  FitFpcaOpts fpca_opts;
  auto* fit_fpca_cmd = app.add_subcommand("fit-fpca", "fit an fPCA model to a race corpus");
  fit_fpca_cmd->add_option("--input", fpca_opts.input, "race corpus CSV")
      ->required()
      ->check(CLI::ExistingFile);
  fit_fpca_cmd->add_option("--out", fpca_opts.out, "output model JSON")->required();
  fit_fpca_cmd->add_option("--n-pc", fpca_opts.n_pc, "number of components");
  fit_fpca_cmd->add_option("--basis-size", fpca_opts.basis_size, "basis functions");
  fit_fpca_cmd->add_option("--distance", fpca_opts.distance, "filter to one distance")
      ->check(CLI::IsMember({500, 1000}));

  FitHmmOpts hmm_opts;
  auto* fit_hmm_cmd = app.add_subcommand("fit-hmm", "fit the career HMM on PC scores");
  fit_hmm_cmd->add_option("--input", hmm_opts.input, "race corpus CSV")
      ->required()
      ->check(CLI::ExistingFile);
  fit_hmm_cmd->add_option("--model", hmm_opts.model, "fpca model JSON")
      ->required()
      ->check(CLI::ExistingFile);
  fit_hmm_cmd->add_option("--out", hmm_opts.out, "output model JSON")->required();
  fit_hmm_cmd->add_option("--states", hmm_opts.states, "state count");
  fit_hmm_cmd->add_option("--restarts", hmm_opts.restarts, "EM restarts");
  fit_hmm_cmd->add_option("--seed", hmm_opts.seed, "RNG seed")->required();
  fit_hmm_cmd->add_option("--sweep", hmm_opts.sweep, "state-count sweep, e.g. 2..7");
  fit_hmm_cmd->add_option("--sweep-out", hmm_opts.sweep_out, "sweep table CSV");
  fit_hmm_cmd->add_flag("--diagonal-cov", hmm_opts.diagonal_covariance,
                        "diagonal emission covariance");
  fit_hmm_cmd->add_option("--distance", hmm_opts.distance, "filter to one distance")
      ->check(CLI::IsMember({500, 1000}));

  SelectStatesOpts select_opts;
  auto* select_cmd = app.add_subcommand("select-states", "AIC state-count sweep");
  select_cmd->add_option("--input", select_opts.input, "race corpus CSV")
      ->required()
      ->check(CLI::ExistingFile);
  select_cmd->add_option("--model", select_opts.model, "fpca model JSON")
      ->required()
      ->check(CLI::ExistingFile);
  select_cmd->add_option("--sweep", select_opts.sweep, "range, e.g. 2..7");
  select_cmd->add_option("--out", select_opts.out, "sweep table CSV");
  select_cmd->add_option("--restarts", select_opts.restarts, "EM restarts");
  select_cmd->add_option("--seed", select_opts.seed, "RNG seed")->required();
  select_cmd->add_option("--distance", select_opts.distance, "filter to one distance")
      ->check(CLI::IsMember({500, 1000}));

  DecodeOpts decode_opts;
  auto* decode_cmd = app.add_subcommand("decode", "decode careers to states");
  decode_cmd->add_option("--input", decode_opts.input, "race corpus CSV")
      ->required()
      ->check(CLI::ExistingFile);
  decode_cmd->add_option("--model", decode_opts.model, "hmm model JSON")
      ->required()
      ->check(CLI::ExistingFile);
  decode_cmd->add_option("--out", decode_opts.out, "decode CSV")->required();
  decode_cmd->add_option("--plot-data", decode_opts.plot_data,
                         "state-vs-race-index CSV");
  decode_cmd->add_option("--distance", decode_opts.distance, "filter to one distance")
      ->check(CLI::IsMember({500, 1000}));

  SimulateOpts sim_opts;
  auto* sim_cmd = app.add_subcommand("simulate", "generate a synthetic corpus");
  sim_cmd->add_option("--input", sim_opts.input, "generator spec JSON")
      ->check(CLI::ExistingFile);
  sim_cmd->add_option("--out", sim_opts.out, "output directory")->required();
  auto* seed_opt = sim_cmd->add_option("--seed", sim_opts.seed, "RNG seed")->required();

  ExportPlotOpts plot_opts;
  auto* plot_cmd = app.add_subcommand("export-plot", "eigenfunction curves CSV");
  plot_cmd->add_option("--model", plot_opts.model, "fpca or hmm model JSON")
      ->required()
      ->check(CLI::ExistingFile);
  plot_cmd->add_option("--out", plot_opts.out, "output CSV")->required();

  std::vector<const char*> argv;
  argv.push_back("pacecurve");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse((int)argv.size(), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (fit_fpca_cmd->parsed()) return cmd_fit_fpca(fpca_opts, os);
  if (fit_hmm_cmd->parsed()) return cmd_fit_hmm(hmm_opts, os);
  if (select_cmd->parsed()) return cmd_select_states(select_opts, os);
  if (decode_cmd->parsed()) {
    sim_opts.seed_given = false;
    return cmd_decode(decode_opts, os);
  }
  if (sim_cmd->parsed()) {
    sim_opts.seed_given = seed_opt->count() > 0;
    return cmd_simulate(sim_opts, os);
  }
  if (plot_cmd->parsed()) return cmd_export_plot(plot_opts);
  return kExitUsage;
}

}  // namespace pacecurve::cli
