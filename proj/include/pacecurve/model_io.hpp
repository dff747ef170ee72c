#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pacecurve/errors.hpp"
#include "pacecurve/fpca.hpp"
#include "pacecurve/hmm.hpp"

namespace pacecurve {

using nlohmann::json;

namespace detail {

inline json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

inline json matrix_rows_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

inline json matrix_flat_to_json(const Eigen::MatrixXd& m) {
  json arr = json::array();  // row-major
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) arr.push_back(m(i, j));
  return arr;
}

inline json lower_triangle_to_json(const Eigen::MatrixXd& m) {
  json arr = json::array();  // rows of the lower triangle, packed
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j <= i; ++j) arr.push_back(m(i, j));
  return arr;
}

inline Eigen::VectorXd vector_from_json(const json& arr, const char* field) {
  if (!arr.is_array()) throw IoError(std::string(field) + " must be an array");
  Eigen::VectorXd v(arr.size());
  for (size_t i = 0; i < arr.size(); ++i) v[(int)i] = arr[i].get<double>();
  return v;
}

inline Eigen::MatrixXd matrix_rows_from_json(const json& rows, const char* field) {
  if (!rows.is_array() || rows.empty())
    throw IoError(std::string(field) + " must be a non-empty array of rows");
  const size_t cols = rows[0].size();
  Eigen::MatrixXd m(rows.size(), cols);
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols)
      throw IoError(std::string(field) + " rows have inconsistent lengths");
    for (size_t j = 0; j < cols; ++j) m((int)i, (int)j) = rows[i][j].get<double>();
  }
  return m;
}

inline Eigen::MatrixXd matrix_flat_from_json(const json& arr, int rows, int cols,
                                             const char* field) {
  if (!arr.is_array() || (int)arr.size() != rows * cols)
    throw IoError(std::string(field) + " must have " +
                  std::to_string(rows * cols) + " entries");
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = arr[i * cols + j].get<double>();
  return m;
}

inline Eigen::MatrixXd lower_triangle_from_json(const json& arr, int d,
                                                const char* field) {
  if (!arr.is_array() || (int)arr.size() != d * (d + 1) / 2)
    throw IoError(std::string(field) + " must have " +
                  std::to_string(d * (d + 1) / 2) + " entries");
  Eigen::MatrixXd m(d, d);
  int k = 0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j <= i; ++j) {
      m(i, j) = arr[k++].get<double>();
      m(j, i) = m(i, j);
    }
  return m;
}

}  // namespace detail

// ---- fpca model JSON ----

inline json fpca_to_json(const FpcaModel& model) {
  json j;
  j["type"] = "pacecurve-fpca";
  j["version"] = 1;
  j["basis"] = {{"order", model.basis.order()},
                {"n_basis", model.basis.n_basis()},
                {"domain_m", model.basis.domain()}};
  j["n_pc"] = model.n_pc;
  j["mean_coeffs"] = detail::vector_to_json(model.mean_coeffs);
  j["eigenfunction_coeffs"] = detail::matrix_rows_to_json(model.eigenfunction_coeffs);
  j["eigenvalues"] = detail::vector_to_json(model.eigenvalues);
  j["variance_explained"] = detail::vector_to_json(model.variance_explained);
  j["total_variance"] = model.total_variance;
  return j;
}

inline FpcaModel fpca_from_json(const json& j) {
  if (!j.is_object() || j.value("type", "") != "pacecurve-fpca")
    throw IoError("not a pacecurve-fpca model");
  const json& b = j.at("basis");
  FpcaModel model;
  model.basis = FunctionalBasis(b.at("domain_m").get<double>(),
                                b.at("n_basis").get<int>(),
                                b.at("order").get<int>());
  model.n_pc = j.at("n_pc").get<int>();
  model.mean_coeffs = detail::vector_from_json(j.at("mean_coeffs"), "mean_coeffs");
  model.eigenfunction_coeffs =
      detail::matrix_rows_from_json(j.at("eigenfunction_coeffs"),
                                    "eigenfunction_coeffs");
  model.eigenvalues = detail::vector_from_json(j.at("eigenvalues"), "eigenvalues");
  model.variance_explained =
      detail::vector_from_json(j.at("variance_explained"), "variance_explained");
  model.total_variance = j.at("total_variance").get<double>();
  if ((int)model.mean_coeffs.size() != model.basis.n_basis() ||
      (int)model.eigenfunction_coeffs.rows() != model.n_pc ||
      (int)model.eigenfunction_coeffs.cols() != model.basis.n_basis())
    throw IoError("fpca model dimensions are inconsistent");
  return model;
}

// ---- hmm model JSON ----

inline json hmm_to_json(const HmmModel& model, const FitReport* report = nullptr,
                        const FpcaModel* fpca = nullptr) {
  json j;
  j["type"] = "pacecurve-hmm";
  j["version"] = 1;
  j["n_states"] = model.n_states;
  j["n_pc"] = model.n_pc;
  j["design"] = model.design.id;
  j["design_columns"] = model.design.columns;
  j["initial"] = detail::vector_to_json(model.initial);
  j["transition"] = detail::matrix_flat_to_json(model.transition);
  json states = json::array();
  for (int s = 0; s < model.n_states; ++s) {
    json st;
    st["beta"] = detail::matrix_rows_to_json(model.emissions.beta[s]);
    st["sigma_lower"] = detail::lower_triangle_to_json(model.emissions.sigma[s]);
    states.push_back(st);
  }
  j["states"] = states;
  j["label_order"] = "pc1_intercept_desc";
  if (report) {
    j["fit"] = {{"log_likelihood", report->log_likelihood},
                {"aic", report->aic},
                {"seed", report->seed},
                {"iterations", report->iterations},
                {"converged", report->converged},
                {"n_obs", report->n_obs},
                {"free_parameters", report->free_parameters}};
  }
  if (fpca) j["fpca"] = fpca_to_json(*fpca);
  return j;
}

struct LoadedHmm {
  HmmModel model;
  std::optional<FpcaModel> fpca;
};

inline LoadedHmm hmm_from_json(const json& j) {
  if (!j.is_object() || j.value("type", "") != "pacecurve-hmm")
    throw IoError("not a pacecurve-hmm model");
  LoadedHmm out;
  HmmModel& model = out.model;
  model.n_states = j.at("n_states").get<int>();
  model.n_pc = j.at("n_pc").get<int>();
  model.design = CovariateDesign::from_id(j.at("design").get<std::string>());
  model.initial = detail::vector_from_json(j.at("initial"), "initial");
  model.transition = detail::matrix_flat_from_json(
      j.at("transition"), model.n_states, model.n_states, "transition");
  const json& states = j.at("states");
  if ((int)states.size() != model.n_states)
    throw IoError("states array length must equal n_states");
  for (const auto& st : states) {
    Eigen::MatrixXd beta = detail::matrix_rows_from_json(st.at("beta"), "beta");
    if ((int)beta.rows() != model.n_pc ||
        (int)beta.cols() != 1 + model.design.m())
      throw IoError("state beta must be n_pc x (1+m)");
    model.emissions.beta.push_back(beta);
    model.emissions.sigma.push_back(detail::lower_triangle_from_json(
        st.at("sigma_lower"), model.n_pc, "sigma_lower"));
  }
  if ((int)model.initial.size() != model.n_states)
    throw IoError("initial length must equal n_states");
  if (j.contains("fpca")) out.fpca = fpca_from_json(j.at("fpca"));
  return out;
}

// ---- plot / report exports ----

// Eigenfunction curves on a 1 m grid: x,phi1,...,phiK.
inline std::string export_plot_csv(const FpcaModel& model) {
  std::string out = "x";
  for (int j = 1; j <= model.n_pc; ++j) out += ",phi" + std::to_string(j);
  out += "\n";
  char buf[64];
  for (int x = 0; x <= (int)model.basis.domain(); ++x) {
    out += std::to_string(x);
    const Eigen::VectorXd b = model.basis.eval_all((double)x);
    for (int j = 0; j < model.n_pc; ++j) {
      std::snprintf(buf, sizeof(buf), ",%.12g",
                    b.dot(model.eigenfunction_coeffs.row(j).transpose()));
      out += buf;
    }
    out += "\n";
  }
  return out;
}

inline std::string variance_table(const FpcaModel& model) {
  std::string out = "pc,fraction,cumulative\n";
  char buf[80];
  for (const VarianceRow& row : variance_report(model)) {
    std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f\n", row.pc, row.fraction,
                  row.cumulative);
    out += buf;
  }
  return out;
}

// Decode CSV: athlete_id,race_date,race_index,state_viterbi,p_state_1..p_state_n.
inline std::string decode_csv_header(int n_states) {
  std::string out = "athlete_id,race_date,race_index,state_viterbi";
  for (int j = 1; j <= n_states; ++j) out += ",p_state_" + std::to_string(j);
  out += "\n";
  return out;
}

inline void append_decode_rows(std::string& out, const DecodedCareer& decoded,
                               const std::vector<RaceDate>& dates) {
  char buf[64];
  for (size_t t = 0; t < decoded.viterbi_path.size(); ++t) {
    out += decoded.athlete_id + ',' + dates[t].to_string() + ',' +
           std::to_string(t + 1) + ',' + std::to_string(decoded.viterbi_path[t]);
    for (int j = 0; j < decoded.posteriors.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), ",%.9f", decoded.posteriors((int)t, j));
      out += buf;
    }
    out += "\n";
  }
}

// ---- file helpers ----

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  return content;
}

// Temp file + rename so partially written outputs never appear.
inline void atomic_write_file(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
  }
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << content;
    if (!out.good()) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path);
}

}  // namespace pacecurve
