#pragma once

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "offalign/core.hpp"
#include "offalign/games.hpp"
#include "offalign/instances.hpp"

namespace offalign {

// All floating-point output uses 17 significant digits with '.' decimal
// separator, enough to round-trip IEEE doubles exactly.
inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
  std::vector<std::vector<double>> rows;
  for (const auto& row : j) rows.push_back(row.get<std::vector<double>>());
  return Matrix::from_rows(rows);
}

inline nlohmann::json instance_to_json(const Instance& inst) {
  return {{"contexts", inst.n_contexts()},
          {"actions", inst.n_actions()},
          {"rho", inst.rho()},
          {"r_max", inst.r_max()},
          {"r_star", matrix_to_json(inst.r_star().values())},
          {"pi_ref", matrix_to_json(inst.pi_ref().probs())}};
}

inline Instance instance_from_json(const nlohmann::json& j) {
  try {
    return Instance(j.at("rho").get<std::vector<double>>(),
                    RewardModel(matrix_from_json(j.at("r_star"))), j.at("r_max").get<double>(),
                    Policy(matrix_from_json(j.at("pi_ref"))));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("instance_from_json: ") + e.what());
  }
}

inline nlohmann::json pref_function_to_json(const PreferenceFunction& l) {
  nlohmann::json contexts = nlohmann::json::array();
  for (std::size_t x = 0; x < l.n_contexts(); ++x) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t a = 0; a < l.n_actions(); ++a) {
      nlohmann::json row = nlohmann::json::array();
      for (std::size_t b = 0; b < l.n_actions(); ++b) row.push_back(l(x, a, b));
      rows.push_back(std::move(row));
    }
    contexts.push_back(std::move(rows));
  }
  return {{"contexts", l.n_contexts()}, {"actions", l.n_actions()}, {"values", contexts}};
}

inline PreferenceFunction pref_function_from_json(const nlohmann::json& j) {
  const auto X = j.at("contexts").get<std::size_t>();
  const auto A = j.at("actions").get<std::size_t>();
  std::vector<double> values;
  values.reserve(X * A * A);
  for (const auto& ctx : j.at("values"))
    for (const auto& row : ctx)
      for (const auto& v : row) values.push_back(v.get<double>());
  return PreferenceFunction(X, A, std::move(values));
}

inline nlohmann::json named_instance_to_json(const NamedInstance& ni) {
  nlohmann::json j = {{"instance", instance_to_json(ni.instance)}, {"metadata", ni.metadata}};
  if (!ni.reward_class.empty()) {
    nlohmann::json cls = nlohmann::json::array();
    for (const auto& r : ni.reward_class) cls.push_back(matrix_to_json(r.values()));
    j["reward_class"] = std::move(cls);
  }
  if (ni.pref) j["pref"] = pref_function_to_json(*ni.pref);
  return j;
}

inline NamedInstance named_instance_from_json(const nlohmann::json& j) {
  NamedInstance ni;
  ni.instance = instance_from_json(j.at("instance"));
  ni.metadata = j.value("metadata", "");
  if (j.contains("reward_class"))
    for (const auto& r : j.at("reward_class")) ni.reward_class.emplace_back(matrix_from_json(r));
  if (j.contains("pref")) ni.pref = pref_function_from_json(j.at("pref"));
  return ni;
}

// Preference datasets serialize as JSON lines, one {"x":..,"plus":..,"minus":..}
// object per tuple.
inline std::string dataset_to_jsonl(const PreferenceDataset& data) {
  std::ostringstream out;
  for (const auto& t : data.tuples)
    out << nlohmann::json{{"x", t.x}, {"plus", t.a_plus}, {"minus", t.a_minus}}.dump() << '\n';
  return out.str();
}

inline PreferenceDataset dataset_from_jsonl(const std::string& text) {
  PreferenceDataset data;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    data.tuples.push_back({j.at("x").get<std::size_t>(), j.at("plus").get<std::size_t>(),
                           j.at("minus").get<std::size_t>()});
  }
  return data;
}

// CSV emission: UTF-8, header row, '.' decimal separator.
inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("write_csv: cannot open " + path);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << '\n';
  }
}

inline void write_rows_json(const std::string& path, const std::vector<std::string>& header,
                            const std::vector<std::vector<std::string>>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& row : rows) {
    nlohmann::json obj;
    for (std::size_t i = 0; i < header.size() && i < row.size(); ++i) obj[header[i]] = row[i];
    arr.push_back(std::move(obj));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("write_rows_json: cannot open " + path);
  out << arr.dump(2) << '\n';
}

inline void matrix_to_csv(const std::string& path, const Matrix& m) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(m.rows());
  std::vector<std::string> header;
  for (std::size_t j = 0; j < m.cols(); ++j) header.push_back("a" + std::to_string(j));
  for (std::size_t i = 0; i < m.rows(); ++i) {
    std::vector<std::string> row;
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(fmt_double(m(i, j)));
    rows.push_back(std::move(row));
  }
  write_csv(path, header, rows);
}

}  // namespace offalign
