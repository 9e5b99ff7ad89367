#pragma once

// JSON data files and per-step results CSV.
//
// Data file:
//   { "model": { "m0": [...], "P0": [[...]], "n": N,
//                "steps": [ { "F", "u", "Q", "H", "d", "R" }, ... ] },
//     "states": [[...], ...], "measurements": [[...], ...], "seed": S }
// "steps" holds one entry for a stationary model or N entries otherwise.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "parbayes/kernel.hpp"
#include "parbayes/sequential.hpp"
#include "parbayes/ssm.hpp"

namespace parbayes {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Json = nlohmann::json;

inline Json to_json(const Vector& v) { return Json(std::vector<double>(v.entries().begin(), v.entries().end())); }

inline Json to_json(const Matrix& m) {
  Json rows = Json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Vector vector_from_json(const Json& j, const std::string& what) {
  if (!j.is_array()) throw IoError(what + ": expected an array of numbers");
  Vector v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw IoError(what + ": entry " + std::to_string(i) + " is not a number");
    v[i] = j[i].get<double>();
  }
  return v;
}

inline Matrix matrix_from_json(const Json& j, const std::string& what) {
  if (!j.is_array()) throw IoError(what + ": expected an array of rows");
  const std::size_t rows = j.size();
  const std::size_t cols = rows == 0 ? 0 : j[0].size();
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const Vector row = vector_from_json(j[r], what + " row " + std::to_string(r));
    if (row.dim() != cols) throw IoError(what + ": ragged rows");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = row[c];
  }
  return m;
}

inline Json to_json(const LGSSM& model) {
  Json steps = Json::array();
  for (const auto& s : model.steps)
    steps.push_back({{"F", to_json(s.F)}, {"u", to_json(s.u)}, {"Q", to_json(s.Q)},
                     {"H", to_json(s.H)}, {"d", to_json(s.d)}, {"R", to_json(s.R)}});
  return {{"m0", to_json(model.m0)}, {"P0", to_json(model.P0)}, {"n", model.n}, {"steps", std::move(steps)}};
}

inline LGSSM model_from_json(const Json& j) {
  try {
    LGSSM model;
    model.m0 = vector_from_json(j.at("m0"), "model.m0");
    model.P0 = matrix_from_json(j.at("P0"), "model.P0");
    model.n = j.at("n").get<std::size_t>();
    for (const auto& s : j.at("steps")) {
      model.steps.push_back({matrix_from_json(s.at("F"), "F"), vector_from_json(s.at("u"), "u"),
                             matrix_from_json(s.at("Q"), "Q"), matrix_from_json(s.at("H"), "H"),
                             vector_from_json(s.at("d"), "d"), matrix_from_json(s.at("R"), "R")});
    }
    validate(model);
    return model;
  } catch (const Json::exception& e) {
    throw IoError(std::string("model JSON: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw IoError(e.what());
  }
}

struct DataFile {
  LGSSM model;
  SimResult sim;
};

inline Json to_json(const DataFile& data) {
  Json states = Json::array(), meas = Json::array();
  for (const auto& x : data.sim.states) states.push_back(to_json(x));
  for (const auto& y : data.sim.measurements) meas.push_back(to_json(y));
  return {{"model", to_json(data.model)}, {"states", std::move(states)}, {"measurements", std::move(meas)},
          {"seed", data.sim.seed}};
}

inline DataFile data_from_json(const Json& j) {
  DataFile data;
  try {
    data.model = model_from_json(j.at("model"));
    for (const auto& x : j.at("states")) data.sim.states.push_back(vector_from_json(x, "states"));
    for (const auto& y : j.at("measurements")) data.sim.measurements.push_back(vector_from_json(y, "measurements"));
    data.sim.seed = j.at("seed").get<std::uint64_t>();
  } catch (const Json::exception& e) {
    throw IoError(std::string("data JSON: ") + e.what());
  }
  if (data.sim.measurements.size() != data.model.n)
    throw IoError("data JSON: model has n=" + std::to_string(data.model.n) + " but file holds " +
                  std::to_string(data.sim.measurements.size()) + " measurements");
  for (const auto& y : data.sim.measurements)
    if (y.dim() != data.model.meas_dim())
      throw IoError("data JSON: measurement dimension does not match model");
  return data;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_data_file(const std::filesystem::path& path, const DataFile& data) {
  write_text(path, to_json(data).dump(1) + "\n");
}

inline DataFile read_data_file(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw IoError("'" + path.string() + "': " + e.what());
  }
  return data_from_json(j);
}

inline LGSSM read_model_file(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  try {
    const Json j = Json::parse(text);
    return model_from_json(j.contains("model") ? j.at("model") : j);
  } catch (const Json::parse_error& e) {
    throw IoError("'" + path.string() + "': " + e.what());
  }
}

// Per-step moments as CSV: k, mean_i..., cov_i_j... and, when given,
// log_density and log_prefix.
inline std::string moments_csv(const std::vector<GaussianMoment>& moments,
                               const std::vector<double>* log_densities = nullptr,
                               const std::vector<double>* log_prefix = nullptr) {
  std::ostringstream os;
  os << std::setprecision(17);
  const std::size_t nx = moments.empty() ? 0 : moments.front().mean.dim();
  os << "k";
  for (std::size_t i = 0; i < nx; ++i) os << ",mean_" << i;
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t j = 0; j < nx; ++j) os << ",cov_" << i << "_" << j;
  if (log_densities) os << ",log_density";
  if (log_prefix) os << ",log_prefix";
  os << "\n";
  for (std::size_t k = 0; k < moments.size(); ++k) {
    os << k + 1;
    for (std::size_t i = 0; i < nx; ++i) os << "," << moments[k].mean[i];
    for (double v : moments[k].cov.entries()) os << "," << v;
    if (log_densities) os << "," << (*log_densities)[k];
    if (log_prefix) os << "," << (*log_prefix)[k];
    os << "\n";
  }
  return os.str();
}

// Numeric table with a header row; used to compare results files.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline CsvTable parse_numeric_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size())
      throw IoError("line " + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                    " fields, got " + std::to_string(cells.size()));
    std::vector<double> row;
    for (const auto& c : cells) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(c, &used));
        if (used != c.size()) throw std::invalid_argument(c);
      } catch (const std::exception&) {
        throw IoError("line " + std::to_string(lineno) + ": '" + c + "' is not a number");
      }
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace parbayes
