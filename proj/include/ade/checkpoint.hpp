#pragma once

#include <fstream>
#include <map>
#include <string>

#include <json.hpp>

#include "ade/matrix.hpp"

namespace ade {

// Flat key -> dense-array checkpoint in a self-describing JSON container.
// Keys follow the module prefixes: "layer{i}.weight", "dynamics.log_eta",
// "init.flow{k}.u", ...
struct Checkpoint {
  std::map<std::string, Mat> params;
  nlohmann::json meta;
};

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  nlohmann::json j;
  j["format"] = "ade.checkpoint.v1";
  j["meta"] = ck.meta;
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [name, m] : ck.params) {
    nlohmann::json entry;
    entry["rows"] = m.rows();
    entry["cols"] = m.cols();
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j2 = 0; j2 < m.cols(); ++j2) data.push_back(m(i, j2));
    }
    entry["data"] = std::move(data);
    params[name] = std::move(entry);
  }
  j["params"] = std::move(params);
  std::ofstream out(path);
  if (!out) throw ConfigError("save_checkpoint: cannot open " + path);
  out << j.dump(2) << "\n";
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("load_checkpoint: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("load_checkpoint: invalid JSON in " + path + ": " + e.what());
  }
  if (!j.contains("format") || j["format"] != "ade.checkpoint.v1") {
    throw ConfigError("load_checkpoint: unrecognized format in " + path);
  }
  Checkpoint ck;
  ck.meta = j.value("meta", nlohmann::json::object());
  for (const auto& [name, entry] : j.at("params").items()) {
    const auto rows = entry.at("rows").get<Eigen::Index>();
    const auto cols = entry.at("cols").get<Eigen::Index>();
    const auto data = entry.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
      throw ConfigError("load_checkpoint: size mismatch for " + name);
    }
    Mat m(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j2 = 0; j2 < cols; ++j2) m(i, j2) = data[k++];
    }
    ck.params[name] = std::move(m);
  }
  return ck;
}

}  // namespace ade
