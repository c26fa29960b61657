#pragma once

#include <array>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "ade/rng.hpp"

namespace ade {

// Synthetic dataset request. `noise` is the generator's jitter std; NaN picks
// the per-generator default. The diag_gaussian source takes the extra fields.
struct DatasetSpec {
  std::string name = "moons";
  int n = 10000;
  double noise = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t seed = 0;
  // diag_gaussian only
  int d = 5;
  Vec mu;
  Vec sigma;
};

inline const std::vector<std::string>& dataset_names() {
  static const std::vector<std::string> names = {
      "2spirals", "Banana", "circles", "cos",      "Cosine", "Funnel",  "swissroll",
      "line",     "moons",  "Multiring", "pinwheel", "Ring",   "Spiral",  "Uniform"};
  return names;
}

namespace detail {

inline double pick(double requested, double fallback) {
  return std::isnan(requested) ? fallback : requested;
}

}  // namespace detail

// Deterministic generators for the two-dimensional toy suites plus the
// diagonal-Gaussian ground-truth source. The exact constants are fixed here;
// they reconstruct the commonly used open-source toy generators rather than
// quote any single implementation.
inline Mat generate(const DatasetSpec& spec) {
  require(spec.n >= 1, "generate: need n >= 1");
  Rng rng(spec.seed);
  const int n = spec.n;
  Mat out(n, 2);
  const std::string& name = spec.name;

  if (name == "2spirals") {
    const double noise = detail::pick(spec.noise, 0.1);
    for (int i = 0; i < n; ++i) {
      const double t = std::sqrt(rng.uniform()) * 3.0 * std::numbers::pi;
      double x = -std::cos(t) * t + rng.uniform() * 0.5;
      double y = std::sin(t) * t + rng.uniform() * 0.5;
      if (rng.next_u64() & 1u) {
        x = -x;
        y = -y;
      }
      out(i, 0) = x / 3.0 + rng.normal() * noise;
      out(i, 1) = y / 3.0 + rng.normal() * noise;
    }
  } else if (name == "Banana") {
    const double noise = detail::pick(spec.noise, 1.0);
    for (int i = 0; i < n; ++i) {
      const double x1 = 2.0 * rng.normal();
      out(i, 0) = x1;
      out(i, 1) = rng.normal() * noise + 0.1 * (x1 * x1 - 4.0);
    }
  } else if (name == "circles") {
    const double noise = detail::pick(spec.noise, 0.08);
    for (int i = 0; i < n; ++i) {
      const double r = (i % 2 == 0) ? 3.0 : 1.5;
      const double a = rng.uniform() * 2.0 * std::numbers::pi;
      out(i, 0) = r * std::cos(a) + rng.normal() * 3.0 * noise;
      out(i, 1) = r * std::sin(a) + rng.normal() * 3.0 * noise;
    }
  } else if (name == "cos") {
    const double noise = detail::pick(spec.noise, 0.1);
    for (int i = 0; i < n; ++i) {
      const double x = rng.uniform() * 5.0 - 2.5;
      out(i, 0) = x + rng.normal() * noise;
      out(i, 1) = std::sin(x) * 2.5 + rng.normal() * noise;
    }
  } else if (name == "Cosine") {
    const double noise = detail::pick(spec.noise, 0.2);
    for (int i = 0; i < n; ++i) {
      const double x = rng.uniform() * 8.0 - 4.0;
      out(i, 0) = x;
      out(i, 1) = 2.0 * std::cos(1.2 * x) + rng.normal() * noise;
    }
  } else if (name == "Funnel") {
    for (int i = 0; i < n; ++i) {
      const double x1 = rng.normal();
      out(i, 0) = x1;
      out(i, 1) = rng.normal() * std::exp(0.5 * x1);
    }
  } else if (name == "swissroll") {
    const double noise = detail::pick(spec.noise, 1.0);
    for (int i = 0; i < n; ++i) {
      const double t = 1.5 * std::numbers::pi * (1.0 + 2.0 * rng.uniform());
      out(i, 0) = (t * std::cos(t) + rng.normal() * noise) / 5.0;
      out(i, 1) = (t * std::sin(t) + rng.normal() * noise) / 5.0;
    }
  } else if (name == "line") {
    const double noise = detail::pick(spec.noise, 0.1);
    for (int i = 0; i < n; ++i) {
      const double x = rng.uniform() * 5.0 - 2.5;
      out(i, 0) = x + rng.normal() * noise;
      out(i, 1) = x + rng.normal() * noise;
    }
  } else if (name == "moons") {
    const double noise = detail::pick(spec.noise, 0.1);
    for (int i = 0; i < n; ++i) {
      const double a = rng.uniform() * std::numbers::pi;
      double x, y;
      if (i % 2 == 0) {
        x = std::cos(a);
        y = std::sin(a);
      } else {
        x = 1.0 - std::cos(a);
        y = 0.5 - std::sin(a);
      }
      out(i, 0) = x + rng.normal() * noise;
      out(i, 1) = y + rng.normal() * noise;
    }
  } else if (name == "Multiring") {
    const double noise = detail::pick(spec.noise, 0.1);
    static constexpr std::array<double, 3> radii = {1.0, 2.0, 3.0};
    for (int i = 0; i < n; ++i) {
      const double r = radii[static_cast<std::size_t>(rng.uniform_index(3))] + rng.normal() * noise;
      const double a = rng.uniform() * 2.0 * std::numbers::pi;
      out(i, 0) = r * std::cos(a);
      out(i, 1) = r * std::sin(a);
    }
  } else if (name == "pinwheel") {
    const double radial_std = 0.3;
    const double tangential_std = detail::pick(spec.noise, 0.1);
    const double rate = 0.25;
    for (int i = 0; i < n; ++i) {
      const auto blade = static_cast<double>(rng.uniform_index(5));
      const double f1 = 1.0 + radial_std * rng.normal();
      const double f2 = tangential_std * rng.normal();
      const double a = blade * 2.0 * std::numbers::pi / 5.0 + rate * std::exp(f1);
      out(i, 0) = 2.0 * (f1 * std::cos(a) - f2 * std::sin(a));
      out(i, 1) = 2.0 * (f1 * std::sin(a) + f2 * std::cos(a));
    }
  } else if (name == "Ring") {
    const double noise = detail::pick(spec.noise, 0.05);
    for (int i = 0; i < n; ++i) {
      const double r = 1.0 + rng.normal() * noise;
      const double a = rng.uniform() * 2.0 * std::numbers::pi;
      out(i, 0) = r * std::cos(a);
      out(i, 1) = r * std::sin(a);
    }
  } else if (name == "Spiral") {
    const double noise = detail::pick(spec.noise, 0.05);
    for (int i = 0; i < n; ++i) {
      const double t = std::sqrt(rng.uniform()) * 3.0 * std::numbers::pi;
      const double r = 2.5 * t / (3.0 * std::numbers::pi);
      out(i, 0) = r * std::cos(t) + rng.normal() * noise;
      out(i, 1) = r * std::sin(t) + rng.normal() * noise;
    }
  } else if (name == "Uniform") {
    for (int i = 0; i < n; ++i) {
      out(i, 0) = rng.uniform() * 2.0 - 1.0;
      out(i, 1) = rng.uniform() * 2.0 - 1.0;
    }
  } else if (name == "diag_gaussian") {
    const int d = spec.d;
    require(d >= 1, "diag_gaussian: d must be >= 1");
    Vec mu = spec.mu.size() == 0 ? Vec::Zero(d) : spec.mu;
    Vec sigma = spec.sigma.size() == 0 ? Vec::Ones(d) : spec.sigma;
    require(mu.size() == d && sigma.size() == d, "diag_gaussian: mu/sigma size mismatch");
    out.resize(n, d);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < d; ++j) out(i, j) = mu(j) + sigma(j) * rng.normal();
    }
  } else {
    throw ConfigError("unknown dataset: " + name);
  }
  return out;
}

// Held-out draws always come from a seed stream disjoint from training.
inline std::uint64_t heldout_seed(std::uint64_t train_seed) {
  return train_seed ^ 0x48454C444F555400ULL;
}

// ---------------------------------------------------------------------------
// CSV round trip at full double precision.

inline void save_csv(const Mat& m, const std::string& path, bool header = false) {
  std::ofstream out(path);
  if (!out) throw ConfigError("save_csv: cannot open " + path);
  if (header) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? ",x" : "x") << j;
    out << "\n";
  }
  char buf[64];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
      if (j) out << ',';
      out << buf;
    }
    out << "\n";
  }
}

inline Mat load_csv(const std::string& path, bool header = false) {
  std::ifstream in(path);
  if (!in) throw ConfigError("load_csv: cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (header && line_no == 1) continue;
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      std::size_t next = line.find(',', pos);
      if (next == std::string::npos) next = line.size();
      const std::string tok = line.substr(pos, next - pos);
      char* end = nullptr;
      const double v = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || (end && *end != '\0' && !std::isspace(*end))) {
        throw ConfigError("load_csv: malformed value '" + tok + "' at line " +
                          std::to_string(line_no));
      }
      row.push_back(v);
      pos = next + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ConfigError("load_csv: ragged row at line " + std::to_string(line_no));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) return Mat(0, 0);
  Mat m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  return m;
}

}  // namespace ade
