#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace ade {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// A computed quantity left the finite range (overflow, nan).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An operation was invoked outside its contract (shape mismatch, bad mode).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Malformed configuration, checkpoint, or input file.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A sampler trajectory diverged; carries the step at which it happened.
class DivergenceError : public NumericError {
 public:
  DivergenceError(const std::string& what, int step_index)
      : NumericError(what + " (step " + std::to_string(step_index) + ")"),
        step_index_(step_index) {}
  int step_index() const { return step_index_; }

 private:
  int step_index_;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ContractViolation(msg);
}

// Index of the first row containing a non-finite entry, or -1.
inline Eigen::Index first_nonfinite_row(const Mat& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (!m.row(i).allFinite()) return i;
  }
  return -1;
}

}  // namespace ade
