#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ade/rng.hpp"
#include "ade/tape.hpp"

namespace ade {

enum class Activation { kRelu, kSoftplus, kTanh };

inline Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "softplus") return Activation::kSoftplus;
  if (s == "tanh") return Activation::kTanh;
  throw ConfigError("unknown activation: " + s);
}

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kSoftplus: return "softplus";
    case Activation::kTanh: return "tanh";
  }
  return "?";
}

// Named reference to parameter storage owned by a model object.
struct NamedParam {
  std::string name;
  Mat* value;
};

// Scalar potential f(x) evaluated batch-wise: (n x d) -> (n x 1).
class Potential {
 public:
  virtual ~Potential() = default;
  virtual int dim() const = 0;
  virtual std::string kind() const = 0;
  virtual std::vector<NamedParam> parameters() = 0;
  // Emit f(x) on the tape given parameter nodes in parameters() order.
  virtual Var emit(Tape& tape, std::span<const Var> params, Var x) const = 0;
  virtual Activation activation() const { return Activation::kSoftplus; }
};

// A potential with its parameters materialized as leaves on one tape.
class BoundPotential {
 public:
  BoundPotential(Potential& p, Tape& tape) : pot_(&p), tape_(&tape) {
    for (const auto& np : p.parameters()) {
      names_.push_back(np.name);
      leaves_.push_back(tape.leaf(*np.value));
    }
  }

  Var operator()(Var x) const { return pot_->emit(*tape_, leaves_, x); }

  // f(x) with divergence checks: every row must stay finite.
  Var checked(Var x) const {
    Var f = (*this)(x);
    Eigen::Index bad = first_nonfinite_row(f.value());
    if (bad >= 0) {
      throw NumericError("potential value overflowed at batch row " + std::to_string(bad));
    }
    return f;
  }

  Tape& tape() const { return *tape_; }
  Potential& potential() const { return *pot_; }
  std::span<const Var> param_vars() const { return leaves_; }
  const std::vector<std::string>& param_names() const { return names_; }

 private:
  Potential* pot_;
  Tape* tape_;
  std::vector<Var> leaves_;
  std::vector<std::string> names_;
};

// Fully connected scalar-output network. Hidden widths default to the
// 3 x 128 layout used throughout the experiments.
class MlpPotential : public Potential {
 public:
  MlpPotential(int dim, std::vector<int> hidden, Activation act, Rng& rng)
      : dim_(dim), act_(act) {
    std::vector<int> widths;
    widths.push_back(dim);
    for (int h : hidden) widths.push_back(h);
    widths.push_back(1);
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
      const int fan_in = widths[i];
      const int fan_out = widths[i + 1];
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      weights_.push_back(rng.uniform_mat(fan_in, fan_out, -bound, bound));
      biases_.push_back(Mat::Zero(1, fan_out));
    }
  }

  int dim() const override { return dim_; }
  std::string kind() const override { return "mlp"; }
  Activation activation() const override { return act_; }

  int layer_count() const { return static_cast<int>(weights_.size()); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      n += static_cast<std::size_t>(weights_[i].size() + biases_[i].size());
    }
    return n;
  }

  std::vector<NamedParam> parameters() override {
    std::vector<NamedParam> out;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      out.push_back({"layer" + std::to_string(i) + ".weight", &weights_[i]});
      out.push_back({"layer" + std::to_string(i) + ".bias", &biases_[i]});
    }
    return out;
  }

  Var emit(Tape& t, std::span<const Var> params, Var x) const override {
    require(x.cols() == dim_, "mlp: input width mismatch");
    Var h = x;
    const std::size_t layers = weights_.size();
    for (std::size_t i = 0; i < layers; ++i) {
      h = t.add_row(t.matmul(h, params[2 * i]), params[2 * i + 1]);
      if (i + 1 < layers) {
        switch (act_) {
          case Activation::kRelu: h = t.relu(h); break;
          case Activation::kSoftplus: h = t.softplus(h); break;
          case Activation::kTanh: h = t.tanh(h); break;
        }
      }
    }
    return h;
  }

 private:
  int dim_;
  Activation act_;
  std::vector<Mat> weights_;
  std::vector<Mat> biases_;
};

// f(x) = -1/2 sum_i prec_i (x_i - mu_i)^2, precision kept positive via log.
class QuadraticPotential : public Potential {
 public:
  QuadraticPotential(Vec mu, Vec prec)
      : mu_(mu.transpose()), log_prec_(prec.array().log().matrix().transpose()) {
    require((prec.array() > 0.0).all(), "quadratic: precision must be positive");
  }
  explicit QuadraticPotential(int dim)
      : mu_(Mat::Zero(1, dim)), log_prec_(Mat::Zero(1, dim)) {}

  int dim() const override { return static_cast<int>(mu_.cols()); }
  std::string kind() const override { return "quadratic"; }

  Vec mean() const { return mu_.row(0).transpose(); }
  Vec precision() const { return log_prec_.row(0).array().exp().transpose(); }

  std::vector<NamedParam> parameters() override {
    return {{"quadratic.mu", &mu_}, {"quadratic.log_prec", &log_prec_}};
  }

  Var emit(Tape& t, std::span<const Var> params, Var x) const override {
    require(x.cols() == mu_.cols(), "quadratic: input width mismatch");
    Var diff = t.add_row(x, t.neg(params[0]));
    Var weighted = t.mul_row(t.square(diff), t.exp(params[1]));
    return t.scale(t.row_sum(weighted), -0.5);
  }

 private:
  Mat mu_;        // 1 x d
  Mat log_prec_;  // 1 x d
};

// f(x) per row; fails if any row overflows.
inline Vec eval_f(Potential& pot, const Mat& x) {
  require(x.allFinite(), "eval_f: input must be finite");
  Tape tape;
  BoundPotential f(pot, tape);
  return f.checked(tape.constant(x)).value().col(0);
}

// Per-row input gradient of f as a tape node; x stays differentiable, so the
// result participates in any later backward pass (second-order support).
inline Var grad_x_var(const BoundPotential& f, Var x) {
  Tape& t = f.tape();
  Var total = t.sum_all(f(x));
  return t.gradient(total, x);
}

inline Mat grad_x(Potential& pot, const Mat& x) {
  Tape tape;
  BoundPotential f(pot, tape);
  Var xv = tape.leaf(x);
  Mat g = grad_x_var(f, xv).value();
  if (!g.allFinite()) throw NumericError("grad_x: non-finite gradient");
  return g;
}

// Diagonal of the input Hessian, one grad-of-grad pass per coordinate.
inline Var hessian_diag_var(const BoundPotential& f, Var x) {
  if (f.potential().kind() == "mlp" && f.potential().activation() == Activation::kRelu) {
    throw ContractViolation(
        "hessian_diag: relu is unsupported (second derivative vanishes a.e.)");
  }
  Tape& t = f.tape();
  const int d = static_cast<int>(x.cols());
  Var g = grad_x_var(f, x);
  Var out{};
  for (int i = 0; i < d; ++i) {
    Var gi = t.sum_all(t.slice_cols(g, i, 1));
    Var hrow = t.gradient(gi, x);
    Var hii = t.slice_cols(hrow, i, 1);
    out = (i == 0) ? hii : t.concat_cols(out, hii);
  }
  return out;
}

inline Mat hessian_diag(Potential& pot, const Mat& x) {
  Tape tape;
  BoundPotential f(pot, tape);
  return hessian_diag_var(f, tape.leaf(x)).value();
}

// Gradients of a scalar loss with respect to every bound parameter.
inline std::vector<Mat> grad_params(const BoundPotential& f, Var loss) {
  auto vars = f.tape().gradients(loss, f.param_vars());
  std::vector<Mat> out;
  out.reserve(vars.size());
  for (Var v : vars) out.push_back(v.value());
  return out;
}

}  // namespace ade
