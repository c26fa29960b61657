#pragma once

#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "ade/dynamics.hpp"
#include "ade/potential.hpp"

namespace ade {

inline constexpr double kLog2Pi = 1.8378770664093454836;  // log(2 pi)

// Initial joint distribution q0(x, v) with exact sampling and log-density.
// Momentum is an independent Gaussian with the scale the caller derives from
// the kinetic coefficient (lambda^{-1/2} times the momentum_std knob).
class InitialDistribution {
 public:
  struct Sample {
    PhaseState state;
    std::vector<Var> param_vars;  // bound leaves, parameters() order
    Var entropy_x;                // 1 x 1: entropy of the x marginal
    double entropy_v = 0.0;       // constant entropy of the momentum part
  };

  virtual ~InitialDistribution() = default;
  virtual int dim() const = 0;
  virtual std::string kind() const = 0;
  virtual std::vector<NamedParam> parameters() { return {}; }
  virtual Sample sample(Tape& t, int n, double momentum_scale, bool with_momentum, Rng& rng) = 0;

  // Entropy of the x marginal: analytic where available, otherwise a
  // Monte-Carlo estimate over n_mc fresh draws.
  virtual double entropy(int n_mc, Rng& rng) = 0;

 protected:
  // Gaussian momentum shared by every initializer.
  static void attach_momentum(Tape& t, int n, int d, double scale, bool with_momentum,
                              Rng& rng, Sample& s) {
    if (!with_momentum) {
      s.state.v = Var{};
      return;
    }
    require(scale > 0.0, "init: momentum scale must be positive");
    Mat eps = rng.normal_mat(n, d);
    s.state.v = t.constant(eps * scale);
    Vec lq(n);
    const double base = -0.5 * d * kLog2Pi - d * std::log(scale);
    for (int i = 0; i < n; ++i) lq(i) = base - 0.5 * eps.row(i).squaredNorm();
    s.state.log_q = t.add(s.state.log_q, t.constant(lq));
    s.entropy_v = d * (0.5 * (kLog2Pi + 1.0) + std::log(scale));
  }
};

// Diagonal Gaussian over x with learnable mean and log standard deviation.
class DiagonalGaussianInit : public InitialDistribution {
 public:
  DiagonalGaussianInit(int dim, Vec mean, Vec log_std)
      : dim_(dim), mean_(mean.transpose()), log_std_(log_std.transpose()) {}
  explicit DiagonalGaussianInit(int dim)
      : dim_(dim), mean_(Mat::Zero(1, dim)), log_std_(Mat::Zero(1, dim)) {}

  int dim() const override { return dim_; }
  std::string kind() const override { return "gaussian"; }

  std::vector<NamedParam> parameters() override {
    return {{"init.mean", &mean_}, {"init.log_std", &log_std_}};
  }

  Sample sample(Tape& t, int n, double momentum_scale, bool with_momentum, Rng& rng) override {
    require(n >= 1, "init: need at least one draw");
    Sample s;
    Var mean = t.leaf(mean_);
    Var log_std = t.leaf(log_std_);
    s.param_vars = {mean, log_std};

    Mat eps = rng.normal_mat(n, dim_);
    Var eps_c = t.constant(eps);
    s.state.x = t.add_row(t.mul_row(eps_c, t.exp(log_std)), mean);

    // log q(x) = -sum log sigma - |eps|^2/2 - d/2 log 2 pi, reparametrized
    Vec fixed(n);
    for (int i = 0; i < n; ++i) fixed(i) = -0.5 * eps.row(i).squaredNorm() - 0.5 * dim_ * kLog2Pi;
    s.state.log_q = t.add(t.broadcast_all(t.neg(t.sum_all(log_std)), n, 1), t.constant(fixed));
    s.state.kinetic = t.constant(Mat::Zero(n, 1));

    // analytic entropy, differentiable in log_std
    s.entropy_x = t.add_scalar(t.sum_all(log_std), 0.5 * dim_ * (kLog2Pi + 1.0));

    attach_momentum(t, n, dim_, momentum_scale, with_momentum, rng, s);
    return s;
  }

  double entropy(int, Rng&) override {
    return log_std_.sum() + 0.5 * dim_ * (kLog2Pi + 1.0);
  }

 private:
  int dim_;
  Mat mean_;
  Mat log_std_;
};

// Stack of planar flow layers z' = z + u_hat tanh(w z + b) over a standard
// Gaussian base. The u -> u_hat reparametrization keeps every layer
// invertible, so per-sample log-densities are exact.
class PlanarFlowStack : public InitialDistribution {
 public:
  PlanarFlowStack(int dim, int layers, Rng& rng) : dim_(dim) {
    for (int k = 0; k < layers; ++k) {
      us_.push_back(rng.normal_mat(1, dim) * 0.01);
      ws_.push_back(rng.normal_mat(1, dim) * 0.01);
      bs_.push_back(Mat::Zero(1, 1));
    }
  }

  int dim() const override { return dim_; }
  std::string kind() const override { return "planar"; }
  int layers() const { return static_cast<int>(us_.size()); }

  std::vector<NamedParam> parameters() override {
    std::vector<NamedParam> out;
    for (std::size_t k = 0; k < us_.size(); ++k) {
      const std::string p = "init.flow" + std::to_string(k);
      out.push_back({p + ".u", &us_[k]});
      out.push_back({p + ".w", &ws_[k]});
      out.push_back({p + ".b", &bs_[k]});
    }
    return out;
  }

  Sample sample(Tape& t, int n, double momentum_scale, bool with_momentum, Rng& rng) override {
    require(n >= 1, "init: need at least one draw");
    Sample s;
    Mat eps = rng.normal_mat(n, dim_);
    Var z = t.constant(eps);
    Vec base(n);
    for (int i = 0; i < n; ++i) base(i) = -0.5 * eps.row(i).squaredNorm() - 0.5 * dim_ * kLog2Pi;
    Var log_q = t.constant(base);

    for (std::size_t k = 0; k < us_.size(); ++k) {
      Var u = t.leaf(us_[k]);
      Var w = t.leaf(ws_[k]);
      Var b = t.leaf(bs_[k]);
      s.param_vars.push_back(u);
      s.param_vars.push_back(w);
      s.param_vars.push_back(b);

      // u_hat = u + (m(w u) - w u) w / |w|^2 with m(a) = softplus(a + c0) - 1
      // and c0 = log(e - 1): m stays above -1 (so w u_hat > -1, invertible)
      // and m(0) = 0, so a zero layer is exactly the identity
      static const double c0 = std::log(std::numbers::e - 1.0);
      Var wu = t.matmul(u, t.transpose(w));
      Var m_wu = t.add_scalar(t.softplus(t.add_scalar(wu, c0)), -1.0);
      Var coeff = t.div(t.sub(m_wu, wu), t.sum_all(t.square(w)));
      Var u_hat = t.add(u, t.matmul(coeff, w));

      Var a = t.add(t.matmul(z, t.transpose(w)), t.broadcast_all(b, n, 1));
      Var h = t.tanh(a);
      z = t.add(z, t.matmul(h, u_hat));

      Var h_prime = t.add_scalar(t.neg(t.square(h)), 1.0);
      Var uhw = t.matmul(u_hat, t.transpose(w));
      Var inner = t.add_scalar(t.mul(h_prime, t.broadcast_all(uhw, n, 1)), 1.0);
      log_q = t.sub(log_q, t.log(inner));
    }

    s.state.x = z;
    s.state.log_q = log_q;
    s.state.kinetic = t.constant(Mat::Zero(n, 1));
    s.entropy_x = t.neg(t.mean_all(log_q));
    attach_momentum(t, n, dim_, momentum_scale, with_momentum, rng, s);
    return s;
  }

  double entropy(int n_mc, Rng& rng) override {
    Tape t;
    Rng local = rng.split(0x9e11);
    Sample s = sample(t, n_mc, 1.0, false, local);
    return s.entropy_x.value()(0, 0);
  }

 private:
  int dim_;
  std::vector<Mat> us_, ws_, bs_;
};

// Nonparametric initializer: x drawn from the rows of a dataset, Gaussian
// momentum. Its x-density is treated as a constant, which drops the entropy
// term from the training objective.
class EmpiricalInit : public InitialDistribution {
 public:
  explicit EmpiricalInit(Mat dataset) : data_(std::move(dataset)) {}

  int dim() const override { return static_cast<int>(data_.cols()); }
  std::string kind() const override { return "empirical"; }
  const Mat& dataset() const { return data_; }

  Sample sample(Tape& t, int n, double momentum_scale, bool with_momentum, Rng& rng) override {
    require(data_.rows() > 0, "empirical init: dataset is empty");
    require(n >= 1, "init: need at least one draw");
    Sample s;
    Mat x(n, data_.cols());
    if (n == data_.rows()) {
      // full-size draw: take each row exactly once (the exact empirical law)
      x = data_;
    } else {
      for (int i = 0; i < n; ++i) x.row(i) = data_.row(rng.uniform_index(data_.rows()));
    }
    s.state.x = t.constant(x);
    s.state.log_q = t.constant(Mat::Zero(n, 1));
    s.state.kinetic = t.constant(Mat::Zero(n, 1));
    s.entropy_x = t.constant(Mat::Zero(1, 1));
    attach_momentum(t, n, dim(), momentum_scale, with_momentum, rng, s);
    return s;
  }

  double entropy(int, Rng&) override { return 0.0; }

 private:
  Mat data_;
};

// Op-level draw: n states with log_q filled, returned by value.
struct DrawnStates {
  Mat x, v;
  Vec log_q;
};

inline DrawnStates draw_states(InitialDistribution& init, int n, double momentum_scale,
                               Rng& rng) {
  Tape t;
  auto s = init.sample(t, n, momentum_scale, true, rng);
  return {s.state.x.value(), s.state.v.value(), s.state.log_q.value().col(0)};
}

}  // namespace ade
