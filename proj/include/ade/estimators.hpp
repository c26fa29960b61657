#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ade/init.hpp"
#include "ade/optimizer.hpp"

namespace ade {

enum class GradMode { kBptt, kTruncated };

inline GradMode grad_mode_from_string(const std::string& s) {
  if (s == "bptt") return GradMode::kBptt;
  if (s == "truncated") return GradMode::kTruncated;
  throw ConfigError("unknown gradient mode: " + s);
}

struct AdeConfig {
  GradMode gradient_mode = GradMode::kBptt;
  double lambda = 1.0;
  double entropy_coeff = 1.0;
  double momentum_penalty = 1.0;
  double momentum_std = 1.0;   // multiplier on the lambda^{-1/2} momentum scale
  double grad_penalty = 0.0;   // optional |grad f(data)|^2 regularizer, off by default
  int inner_steps = 1;
};

// One recorded evaluation of the adversarial objective: the tape, the bound
// parameters, the full loss, and the sampler-detached loss used by the
// truncated gradient.
struct AdeTrace {
  std::unique_ptr<Tape> tape;
  std::unique_ptr<BoundPotential> f;
  Var loss;
  Var loss_truncated;
  std::vector<Var> theta_vars;
  std::vector<std::string> theta_names;
  PhaseState final_state;
  double mean_f_data = 0.0;
  double mean_f_model = 0.0;
  double entropy_term = 0.0;
};

// l(f, Theta) = E_D[f] - E_q0[f(x_T) - penalty * (lambda/2) |v_T|^2]
//             + entropy_coeff * (E[log q corrections] - H(q0)).
// Langevin stacks sum the per-step momentum energies instead of the final
// one; the correction term carries the Theorem-4 density updates emitted by
// generalized and (det-)Langevin layers.
inline AdeTrace ade_loss(const Mat& batch, Potential& pot, InitialDistribution& init,
                         DynamicsStack& dyn, const AdeConfig& cfg, Rng& rng) {
  require(batch.rows() >= 1, "ade_loss: batch must be nonempty");
  require(cfg.lambda > 0.0, "ade_loss: lambda must be positive");
  require(cfg.entropy_coeff >= 0.0, "ade_loss: entropy coefficient must be nonnegative");

  AdeTrace tr;
  tr.tape = std::make_unique<Tape>();
  Tape& t = *tr.tape;
  tr.f = std::make_unique<BoundPotential>(pot, t);
  const int n = static_cast<int>(batch.rows());

  const double momentum_scale = cfg.momentum_std / std::sqrt(cfg.lambda);
  auto s0 = init.sample(t, n, momentum_scale, !dyn.momentumless(), rng);
  auto bound = dyn.bind(t);
  PhaseState sT = dyn.unroll(bound, *tr.f, s0.state, cfg.lambda, rng);
  tr.final_state = sT;

  auto init_params = init.parameters();
  for (std::size_t i = 0; i < s0.param_vars.size(); ++i) {
    tr.theta_vars.push_back(s0.param_vars[i]);
    tr.theta_names.push_back(init_params[i].name);
  }
  auto dyn_vars = dyn.bound_param_vars(bound);
  auto dyn_params = dyn.parameters();
  for (std::size_t i = 0; i < dyn_vars.size(); ++i) {
    tr.theta_vars.push_back(dyn_vars[i]);
    tr.theta_names.push_back(dyn_params[i].name);
  }

  Var mean_f_data = t.mean_all(tr.f->checked(t.constant(batch)));
  Var mean_f_model = t.mean_all(tr.f->checked(sT.x));

  Var kinetic;
  if (dyn.momentumless()) {
    kinetic = t.constant(Mat::Zero(1, 1));
  } else if (dyn.multi_momentum()) {
    kinetic = t.mean_all(sT.kinetic);
  } else {
    kinetic = t.scale(t.mean_all(t.row_sum(t.square(sT.v))), 0.5 * cfg.lambda);
  }

  Var corrections = t.mean_all(t.sub(sT.log_q, s0.state.log_q));
  Var entropy = t.add_scalar(s0.entropy_x, s0.entropy_v);

  Var loss = t.add(t.sub(mean_f_data, mean_f_model), t.scale(kinetic, cfg.momentum_penalty));
  loss = t.add(loss, t.scale(t.sub(corrections, entropy), cfg.entropy_coeff));

  Var loss_trunc = t.sub(mean_f_data, t.mean_all(tr.f->checked(t.constant(sT.x.value()))));

  if (cfg.grad_penalty > 0.0) {
    Var gd = grad_x_var(*tr.f, t.constant(batch));
    Var penalty = t.scale(t.mean_all(t.row_sum(t.square(gd))), cfg.grad_penalty);
    loss = t.sub(loss, penalty);
    loss_trunc = t.sub(loss_trunc, penalty);
  }

  tr.loss = loss;
  tr.loss_truncated = loss_trunc;
  tr.mean_f_data = mean_f_data.value()(0, 0);
  tr.mean_f_model = mean_f_model.value()(0, 0);
  tr.entropy_term = entropy.value()(0, 0);
  if (!std::isfinite(tr.loss.value()(0, 0))) {
    throw DivergenceError("ade_loss: objective is not finite", sT.step_index);
  }
  return tr;
}

// Gradient for the potential. BPTT differentiates the full objective,
// including the path through the sampler draws; the truncated (Danskin) mode
// treats the final samples as constants and keeps only the two direct terms.
inline std::vector<Mat> ade_grad_f(AdeTrace& tr, GradMode mode) {
  Var target = mode == GradMode::kBptt ? tr.loss : tr.loss_truncated;
  return grad_params(*tr.f, target);
}

// Gradient for the sampler parameters (init and dynamics); always BPTT.
inline std::vector<Mat> ade_grad_sampler(AdeTrace& tr) {
  auto vars = tr.tape->gradients(tr.loss, tr.theta_vars);
  std::vector<Mat> out;
  out.reserve(vars.size());
  for (Var v : vars) out.push_back(v.value());
  return out;
}

// Both gradients in one reverse sweep (BPTT) or two (truncated).
inline void ade_grads(AdeTrace& tr, GradMode mode, std::vector<Mat>& f_out,
                      std::vector<Mat>& theta_out) {
  Tape& t = *tr.tape;
  auto f_vars = tr.f->param_vars();
  if (mode == GradMode::kBptt) {
    std::vector<Var> wrt(f_vars.begin(), f_vars.end());
    wrt.insert(wrt.end(), tr.theta_vars.begin(), tr.theta_vars.end());
    auto grads = t.gradients(tr.loss, wrt);
    f_out.clear();
    theta_out.clear();
    for (std::size_t i = 0; i < f_vars.size(); ++i) f_out.push_back(grads[i].value());
    for (std::size_t i = f_vars.size(); i < grads.size(); ++i) theta_out.push_back(grads[i].value());
  } else {
    f_out = ade_grad_f(tr, GradMode::kTruncated);
    theta_out = ade_grad_sampler(tr);
  }
}

// ---------------------------------------------------------------------------
// Contrastive divergence and friends.

struct CdConfig {
  int steps = 15;
  double eta = 0.1;
  double grad_clip = 10.0;
  double v_clip = 0.0;
  bool mh = false;  // Metropolis correction of the whole trajectory
};

namespace detail {

// Negative-phase chains: momentum refresh, k leapfrog steps from the starts,
// optional MH correction. Shares the embedding code path so that the ADE
// degenerate configuration reproduces it bit for bit.
inline Mat cd_negative_samples(BoundPotential& f, const Mat& starts, const CdConfig& cfg,
                               Rng& rng) {
  Tape& t = f.tape();
  require(cfg.steps >= 1, "cd: need at least one step");
  EmpiricalInit starts_init(starts);
  const int n = static_cast<int>(starts.rows());
  auto s0 = starts_init.sample(t, n, 1.0, true, rng);

  DynamicsOptions opt;
  opt.steps = cfg.steps;
  opt.eta0 = cfg.eta;
  opt.grad_clip = cfg.grad_clip;
  opt.v_clip = cfg.v_clip;
  Rng stack_rng = rng.split(0xcd);
  DynamicsStack stack(DynamicsKind::kLeapfrog, static_cast<int>(starts.cols()), opt, stack_rng);
  auto bound = stack.bind(t);
  PhaseState sT = stack.unroll(bound, f, s0.state, 1.0, rng);

  Mat negatives = sT.x.value();
  if (cfg.mh) {
    const Mat& x0 = s0.state.x.value();
    const Mat& v0 = s0.state.v.value();
    const Mat& vT = sT.v.value();
    Vec h0 = hamiltonian_values(f.potential(), x0, v0, 1.0);
    Vec h1 = hamiltonian_values(f.potential(), negatives, vT, 1.0);
    for (int i = 0; i < n; ++i) {
      const double accept = std::exp(std::min(0.0, h0(i) - h1(i)));
      if (rng.uniform() >= accept) negatives.row(i) = x0.row(i);
    }
  }
  return negatives;
}

}  // namespace detail

// Two-term CD-k gradient: E_D[grad f] - E_neg[grad f], negatives from k
// leapfrog steps started at the data batch.
inline std::vector<Mat> cd_grad(const Mat& batch, Potential& pot, const CdConfig& cfg,
                                Rng& rng) {
  Tape t;
  BoundPotential f(pot, t);
  Mat negatives = detail::cd_negative_samples(f, batch, cfg, rng);
  Var loss = t.sub(t.mean_all(f(t.constant(batch))), t.mean_all(f(t.constant(negatives))));
  return grad_params(f, loss);
}

// Uniform-replacement reservoir of sampler outputs for persistent chains.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(int capacity) : capacity_(capacity) {
    require(capacity >= 1, "replay buffer: capacity must be positive");
  }

  int size() const { return static_cast<int>(rows_.rows()); }
  int capacity() const { return capacity_; }
  bool empty() const { return rows_.rows() == 0; }

  void push(const Mat& batch, Rng& rng) {
    for (Eigen::Index i = 0; i < batch.rows(); ++i) {
      if (rows_.rows() < capacity_) {
        rows_.conservativeResize(rows_.rows() + 1, batch.cols());
        rows_.row(rows_.rows() - 1) = batch.row(i);
      } else {
        rows_.row(rng.uniform_index(capacity_)) = batch.row(i);
      }
    }
  }

  Mat draw(int n, Rng& rng) const {
    require(!empty(), "replay buffer: draw from empty buffer");
    if (n == rows_.rows()) return rows_;
    Mat out(n, rows_.cols());
    for (int i = 0; i < n; ++i) out.row(i) = rows_.row(rng.uniform_index(rows_.rows()));
    return out;
  }

 private:
  int capacity_;
  Mat rows_;
};

// Persistent CD: chains start from the buffer (seeded from data when cold)
// and their endpoints are written back.
inline std::vector<Mat> pcd_grad(const Mat& batch, Potential& pot, const CdConfig& cfg,
                                 ReplayBuffer& buffer, Rng& rng) {
  if (buffer.empty()) buffer.push(batch, rng);
  Mat starts = buffer.draw(static_cast<int>(batch.rows()), rng);
  Tape t;
  BoundPotential f(pot, t);
  Mat negatives = detail::cd_negative_samples(f, starts, cfg, rng);
  buffer.push(negatives, rng);
  Var loss = t.sub(t.mean_all(f(t.constant(batch))), t.mean_all(f(t.constant(negatives))));
  return grad_params(f, loss);
}

// ---------------------------------------------------------------------------
// Score matching.

// L_SM(f) = -E_D[ sum_i ( (d_i f)^2 / 2 + d_i^2 f ) ], maximized in training.
inline Var sm_loss_var(const BoundPotential& f, Var x) {
  if (f.potential().kind() == "mlp" && f.potential().activation() == Activation::kRelu) {
    throw ContractViolation("sm_loss: relu potential is unsupported (vanishing curvature)");
  }
  Tape& t = f.tape();
  const int d = static_cast<int>(x.cols());
  Var g = grad_x_var(f, x);
  Var per_row = t.scale(t.row_sum(t.square(g)), 0.5);
  for (int i = 0; i < d; ++i) {
    Var gi = t.sum_all(t.slice_cols(g, i, 1));
    Var hrow = t.gradient(gi, x);
    per_row = t.add(per_row, t.slice_cols(hrow, i, 1));
  }
  return t.neg(t.mean_all(per_row));
}

inline double sm_loss(const Mat& batch, Potential& pot) {
  Tape t;
  BoundPotential f(pot, t);
  return sm_loss_var(f, t.leaf(batch)).value()(0, 0);
}

// ---------------------------------------------------------------------------
// Noise-contrastive estimation.

// Diagonal Gaussian fitted to data moments; full support by construction.
struct NoiseModel {
  Vec mean;
  Vec std;

  static NoiseModel fit(const Mat& data, double scale = 1.0) {
    require(data.rows() >= 2, "noise model: need at least two rows");
    NoiseModel nm;
    nm.mean = data.colwise().mean().transpose();
    nm.std = Vec(data.cols());
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
      const double var =
          (data.col(j).array() - nm.mean(j)).square().sum() / static_cast<double>(data.rows() - 1);
      nm.std(j) = scale * std::sqrt(std::max(var, 1e-12));
    }
    return nm;
  }

  Vec log_density_rows(const Mat& x) const {
    Vec out(x.rows());
    const double base = -0.5 * x.cols() * kLog2Pi - std.array().log().sum();
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      out(i) = base - 0.5 * ((x.row(i).transpose() - mean).array() / std.array()).square().sum();
    }
    return out;
  }

  Mat sample(int n, Rng& rng) const {
    Mat out = rng.normal_mat(n, mean.size());
    for (Eigen::Index j = 0; j < mean.size(); ++j) {
      out.col(j) = out.col(j) * std(j) + Vec::Constant(n, mean(j));
    }
    return out;
  }
};

// L_NCE = E_D[log h] + E_n[log(1 - h)], h = sigmoid(f - log p_n). The two
// softplus forms keep exp(f) out of the picture entirely.
inline Var nce_loss_var(const BoundPotential& f, const Mat& data, const NoiseModel& noise,
                        const Mat& noise_draws) {
  Tape& t = f.tape();
  require(noise.log_density_rows(data).allFinite(), "nce: noise density must be finite on data");
  Var f_d = f(t.constant(data));
  Var lp_d = t.constant(noise.log_density_rows(data));
  Var pos = t.neg(t.mean_all(t.softplus(t.sub(lp_d, f_d))));
  Var f_n = f(t.constant(noise_draws));
  Var lp_n = t.constant(noise.log_density_rows(noise_draws));
  Var neg = t.neg(t.mean_all(t.softplus(t.sub(f_n, lp_n))));
  return t.add(pos, neg);
}

inline double nce_loss(const Mat& data, Potential& pot, const NoiseModel& noise, Rng& rng) {
  Tape t;
  BoundPotential f(pot, t);
  Mat draws = noise.sample(static_cast<int>(data.rows()), rng);
  return nce_loss_var(f, data, noise, draws).value()(0, 0);
}

// ---------------------------------------------------------------------------
// Minimum probability flow.

struct MpfConfig {
  double eta = 0.1;
  double grad_clip = 10.0;
  double exp_clamp = 20.0;
};

// L_MPF = -E_{x ~ D, x' ~ T_f(.|x)} exp((f(x') - f(x)) / 2) with a symmetric
// one-leapfrog HMC proposal (fresh Gaussian momentum). Gradients flow through
// the proposal on the tape.
inline Var mpf_loss_var(const BoundPotential& f, const Mat& data, const MpfConfig& cfg,
                        Rng& rng) {
  Tape& t = f.tape();
  const int n = static_cast<int>(data.rows());
  const int d = static_cast<int>(data.cols());
  PhaseState s;
  s.x = t.constant(data);
  s.v = t.constant(rng.normal_mat(n, d));
  s.log_q = t.constant(Mat::Zero(n, 1));
  s.kinetic = t.constant(Mat::Zero(n, 1));
  BoundLeapfrog c{t.constant(Mat::Constant(1, d, cfg.eta)), cfg.grad_clip, 0.0};
  PhaseState s1 = leapfrog_step(f, s, c);
  Var diff = t.scale(t.sub(f(s1.x), f(s.x)), 0.5);
  Var clamped = t.clip(diff, cfg.exp_clamp);
  return t.neg(t.mean_all(t.exp(clamped)));
}

inline double mpf_loss(const Mat& data, Potential& pot, const MpfConfig& cfg, Rng& rng) {
  Tape t;
  BoundPotential f(pot, t);
  return mpf_loss_var(f, data, cfg, rng).value()(0, 0);
}

}  // namespace ade
