#pragma once

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "ade/logdet.hpp"
#include "ade/potential.hpp"

namespace ade {

// Batched joint sampler state on a tape. x is n x d, v is n x l (l = d for
// every density-tracked layer here). log_q carries the exact accumulated
// log-density of the state under the sampler. kinetic accumulates the
// per-step momentum energies of multi-momentum (Langevin) stacks.
struct PhaseState {
  Var x;
  Var v;
  Var log_q;
  Var kinetic;
  int step_index = 0;

  void check_finite() const {
    if (!x.value().allFinite() || (v.valid() && !v.value().allFinite())) {
      throw DivergenceError("sampler state diverged", step_index);
    }
  }
};

// Row-wise gradient norm clipping with the clipping factor held constant
// (straight-through); disabled when max_norm <= 0.
inline Var clip_rows_by_norm(Tape& t, Var g, double max_norm) {
  if (max_norm <= 0.0) return g;
  const Mat& gv = g.value();
  Mat factors(gv.rows(), gv.cols());
  for (Eigen::Index i = 0; i < gv.rows(); ++i) {
    const double n = gv.row(i).norm();
    factors.row(i).setConstant(n > max_norm ? max_norm / n : 1.0);
  }
  return t.mul_const(g, std::move(factors));
}

// Small vector-output MLP used by the generalized leapfrog scale/projection
// maps. One tanh hidden layer; the output layer starts at zero so a fresh
// block is the constant-zero map.
class MlpBlock {
 public:
  MlpBlock() = default;
  MlpBlock(int in, int hidden, int out, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    w0_ = rng.uniform_mat(in, hidden, -bound, bound);
    b0_ = Mat::Zero(1, hidden);
    w1_ = Mat::Zero(hidden, out);
    b1_ = Mat::Zero(1, out);
  }

  int in_dim() const { return static_cast<int>(w0_.rows()); }
  int out_dim() const { return static_cast<int>(w1_.cols()); }

  std::vector<NamedParam> parameters(const std::string& prefix) {
    return {{prefix + ".w0", &w0_}, {prefix + ".b0", &b0_},
            {prefix + ".w1", &w1_}, {prefix + ".b1", &b1_}};
  }

  Var emit(Tape& t, std::span<const Var> p, Var x) const {
    require(x.cols() == w0_.rows(), "mlp block: input width mismatch");
    Var h = t.tanh(t.add_row(t.matmul(x, p[0]), p[1]));
    return t.add_row(t.matmul(h, p[2]), p[3]);
  }

 private:
  Mat w0_, b0_, w1_, b1_;
};

// ---------------------------------------------------------------------------
// Layer configurations bound to a tape.

struct BoundLeapfrog {
  Var eta;            // 1 x d positive step sizes
  double grad_clip = 0.0;
  double v_clip = 0.0;
};

struct BoundGeneralized {
  Var eta;            // 1 x 1 positive step size
  std::span<const Var> sv, sx, gv, gx;   // parameter nodes of the four blocks
  const MlpBlock* sv_net = nullptr;
  const MlpBlock* sx_net = nullptr;
  const MlpBlock* gv_net = nullptr;
  const MlpBlock* gx_net = nullptr;
  double grad_clip = 0.0;
  double v_clip = 0.0;
};

struct BoundLangevin {
  Var eta;            // 1 x d
  double grad_clip = 0.0;
  bool scale_position_update = false;  // off = literal update x' = x + v'
};

// ---------------------------------------------------------------------------
// Single steps. All arithmetic is recorded on the tape so every output stays
// differentiable with respect to the potential and the step parameters.

// Half-kick / drift / half-kick. Volume preserving: log_q is carried over
// untouched.
inline PhaseState leapfrog_step(const BoundPotential& f, const PhaseState& s,
                                const BoundLeapfrog& c) {
  Tape& t = f.tape();
  require(s.v.cols() == s.x.cols(), "leapfrog: momentum dimension must equal sample dimension");
  Var g1 = clip_rows_by_norm(t, grad_x_var(f, s.x), c.grad_clip);
  Var vhalf = t.add(s.v, t.scale(t.mul_row(g1, c.eta), 0.5));
  Var drift = c.v_clip > 0.0 ? t.clip(vhalf, c.v_clip) : vhalf;
  Var x1 = t.add(s.x, t.mul_row(drift, c.eta));
  Var g2 = clip_rows_by_norm(t, grad_x_var(f, x1), c.grad_clip);
  Var v1 = t.add(vhalf, t.scale(t.mul_row(g2, c.eta), 0.5));
  PhaseState out{x1, v1, s.log_q, s.kinetic, s.step_index + 1};
  out.check_finite();
  return out;
}

// T-fold composition of leapfrog_step; the tape keeps the whole trace.
inline PhaseState hmc_embed(const BoundPotential& f, PhaseState s, const BoundLeapfrog& c,
                            int steps) {
  for (int i = 0; i < steps; ++i) s = leapfrog_step(f, s, c);
  return s;
}

// Leapfrog generalized by per-coordinate exp scalings and learned drift
// corrections. The Jacobian of each substep is triangular with diagonal
// exp(S), so the density update is the sum of the emitted log-scales.
inline PhaseState generalized_leapfrog_step(const BoundPotential& f, const PhaseState& s,
                                            const BoundGeneralized& c) {
  Tape& t = f.tape();
  const int d = static_cast<int>(s.x.cols());
  require(s.v.cols() == d, "generalized leapfrog: density tracking needs l = d");
  require(c.sv_net->out_dim() == d && c.gv_net->out_dim() == d, "generalized leapfrog: v-map output must be l");
  require(c.sx_net->out_dim() == d && c.gx_net->out_dim() == d, "generalized leapfrog: x-map output must be d");
  Var eta_row = t.broadcast_cols(c.eta, d);

  Var g1 = clip_rows_by_norm(t, grad_x_var(f, s.x), c.grad_clip);
  Var in1 = t.concat_cols(g1, s.x);
  Var sv1 = c.sv_net->emit(t, c.sv, in1);
  Var gv1 = t.add(g1, c.gv_net->emit(t, c.gv, in1));
  Var vhalf = t.add(t.mul(s.v, t.exp(sv1)), t.scale(t.mul_row(gv1, eta_row), 0.5));

  Var sx = c.sx_net->emit(t, c.sx, vhalf);
  Var drift = c.v_clip > 0.0 ? t.clip(vhalf, c.v_clip) : vhalf;
  Var gx = t.add(drift, c.gx_net->emit(t, c.gx, vhalf));
  Var x1 = t.add(t.mul(s.x, t.exp(sx)), t.mul_row(gx, eta_row));

  Var g2 = clip_rows_by_norm(t, grad_x_var(f, x1), c.grad_clip);
  Var in2 = t.concat_cols(g2, x1);
  Var sv2 = c.sv_net->emit(t, c.sv, in2);
  Var gv2 = t.add(g2, c.gv_net->emit(t, c.gv, in2));
  Var v1 = t.add(t.mul(vhalf, t.exp(sv2)), t.scale(t.mul_row(gv2, eta_row), 0.5));

  Var log_det = t.add(t.row_sum(sv1), t.add(t.row_sum(sx), t.row_sum(sv2)));
  PhaseState out{x1, v1, t.sub(s.log_q, log_det), s.kinetic, s.step_index + 1};
  out.check_finite();
  return out;
}

// Momentum-refreshing step: the fresh noise replaces the momentum and its
// log-density joins the accumulated state density. xi_log_q must be the
// exact log-density of xi under the noise law (zero when xi's density is
// already accounted for, e.g. the momentum drawn by the initializer).
inline PhaseState langevin_step(const BoundPotential& f, const PhaseState& s,
                                const BoundLangevin& c, Var xi, const Vec& xi_log_q,
                                double lambda) {
  Tape& t = f.tape();
  Var g = clip_rows_by_norm(t, grad_x_var(f, s.x), c.grad_clip);
  Var v1 = t.add(xi, t.scale(t.mul_row(g, c.eta), 0.5));
  Var x1 = c.scale_position_update ? t.add(s.x, t.mul_row(v1, c.eta)) : t.add(s.x, v1);
  Var log_q = t.add(s.log_q, t.constant(xi_log_q));
  Var kin = t.add(s.kinetic, t.scale(t.row_sum(t.square(v1)), 0.5 * lambda));
  PhaseState out{x1, v1, log_q, kin, s.step_index + 1};
  out.check_finite();
  return out;
}

// Per-row Hessian-vector product H(x_i) z via grad-of-grad; rows do not mix.
inline Var hessian_vec_rows(const BoundPotential& f, Var x, Var grad_at_x, const Mat& z_row) {
  Tape& t = f.tape();
  Var s = t.sum_all(t.mul_row(grad_at_x, t.constant(z_row)));
  return t.gradient(s, x);
}

struct DetLangevinOptions {
  LogDetMethod method = LogDetMethod::kTaylor;
  int order = 6;
  int probes = 8;
  std::uint64_t seed = 0;
};

// One application of C = -eta H(x) to a batched direction (rows are
// independent samples). With spectrum(eta H) inside (-1, 1) this gives
// log det(I + eta H) = tr log(I - C) directly, so the first-order Taylor
// term is exactly eta tr H. The direction enters as a constant: series
// values are exact; the parameter gradient keeps the dependence through eta
// and through the H of each application, but not through the propagated
// probe itself.
inline Var det_langevin_apply_c(const BoundPotential& f, Var x, Var grad_at_x, Var w, Var eta) {
  Tape& t = f.tape();
  const int n = static_cast<int>(w.rows());
  const int d = static_cast<int>(w.cols());
  Var w_c = t.constant(w.value());
  Var hw = t.gradient(t.sum_all(t.mul(grad_at_x, w_c)), x);  // rows H(x_i) w_i
  return t.neg(t.mul(hw, t.broadcast_all(eta, n, d)));
}

// Gradient-flow step x' = x + eta * grad f(x). The density drops by
// log |det(I + eta H)|, estimated per sample by a stochastic series over
// Hessian-vector products; everything stays on the tape, so the correction
// is differentiable. If the series precondition eta * ||H|| < 1 fails, the
// exact dense determinant is used instead for d <= 4 (with a warning) and
// its gradient contribution is dropped.
inline PhaseState det_langevin_step(const BoundPotential& f, const PhaseState& s, Var eta,
                                    const DetLangevinOptions& opt) {
  Tape& t = f.tape();
  const int d = static_cast<int>(s.x.cols());
  const int n = static_cast<int>(s.x.rows());
  Var eta_row = t.broadcast_cols(eta, d);

  Var g = grad_x_var(f, s.x);
  Var x1 = t.add(s.x, t.mul_row(g, eta_row));

  // spectral bound of H over the batch via a few power iterations (values only)
  Rng prng(opt.seed * 0x9E37u + 17u);
  Mat probe = prng.normal_mat(1, d);
  probe /= std::max(probe.norm(), 1e-12);
  double delta = 0.0;
  for (int it = 0; it < 4; ++it) {
    Mat hz = hessian_vec_rows(f, s.x, g, probe).value();
    double best = 0.0;
    Eigen::Index best_row = 0;
    for (Eigen::Index r = 0; r < hz.rows(); ++r) {
      if (hz.row(r).norm() > best) {
        best = hz.row(r).norm();
        best_row = r;
      }
    }
    delta = best;
    if (best <= 1e-12) break;
    probe = hz.row(best_row) / best;
  }
  delta *= 1.2;  // safety margin on the power-iteration estimate
  const double eta_val = eta.value()(0, 0);

  Var log_det;
  if (eta_val * delta >= 1.0) {
    std::fprintf(stderr,
                 "[ade] det_langevin: spectral bound violated (eta*|H| ~ %.3f >= 1); "
                 "falling back to exact determinant\n",
                 eta_val * delta);
    require(d <= 4, "det_langevin: exact fallback only available for d <= 4");
    Mat ld(n, 1);
    std::vector<Mat> hcols;
    for (int j = 0; j < d; ++j) {
      Mat e = Mat::Zero(1, d);
      e(0, j) = 1.0;
      hcols.push_back(hessian_vec_rows(f, s.x, g, e).value());
    }
    for (int r = 0; r < n; ++r) {
      Mat h(d, d);
      for (int j = 0; j < d; ++j) h.col(j) = hcols[static_cast<std::size_t>(j)].row(r).transpose();
      Mat m = Mat::Identity(d, d) + eta_val * h;
      ld(r, 0) = std::log(std::abs(m.partialPivLu().determinant()));
    }
    log_det = t.constant(ld);
  } else {
    // log det(I + eta H) = tr log(I - C) with C = -eta H; the precondition
    // eta |H| < 1 was just checked, so the series converges.
    const bool exact_basis = opt.probes >= d;
    const int n_probes = exact_basis ? d : opt.probes;
    Rng zrng(opt.seed);
    std::vector<double> cheb;
    const double cheb_range = std::clamp(eta_val * delta, 0.05, 0.95);
    if (opt.method == LogDetMethod::kChebyshev) {
      cheb = chebyshev_logdet_coeffs(opt.order, cheb_range);
    }

    Var acc;  // n x 1 accumulated tr-log estimate
    for (int p = 0; p < n_probes; ++p) {
      Mat z(1, d);
      if (exact_basis) {
        z.setZero();
        z(0, p) = 1.0;
      } else {
        z = zrng.rademacher(d).transpose();
      }
      Var zc = t.constant(z);
      Var w = t.broadcast_rows(zc, n);
      Var probe_acc;
      if (opt.method == LogDetMethod::kTaylor) {
        for (int i = 1; i <= opt.order; ++i) {
          w = det_langevin_apply_c(f, s.x, g, w, eta);
          Var term = t.scale(t.row_sum(t.mul_row(w, zc)), -1.0 / static_cast<double>(i));
          probe_acc = probe_acc.valid() ? t.add(probe_acc, term) : term;
        }
      } else {
        Var w_prev = w;
        Var w_cur = t.scale(det_langevin_apply_c(f, s.x, g, w, eta), 1.0 / cheb_range);
        probe_acc = t.scale(t.row_sum(t.mul_row(w_prev, zc)), cheb[0]);
        probe_acc = t.add(probe_acc, t.scale(t.row_sum(t.mul_row(w_cur, zc)), cheb[1]));
        for (int i = 2; i <= opt.order; ++i) {
          Var w_next = t.sub(
              t.scale(det_langevin_apply_c(f, s.x, g, w_cur, eta), 2.0 / cheb_range), w_prev);
          probe_acc = t.add(
              probe_acc, t.scale(t.row_sum(t.mul_row(w_next, zc)), cheb[static_cast<std::size_t>(i)]));
          w_prev = w_cur;
          w_cur = w_next;
        }
      }
      acc = acc.valid() ? t.add(acc, probe_acc) : probe_acc;
    }
    log_det = exact_basis ? acc : t.scale(acc, 1.0 / static_cast<double>(n_probes));
  }

  PhaseState out{x1, s.v, t.sub(s.log_q, log_det), s.kinetic, s.step_index + 1};
  out.check_finite();
  return out;
}

// ---------------------------------------------------------------------------
// Stack of T identical layers with owned, learnable parameters. Step sizes
// are stored as logs (positivity by construction) and shared across steps;
// leapfrog and Langevin stacks learn one step size per dimension.

enum class DynamicsKind { kLeapfrog, kGeneralized, kLangevin, kDetLangevin };

inline DynamicsKind dynamics_kind_from_string(const std::string& s) {
  if (s == "leapfrog") return DynamicsKind::kLeapfrog;
  if (s == "generalized") return DynamicsKind::kGeneralized;
  if (s == "langevin") return DynamicsKind::kLangevin;
  if (s == "det_langevin") return DynamicsKind::kDetLangevin;
  throw ConfigError("unknown dynamics kind: " + s);
}

inline std::string to_string(DynamicsKind k) {
  switch (k) {
    case DynamicsKind::kLeapfrog: return "leapfrog";
    case DynamicsKind::kGeneralized: return "generalized";
    case DynamicsKind::kLangevin: return "langevin";
    case DynamicsKind::kDetLangevin: return "det_langevin";
  }
  return "?";
}

struct DynamicsOptions {
  int steps = 5;
  double eta0 = 0.1;
  double grad_clip = 10.0;   // <= 0 disables
  double v_clip = 0.0;       // <= 0 disables
  bool learn_eta = true;
  bool langevin_scale_position_update = false;
  double langevin_noise_std = 1.0;
  int gen_hidden = 32;
  LogDetMethod logdet_method = LogDetMethod::kTaylor;
  int logdet_order = 6;
  int logdet_probes = 8;
};

class DynamicsStack {
 public:
  struct Bound {
    Var log_eta;  // the bound leaf
    Var eta;      // exp(log eta), 1 x d or 1 x 1
    std::vector<Var> sv, sx, gv, gx;
  };

  DynamicsStack(DynamicsKind kind, int dim, DynamicsOptions opt, Rng& rng)
      : kind_(kind), dim_(dim), opt_(opt) {
    require(opt.eta0 > 0.0, "dynamics: initial step size must be positive");
    const bool per_dim = kind == DynamicsKind::kLeapfrog || kind == DynamicsKind::kLangevin;
    log_eta_ = Mat::Constant(1, per_dim ? dim : 1, std::log(opt.eta0));
    if (kind == DynamicsKind::kGeneralized) {
      sv_ = MlpBlock(2 * dim, opt.gen_hidden, dim, rng);
      sx_ = MlpBlock(dim, opt.gen_hidden, dim, rng);
      gv_ = MlpBlock(2 * dim, opt.gen_hidden, dim, rng);
      gx_ = MlpBlock(dim, opt.gen_hidden, dim, rng);
    }
  }

  DynamicsKind kind() const { return kind_; }
  int steps() const { return opt_.steps; }
  int dim() const { return dim_; }
  const DynamicsOptions& options() const { return opt_; }

  // Langevin stacks carry one momentum per step in the augmented model.
  bool multi_momentum() const { return kind_ == DynamicsKind::kLangevin; }
  bool momentumless() const { return kind_ == DynamicsKind::kDetLangevin; }

  Vec eta() const { return log_eta_.row(0).array().exp().transpose(); }

  std::vector<NamedParam> parameters() {
    std::vector<NamedParam> out{{"dynamics.log_eta", &log_eta_}};
    if (kind_ == DynamicsKind::kGeneralized) {
      for (auto& p : sv_.parameters("dynamics.sv")) out.push_back(p);
      for (auto& p : sx_.parameters("dynamics.sx")) out.push_back(p);
      for (auto& p : gv_.parameters("dynamics.gv")) out.push_back(p);
      for (auto& p : gx_.parameters("dynamics.gx")) out.push_back(p);
    }
    return out;
  }

  // Parameters the trainer is allowed to move.
  std::vector<NamedParam> learnable_parameters() {
    auto all = parameters();
    if (!opt_.learn_eta) all.erase(all.begin());
    return all;
  }

  Bound bind(Tape& t) {
    Bound b;
    b.log_eta = t.leaf(log_eta_);
    b.eta = t.exp(b.log_eta);
    if (kind_ == DynamicsKind::kGeneralized) {
      auto push_all = [&t](MlpBlock& blk, const char* prefix, std::vector<Var>& dst) {
        for (auto& p : blk.parameters(prefix)) dst.push_back(t.leaf(*p.value));
      };
      push_all(sv_, "dynamics.sv", b.sv);
      push_all(sx_, "dynamics.sx", b.sx);
      push_all(gv_, "dynamics.gv", b.gv);
      push_all(gx_, "dynamics.gx", b.gx);
    }
    return b;
  }

  // Leaves created by bind(), in parameters() order.
  std::vector<Var> bound_param_vars(const Bound& b) const {
    std::vector<Var> out{b.log_eta};
    for (const auto& grp : {b.sv, b.sx, b.gv, b.gx})
      for (Var v : grp) out.push_back(v);
    return out;
  }

  PhaseState unroll(const DynamicsStack::Bound& b, const BoundPotential& f, PhaseState s,
                    double lambda, Rng& rng) const {
    Tape& t = f.tape();
    switch (kind_) {
      case DynamicsKind::kLeapfrog: {
        BoundLeapfrog c{b.eta, opt_.grad_clip, opt_.v_clip};
        return hmc_embed(f, s, c, opt_.steps);
      }
      case DynamicsKind::kGeneralized: {
        BoundGeneralized c{b.eta, b.sv, b.sx, b.gv, b.gx, &sv_, &sx_, &gv_, &gx_,
                           opt_.grad_clip, opt_.v_clip};
        for (int i = 0; i < opt_.steps; ++i) s = generalized_leapfrog_step(f, s, c);
        return s;
      }
      case DynamicsKind::kLangevin: {
        BoundLangevin c{b.eta, opt_.grad_clip, opt_.langevin_scale_position_update};
        const int n = static_cast<int>(s.x.rows());
        const int d = static_cast<int>(s.x.cols());
        const double std = opt_.langevin_noise_std;
        for (int i = 0; i < opt_.steps; ++i) {
          if (i == 0) {
            // first refresh consumes the initializer's momentum, whose
            // density is already part of log_q
            s = langevin_step(f, s, c, s.v, Vec::Zero(n), lambda);
          } else {
            Mat xi = rng.normal_mat(n, d) * std;
            Vec lq(n);
            const double base = -0.5 * d * std::log(2.0 * std::numbers::pi) -
                                d * std::log(std);
            for (int r = 0; r < n; ++r) {
              lq(r) = base - 0.5 * xi.row(r).squaredNorm() / (std * std);
            }
            s = langevin_step(f, s, c, t.constant(xi), lq, lambda);
          }
        }
        return s;
      }
      case DynamicsKind::kDetLangevin: {
        for (int i = 0; i < opt_.steps; ++i) {
          DetLangevinOptions o{opt_.logdet_method, opt_.logdet_order, opt_.logdet_probes,
                               rng.next_u64()};
          s = det_langevin_step(f, s, b.eta, o);
        }
        return s;
      }
    }
    throw ContractViolation("unroll: unknown dynamics kind");
  }

 private:
  DynamicsKind kind_;
  int dim_;
  DynamicsOptions opt_;
  Mat log_eta_;
  MlpBlock sv_, sx_, gv_, gx_;
};

// H(x, v) = -f(x) + (lambda/2) |v|^2, evaluated off-tape. Used by tests and
// by the Metropolis correction in the CD baseline and the HMC eval sampler.
inline Vec hamiltonian_values(Potential& pot, const Mat& x, const Mat& v, double lambda) {
  Vec h = -eval_f(pot, x);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    h(i) += 0.5 * lambda * v.row(i).squaredNorm();
  }
  return h;
}

}  // namespace ade
