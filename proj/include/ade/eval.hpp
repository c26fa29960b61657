#pragma once

#include <algorithm>
#include <cstdio>
#include <vector>

#include "ade/dynamics.hpp"

namespace ade {

struct MmdConfig {
  double bandwidth = 0.0;  // <= 0: median trick over the pooled sample
};

// Median pairwise Euclidean distance of the pooled rows.
inline double median_pairwise_distance(const Mat& pooled) {
  const Eigen::Index n = pooled.rows();
  require(n >= 2, "median trick: need at least two points");
  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      dists.push_back((pooled.row(i) - pooled.row(j)).norm());
    }
  }
  auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
  std::nth_element(dists.begin(), mid, dists.end());
  return *mid;
}

// Unbiased squared-MMD U-statistic with a Gaussian kernel
// k(a, b) = exp(-|a - b|^2 / (2 sigma^2)). May be negative under the null.
inline double mmd2(const Mat& x, const Mat& y, const MmdConfig& cfg = {}) {
  const Eigen::Index n = x.rows(), m = y.rows();
  require(n >= 2 && m >= 2, "mmd2: need at least two points per side");
  require(x.cols() == y.cols(), "mmd2: dimension mismatch");

  double sigma = cfg.bandwidth;
  if (sigma <= 0.0) {
    Mat pooled(n + m, x.cols());
    pooled << x, y;
    sigma = median_pairwise_distance(pooled);
    if (sigma <= 0.0) throw NumericError("mmd2: degenerate sample, zero bandwidth");
  }
  const double gamma = 1.0 / (2.0 * sigma * sigma);

  auto sq_dists = [](const Mat& a, const Mat& b) {
    Vec an = a.rowwise().squaredNorm();
    Vec bn = b.rowwise().squaredNorm();
    Mat d = (-2.0 * a * b.transpose());
    d.colwise() += an;
    d.rowwise() += bn.transpose();
    return d;
  };

  Mat kxx = (-gamma * sq_dists(x, x).array()).exp();
  Mat kyy = (-gamma * sq_dists(y, y).array()).exp();
  Mat kxy = (-gamma * sq_dists(x, y).array()).exp();

  const double sxx = (kxx.sum() - kxx.trace()) / static_cast<double>(n * (n - 1));
  const double syy = (kyy.sum() - kyy.trace()) / static_cast<double>(m * (m - 1));
  const double sxy = kxy.sum() / static_cast<double>(n * m);
  return sxx + syy - 2.0 * sxy;
}

struct HmcSampleOptions {
  double eta = 0.1;
  int chains = 64;
  double init_scale = 2.0;   // chains start from N(0, init_scale^2 I)
  const Mat* init_points = nullptr;
  double* accept_rate_out = nullptr;
};

// Metropolis-corrected HMC targeting exp(f). Used to evaluate estimators that
// do not learn their own sampler. Returns n draws after burn_in sweeps;
// warns when the burn-in acceptance rate collapses.
inline Mat hmc_sample_model(Potential& pot, int n, int burn_in, int steps, Rng& rng,
                            const HmcSampleOptions& opt = {}) {
  require(n >= 1, "hmc_sample_model: need n >= 1");
  const int d = pot.dim();
  const int chains = std::min(opt.chains, n);

  Mat x(chains, d);
  if (opt.init_points != nullptr && opt.init_points->rows() > 0) {
    for (int i = 0; i < chains; ++i) {
      x.row(i) = opt.init_points->row(rng.uniform_index(opt.init_points->rows()));
    }
  } else {
    x = rng.normal_mat(chains, d) * opt.init_scale;
  }
  require(eval_f(pot, x).allFinite(), "hmc_sample_model: potential not finite at start");

  Mat samples(n, d);
  int collected = 0;
  long accepted = 0, proposed = 0;
  bool warned = false;
  const int rounds_needed = burn_in + (n + chains - 1) / chains;

  for (int round = 0; round < rounds_needed; ++round) {
    Mat v = rng.normal_mat(chains, d);
    Vec h0 = hamiltonian_values(pot, x, v, 1.0);

    // value-level trajectory; steps == 0 keeps the current state
    Mat xt = x, vt = v;
    if (steps > 0) {
      Tape t;
      BoundPotential f(pot, t);
      PhaseState s{t.constant(x), t.constant(v), t.constant(Mat::Zero(chains, 1)),
                   t.constant(Mat::Zero(chains, 1)), 0};
      BoundLeapfrog c{t.constant(Mat::Constant(1, d, opt.eta)), 0.0, 0.0};
      PhaseState sT = hmc_embed(f, s, c, steps);
      xt = sT.x.value();
      vt = sT.v.value();
    }
    Vec h1 = hamiltonian_values(pot, xt, vt, 1.0);

    for (int i = 0; i < chains; ++i) {
      ++proposed;
      const double alpha = std::exp(std::min(0.0, h0(i) - h1(i)));
      if (rng.uniform() < alpha) {
        x.row(i) = xt.row(i);
        ++accepted;
      }
    }

    if (round == burn_in - 1 && proposed > 0) {
      const double rate = static_cast<double>(accepted) / static_cast<double>(proposed);
      if (rate < 0.01 && !warned) {
        std::fprintf(stderr,
                     "[ade] hmc_sample_model: burn-in acceptance %.4f < 1%% "
                     "(eta=%.3g, steps=%d); samples are unreliable\n",
                     rate, opt.eta, steps);
        warned = true;
      }
    }
    if (round >= burn_in) {
      for (int i = 0; i < chains && collected < n; ++i) {
        samples.row(collected++) = x.row(i);
      }
    }
  }
  if (opt.accept_rate_out != nullptr && proposed > 0) {
    *opt.accept_rate_out = static_cast<double>(accepted) / static_cast<double>(proposed);
  }
  return samples;
}

// Per-entry relative parameter-recovery error.
struct ParamErrorReport {
  Vec per_entry;
  double max_rel = 0.0;
  double mean_rel = 0.0;
};

inline ParamErrorReport param_error(const Vec& truth, const Vec& learned) {
  require(truth.size() == learned.size(), "param_error: shape mismatch");
  ParamErrorReport rep;
  rep.per_entry = Vec(truth.size());
  for (Eigen::Index i = 0; i < truth.size(); ++i) {
    rep.per_entry(i) = std::abs(learned(i) - truth(i)) / std::max(std::abs(truth(i)), 1e-8);
  }
  rep.max_rel = rep.per_entry.size() ? rep.per_entry.maxCoeff() : 0.0;
  rep.mean_rel = rep.per_entry.size() ? rep.per_entry.mean() : 0.0;
  return rep;
}

// Histograms of f over two sample sets on a shared bin grid.
struct EnergyHistogram {
  Vec edges;         // bins + 1
  Vec counts_model;  // normalized to sum 1
  Vec counts_data;
  double overlap = 0.0;  // sum of per-bin minima, in [0, 1]
};

inline EnergyHistogram energy_histogram(Potential& pot, const Mat& x_model, const Mat& x_data,
                                        int bins) {
  require(bins >= 2, "energy_histogram: need at least two bins");
  Vec fm = eval_f(pot, x_model);
  Vec fd = eval_f(pot, x_data);
  double lo = std::min(fm.minCoeff(), fd.minCoeff());
  double hi = std::max(fm.maxCoeff(), fd.maxCoeff());
  if (hi <= lo) hi = lo + 1.0;

  EnergyHistogram h;
  h.edges = Vec::LinSpaced(bins + 1, lo, hi);
  h.counts_model = Vec::Zero(bins);
  h.counts_data = Vec::Zero(bins);
  auto fill = [&](const Vec& vals, Vec& counts) {
    for (Eigen::Index i = 0; i < vals.size(); ++i) {
      auto b = static_cast<int>((vals(i) - lo) / (hi - lo) * bins);
      b = std::clamp(b, 0, bins - 1);
      counts(b) += 1.0;
    }
    counts /= static_cast<double>(vals.size());
  };
  fill(fm, h.counts_model);
  fill(fd, h.counts_data);
  for (int b = 0; b < bins; ++b) h.overlap += std::min(h.counts_model(b), h.counts_data(b));
  return h;
}

}  // namespace ade
