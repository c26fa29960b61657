#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "ade/matrix.hpp"
#include "ade/rng.hpp"

namespace ade {

enum class LogDetMethod { kTaylor, kChebyshev };

// Coefficients of the degree-k Chebyshev interpolant of log(1 - s) over
// [-range, range], sampled at s_j = range * cos(pi (j + 1/2) / (k + 1)).
// log(1 - s) is singular at s = 1, so interpolating over the full [-1, 1]
// converges too slowly to be useful; restricting to a bound on the actual
// spectrum restores geometric convergence.
inline std::vector<double> chebyshev_logdet_coeffs(int k, double range = 0.75) {
  require(range > 0.0 && range < 1.0, "chebyshev: range must lie in (0, 1)");
  const int m = k + 1;
  std::vector<double> fvals(m);
  for (int j = 0; j < m; ++j) {
    fvals[j] = std::log(1.0 - range * std::cos(std::numbers::pi * (j + 0.5) / m));
  }
  std::vector<double> coeffs(m, 0.0);
  for (int i = 0; i < m; ++i) {
    double acc = 0.0;
    for (int j = 0; j < m; ++j) {
      acc += fvals[j] * std::cos(std::numbers::pi * i * (j + 0.5) / m);
    }
    coeffs[i] = (i == 0 ? 1.0 : 2.0) * acc / m;
  }
  return coeffs;
}

// Stochastic series estimate of log det(I - C) from a matrix-vector oracle.
// Taylor: -sum_{i<=k} tr(C^i)/i. Chebyshev: sum_i c_i tr(T_i(C)).
// Traces use Hutchinson probes; when the probe budget covers the dimension,
// the standard basis is used instead, which evaluates the trace exactly at
// the same cost. Deterministic given the seed.
inline double logdet_estimate(const std::function<Vec(const Vec&)>& apply_c, int d,
                              LogDetMethod method, int k, int probes, std::uint64_t seed,
                              double cheb_range = 0.75) {
  require(k >= 1, "logdet_estimate: series order must be >= 1");
  require(probes >= 1, "logdet_estimate: probe count must be >= 1");
  require(d >= 1, "logdet_estimate: dimension must be >= 1");

  const bool exact_basis = probes >= d;
  const int n_probes = exact_basis ? d : probes;
  Rng rng(seed);

  std::vector<double> cheb;
  if (method == LogDetMethod::kChebyshev) cheb = chebyshev_logdet_coeffs(k, cheb_range);

  double total = 0.0;
  for (int p = 0; p < n_probes; ++p) {
    Vec z;
    if (exact_basis) {
      z = Vec::Zero(d);
      z(p) = 1.0;
    } else {
      z = rng.rademacher(d);
    }
    if (method == LogDetMethod::kTaylor) {
      Vec w = z;
      double acc = 0.0;
      for (int i = 1; i <= k; ++i) {
        w = apply_c(w);
        acc -= z.dot(w) / static_cast<double>(i);
      }
      total += acc;
    } else {
      // interpolant in T_i(s / range): w_0 = z, w_1 = C z / range,
      // w_i = 2 C w_{i-1} / range - w_{i-2}
      Vec w_prev = z;
      Vec w_cur = apply_c(z) / cheb_range;
      double acc = cheb[0] * z.dot(w_prev);
      if (k >= 1) acc += cheb[1] * z.dot(w_cur);
      for (int i = 2; i <= k; ++i) {
        Vec w_next = 2.0 * apply_c(w_cur) / cheb_range - w_prev;
        acc += cheb[static_cast<std::size_t>(i)] * z.dot(w_next);
        w_prev = std::move(w_cur);
        w_cur = std::move(w_next);
      }
      total += acc;
    }
  }
  // Basis probes tile the trace (sum over i of e_i' M e_i); Rademacher probes
  // each estimate the full trace (average over draws).
  return exact_basis ? total : total / static_cast<double>(n_probes);
}

}  // namespace ade
