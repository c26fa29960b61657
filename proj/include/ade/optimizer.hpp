#pragma once

#include <span>
#include <vector>

#include "ade/potential.hpp"

namespace ade {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.0;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with a sign knob so the same instance can ascend (model) or descend
// (sampler). Moment state is keyed by parameter position, so the caller must
// pass the same parameter list every step.
class Adam {
 public:
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  void step(std::span<const NamedParam> params, const std::vector<Mat>& grads,
            double direction) {
    require(params.size() == grads.size(), "adam: parameter/gradient count mismatch");
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.push_back(Mat::Zero(p.value->rows(), p.value->cols()));
        v_.push_back(Mat::Zero(p.value->rows(), p.value->cols()));
      }
    }
    ++t_;
    if (cfg_.lr == 0.0) return;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < grads.size(); ++i) {
      const Mat& g = grads[i];
      if (!g.allFinite()) throw NumericError("adam: non-finite gradient for " + params[i].name);
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
      Mat mhat = m_[i] / bc1;
      Mat vhat = v_[i] / bc2;
      params[i].value->array() +=
          direction * cfg_.lr * mhat.array() / (vhat.array().sqrt() + cfg_.eps);
    }
  }

 private:
  AdamConfig cfg_;
  std::vector<Mat> m_, v_;
  long t_ = 0;
};

inline double grad_norm(const std::vector<Mat>& grads) {
  double acc = 0.0;
  for (const auto& g : grads) acc += g.squaredNorm();
  return std::sqrt(acc);
}

}  // namespace ade
