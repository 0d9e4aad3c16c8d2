#pragma once

#include <cmath>
#include <vector>

#include "lmo/diffkit/tape.hpp"

namespace lmo::diffkit {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Moment buffers live inside each Param and
// persist across steps; the step counter is shared by the group.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(const std::vector<Param*>& params) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (Param* p : params) {
      p->m = cfg_.beta1 * p->m + (1.0 - cfg_.beta1) * p->grad;
      p->v = cfg_.beta2 * p->v.array() + (1.0 - cfg_.beta2) * p->grad.array().square();
      p->value.array() -=
          cfg_.lr * (p->m.array() / bc1) / ((p->v.array() / bc2).sqrt() + cfg_.eps);
      check_finite(p->value, "adam_step");
    }
  }

  long step_count() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  long t_ = 0;
};

// Global gradient-norm clipping over a parameter group; returns the
// pre-clip norm.
inline double clip_grad_norm(const std::vector<Param*>& params, double max_norm) {
  double sq = 0.0;
  for (const Param* p : params) sq += p->grad.squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (Param* p : params) p->grad *= scale;
  }
  return norm;
}

}  // namespace lmo::diffkit
