#pragma once

#include <algorithm>
#include <functional>
#include <vector>

#include "lmo/diffkit/tape.hpp"

namespace lmo::diffkit {

// Verification harness: compares backward() against central finite
// differences, entrywise over every parameter.
//
// `build` must construct the loss on the given tape as a pure function of
// the current parameter values. Relative error uses a floored denominator
// so near-zero gradients are judged on an absolute scale.
inline double finite_diff_check(const std::function<Var(Tape&)>& build,
                                const std::vector<Param*>& params, double step = 1e-6) {
  std::vector<Mat> analytic;
  analytic.reserve(params.size());
  {
    std::vector<Mat> saved_grads;
    saved_grads.reserve(params.size());
    for (Param* p : params) {
      saved_grads.push_back(p->grad);
      p->zero_grad();
    }
    Tape tape;
    tape.backward(build(tape));
    for (Param* p : params) analytic.push_back(p->grad);
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->grad = saved_grads[i];
  }

  const auto eval = [&]() {
    Tape tape;
    const double v = tape.value(build(tape))(0, 0);
    return v;
  };

  double max_rel = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Mat& w = params[pi]->value;
    for (Index i = 0; i < w.size(); ++i) {
      const double orig = w(i);
      w(i) = orig + step;
      const double f_plus = eval();
      w(i) = orig - step;
      const double f_minus = eval();
      w(i) = orig;
      const double numeric = (f_plus - f_minus) / (2.0 * step);
      const double ga = analytic[pi](i);
      const double denom = std::max({std::abs(ga), std::abs(numeric), 1e-3});
      max_rel = std::max(max_rel, std::abs(ga - numeric) / denom);
    }
  }
  return max_rel;
}

}  // namespace lmo::diffkit
