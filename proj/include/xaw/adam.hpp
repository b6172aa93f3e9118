#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "xaw/checkpoint.hpp"

namespace xaw {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-6;
  double weight_decay = 0.01;
};

/// Adam with bias correction and decoupled weight decay (p -= lr * wd * p).
class AdamW {
 public:
  AdamW(std::size_t size, AdamConfig cfg, std::vector<char> decay_mask = {});

  void step(std::span<double> params, std::span<const double> grads, double lr);

  const OptimizerState& state() const { return state_; }
  void set_state(OptimizerState st);

 private:
  AdamConfig cfg_;
  std::vector<char> decay_mask_;
  OptimizerState state_;
};

/// Linear warmup to `peak` over `warmup` steps, then linear decay towards 0 at
/// `total`. `step` is 0-based.
double linear_schedule(double peak, std::size_t step, std::size_t warmup, std::size_t total);

/// Scales `grads` in place so that its L2 norm is at most `max_norm`; returns the norm before clipping.
double clip_global_norm(std::span<double> grads, double max_norm);

/// 1 for tensors that take weight decay, in flat parameter order.
std::vector<char> decay_mask(const ParamLayout& layout);

}  // namespace xaw
