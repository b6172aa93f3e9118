#include "xaw/adam.hpp"

#include <algorithm>
#include <cmath>

#include "xaw/errors.hpp"

namespace xaw {

AdamW::AdamW(std::size_t size, AdamConfig cfg, std::vector<char> mask) : cfg_(cfg), decay_mask_(std::move(mask)) {
  if (decay_mask_.empty()) decay_mask_.assign(size, 1);
  if (decay_mask_.size() != size) throw InputError("decay mask size mismatch");
  state_.m.assign(size, 0.0);
  state_.v.assign(size, 0.0);
}

void AdamW::set_state(OptimizerState st) {
  if (st.m.size() != state_.m.size() || st.v.size() != state_.v.size())
    throw InputError("optimizer state size does not match the model");
  state_ = std::move(st);
}

void AdamW::step(std::span<double> params, std::span<const double> grads, double lr) {
  if (params.size() != state_.m.size() || grads.size() != params.size()) throw InputError("AdamW: size mismatch");
  ++state_.step;
  const double t = static_cast<double>(state_.step);
  const double bc1 = 1.0 - std::pow(cfg_.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double g = grads[k];
    double& m = state_.m[k];
    double& v = state_.v[k];
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g * g;
    const double update = (m / bc1) / (std::sqrt(v / bc2) + cfg_.eps);
    const double decay = decay_mask_[k] ? cfg_.weight_decay * params[k] : 0.0;
    params[k] -= lr * (update + decay);
  }
}

double linear_schedule(double peak, std::size_t step, std::size_t warmup, std::size_t total) {
  if (step < warmup) return peak * static_cast<double>(step + 1) / static_cast<double>(warmup);
  if (total <= warmup) return peak;
  const double remaining = static_cast<double>(total > step ? total - step : 0);
  return peak * remaining / static_cast<double>(total - warmup);
}

double clip_global_norm(std::span<double> grads, double max_norm) {
  double sq = 0.0;
  for (double g : grads) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (double& g : grads) g *= s;
  }
  return norm;
}

std::vector<char> decay_mask(const ParamLayout& layout) {
  std::vector<char> mask(layout.total(), 0);
  for (const auto& t : layout.tensors())
    if (t.decays()) std::fill_n(mask.begin() + static_cast<std::ptrdiff_t>(t.offset), t.size(), 1);
  return mask;
}

}  // namespace xaw
