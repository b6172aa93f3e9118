#pragma once

// XAW1 checkpoint layout (all integers little-endian):
//
//   "XAW1"
//   u32 version (=1)
//   u32 vocab_size, layers, hidden, heads, ffn, max_len
//   u32 precision (0 = f32, 1 = f64), reset_target_positions (0/1)
//   u64 step
//   u64 parameter count, then that many f32 values in ParamLayout order
//   u32 byte length, then the RNG engine state as text
//
// Optimizer state for resuming goes to a separate "XAWO" file:
//   "XAWO", u64 step, u64 count, count f64 first moments, count f64 second moments.

#include <cstdint>
#include <string>
#include <vector>

#include "xaw/neural.hpp"
#include "xaw/rng.hpp"

namespace xaw {

struct Checkpoint {
  EncoderParams params;
  std::uint64_t step = 0;
  std::string rng_state;
};

void save_checkpoint(const std::string& path, const EncoderParams& params, std::uint64_t step, const Rng& rng);
Checkpoint load_checkpoint(const std::string& path);

struct OptimizerState {
  std::uint64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;
};

void save_optimizer_state(const std::string& path, const OptimizerState& state);
OptimizerState load_optimizer_state(const std::string& path);

}  // namespace xaw
