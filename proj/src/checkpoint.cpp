#include "xaw/checkpoint.hpp"

#include <fstream>

#include "binary_io.hpp"
#include "xaw/errors.hpp"

namespace xaw {

using namespace detail;

void save_checkpoint(const std::string& path, const EncoderParams& params, std::uint64_t step, const Rng& rng) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write checkpoint " + path);
  const EncoderConfig& c = params.config();
  os.write("XAW1", 4);
  put_u32(os, 1);
  for (int x : {c.vocab_size, c.layers, c.hidden, c.heads, c.ffn, c.max_len}) put_u32(os, static_cast<std::uint32_t>(x));
  put_u32(os, c.precision == Precision::f32 ? 0 : 1);
  put_u32(os, c.reset_target_positions ? 1 : 0);
  put_u64(os, step);
  put_u64(os, params.size());
  for (double x : params.values) put_f32(os, static_cast<float>(x));
  const std::string state = rng_state(rng);
  put_u32(os, static_cast<std::uint32_t>(state.size()));
  os.write(state.data(), static_cast<std::streamsize>(state.size()));
  if (!os) throw std::runtime_error("write failed for checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint " + path);
  const std::string what = "checkpoint " + path;
  expect_magic(is, "XAW1", what);
  if (get_u32(is, what) != 1) throw ParseError(what + ": unsupported version");
  EncoderConfig c;
  c.vocab_size = static_cast<int>(get_u32(is, what));
  c.layers = static_cast<int>(get_u32(is, what));
  c.hidden = static_cast<int>(get_u32(is, what));
  c.heads = static_cast<int>(get_u32(is, what));
  c.ffn = static_cast<int>(get_u32(is, what));
  c.max_len = static_cast<int>(get_u32(is, what));
  c.precision = get_u32(is, what) == 0 ? Precision::f32 : Precision::f64;
  c.reset_target_positions = get_u32(is, what) != 0;
  const std::uint64_t step = get_u64(is, what);

  Checkpoint ck{EncoderParams(c), step, {}};
  const std::uint64_t count = get_u64(is, what);
  if (count != ck.params.size())
    throw ParseError(what + ": parameter count " + std::to_string(count) + " does not match config (" +
                     std::to_string(ck.params.size()) + ")");
  for (double& x : ck.params.values) x = static_cast<double>(get_f32(is, what));
  const std::uint32_t len = get_u32(is, what);
  ck.rng_state.resize(len);
  read_exact(is, ck.rng_state.data(), len, what);
  return ck;
}

void save_optimizer_state(const std::string& path, const OptimizerState& st) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write optimizer state " + path);
  os.write("XAWO", 4);
  put_u64(os, st.step);
  put_u64(os, st.m.size());
  for (double x : st.m) put_f64(os, x);
  for (double x : st.v) put_f64(os, x);
  if (!os) throw std::runtime_error("write failed for optimizer state " + path);
}

OptimizerState load_optimizer_state(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open optimizer state " + path);
  const std::string what = "optimizer state " + path;
  expect_magic(is, "XAWO", what);
  OptimizerState st;
  st.step = get_u64(is, what);
  const std::uint64_t count = get_u64(is, what);
  st.m.resize(count);
  st.v.resize(count);
  for (double& x : st.m) x = get_f64(is, what);
  for (double& x : st.v) x = get_f64(is, what);
  return st;
}

}  // namespace xaw
