#include "xaw/rng.hpp"

#include <sstream>

#include "xaw/errors.hpp"

namespace xaw {

// The textual engine state is standardized, so it is portable.
std::string rng_state(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

void set_rng_state(Rng& rng, const std::string& state) {
  std::istringstream is(state);
  is >> rng;
  if (!is) throw ParseError("invalid RNG state");
}

}  // namespace xaw
