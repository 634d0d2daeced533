#include "memfl/rng.hpp"

#include <limits>

namespace memfl {

std::uint64_t SeededRng::next() {
  std::lock_guard lock(mu_);
  return engine_();
}

std::uint64_t SeededRng::below(std::uint64_t bound) {
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::lock_guard lock(mu_);
  for (;;) {
    const auto v = engine_();
    if (v < limit) return v % bound;
  }
}

double SeededRng::unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

}  // namespace memfl
