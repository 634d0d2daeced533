#pragma once

#include <cstdint>
#include <mutex>
#include <random>
#include <vector>

namespace memfl {

/// The single seeded generator owned by a run. mt19937_64's output sequence is
/// fixed by the standard, and bounded draws use rejection sampling, so results
/// are identical across standard libraries.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next();
  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);
  /// Uniform real in [0, 1).
  double unit();

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mutex mu_;
  std::mt19937_64 engine_;
};

}  // namespace memfl
