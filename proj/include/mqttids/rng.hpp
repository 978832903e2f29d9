#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace mqttids {

/// splitmix64 finalizer; used to derive independent sub-seeds from a master
/// seed and a counter so results never depend on thread scheduling.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t counter) noexcept;
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) noexcept;

// std::mt19937_64 is fully specified by the standard, but the std
// distributions are not, so the draws below are implemented by hand to keep
// outputs identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

  /// Uniform double in [0, 1).
  double uniform();

  /// Standard normal via Box-Muller.
  double normal();

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace mqttids
