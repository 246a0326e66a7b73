#pragma once

#include <cstdint>
#include <random>

namespace ortho {

// Deterministic random stream. mt19937_64 has a fully specified output
// sequence; the transforms below avoid std:: distributions, whose output is
// implementation-defined and would break reproducibility across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Unbiased integer in [0, n). n must be positive.
  std::uint64_t uniform_int(std::uint64_t n);

  // Standard normal (Marsaglia polar, spare value cached).
  double normal();

  // Independent stream for a given run index, so multi-run drivers produce
  // the same results under any execution order.
  static Rng derived(std::uint64_t seed, std::uint64_t stream);

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace ortho
