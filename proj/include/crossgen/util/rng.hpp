#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace crossgen {

// Seeded random stream with a portable sampling layer on top of mt19937_64.
// The standard distributions are implementation-defined, so uniform and
// normal draws are derived here to keep datasets and checkpoints
// reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n); n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);

  // Standard normal via Box-Muller; the second variate is cached.
  double normal();

  std::string serialize() const;
  static Rng deserialize(const std::string& state);

  friend bool operator==(const Rng& a, const Rng& b) {
    return a.engine_ == b.engine_ && a.has_spare_ == b.has_spare_ &&
           (!a.has_spare_ || a.spare_ == b.spare_);
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Independent seed for a named stage ("split/fsdd", "align/scd/train", ...).
std::uint64_t derive_seed(std::uint64_t master, std::string_view stage);

}  // namespace crossgen
