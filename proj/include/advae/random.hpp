#pragma once

// Deterministic RNG stream. All randomness in the library flows through
// RngStream so that runs are reproducible bit-for-bit given a seed. The
// normal sampler is an explicit Box-Muller transform rather than
// std::normal_distribution, whose output is implementation-defined.

#include <bit>
#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "advae/common.hpp"

namespace advae {

class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  // Uniform draw in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform draw in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal draw via Box-Muller; the second value of each pair is
  // cached so consecutive calls consume the engine at a fixed rate.
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    // u1 in (0, 1] keeps the log finite.
    double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
  }

  void fill_normal(std::vector<double>& out) {
    for (auto& v : out) v = normal();
  }

  // Index draw from unnormalized nonnegative weights.
  std::size_t categorical(const std::vector<double>& weights) {
    if (weights.empty()) throw ConfigError("categorical: empty weight vector");
    double total = 0.0;
    for (double w : weights) {
      if (w < 0.0) throw ConfigError("categorical: negative weight");
      total += w;
    }
    if (total <= 0.0) throw ConfigError("categorical: weights sum to zero");
    double u = uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
      acc += weights[i];
      if (u < acc) return i;
    }
    return weights.size() - 1;
  }

  // State round-trips through a printable string so checkpoints can resume
  // the exact stream position.
  std::string save_state() const {
    std::ostringstream os;
    os << engine_;
    os << ' ' << (has_cached_ ? 1 : 0) << ' '
       << std::bit_cast<std::uint64_t>(cached_);
    return os.str();
  }

  void load_state(const std::string& state) {
    std::istringstream is(state);
    is >> engine_;
    int flag = 0;
    std::uint64_t bits = 0;
    is >> flag >> bits;
    if (is.fail()) throw IoError("RngStream: malformed state string");
    has_cached_ = (flag != 0);
    cached_ = std::bit_cast<double>(bits);
  }

 private:
  std::mt19937_64 engine_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace advae
