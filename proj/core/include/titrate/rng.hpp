#pragma once

// Counter-based random streams.
//
// Every draw in the workbench comes from a Philox4x32-10 block cipher keyed by
// the run seed, with the counter carrying (domain, arm, purpose, index). Two
// streams with different keys never overlap, so subjects can be simulated in
// any order (or in parallel) and still receive the same numbers, and the
// observed and ground-truth regimes can share random effects and residuals.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace titrate::rng {

using Block = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

/// One application of the Philox4x32 bijection with 10 rounds.
constexpr Block philox4x32_10(Block ctr, Key key) noexcept {
  constexpr std::uint32_t kM0 = 0xD2511F53u;
  constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u;
  constexpr std::uint32_t kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kW0;
      key[1] += kW1;
    }
    const std::uint64_t p0 = std::uint64_t{kM0} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{kM1} * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

/// Separates the families of streams used by different stages.
enum class Domain : std::uint8_t {
  kTrial = 1,
  kPilot = 2,
  kNlmeCounterfactual = 3,
  kGFormula = 4,
  kTest = 250,
};

/// Purposes of the per-subject streams drawn during trial simulation.
enum class Purpose : std::uint16_t {
  kEta = 1,
  kEps1 = 11,  // kEps1 + t for t = 0..3
  kIe1 = 21,   // kIe1 + t for t = 0..2
};

struct StreamKey {
  std::uint64_t seed = 0;
  Domain domain = Domain::kTrial;
  std::uint8_t arm = 0;
  std::uint16_t purpose = 0;
  std::uint32_t index = 0;
};

/// A single counter-based stream. Cheap to construct; not shared across threads.
class Stream {
 public:
  explicit Stream(const StreamKey& k) noexcept
      : key_{static_cast<std::uint32_t>(k.seed), static_cast<std::uint32_t>(k.seed >> 32)},
        tag_{(std::uint32_t{static_cast<std::uint8_t>(k.domain)} << 24) |
             (std::uint32_t{k.arm} << 16) | std::uint32_t{k.purpose}},
        index_{k.index} {}

  std::uint32_t next_u32() noexcept {
    if (pos_ == 4) {
      buf_ = philox4x32_10({block_++, tag_, index_, 0u}, key_);
      pos_ = 0;
    }
    return buf_[pos_++];
  }

  std::uint64_t next_u64() noexcept {
    const std::uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
  }

  /// Uniform on the open interval (0, 1) with 53 bits of resolution.
  double uniform() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double theta = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // UniformRandomBitGenerator interface.
  using result_type = std::uint32_t;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return 0xFFFFFFFFu; }
  result_type operator()() noexcept { return next_u32(); }

 private:
  Key key_;
  std::uint32_t tag_;
  std::uint32_t index_;
  std::uint32_t block_ = 0;
  Block buf_{};
  int pos_ = 4;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline Stream make_stream(std::uint64_t seed, Domain domain, int arm, std::uint16_t purpose,
                          std::uint32_t index) {
  return Stream(StreamKey{seed, domain, static_cast<std::uint8_t>(arm), purpose, index});
}

}  // namespace titrate::rng
