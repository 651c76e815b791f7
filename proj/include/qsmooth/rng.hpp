#pragma once

#include <cstdint>
#include <string_view>

namespace qsmooth {

/// Counter-based normal generator: the value at (seed, stream, counter) is a
/// pure function of those three numbers, so streams never interfere and any
/// entry can be regenerated independently.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::string_view stream_name);

  std::uint64_t bits(std::uint64_t counter) const noexcept;
  /// Uniform on the open interval (0, 1).
  double uniform(std::uint64_t counter) const noexcept;
  /// Standard normal via Box-Muller; counters 2j and 2j+1 share one pair.
  double normal(std::uint64_t counter) const noexcept;

 private:
  std::uint64_t key_;
};

std::uint64_t fnv1a64(std::string_view data) noexcept;

}  // namespace qsmooth
