#pragma once

#include <cstdint>

namespace rbsde {

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Counter-based generator: the n-th draw of stream `stream` under `seed` is a pure
/// function of (seed, stream, n), so results do not depend on platform or on the
/// order in which streams are consumed.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

    std::uint64_t next_u64() noexcept;

    /// Uniform on the open interval (0, 1).
    double uniform() noexcept;

    /// Standard normal via Box-Muller; the second variate of each pair is cached.
    double normal() noexcept;

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace rbsde
