#pragma once

// Index-parallel loop and seed derivation. Work is split into independent
// indices, each with its own seed stream, so results do not depend on the
// thread count.

#include <cstddef>
#include <cstdint>
#include <functional>

namespace vocstress {

// Runs body(i) for i in [0, n) on up to `threads` workers (0 = hardware
// concurrency). The first exception thrown by any body is rethrown.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& body);

// SplitMix64 mix of (base, stream): independent seeds for per-item RNGs.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept;

}  // namespace vocstress
