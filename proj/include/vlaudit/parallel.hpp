#pragma once

#include <cstdint>
#include <random>

namespace vlaudit {

/// Caps the number of OpenMP threads used by every parallel kernel.
/// `n == 0` restores the runtime default. No-op in builds without OpenMP.
void set_thread_count(int n);
int thread_count();

/// Independent generator for one task of a seeded computation.
///
/// Every randomised kernel draws task `index` of logical stream `stream`
/// from this generator, so results do not depend on which thread runs
/// the task or in which order.
inline std::mt19937_64 task_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                      static_cast<std::uint32_t>(index >> 32)};
    return std::mt19937_64(seq);
}

/// Seed for a nested seeded computation (e.g. the projections of one repeat).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    return task_rng(seed, stream, index)();
}

}  // namespace vlaudit
