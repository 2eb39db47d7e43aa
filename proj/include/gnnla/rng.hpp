#pragma once

#include <cstdint>
#include <vector>

namespace gnnla {

/// SplitMix64 (Steele, Lea, Flood 2014). Every random draw in the library goes through
/// this generator so datasets, probes, and initial weights can be reproduced bit-for-bit
/// by any implementation:
///
///   state += 0x9E3779B97F4A7C15
///   z = state
///   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///   return z ^ (z >> 31)
///
/// uniform() maps the top 53 bits to [0, 1). Streams for sub-tasks are derived with
/// Rng::derive(seed, stream, index) so parallel work never changes the output.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    /// Independent stream keyed by (seed, stream tag, index).
    static Rng derive(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0);

    std::uint64_t next_u64();

    /// Uniform in [0, 1).
    double uniform();
    /// Uniform in [lo, hi).
    double uniform(double lo, double hi);
    /// Uniform integer in [lo, hi] (inclusive).
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
    /// Standard normal via Box-Muller (one value per call, two uniforms consumed).
    double normal();

    /// k distinct indices from [0, n) in draw order (partial Fisher-Yates).
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);
    /// Random permutation of [0, n).
    std::vector<std::size_t> permutation(std::size_t n);

private:
    std::uint64_t state_;
};

/// Stream tags used by Rng::derive.
namespace rng_stream {
inline constexpr std::uint64_t dataset = 1;
inline constexpr std::uint64_t probes = 2;
inline constexpr std::uint64_t init = 3;
inline constexpr std::uint64_t shuffle = 4;
inline constexpr std::uint64_t eigen_start = 5;
inline constexpr std::uint64_t test = 99;
} // namespace rng_stream

} // namespace gnnla
