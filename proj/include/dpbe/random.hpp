#pragma once

// Counter-keyed random streams.
//
// A stream is addressed by (seed, replica, substream). Its starting state is
// the Philox4x32-10 encryption of the counter {0, 0, substream, replica} and
// {1, 0, substream, replica} under the 64-bit seed as key; the stream then
// runs xoshiro256++ from that state. Any stream can be reproduced without
// replaying others, so results do not depend on which worker touched which
// stream first.

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>

namespace dpbe {

using Philox4x32Block = std::array<std::uint32_t, 4>;

/// One Philox4x32-10 block.
Philox4x32Block philox4x32_10(Philox4x32Block counter, std::array<std::uint32_t, 2> key);

/// SplitMix64 finalizer; used to derive per-experiment-point seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed for a sub-experiment (e.g. one (n, tau) point of a sweep).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag) {
    return splitmix64(master ^ splitmix64(tag + 0x632be59bd9b4e019ULL));
}

/// Reserved substream identifiers. Levels use 2k (forward in time) and 2k+1
/// (backward from time 0).
namespace substream {
constexpr std::uint32_t level_forward(std::uint32_t k) { return 2 * k; }
constexpr std::uint32_t level_backward(std::uint32_t k) { return 2 * k + 1; }
inline constexpr std::uint32_t kBoundaryWeights = 0xFFFFFF00u;
inline constexpr std::uint32_t kPathSampler = 0xFFFFFF10u;
inline constexpr std::uint32_t kBootstrap = 0xFFFFFF20u;
inline constexpr std::uint32_t kAuxiliary = 0xFFFFFF30u;
}  // namespace substream

struct StreamId {
    std::uint64_t seed = 0;
    std::uint32_t replica = 0;
    std::uint32_t substream = 0;
};

/// Keyed stream satisfying UniformRandomBitGenerator (64-bit outputs).
class CounterRng {
public:
    using result_type = std::uint64_t;

    CounterRng() : CounterRng(StreamId{}) {}
    explicit CounterRng(StreamId id);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform on the open interval (0, 1), 53-bit resolution.
    double uniform() {
        return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard Gaussian.
    double normal();

    /// Fill with i.i.d. standard Gaussians.
    void fill_normal(std::span<double> out);

    StreamId id() const { return id_; }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    StreamId id_{};
    std::array<std::uint64_t, 4> state_{};
};

/// Bulk standard Gaussians for Brownian increments: eight interleaved
/// xoshiro256++ lanes (each seeded from its own Philox blocks of the stream
/// id) feeding a vectorized Box-Muller transform. Output comes in batches of
/// kBatch values; the sequence is a deterministic function of the id.
class GaussianStream {
public:
    static constexpr std::size_t kLanes = 8;
    static constexpr std::size_t kBatch = 256;

    explicit GaussianStream(StreamId id);

    /// Writes the next kBatch values to out[0..kBatch).
    void next_batch(double* out);

    /// Sequential fill; a partially used batch is discarded at the end, so
    /// fill(x) of length L equals the first L values of consecutive batches.
    void fill(std::span<double> out);

private:
    alignas(64) std::array<std::uint64_t, 4 * kLanes> s_{};
};

}  // namespace dpbe
