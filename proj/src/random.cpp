#include "dpbe/random.hpp"

#include <algorithm>

#include <boost/random/normal_distribution.hpp>
#include <numbers>

#include "vmath.hpp"

#if defined(__AVX512F__)
#include <immintrin.h>
#endif

namespace dpbe {
namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

}  // namespace

Philox4x32Block philox4x32_10(Philox4x32Block c, std::array<std::uint32_t, 2> k) {
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            k[0] += kWeyl0;
            k[1] += kWeyl1;
        }
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, c[0], hi0, lo0);
        mulhilo(kMul1, c[2], hi1, lo1);
        c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }
    return c;
}

CounterRng::CounterRng(StreamId id) : id_(id) {
    const std::array<std::uint32_t, 2> key{static_cast<std::uint32_t>(id.seed),
                                           static_cast<std::uint32_t>(id.seed >> 32)};
    for (std::uint32_t block = 0; block < 2; ++block) {
        const auto out = philox4x32_10({block, 0, id.substream, id.replica}, key);
        state_[2 * block] = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
        state_[2 * block + 1] = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
    }
    // xoshiro must not start from the all-zero state.
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 0x9e3779b97f4a7c15ULL;
}

double CounterRng::normal() {
    boost::random::normal_distribution<double> dist;
    return dist(*this);
}

void CounterRng::fill_normal(std::span<double> out) {
    boost::random::normal_distribution<double> dist;
    for (double& x : out) x = dist(*this);
}

GaussianStream::GaussianStream(StreamId id) {
    const std::array<std::uint32_t, 2> key{static_cast<std::uint32_t>(id.seed),
                                           static_cast<std::uint32_t>(id.seed >> 32)};
    for (std::uint32_t lane = 0; lane < kLanes; ++lane) {
        // Counter word 1 = 1 keeps these blocks apart from CounterRng's.
        for (std::uint32_t half = 0; half < 2; ++half) {
            const auto out = philox4x32_10({2 * lane + half, 1, id.substream, id.replica}, key);
            s_[(2 * half) * kLanes + lane] = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
            s_[(2 * half + 1) * kLanes + lane] = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
        }
        if ((s_[lane] | s_[kLanes + lane] | s_[2 * kLanes + lane] | s_[3 * kLanes + lane]) == 0)
            s_[lane] = 0x9e3779b97f4a7c15ULL;
    }
}

namespace {

// Uniforms on (0, 1) from xoshiro256++ lanes; `count` is a multiple of 8.
void lane_uniforms(std::uint64_t* s, double* out, std::size_t count) {
#if defined(__AVX512F__) && defined(__AVX512DQ__)
    __m512i a = _mm512_load_si512(s), b = _mm512_load_si512(s + 8);
    __m512i c = _mm512_load_si512(s + 16), d = _mm512_load_si512(s + 24);
    const __m512d half = _mm512_set1_pd(0.5), scale = _mm512_set1_pd(0x1.0p-53);
    for (std::size_t i = 0; i < count; i += 8) {
        const __m512i r = _mm512_add_epi64(_mm512_rol_epi64(_mm512_add_epi64(a, d), 23), a);
        const __m512i t = _mm512_slli_epi64(b, 17);
        c = _mm512_xor_si512(c, a);
        d = _mm512_xor_si512(d, b);
        b = _mm512_xor_si512(b, c);
        a = _mm512_xor_si512(a, d);
        c = _mm512_xor_si512(c, t);
        d = _mm512_rol_epi64(d, 45);
        const __m512d u = _mm512_cvtepu64_pd(_mm512_srli_epi64(r, 11));
        _mm512_storeu_pd(out + i, _mm512_mul_pd(_mm512_add_pd(u, half), scale));
    }
    _mm512_store_si512(s, a);
    _mm512_store_si512(s + 8, b);
    _mm512_store_si512(s + 16, c);
    _mm512_store_si512(s + 24, d);
#else
    auto rotl = [](std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); };
    std::uint64_t *a = s, *b = s + 8, *c = s + 16, *d = s + 24;
    for (std::size_t i = 0; i < count; i += 8) {
        for (std::size_t l = 0; l < 8; ++l) {
            const std::uint64_t r = rotl(a[l] + d[l], 23) + a[l];
            const std::uint64_t t = b[l] << 17;
            c[l] ^= a[l];
            d[l] ^= b[l];
            b[l] ^= c[l];
            a[l] ^= d[l];
            c[l] ^= t;
            d[l] = rotl(d[l], 45);
            out[i + l] = (static_cast<double>(r >> 11) + 0.5) * 0x1.0p-53;
        }
    }
#endif
}

}  // namespace

void GaussianStream::next_batch(double* out) {
    constexpr std::size_t half = kBatch / 2;
    alignas(64) std::array<double, half> radius;
    alignas(64) std::array<double, half> angle;
    lane_uniforms(s_.data(), radius.data(), half);
    lane_uniforms(s_.data(), angle.data(), half);
    detail::log_inplace(radius);
    for (double& r : radius) r = std::sqrt(-2.0 * r);
    for (double& u : angle) u *= 2.0 * std::numbers::pi;
    std::copy(angle.begin(), angle.end(), out + half);
    detail::cos_inplace({out + half, half});
    detail::sin_inplace(angle);
    for (std::size_t i = 0; i < half; ++i) {
        out[i] = radius[i] * out[half + i];
        out[half + i] = radius[i] * angle[i];
    }
}

void GaussianStream::fill(std::span<double> out) {
    std::size_t i = 0;
    for (; i + kBatch <= out.size(); i += kBatch) next_batch(out.data() + i);
    if (i < out.size()) {
        alignas(64) std::array<double, kBatch> tmp;
        next_batch(tmp.data());
        std::copy_n(tmp.begin(), out.size() - i, out.begin() + static_cast<std::ptrdiff_t>(i));
    }
}

}  // namespace dpbe
