#pragma once

// Shared oracles and generators for the unit tests.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dpbe/random.hpp"

namespace testutil {

/// sum_{k>=0} 1 / (x + k)^p with an Euler-Maclaurin tail after N terms.
inline double hurwitz_zeta(double p, double x, std::size_t terms = 100000) {
    long double s = 0;
    for (std::size_t k = terms; k-- > 0;) s += 1.0L / std::pow(static_cast<long double>(x + k), p);
    const long double a = x + static_cast<long double>(terms);
    s += std::pow(a, 1 - p) / (p - 1) + 0.5L * std::pow(a, -p) + p / 12.0L * std::pow(a, -p - 1);
    return static_cast<double>(s);
}

/// Hand-rolled generator: uniform doubles and integers from a fixed stream.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(dpbe::StreamId{seed, 0, dpbe::substream::kAuxiliary}) {}
    double uniform(double a, double b) { return a + (b - a) * rng_.uniform(); }
    double log_uniform(double a, double b) { return std::exp(uniform(std::log(a), std::log(b))); }
    std::size_t integer(std::size_t lo, std::size_t hi) {
        return lo + static_cast<std::size_t>(rng_() % (hi - lo + 1));
    }
    dpbe::CounterRng& rng() { return rng_; }

private:
    dpbe::CounterRng rng_;
};

/// Fresh empty directory under the system temp path.
inline std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("dpbe_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline std::vector<double> linspace_log(double a, double b, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = std::exp(std::log(a) + (std::log(b) - std::log(a)) * static_cast<double>(i) / (n - 1));
    return v;
}

}  // namespace testutil
