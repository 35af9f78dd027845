#include <cmath>
#include <numbers>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/polygamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "doctest.h"
#include "dpbe/errors.hpp"
#include "dpbe/specialfn.hpp"
#include "dpbe/stats.hpp"
#include "helpers.hpp"

using namespace dpbe;

TEST_SUITE("specialfn") {

TEST_CASE("psi0 reference values") {
    CHECK(psi0(1.0) == doctest::Approx(-0.57721566490153286).epsilon(1e-13));
    CHECK(std::abs(psi0(2.0) - (psi0(1.0) + 1.0)) < 1e-12);
    CHECK(std::abs(psi0(1000.0) - (std::log(1000.0) - 1.0 / 2000.0)) < 1e-5);
    // psi0(1/2) = -gamma - 2 log 2.
    CHECK(psi0(0.5) == doctest::Approx(-0.57721566490153286 - 2 * std::log(2.0)).epsilon(1e-13));
}

TEST_CASE("psi0 relative accuracy against an independent library") {
    for (double x : testutil::linspace_log(1e-3, 1e6, 400)) {
        const double ref = boost::math::digamma(x);
        CHECK(std::abs(psi0(x) - ref) <= 1e-12 * std::max(1.0, std::abs(ref)));
    }
}

TEST_CASE("psi1 and psi2 against the series oracle") {
    CHECK(std::abs(psi1(1.0) - testutil::hurwitz_zeta(2, 1.0)) < 1e-12);
    CHECK(std::abs(psi1(0.5) - testutil::hurwitz_zeta(2, 0.5)) < 1e-12);
    CHECK(psi1(1.0) == doctest::Approx(std::numbers::pi * std::numbers::pi / 6).epsilon(1e-13));
    CHECK(psi1(0.5) == doctest::Approx(std::numbers::pi * std::numbers::pi / 2).epsilon(1e-13));
    CHECK(std::abs(psi2(1.0) + 2 * testutil::hurwitz_zeta(3, 1.0)) < 1e-12);
    CHECK(psi2(1.0) == doctest::Approx(-2.4041138063191885).epsilon(1e-13));
    CHECK(std::abs(psi2(2.0) - (psi2(1.0) + 2.0)) < 1e-12);
    for (double x : {0.1, 0.37, 3.3, 12.5, 80.0}) {
        CHECK(psi1(x) == doctest::Approx(testutil::hurwitz_zeta(2, x)).epsilon(1e-12));
        CHECK(psi2(x) == doctest::Approx(-2 * testutil::hurwitz_zeta(3, x)).epsilon(1e-12));
        CHECK(psi1(x) == doctest::Approx(boost::math::trigamma(x)).epsilon(1e-12));
        CHECK(psi2(x) == doctest::Approx(boost::math::polygamma(2, x)).epsilon(1e-12));
    }
}

TEST_CASE("sandwich bounds on a log grid") {
    for (double x : {0.1, 1.0, 10.0, 100.0}) {
        CHECK(psi1(x) >= 1 / x);
        CHECK(psi1(x) <= 1 / x + 1 / (x * x));
    }
    const double m = std::abs(psi2(50.0));
    CHECK(psi2(50.0) < 0);
    CHECK(m >= 1.0 / 2500);
    CHECK(m <= 1.0 / 2500 + 2.0 / 125000);
    for (double x : testutil::linspace_log(1e-3, 1e4, 1000)) {
        const double a = psi1(x), b = std::abs(psi2(x));
        CHECK(a > 0);
        CHECK(psi2(x) < 0);
        CHECK(a >= 1 / x);
        CHECK(a <= 1 / x + 1 / (x * x));
        CHECK(b >= 1 / (x * x));
        CHECK(b <= 1 / (x * x) + 2 / (x * x * x));
    }
}

TEST_CASE("recurrences and monotonicity") {
    double prev0 = -INFINITY, prev1 = INFINITY;
    for (double x : testutil::linspace_log(0.1, 100, 500)) {
        CHECK(std::abs(psi0(x + 1) - psi0(x) - 1 / x) < 1e-10);
        CHECK(std::abs(psi1(x + 1) - psi1(x) + 1 / (x * x)) < 1e-10);
        CHECK(std::abs(psi2(x + 1) - psi2(x) - 2 / (x * x * x)) < 1e-10);
        CHECK(psi0(x) > prev0);
        CHECK(psi1(x) < prev1);
        prev0 = psi0(x);
        prev1 = psi1(x);
    }
}

TEST_CASE("domain errors") {
    CHECK_THROWS_AS(psi0(0.0), DomainError);
    CHECK_THROWS_AS(psi0(-1.0), DomainError);
    CHECK_THROWS_AS(psi0(NAN), DomainError);
    CHECK_THROWS_AS(psi1(0.0), DomainError);
    CHECK_THROWS_AS(psi2(-2.0), DomainError);
    CHECK_THROWS_AS(psi1_inv(0.0), DomainError);
    CHECK_THROWS_AS(psi1_inv(-1.0), DomainError);
    CounterRng rng;
    CHECK_THROWS_AS(gamma_sample(0.0, rng), DomainError);
    CHECK_THROWS_AS(free_energy_density(0.0), DomainError);
    CHECK_THROWS_AS(characteristic_params(0.3, 1, 1, 10), DomainError);
    CHECK_THROWS_AS(characteristic_params(0, 0, 1, 10), DomainError);
    CHECK_THROWS_AS(characteristic_params(0, 1, 0, 10), DomainError);
    CHECK_THROWS_AS(characteristic_params(0, 1, 1, 0), DomainError);
}

TEST_CASE("psi1_inv round trip and small argument") {
    CHECK(std::abs(psi1_inv(psi1(1.0)) - 1.0) < 1e-9);
    for (double x : testutil::linspace_log(0.05, 50, 300)) CHECK(std::abs(psi1_inv(psi1(x)) - x) < 1e-9 * std::max(1.0, x));
    const double x = psi1_inv(1e-4);
    CHECK(x >= 1e4 - 1);
    CHECK(x <= 1e4 + 1);
    CHECK(std::abs(psi1(x) - 1e-4) <= 1e-10);
    // Root of psi1(x) = 1 by bisection on the series oracle.
    double lo = 0.5, hi = 3;
    for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        (testutil::hurwitz_zeta(2, mid, 20000) > 1 ? lo : hi) = mid;
    }
    CHECK(psi1_inv(1.0) == doctest::Approx(0.5 * (lo + hi)).epsilon(1e-9));
}

TEST_CASE("psi1_inv residual property over random arguments") {
    testutil::Gen gen(11);
    for (int i = 0; i < 500; ++i) {
        const double y = gen.log_uniform(1e-6, 1e6);
        const double x = psi1_inv(y);
        CHECK(x > 0);
        CHECK(std::abs(psi1(x) - y) <= 1e-10 * std::max(1.0, y));
    }
}

TEST_CASE("gamma sampling moments") {
    const std::size_t N = 1000000;
    std::vector<double> a(N), b(N);
    CounterRng r1(StreamId{5, 0, substream::kAuxiliary});
    for (auto& v : a) v = gamma_sample(2.0, r1);
    const Estimate ma = mean_estimate(a);
    CHECK(std::abs(ma.value - 2.0) < 5 * ma.se);
    CounterRng r2(StreamId{5, 1, substream::kAuxiliary});
    for (auto& v : b) v = gamma_sample(0.5, r2);
    const Estimate vb = variance_estimate(b);
    CHECK(std::abs(vb.value - 0.5) < 5 * vb.se);

    std::vector<double> c(100000);
    CounterRng r3(StreamId{5, 2, substream::kAuxiliary});
    for (auto& v : c) v = -std::log(gamma_sample(1.3, r3));
    const Estimate mc = mean_estimate(c), vc = variance_estimate(c);
    CHECK(std::abs(mc.value + psi0(1.3)) < 5 * mc.se);
    CHECK(std::abs(vc.value - psi1(1.3)) < 5 * vc.se);
}

TEST_CASE("gamma sampling law and tiny shapes") {
    for (double shape : {0.05, 0.5, 1.0, 3.7}) {
        std::vector<double> x(20000);
        CounterRng rng(StreamId{9, 0, substream::kAuxiliary});
        for (auto& v : x) v = gamma_sample(shape, rng);
        const TestResult t = ks_one_sample(x, [&](double u) { return gamma_cdf(shape, u); });
        CHECK(t.p_value > 1e-3);
    }
    // The log sampler stays finite where the variate underflows.
    CounterRng rng(StreamId{9, 1, substream::kAuxiliary});
    std::vector<double> lg(20000);
    for (auto& v : lg) {
        v = log_gamma_sample(1e-3, rng);
        REQUIRE(std::isfinite(v));
    }
    const Estimate m = mean_estimate(lg);
    CHECK(std::abs(m.value - psi0(1e-3)) < 5 * m.se);
}

TEST_CASE("free energy density") {
    const double r = psi1_inv(1.0);
    CHECK(free_energy_density(1.0) == doctest::Approx(r - psi0(r)).epsilon(1e-13));
    const FreeEnergyCheck fc = free_energy_check(1.0);
    CHECK(std::abs(fc.stationarity) < 1e-9);
    CHECK(std::abs(fc.value - fc.variational) < 1e-12);
    // Grid search and golden-section refinement of t - psi0(t).
    double best = 0.01, bestv = INFINITY;
    for (double t = 0.01; t < 10; t += 0.01) {
        const double v = t - psi0(t);
        if (v < bestv) bestv = v, best = t;
    }
    double lo = best - 0.01, hi = best + 0.01;
    const double g = (std::sqrt(5.0) - 1) / 2;
    for (int i = 0; i < 200; ++i) {
        const double c = hi - g * (hi - lo), d = lo + g * (hi - lo);
        ((c - psi0(c)) < (d - psi0(d)) ? hi : lo) = (c - psi0(c)) < (d - psi0(d)) ? d : c;
    }
    CHECK(std::abs(0.5 * (lo + hi) - fc.minimizer) < 1e-6);
    // n F(n^{-1/4}) = n + O(sqrt n).
    for (double n : {1e2, 1e4, 1e6, 1e8}) {
        const double dev = n * free_energy_density(std::pow(n, -0.25)) - n;
        CHECK(std::abs(dev) < 3 * std::sqrt(n));
    }
}

TEST_CASE("characteristic parameters") {
    const ScaledParams a = characteristic_params(0, 1, 1, 10);
    CHECK(a.n_levels == 10);
    CHECK(a.t == doctest::Approx(10));
    CHECK(a.theta == doctest::Approx(psi1_inv(1.0)).epsilon(1e-14));
    CHECK(a.beta == 1.0);
    const ScaledParams b = characteristic_params(0.25, 1, 2, 16);
    CHECK(b.beta == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(b.t == doctest::Approx(8).epsilon(1e-15));
    CHECK(b.n_levels == 32);
    CHECK(b.log_offset == doctest::Approx(-2 * 31 * std::log(0.5)).epsilon(1e-14));
    CHECK(b.stationary_log_offset == doctest::Approx(-2 * 32 * std::log(0.5)).epsilon(1e-14));

    testutil::Gen gen(3);
    for (int i = 0; i < 300; ++i) {
        const double alpha = gen.uniform(0, 0.25);
        const double beta0 = gen.log_uniform(0.2, 5);
        const std::size_t n = gen.integer(1, 4096);
        const double tau = gen.log_uniform(1.0 / static_cast<double>(n), 16);
        if (std::round(tau * static_cast<double>(n)) < 1) continue;
        const ScaledParams p = characteristic_params(alpha, beta0, tau, n);
        CHECK(std::abs(static_cast<double>(p.n_levels) * psi1(p.theta) - p.t) < 1e-8 * p.t);
    }
}

}  // TEST_SUITE
