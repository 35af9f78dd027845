#include <cmath>
#include <sstream>
#include <utility>
#include <vector>

#include "doctest.h"
#include "dpbe/environment.hpp"
#include "dpbe/errors.hpp"
#include "dpbe/partition.hpp"
#include "dpbe/stats.hpp"
#include "helpers.hpp"

using namespace dpbe;

namespace {

/// Linear-domain recursion in extended precision, seeded like `table`.
std::vector<std::vector<long double>> direct_table(const DPTable& table, const Environment& env) {
    const std::size_t M = table.grid.m_count;
    std::vector<std::vector<long double>> u(table.n + 1, std::vector<long double>(M + 1));
    for (std::size_t m = 0; m <= M; ++m) u[0][m] = std::exp(static_cast<long double>(table.at(0, m)));
    for (std::size_t k = 1; k <= table.n; ++k) {
        const auto b = env.prefix(k);
        const long double beta = table.beta;
        long double acc = 0;
        const long double seed = std::exp(static_cast<long double>(table.seed_log[k]));
        for (std::size_t m = 0; m <= M; ++m) {
            if (m > 0) {
                const long double h = table.grid.width(m - 1);
                acc += h / 2 * (u[k - 1][m - 1] * std::exp(-beta * b[m - 1]) +
                                u[k - 1][m] * std::exp(-beta * b[m]));
            }
            u[k][m] = std::exp(beta * b[m]) * (seed + acc);
        }
    }
    return u;
}

double log_factorial(int n) { return std::lgamma(n + 1.0); }

}  // namespace

TEST_SUITE("partition") {

TEST_CASE("zero environment closed forms") {
    for (int n : {2, 3, 5}) {
        const Environment env = zero_environment(n, GridSpec::make(1, 1e-3));
        const DPTable t = ptp_forward(env, n);
        CHECK(std::abs(t.final_value() + log_factorial(n - 1)) < 5e-3);
        // The trapezoid rule integrates polynomials of degree <= 1 exactly.
        if (n == 2) CHECK(std::abs(t.final_value()) < 1e-12);
        CHECK(std::abs(ptp_final(env, n) - t.final_value()) < 1e-12);
    }
    const Environment env = zero_environment(3, GridSpec::make(1, 1e-3));
    CHECK(std::abs(ptp_forward(env, 3).final_value() - std::log(0.5)) < 5e-3);

    const Environment z2 = zero_environment(2, GridSpec::make(1, 1e-3));
    const DPTable s = stationary_forward(z2, zero_boundary(2), 0.0, 2);
    CHECK(std::abs(std::exp(s.final_value()) - 2.5) / 2.5 < 5e-3);
    // sum_{i<=n} t^i / i! at other horizons.
    const Environment z4 = zero_environment(4, GridSpec::make(2, 1e-3));
    const double ref = 1 + 2 + 2 + 8.0 / 6 + 16.0 / 24;
    CHECK(std::exp(stationary_forward(z4, zero_boundary(4), 0.0, 4).final_value()) ==
          doctest::Approx(ref).epsilon(1e-5));
}

TEST_CASE("single level is exact") {
    for (std::uint32_t rep = 0; rep < 5; ++rep) {
        const Environment env = generate(3, GridSpec::make(2.5, 0.01), 77, rep);
        const DPTable t = ptp_forward(env, 3);
        for (std::size_t m = 0; m <= t.grid.m_count; ++m)
            CHECK(std::abs(t.at(1, m) - env.increment(1, 0, t.grid.time(m))) < 1e-12);
    }
}

TEST_CASE("stationary base row") {
    const Environment env = generate(3, GridSpec::make(2, 0.01), 5, 0);
    CounterRng rng(StreamId{5, 0, substream::kBoundaryWeights});
    const BoundaryWeights bw = sample_boundary(1.3, 3, rng);
    const DPTable t = stationary_forward(env, bw, 1.3, 3);
    for (std::size_t m = 0; m <= t.grid.m_count; ++m)
        CHECK(t.at(0, m) == -env.prefix(0)[m] + 1.3 * t.grid.time(m));
    for (std::size_t k = 1; k <= 3; ++k) CHECK(t.at(k, 0) == doctest::Approx(bw.cumulative(k)).epsilon(1e-14));
}

TEST_CASE("quadrature oracle for two levels") {
    // Fine reference grid; the DP grids are exact subsamples of it.
    const GridSpec fine = GridSpec::uniform(1, 1e-3 / 16);
    double err1 = 0, err2 = 0;
    for (std::uint32_t rep = 0; rep < 8; ++rep) {
        const Environment env = generate(2, fine, 31, rep);
        const auto b1 = env.prefix(1), b2 = env.prefix(2);
        long double s = 0;
        for (std::size_t m = 0; m < fine.m_count; ++m) {
            const long double f0 = std::exp(static_cast<long double>(b1[m] + b2[fine.m_count] - b2[m]));
            const long double f1 =
                std::exp(static_cast<long double>(b1[m + 1] + b2[fine.m_count] - b2[m + 1]));
            s += fine.width(m) / 2 * (f0 + f1);
        }
        const double oracle = static_cast<double>(std::log(s));
        Environment half = env.coarsened().coarsened().coarsened();
        Environment full = half.coarsened();
        REQUIRE(full.grid().delta == doctest::Approx(1e-3));
        const double e1 = std::abs(ptp_final(full, 2) - oracle);
        const double e2 = std::abs(ptp_final(half, 2) - oracle);
        CHECK(e1 < 1e-3);
        err1 += e1;
        err2 += e2;
    }
    CHECK(err2 < err1);
}

TEST_CASE("log-domain accumulation matches extended precision") {
    testutil::Gen gen(21);
    for (int trial = 0; trial < 6; ++trial) {
        const std::size_t n = gen.integer(2, 8);
        const GridSpec g = GridSpec::make(gen.uniform(0.5, 6), gen.uniform(0.005, 0.05));
        const Environment env = generate(n, g, 100 + trial, 0);
        const DPTable p = ptp_forward(env, n);
        const BoundaryWeights bw = sample_boundary(0.8, n, 100 + trial, 0);
        const DPTable s = stationary_forward(env, bw, 0.8, n);
        for (const DPTable* t : {&p, &s}) {
            const auto ref = direct_table(*t, env);
            for (std::size_t k = 1; k <= n; ++k)
                for (std::size_t m = 1; m <= g.m_count; m += 7) {
                    const double r = static_cast<double>(std::log(ref[k][m]));
                    REQUIRE(std::abs(t->at(k, m) - r) <= 1e-10 * std::max(1.0, std::abs(r)));
                }
        }
    }
}

TEST_CASE("wide dynamic range stays finite") {
    // Large theta and long horizons drive the log values far apart.
    const Environment env = generate(40, GridSpec::make(200, 0.05), 9, 0);
    const BoundaryWeights bw = sample_boundary(6.0, 40, 9, 0);
    const DPTable s = stationary_forward(env, bw, 6.0, 40);
    const DPTable p = ptp_forward(env, 40);
    for (std::size_t k = 1; k <= 40; ++k)
        for (std::size_t m = 1; m <= s.grid.m_count; ++m) {
            REQUIRE(std::isfinite(s.at(k, m)));
            REQUIRE(std::isfinite(p.at(k, m)));
        }
}

TEST_CASE("point-to-point rows are nondecreasing in zero environment and integrals accumulate") {
    const Environment zero = zero_environment(6, GridSpec::make(3, 0.01));
    const DPTable z = ptp_forward(zero, 6);
    for (std::size_t k = 2; k <= 6; ++k)
        for (std::size_t m = 1; m <= z.grid.m_count; ++m) REQUIRE(z.at(k, m) >= z.at(k, m - 1));
    // In a random environment log Z^(k) - B_k is the log of a growing integral.
    const Environment env = generate(6, GridSpec::make(3, 0.01), 4, 0);
    const DPTable t = ptp_forward(env, 6);
    for (std::size_t k = 2; k <= 6; ++k) {
        CHECK(t.at(k, 0) == -INFINITY);
        for (std::size_t m = 2; m <= t.grid.m_count; ++m)
            REQUIRE(t.at(k, m) - env.prefix(k)[m] >= t.at(k, m - 1) - env.prefix(k)[m - 1]);
    }
}

TEST_CASE("grid refinement") {
    const Environment z = zero_environment(4, GridSpec::uniform(2, 0.02));
    const Environment zf = zero_environment(4, GridSpec::uniform(2, 0.02).refined());
    CHECK(std::abs(ptp_final(z, 4) - ptp_final(zf, 4)) < 1e-3);
    const Environment env = generate(8, GridSpec::uniform(8, 0.005), 12, 0);
    const Environment coarse = env.coarsened();
    const BoundaryWeights bw = sample_boundary(1.0, 8, 12, 0);
    CHECK(std::abs(ptp_final(env, 8) - ptp_final(coarse, 8)) < 0.05);
    CHECK(std::abs(stationary_final(env, bw, 1.0, 8) - stationary_final(coarse, bw, 1.0, 8)) < 0.05);
}

TEST_CASE("streaming sweeps agree with tables") {
    const GridSpec g = GridSpec::uniform(10, 0.01);
    const Environment env = generate(12, g, 55, 2);
    const EnvironmentStream stream(12, g, 55, 2);
    const BoundaryWeights bw = sample_boundary(1.0, 12, 55, 2);
    const DPTable s = stationary_forward(env, bw, 1.0, 12);
    const DPTable p = ptp_forward(env, 12);
    CHECK(ptp_final(stream, 12) == doctest::Approx(p.final_value()).epsilon(1e-13));
    CHECK(stationary_final(stream, bw, 1.0, 12) == doctest::Approx(s.final_value()).epsilon(1e-13));
    const auto col = stationary_final_column(stream, bw, 1.0, 12);
    for (std::size_t k = 0; k <= 12; ++k) CHECK(col[k] == doctest::Approx(s.at(k, g.m_count)).epsilon(1e-13));
    std::vector<std::pair<std::size_t, std::size_t>> pts{{3, 100}, {12, 1000}, {7, 0}, {12, 417}};
    const auto vals = stationary_values_at(stream, bw, 1.0, 12, pts);
    for (std::size_t i = 0; i < pts.size(); ++i)
        CHECK(vals[i] == doctest::Approx(s.at(pts[i].first, pts[i].second)).epsilon(1e-13));
}

TEST_CASE("scaling maps") {
    const ScalingMap a = scaling_map(5, 4, 1);
    CHECK(a.n == 5);
    CHECK(a.t == 4);
    CHECK(a.beta == 1);
    CHECK(a.log_offset == 0);
    const ScalingMap b = scaling_map(3, 100, 0.1);
    CHECK(b.n == 3);
    CHECK(b.t == doctest::Approx(1).epsilon(1e-14));
    CHECK(b.beta == 1);
    CHECK(b.log_offset == doctest::Approx(-4 * std::log(0.1)).epsilon(1e-14));
    const ScalingMap c = stationary_scaling_map(4, 8, 0.5, 0.5);
    CHECK(c.t == doctest::Approx(2));
    CHECK(c.theta == doctest::Approx(1));
    CHECK(c.log_offset == doctest::Approx(-8 * std::log(0.5)));
}

TEST_CASE("direct beta equals its image on the scaled environment") {
    // Z(beta) on B equals beta^{-2(n-1)} Z(1) on the Brownian-scaled copy
    // beta B(t / beta^2); with a fixed grid this holds node for node.
    const double beta = 0.5;
    const GridSpec g = GridSpec::uniform(8, 0.01);
    const Environment env = generate(5, g, 3, 0);
    const GridSpec gi = GridSpec::uniform(8 * beta * beta, 0.01 * beta * beta);
    REQUIRE(gi.m_count == g.m_count);
    std::vector<double> data;
    for (std::size_t k = 0; k <= 5; ++k)
        for (double v : env.window_prefix(k)) data.push_back(beta * v);
    const Environment image(5, gi, env.seed_info(), data);
    const ScalingMap map = scaling_map(5, 8, beta);
    CHECK(ptp_final(env, 5, beta) ==
          doctest::Approx(ptp_final(image, 5) + map.log_offset).epsilon(1e-12));
}

TEST_CASE("Burke boundary weights") {
    CounterRng rng(StreamId{13, 0, substream::kBoundaryWeights});
    const BoundaryWeights bw = sample_boundary(2.0, 100000, rng);
    const Estimate m = mean_estimate(bw.r0), v = variance_estimate(bw.r0);
    CHECK(std::abs(m.value + psi0(2.0)) < 5 * m.se);
    CHECK(std::abs(v.value - psi1(2.0)) < 5 * v.se);
    std::vector<double> g(bw.r0.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = std::exp(-bw.r0[i]);
    CHECK(ks_one_sample(g, [](double x) { return gamma_cdf(2.0, x); }).p_value > 1e-3);
    CHECK(bw.cumulative(0) == 0);
    CHECK(bw.cumulative(2) == bw.r0[0] + bw.r0[1]);
    CHECK_THROWS_AS(sample_boundary(0.0, 3, rng), DomainError);
    const BoundaryWeights a = sample_boundary(1.0, 5, 9, 4), b = sample_boundary(1.0, 5, 9, 4);
    CHECK(a.r0 == b.r0);
}

TEST_CASE("telescoping and increments") {
    const Environment env = generate(10, GridSpec::make(10 * psi1(1.5), 0.01), 1, 0);
    const BoundaryWeights bw = sample_boundary(1.5, 10, 1, 0);
    const DPTable t = stationary_forward(env, bw, 1.5, 10);
    const BurkeIncrements inc = burke_increments(t);
    CHECK(inc.telescoping_residual < 1e-9);
    for (std::size_t k = 1; k <= 10; ++k) {
        CHECK(inc.r_at(k, 0) == doctest::Approx(bw.r0[k - 1]).epsilon(1e-12));
        CHECK(inc.r_at(k, 50) == t.at(k, 50) - t.at(k - 1, 50));
        CHECK(inc.y_increment(k, 20, 60) ==
              doctest::Approx(1.5 * (t.grid.time(60) - t.grid.time(20)) - t.at(k, 60) + t.at(k, 20)));
    }
    CHECK_THROWS_AS(burke_increments(ptp_forward(env, 10)), KindError);
}

TEST_CASE("stationarity in law across horizons") {
    // log U_n(t) + B(t) - theta t = sum_k r_k(t) has a law independent of t.
    const std::size_t n = 5, R = 1000;
    const double theta = 1.0;
    std::vector<double> a(R), b(R);
    for (std::uint32_t r = 0; r < R; ++r) {
        for (double t : {3.0, 7.0}) {
            const Environment env = generate(n, GridSpec::make(t, 0.01), 808, r);
            const BoundaryWeights bw = sample_boundary(theta, n, 808, r);
            const double v = stationary_final(env, bw, theta, n) + env.prefix(0).back() - theta * t;
            (t == 3.0 ? a : b)[r] = v;
        }
    }
    CHECK(ks_two_sample(a, b).p_value > 1e-3);
}

TEST_CASE("KPZ partition function") {
    const double tau = 1;
    const std::size_t n = 16;
    const KpzSetup s = kpz_setup(tau, n);
    CHECK(s.levels == 16);
    CHECK(s.beta == doctest::Approx(0.5));
    CHECK(s.t == doctest::Approx(4));
    CHECK(s.theta == doctest::Approx(psi1_inv(0.25)));
    CHECK(kpz_setup(tau, n, KpzTheta::literal).theta == doctest::Approx(psi1_inv(0.25) / 0.5));

    const Phi zero{[](double) { return 0.0; }, 0};
    const Phi shift{[](double) { return 0.3; }, 0.3};
    const Phi wave{[](double x) { return std::sin(x); }, 1};
    const double T = kpz_truncation(s, 1, 1e-8);
    CHECK(T > 0);
    for (std::uint32_t rep = 0; rep < 10; ++rep) {
        const GridSpec g = GridSpec::uniform(s.t, 0.01, T);
        const Environment env = generate(s.levels, g, 606, rep);
        const double z0 = kpz_logZ(env, nullptr, tau, n, &zero);
        const double zc = kpz_logZ(env, nullptr, tau, n, &shift);
        const double zw = kpz_logZ(env, nullptr, tau, n, &wave);
        CHECK(std::abs(zc - z0 - 0.3) < 1e-12);
        CHECK(std::abs(zw - z0) <= 1.0);

        const BoundaryWeights bw = sample_boundary(s.theta, s.levels, 606, rep);
        const double burke = kpz_logZ(env, &bw, tau, n, nullptr);
        const DPTable table = stationary_forward(env, bw, s.theta, s.levels);
        CHECK(std::abs(burke - (table.final_value() + s.renormalization)) < 1e-12);
    }
    const Environment short_env = generate(s.levels, GridSpec::uniform(s.t, 0.01), 1, 0);
    CHECK_THROWS_AS(kpz_logZ(short_env, nullptr, tau, n, &wave), BudgetError);
    CHECK_THROWS_AS(kpz_logZ(short_env, nullptr, tau, n, nullptr), DomainError);
    const Phi unbounded{[](double x) { return x; }, INFINITY};
    CHECK_THROWS_AS(kpz_logZ(short_env, nullptr, tau, n, &unbounded), DomainError);
}

TEST_CASE("explicit boundary integral and Burke weights agree in law") {
    const double tau = 1;
    const std::size_t n = 16, R = 400;
    const KpzSetup s = kpz_setup(tau, n);
    const Phi zero{[](double) { return 0.0; }, 0};
    const double T = kpz_truncation(s, 0, 1e-8);
    std::vector<double> a(R), b(R);
    for (std::uint32_t r = 0; r < R; ++r) {
        const Environment env = generate(s.levels, GridSpec::uniform(s.t, 0.002, T), 707, r);
        a[r] = kpz_logZ(env, nullptr, tau, n, &zero);
        const BoundaryWeights bw = sample_boundary(s.theta, s.levels, 707, r);
        b[r] = kpz_logZ(env, &bw, tau, n, nullptr);
    }
    const Estimate ma = mean_estimate(a), mb = mean_estimate(b);
    MESSAGE("explicit ", ma.value, " +- ", ma.se, ", Burke ", mb.value, " +- ", mb.se);
    CHECK(std::abs(ma.value - mb.value) < 4 * std::hypot(ma.se, mb.se));
    CHECK(ks_two_sample(a, b).p_value > 1e-3);
}

TEST_CASE("table serialization") {
    const Environment env = generate(4, GridSpec::make(2, 0.05), 3, 1);
    const DPTable t = stationary_forward(env, sample_boundary(1, 4, 3, 1), 1.0, 4);
    std::stringstream ss;
    dump_table(t, ss);
    const DPTable back = load_table(ss);
    CHECK(back.kind == t.kind);
    CHECK(back.n == t.n);
    CHECK(back.grid.m_count == t.grid.m_count);
    CHECK(back.theta == t.theta);
    CHECK(back.seed_log == t.seed_log);
    CHECK(back.logz == t.logz);
}

TEST_CASE("degenerate horizons and errors") {
    const Environment env = generate(2, GridSpec::make(1, 0.1), 1, 0);
    CHECK_THROWS(ptp_forward(env, 3));
    const Environment z = zero_environment(1, GridSpec::make(0, 0.1));
    CHECK(ptp_forward(z, 1).final_value() == 0.0);
    const BoundaryWeights bw = sample_boundary(1.0, 1, 1, 0);
    const Environment z2 = zero_environment(1, GridSpec::make(0, 0.1));
    CHECK(stationary_forward(z2, bw, 1.0, 1).final_value() == doctest::Approx(bw.r0[0]));
}

}  // TEST_SUITE
