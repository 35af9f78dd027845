#include <cmath>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "doctest.h"
#include "dpbe/errors.hpp"
#include "dpbe/random.hpp"
#include "dpbe/stats.hpp"
#include "helpers.hpp"

using namespace dpbe;

TEST_SUITE("stats") {

TEST_CASE("moments") {
    const std::vector<double> x{1, 2, 3, 4, 5};
    const Estimate m = mean_estimate(x);
    CHECK(m.value == 3);
    CHECK(m.se == doctest::Approx(std::sqrt(2.5 / 5)));
    CHECK(variance_estimate(x).value == doctest::Approx(2.5));
    CHECK(sample_variance(x) == doctest::Approx(2.5));
    CHECK(sample_mean(x) == 3);
    const std::vector<double> y{2, 4, 6, 8, 10}, z{5, 4, 3, 2, 1};
    CHECK(correlation(x, y) == doctest::Approx(1));
    CHECK(correlation(x, z) == doctest::Approx(-1));

    // Variance standard error is calibrated on Gaussian data: sd(var) = s^2 sqrt(2 / (R - 1)).
    CounterRng rng(StreamId{1, 0, substream::kAuxiliary});
    std::vector<double> g(100000);
    for (auto& v : g) v = 2 * rng.normal();
    const Estimate ve = variance_estimate(g);
    CHECK(ve.se == doctest::Approx(4 * std::sqrt(2.0 / 99999)).epsilon(0.03));
}

TEST_CASE("distribution functions") {
    CHECK(normal_cdf(0) == 0.5);
    CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-12));
    for (double a : {0.05, 0.5, 1.0, 2.0, 7.5})
        for (double x : {1e-3, 0.1, 1.0, 3.0, 20.0})
            CHECK(gamma_cdf(a, x) == doctest::Approx(boost::math::gamma_p(a, x)).epsilon(1e-10));
    CHECK(kolmogorov_q(0) == doctest::Approx(1.0));
    CHECK(kolmogorov_q(1.3581) == doctest::Approx(0.05).epsilon(1e-3));
    CHECK(kolmogorov_q(10) < 1e-80);
}

TEST_CASE("goodness of fit tests") {
    CounterRng rng(StreamId{2, 0, substream::kAuxiliary});
    std::vector<double> u(5000), w(5000);
    for (auto& v : u) v = rng.uniform();
    for (auto& v : w) v = rng.uniform();
    auto ucdf = [](double x) { return std::clamp(x, 0.0, 1.0); };
    CHECK(ks_one_sample(u, ucdf).p_value > 1e-3);
    std::vector<double> shifted(u);
    for (auto& v : shifted) v = std::min(1.0, v + 0.05);
    CHECK(ks_one_sample(shifted, ucdf).p_value < 1e-3);
    CHECK(ks_two_sample(u, w).p_value > 1e-3);
    CHECK(ks_two_sample(u, shifted).p_value < 1e-3);
    // D statistic of a tiny sample computed by hand.
    const std::vector<double> s{0.1, 0.4, 0.7};
    CHECK(ks_one_sample(s, ucdf).statistic == doctest::Approx(0.3));

    const std::vector<double> obs{10, 20}, exp{15, 15};
    const TestResult c = chi_square(obs, exp);
    CHECK(c.statistic == doctest::Approx(10.0 / 3));
    CHECK(c.p_value == doctest::Approx(0.0679).epsilon(1e-3));
}

TEST_CASE("least squares") {
    const std::vector<double> x{0, 1, 2, 3}, y{1, 3, 5, 7};
    const LineFit f = ols(x, y);
    CHECK(f.slope == doctest::Approx(2));
    CHECK(f.intercept == doctest::Approx(1));
    CHECK_THROWS_AS(ols(std::vector<double>{1}, std::vector<double>{1}), DomainError);
    CHECK_THROWS_AS(ols(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), DomainError);
}

TEST_CASE("exact power laws") {
    const std::vector<double> x{8, 16, 32, 64, 128};
    std::vector<double> y, c(5, 4.2);
    for (double v : x) y.push_back(3 * std::sqrt(v));
    const PowerLawFit f = fit_power_law(x, y);
    CHECK(std::abs(f.slope - 0.5) < 1e-12);
    CHECK(f.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-12));
    CHECK(f.ci_low == f.slope);
    CHECK(f.ci_high == f.slope);
    CHECK(std::abs(fit_power_law(x, c).slope) < 1e-12);
    CHECK_THROWS_AS(fit_power_law(std::vector<double>{1, 2, 4}, std::vector<double>{1, 2, 3}), DomainError);
    CHECK_THROWS_AS(fit_power_law(std::vector<double>{2, 2, 2, 2}, std::vector<double>{1, 2, 3, 4}), DomainError);

    // Constant replicas: every resample gives the exact slope.
    std::vector<std::vector<double>> s;
    for (double v : x) s.push_back(std::vector<double>(10, 3 * std::sqrt(v)));
    const PowerLawFit b = fit_power_law(x, s, sample_mean, 200, 1);
    CHECK(std::abs(b.slope - 0.5) < 1e-12);
    CHECK(std::abs(b.ci_low - 0.5) < 1e-12);
    CHECK(std::abs(b.ci_high - 0.5) < 1e-12);
    CHECK(b.resamples == 200);
}

TEST_CASE("bootstrap is deterministic and paired resampling cancels shared noise") {
    const std::vector<double> x{8, 16, 32, 64, 128};
    CounterRng rng(StreamId{3, 0, substream::kAuxiliary});
    const std::size_t R = 200;
    std::vector<double> common(R);
    for (auto& v : common) v = std::exp(0.5 * rng.normal());
    std::vector<std::vector<double>> s(5);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t r = 0; r < R; ++r) s[i].push_back(std::pow(x[i], 2.0 / 3) * common[r]);
    const PowerLawFit a = fit_power_law(x, s, sample_mean, 300, 9);
    const PowerLawFit b = fit_power_law(x, s, sample_mean, 300, 9);
    const PowerLawFit c = fit_power_law(x, s, sample_mean, 300, 10);
    CHECK(a.ci_low == b.ci_low);
    CHECK(a.ci_high == b.ci_high);
    CHECK(a.ci_low != c.ci_low);
    CHECK(a.ci_low < a.slope);
    CHECK(a.slope < a.ci_high);
    const PowerLawFit p = fit_power_law(x, s, sample_mean, 300, 9, 0.95, true);
    CHECK(std::abs(p.slope - 2.0 / 3) < 1e-12);
    CHECK(p.ci_high - p.ci_low < 1e-12);
    CHECK(a.ci_high - a.ci_low > 0.01);
    s[2].pop_back();
    CHECK_THROWS_AS(fit_power_law(x, s, sample_mean, 300, 9, 0.95, true), DomainError);
}

TEST_CASE("bootstrap interval calibration") {
    // y = x^{2/3} (1 + 5% noise): nominal 95% coverage, allowing two binomial
    // standard errors for the finite number of trials.
    const std::vector<double> x{8, 16, 32, 64, 128};
    const int trials = 400;
    const std::size_t R = 100;
    int cover = 0;
    for (int tr = 0; tr < trials; ++tr) {
        CounterRng rng(StreamId{5000u + tr, 0, substream::kAuxiliary});
        std::vector<std::vector<double>> s(5);
        for (std::size_t i = 0; i < 5; ++i)
            for (std::size_t r = 0; r < R; ++r)
                s[i].push_back(std::pow(x[i], 2.0 / 3) * (1 + 0.05 * std::sqrt(double(R)) * rng.normal()));
        const PowerLawFit f = fit_power_law(x, s, sample_mean, 400, tr);
        if (f.ci_low <= 2.0 / 3 && 2.0 / 3 <= f.ci_high) ++cover;
    }
    const double rate = static_cast<double>(cover) / trials;
    MESSAGE("coverage ", rate);
    CHECK(rate >= 0.95 - 2 * std::sqrt(0.95 * 0.05 / trials));
    CHECK(rate <= 0.995);
}

}  // TEST_SUITE
