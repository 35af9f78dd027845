#include "dpbe/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/special_functions/gamma.hpp>

#include "dpbe/errors.hpp"
#include "dpbe/random.hpp"

namespace dpbe {

double sample_mean(std::span<const double> x) {
    if (x.empty()) throw DomainError("mean of an empty sample");
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_variance(std::span<const double> x) {
    if (x.size() < 2) throw DomainError("variance needs at least 2 values");
    const double m = sample_mean(x);
    double s = 0;
    for (double v : x) s += (v - m) * (v - m);
    return s / static_cast<double>(x.size() - 1);
}

Estimate mean_estimate(std::span<const double> x) {
    const double r = static_cast<double>(x.size());
    return {sample_mean(x), std::sqrt(sample_variance(x) / r)};
}

Estimate variance_estimate(std::span<const double> x) {
    if (x.size() < 4) throw DomainError("variance_estimate needs at least 4 values");
    const double r = static_cast<double>(x.size());
    const double m = sample_mean(x);
    double m2 = 0, m4 = 0;
    for (double v : x) {
        const double d = (v - m) * (v - m);
        m2 += d;
        m4 += d * d;
    }
    const double s2 = m2 / (r - 1);
    m4 /= r;
    const double var_of_s2 = std::max(0.0, (m4 - s2 * s2 * (r - 3) / (r - 1)) / r);
    return {s2, std::sqrt(var_of_s2)};
}

double correlation(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw DomainError("correlation: size mismatch");
    const double mx = sample_mean(x), my = sample_mean(y);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

double kolmogorov_q(double lambda) {
    if (lambda < 1e-3) return 1.0;
    double sum = 0, sign = 1;
    for (int k = 1; k <= 100; ++k) {
        const double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
        sum += term;
        if (std::abs(term) < 1e-16 * std::abs(sum)) break;
        sign = -sign;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

namespace {

double ks_p(double d, double n_eff) {
    const double rn = std::sqrt(n_eff);
    return kolmogorov_q((rn + 0.12 + 0.11 / rn) * d);
}

}  // namespace

TestResult ks_one_sample(std::span<const double> x, const std::function<double(double)>& cdf) {
    if (x.empty()) throw DomainError("ks_one_sample: empty sample");
    std::vector<double> s(x.begin(), x.end());
    std::sort(s.begin(), s.end());
    const double r = static_cast<double>(s.size());
    double d = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double f = cdf(s[i]);
        d = std::max({d, static_cast<double>(i + 1) / r - f, f - static_cast<double>(i) / r});
    }
    return {d, ks_p(d, r)};
}

TestResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw DomainError("ks_two_sample: empty sample");
    std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    const double na = static_cast<double>(x.size()), nb = static_cast<double>(y.size());
    std::size_t i = 0, j = 0;
    double d = 0;
    while (i < x.size() && j < y.size()) {
        const double v = std::min(x[i], y[j]);
        while (i < x.size() && x[i] == v) ++i;
        while (j < y.size() && y[j] == v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return {d, ks_p(d, na * nb / (na + nb))};
}

TestResult chi_square(std::span<const double> observed, std::span<const double> expected) {
    if (observed.size() != expected.size() || observed.size() < 2)
        throw DomainError("chi_square: need matching counts over >= 2 bins");
    double stat = 0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        if (!(expected[i] > 0)) throw DomainError("chi_square: expected counts must be positive");
        stat += (observed[i] - expected[i]) * (observed[i] - expected[i]) / expected[i];
    }
    const double dof = static_cast<double>(observed.size() - 1);
    return {stat, boost::math::gamma_q(0.5 * dof, 0.5 * stat)};
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double gamma_cdf(double shape, double x) {
    if (!(x > 0)) return 0.0;
    return boost::math::gamma_p(shape, x);
}

LineFit ols(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw DomainError("ols: need >= 2 matching points");
    const double mx = sample_mean(x), my = sample_mean(y);
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0)) throw DomainError("ols: degenerate abscissae");
    const double slope = sxy / sxx;
    return {slope, my - slope * mx};
}

PowerLawFit fit_power_law(std::span<const double> x, std::span<const double> y) {
    if (x.size() < 4) throw DomainError("fit_power_law: needs at least 4 points");
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0 && y[i] > 0)) throw DomainError("fit_power_law: values must be positive");
        lx.push_back(std::log(x[i]));
        ly.push_back(std::log(y[i]));
    }
    const LineFit f = ols(lx, ly);
    PowerLawFit p;
    p.slope = f.slope;
    p.intercept = f.intercept;
    p.ci_low = p.ci_high = f.slope;
    return p;
}

PowerLawFit fit_power_law(std::span<const double> x, const std::vector<std::vector<double>>& samples,
                          const std::function<double(std::span<const double>)>& statistic,
                          std::size_t resamples, std::uint64_t seed, double level, bool paired) {
    if (x.size() != samples.size()) throw DomainError("fit_power_law: size mismatch");
    if (paired)
        for (const auto& s : samples)
            if (s.size() != samples.front().size())
                throw DomainError("fit_power_law: paired samples must have equal sizes");
    if (!(level > 0 && level < 1)) throw DomainError("fit_power_law: level must lie in (0, 1)");
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = statistic(samples[i]);
    PowerLawFit p = fit_power_law(x, y);
    p.resamples = resamples;
    p.level = level;
    if (resamples == 0) return p;

    std::vector<double> lx(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) lx[i] = std::log(x[i]);
    std::vector<double> slopes;
    slopes.reserve(resamples);
    std::vector<double> ly(x.size()), draw;
    std::vector<std::size_t> index;
    for (std::size_t b = 0; b < resamples; ++b) {
        CounterRng rng({seed, static_cast<std::uint32_t>(b), substream::kBootstrap});
        auto pick = [&](std::size_t size) {
            return static_cast<std::size_t>(rng.uniform() * static_cast<double>(size));
        };
        if (paired) {
            index.resize(samples.front().size());
            for (auto& j : index) j = pick(index.size());
        }
        bool ok = true;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const auto& s = samples[i];
            draw.resize(s.size());
            for (std::size_t r = 0; r < s.size(); ++r) draw[r] = s[paired ? index[r] : pick(s.size())];
            const double stat = statistic(draw);
            if (!(stat > 0)) {
                ok = false;
                break;
            }
            ly[i] = std::log(stat);
        }
        if (ok) slopes.push_back(ols(lx, ly).slope);
    }
    if (slopes.size() < 2) throw DomainError("fit_power_law: bootstrap produced no valid resamples");
    std::sort(slopes.begin(), slopes.end());
    auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(slopes.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, slopes.size() - 1);
        return slopes[lo] + (pos - static_cast<double>(lo)) * (slopes[hi] - slopes[lo]);
    };
    p.ci_low = quantile(0.5 * (1 - level));
    p.ci_high = quantile(0.5 * (1 + level));
    p.slope_se = std::sqrt(sample_variance(slopes));
    return p;
}

}  // namespace dpbe
