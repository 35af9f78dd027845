#pragma once

// Sample statistics, goodness-of-fit tests and log-log regression used by the
// identity suite and the exponent experiments.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace dpbe {

struct Estimate {
    double value = 0;
    double se = 0;
};

/// Sample mean with standard error s / sqrt(R).
Estimate mean_estimate(std::span<const double> x);

/// Unbiased sample variance with the standard error
/// sqrt((m4 - s^4 (R - 3) / (R - 1)) / R) from the fourth central moment.
Estimate variance_estimate(std::span<const double> x);

/// Sample Pearson correlation.
double correlation(std::span<const double> x, std::span<const double> y);

struct TestResult {
    double statistic = 0;
    double p_value = 1;
};

/// Kolmogorov limiting tail Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2).
double kolmogorov_q(double lambda);

/// One-sample KS test against a continuous CDF. The p-value uses the
/// Kolmogorov tail at (sqrt(R) + 0.12 + 0.11 / sqrt(R)) D.
TestResult ks_one_sample(std::span<const double> x, const std::function<double(double)>& cdf);

/// Two-sample KS test with effective size R1 R2 / (R1 + R2).
TestResult ks_two_sample(std::span<const double> a, std::span<const double> b);

/// Pearson chi-square test of observed counts against expected counts.
TestResult chi_square(std::span<const double> observed, std::span<const double> expected);

/// Standard Gaussian CDF.
double normal_cdf(double x);
/// Regularized lower incomplete gamma P(shape, x): the Gamma(shape) CDF.
double gamma_cdf(double shape, double x);

struct LineFit {
    double slope = 0;
    double intercept = 0;
};

/// Ordinary least squares y = intercept + slope x; DomainError for fewer than
/// two points or identical abscissae.
LineFit ols(std::span<const double> x, std::span<const double> y);

struct PowerLawFit {
    double slope = 0, intercept = 0;
    double ci_low = 0, ci_high = 0;  ///< percentile bootstrap interval
    double slope_se = 0;             ///< bootstrap standard deviation
    std::size_t resamples = 0;
    double level = 0.95;
};

/// Fits log(statistic) = intercept + slope log(x). `samples[i]` holds the
/// per-replica values at abscissa x[i]; `statistic` maps a sample to the
/// fitted quantity (e.g. the variance). Replicas are resampled with
/// replacement independently per point; the interval is deterministic given
/// the seed. With `paired`, the points share replicas (sample r of every
/// point comes from replica r) and one index draw is applied to all points.
/// Requires at least 4 points.
PowerLawFit fit_power_law(std::span<const double> x, const std::vector<std::vector<double>>& samples,
                          const std::function<double(std::span<const double>)>& statistic,
                          std::size_t resamples, std::uint64_t seed, double level = 0.95,
                          bool paired = false);

/// Fit of exact points (no bootstrap); the interval collapses to the slope.
PowerLawFit fit_power_law(std::span<const double> x, std::span<const double> y);

/// Statistics usable with fit_power_law.
double sample_variance(std::span<const double> x);
double sample_mean(std::span<const double> x);

}  // namespace dpbe
