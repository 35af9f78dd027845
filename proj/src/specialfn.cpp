#include "dpbe/specialfn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dpbe/errors.hpp"

namespace dpbe {
namespace {

void require_positive_finite(double x, const char* what) {
    if (!(x > 0) || !std::isfinite(x))
        throw DomainError(std::string(what) + ": argument must be positive and finite, got " +
                          std::to_string(x));
}

// Asymptotic series in 1/y, valid for y >= 10 to well below 1e-15 relative.
double psi0_asymptotic(double y) {
    const double r2 = 1.0 / (y * y);
    const double series =
        r2 * (1.0 / 12 -
              r2 * (1.0 / 120 -
                    r2 * (1.0 / 252 -
                          r2 * (1.0 / 240 -
                                r2 * (1.0 / 132 - r2 * (691.0 / 32760 - r2 * (1.0 / 12)))))));
    return std::log(y) - 0.5 / y - series;
}

double psi1_asymptotic(double y) {
    const double r = 1.0 / y;
    const double r2 = r * r;
    const double series =
        r2 * r *
        (1.0 / 6 -
         r2 * (1.0 / 30 -
               r2 * (1.0 / 42 - r2 * (1.0 / 30 - r2 * (5.0 / 66 - r2 * (691.0 / 2730 - r2 * (7.0 / 6)))))));
    return r + 0.5 * r2 + series;
}

double psi2_asymptotic(double y) {
    const double r = 1.0 / y;
    const double r2 = r * r;
    const double series =
        r2 * r2 * r2 *
        (1.0 / 6 -
         r2 * (1.0 / 6 -
               r2 * (3.0 / 10 - r2 * (5.0 / 6 - r2 * (691.0 / 210 - r2 * (35.0 / 2))))));
    return -r2 - r2 * r - 0.5 * r2 * r2 + series;
}

}  // namespace

double psi0(double x) {
    require_positive_finite(x, "psi0");
    double shift = 0;
    while (x < kSpecialFnTolerances.asymptotic_threshold) {
        shift += 1.0 / x;
        x += 1.0;
    }
    return psi0_asymptotic(x) - shift;
}

double psi1(double x) {
    require_positive_finite(x, "psi1");
    double shift = 0;
    while (x < kSpecialFnTolerances.asymptotic_threshold) {
        shift += 1.0 / (x * x);
        x += 1.0;
    }
    return psi1_asymptotic(x) + shift;
}

double psi2(double x) {
    require_positive_finite(x, "psi2");
    double shift = 0;
    while (x < kSpecialFnTolerances.asymptotic_threshold) {
        shift += 2.0 / (x * x * x);
        x += 1.0;
    }
    return psi2_asymptotic(x) - shift;
}

double psi1_inv(double y) {
    require_positive_finite(y, "psi1_inv");
    const auto& tol = kSpecialFnTolerances;

    // 1/x <= psi1(x) <= 1/x + 1/x^2 brackets the root.
    double lo = std::max(1.0 / y - 1.0, tol.psi1_inv_tiny);
    double hi = 1.0 / y + 1.0;
    // psi1 is decreasing: f(x) = psi1(x) - y is positive at lo, negative at hi.
    double f_lo = psi1(lo) - y;
    double f_hi = psi1(hi) - y;
    if (f_lo < 0 || f_hi > 0)
        throw ConvergenceError("psi1_inv: bracket does not contain the root", std::min(f_lo, -f_hi));

    // Illinois-modified regula falsi with a bisection fallback whenever the
    // secant step fails to halve the bracket.
    int side = 0;
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < tol.psi1_inv_max_iterations; ++it) {
        const double width = hi - lo;
        double candidate = (f_lo * hi - f_hi * lo) / (f_lo - f_hi);
        if (!(candidate > lo && candidate < hi)) candidate = 0.5 * (lo + hi);
        x = candidate;
        const double fx = psi1(x) - y;
        if (fx == 0) return x;
        if (fx > 0) {
            lo = x;
            f_lo = fx;
            if (side == 1) f_hi *= 0.5;
            side = 1;
        } else {
            hi = x;
            f_hi = fx;
            if (side == -1) f_lo *= 0.5;
            side = -1;
        }
        if (hi - lo > 0.5 * width) {
            const double mid = 0.5 * (lo + hi);
            const double fm = psi1(mid) - y;
            if (fm == 0) return mid;
            if (fm > 0) {
                lo = mid;
                f_lo = fm;
            } else {
                hi = mid;
                f_hi = fm;
            }
            side = 0;
        }
        if (hi - lo <= 4 * std::numeric_limits<double>::epsilon() * hi) break;
    }
    x = std::abs(f_lo) < std::abs(f_hi) ? lo : hi;
    const double residual = std::abs(psi1(x) - y) / std::max(1.0, y);
    if (residual > tol.psi1_inv_residual)
        throw ConvergenceError("psi1_inv: no convergence for y=" + std::to_string(y), residual);
    return x;
}

double log_gamma_sample(double shape, CounterRng& rng) {
    require_positive_finite(shape, "gamma_sample");
    if (shape < 1.0) {
        // G(a) = G(a + 1) U^(1/a)
        const double boosted = log_gamma_sample(shape + 1.0, rng);
        return boosted + std::log(rng.uniform()) / shape;
    }
    // Marsaglia and Tsang squeeze method.
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = rng.normal();
            v = 1.0 + c * x;
        } while (v <= 0);
        v = v * v * v;
        const double u = rng.uniform();
        const double x2 = x * x;
        if (u < 1.0 - 0.0331 * x2 * x2) return std::log(d * v);
        if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return std::log(d * v);
    }
}

double gamma_sample(double shape, CounterRng& rng) {
    return std::exp(log_gamma_sample(shape, rng));
}

double free_energy_density(double beta) {
    require_positive_finite(beta, "free_energy_density");
    const double b2 = beta * beta;
    const double t = psi1_inv(b2);
    return t * b2 - psi0(t) - 2.0 * std::log(beta);
}

FreeEnergyCheck free_energy_check(double beta) {
    FreeEnergyCheck out;
    out.value = free_energy_density(beta);
    const double b2 = beta * beta;
    out.minimizer = psi1_inv(b2);
    out.stationarity = b2 - psi1(out.minimizer);
    out.variational = out.minimizer * b2 - psi0(out.minimizer) - 2.0 * std::log(beta);
    return out;
}

ModelConstants model_constants(double beta, double n, double t) {
    require_positive_finite(beta, "model_constants");
    ModelConstants mc;
    mc.beta = beta;
    mc.theta_char = beta * psi1_inv(beta * beta);
    mc.free_energy = free_energy_density(beta);
    const double scaled_theta = mc.theta_char / beta;
    mc.centering = scaled_theta * t - n * psi0(scaled_theta);
    return mc;
}

ScaledParams characteristic_params(double alpha, double beta0, double tau, std::size_t n) {
    if (!(alpha >= 0.0 && alpha <= 0.25))
        throw DomainError("alpha must lie in [0, 0.25], got " + std::to_string(alpha));
    if (!(beta0 > 0) || !std::isfinite(beta0))
        throw DomainError("beta0 must be positive, got " + std::to_string(beta0));
    if (!(tau > 0) || !std::isfinite(tau))
        throw DomainError("tau must be positive, got " + std::to_string(tau));
    if (n == 0) throw DomainError("n must be a positive integer");
    const double levels = std::round(tau * static_cast<double>(n));
    if (levels < 1) throw DomainError("tau * n must be at least 1");

    ScaledParams p;
    p.alpha = alpha;
    p.beta0 = beta0;
    p.tau = tau;
    p.n = n;
    p.n_levels = static_cast<std::size_t>(levels);
    p.beta = beta0 * std::pow(static_cast<double>(n), -alpha);
    const double b2 = p.beta * p.beta;
    p.theta = psi1_inv(b2);
    // t = tau beta0^2 n^(1-2 alpha) = n_levels beta^2 when tau n is integral.
    p.t = levels * b2;
    p.log_offset = -2.0 * (levels - 1.0) * std::log(p.beta);
    p.stationary_log_offset = -2.0 * levels * std::log(p.beta);
    return p;
}

}  // namespace dpbe
