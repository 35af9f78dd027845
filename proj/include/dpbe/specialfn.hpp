#pragma once

// Polygamma functions, the inverse trigamma, Gamma sampling, and the closed-form
// constants of the Brownian polymer (free energy density, characteristic
// parameter, centering).

#include <cstddef>

#include "dpbe/random.hpp"

namespace dpbe {

/// Numerical tolerances for this module, gathered in one place.
struct SpecialFnTolerances {
    /// Recurrence is applied until the argument reaches this value, then the
    /// asymptotic series takes over.
    double asymptotic_threshold = 10.0;
    /// Acceptance bound for |psi1(x) - y| / max(1, y) in psi1_inv.
    double psi1_inv_residual = 1e-10;
    int psi1_inv_max_iterations = 400;
    /// Lower clamp of the psi1_inv bracket.
    double psi1_inv_tiny = 1e-300;
};

inline constexpr SpecialFnTolerances kSpecialFnTolerances{};

/// Digamma. Throws DomainError for x <= 0 or non-finite x.
double psi0(double x);
/// Trigamma, strictly positive.
double psi1(double x);
/// Tetragamma (derivative of trigamma), strictly negative.
double psi2(double x);

/// Inverse of psi1 on (0, inf): returns x > 0 with psi1(x) = y.
/// Throws DomainError for y <= 0 and ConvergenceError if the residual
/// bound is not met.
double psi1_inv(double y);

/// Gamma(shape, rate 1) variate. Shapes below one are boosted from shape + 1.
double gamma_sample(double shape, CounterRng& rng);

/// log of a Gamma(shape) variate without underflow for tiny shapes.
double log_gamma_sample(double shape, CounterRng& rng);

/// F(beta) = psi1_inv(beta^2) beta^2 - psi0(psi1_inv(beta^2)) - 2 log beta.
double free_energy_density(double beta);

struct FreeEnergyCheck {
    double value = 0;          ///< F(beta) from the closed form
    double minimizer = 0;      ///< t* = psi1_inv(beta^2)
    double stationarity = 0;   ///< beta^2 - psi1(t*), should vanish
    double variational = 0;    ///< t* beta^2 - psi0(t*) - 2 log beta
};

/// Closed form together with the interior-stationarity check of the
/// variational formula inf_t {t beta^2 - psi0(t)} - 2 log beta.
FreeEnergyCheck free_energy_check(double beta);

/// Constants of the polymer at a given inverse temperature and size.
struct ModelConstants {
    double beta = 1;
    double theta_char = 0;   ///< beta * psi1_inv(beta^2)
    double free_energy = 0;  ///< F(beta)
    double centering = 0;    ///< f_n = th t - n psi0(th), th = psi1_inv(beta^2)
};

/// (n, t) are coordinates of the beta = 1 image, where the centering lives.
ModelConstants model_constants(double beta, double n, double t);

/// Parameters of the beta = 1 image of the intermediate-disorder model
/// beta = beta0 n^-alpha at macroscopic time tau.
struct ScaledParams {
    double alpha = 0;
    double beta0 = 1;
    double tau = 1;
    std::size_t n = 1;         ///< user size parameter
    std::size_t n_levels = 1;  ///< round(tau n): levels of the scaled model
    double t = 0;              ///< tau beta0^2 n^(1 - 2 alpha): scaled horizon
    double theta = 0;          ///< psi1_inv(beta0^2 n^(-2 alpha))
    double beta = 1;           ///< beta0 n^(-alpha)
    double log_offset = 0;     ///< -2 (n_levels - 1) log beta (point-to-point)
    double stationary_log_offset = 0;  ///< -2 n_levels log beta (stationary)
};

/// Maps (alpha, beta0, tau, n) onto the characteristic direction of the
/// scaled model. Requires alpha in [0, 1/4], beta0, tau, n positive and
/// tau n >= 1.
ScaledParams characteristic_params(double alpha, double beta0, double tau, std::size_t n);

}  // namespace dpbe
