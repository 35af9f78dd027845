#pragma once

// Statistical checks of the exact identities of the stationary model and of
// the scaling maps. Every check is a pure function of its arguments and the
// master seed; replicas are evaluated in parallel and aggregated in replica
// order.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "dpbe/partition.hpp"

namespace dpbe {

struct IdentityVerdict {
    std::string name;
    double statistic = 0;
    double threshold = 0;
    /// NaN when the check is not a p-valued test.
    double p_value = std::numeric_limits<double>::quiet_NaN();
    double p_floor = std::numeric_limits<double>::quiet_NaN();
    std::size_t n_replicas = 0;
    bool passed = false;
    /// Ordered diagnostics (means, standard errors, allowances, ...).
    std::vector<std::pair<std::string, double>> details;

    double detail(const std::string& key) const;
};

/// One JSON object (single line) for a verdict.
std::string to_json_line(const IdentityVerdict& v);

/// Default p-value floor of the distributional checks.
inline constexpr double kPFloor = 1e-3;

/// Grid step used when a check is called with delta = 0:
/// min(0.02, 0.1 / theta^2).
double auto_delta(double theta);

struct RunOptions {
    std::uint64_t seed = 1;
    std::size_t workers = 1;
    double delta = 0;  ///< 0 selects auto_delta
};

/// Mean of log Z^theta_{n,t} against -n psi0(theta) + theta t. Each replica
/// is evaluated on the grid and on its refinement by halving (same Brownian
/// paths); the fine-grid mean must lie within 4 SE plus the two-grid
/// allowance |fine - coarse|. Details carry the extrapolated mean
/// 2 fine - coarse and its SE.
IdentityVerdict mean_identity(double theta, std::size_t n, double t, std::size_t replicas,
                              const RunOptions& options = {});

/// Variance of log Z^theta_{n,t} against n psi1(theta) - t + 2 E sigma_0^+
/// within 5 pooled SE; E sigma_0^+ is the replica mean of its exact quenched
/// expectation. For n = 0 the target is t.
IdentityVerdict variance_identity(double theta, std::size_t n, double t, std::size_t replicas,
                                  const RunOptions& options = {});

/// |Var log Z^lambda - Var log Z^theta| <= n |psi1(lambda) - psi1(theta)| + 5
/// pooled SE, on coupled replicas (same environment, same boundary stream).
IdentityVerdict variance_lipschitz(double theta, double lambda, std::size_t n, double t,
                                   std::size_t replicas, const RunOptions& options = {});

/// KS of exp(-r_k(t)) against Gamma(theta) for k in {1, ceil(n/2), n},
/// pairwise correlation screen |rho| < 5 / sqrt(R), and the telescoping
/// residual of one full table.
IdentityVerdict burke_distribution(double theta, std::size_t n, double t, std::size_t replicas,
                                   const RunOptions& options = {});

/// Two-sample KS tests of sampled paths: max(sigma_{n-1} - t, -c) under
/// horizons t1 and t2 (c = min(t1, t2)), and sigma_k^+ under n levels
/// against sigma_0^+ under n - k levels (horizon t1).
IdentityVerdict shift_invariance(double theta, std::size_t n, double t1, double t2,
                                 std::size_t replicas, std::size_t k = 3,
                                 const RunOptions& options = {});

/// KS of 1 / int_{-H}^0 exp(sqrt(2) W(s) + nu s) ds against Gamma(nu). The
/// integral is a trapezoid sum on a grid of step options.delta (default
/// 1e-3). BudgetError when exp(-nu H) >= 1e-6.
IdentityVerdict dufresne_check(double nu, std::size_t replicas, double horizon,
                               const RunOptions& options = {});

/// Mean and variance of log Z simulated directly at inverse temperature beta
/// against the beta = 1 image plus log offset, within 4 pooled SE each. The
/// direct grid step is the image step divided by beta^2. For stationary
/// models theta is the parameter of the beta model.
IdentityVerdict scaling_consistency(TableKind kind, std::size_t n, double t, double beta,
                                    std::size_t replicas, double theta = 1,
                                    const RunOptions& options = {});

/// Names accepted by run_identity, in suite order.
std::vector<std::string> identity_names();

/// Runs one named check with its default parameters; `replica_scale`
/// multiplies the default replica counts. Unknown names throw DomainError.
IdentityVerdict run_identity(const std::string& name, const RunOptions& options,
                             double replica_scale = 1.0);

}  // namespace dpbe
