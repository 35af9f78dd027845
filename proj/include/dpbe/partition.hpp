#pragma once

// Log-domain dynamic programs for the point-to-point, stationary and
// renormalized KPZ partition functions of the semi-discrete polymer.
//
// All programs share one kernel. For level k and grid nodes t_0 < ... < t_M,
//
//   U_k(t_m) = exp(beta B_k(t_m)) * ( exp(seed_k - beta B_k(0)) + A_k(m) ),
//   A_k(m)   = sum_{j<m} h_j / 2 * (f_j + f_{j+1}),   f_j = U_{k-1}(t_j) exp(-beta B_k(t_j)),
//
// i.e. the trapezoid rule for U_k(t) = e^{beta B_k(t)} (U_k(0) + int_0^t U_{k-1}(s) e^{-beta B_k(s)} ds).
// Rows are computed in ascending k, each row in ascending m. Sweeps that only
// need a few values run in O(m_count) memory; over an unstrided
// EnvironmentStream they advance all levels together block by block and draw
// each level's increments on the fly.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dpbe/environment.hpp"
#include "dpbe/random.hpp"
#include "dpbe/specialfn.hpp"

namespace dpbe {

enum class TableKind { point_to_point, stationary };

std::string to_string(TableKind kind);

/// log Z^{(k)}(t_m) (point-to-point) or log U_k(t_m) (stationary) for
/// k = 0..n and m = 0..m_count. Row 0 is -inf for point-to-point tables and
/// the boundary weight -beta B(t) + beta theta t for stationary ones.
struct DPTable {
    TableKind kind = TableKind::point_to_point;
    std::size_t n = 0;
    GridSpec grid;
    double beta = 1;
    double theta = 0;             ///< stationary only
    std::vector<double> seed_log;  ///< log U_k(0) per level (n + 1 entries)
    std::vector<double> logz;      ///< level-major, (n + 1) x (m_count + 1)

    std::size_t nodes() const { return grid.m_count + 1; }
    std::span<const double> row(std::size_t k) const;
    double at(std::size_t k, std::size_t m) const { return row(k)[m]; }
    /// logz[n][m_count].
    double final_value() const { return at(n, grid.m_count); }
};

/// Elements allowed in one stored table.
inline constexpr std::size_t kDefaultTableBudget = std::size_t{1} << 28;

/// r0[k - 1] = r_k(0) for k = 1..n.
struct BoundaryWeights {
    std::vector<double> r0;
    double theta = 0;
    /// sum_{j <= k} r_j(0), with cumulative(0) = 0.
    double cumulative(std::size_t k) const;
};

/// r_k(0) = -log G_k with G_k i.i.d. Gamma(theta).
BoundaryWeights sample_boundary(double theta, std::size_t n, CounterRng& rng);

/// Boundary weights of replica `replica` on its reserved substream.
BoundaryWeights sample_boundary(double theta, std::size_t n, std::uint64_t master_seed,
                                std::uint32_t replica);

/// r0 = 0 for every level (deterministic fixture).
BoundaryWeights zero_boundary(std::size_t n, double theta = 0);

// --- kernel -----------------------------------------------------------------

/// One level of the recursion over nodes 0..M (M + 1 values per array).
/// `half_widths[c]` is h_c / 2. Writes log U_k into `out` and returns log A_k(M).
/// Blocks whose values span more than ~650 e-folds fall back to exact
/// log-sum-exp accumulation; otherwise accumulation is linear against a
/// per-block reference with vectorized exp/log.
double trapezoid_level(std::span<const double> prev, std::span<const double> level_b, double beta,
                       double seed_log, std::span<const double> half_widths, std::span<double> out);

/// Configuration of one forward sweep over levels 1..n.
struct SweepSpec {
    std::size_t n = 0;
    double beta = 1;
    /// Seeds log U_k(0), k = 0..n (entry 0 unused).
    std::vector<double> seed_log;
    /// Run over the full window [-t_neg, t_max] instead of [0, t_max].
    bool full_window = false;
};

/// Runs the recursion given row 0 (over the chosen node range) and calls
/// sink(k, row) for k = 0..n. The row span is only valid during the call.
void forward_sweep(const LevelSource& env, const SweepSpec& spec, std::span<const double> row0,
                   const std::function<void(std::size_t, std::span<const double>)>& sink);

// --- point-to-point ---------------------------------------------------------

/// Point-to-point table Z^{(k)}(t_m) = Z_{(1,k),(0,t_m)}(beta).
DPTable ptp_forward(const LevelSource& env, std::size_t n, double beta = 1,
                    std::size_t budget = kDefaultTableBudget);

/// log Z_{(1,n),(0,t_max)}(beta) with O(m_count) memory.
double ptp_final(const LevelSource& env, std::size_t n, double beta = 1);

// --- stationary -------------------------------------------------------------

/// Stationary table U_k(t_m) = Z^{theta,beta}_{k,t_m}. The weights must have
/// been sampled with parameter theta / beta; seeds then carry the
/// -2k log beta factor of the scaling identity. For beta = 1 this is
/// exactly the Burke-boundary model.
DPTable stationary_forward(const LevelSource& env, const BoundaryWeights& boundary, double theta,
                           std::size_t n, double beta = 1,
                           std::size_t budget = kDefaultTableBudget);

/// log U_n(t_max) with O(m_count) memory.
double stationary_final(const LevelSource& env, const BoundaryWeights& boundary, double theta,
                        std::size_t n, double beta = 1);

/// log U_k(t_max) for every k = 0..n with O(m_count) memory.
std::vector<double> stationary_final_column(const LevelSource& env,
                                            const BoundaryWeights& boundary, double theta,
                                            std::size_t n, double beta = 1);

/// log U_k(t_m) at the requested (k, m) pairs from one streaming sweep.
std::vector<double> stationary_values_at(const LevelSource& env, const BoundaryWeights& boundary,
                                         double theta, std::size_t n,
                                         std::span<const std::pair<std::size_t, std::size_t>> points,
                                         double beta = 1);

// --- scaling ------------------------------------------------------------------

struct ScalingMap {
    std::size_t n = 0;
    double t = 0;
    double beta = 1;
    double theta = 0;       ///< stationary only
    double log_offset = 0;  ///< add to the log of the beta = 1 image
};

/// Z_{(1,n),(0,t)}(beta) =d beta^{-2(n-1)} Z_{(1,n),(0,beta^2 t)}(1).
ScalingMap scaling_map(std::size_t n, double t, double beta);

/// Z^{theta,beta}_{n,t} =d beta^{-2n} Z^{theta/beta,1}_{n,beta^2 t}.
ScalingMap stationary_scaling_map(std::size_t n, double t, double theta, double beta);

// --- Burke increments ---------------------------------------------------------

struct BurkeIncrements {
    std::size_t n = 0;
    std::size_t nodes = 0;
    /// r[(k - 1) * nodes + m] = r_k(t_m) = logz[k][m] - logz[k-1][m].
    std::vector<double> r;
    /// y[(k - 1) * nodes + m] = Y_k(0, t_m) = theta t_m - logz[k][m] + logz[k][0].
    std::vector<double> y;
    /// max_m |logz[n][m] + beta B(t_m) - beta theta t_m - sum_k r_k(t_m)|.
    double telescoping_residual = 0;

    double r_at(std::size_t k, std::size_t m) const { return r[(k - 1) * nodes + m]; }
    double y_at(std::size_t k, std::size_t m) const { return y[(k - 1) * nodes + m]; }
    /// Y_k(s, t) for node indices ms <= mt.
    double y_increment(std::size_t k, std::size_t ms, std::size_t mt) const {
        return y_at(k, mt) - y_at(k, ms);
    }
};

/// Throws KindError for point-to-point tables and ConvergenceError when the
/// telescoping residual exceeds 1e-9.
BurkeIncrements burke_increments(const DPTable& table);

// --- KPZ ------------------------------------------------------------------------

/// Which parameter enters e^{beta theta s} in the KPZ boundary weight.
enum class KpzTheta {
    /// theta = beta psi1_inv(beta^2): the scaled model sits exactly on the
    /// characteristic direction (default).
    characteristic,
    /// theta = psi1_inv(beta^2) taken literally in the unscaled model.
    literal,
};

/// Bounded initial profile phi with declared sup-norm bound.
struct Phi {
    std::function<double(double)> f;
    double bound = 0;  ///< K with |f| <= K
};

struct KpzSetup {
    double tau = 1;
    std::size_t n = 1;
    std::size_t levels = 1;   ///< round(tau n)
    double beta = 1;          ///< n^{-1/4}
    double t = 0;             ///< scaled horizon tau sqrt(n)
    double theta = 0;         ///< scaled boundary drift
    double renormalization = 0;  ///< -tau sqrt(n) / 2 - 2 levels log beta
};

KpzSetup kpz_setup(double tau, std::size_t n, KpzTheta convention = KpzTheta::characteristic);

/// Truncation horizon T (scaled time) for the explicit boundary integral over
/// [-T, t]: the concave drift of the entry-point exponent plus a 5 sigma
/// Brownian allowance and the 2K oscillation of phi keep the neglected tail
/// mass below epsilon.
double kpz_truncation(const KpzSetup& setup, double phi_bound, double epsilon);

struct KpzOptions {
    KpzTheta convention = KpzTheta::characteristic;
    double epsilon = 1e-8;
};

/// log Z_n^phi(tau) = -tau sqrt(n)/2 + log Z^{theta,beta,phi}_{tau n, tau n}.
/// env must cover [0, tau sqrt(n)] (the scaled horizon) with at least
/// round(tau n) levels; with phi present it must also reach back to the
/// truncation horizon, otherwise BudgetError. Without phi the Burke weights
/// `boundary` (sampled with the scaled theta) replace the negative axis.
double kpz_logZ(const LevelSource& env, const BoundaryWeights* boundary, double tau, std::size_t n,
                const Phi* phi, const KpzOptions& options = {});

// --- serialization --------------------------------------------------------------

/// "DPBETAB1" | u32 kind | u32 pad | u64 n | u64 m_count | f64 delta | f64 t_max |
/// f64 beta | f64 theta | (n + 1) f64 seeds | level-major f64 logz.
void dump_table(const DPTable& table, std::ostream& out);
DPTable load_table(std::istream& in);

}  // namespace dpbe
