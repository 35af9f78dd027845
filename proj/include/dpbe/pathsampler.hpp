#pragma once

// Quenched path measures of DP tables.
//
// The trapezoid recursion of partition.hpp is an exact sum over grid paths:
// a path at level k whose level-k segment ends at node m either entered
// level k at time 0 (the seed term) or jumped up from level k - 1 at some
// node j <= m with weight
//
//   w(m, j) = h_{j-1} / 2 [j >= 1] + h_j / 2 [j < m],
//
// times exp(beta B_k(t_m) - beta B_k(t_j)). Sampling and marginals below use
// exactly these weights, so every probability is exact for the table's own
// discretization. Jump times are grid nodes and weakly ordered: a tie
// sigma_{k-1} = sigma_k carries the half-cell weight h_{m-1} / 2.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "dpbe/environment.hpp"
#include "dpbe/partition.hpp"
#include "dpbe/random.hpp"

namespace dpbe {

/// One grid path. sigma_k is the time of the jump from level k to k + 1.
struct PathSample {
    TableKind kind = TableKind::point_to_point;
    std::size_t n = 0;
    /// node[k] for k = 0..n-1; -1 where the jump is unresolved (it happened
    /// before time 0, or does not exist: sigma_0 of point-to-point paths).
    std::vector<std::int64_t> node;
    /// Grid times matching `node`; NaN where unresolved.
    std::vector<double> sigma;
    /// Level occupied at time 0 (1 for point-to-point paths). For stationary
    /// paths 0 means the path left the boundary at sigma_0 >= 0; j >= 1 means
    /// it was already at level j at time 0.
    std::size_t entry_level = 0;
    /// log probability of this grid path under the quenched measure.
    double log_prob = 0;

    bool resolved(std::size_t k) const { return node[k] >= 0; }
};

/// Backward sampling from a point-to-point table; env must be the table's
/// environment. Empty support (t_max = 0 with n > 1) throws DomainError.
PathSample sample_ptp_path(const DPTable& table, const LevelSource& env, CounterRng& rng);

/// Backward sampling from a stationary table: the top-level decomposition
/// chooses between the boundary integral and the seeded entries at each level.
PathSample sample_stationary_path(const DPTable& table, const LevelSource& env, CounterRng& rng);

/// Exact quenched marginals of the jump times.
struct QuenchedMarginals {
    std::size_t n = 0;
    GridSpec grid;
    double log_z = 0;  ///< logz[n][m_count]
    /// levels[i] and prob[i][j] = Q(sigma_{levels[i]} = t_j), j = 0..m_count.
    std::vector<std::size_t> levels;
    std::vector<std::vector<double>> prob;
    /// entry[j] = Q(entry_level = j), j = 0..n; entry[0] = Q(sigma_0 >= 0)
    /// for stationary tables.
    std::vector<double> entry;

    /// Q(sigma_k unresolved) for the i-th requested level.
    double unresolved(std::size_t i) const;
    /// E^Q[f(sigma_k)] over resolved nodes of the i-th requested level.
    template <class F>
    double expect(std::size_t i, F&& f) const {
        double s = 0;
        for (std::size_t j = 0; j < prob[i].size(); ++j) s += prob[i][j] * f(grid.time(j));
        return s;
    }
};

/// Marginals of sigma_k for every k in `levels` (each < n), computed by one
/// backward pass over the completion weights of the table's paths.
QuenchedMarginals quenched_marginals(const DPTable& table, const LevelSource& env,
                                     std::span<const std::size_t> levels);

/// Q(sigma_0 >= u) for a stationary table; u must be a grid time in
/// [0, t_max], larger u gives 0. No sampling.
double quenched_sigma0_tail(const DPTable& table, const LevelSource& env, double u);

/// E^Q|sigma_k - center| and Q(|sigma_k - center| > threshold) for each
/// threshold. Unresolved jumps count as sigma_k = 0 (a lower bound for the
/// deviation); their mass is reported separately.
struct BulkDeviation {
    std::size_t level = 0;
    double center = 0;
    double mean_abs = 0;
    std::vector<double> thresholds;
    std::vector<double> tail;
    double unresolved = 0;
};

BulkDeviation quenched_bulk_deviation(const DPTable& table, const LevelSource& env,
                                      std::size_t level, double center,
                                      std::span<const double> thresholds);

/// Annealed summary over replicas of the quenched bulk deviation of
/// sigma_{floor(gamma n)} around gamma t_max.
struct BulkSummary {
    std::size_t level = 0;
    std::size_t replicas = 0;
    double mean_abs = 0, mean_abs_se = 0;
    std::vector<double> thresholds, tail, tail_se;
    double unresolved = 0;
};

/// Model of one replica: point-to-point (theta ignored) or stationary with
/// Burke weights of parameter theta, at beta = 1 on `grid`.
struct BulkSetup {
    TableKind kind = TableKind::point_to_point;
    std::size_t n = 0;
    GridSpec grid;
    double theta = 0;
};

BulkSummary sigma_bulk_deviation(const BulkSetup& setup, double gamma,
                                 std::span<const double> thresholds, std::uint64_t master_seed,
                                 std::size_t replicas, std::size_t workers = 1);

/// CSV rows "replica,k,node,time" for the resolved jumps of `path`.
void write_path_csv(std::ostream& out, std::size_t replica, const PathSample& path);

/// Header line matching write_path_csv.
void write_path_csv_header(std::ostream& out);

}  // namespace dpbe
