#pragma once

// Discretized Brownian environment: a boundary motion B (level 0) and level
// motions B_1..B_n sampled on a time grid, stored as prefix sums.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dpbe/random.hpp"

namespace dpbe {

/// Time grid on [-t_neg, t_max]. Nonnegative nodes are m * delta for
/// m = 0..m_count with the last node clamped to t_max; negative nodes mirror
/// that construction on [-t_neg, 0].
struct GridSpec {
    double t_max = 0;
    double delta = 1;
    std::size_t m_count = 0;
    double t_neg = 0;
    std::size_t m_neg = 0;

    /// m_count = ceil(t_max / delta), m_neg = ceil(t_neg / delta).
    static GridSpec make(double t_max, double delta, double t_neg = 0);
    /// Like make(), but shrinks delta so that t_max / delta is an integer;
    /// the result refines exactly by halving.
    static GridSpec uniform(double t_max, double delta_target, double t_neg = 0);

    std::size_t nodes() const { return m_count + 1; }
    /// Nodes of the full window [-t_neg, t_max].
    std::size_t window_nodes() const { return m_neg + m_count + 1; }

    /// Time of nonnegative node m (0 <= m <= m_count).
    double time(std::size_t m) const;
    /// Time of window node w (0 <= w < window_nodes()); node m_neg is time 0.
    double window_time(std::size_t w) const;
    /// Width of cell [t_c, t_{c+1}], 0 <= c < m_count.
    double width(std::size_t c) const;

    /// Cell widths of the nonnegative part (m_count entries).
    std::vector<double> widths() const;
    /// Cell widths over the full window (m_neg + m_count entries).
    std::vector<double> window_widths() const;

    /// Index of grid time t in [0, t_max]; throws IndexError when t is not a
    /// node (no interpolation).
    std::size_t index_of(double t) const;
    /// Window index of grid time t in [-t_neg, t_max].
    std::size_t window_index_of(double t) const;

    /// Same horizon, half the step. Requires t_max and t_neg to be integer
    /// multiples of delta.
    GridSpec refined() const;

    bool operator==(const GridSpec&) const = default;
};

struct SeedInfo {
    std::uint64_t master_seed = 0;
    std::uint32_t replica = 0;
    bool zero = false;  ///< deterministic all-zero fixture
    bool operator==(const SeedInfo&) const = default;
};

/// Source of per-level prefix arrays over the grid window. Level 0 is the
/// boundary motion B, levels 1..n are B_1..B_n.
class LevelSource {
public:
    virtual ~LevelSource() = default;
    virtual std::size_t levels() const = 0;
    virtual const GridSpec& grid() const = 0;
    /// Prefix values of level k over the full window (window_nodes() values,
    /// zero at window index m_neg). May return a view into `scratch`.
    virtual std::span<const double> window_level(std::size_t k,
                                                 std::vector<double>& scratch) const = 0;
    /// Nonnegative part of window_level.
    std::span<const double> level(std::size_t k, std::vector<double>& scratch) const {
        return window_level(k, scratch).subspan(grid().m_neg);
    }
};

/// Elements allowed in one stored environment (levels x window nodes).
inline constexpr std::size_t kDefaultEnvironmentBudget = std::size_t{1} << 28;

/// Fully materialized environment. Immutable after construction.
class Environment final : public LevelSource {
public:
    Environment(std::size_t levels, GridSpec grid, SeedInfo seeds, std::vector<double> data);

    std::size_t levels() const override { return levels_; }
    const GridSpec& grid() const override { return grid_; }
    const SeedInfo& seed_info() const { return seeds_; }
    std::span<const double> window_level(std::size_t k, std::vector<double>&) const override {
        return window_prefix(k);
    }

    /// B_k over the full window.
    std::span<const double> window_prefix(std::size_t k) const;
    /// B_k(t_m) for m = 0..m_count; prefix(k)[0] == 0.
    std::span<const double> prefix(std::size_t k) const;

    /// B_k(t) - B_k(s) for grid times s <= t; throws IndexError off-grid.
    double increment(std::size_t k, double s, double t) const;

    /// Environment on the coarse grid made of every other node. Requires a
    /// grid whose nodes refine exactly (see GridSpec::uniform).
    Environment coarsened() const;

    /// Copy of this environment with a constant added to every prefix value
    /// of levels 1..n (Gibbs ratios are unchanged by this).
    Environment shifted(double c) const;

    std::span<const double> raw() const { return data_; }

private:
    std::size_t levels_;
    GridSpec grid_;
    SeedInfo seeds_;
    std::vector<double> data_;
};

/// Draws an environment with n levels. The content is a pure function of
/// (master_seed, replica, n, grid). Throws BudgetError when the array would
/// exceed `budget` elements.
Environment generate(std::size_t n, const GridSpec& grid, std::uint64_t master_seed,
                     std::uint32_t replica, std::size_t budget = kDefaultEnvironmentBudget);

/// All prefix sums identically zero.
Environment zero_environment(std::size_t n, const GridSpec& grid);

/// Environment produced lazily one level at a time; identical values to
/// generate() with the same arguments. `stride` > 1 exposes the subsampled
/// grid made of every stride-th node of `fine_grid`.
class EnvironmentStream final : public LevelSource {
public:
    EnvironmentStream(std::size_t n, const GridSpec& fine_grid, std::uint64_t master_seed,
                      std::uint32_t replica, std::size_t stride = 1);

    std::size_t levels() const override { return levels_; }
    const GridSpec& grid() const override { return grid_; }
    std::span<const double> window_level(std::size_t k,
                                         std::vector<double>& scratch) const override;

    const GridSpec& fine_grid() const { return fine_; }
    std::uint64_t master_seed() const { return seed_; }
    std::uint32_t replica() const { return replica_; }
    std::size_t stride() const { return stride_; }

private:
    std::size_t levels_;
    GridSpec fine_;
    GridSpec grid_;
    std::uint64_t seed_;
    std::uint32_t replica_;
    std::size_t stride_;
};

/// Fills `out` (window_nodes() values) with level k of the environment
/// addressed by (master_seed, replica).
void generate_level(const GridSpec& grid, std::uint64_t master_seed, std::uint32_t replica,
                    std::size_t k, std::span<double> out);

/// Little-endian binary layout:
///   "DPBEENV1" | u64 levels | u64 m_count | f64 delta | f64 t_max | f64 t_neg |
///   u64 m_neg | u64 master_seed | u32 replica | u32 flags(bit0 = zero) |
///   (levels + 1) level-major f64 prefix arrays over the window.
void dump_environment(const Environment& env, std::ostream& out);
Environment load_environment(std::istream& in);
void dump_environment(const Environment& env, const std::string& path);
Environment load_environment(const std::string& path);

}  // namespace dpbe
