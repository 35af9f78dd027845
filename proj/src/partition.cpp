#include "dpbe/partition.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>

#include "dpbe/errors.hpp"
#include "vmath.hpp"

namespace dpbe {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::size_t kBlock = 256;
// Largest spread (in e-folds) between a block's reference and the smallest
// value that must stay representable after exponentiation.
constexpr double kLinearRange = 650.0;

inline double logaddexp(double a, double b) {
    if (a < b) std::swap(a, b);
    if (b == kNegInf) return a;
    return a + std::log1p(std::exp(b - a));
}

std::vector<double> half_widths(const GridSpec& grid, bool full_window) {
    std::vector<double> h = full_window ? grid.window_widths() : grid.widths();
    for (double& x : h) x *= 0.5;
    return h;
}

struct KernelScratch {
    std::vector<double> g, e, v, x, w;
};

thread_local KernelScratch tls_scratch;

}  // namespace

std::string to_string(TableKind kind) {
    return kind == TableKind::point_to_point ? "point_to_point" : "stationary";
}

std::span<const double> DPTable::row(std::size_t k) const {
    if (k > n) throw IndexError("table: level " + std::to_string(k) + " out of range");
    return std::span<const double>(logz).subspan(k * nodes(), nodes());
}

double BoundaryWeights::cumulative(std::size_t k) const {
    if (k > r0.size()) throw IndexError("boundary: level out of range");
    double s = 0;
    for (std::size_t j = 0; j < k; ++j) s += r0[j];
    return s;
}

BoundaryWeights sample_boundary(double theta, std::size_t n, CounterRng& rng) {
    if (!(theta > 0) || !std::isfinite(theta)) throw DomainError("sample_boundary: theta must be > 0");
    BoundaryWeights w;
    w.theta = theta;
    w.r0.resize(n);
    for (double& r : w.r0) r = -log_gamma_sample(theta, rng);
    return w;
}

BoundaryWeights sample_boundary(double theta, std::size_t n, std::uint64_t master_seed,
                                std::uint32_t replica) {
    CounterRng rng({master_seed, replica, substream::kBoundaryWeights});
    return sample_boundary(theta, n, rng);
}

BoundaryWeights zero_boundary(std::size_t n, double theta) {
    BoundaryWeights w;
    w.theta = theta;
    w.r0.assign(n, 0.0);
    return w;
}

// ---------------------------------------------------------------------------

double trapezoid_level(std::span<const double> prev, std::span<const double> level_b, double beta,
                       double seed_log, std::span<const double> hh, std::span<double> out) {
    const std::size_t nodes = out.size();
    if (prev.size() != nodes || level_b.size() != nodes || hh.size() + 1 != nodes)
        throw IndexError("trapezoid_level: array sizes disagree");

    // Seeded paths collect B_k(0, t) = B_k(t) - B_k(0).
    if (nodes > 0 && seed_log > kNegInf) seed_log -= beta * level_b[0];

    KernelScratch& s = tls_scratch;
    s.g.resize(nodes);
    s.e.resize(kBlock + 1);
    s.v.resize(kBlock);
    double* g = s.g.data();
    for (std::size_t j = 0; j < nodes; ++j) g[j] = prev[j] - beta * level_b[j];

    double log_a = kNegInf;  // log A(m) at the last processed node
    for (std::size_t m0 = 0; m0 < nodes; m0 += kBlock) {
        const std::size_t m1 = std::min(nodes, m0 + kBlock);
        const std::size_t first = m0 == 0 ? 0 : m0 - 1;  // f values needed: [first, m1)

        double ref = std::max(seed_log, log_a);
        for (std::size_t j = first; j < m1; ++j) ref = std::max(ref, g[j]);
        const double floor_value = std::max(seed_log, log_a);

        const bool linear = m0 > 0 && std::isfinite(ref) && floor_value > kNegInf &&
                            ref - floor_value < kLinearRange;
        if (linear) {
            double* e = s.e.data();
            const std::size_t cnt = m1 - first;
            for (std::size_t j = 0; j < cnt; ++j) e[j] = g[first + j] - ref;
            detail::exp_inplace({e, cnt});
            const double seed_lin = std::exp(seed_log - ref);
            double acc = std::exp(log_a - ref);
            double* v = s.v.data();
            for (std::size_t m = m0; m < m1; ++m) {
                const std::size_t j = m - first;  // e index of node m
                acc += hh[m - 1] * (e[j - 1] + e[j]);
                v[m - m0] = seed_lin + acc;
            }
            detail::log_inplace({v, m1 - m0});
            for (std::size_t m = m0; m < m1; ++m) out[m] = v[m - m0] + ref + beta * level_b[m];
            log_a = ref + std::log(acc);
        } else {
            for (std::size_t m = m0; m < m1; ++m) {
                if (m > 0) {
                    const double cell = logaddexp(g[m - 1], g[m]);
                    if (cell > kNegInf) log_a = logaddexp(log_a, std::log(hh[m - 1]) + cell);
                }
                out[m] = logaddexp(seed_log, log_a) + beta * level_b[m];
            }
        }
    }
    return log_a;
}

void forward_sweep(const LevelSource& env, const SweepSpec& spec, std::span<const double> row0,
                   const std::function<void(std::size_t, std::span<const double>)>& sink) {
    const GridSpec& grid = env.grid();
    if (env.levels() < spec.n)
        throw DomainError("partition: environment has " + std::to_string(env.levels()) +
                          " levels, " + std::to_string(spec.n) + " needed");
    if (spec.seed_log.size() != spec.n + 1) throw IndexError("partition: seed vector size");
    const std::size_t nodes = spec.full_window ? grid.window_nodes() : grid.nodes();
    if (row0.size() != nodes) throw IndexError("partition: row 0 size");
    const std::vector<double> hh = half_widths(grid, spec.full_window);

    std::vector<double> prev(row0.begin(), row0.end());
    std::vector<double> cur(nodes);
    std::vector<double> scratch;
    sink(0, prev);
    for (std::size_t k = 1; k <= spec.n; ++k) {
        std::span<const double> b = env.window_level(k, scratch);
        if (!spec.full_window) b = b.subspan(grid.m_neg);
        trapezoid_level(prev, b, spec.beta, spec.seed_log[k], hh, cur);
        sink(k, cur);
        std::swap(prev, cur);
    }
}

// ---------------------------------------------------------------------------

namespace {

void check_ptp(const LevelSource& env, std::size_t n, double beta) {
    if (n < 1) throw DomainError("ptp: n must be >= 1");
    if (!(beta > 0)) throw DomainError("ptp: beta must be > 0");
    if (env.grid().m_count == 0 && n > 1)
        throw DomainError("ptp: t_max = 0 defines the partition function only for n = 1");
}

SweepSpec ptp_spec(std::size_t n, double beta) {
    SweepSpec spec;
    spec.n = n;
    spec.beta = beta;
    spec.seed_log.assign(n + 1, kNegInf);
    spec.seed_log[1] = 0.0;  // the path starts on level 1 at time 0
    return spec;
}

SweepSpec stationary_spec(const BoundaryWeights& boundary, double theta, std::size_t n,
                          double beta) {
    if (!(theta >= 0) || !std::isfinite(theta)) throw DomainError("stationary: theta must be >= 0");
    if (!(beta > 0)) throw DomainError("stationary: beta must be > 0");
    if (boundary.r0.size() < n) throw DomainError("stationary: too few boundary weights");
    SweepSpec spec;
    spec.n = n;
    spec.beta = beta;
    spec.seed_log.assign(n + 1, 0.0);
    double cum = 0;
    const double lb = std::log(beta);
    for (std::size_t k = 1; k <= n; ++k) {
        cum += boundary.r0[k - 1];
        spec.seed_log[k] = cum - 2.0 * static_cast<double>(k) * lb;
    }
    return spec;
}

std::vector<double> stationary_row0(const LevelSource& env, double theta, double beta) {
    std::vector<double> scratch;
    const auto b = env.level(0, scratch);
    const GridSpec& grid = env.grid();
    std::vector<double> row(grid.nodes());
    for (std::size_t m = 0; m < row.size(); ++m) row[m] = -beta * b[m] + beta * theta * grid.time(m);
    return row;
}

using Point = std::pair<std::size_t, std::size_t>;

// Values log U_k(t_m) at `points` from a sweep that keeps two rows.
std::vector<double> exact_values_at(const LevelSource& env, const SweepSpec& spec,
                                    std::span<const double> row0, std::span<const Point> points) {
    std::vector<double> values(points.size(), kNegInf);
    forward_sweep(env, spec, row0, [&](std::size_t k, std::span<const double> row) {
        for (std::size_t i = 0; i < points.size(); ++i)
            if (points[i].first == k) values[i] = row[points[i].second];
    });
    return values;
}

// Block-wavefront sweep over an unstrided stream. Cells are processed in
// chunks of whole GaussianStream batches; a chunk covers cells [c0, c1) and the
// nodes c0 + 1..c1. Inside a chunk every level is advanced in turn, so rows
// never leave cache and each level's increments are drawn as they are needed
// (identically to generate_level). Values are held in block floating point,
// U_k(node) = exp(ref + L[j]) * v[j]; entries far below a block's maximum may
// flush to 0, which does not affect the requested values at double precision.
std::vector<double> fused_values_at(const EnvironmentStream& env, const SweepSpec& spec,
                                    bool stationary, double theta, std::span<const Point> points) {
    constexpr std::size_t kChunk = 2 * GaussianStream::kBatch;
    const GridSpec& grid = env.grid();
    const std::size_t n = spec.n;
    const double beta = spec.beta;
    const std::size_t cells = grid.m_count;

    std::vector<double> values(points.size(), kNegInf);
    std::vector<std::vector<std::size_t>> wanted(n + 1);
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto [k, m] = points[i];
        if (m == 0)
            values[i] = k == 0 ? (stationary ? 0.0 : kNegInf) : spec.seed_log[k];
        else
            wanted[k].push_back(i);
    }
    if (cells == 0) return values;

    std::vector<GaussianStream> rng;
    rng.reserve(n + 1);
    for (std::size_t k = 0; k <= n; ++k)
        rng.emplace_back(StreamId{env.master_seed(), env.replica(),
                                  substream::level_forward(static_cast<std::uint32_t>(k))});
    std::vector<double> b_last(n + 1, 0.0);  // B_k at the last processed node
    std::vector<double> log_a(n + 1, kNegInf);
    std::vector<double> lu_last(n + 1);      // log U_k at the last processed node
    lu_last[0] = stationary ? 0.0 : kNegInf;
    for (std::size_t k = 1; k <= n; ++k) lu_last[k] = spec.seed_log[k];

    const double sd = std::sqrt(grid.delta);
    const double last_scale = std::sqrt(grid.width(cells - 1)) / sd;
    const double hh = 0.5 * grid.delta;
    const double hh_last = 0.5 * grid.width(cells - 1);

    alignas(64) std::array<double, kChunk> z, x, w, pl, pv, cl, cv;
    auto draw = [&](std::size_t k, std::size_t c0, std::size_t cnt) {
        for (std::size_t i = 0; i < cnt; i += GaussianStream::kBatch) rng[k].next_batch(z.data() + i);
        for (std::size_t j = 0; j < cnt; ++j) z[j] *= sd;
        if (c0 + cnt == cells) z[cnt - 1] *= last_scale;
        detail::prefix_sum_inplace({z.data(), cnt}, b_last[k]);
    };

    for (std::size_t c0 = 0; c0 < cells; c0 += kChunk) {
        const std::size_t cnt = std::min(kChunk, cells - c0);
        const bool last_chunk = c0 + cnt == cells;
        double pref = 0.0;
        if (stationary) {
            draw(0, c0, cnt);
            for (std::size_t j = 0; j < cnt; ++j) {
                pl[j] = -beta * z[j] + beta * theta * grid.time(c0 + 1 + j);
                pv[j] = 1.0;
            }
            b_last[0] = z[cnt - 1];
        } else {
            std::fill_n(pl.begin(), cnt, 0.0);
            std::fill_n(pv.begin(), cnt, 0.0);
        }
        for (std::size_t i : wanted[0]) {
            const std::size_t m = points[i].second;
            if (m > c0 && m <= c0 + cnt) values[i] = stationary ? pl[m - c0 - 1] : kNegInf;
        }

        for (std::size_t k = 1; k <= n; ++k) {
            draw(k, c0, cnt);
            const double x_first = lu_last[k - 1] - beta * b_last[k];
            for (std::size_t j = 0; j < cnt; ++j) x[j] = pref + pl[j] - beta * z[j];
            // v of the previous row is nondecreasing inside the chunk.
            const double fmax =
                std::max(x_first, detail::max_value({x.data(), cnt}) + std::log(pv[cnt - 1]));
            const double seed = spec.seed_log[k];
            const double ref = std::max({seed, log_a[k], fmax});

            const double prev_last = pref + pl[cnt - 1] + std::log(pv[cnt - 1]);
            if (ref == kNegInf) {
                std::fill_n(cv.begin(), cnt, 0.0);
                pref = 0.0;
                lu_last[k - 1] = prev_last;
            } else {
                const double e_first = std::exp(std::min(x_first - ref, 700.0));
                for (std::size_t j = 0; j < cnt; ++j) x[j] = std::min(x[j] - ref, 700.0);
                detail::exp_inplace({x.data(), cnt});
                for (std::size_t j = 0; j < cnt; ++j) x[j] *= pv[j];
                w[0] = e_first + x[0];
                for (std::size_t j = 1; j < cnt; ++j) w[j] = x[j - 1] + x[j];
                for (std::size_t j = 0; j < cnt; ++j) w[j] *= hh;
                if (last_chunk) w[cnt - 1] = hh_last * (cnt > 1 ? x[cnt - 2] + x[cnt - 1] : e_first + x[0]);
                const double a_end = detail::prefix_sum_inplace({w.data(), cnt}, std::exp(log_a[k] - ref));
                const double seed_lin = std::exp(seed - ref);
                for (std::size_t j = 0; j < cnt; ++j) cv[j] = seed_lin + w[j];
                log_a[k] = ref + std::log(a_end);
                lu_last[k - 1] = prev_last;
                pref = ref;
            }
            for (std::size_t j = 0; j < cnt; ++j) cl[j] = beta * z[j];
            b_last[k] = z[cnt - 1];

            for (std::size_t i : wanted[k]) {
                const std::size_t m = points[i].second;
                if (m > c0 && m <= c0 + cnt) {
                    const std::size_t j = m - c0 - 1;
                    values[i] = pref + cl[j] + std::log(cv[j]);
                }
            }
            std::swap(pl, cl);
            std::swap(pv, cv);
        }
        lu_last[n] = pref + pl[cnt - 1] + std::log(pv[cnt - 1]);
    }
    return values;
}

std::vector<double> values_at(const LevelSource& env, const SweepSpec& spec, bool stationary,
                              double theta, std::span<const Point> points) {
    for (const auto& [k, m] : points)
        if (k > spec.n || m > env.grid().m_count) throw IndexError("partition: point out of range");
    if (env.levels() < spec.n)
        throw DomainError("partition: environment has " + std::to_string(env.levels()) +
                          " levels, " + std::to_string(spec.n) + " needed");
    if (const auto* stream = dynamic_cast<const EnvironmentStream*>(&env);
        stream && stream->stride() == 1)
        return fused_values_at(*stream, spec, stationary, theta, points);
    const std::vector<double> row0 =
        stationary ? stationary_row0(env, theta, spec.beta)
                   : std::vector<double>(env.grid().nodes(), kNegInf);
    return exact_values_at(env, spec, row0, points);
}

DPTable collect(const LevelSource& env, const SweepSpec& spec, std::span<const double> row0,
                TableKind kind, double theta, std::size_t budget) {
    const GridSpec& grid = env.grid();
    if (spec.n + 1 > budget / grid.nodes())
        throw BudgetError("partition: table of " + std::to_string(spec.n + 1) + " x " +
                          std::to_string(grid.nodes()) + " exceeds the budget");
    DPTable t;
    t.kind = kind;
    t.n = spec.n;
    t.grid = grid;
    t.beta = spec.beta;
    t.theta = theta;
    t.seed_log = spec.seed_log;
    t.seed_log[0] = kind == TableKind::stationary ? 0.0 : kNegInf;
    t.logz.resize((spec.n + 1) * grid.nodes());
    forward_sweep(env, spec, row0, [&](std::size_t k, std::span<const double> row) {
        std::copy(row.begin(), row.end(), t.logz.begin() + static_cast<std::ptrdiff_t>(k * grid.nodes()));
    });
    return t;
}

}  // namespace

DPTable ptp_forward(const LevelSource& env, std::size_t n, double beta, std::size_t budget) {
    check_ptp(env, n, beta);
    const std::vector<double> row0(env.grid().nodes(), kNegInf);
    return collect(env, ptp_spec(n, beta), row0, TableKind::point_to_point, 0.0, budget);
}

double ptp_final(const LevelSource& env, std::size_t n, double beta) {
    check_ptp(env, n, beta);
    const Point p{n, env.grid().m_count};
    return values_at(env, ptp_spec(n, beta), false, 0.0, {&p, 1}).front();
}

DPTable stationary_forward(const LevelSource& env, const BoundaryWeights& boundary, double theta,
                           std::size_t n, double beta, std::size_t budget) {
    const SweepSpec spec = stationary_spec(boundary, theta, n, beta);
    const auto row0 = stationary_row0(env, theta, beta);
    return collect(env, spec, row0, TableKind::stationary, theta, budget);
}

std::vector<double> stationary_final_column(const LevelSource& env,
                                            const BoundaryWeights& boundary, double theta,
                                            std::size_t n, double beta) {
    std::vector<Point> points;
    for (std::size_t k = 0; k <= n; ++k) points.emplace_back(k, env.grid().m_count);
    return stationary_values_at(env, boundary, theta, n, points, beta);
}

std::vector<double> stationary_values_at(const LevelSource& env, const BoundaryWeights& boundary,
                                         double theta, std::size_t n,
                                         std::span<const std::pair<std::size_t, std::size_t>> points,
                                         double beta) {
    return values_at(env, stationary_spec(boundary, theta, n, beta), true, theta, points);
}

double stationary_final(const LevelSource& env, const BoundaryWeights& boundary, double theta,
                        std::size_t n, double beta) {
    const Point p{n, env.grid().m_count};
    return stationary_values_at(env, boundary, theta, n, {&p, 1}, beta).front();
}

// ---------------------------------------------------------------------------

ScalingMap scaling_map(std::size_t n, double t, double beta) {
    if (!(beta > 0)) throw DomainError("scaling_map: beta must be > 0");
    ScalingMap s;
    s.n = n;
    s.t = beta * beta * t;
    s.beta = 1;
    s.log_offset = n == 0 ? 0.0 : -2.0 * static_cast<double>(n - 1) * std::log(beta);
    return s;
}

ScalingMap stationary_scaling_map(std::size_t n, double t, double theta, double beta) {
    if (!(beta > 0)) throw DomainError("scaling_map: beta must be > 0");
    ScalingMap s;
    s.n = n;
    s.t = beta * beta * t;
    s.beta = 1;
    s.theta = theta / beta;
    s.log_offset = -2.0 * static_cast<double>(n) * std::log(beta);
    return s;
}

BurkeIncrements burke_increments(const DPTable& table) {
    if (table.kind != TableKind::stationary)
        throw KindError("burke_increments: needs a stationary table");
    BurkeIncrements out;
    out.n = table.n;
    out.nodes = table.nodes();
    out.r.resize(table.n * out.nodes);
    out.y.resize(table.n * out.nodes);
    const double bt = table.beta * table.theta;
    for (std::size_t k = 1; k <= table.n; ++k) {
        const auto hi = table.row(k);
        const auto lo = table.row(k - 1);
        for (std::size_t m = 0; m < out.nodes; ++m) {
            out.r[(k - 1) * out.nodes + m] = hi[m] - lo[m];
            out.y[(k - 1) * out.nodes + m] = bt * table.grid.time(m) - hi[m] + hi[0];
        }
    }
    // Row 0 holds -beta B + beta theta t, so logz[n] - row0 is the left side.
    const auto base = table.row(0);
    const auto top = table.row(table.n);
    double worst = 0;
    for (std::size_t m = 0; m < out.nodes; ++m) {
        double sum = 0;
        for (std::size_t k = 1; k <= table.n; ++k) sum += out.r_at(k, m);
        worst = std::max(worst, std::abs(top[m] - base[m] - sum));
    }
    out.telescoping_residual = worst;
    if (!(worst < 1e-9)) throw ConvergenceError("burke_increments: telescoping identity violated", worst);
    return out;
}

// ---------------------------------------------------------------------------

KpzSetup kpz_setup(double tau, std::size_t n, KpzTheta convention) {
    if (!(tau > 0) || n < 1) throw DomainError("kpz: tau and n must be positive");
    KpzSetup s;
    s.tau = tau;
    s.n = n;
    const double rn = std::round(tau * static_cast<double>(n));
    if (rn < 1) throw DomainError("kpz: tau n must be >= 1");
    s.levels = static_cast<std::size_t>(rn);
    s.beta = std::pow(static_cast<double>(n), -0.25);
    s.t = tau * std::sqrt(static_cast<double>(n));
    const double root = psi1_inv(s.beta * s.beta);
    s.theta = convention == KpzTheta::characteristic ? root : root / s.beta;
    s.renormalization = -0.5 * s.t - 2.0 * rn * std::log(s.beta);
    return s;
}

double kpz_truncation(const KpzSetup& setup, double phi_bound, double epsilon) {
    if (!(epsilon > 0 && epsilon < 1)) throw DomainError("kpz: epsilon must lie in (0, 1)");
    if (!(phi_bound >= 0) || !std::isfinite(phi_bound)) throw DomainError("kpz: phi must be bounded");
    const double nl = static_cast<double>(setup.levels);
    // Point-to-point free energy f(x) = inf_th {th x - n psi0(th)} and the
    // entry-point exponent E(T) = -theta T + f(t + T) - f(t) (concave, E(0) = 0
    // slope theta* - theta at 0).
    auto f = [&](double x) {
        const double th = psi1_inv(x / nl);
        return th * x - nl * psi0(th);
    };
    const double f0 = f(setup.t);
    const double target = std::log(epsilon) - 2.0 * phi_bound;
    auto bound = [&](double T) {
        const double drift = -setup.theta * T + f(setup.t + T) - f0;
        // Gaussian allowance for B and the level motions, plus the log of the
        // integration length.
        return drift + 5.0 * std::sqrt(2.0 * T) + std::log1p(T);
    };
    double T = 1.0;
    while (bound(T) > target) {
        T *= 1.25;
        if (T > 1e9) throw BudgetError("kpz: truncation horizon diverges");
    }
    return T;
}

double kpz_logZ(const LevelSource& env, const BoundaryWeights* boundary, double tau,
                std::size_t n, const Phi* phi, const KpzOptions& options) {
    const KpzSetup s = kpz_setup(tau, n, options.convention);
    const GridSpec& grid = env.grid();
    if (std::abs(grid.t_max - s.t) > 1e-9 * s.t)
        throw DomainError("kpz: environment horizon " + std::to_string(grid.t_max) +
                          " differs from tau sqrt(n) = " + std::to_string(s.t));
    if (!phi) {
        if (!boundary) throw DomainError("kpz: Burke weights are required when phi is absent");
        return s.renormalization + stationary_final(env, *boundary, s.theta, s.levels);
    }
    if (!phi->f || !(phi->bound >= 0) || !std::isfinite(phi->bound))
        throw DomainError("kpz: phi must be a bounded function with a declared bound");
    const double T = kpz_truncation(s, phi->bound, options.epsilon);
    if (grid.t_neg + 1e-12 < T)
        throw BudgetError("kpz: environment reaches back to " + std::to_string(grid.t_neg) +
                          ", truncation needs " + std::to_string(T));

    std::vector<double> scratch;
    const auto b = env.window_level(0, scratch);
    std::vector<double> row0(grid.window_nodes());
    for (std::size_t w = 0; w < row0.size(); ++w) {
        const double u = grid.window_time(w);
        double p = phi->f(-u);
        p = std::clamp(p, -phi->bound, phi->bound);
        row0[w] = p - b[w] + s.theta * u;
    }
    SweepSpec spec;
    spec.n = s.levels;
    spec.beta = 1;
    spec.full_window = true;
    spec.seed_log.assign(s.levels + 1, kNegInf);
    double last = kNegInf;
    forward_sweep(env, spec, row0, [&](std::size_t k, std::span<const double> row) {
        if (k == s.levels) last = row.back();
    });
    return s.renormalization + last;
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kTableMagic[8] = {'D', 'P', 'B', 'E', 'T', 'A', 'B', '1'};

template <class T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw IndexError("table load: truncated input");
    return v;
}

}  // namespace

void dump_table(const DPTable& t, std::ostream& out) {
    out.write(kTableMagic, sizeof kTableMagic);
    put<std::uint32_t>(out, t.kind == TableKind::stationary ? 1u : 0u);
    put<std::uint32_t>(out, 0u);
    put<std::uint64_t>(out, t.n);
    put<std::uint64_t>(out, t.grid.m_count);
    put<double>(out, t.grid.delta);
    put<double>(out, t.grid.t_max);
    put<double>(out, t.beta);
    put<double>(out, t.theta);
    out.write(reinterpret_cast<const char*>(t.seed_log.data()),
              static_cast<std::streamsize>(t.seed_log.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(t.logz.data()),
              static_cast<std::streamsize>(t.logz.size() * sizeof(double)));
    if (!out) throw IndexError("table dump: write failed");
}

DPTable load_table(std::istream& in) {
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kTableMagic, sizeof magic) != 0)
        throw IndexError("table load: bad magic");
    DPTable t;
    t.kind = get<std::uint32_t>(in) == 1u ? TableKind::stationary : TableKind::point_to_point;
    (void)get<std::uint32_t>(in);
    t.n = get<std::uint64_t>(in);
    t.grid.m_count = get<std::uint64_t>(in);
    t.grid.delta = get<double>(in);
    t.grid.t_max = get<double>(in);
    t.beta = get<double>(in);
    t.theta = get<double>(in);
    t.seed_log.resize(t.n + 1);
    in.read(reinterpret_cast<char*>(t.seed_log.data()),
            static_cast<std::streamsize>(t.seed_log.size() * sizeof(double)));
    t.logz.resize((t.n + 1) * t.nodes());
    in.read(reinterpret_cast<char*>(t.logz.data()),
            static_cast<std::streamsize>(t.logz.size() * sizeof(double)));
    if (!in) throw IndexError("table load: truncated data");
    return t;
}

}  // namespace dpbe
