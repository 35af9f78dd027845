#include "dpbe/pathsampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <tuple>

#include "dpbe/errors.hpp"
#include "dpbe/parallel.hpp"

namespace dpbe {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double logaddexp(double a, double b) {
    if (a < b) std::swap(a, b);
    if (b == kNegInf) return a;
    return a + std::log1p(std::exp(b - a));
}

void check_pair(const DPTable& table, const LevelSource& env) {
    if (!(table.grid == env.grid())) throw DomainError("path sampler: table and environment grids differ");
    if (env.levels() < table.n) throw DomainError("path sampler: environment has too few levels");
}

std::vector<double> log_half_widths(const GridSpec& grid) {
    std::vector<double> h = grid.widths();
    for (double& x : h) x = std::log(0.5 * x);
    return h;
}

PathSample sample_path(const DPTable& table, const LevelSource& env, CounterRng& rng) {
    check_pair(table, env);
    const std::size_t n = table.n;
    const std::size_t M = table.grid.m_count;
    const double beta = table.beta;
    const std::vector<double> lh = log_half_widths(table.grid);

    PathSample p;
    p.kind = table.kind;
    p.n = n;
    p.node.assign(n, -1);
    p.sigma.assign(n, std::numeric_limits<double>::quiet_NaN());

    std::vector<double> scratch, lw, cum;
    std::size_t m = M;
    for (std::size_t k = n; k >= 1; --k) {
        const auto b = env.level(k, scratch);
        const auto prev = table.row(k - 1);
        // Candidates: index 0 is the seed (entry at level k at time 0),
        // index j + 1 is a jump from level k - 1 at node j.
        lw.assign(m + 2, kNegInf);
        lw[0] = table.seed_log[k] - beta * b[0];
        for (std::size_t j = 0; j <= m; ++j) {
            double w = kNegInf;
            if (j >= 1) w = lh[j - 1];
            if (j < m) w = logaddexp(w, lh[j]);
            lw[j + 1] = w + prev[j] - beta * b[j];
        }
        const double top = *std::max_element(lw.begin(), lw.end());
        if (top == kNegInf) throw DomainError("path sampler: empty support");
        cum.resize(lw.size());
        double acc = 0;
        for (std::size_t i = 0; i < lw.size(); ++i) {
            acc += std::exp(lw[i] - top);
            cum[i] = acc;
        }
        const double u = rng.uniform() * acc;
        auto it = std::upper_bound(cum.begin(), cum.end(), u);
        if (it == cum.end()) --it;
        const auto pick = static_cast<std::size_t>(it - cum.begin());
        p.log_prob += lw[pick] - top - std::log(acc);
        if (pick == 0) {
            p.entry_level = k;
            return p;
        }
        const std::size_t j = pick - 1;
        p.node[k - 1] = static_cast<std::int64_t>(j);
        p.sigma[k - 1] = table.grid.time(j);
        m = j;
        if (k == 1) {
            p.entry_level = 0;
            return p;
        }
    }
    return p;
}

// Backward pass over completion weights. logH_k(j) is the total weight of
// the continuations of a path whose level-k segment ends at node j (relative
// to the path's weight up to that point); logH_n = delta_{j, M}. Calls
// at_level(k, logH_k) for k = n-1 down to `lowest`, and entry(k, log of the
// total weight of paths seeded at level k) for every k >= max(lowest, 1)
// reached.
template <class AtLevel, class Entry>
void backward_pass(const DPTable& table, const LevelSource& env, std::size_t lowest,
                   AtLevel&& at_level, Entry&& entry) {
    const std::size_t n = table.n;
    const std::size_t M = table.grid.m_count;
    const double beta = table.beta;
    const std::vector<double> lh = log_half_widths(table.grid);
    std::vector<double> h(M + 1, kNegInf), s(M + 2), scratch;
    h[M] = 0.0;
    for (std::size_t k = n; k >= 1 && k > lowest; --k) {
        const auto b = env.level(k, scratch);
        s[M + 1] = kNegInf;
        for (std::size_t j = M + 1; j-- > 0;) s[j] = logaddexp(s[j + 1], beta * b[j] + h[j]);
        // Seeded paths of level k contribute e^{seed_k} sum_m e^{beta B_k(0, t_m)} H_k(m).
        entry(k, table.seed_log[k] - beta * b[0] + s[0]);
        for (std::size_t j = 0; j <= M; ++j) {
            const double left = j >= 1 ? lh[j - 1] + s[j] : kNegInf;
            const double right = j < M ? lh[j] + s[j + 1] : kNegInf;
            h[j] = logaddexp(left, right) - beta * b[j];
        }
        at_level(k - 1, std::span<const double>(h));
    }
}

}  // namespace

PathSample sample_ptp_path(const DPTable& table, const LevelSource& env, CounterRng& rng) {
    if (table.kind != TableKind::point_to_point) throw KindError("sample_ptp_path: needs a point-to-point table");
    return sample_path(table, env, rng);
}

PathSample sample_stationary_path(const DPTable& table, const LevelSource& env, CounterRng& rng) {
    if (table.kind != TableKind::stationary) throw KindError("sample_stationary_path: needs a stationary table");
    return sample_path(table, env, rng);
}

double QuenchedMarginals::unresolved(std::size_t i) const {
    double s = 0;
    for (double p : prob[i]) s += p;
    return std::max(0.0, 1.0 - s);
}

QuenchedMarginals quenched_marginals(const DPTable& table, const LevelSource& env,
                                     std::span<const std::size_t> levels) {
    check_pair(table, env);
    QuenchedMarginals q;
    q.n = table.n;
    q.grid = table.grid;
    q.log_z = table.final_value();
    q.levels.assign(levels.begin(), levels.end());
    q.prob.resize(levels.size());
    q.entry.assign(table.n + 1, 0.0);
    std::size_t lowest = table.n;
    for (std::size_t k : levels) {
        if (k >= table.n) throw IndexError("quenched_marginals: level out of range");
        lowest = std::min(lowest, k);
    }
    if (levels.empty()) lowest = 0;
    const double lz = q.log_z;
    double positive = 0;
    backward_pass(
        table, env, lowest,
        [&](std::size_t k, std::span<const double> h) {
            const auto row = table.row(k);
            std::vector<double> probs;
            for (std::size_t i = 0; i < levels.size(); ++i) {
                if (levels[i] != k) continue;
                if (probs.empty()) {
                    probs.resize(h.size());
                    for (std::size_t j = 0; j < h.size(); ++j) probs[j] = std::exp(row[j] + h[j] - lz);
                }
                q.prob[i] = probs;
            }
            if (k == 0) {
                for (std::size_t j = 0; j < h.size(); ++j) positive += std::exp(row[j] + h[j] - lz);
            }
        },
        [&](std::size_t k, double log_w) { q.entry[k] = std::exp(log_w - lz); });
    if (table.kind == TableKind::stationary) q.entry[0] = positive;
    return q;
}

double quenched_sigma0_tail(const DPTable& table, const LevelSource& env, double u) {
    if (table.kind != TableKind::stationary) throw KindError("quenched_sigma0_tail: needs a stationary table");
    if (u > table.grid.t_max) return 0.0;
    const std::size_t from = table.grid.index_of(u);
    const std::size_t level = 0;
    const auto q = quenched_marginals(table, env, {&level, 1});
    double s = 0;
    for (std::size_t j = from; j < q.prob[0].size(); ++j) s += q.prob[0][j];
    return s;
}

BulkDeviation quenched_bulk_deviation(const DPTable& table, const LevelSource& env,
                                      std::size_t level, double center,
                                      std::span<const double> thresholds) {
    const auto q = quenched_marginals(table, env, {&level, 1});
    BulkDeviation d;
    d.level = level;
    d.center = center;
    d.thresholds.assign(thresholds.begin(), thresholds.end());
    d.tail.assign(thresholds.size(), 0.0);
    d.unresolved = q.unresolved(0);
    const auto& p = q.prob[0];
    for (std::size_t j = 0; j < p.size(); ++j) {
        const double dev = std::abs(table.grid.time(j) - center);
        d.mean_abs += p[j] * dev;
        for (std::size_t i = 0; i < thresholds.size(); ++i)
            if (dev > thresholds[i]) d.tail[i] += p[j];
    }
    // Unresolved jumps sit before time 0.
    d.mean_abs += d.unresolved * std::abs(center);
    for (std::size_t i = 0; i < thresholds.size(); ++i)
        if (std::abs(center) > thresholds[i]) d.tail[i] += d.unresolved;
    return d;
}

BulkSummary sigma_bulk_deviation(const BulkSetup& setup, double gamma,
                                 std::span<const double> thresholds, std::uint64_t master_seed,
                                 std::size_t replicas, std::size_t workers) {
    if (!(gamma > 0 && gamma < 1)) throw DomainError("sigma_bulk_deviation: gamma must lie in (0, 1)");
    const auto level = static_cast<std::size_t>(std::floor(gamma * static_cast<double>(setup.n)));
    if (level < 1 || level >= setup.n) throw DomainError("sigma_bulk_deviation: gamma n must be >= 1 and < n");
    if (replicas < 2) throw DomainError("sigma_bulk_deviation: needs at least 2 replicas");
    const double center = gamma * setup.grid.t_max;
    std::vector<BulkDeviation> per(replicas);
    parallel_for(replicas, workers, [&](std::size_t r) {
        const auto rep = static_cast<std::uint32_t>(r);
        const Environment env = generate(setup.n, setup.grid, master_seed, rep);
        DPTable table = setup.kind == TableKind::point_to_point
                            ? ptp_forward(env, setup.n)
                            : stationary_forward(env, sample_boundary(setup.theta, setup.n, master_seed, rep),
                                                 setup.theta, setup.n);
        per[r] = quenched_bulk_deviation(table, env, level, center, thresholds);
    });
    BulkSummary s;
    s.level = level;
    s.replicas = replicas;
    s.thresholds.assign(thresholds.begin(), thresholds.end());
    auto mean_se = [&](auto get) {
        double m = 0, v = 0;
        for (const auto& d : per) m += get(d);
        m /= static_cast<double>(replicas);
        for (const auto& d : per) v += (get(d) - m) * (get(d) - m);
        v /= static_cast<double>(replicas - 1);
        return std::pair{m, std::sqrt(v / static_cast<double>(replicas))};
    };
    std::tie(s.mean_abs, s.mean_abs_se) = mean_se([](const BulkDeviation& d) { return d.mean_abs; });
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
        const auto [m, se] = mean_se([i](const BulkDeviation& d) { return d.tail[i]; });
        s.tail.push_back(m);
        s.tail_se.push_back(se);
    }
    s.unresolved = mean_se([](const BulkDeviation& d) { return d.unresolved; }).first;
    return s;
}

void write_path_csv_header(std::ostream& out) { out << "replica,k,node,time\n"; }

void write_path_csv(std::ostream& out, std::size_t replica, const PathSample& path) {
    for (std::size_t k = 0; k < path.n; ++k) {
        if (!path.resolved(k)) continue;
        out << replica << ',' << k << ',' << path.node[k] << ',' << path.sigma[k] << '\n';
    }
}

}  // namespace dpbe
