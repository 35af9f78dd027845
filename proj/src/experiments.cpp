#include "dpbe/experiments.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

#include "dpbe/errors.hpp"
#include "dpbe/parallel.hpp"
#include "dpbe/pathsampler.hpp"

namespace dpbe {
namespace {

using json = nlohmann::ordered_json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::size_t kMaxAutoReplicas = 100000;
constexpr std::size_t kMinBootstrap = 200;

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string short_fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", x);
    return buf;
}

json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

bool is_integer(double x) { return std::abs(x - std::round(x)) < 1e-9 * std::max(1.0, std::abs(x)); }

void require_span(const std::vector<double>& x, const char* what) {
    if (x.size() < 4) throw DomainError(std::string(what) + " needs at least 4 values for a slope fit");
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    if (!(*hi >= 8 * *lo)) throw DomainError(std::string(what) + " must span at least a factor 8");
}

std::string tail_name(double b) { return "tail_b" + short_fmt(b); }

bool has_phi(const ExperimentConfig& cfg) {
    return cfg.experiment == ExperimentKind::kpz && cfg.phi != "none";
}

/// Estimated DP cells of one replica of a group, weighted by the passes run.
double group_cells(const ExperimentConfig& cfg, const TaskGroup& g) {
    const double cells = static_cast<double>(g.levels) * static_cast<double>(g.grid.window_nodes());
    switch (cfg.experiment) {
        case ExperimentKind::path: return 3 * cells;
        case ExperimentKind::kpz: return has_phi(cfg) ? 2 * cells : cells;
        case ExperimentKind::variance: return g.crosscheck ? 3 * cells : cells;
        case ExperimentKind::ptp: return cells;
    }
    return cells;
}

/// Smallest q <= 64 with tau q an integer for every tau, or 0.
std::size_t common_denominator(const std::vector<double>& taus) {
    for (std::size_t q = 1; q <= 64; ++q) {
        bool ok = true;
        for (double tau : taus) ok = ok && is_integer(tau * static_cast<double>(q));
        if (ok) return q;
    }
    return 0;
}

const char* target_source(ExperimentKind kind, bool tau_axis) {
    if (tau_axis) {
        if (kind == ExperimentKind::ptp) return "E|log Z - f| grows like tau^(1/3)";
        if (kind == ExperimentKind::path) return "E|sigma - gamma t| grows like tau^(2/3)";
        return "Var log Z grows like tau^(2/3)";
    }
    if (kind == ExperimentKind::ptp) return "chi(alpha) = (1 - 4 alpha)/3";
    if (kind == ExperimentKind::path) return "zeta(alpha) = 2 (1 - alpha)/3";
    return "2 chi(alpha), chi(alpha) = (1 - 4 alpha)/3";
}

double target_slope(ExperimentKind kind, double alpha, bool tau_axis) {
    if (tau_axis) return kind == ExperimentKind::ptp ? 1.0 / 3.0 : 2.0 / 3.0;
    if (kind == ExperimentKind::ptp) return (1 - 4 * alpha) / 3;
    if (kind == ExperimentKind::path) return 2 * (1 - alpha) / 3;
    return 2 * (1 - 4 * alpha) / 3;
}

}  // namespace

std::string to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::variance: return "var";
        case ExperimentKind::ptp: return "ptp";
        case ExperimentKind::path: return "path";
        case ExperimentKind::kpz: return "kpz";
    }
    return "var";
}

ExperimentKind parse_experiment_kind(const std::string& name) {
    if (name == "var" || name == "variance") return ExperimentKind::variance;
    if (name == "ptp") return ExperimentKind::ptp;
    if (name == "path") return ExperimentKind::path;
    if (name == "kpz") return ExperimentKind::kpz;
    throw DomainError("unknown experiment '" + name + "' (expected var, ptp, path or kpz)");
}

std::string canonical(const ExperimentConfig& c) {
    auto list = [](const auto& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) s += ',';
            s += fmt(static_cast<double>(v[i]));
        }
        return s;
    };
    std::ostringstream o;
    o << "experiment=" << to_string(c.experiment) << '\n'
      << "model=" << to_string(c.model) << '\n'
      << "alpha=" << fmt(c.alpha) << '\n'
      << "beta0=" << fmt(c.beta0) << '\n'
      << "n=" << list(c.n_list) << '\n'
      << "tau=" << list(c.tau_list) << '\n'
      << "gamma=" << fmt(c.gamma) << '\n'
      << "replicas=" << c.replicas << '\n'
      << "seed=" << c.seed << '\n'
      << "delta=" << fmt(c.delta) << '\n'
      << "delta_scale=" << fmt(c.delta_scale) << '\n'
      << "budget_core_hours=" << fmt(c.budget_core_hours) << '\n'
      << "seconds_per_cell=" << fmt(c.seconds_per_cell) << '\n'
      << "phi=" << c.phi << '\n'
      << "tail_b=" << list(c.tail_b) << '\n'
      << "bootstrap=" << c.bootstrap << '\n'
      << "crosscheck_cells=" << c.crosscheck_cells << '\n';
    return o.str();
}

Phi parse_phi(const std::string& d) {
    Phi phi;
    if (d == "none") return phi;
    if (d == "zero") {
        phi.f = [](double) { return 0.0; };
        return phi;
    }
    const auto colon = d.find(':');
    const std::string name = d.substr(0, colon);
    double value = 0;
    if (colon != std::string::npos) {
        try {
            std::size_t used = 0;
            value = std::stod(d.substr(colon + 1), &used);
            if (used != d.size() - colon - 1) throw DomainError("");
        } catch (...) {
            throw DomainError("phi: cannot parse '" + d + "'");
        }
    }
    if (colon == std::string::npos || !std::isfinite(value))
        throw DomainError("phi: expected none, zero, const:c or sin:K, got '" + d + "'");
    if (name == "const") {
        phi.f = [value](double) { return value; };
        phi.bound = std::abs(value);
    } else if (name == "sin") {
        phi.f = [value](double x) { return value * std::sin(x); };
        phi.bound = std::abs(value);
    } else if (name == "linear") {
        throw DomainError("phi: linear profiles are unbounded");
    } else {
        throw DomainError("phi: unknown profile '" + name + "'");
    }
    return phi;
}

std::uint64_t group_seed(std::uint64_t master_seed, std::size_t n, double tau) {
    return derive_seed(derive_seed(master_seed, n), std::bit_cast<std::uint64_t>(tau));
}

double experiment_delta(const ExperimentConfig& cfg, double theta) {
    if (cfg.delta > 0) return cfg.delta;
    if (!(theta > 0)) return 0.02;
    return std::min(0.02, cfg.delta_scale / (theta * theta));
}

ExperimentPlan plan_experiment(const ExperimentConfig& input) {
    ExperimentPlan plan;
    ExperimentConfig& cfg = plan.config;
    cfg = input;
    const ExperimentKind kind = cfg.experiment;
    if (kind == ExperimentKind::kpz) {
        cfg.alpha = 0.25;
        cfg.beta0 = 1;
    }
    if (kind == ExperimentKind::variance || kind == ExperimentKind::kpz) cfg.model = TableKind::stationary;
    if (kind == ExperimentKind::ptp) cfg.model = TableKind::point_to_point;

    if (!(cfg.alpha >= 0 && cfg.alpha <= 0.25))
        throw DomainError("alpha must lie in [0, 0.25], got " + short_fmt(cfg.alpha));
    if (kind == ExperimentKind::ptp && !(cfg.alpha < 0.25))
        throw DomainError("ptp fluctuation needs alpha in [0, 0.25)");
    if (!(cfg.beta0 > 0) || !std::isfinite(cfg.beta0)) throw DomainError("beta0 must be positive");
    if (cfg.n_list.empty()) throw DomainError("n list is empty");
    for (std::size_t i = 0; i < cfg.n_list.size(); ++i) {
        if (cfg.n_list[i] < 1) throw DomainError("n values must be positive");
        if (i && cfg.n_list[i] <= cfg.n_list[i - 1]) throw DomainError("n list must be increasing");
    }
    if (cfg.tau_list.empty()) throw DomainError("tau list is empty");
    for (std::size_t i = 0; i < cfg.tau_list.size(); ++i) {
        if (!(cfg.tau_list[i] > 0) || !std::isfinite(cfg.tau_list[i]))
            throw DomainError("tau values must be positive");
        for (std::size_t j = 0; j < i; ++j)
            if (cfg.tau_list[j] == cfg.tau_list[i]) throw DomainError("tau values must be distinct");
    }
    if (!(cfg.gamma > 0 && cfg.gamma < 1)) throw DomainError("gamma must lie in (0, 1)");
    if (cfg.bootstrap < kMinBootstrap) throw DomainError("bootstrap needs at least 200 resamples");
    if (!(cfg.delta >= 0) || !(cfg.delta_scale > 0)) throw DomainError("grid step must be positive");
    if (!(cfg.budget_core_hours > 0) || !(cfg.seconds_per_cell > 0))
        throw DomainError("budget and cost model must be positive");
    for (double b : cfg.tail_b)
        if (!(b > 0)) throw DomainError("tail multiples must be positive");
    const Phi phi = parse_phi(cfg.phi);
    if (cfg.phi != "none" && kind != ExperimentKind::kpz) throw DomainError("phi applies to kpz only");

    if (kind == ExperimentKind::kpz) {
        if (cfg.n_list.size() != 1) throw DomainError("kpz scaling takes a single n");
        require_span(cfg.tau_list, "tau list");
    } else {
        std::vector<double> ns(cfg.n_list.begin(), cfg.n_list.end());
        require_span(ns, "n list");
        if (cfg.tau_list.size() > 1) require_span(cfg.tau_list, "tau list");
    }
    for (double tau : cfg.tau_list)
        if (tau < 1) plan.warnings.push_back("tau = " + short_fmt(tau) + " is below 1");

    // Points: n sweep at tau_list[0], tau sweep at n_list.back().
    const double tau0 = cfg.tau_list.front();
    auto make_point = [&](std::size_t n, double tau) {
        ExperimentPoint p;
        p.n = n;
        p.tau = tau;
        p.params = characteristic_params(cfg.alpha, cfg.beta0, tau, n);
        const double nl = static_cast<double>(p.params.n_levels);
        if (kind == ExperimentKind::ptp)
            p.scale = std::cbrt(tau) * std::pow(static_cast<double>(n), (1 - 4 * cfg.alpha) / 3);
        else if (kind == ExperimentKind::path)
            p.scale = std::pow(cfg.beta0, -2.0 / 3.0) * std::pow(nl, 2.0 / 3.0) *
                      std::pow(p.params.theta, -4.0 / 3.0);
        else
            p.scale = 1;
        if (kind == ExperimentKind::path) {
            const auto level = static_cast<std::size_t>(std::floor(cfg.gamma * nl));
            if (level < 1 || level >= p.params.n_levels)
                throw DomainError("path fluctuation: gamma n must be >= 1 and < n at n = " + std::to_string(n));
        }
        if (kind == ExperimentKind::ptp && p.params.n_levels < 2)
            throw DomainError("ptp fluctuation needs at least 2 levels");
        plan.points.push_back(p);
    };
    if (kind != ExperimentKind::kpz)
        for (std::size_t n : cfg.n_list) make_point(n, tau0);
    else
        make_point(cfg.n_list.back(), tau0);
    for (std::size_t i = 1; i < cfg.tau_list.size(); ++i) make_point(cfg.n_list.back(), cfg.tau_list[i]);

    const bool can_nest = kind == ExperimentKind::variance || (kind == ExperimentKind::kpz && !has_phi(cfg));
    std::vector<std::size_t> sweep;  // points at n_list.back()
    for (std::size_t i = 0; i < plan.points.size(); ++i)
        if (plan.points[i].n == cfg.n_list.back()) sweep.push_back(i);

    auto single_group = [&](std::size_t i) {
        ExperimentPoint& p = plan.points[i];
        TaskGroup g;
        g.n = p.n;
        g.points = {i};
        g.levels = p.params.n_levels;
        const double delta = experiment_delta(cfg, p.params.theta);
        double t_neg = 0;
        if (has_phi(cfg)) t_neg = kpz_truncation(kpz_setup(p.tau, p.n), phi.bound, KpzOptions{}.epsilon);
        g.grid = GridSpec::uniform(p.params.t, delta, t_neg);
        g.seed = group_seed(cfg.seed, p.n, p.tau);
        g.crosscheck = kind == ExperimentKind::variance && cfg.crosscheck_cells > 0 &&
                       static_cast<double>(g.levels) * static_cast<double>(g.grid.nodes()) <=
                           static_cast<double>(cfg.crosscheck_cells);
        p.group = plan.groups.size();
        p.node = g.grid.m_count;
        plan.groups.push_back(g);
    };

    // Nested group for the tau sweep when every tau n is an integer and the
    // tau ratios admit a common grid. Groups are listed in the order of their
    // first point.
    std::optional<TaskGroup> nested;
    if (can_nest && sweep.size() > 1) {
        std::vector<double> taus;
        bool integral = true;
        for (std::size_t i : sweep) {
            taus.push_back(plan.points[i].tau);
            integral = integral && is_integer(plan.points[i].tau * static_cast<double>(plan.points[i].n));
        }
        const std::size_t q = common_denominator(taus);
        if (integral && q > 0) {
            const double tau_max = *std::max_element(taus.begin(), taus.end());
            const std::size_t n = cfg.n_list.back();
            const ScaledParams top = characteristic_params(cfg.alpha, cfg.beta0, tau_max, n);
            const double delta = experiment_delta(cfg, top.theta);
            const auto m_unit =
                static_cast<std::size_t>(std::ceil(top.t / tau_max / (delta * static_cast<double>(q)))) * q;
            TaskGroup g;
            g.n = n;
            g.nested = true;
            g.levels = top.n_levels;
            g.grid.t_max = top.t;
            g.grid.m_count = static_cast<std::size_t>(std::llround(tau_max * static_cast<double>(m_unit)));
            g.grid.delta = top.t / static_cast<double>(g.grid.m_count);
            g.seed = group_seed(cfg.seed, n, tau_max);
            g.points = sweep;
            for (std::size_t i : sweep)
                plan.points[i].node = static_cast<std::size_t>(std::llround(plan.points[i].tau * static_cast<double>(m_unit)));
            nested = g;
        }
    }
    for (std::size_t i = 0; i < plan.points.size(); ++i) {
        if (nested && plan.points[i].n == nested->n) {
            if (i != nested->points.front()) continue;
            for (std::size_t j : nested->points) plan.points[j].group = plan.groups.size();
            plan.groups.push_back(*nested);
            continue;
        }
        single_group(i);
    }

    switch (kind) {
        case ExperimentKind::variance:
            plan.values = {"logZ", "sigma0_plus"};
            break;
        case ExperimentKind::ptp:
            plan.values = {"logZ", "centered"};
            break;
        case ExperimentKind::path:
            plan.values = {"abs_sigma"};
            for (double b : cfg.tail_b) plan.values.push_back(tail_name(b));
            plan.values.push_back("unresolved");
            break;
        case ExperimentKind::kpz:
            plan.values = {"logZ"};
            if (has_phi(cfg)) plan.values.push_back("logZ_zero");
            break;
    }

    for (const TaskGroup& g : plan.groups) plan.cells_per_replica += group_cells(cfg, g);
    const double budget_seconds = cfg.budget_core_hours * 3600.0;
    const double per_replica = plan.cells_per_replica * cfg.seconds_per_cell;
    if (cfg.replicas == 0) {
        const double r = std::floor(budget_seconds / per_replica);
        if (r < 2) throw BudgetError("budget of " + short_fmt(cfg.budget_core_hours) +
                                     " core-hours does not cover 2 replicas");
        plan.replicas = static_cast<std::size_t>(std::min(r, static_cast<double>(kMaxAutoReplicas)));
    } else {
        if (cfg.replicas < 2) throw DomainError("replicas must be at least 2");
        plan.replicas = cfg.replicas;
    }
    plan.estimated_core_hours = per_replica * static_cast<double>(plan.replicas) / 3600.0;
    if (plan.estimated_core_hours > cfg.budget_core_hours)
        throw BudgetError("estimated cost " + short_fmt(plan.estimated_core_hours) +
                          " core-hours exceeds the budget of " + short_fmt(cfg.budget_core_hours));
    return plan;
}

std::size_t task_index(const ExperimentPlan& plan, std::size_t group, std::size_t replica) {
    if (group >= plan.groups.size() || replica >= plan.replicas) throw IndexError("task out of range");
    return group * plan.replicas + replica;
}

TaskRecord run_task(const ExperimentPlan& plan, std::size_t task) {
    if (task >= plan.tasks()) throw IndexError("task out of range");
    const ExperimentConfig& cfg = plan.config;
    TaskRecord rec;
    rec.group = task / plan.replicas;
    rec.replica = task % plan.replicas;
    const TaskGroup& g = plan.groups[rec.group];
    const auto rep = static_cast<std::uint32_t>(rec.replica);
    rec.values.assign(g.points.size(), std::vector<double>(plan.values.size(), kNaN));
    const ExperimentPoint& first = plan.points[g.points.front()];
    const double theta = first.params.theta;

    switch (cfg.experiment) {
        case ExperimentKind::variance:
        case ExperimentKind::kpz: {
            if (has_phi(cfg)) {
                const EnvironmentStream env(g.levels, g.grid, g.seed, rep);
                const Phi phi = parse_phi(cfg.phi);
                Phi zero{[](double) { return 0.0; }, 0.0};
                rec.values[0][0] = kpz_logZ(env, nullptr, first.tau, first.n, &phi);
                rec.values[0][1] = kpz_logZ(env, nullptr, first.tau, first.n, &zero);
                break;
            }
            const EnvironmentStream env(g.levels, g.grid, g.seed, rep);
            const BoundaryWeights bw = sample_boundary(theta, g.levels, g.seed, rep);
            std::vector<std::pair<std::size_t, std::size_t>> at;
            for (std::size_t i : g.points) at.emplace_back(plan.points[i].params.n_levels, plan.points[i].node);
            const std::vector<double> v = stationary_values_at(env, bw, theta, g.levels, at);
            for (std::size_t j = 0; j < g.points.size(); ++j) {
                const ScaledParams& p = plan.points[g.points[j]].params;
                double offset = p.stationary_log_offset;
                if (cfg.experiment == ExperimentKind::kpz) offset -= 0.5 * p.t;
                rec.values[j][0] = v[j] + offset;
            }
            if (g.crosscheck) {
                const Environment full = generate(g.levels, g.grid, g.seed, rep);
                const DPTable table = stationary_forward(full, bw, theta, g.levels);
                const std::size_t level = 0;
                const QuenchedMarginals q = quenched_marginals(table, full, {&level, 1});
                rec.values[0][1] = q.expect(0, [](double s) { return s; });
            }
            break;
        }
        case ExperimentKind::ptp: {
            const EnvironmentStream env(g.levels, g.grid, g.seed, rep);
            const ScaledParams& p = first.params;
            const double v = ptp_final(env, g.levels);
            const double t = g.grid.t_max;
            rec.values[0][0] = v + p.log_offset;
            rec.values[0][1] = v - (theta * t - static_cast<double>(g.levels) * psi0(theta));
            break;
        }
        case ExperimentKind::path: {
            const Environment env = generate(g.levels, g.grid, g.seed, rep);
            const DPTable table =
                cfg.model == TableKind::point_to_point
                    ? ptp_forward(env, g.levels)
                    : stationary_forward(env, sample_boundary(theta, g.levels, g.seed, rep), theta, g.levels);
            const auto level = static_cast<std::size_t>(std::floor(cfg.gamma * static_cast<double>(g.levels)));
            std::vector<double> thresholds;
            for (double b : cfg.tail_b) thresholds.push_back(b * first.scale);
            const BulkDeviation d =
                quenched_bulk_deviation(table, env, level, cfg.gamma * g.grid.t_max, thresholds);
            const double unscale = 1.0 / (first.params.beta * first.params.beta);
            auto& out = rec.values[0];
            out[0] = d.mean_abs * unscale;
            for (std::size_t i = 0; i < thresholds.size(); ++i) out[1 + i] = d.tail[i];
            out.back() = d.unresolved;
            break;
        }
    }
    return rec;
}

const FitRecord& ExperimentReport::fit(const std::string& name) const {
    for (const auto& f : fits)
        if (f.name == name) return f;
    throw IndexError("report has no fit '" + name + "'");
}

const CheckRecord& ExperimentReport::check(const std::string& name) const {
    for (const auto& c : checks)
        if (c.name == name) return c;
    throw IndexError("report has no check '" + name + "'");
}

const ReportRow& ExperimentReport::row(std::size_t n, double tau, const std::string& statistic) const {
    for (const auto& r : rows)
        if (r.n == n && r.tau == tau && r.statistic == statistic) return r;
    throw IndexError("report has no row '" + statistic + "'");
}

ExperimentReport aggregate(const ExperimentPlan& plan, std::vector<TaskRecord> records) {
    const ExperimentConfig& cfg = plan.config;
    const std::size_t R = plan.replicas;
    std::sort(records.begin(), records.end(), [&](const TaskRecord& a, const TaskRecord& b) {
        return task_index(plan, a.group, a.replica) < task_index(plan, b.group, b.replica);
    });
    if (records.size() != plan.tasks()) throw IndexError("aggregate: incomplete task records");
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (task_index(plan, records[i].group, records[i].replica) != i)
            throw IndexError("aggregate: duplicate or missing task record");
        if (records[i].values.size() != plan.groups[records[i].group].points.size())
            throw IndexError("aggregate: malformed task record");
    }

    // samples[point][value][replica]
    const std::size_t nv = plan.values.size();
    std::vector<std::vector<std::vector<double>>> samples(
        plan.points.size(), std::vector<std::vector<double>>(nv, std::vector<double>(R)));
    for (const TaskRecord& rec : records) {
        const TaskGroup& g = plan.groups[rec.group];
        for (std::size_t j = 0; j < g.points.size(); ++j) {
            if (rec.values[j].size() != nv) throw IndexError("aggregate: malformed task record");
            for (std::size_t v = 0; v < nv; ++v) samples[g.points[j]][v][rec.replica] = rec.values[j][v];
        }
    }

    ExperimentReport report;
    report.config = cfg;
    report.replicas = R;
    report.warnings = plan.warnings;
    const std::string kind = cfg.experiment == ExperimentKind::kpz ? "kpz" : to_string(cfg.model);
    const Phi phi = parse_phi(cfg.phi);

    for (std::size_t i = 0; i < plan.points.size(); ++i) {
        const ExperimentPoint& p = plan.points[i];
        const TaskGroup& g = plan.groups[p.group];
        const auto& s = samples[i];
        auto add = [&](const std::string& stat, double value, double se) {
            report.rows.push_back({kind, cfg.alpha, cfg.beta0, p.tau, p.n, R, g.grid.delta, stat, value, se});
        };
        auto add_estimate = [&](const std::string& stat, Estimate e) { add(stat, e.value, e.se); };
        switch (cfg.experiment) {
            case ExperimentKind::variance:
            case ExperimentKind::kpz: {
                add_estimate("mean_logZ", mean_estimate(s[0]));
                const Estimate var = variance_estimate(s[0]);
                add_estimate("var_logZ", var);
                if (cfg.experiment == ExperimentKind::variance && g.crosscheck) {
                    const Estimate sigma = mean_estimate(s[1]);
                    add_estimate("mean_sigma0_plus", sigma);
                    const double nl = static_cast<double>(p.params.n_levels);
                    const Estimate target{nl * psi1(p.params.theta) - g.grid.t_max + 2 * sigma.value,
                                          2 * sigma.se};
                    add_estimate("var_identity_target", target);
                    const double se = std::hypot(var.se, target.se);
                    CheckRecord c;
                    c.name = "var_identity_n" + std::to_string(p.n) + "_tau" + short_fmt(p.tau);
                    c.value = std::abs(var.value - target.value) / se;
                    c.threshold = 5;
                    c.passed = c.value <= c.threshold;
                    c.detail = "|Var log Z - (n psi1(theta) - t + 2 E sigma_0^+)| in pooled SE";
                    report.checks.push_back(c);
                }
                if (has_phi(cfg)) {
                    std::vector<double> shift(R);
                    double worst = 0, worst_const = 0;
                    for (std::size_t r = 0; r < R; ++r) {
                        shift[r] = s[0][r] - s[1][r];
                        worst = std::max(worst, std::abs(shift[r]));
                        worst_const = std::max(worst_const, std::abs(shift[r] - phi.f(0)));
                    }
                    add_estimate("mean_shift", mean_estimate(shift));
                    add("max_abs_shift", worst, 0);
                    report.checks.push_back({"phi_sandwich_tau" + short_fmt(p.tau), worst, phi.bound + 1e-9,
                                             worst <= phi.bound + 1e-9,
                                             "max |log Z^phi - log Z^0| against sup |phi|"});
                    if (cfg.phi.rfind("const:", 0) == 0 || cfg.phi == "zero")
                        report.checks.push_back({"constant_shift_tau" + short_fmt(p.tau), worst_const, 1e-9,
                                                 worst_const <= 1e-9,
                                                 "max |log Z^phi - log Z^0 - c| for constant phi"});
                }
                break;
            }
            case ExperimentKind::ptp: {
                add_estimate("mean_logZ", mean_estimate(s[0]));
                add_estimate("var_logZ", variance_estimate(s[0]));
                add_estimate("mean_centered", mean_estimate(s[1]));
                std::vector<double> abs_dev(R);
                for (std::size_t r = 0; r < R; ++r) abs_dev[r] = std::abs(s[1][r]);
                add_estimate("mean_abs_centered", mean_estimate(abs_dev));
                for (double b : cfg.tail_b) {
                    std::vector<double> hit(R);
                    for (std::size_t r = 0; r < R; ++r) hit[r] = abs_dev[r] >= b * p.scale ? 1.0 : 0.0;
                    add_estimate(tail_name(b), mean_estimate(hit));
                }
                break;
            }
            case ExperimentKind::path: {
                add_estimate("mean_abs_sigma", mean_estimate(s[0]));
                for (std::size_t b = 0; b < cfg.tail_b.size(); ++b)
                    add_estimate(tail_name(cfg.tail_b[b]), mean_estimate(s[1 + b]));
                const Estimate unresolved = mean_estimate(s.back());
                add_estimate("mean_unresolved", unresolved);
                if (unresolved.value > 1e-3)
                    report.warnings.push_back("unresolved jump mass " + short_fmt(unresolved.value) +
                                              " at n = " + std::to_string(p.n));
                break;
            }
        }
    }

    // Per-replica fitted statistic of a point.
    auto fit_samples = [&](std::size_t i) -> std::vector<double> {
        const auto& s = samples[i];
        if (cfg.experiment == ExperimentKind::ptp) {
            std::vector<double> a(R);
            for (std::size_t r = 0; r < R; ++r) a[r] = std::abs(s[1][r]);
            return a;
        }
        return s[0];
    };
    const bool use_variance = cfg.experiment == ExperimentKind::variance || cfg.experiment == ExperimentKind::kpz;
    const auto statistic = use_variance ? sample_variance : sample_mean;
    const std::string stat_name = use_variance                                ? "var_logZ"
                                  : cfg.experiment == ExperimentKind::ptp     ? "mean_abs_centered"
                                                                              : "mean_abs_sigma";
    auto do_fit = [&](const std::string& name, bool tau_axis, std::vector<std::size_t> idx, std::uint64_t tag) {
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return tau_axis ? plan.points[a].tau < plan.points[b].tau : plan.points[a].n < plan.points[b].n;
        });
        FitRecord f;
        f.name = name;
        f.abscissa = tau_axis ? "tau" : "n";
        f.statistic = stat_name;
        std::vector<std::vector<double>> data;
        bool paired = true;
        for (std::size_t i : idx) {
            f.x.push_back(tau_axis ? plan.points[i].tau : static_cast<double>(plan.points[i].n));
            data.push_back(fit_samples(i));
            f.y.push_back(statistic(data.back()));
            paired = paired && plan.points[i].group == plan.points[idx.front()].group;
        }
        f.fit = fit_power_law(f.x, data, statistic, cfg.bootstrap, derive_seed(cfg.seed, tag), 0.95, paired);
        f.target = target_slope(cfg.experiment, cfg.alpha, tau_axis);
        f.target_source = target_source(cfg.experiment, tau_axis);
        report.fits.push_back(f);
    };
    const double tau0 = cfg.tau_list.front();
    if (cfg.experiment != ExperimentKind::kpz) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < plan.points.size(); ++i)
            if (plan.points[i].tau == tau0) idx.push_back(i);
        do_fit("n_slope", false, idx, 1);
    }
    if (cfg.tau_list.size() > 1) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < plan.points.size(); ++i)
            if (plan.points[i].n == cfg.n_list.back()) idx.push_back(i);
        do_fit("tau_slope", true, idx, 2);
    }

    // Tail decay between b and 2b, pooled over the n sweep: the envelope
    // b^-e predicts a ratio 2^e; the check asks for half of it.
    if (cfg.experiment == ExperimentKind::ptp || cfg.experiment == ExperimentKind::path) {
        const double exponent = cfg.experiment == ExperimentKind::ptp ? 1.5 : 3.0;
        const double ratio = 0.5 * std::pow(2.0, exponent);
        for (std::size_t a = 0; a < cfg.tail_b.size(); ++a) {
            for (std::size_t b = 0; b < cfg.tail_b.size(); ++b) {
                if (cfg.tail_b[b] != 2 * cfg.tail_b[a]) continue;
                double low = 0, high = 0, diff = 0, var = 0;
                std::size_t count = 0;
                for (std::size_t i = 0; i < plan.points.size(); ++i) {
                    if (plan.points[i].tau != tau0) continue;
                    std::vector<double> lo(R), hi(R), d(R);
                    for (std::size_t r = 0; r < R; ++r) {
                        if (cfg.experiment == ExperimentKind::path) {
                            lo[r] = samples[i][1 + a][r];
                            hi[r] = samples[i][1 + b][r];
                        } else {
                            const double dev = std::abs(samples[i][1][r]);
                            lo[r] = dev >= cfg.tail_b[a] * plan.points[i].scale ? 1.0 : 0.0;
                            hi[r] = dev >= cfg.tail_b[b] * plan.points[i].scale ? 1.0 : 0.0;
                        }
                        d[r] = lo[r] - ratio * hi[r];
                    }
                    low += sample_mean(lo);
                    high += sample_mean(hi);
                    const Estimate e = mean_estimate(d);
                    diff += e.value;
                    var += e.se * e.se;
                    ++count;
                }
                const double k = static_cast<double>(count);
                low /= k;
                high /= k;
                diff /= k;
                const double se = std::sqrt(var) / k;
                CheckRecord c;
                c.name = "tail_ratio_b" + short_fmt(cfg.tail_b[a]) + "_b" + short_fmt(cfg.tail_b[b]);
                c.value = high > 0 ? low / high : std::numeric_limits<double>::infinity();
                c.threshold = ratio;
                c.passed = low > 0 && diff >= -2 * se;
                c.detail = "pooled tail frequencies " + fmt(low) + " and " + fmt(high) +
                           "; passes when P(b) - ratio P(2b) >= -2 SE (SE " + fmt(se) + ")";
                report.checks.push_back(c);
            }
        }
    }
    return report;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg, std::size_t workers) {
    const ExperimentPlan plan = plan_experiment(cfg);
    std::vector<TaskRecord> records(plan.tasks());
    parallel_for(plan.tasks(), workers, [&](std::size_t i) { records[i] = run_task(plan, i); });
    return aggregate(plan, std::move(records));
}

namespace {

ExperimentReport run_as(ExperimentConfig cfg, ExperimentKind kind, std::size_t workers) {
    if (cfg.experiment != kind)
        throw DomainError("config is for the " + to_string(cfg.experiment) + " experiment, not " + to_string(kind));
    return run_experiment(cfg, workers);
}

}  // namespace

ExperimentReport run_variance_scaling(const ExperimentConfig& cfg, std::size_t workers) {
    return run_as(cfg, ExperimentKind::variance, workers);
}

ExperimentReport run_ptp_fluctuation(const ExperimentConfig& cfg, std::size_t workers) {
    return run_as(cfg, ExperimentKind::ptp, workers);
}

ExperimentReport run_path_fluctuation(const ExperimentConfig& cfg, std::size_t workers) {
    return run_as(cfg, ExperimentKind::path, workers);
}

ExperimentReport run_kpz_scaling(const ExperimentConfig& cfg, std::size_t workers) {
    return run_as(cfg, ExperimentKind::kpz, workers);
}

void write_rows_csv(const ExperimentReport& report, std::ostream& out) {
    out << "kind,alpha,beta0,tau,n,replicas,delta,statistic,value,se\n";
    for (const ReportRow& r : report.rows) {
        out << r.kind << ',' << fmt(r.alpha) << ',' << fmt(r.beta0) << ',' << fmt(r.tau) << ',' << r.n << ','
            << r.replicas << ',' << fmt(r.delta) << ',' << r.statistic << ',' << fmt(r.value) << ','
            << fmt(r.se) << '\n';
    }
}

std::string summary_json(const ExperimentReport& report) {
    const ExperimentConfig& c = report.config;
    json j;
    j["experiment"] = to_string(c.experiment);
    j["model"] = c.experiment == ExperimentKind::kpz ? "kpz" : to_string(c.model);
    j["alpha"] = c.alpha;
    j["beta0"] = c.beta0;
    j["n"] = c.n_list;
    j["tau"] = c.tau_list;
    if (c.experiment == ExperimentKind::path) j["gamma"] = c.gamma;
    if (c.experiment == ExperimentKind::kpz) j["phi"] = c.phi;
    j["seed"] = c.seed;
    j["replicas"] = report.replicas;
    json fits = json::array();
    for (const FitRecord& f : report.fits) {
        json o;
        o["name"] = f.name;
        o["abscissa"] = f.abscissa;
        o["statistic"] = f.statistic;
        o["slope"] = number(f.fit.slope);
        o["intercept"] = number(f.fit.intercept);
        o["ci_low"] = number(f.fit.ci_low);
        o["ci_high"] = number(f.fit.ci_high);
        o["ci_level"] = f.fit.level;
        o["slope_se"] = number(f.fit.slope_se);
        o["bootstrap_resamples"] = f.fit.resamples;
        o["target"] = f.target;
        o["target_source"] = f.target_source;
        o["x"] = f.x;
        json ys = json::array();
        for (double y : f.y) ys.push_back(number(y));
        o["y"] = ys;
        fits.push_back(o);
    }
    j["fits"] = fits;
    json checks = json::array();
    for (const CheckRecord& k : report.checks) {
        json o;
        o["name"] = k.name;
        o["value"] = number(k.value);
        o["threshold"] = k.threshold;
        o["passed"] = k.passed;
        o["detail"] = k.detail;
        checks.push_back(o);
    }
    j["checks"] = checks;
    j["warnings"] = report.warnings;
    return j.dump(2);
}

std::string to_json_line(const ExperimentPlan& plan, const TaskRecord& rec) {
    json j;
    j["task"] = task_index(plan, rec.group, rec.replica);
    j["group"] = rec.group;
    j["replica"] = rec.replica;
    json values = json::array();
    for (std::size_t i = 0; i < rec.values.size(); ++i) {
        json o;
        const ExperimentPoint& p = plan.points[plan.groups[rec.group].points[i]];
        o["n"] = p.n;
        o["tau"] = p.tau;
        for (std::size_t v = 0; v < rec.values[i].size(); ++v) o[plan.values[v]] = number(rec.values[i][v]);
        values.push_back(o);
    }
    j["points"] = values;
    return j.dump();
}

TaskRecord task_from_json_line(const ExperimentPlan& plan, const std::string& line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw IndexError(std::string("task record: ") + e.what());
    }
    try {
        TaskRecord rec;
        rec.group = j.at("group").get<std::size_t>();
        rec.replica = j.at("replica").get<std::size_t>();
        if (j.at("task").get<std::size_t>() != task_index(plan, rec.group, rec.replica))
            throw IndexError("task record: index does not match the plan");
        const auto& pts = j.at("points");
        const TaskGroup& g = plan.groups[rec.group];
        if (pts.size() != g.points.size()) throw IndexError("task record: point count does not match the plan");
        for (std::size_t i = 0; i < pts.size(); ++i) {
            std::vector<double> v;
            for (const std::string& name : plan.values) {
                const auto& x = pts[i].at(name);
                v.push_back(x.is_null() ? kNaN : x.get<double>());
            }
            rec.values.push_back(std::move(v));
        }
        return rec;
    } catch (const json::exception& e) {
        throw IndexError(std::string("task record: ") + e.what());
    }
}

}  // namespace dpbe
