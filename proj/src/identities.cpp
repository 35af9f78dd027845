#include "dpbe/identities.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <json.hpp>

#include "dpbe/errors.hpp"
#include "dpbe/parallel.hpp"
#include "dpbe/pathsampler.hpp"
#include "dpbe/specialfn.hpp"
#include "dpbe/stats.hpp"

namespace dpbe {
namespace {

std::vector<double> replicate(std::size_t replicas, std::size_t workers,
                              const std::function<double(std::uint32_t)>& f) {
    std::vector<double> out(replicas);
    parallel_for(replicas, workers, [&](std::size_t r) { out[r] = f(static_cast<std::uint32_t>(r)); });
    return out;
}

void check_theta(double theta, const char* who) {
    if (!(theta > 0) || !std::isfinite(theta)) throw DomainError(std::string(who) + ": theta must be > 0");
}

void check_replicas(std::size_t replicas, const char* who) {
    if (replicas < 4) throw DomainError(std::string(who) + ": needs at least 4 replicas");
}

double step(const RunOptions& o, double theta) { return o.delta > 0 ? o.delta : auto_delta(theta); }

std::uint64_t tag_of(double x) { return std::bit_cast<std::uint64_t>(x); }

IdentityVerdict verdict(std::string name, double statistic, double threshold, std::size_t replicas) {
    IdentityVerdict v;
    v.name = std::move(name);
    v.statistic = statistic;
    v.threshold = threshold;
    v.n_replicas = replicas;
    v.passed = statistic <= threshold;
    return v;
}

}  // namespace

double IdentityVerdict::detail(const std::string& key) const {
    for (const auto& [k, v] : details)
        if (k == key) return v;
    throw IndexError("verdict " + name + ": no detail '" + key + "'");
}

std::string to_json_line(const IdentityVerdict& v) {
    nlohmann::ordered_json j;
    j["name"] = v.name;
    j["passed"] = v.passed;
    j["statistic"] = v.statistic;
    j["threshold"] = v.threshold;
    j["p_value"] = std::isnan(v.p_value) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(v.p_value);
    j["p_floor"] = std::isnan(v.p_floor) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(v.p_floor);
    j["n_replicas"] = v.n_replicas;
    nlohmann::ordered_json d = nlohmann::ordered_json::object();
    for (const auto& [k, x] : v.details) d[k] = std::isfinite(x) ? nlohmann::ordered_json(x) : nlohmann::ordered_json(nullptr);
    j["details"] = d;
    return j.dump();
}

double auto_delta(double theta) {
    if (!(theta > 0)) return 0.02;
    return std::min(0.02, 0.1 / (theta * theta));
}

// ---------------------------------------------------------------------------

IdentityVerdict mean_identity(double theta, std::size_t n, double t, std::size_t replicas,
                              const RunOptions& o) {
    check_theta(theta, "mean_identity");
    check_replicas(replicas, "mean_identity");
    const double target = -static_cast<double>(n) * psi0(theta) + theta * t;
    const GridSpec coarse_grid = GridSpec::uniform(t, step(o, theta));
    const GridSpec fine_grid = coarse_grid.refined();
    std::vector<double> coarse(replicas), fine(replicas);
    parallel_for(replicas, o.workers, [&](std::size_t r) {
        const auto rep = static_cast<std::uint32_t>(r);
        const Environment env = generate(std::max<std::size_t>(n, 1), fine_grid, o.seed, rep);
        const BoundaryWeights bw = sample_boundary(theta, n, o.seed, rep);
        fine[r] = stationary_final(env, bw, theta, n);
        coarse[r] = stationary_final(env.coarsened(), bw, theta, n);
    });
    std::vector<double> extrap(replicas);
    for (std::size_t r = 0; r < replicas; ++r) extrap[r] = 2.0 * fine[r] - coarse[r];
    const Estimate f = mean_estimate(fine), c = mean_estimate(coarse), x = mean_estimate(extrap);
    const double allowance = std::abs(f.value - c.value);
    IdentityVerdict v = verdict("mean", std::abs(f.value - target), 4.0 * f.se + allowance, replicas);
    v.details = {{"theta", theta},
                 {"n", static_cast<double>(n)},
                 {"t", t},
                 {"delta", coarse_grid.delta},
                 {"target", target},
                 {"mean_fine", f.value},
                 {"se_fine", f.se},
                 {"mean_coarse", c.value},
                 {"se_coarse", c.se},
                 {"discretization_allowance", allowance},
                 {"mean_extrapolated", x.value},
                 {"se_extrapolated", x.se},
                 {"z_extrapolated", std::abs(x.value - target) / x.se}};
    return v;
}

IdentityVerdict variance_identity(double theta, std::size_t n, double t, std::size_t replicas,
                                  const RunOptions& o) {
    check_theta(theta, "variance_identity");
    check_replicas(replicas, "variance_identity");
    const GridSpec grid = GridSpec::uniform(t, step(o, theta));
    std::vector<double> logz(replicas), sigma_plus(replicas, 0.0);
    parallel_for(replicas, o.workers, [&](std::size_t r) {
        const auto rep = static_cast<std::uint32_t>(r);
        const Environment env = generate(std::max<std::size_t>(n, 1), grid, o.seed, rep);
        const DPTable table = stationary_forward(env, sample_boundary(theta, n, o.seed, rep), theta, n);
        logz[r] = table.final_value();
        if (n > 0) {
            const std::size_t level = 0;
            const auto q = quenched_marginals(table, env, {&level, 1});
            sigma_plus[r] = q.expect(0, [](double s) { return s; });
        }
    });
    const Estimate var = variance_estimate(logz);
    const Estimate sp = mean_estimate(sigma_plus);
    const double linear = static_cast<double>(n) * psi1(theta) - t;
    const double target = n == 0 ? t : linear + 2.0 * sp.value;
    const double pooled = n == 0 ? var.se : std::sqrt(var.se * var.se + 4.0 * sp.se * sp.se);
    IdentityVerdict v = verdict("variance", std::abs(var.value - target), 5.0 * pooled, replicas);
    v.details = {{"theta", theta},
                 {"n", static_cast<double>(n)},
                 {"t", t},
                 {"delta", grid.delta},
                 {"variance", var.value},
                 {"variance_se", var.se},
                 {"mean_sigma0_plus", sp.value},
                 {"mean_sigma0_plus_se", sp.se},
                 {"linear_term", linear},
                 {"target", target},
                 {"pooled_se", pooled},
                 // E|sigma_0| = E sigma_0^+ + E sigma_0^- with E sigma_0^+ - E sigma_0^- = t - n psi1.
                 {"mean_abs_sigma0", 2.0 * sp.value + linear}};
    return v;
}

IdentityVerdict variance_lipschitz(double theta, double lambda, std::size_t n, double t,
                                   std::size_t replicas, const RunOptions& o) {
    check_theta(theta, "variance_lipschitz");
    check_theta(lambda, "variance_lipschitz");
    check_replicas(replicas, "variance_lipschitz");
    const GridSpec grid = GridSpec::uniform(t, step(o, std::max(theta, lambda)));
    std::vector<double> a(replicas), b(replicas);
    parallel_for(replicas, o.workers, [&](std::size_t r) {
        const auto rep = static_cast<std::uint32_t>(r);
        const EnvironmentStream env(n, grid, o.seed, rep);
        const std::size_t top = n;
        const std::pair<std::size_t, std::size_t> point{top, grid.m_count};
        a[r] = stationary_values_at(env, sample_boundary(theta, n, o.seed, rep), theta, n, {&point, 1}).front();
        b[r] = lambda == theta
                   ? a[r]
                   : stationary_values_at(env, sample_boundary(lambda, n, o.seed, rep), lambda, n, {&point, 1}).front();
    });
    const Estimate va = variance_estimate(a), vb = variance_estimate(b);
    const double bound = static_cast<double>(n) * std::abs(psi1(lambda) - psi1(theta));
    const double pooled = std::sqrt(va.se * va.se + vb.se * vb.se);
    IdentityVerdict v = verdict("variance_lipschitz", std::abs(vb.value - va.value),
                                bound + 5.0 * pooled, replicas);
    v.details = {{"theta", theta},     {"lambda", lambda},          {"n", static_cast<double>(n)},
                 {"t", t},             {"delta", grid.delta},       {"variance_theta", va.value},
                 {"variance_theta_se", va.se}, {"variance_lambda", vb.value},
                 {"variance_lambda_se", vb.se}, {"lipschitz_bound", bound}, {"pooled_se", pooled}};
    return v;
}

IdentityVerdict burke_distribution(double theta, std::size_t n, double t, std::size_t replicas,
                                   const RunOptions& o) {
    check_theta(theta, "burke_distribution");
    check_replicas(replicas, "burke_distribution");
    if (n < 1) throw DomainError("burke_distribution: n must be >= 1");
    const GridSpec grid = GridSpec::uniform(t, step(o, theta));
    std::vector<std::size_t> ks{1, (n + 1) / 2, n};
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
    std::vector<std::vector<double>> r(ks.size(), std::vector<double>(replicas));
    parallel_for(replicas, o.workers, [&](std::size_t i) {
        const auto rep = static_cast<std::uint32_t>(i);
        const EnvironmentStream env(n, grid, o.seed, rep);
        const auto col = stationary_final_column(env, sample_boundary(theta, n, o.seed, rep), theta, n);
        for (std::size_t j = 0; j < ks.size(); ++j) r[j][i] = col[ks[j]] - col[ks[j] - 1];
    });
    const Environment env0 = generate(n, grid, o.seed, 0);
    const double residual =
        burke_increments(stationary_forward(env0, sample_boundary(theta, n, o.seed, 0), theta, n))
            .telescoping_residual;

    IdentityVerdict v;
    v.name = "burke";
    v.n_replicas = replicas;
    v.p_floor = kPFloor;
    v.details = {{"theta", theta}, {"n", static_cast<double>(n)}, {"t", t}, {"delta", grid.delta},
                 {"telescoping_residual", residual}};
    double min_p = 1;
    for (std::size_t j = 0; j < ks.size(); ++j) {
        std::vector<double> g(replicas);
        for (std::size_t i = 0; i < replicas; ++i) g[i] = std::exp(-r[j][i]);
        const TestResult ks_result = ks_one_sample(g, [&](double x) { return gamma_cdf(theta, x); });
        min_p = std::min(min_p, ks_result.p_value);
        const std::string k = std::to_string(ks[j]);
        v.details.emplace_back("ks_p_k" + k, ks_result.p_value);
        v.details.emplace_back("mean_r_k" + k, sample_mean(r[j]));
        v.details.emplace_back("var_r_k" + k, sample_variance(r[j]));
    }
    const double rho_limit = 5.0 / std::sqrt(static_cast<double>(replicas));
    double max_rho = 0;
    for (std::size_t a = 0; a < ks.size(); ++a)
        for (std::size_t b = a + 1; b < ks.size(); ++b) {
            const double rho = correlation(r[a], r[b]);
            max_rho = std::max(max_rho, std::abs(rho));
            v.details.emplace_back("rho_k" + std::to_string(ks[a]) + "_k" + std::to_string(ks[b]), rho);
        }
    v.details.emplace_back("max_abs_rho", max_rho);
    v.details.emplace_back("rho_limit", rho_limit);
    v.details.emplace_back("target_mean_r", -psi0(theta));
    v.details.emplace_back("target_var_r", psi1(theta));
    v.p_value = min_p;
    v.statistic = min_p;
    v.threshold = kPFloor;
    v.passed = min_p > kPFloor && max_rho < rho_limit && residual < 1e-9;
    return v;
}

IdentityVerdict shift_invariance(double theta, std::size_t n, double t1, double t2,
                                 std::size_t replicas, std::size_t k, const RunOptions& o) {
    check_theta(theta, "shift_invariance");
    check_replicas(replicas, "shift_invariance");
    if (n < 2 || k < 1 || k >= n) throw DomainError("shift_invariance: need 1 <= k < n");
    const double c = std::min(t1, t2);
    const double delta = step(o, theta);

    // One sampled path per replica of the stationary model (levels, t).
    auto sample = [&](std::size_t levels, double t, std::uint64_t seed) {
        const GridSpec grid = GridSpec::uniform(t, delta);
        std::vector<PathSample> paths(replicas);
        parallel_for(replicas, o.workers, [&](std::size_t r) {
            const auto rep = static_cast<std::uint32_t>(r);
            const Environment env = generate(levels, grid, seed, rep);
            const DPTable table = stationary_forward(env, sample_boundary(theta, levels, seed, rep), theta, levels);
            CounterRng rng({seed, rep, substream::kPathSampler});
            paths[r] = sample_stationary_path(table, env, rng);
        });
        return paths;
    };
    const std::uint64_t s1 = derive_seed(o.seed, tag_of(t1));
    const std::uint64_t s2 = derive_seed(o.seed, tag_of(t2));
    const std::uint64_t s3 = derive_seed(o.seed, 0x5eedULL + n - k);
    const auto p1 = sample(n, t1, s1);
    const auto p2 = t1 == t2 ? p1 : sample(n, t2, s2);
    const auto p3 = sample(n - k, t1, s3);

    auto end_offset = [&](const std::vector<PathSample>& ps, double t) {
        std::vector<double> x;
        for (const auto& p : ps) x.push_back(p.resolved(n - 1) ? std::max(p.sigma[n - 1] - t, -c) : -c);
        return x;
    };
    auto plus = [](const std::vector<PathSample>& ps, std::size_t level) {
        std::vector<double> x;
        for (const auto& p : ps) x.push_back(p.resolved(level) ? p.sigma[level] : 0.0);
        return x;
    };
    const TestResult time_shift = ks_two_sample(end_offset(p1, t1), end_offset(p2, t2));
    const TestResult level_shift = ks_two_sample(plus(p1, k), plus(p3, 0));

    IdentityVerdict v;
    v.name = "shift";
    v.n_replicas = replicas;
    v.p_floor = kPFloor;
    v.p_value = std::min(time_shift.p_value, level_shift.p_value);
    v.statistic = v.p_value;
    v.threshold = kPFloor;
    v.passed = v.p_value > kPFloor;
    v.details = {{"theta", theta},
                 {"n", static_cast<double>(n)},
                 {"t1", t1},
                 {"t2", t2},
                 {"k", static_cast<double>(k)},
                 {"delta", delta},
                 {"time_shift_ks_d", time_shift.statistic},
                 {"time_shift_p", time_shift.p_value},
                 {"level_shift_ks_d", level_shift.statistic},
                 {"level_shift_p", level_shift.p_value}};
    return v;
}

IdentityVerdict dufresne_check(double nu, std::size_t replicas, double horizon, const RunOptions& o) {
    if (!(nu > 0)) throw DomainError("dufresne_check: nu must be > 0");
    check_replicas(replicas, "dufresne_check");
    if (!(std::exp(-nu * horizon) < 1e-6))
        throw BudgetError("dufresne_check: horizon too short, exp(-nu H) must be < 1e-6");
    const double delta = o.delta > 0 ? o.delta : 1e-3;
    const GridSpec grid = GridSpec::uniform(horizon, delta);
    const std::size_t cells = grid.m_count;
    const double sd = std::sqrt(grid.delta);
    const double root2 = std::sqrt(2.0);
    const auto inv = replicate(replicas, o.workers, [&](std::uint32_t r) {
        // W on s = -m delta, m = 0..cells, built backward from W(0) = 0.
        std::vector<double> z(cells);
        GaussianStream(StreamId{o.seed, r, substream::kAuxiliary}).fill(z);
        std::vector<double> lg(cells + 1);
        double w = 0;
        lg[0] = 0;
        for (std::size_t m = 1; m <= cells; ++m) {
            w += sd * z[m - 1];
            lg[m] = root2 * w - nu * grid.time(m);
        }
        const double top = *std::max_element(lg.begin(), lg.end());
        double s = 0;
        for (std::size_t m = 0; m < cells; ++m)
            s += 0.5 * grid.width(m) * (std::exp(lg[m] - top) + std::exp(lg[m + 1] - top));
        return std::exp(-top) / s;
    });
    const TestResult ks = ks_one_sample(inv, [&](double x) { return gamma_cdf(nu, x); });
    IdentityVerdict v;
    v.name = "dufresne";
    v.n_replicas = replicas;
    v.p_floor = kPFloor;
    v.p_value = ks.p_value;
    v.statistic = ks.p_value;
    v.threshold = kPFloor;
    v.passed = ks.p_value > kPFloor;
    v.details = {{"nu", nu}, {"horizon", horizon}, {"delta", grid.delta}, {"ks_d", ks.statistic},
                 {"mean_reciprocal", sample_mean(inv)}};
    if (nu > 1) {
        // The integral itself is 1 / Gamma(nu), with mean 1 / (nu - 1).
        std::vector<double> integral(inv.size());
        for (std::size_t i = 0; i < inv.size(); ++i) integral[i] = 1.0 / inv[i];
        v.details.emplace_back("mean_integral", sample_mean(integral));
        v.details.emplace_back("target_mean_integral", 1.0 / (nu - 1));
    }
    return v;
}

IdentityVerdict scaling_consistency(TableKind kind, std::size_t n, double t, double beta,
                                    std::size_t replicas, double theta, const RunOptions& o) {
    if (!(beta > 0)) throw DomainError("scaling_consistency: beta must be > 0");
    check_replicas(replicas, "scaling_consistency");
    const bool stationary = kind == TableKind::stationary;
    if (stationary) check_theta(theta, "scaling_consistency");
    const ScalingMap map = stationary ? stationary_scaling_map(n, t, theta, beta) : scaling_map(n, t, beta);
    const double image_delta = o.delta > 0 ? o.delta : (stationary ? auto_delta(map.theta) : 0.02);
    const GridSpec image_grid = GridSpec::uniform(map.t, image_delta);
    const GridSpec direct_grid = GridSpec::uniform(t, image_delta / (beta * beta));
    const std::uint64_t direct_seed = derive_seed(o.seed, 1);
    const std::uint64_t image_seed = beta == 1 ? direct_seed : derive_seed(o.seed, 2);

    auto simulate = [&](const GridSpec& grid, std::uint64_t seed, double b, double th, double offset) {
        return replicate(replicas, o.workers, [&](std::uint32_t r) {
            const EnvironmentStream env(n, grid, seed, r);
            if (!stationary) return offset + ptp_final(env, n, b);
            // Burke weights of the beta model carry parameter theta / beta.
            return offset + stationary_final(env, sample_boundary(th / b, n, seed, r), th, n, b);
        });
    };
    const auto direct = simulate(direct_grid, direct_seed, beta, theta, 0.0);
    const auto image = beta == 1 ? direct : simulate(image_grid, image_seed, 1.0, map.theta, map.log_offset);

    const Estimate md = mean_estimate(direct), mi = mean_estimate(image);
    const Estimate vd = variance_estimate(direct), vi = variance_estimate(image);
    auto z = [](const Estimate& a, const Estimate& b) {
        const double se = std::sqrt(a.se * a.se + b.se * b.se);
        return se > 0 ? std::abs(a.value - b.value) / se : (a.value == b.value ? 0.0 : INFINITY);
    };
    const double z_mean = z(md, mi), z_var = z(vd, vi);
    IdentityVerdict v = verdict(stationary ? "scaling_stationary" : "scaling_ptp", std::max(z_mean, z_var), 4.0,
                                replicas);
    v.details = {{"n", static_cast<double>(n)},
                 {"t", t},
                 {"beta", beta},
                 {"theta", stationary ? theta : NAN},
                 {"image_t", map.t},
                 {"image_theta", stationary ? map.theta : NAN},
                 {"log_offset", map.log_offset},
                 {"image_delta", image_grid.delta},
                 {"direct_delta", direct_grid.delta},
                 {"mean_direct", md.value},
                 {"mean_direct_se", md.se},
                 {"mean_image", mi.value},
                 {"mean_image_se", mi.se},
                 {"var_direct", vd.value},
                 {"var_direct_se", vd.se},
                 {"var_image", vi.value},
                 {"var_image_se", vi.se},
                 {"z_mean", z_mean},
                 {"z_var", z_var}};
    return v;
}

// ---------------------------------------------------------------------------

std::vector<std::string> identity_names() {
    return {"mean",        "variance",    "variance_offchar", "lipschitz",   "lipschitz_far",
            "burke",       "shift",       "dufresne_1",       "dufresne_05", "scaling_ptp",
            "scaling_stationary"};
}

IdentityVerdict run_identity(const std::string& name, const RunOptions& o, double replica_scale) {
    if (!(replica_scale > 0)) throw DomainError("replica scale must be > 0");
    auto R = [&](std::size_t base) {
        return std::max<std::size_t>(4, static_cast<std::size_t>(std::llround(static_cast<double>(base) * replica_scale)));
    };
    const double char16 = 16.0 * psi1(1.0);
    IdentityVerdict v;
    if (name == "mean") {
        v = mean_identity(1.0, 16, char16, R(2000), o);
    } else if (name == "variance") {
        v = variance_identity(1.0, 16, char16, R(2000), o);
    } else if (name == "variance_offchar") {
        v = variance_identity(1.0, 16, char16 + 1.0, R(2000), o);
    } else if (name == "lipschitz") {
        v = variance_lipschitz(1.0, 1.2, 16, char16, R(1000), o);
    } else if (name == "lipschitz_far") {
        v = variance_lipschitz(1.0, 0.5, 8, 8.0 * psi1(1.0), R(1000), o);
    } else if (name == "burke") {
        v = burke_distribution(1.5, 10, 10.0 * psi1(1.5), R(1000), o);
    } else if (name == "shift") {
        const double t1 = 8.0 * psi1(1.0);
        v = shift_invariance(1.0, 8, t1, t1 + 2.0, R(1000), 3, o);
    } else if (name == "dufresne_1") {
        v = dufresne_check(1.0, R(2000), 20.0, o);
    } else if (name == "dufresne_05") {
        v = dufresne_check(0.5, R(2000), 40.0, o);
    } else if (name == "scaling_ptp") {
        v = scaling_consistency(TableKind::point_to_point, 8, 32.0, 0.5, R(500), 1.0, o);
    } else if (name == "scaling_stationary") {
        // theta / beta = 1 in the image, at its characteristic horizon.
        const double beta = 0.5;
        v = scaling_consistency(TableKind::stationary, 8, 8.0 * psi1(1.0) / (beta * beta), beta, R(500),
                                beta * 1.0, o);
    } else {
        throw DomainError("unknown identity '" + name + "'");
    }
    v.name = name;
    return v;
}

}  // namespace dpbe
