#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "doctest.h"
#include "dpbe/errors.hpp"
#include "dpbe/experiments.hpp"
#include "dpbe/partition.hpp"
#include "dpbe/stats.hpp"

using namespace dpbe;

namespace {

ExperimentConfig small(ExperimentKind kind, std::size_t replicas = 60) {
    ExperimentConfig c;
    c.experiment = kind;
    c.n_list = {4, 8, 16, 32};
    c.replicas = replicas;
    c.seed = 17;
    if (kind == ExperimentKind::ptp) c.model = TableKind::point_to_point;
    if (kind == ExperimentKind::kpz) {
        c.n_list = {16};
        c.tau_list = {1, 2, 4, 8};
    }
    return c;
}

std::string csv(const ExperimentReport& r) {
    std::ostringstream os;
    write_rows_csv(r, os);
    return os.str();
}

}  // namespace

TEST_SUITE("experiments") {

TEST_CASE("kind names") {
    CHECK(parse_experiment_kind("var") == ExperimentKind::variance);
    CHECK(parse_experiment_kind("variance") == ExperimentKind::variance);
    CHECK(parse_experiment_kind("kpz") == ExperimentKind::kpz);
    CHECK(to_string(ExperimentKind::path) == "path");
    CHECK_THROWS_AS(parse_experiment_kind("bogus"), DomainError);
}

TEST_CASE("configuration validation") {
    auto bad = [](auto edit) {
        ExperimentConfig c = small(ExperimentKind::variance);
        edit(c);
        CHECK_THROWS_AS(plan_experiment(c), DomainError);
    };
    bad([](ExperimentConfig& c) { c.alpha = 0.3; });
    bad([](ExperimentConfig& c) { c.alpha = -0.1; });
    bad([](ExperimentConfig& c) { c.beta0 = 0; });
    bad([](ExperimentConfig& c) { c.n_list = {8, 16, 32}; });
    bad([](ExperimentConfig& c) { c.n_list = {8, 16, 32, 48}; });
    bad([](ExperimentConfig& c) { c.n_list = {8, 32, 16, 64}; });
    bad([](ExperimentConfig& c) { c.tau_list = {1, 2}; });
    bad([](ExperimentConfig& c) { c.tau_list = {1, 2, 2, 8}; });
    bad([](ExperimentConfig& c) { c.bootstrap = 100; });
    bad([](ExperimentConfig& c) { c.phi = "const:0.3"; });
    bad([](ExperimentConfig& c) { c.replicas = 1; });
    bad([](ExperimentConfig& c) {
        c.experiment = ExperimentKind::ptp;
        c.alpha = 0.25;
    });
    bad([](ExperimentConfig& c) {
        c.experiment = ExperimentKind::path;
        c.gamma = 1.0;
    });
    bad([](ExperimentConfig& c) {
        c.experiment = ExperimentKind::path;
        c.gamma = 0.1;  // gamma n < 1 at n = 4
    });
    bad([](ExperimentConfig& c) {
        c.experiment = ExperimentKind::kpz;
        c.n_list = {16};
        c.tau_list = {1, 2, 4};
    });
    bad([](ExperimentConfig& c) {
        c.experiment = ExperimentKind::kpz;
        c.n_list = {16};
        c.tau_list = {1, 2, 4, 8};
        c.phi = "linear:1";
    });
    CHECK_THROWS_AS(parse_phi("sin"), DomainError);
    CHECK(parse_phi("sin:2").bound == 2);
    CHECK(parse_phi("const:-0.5").f(3.0) == -0.5);
    CHECK_FALSE(parse_phi("none").f);

    ExperimentConfig c = small(ExperimentKind::variance);
    c.n_list = {64, 128, 256, 512};
    c.replicas = 1000;
    c.budget_core_hours = 0.001;
    CHECK_THROWS_AS(plan_experiment(c), BudgetError);
    c.replicas = 0;
    c.budget_core_hours = 1e-9;
    CHECK_THROWS_AS(plan_experiment(c), BudgetError);
}

TEST_CASE("planning") {
    ExperimentConfig c = small(ExperimentKind::variance);
    c.tau_list = {1, 2, 4, 8};
    const ExperimentPlan p = plan_experiment(c);
    CHECK(p.points.size() == 7);
    CHECK(p.groups.size() == 4);
    const TaskGroup& nested = p.groups[p.points.back().group];
    CHECK(nested.nested);
    CHECK(nested.points.size() == 4);
    CHECK(nested.levels == 256);
    for (std::size_t i : nested.points) {
        const ExperimentPoint& pt = p.points[i];
        CHECK(nested.grid.time(pt.node) == doctest::Approx(pt.params.t).epsilon(1e-12));
    }
    CHECK(p.tasks() == 4 * c.replicas);
    CHECK(task_index(p, 2, 5) == 2 * c.replicas + 5);

    c.replicas = 0;
    c.budget_core_hours = 0.01;
    const ExperimentPlan q = plan_experiment(c);
    CHECK(q.replicas >= 2);
    CHECK(q.estimated_core_hours <= 0.01);

    ExperimentConfig w = small(ExperimentKind::variance);
    w.tau_list = {0.5};
    CHECK_FALSE(plan_experiment(w).warnings.empty());

    ExperimentConfig k = small(ExperimentKind::kpz);
    k.alpha = 0;
    k.beta0 = 3;
    const ExperimentPlan kp = plan_experiment(k);
    CHECK(kp.config.alpha == 0.25);
    CHECK(kp.config.beta0 == 1);
    CHECK(canonical(c) == canonical(c));
    ExperimentConfig c2 = c;
    c2.seed = 18;
    CHECK(canonical(c) != canonical(c2));
}

TEST_CASE("fit targets") {
    struct Case {
        ExperimentKind kind;
        double alpha;
        double n_target, tau_target;
    };
    const Case cases[] = {{ExperimentKind::variance, 0, 2.0 / 3, 2.0 / 3},
                          {ExperimentKind::variance, 0.25, 0, 2.0 / 3},
                          {ExperimentKind::ptp, 0, 1.0 / 3, 1.0 / 3},
                          {ExperimentKind::ptp, 0.15, (1 - 0.6) / 3, 1.0 / 3},
                          {ExperimentKind::path, 0, 2.0 / 3, 2.0 / 3},
                          {ExperimentKind::path, 0.25, 0.5, 2.0 / 3}};
    for (const Case& cs : cases) {
        ExperimentConfig c = small(cs.kind, 4);
        c.alpha = cs.alpha;
        c.tau_list = {1, 2, 4, 8};
        c.n_list = {4, 8, 16, 32};
        c.crosscheck_cells = 0;
        const ExperimentReport r = run_experiment(c, 1);
        CAPTURE(to_string(cs.kind));
        CAPTURE(cs.alpha);
        CHECK(r.fit("n_slope").target == doctest::Approx(cs.n_target).epsilon(1e-12));
        CHECK(r.fit("tau_slope").target == doctest::Approx(cs.tau_target).epsilon(1e-12));
        CHECK_FALSE(r.fit("n_slope").target_source.empty());
        CHECK(r.fit("n_slope").fit.resamples >= 200);
        CHECK(r.fit("n_slope").x.size() == 4);
    }
}

TEST_CASE("worker count does not change results") {
    for (ExperimentKind kind : {ExperimentKind::variance, ExperimentKind::ptp, ExperimentKind::path, ExperimentKind::kpz}) {
        const ExperimentConfig c = small(kind, 12);
        const ExperimentReport a = run_experiment(c, 1), b = run_experiment(c, 3), d = run_experiment(c, 1);
        CHECK(csv(a) == csv(b));
        CHECK(csv(a) == csv(d));
        CHECK(summary_json(a) == summary_json(b));
    }
}

TEST_CASE("doubling replicas shrinks standard errors by root two") {
    for (ExperimentKind kind : {ExperimentKind::variance, ExperimentKind::ptp, ExperimentKind::path}) {
        ExperimentConfig c = small(kind, 1000);
        c.crosscheck_cells = 0;
        const ExperimentReport a = run_experiment(c, 1);
        c.replicas = 2000;
        const ExperimentReport b = run_experiment(c, 1);
        REQUIRE(a.rows.size() == b.rows.size());
        for (std::size_t i = 0; i < a.rows.size(); ++i) {
            // Moment statistics only: tail frequencies and the unresolved mass
            // are averages of rare, heavily skewed per-replica values.
            const std::string& stat = a.rows[i].statistic;
            if (stat.rfind("tail_", 0) == 0 || stat == "mean_unresolved") continue;
            const double ratio = b.rows[i].se / a.rows[i].se;
            CAPTURE(a.rows[i].statistic);
            CAPTURE(a.rows[i].n);
            CHECK(ratio >= 1 / std::sqrt(2.0) - 0.1);
            CHECK(ratio <= 1 / std::sqrt(2.0) + 0.1);
        }
    }
}

TEST_CASE("scaled harness equals a direct unit-temperature simulation") {
    ExperimentConfig c = small(ExperimentKind::variance, 20);
    const ExperimentPlan plan = plan_experiment(c);
    std::vector<TaskRecord> recs;
    for (std::size_t t = 0; t < plan.tasks(); ++t) recs.push_back(run_task(plan, t));
    const ExperimentReport rep = aggregate(plan, recs);
    for (std::size_t i = 0; i < c.n_list.size(); ++i) {
        const std::size_t n = c.n_list[i];
        const double theta = psi1_inv(1.0);
        const double t = static_cast<double>(n);
        const GridSpec grid = GridSpec::uniform(t, experiment_delta(c, theta));
        const std::uint64_t seed = group_seed(c.seed, n, 1.0);
        std::vector<double> direct;
        for (std::uint32_t r = 0; r < c.replicas; ++r) {
            const EnvironmentStream env(n, grid, seed, r);
            const BoundaryWeights bw = sample_boundary(theta, n, seed, r);
            direct.push_back(stationary_final(env, bw, theta, n));
            CHECK(recs[task_index(plan, i, r)].values[0][0] == direct.back());
        }
        CHECK(rep.row(n, 1.0, "var_logZ").value == variance_estimate(direct).value);
        CHECK(rep.row(n, 1.0, "mean_logZ").value == mean_estimate(direct).value);
    }
}

TEST_CASE("variance cross-check and report rows") {
    ExperimentConfig c = small(ExperimentKind::variance, 300);
    const ExperimentReport r = run_experiment(c, 1);
    for (std::size_t n : c.n_list) {
        const CheckRecord& k = r.check("var_identity_n" + std::to_string(n) + "_tau1");
        CHECK(k.passed);
        CHECK(r.row(n, 1.0, "var_logZ").replicas == 300);
        CHECK(r.row(n, 1.0, "var_logZ").delta > 0);
    }
    CHECK_THROWS_AS(r.row(5, 1.0, "var_logZ"), IndexError);
    const std::string s = csv(r);
    CHECK(s.rfind("kind,alpha,beta0,tau,n,replicas,delta,statistic,value,se\n", 0) == 0);
    const auto j = nlohmann::json::parse(summary_json(r));
    CHECK(j["experiment"] == "var");
    CHECK(j["fits"].size() == 1);
    CHECK(j["fits"][0]["bootstrap_resamples"].get<int>() >= 200);
    CHECK(j["fits"][0]["target"].get<double>() == doctest::Approx(2.0 / 3));
}

TEST_CASE("kpz profiles") {
    ExperimentConfig c = small(ExperimentKind::kpz, 8);
    c.phi = "const:0.3";
    const ExperimentReport r = run_experiment(c, 1);
    for (double tau : c.tau_list) {
        CHECK(r.row(16, tau, "mean_shift").value == doctest::Approx(0.3).epsilon(1e-9));
        CHECK(r.check("constant_shift_tau" + std::to_string(static_cast<int>(tau))).passed);
    }
    c.phi = "sin:1";
    const ExperimentReport s = run_experiment(c, 1);
    for (double tau : c.tau_list) {
        CHECK(s.row(16, tau, "max_abs_shift").value <= 1.0);
        CHECK(s.check("phi_sandwich_tau" + std::to_string(static_cast<int>(tau))).passed);
    }
}

TEST_CASE("task records round trip through JSON lines") {
    for (ExperimentKind kind : {ExperimentKind::variance, ExperimentKind::path}) {
        const ExperimentPlan plan = plan_experiment(small(kind, 3));
        for (std::size_t t = 0; t < plan.tasks(); ++t) {
            const TaskRecord rec = run_task(plan, t);
            const std::string line = to_json_line(plan, rec);
            const TaskRecord back = task_from_json_line(plan, line);
            CHECK(back.group == rec.group);
            CHECK(back.replica == rec.replica);
            REQUIRE(back.values.size() == rec.values.size());
            for (std::size_t i = 0; i < rec.values.size(); ++i)
                for (std::size_t v = 0; v < rec.values[i].size(); ++v)
                    CHECK((back.values[i][v] == rec.values[i][v] ||
                           (std::isnan(back.values[i][v]) && std::isnan(rec.values[i][v]))));
        }
        CHECK_THROWS(task_from_json_line(plan, "{\"task\": 0"));
    }
}

TEST_CASE("aggregation does not depend on record order") {
    const ExperimentPlan plan = plan_experiment(small(ExperimentKind::ptp, 10));
    std::vector<TaskRecord> recs;
    for (std::size_t t = 0; t < plan.tasks(); ++t) recs.push_back(run_task(plan, t));
    const std::string a = csv(aggregate(plan, recs));
    std::reverse(recs.begin(), recs.end());
    CHECK(csv(aggregate(plan, recs)) == a);
}

}  // TEST_SUITE
