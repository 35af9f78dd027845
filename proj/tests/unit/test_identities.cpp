#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "doctest.h"
#include "dpbe/errors.hpp"
#include "dpbe/identities.hpp"
#include "dpbe/specialfn.hpp"

using namespace dpbe;

TEST_SUITE("identities") {

TEST_CASE("step policy") {
    CHECK(auto_delta(1.0) == 0.02);
    CHECK(auto_delta(4.0) == doctest::Approx(0.1 / 16));
}

TEST_CASE("base cases") {
    const RunOptions o{3, 1, 0.01};
    const IdentityVerdict m = mean_identity(1.0, 0, 2.0, 50, o);
    CHECK(m.passed);
    CHECK(m.detail("target") == 2.0);
    CHECK(m.detail("mean_fine") == doctest::Approx(2.0).epsilon(0.5));
    const IdentityVerdict v = variance_identity(1.0, 0, 2.0, 2000, o);
    CHECK(v.passed);
    CHECK_THROWS_AS(mean_identity(0.0, 4, 1.0, 10, o), DomainError);
    CHECK_THROWS_AS(variance_identity(-1.0, 4, 1.0, 10, o), DomainError);
}

TEST_CASE("coupled and identical configurations are exact") {
    const RunOptions o{5, 2, 0.02};
    const IdentityVerdict l = variance_lipschitz(1.0, 1.0, 6, 6 * psi1(1.0), 40, o);
    CHECK(l.statistic == 0.0);
    CHECK(l.passed);
    const IdentityVerdict s = shift_invariance(1.0, 6, 5.0, 5.0, 40, 2, o);
    CHECK(s.detail("time_shift_ks_d") == 0.0);
    const IdentityVerdict p = scaling_consistency(TableKind::point_to_point, 4, 4.0, 1.0, 40, 1.0, o);
    CHECK(p.statistic == 0.0);
    CHECK(p.passed);
    const IdentityVerdict q = scaling_consistency(TableKind::stationary, 4, 4.0, 1.0, 40, 1.0, o);
    CHECK(q.statistic == 0.0);
}

TEST_CASE("verdicts are reproducible and independent of workers") {
    const RunOptions a{11, 1, 0}, b{11, 3, 0};
    for (const std::string name : {"burke", "mean", "shift"}) {
        const IdentityVerdict x = run_identity(name, a, 0.05);
        const IdentityVerdict y = run_identity(name, b, 0.05);
        CHECK(to_json_line(x) == to_json_line(y));
    }
}

TEST_CASE("verdict consistency and JSON form") {
    const RunOptions o{2, 1, 0};
    for (const std::string& name : identity_names()) {
        const IdentityVerdict v = run_identity(name, o, 0.1);
        CAPTURE(name);
        CHECK(v.name == name);
        CHECK(v.n_replicas >= 4);
        // passed is recomputable from the statistic, or implies the p-value floor.
        if (std::isnan(v.p_value))
            CHECK(v.passed == (v.statistic <= v.threshold));
        else if (v.passed)
            CHECK(v.p_value > v.p_floor);
        const auto j = nlohmann::json::parse(to_json_line(v));
        CHECK(j["name"] == name);
        CHECK(j["passed"] == v.passed);
        CHECK(j["details"].is_object());
    }
}

TEST_CASE("reduced suite passes") {
    const RunOptions o{7, 1, 0};
    for (const std::string name : {"mean", "variance", "variance_offchar", "lipschitz", "burke", "dufresne_1",
                                   "dufresne_05", "scaling_ptp"}) {
        CAPTURE(name);
        CHECK(run_identity(name, o, 0.25).passed);
    }
}

TEST_CASE("errors") {
    const RunOptions o{1, 1, 0};
    CHECK_THROWS_AS(run_identity("nope", o), DomainError);
    CHECK_THROWS_AS(run_identity("mean", o, 0.0), DomainError);
    CHECK_THROWS_AS(dufresne_check(1.0, 100, 5.0, o), BudgetError);
    CHECK_THROWS_AS(dufresne_check(0.0, 100, 50.0, o), DomainError);
    CHECK_THROWS_AS(burke_distribution(1.0, 0, 1.0, 100, o), DomainError);
    CHECK_THROWS_AS(shift_invariance(1.0, 4, 1.0, 2.0, 100, 4, o), DomainError);
    CHECK_THROWS_AS(scaling_consistency(TableKind::point_to_point, 4, 1.0, 0.0, 100, 1.0, o), DomainError);
    CHECK(identity_names().size() == 11);
}

}  // TEST_SUITE
