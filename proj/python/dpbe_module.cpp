#include <sstream>
#include <string>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dpbe/cli.hpp"
#include "dpbe/environment.hpp"
#include "dpbe/errors.hpp"
#include "dpbe/experiments.hpp"
#include "dpbe/identities.hpp"
#include "dpbe/parallel.hpp"
#include "dpbe/partition.hpp"
#include "dpbe/specialfn.hpp"

namespace py = pybind11;
using namespace dpbe;

namespace {

std::vector<double> replica_values(std::size_t replicas, std::size_t workers,
                                   const std::function<double(std::uint32_t)>& f) {
    std::vector<double> out(replicas);
    py::gil_scoped_release release;
    parallel_for(replicas, workers, [&](std::size_t r) { out[r] = f(static_cast<std::uint32_t>(r)); });
    return out;
}

py::dict verdict_dict(const IdentityVerdict& v) {
    py::dict d;
    d["name"] = v.name;
    d["statistic"] = v.statistic;
    d["threshold"] = v.threshold;
    d["p_value"] = v.p_value;
    d["p_floor"] = v.p_floor;
    d["n_replicas"] = v.n_replicas;
    d["passed"] = v.passed;
    py::dict details;
    for (const auto& [k, x] : v.details) details[py::str(k)] = x;
    d["details"] = details;
    return d;
}

template <class T>
void take(const py::dict& options, const char* key, T& target) {
    if (options.contains(key)) target = options[key].cast<T>();
}

}  // namespace

PYBIND11_MODULE(_dpbe, m) {
    m.doc() = "Bindings of the dpbe library";
    m.attr("__version__") = DPBE_VERSION;

    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<BudgetError>(m, "BudgetError", PyExc_RuntimeError);
    py::register_exception<ConvergenceError>(m, "ConvergenceError", PyExc_ArithmeticError);

    m.def("psi0", &psi0, py::arg("x"), "Digamma");
    m.def("psi1", &psi1, py::arg("x"), "Trigamma");
    m.def("psi2", &psi2, py::arg("x"), "Tetragamma");
    m.def("psi1_inv", &psi1_inv, py::arg("y"), "Inverse trigamma on (0, inf)");
    m.def("free_energy_density", &free_energy_density, py::arg("beta"));
    m.def(
        "characteristic_params",
        [](double alpha, double beta0, double tau, std::size_t n) {
            const ScaledParams p = characteristic_params(alpha, beta0, tau, n);
            py::dict d;
            d["n_levels"] = p.n_levels;
            d["t"] = p.t;
            d["theta"] = p.theta;
            d["beta"] = p.beta;
            d["log_offset"] = p.log_offset;
            d["stationary_log_offset"] = p.stationary_log_offset;
            return d;
        },
        py::arg("alpha"), py::arg("beta0"), py::arg("tau"), py::arg("n"));

    m.def(
        "ptp_logz",
        [](std::size_t n, double t, std::size_t replicas, std::uint64_t seed, double delta, double beta,
           std::size_t workers) {
            const GridSpec grid = GridSpec::uniform(t, delta);
            return replica_values(replicas, workers, [&](std::uint32_t r) {
                return ptp_final(EnvironmentStream(n, grid, seed, r), n, beta);
            });
        },
        py::arg("n"), py::arg("t"), py::arg("replicas") = 1, py::arg("seed") = 1, py::arg("delta") = 0.02,
        py::arg("beta") = 1.0, py::arg("workers") = 1,
        "log Z of the point-to-point polymer for replicas 0..replicas-1");
    m.def(
        "stationary_logz",
        [](std::size_t n, double t, double theta, std::size_t replicas, std::uint64_t seed, double delta,
           std::size_t workers) {
            const GridSpec grid = GridSpec::uniform(t, delta > 0 ? delta : auto_delta(theta));
            return replica_values(replicas, workers, [&](std::uint32_t r) {
                return stationary_final(EnvironmentStream(n, grid, seed, r), sample_boundary(theta, n, seed, r),
                                        theta, n);
            });
        },
        py::arg("n"), py::arg("t"), py::arg("theta"), py::arg("replicas") = 1, py::arg("seed") = 1,
        py::arg("delta") = 0.0, py::arg("workers") = 1,
        "log Z of the stationary polymer for replicas 0..replicas-1 (delta 0: automatic)");

    m.def("identity_names", &identity_names);
    m.def(
        "run_identity",
        [](const std::string& name, std::uint64_t seed, std::size_t workers, double delta, double scale) {
            IdentityVerdict v;
            {
                py::gil_scoped_release release;
                v = run_identity(name, RunOptions{seed, workers, delta}, scale);
            }
            return verdict_dict(v);
        },
        py::arg("name"), py::arg("seed") = 1, py::arg("workers") = 1, py::arg("delta") = 0.0,
        py::arg("scale") = 1.0);

    m.def("run_experiment", [](const std::string& experiment, const std::vector<std::size_t>& n_list,
                               const py::dict& options) {
        ExperimentConfig c;
        c.experiment = parse_experiment_kind(experiment);
        c.n_list = n_list;
        take(options, "alpha", c.alpha);
        take(options, "beta0", c.beta0);
        take(options, "tau_list", c.tau_list);
        take(options, "gamma", c.gamma);
        take(options, "replicas", c.replicas);
        take(options, "seed", c.seed);
        take(options, "delta", c.delta);
        take(options, "delta_scale", c.delta_scale);
        take(options, "budget_core_hours", c.budget_core_hours);
        take(options, "phi", c.phi);
        take(options, "tail_b", c.tail_b);
        take(options, "bootstrap", c.bootstrap);
        if (options.contains("model")) {
            const auto model = options["model"].cast<std::string>();
            if (model == "stationary") c.model = TableKind::stationary;
            else if (model == "ptp") c.model = TableKind::point_to_point;
            else throw DomainError("model: expected stationary or ptp");
        }
        std::size_t workers = 1;
        take(options, "workers", workers);
        ExperimentReport r;
        {
            py::gil_scoped_release release;
            r = run_experiment(c, workers);
        }
        py::list rows;
        for (const ReportRow& row : r.rows) {
            py::dict d;
            d["kind"] = row.kind;
            d["alpha"] = row.alpha;
            d["beta0"] = row.beta0;
            d["tau"] = row.tau;
            d["n"] = row.n;
            d["replicas"] = row.replicas;
            d["delta"] = row.delta;
            d["statistic"] = row.statistic;
            d["value"] = row.value;
            d["se"] = row.se;
            rows.append(d);
        }
        return py::make_tuple(summary_json(r), rows);
    });

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            int code;
            {
                py::gil_scoped_release release;
                code = run_cli(args, out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs the command line; returns (exit code, stdout, stderr)");
    m.def("config_hash", &config_hash, py::arg("text"));
}
