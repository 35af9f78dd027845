#include "dpbe/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "dpbe/environment.hpp"
#include "dpbe/errors.hpp"
#include "dpbe/experiments.hpp"
#include "dpbe/identities.hpp"
#include "dpbe/parallel.hpp"
#include "dpbe/partition.hpp"
#include "dpbe/specialfn.hpp"
#include "dpbe/stats.hpp"

#ifndef DPBE_VERSION
#define DPBE_VERSION "unknown"
#endif

namespace dpbe {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

/// Invalid flags or values (exit 2).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Manifest conflicts and unusable output directories (exit 3).
struct ManifestError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr const char* kDefaultOutputDir = "dpbe-out";
constexpr double kSimulateSecondsPerCell = 8e-9;

std::string timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

/// Writes `content` to `path` through a temporary file and a rename, so a
/// reader never sees a partial file.
void write_atomic(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw ManifestError("cannot write " + tmp.string());
        f << content;
        if (!f) throw ManifestError("cannot write " + tmp.string());
    }
    fs::rename(tmp, path);
}

fs::path resolve_output_dir(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
    return kDefaultOutputDir;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw ManifestError("cannot create output directory " + dir.string());
}

/// Reads a flat key=value file and appends "--key value" for every key the
/// command line does not set. Keys are long option names without dashes.
void apply_config_file(CLI::App& sub, std::vector<std::string>& args) {
    std::optional<std::string> file;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) file = args[i + 1];
        if (args[i].rfind("--config=", 0) == 0) file = args[i].substr(9);
    }
    if (!file) return;
    std::ifstream in(*file);
    if (!in) throw ConfigError("--config: cannot read '" + *file + "'");
    auto given = [&](const std::string& key) {
        for (const auto& a : args)
            if (a == "--" + key || a.rfind("--" + key + "=", 0) == 0) return true;
        return false;
    };
    std::vector<std::string> extra;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--config: line " + std::to_string(number) + " is not key=value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "config") throw ConfigError("--config: nested config files are not supported");
        const CLI::Option* opt = sub.get_option_no_throw("--" + key);
        if (!opt) throw ConfigError("--config: unknown key '" + key + "' on line " + std::to_string(number));
        if (given(key)) continue;
        if (opt->get_expected_min() == 0) {
            if (value == "true" || value == "1") extra.push_back("--" + key);
            else if (value != "false" && value != "0")
                throw ConfigError("--config: key '" + key + "' takes true or false");
        } else {
            extra.push_back("--" + key);
            extra.push_back(value);
        }
    }
    args.insert(args.end(), extra.begin(), extra.end());
}

json manifest_json(const std::string& command, const std::string& canonical_config, std::uint64_t seed,
                   const std::string& started, const std::string& finished, std::size_t tasks,
                   std::size_t completed) {
    json m;
    m["command"] = command;
    m["version"] = DPBE_VERSION;
    m["config_hash"] = config_hash(canonical_config);
    json cfg;
    std::istringstream lines(canonical_config);
    std::string line;
    while (std::getline(lines, line)) {
        const auto eq = line.find('=');
        if (eq != std::string::npos) cfg[line.substr(0, eq)] = line.substr(eq + 1);
    }
    m["config"] = cfg;
    m["master_seed"] = seed;
    m["started"] = started;
    m["finished"] = finished.empty() ? json(nullptr) : json(finished);
    m["tasks"] = tasks;
    m["completed"] = completed;
    json ranges = json::array();
    if (completed > 0) ranges.push_back({0, completed});
    m["completed_ranges"] = ranges;
    m["status"] = completed == tasks && !finished.empty() ? "complete" : "running";
    return m;
}

json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

std::string short_number(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", x);
    return buf;
}

// --- simulate ---------------------------------------------------------------

struct SimulateFlags {
    std::string kind;
    std::size_t n = 0;
    std::optional<double> t, alpha, beta0, tau, theta, delta;
    bool auto_delta = false, auto_char_t = false, zero_env = false;
    std::size_t replicas = 1;
    std::uint64_t seed = 1;
    std::string out;
    std::size_t workers = 1;
    std::string phi = "none";
    double budget = 1.0;
};

int cmd_simulate(const SimulateFlags& f, std::ostream& out) {
    if (f.kind != "ptp" && f.kind != "stationary" && f.kind != "kpz")
        throw ConfigError("--kind: expected ptp, stationary or kpz, got '" + f.kind + "'");
    if (f.n < 1) throw ConfigError("--n: must be at least 1");
    if (f.replicas < 1) throw ConfigError("--replicas: must be at least 1");
    if (f.delta && f.auto_delta) throw ConfigError("--delta and --auto-delta are exclusive");
    if (f.delta && !(*f.delta > 0)) throw ConfigError("--delta: must be positive");
    if (f.alpha && !(*f.alpha >= 0 && *f.alpha <= 0.25))
        throw ConfigError("--alpha: " + short_number(*f.alpha) + " is outside the valid range [0, 0.25]");
    if (f.beta0 && !(*f.beta0 > 0)) throw ConfigError("--beta0: must be positive");
    if (f.tau && !(*f.tau > 0)) throw ConfigError("--tau: must be positive");
    const bool scaled = f.alpha || f.beta0 || (f.tau && f.kind != "kpz");
    if (scaled && f.t) throw ConfigError("--t conflicts with --alpha/--beta0/--tau");
    if (f.auto_char_t && f.kind != "stationary") throw ConfigError("--auto-char-t applies to --kind stationary");
    if (f.auto_char_t && (f.t || scaled)) throw ConfigError("--auto-char-t conflicts with --t and --alpha");
    if (f.phi != "none" && f.kind != "kpz") throw ConfigError("--phi applies to --kind kpz");

    // Scaled model: levels, horizon, boundary parameter, log offset.
    std::size_t levels = f.n;
    double t = 0, theta = 0, beta = 1, offset = 0;
    if (f.kind == "kpz") {
        if (f.t || f.alpha || f.beta0 || f.theta) throw ConfigError("--kind kpz takes --n and --tau only");
        const KpzSetup s = kpz_setup(f.tau.value_or(1.0), f.n);
        levels = s.levels;
        t = s.t;
        theta = s.theta;
        beta = s.beta;
    } else if (scaled) {
        if (f.theta) throw ConfigError("--theta conflicts with --alpha/--beta0/--tau");
        const ScaledParams p = characteristic_params(f.alpha.value_or(0), f.beta0.value_or(1), f.tau.value_or(1), f.n);
        levels = p.n_levels;
        t = p.t;
        theta = p.theta;
        beta = p.beta;
        offset = f.kind == "ptp" ? p.log_offset : p.stationary_log_offset;
    } else {
        if (f.kind == "stationary") {
            theta = f.theta.value_or(1.0);
            if (!(theta > 0 || (theta == 0 && f.zero_env)))
                throw ConfigError("--theta: must be positive (0 only with --zero-env)");
        } else if (f.theta) {
            throw ConfigError("--theta applies to --kind stationary");
        }
        if (f.auto_char_t) {
            if (!(theta > 0)) throw ConfigError("--auto-char-t needs --theta > 0");
            t = static_cast<double>(f.n) * psi1(theta);
        } else if (f.t) {
            t = *f.t;
        } else {
            throw ConfigError("--t is required (or --alpha/--beta0/--tau, or --auto-char-t)");
        }
        if (!(t > 0) || !std::isfinite(t)) throw ConfigError("--t: must be positive");
        if (f.kind == "ptp") theta = psi1_inv(t / static_cast<double>(f.n));
    }
    const double delta = f.delta ? *f.delta : auto_delta(theta);
    double t_neg = 0;
    Phi phi = parse_phi(f.phi);
    if (f.kind == "kpz" && phi.f) t_neg = kpz_truncation(kpz_setup(f.tau.value_or(1.0), f.n), phi.bound, 1e-8);
    const GridSpec grid = GridSpec::uniform(t, delta, t_neg);

    const double cost = static_cast<double>(levels) * static_cast<double>(grid.window_nodes()) *
                        static_cast<double>(f.replicas) * kSimulateSecondsPerCell / 3600.0;
    if (cost > f.budget)
        throw BudgetError("estimated cost " + short_number(cost) + " core-hours exceeds --budget " +
                          short_number(f.budget));

    std::ostringstream canon;
    canon << "kind=" << f.kind << "\nn=" << f.n << "\nlevels=" << levels << "\nt=" << t << "\ntheta=" << theta
          << "\nbeta=" << beta << "\ndelta=" << grid.delta << "\nreplicas=" << f.replicas << "\nseed=" << f.seed
          << "\nzero_env=" << f.zero_env << "\nphi=" << f.phi << '\n';
    const fs::path dir = resolve_output_dir(f.out);
    ensure_dir(dir);
    const std::string started = timestamp();
    write_atomic(dir / "manifest.json",
                 manifest_json("simulate", canon.str(), f.seed, started, "", f.replicas, 0).dump(2) + "\n");

    std::vector<double> logz(f.replicas);
    parallel_for(f.replicas, f.workers, [&](std::size_t r) {
        const auto rep = static_cast<std::uint32_t>(r);
        std::optional<Environment> zero;
        std::optional<EnvironmentStream> stream;
        const LevelSource* env;
        if (f.zero_env) {
            zero.emplace(zero_environment(levels, grid));
            env = &*zero;
        } else {
            stream.emplace(levels, grid, f.seed, rep);
            env = &*stream;
        }
        double v = 0;
        if (f.kind == "ptp") {
            v = ptp_final(*env, levels);
        } else if (f.kind == "stationary") {
            const BoundaryWeights bw =
                f.zero_env ? zero_boundary(levels, theta) : sample_boundary(theta, levels, f.seed, rep);
            v = stationary_final(*env, bw, theta, levels);
        } else {
            const BoundaryWeights bw =
                f.zero_env ? zero_boundary(levels, theta) : sample_boundary(theta, levels, f.seed, rep);
            v = kpz_logZ(*env, phi.f ? nullptr : &bw, f.tau.value_or(1.0), f.n, phi.f ? &phi : nullptr);
        }
        logz[r] = v + offset;
    });

    std::ostringstream rows;
    for (std::size_t r = 0; r < f.replicas; ++r) {
        json row;
        row["replica"] = r;
        row["logZ"] = number(logz[r]);
        rows << row.dump() << '\n';
    }
    write_atomic(dir / "simulate.jsonl", rows.str());

    json s;
    s["kind"] = f.kind;
    s["n"] = f.n;
    s["levels"] = levels;
    s["t"] = t;
    s["theta"] = theta;
    s["beta"] = beta;
    s["delta"] = grid.delta;
    s["replicas"] = f.replicas;
    s["seed"] = f.seed;
    s["zero_env"] = f.zero_env;
    const Estimate mean = f.replicas > 1 ? mean_estimate(logz) : Estimate{logz[0], 0};
    s["logZ"] = number(mean.value);
    s["logZ_se"] = f.replicas > 1 ? number(mean.se) : json(nullptr);
    if (f.replicas == 1) s["Z"] = number(std::exp(logz[0]));
    if (f.replicas > 1) {
        const Estimate var = variance_estimate(logz);
        s["var_logZ"] = number(var.value);
        s["var_logZ_se"] = number(var.se);
    }
    write_atomic(dir / "manifest.json", manifest_json("simulate", canon.str(), f.seed, started, timestamp(),
                                                      f.replicas, f.replicas)
                                                .dump(2) +
                                            "\n");
    write_atomic(dir / "simulate_summary.json", s.dump(2) + "\n");
    out << s.dump() << '\n';
    return kExitOk;
}

// --- identities ---------------------------------------------------------------

struct IdentityFlags {
    std::vector<std::string> only;
    bool list = false;
    std::uint64_t seed = 1;
    std::size_t workers = 1;
    double delta = 0;
    double scale = 1;
    std::string out;
};

int cmd_identities(const IdentityFlags& f, std::ostream& out) {
    const std::vector<std::string> names = identity_names();
    if (f.list || (f.only.size() == 1 && f.only[0] == "list")) {
        for (const auto& n : names) out << n << '\n';
        return kExitOk;
    }
    std::vector<std::string> run = f.only.empty() ? names : f.only;
    for (const auto& n : run)
        if (std::find(names.begin(), names.end(), n) == names.end())
            throw ConfigError("--only: unknown identity '" + n + "' (see --list)");
    if (!(f.scale > 0)) throw ConfigError("--scale: must be positive");
    if (f.delta < 0) throw ConfigError("--delta: must be positive");
    RunOptions o;
    o.seed = f.seed;
    o.workers = f.workers;
    o.delta = f.delta;
    std::ostringstream lines;
    bool ok = true;
    for (const auto& n : run) {
        const IdentityVerdict v = run_identity(n, o, f.scale);
        const std::string line = to_json_line(v);
        out << line << '\n';
        out.flush();
        lines << line << '\n';
        ok = ok && v.passed;
    }
    if (!f.out.empty() || std::getenv(kOutputDirEnv)) {
        const fs::path dir = resolve_output_dir(f.out);
        ensure_dir(dir);
        write_atomic(dir / "identities.jsonl", lines.str());
    }
    return ok ? kExitOk : kExitFailure;
}

// --- exponent -----------------------------------------------------------------

struct ExponentFlags {
    ExperimentConfig cfg;
    std::string experiment;
    std::string model = "stationary";
    std::vector<std::size_t> n_list;
    std::vector<double> tau_list;
    std::vector<double> tail_b;
    std::size_t workers = 1;
    std::string out;
    bool resume = false;
    std::optional<std::size_t> stop_after;
};

std::vector<TaskRecord> read_task_records(const ExperimentPlan& plan, const fs::path& path) {
    std::vector<TaskRecord> records;
    std::ifstream in(path, std::ios::binary);
    if (!in) return records;
    std::string line;
    std::uintmax_t good_bytes = 0;
    while (std::getline(in, line)) {
        if (in.eof()) break;  // no trailing newline: an interrupted write
        try {
            TaskRecord rec = task_from_json_line(plan, line);
            if (task_index(plan, rec.group, rec.replica) != records.size()) break;
            records.push_back(std::move(rec));
        } catch (const IndexError&) {
            break;
        }
        good_bytes += line.size() + 1;
    }
    in.close();
    if (fs::file_size(path) != good_bytes) fs::resize_file(path, good_bytes);
    return records;
}

int cmd_exponent(ExponentFlags f, std::ostream& out, std::ostream& err) {
    ExperimentConfig& cfg = f.cfg;
    try {
        cfg.experiment = parse_experiment_kind(f.experiment);
    } catch (const DomainError& e) {
        throw ConfigError(std::string("--experiment: ") + e.what());
    }
    if (f.model == "stationary") cfg.model = TableKind::stationary;
    else if (f.model == "ptp" || f.model == "point_to_point") cfg.model = TableKind::point_to_point;
    else throw ConfigError("--model: expected stationary or ptp");
    if (!(cfg.alpha >= 0 && cfg.alpha <= 0.25))
        throw ConfigError("--alpha: " + short_number(cfg.alpha) + " is outside the valid range [0, 0.25]");
    cfg.n_list = f.n_list;
    if (!f.tau_list.empty()) cfg.tau_list = f.tau_list;
    if (!f.tail_b.empty()) cfg.tail_b = f.tail_b;

    const ExperimentPlan plan = plan_experiment(cfg);
    for (const auto& w : plan.warnings) err << "warning: " << w << '\n';
    const std::string canon = canonical(plan.config);
    const fs::path dir = resolve_output_dir(f.out);
    const fs::path manifest_path = dir / "manifest.json";
    const fs::path tasks_path = dir / "tasks.jsonl";

    std::string started = timestamp();
    std::vector<TaskRecord> records;
    if (f.resume) {
        std::ifstream in(manifest_path);
        if (!in) throw ManifestError("--resume: no manifest in " + dir.string());
        json m;
        try {
            m = json::parse(in);
        } catch (const json::exception&) {
            throw ManifestError("--resume: unreadable manifest in " + dir.string());
        }
        if (m.value("command", "") != "exponent" || m.value("config_hash", "") != config_hash(canon)) {
            std::string detail;
            const json& old = m.contains("config") ? m["config"] : json::object();
            const json now = manifest_json("exponent", canon, cfg.seed, "", "", 0, 0)["config"];
            for (const auto& [key, value] : now.items())
                if (!old.contains(key) || old[key] != value)
                    detail += " " + key + " (" + (old.contains(key) ? old[key].get<std::string>() : "absent") +
                              " -> " + value.get<std::string>() + ")";
            throw ManifestError("--resume: flags conflict with the manifest in " + dir.string() + ":" + detail);
        }
        started = m.value("started", started);
        records = read_task_records(plan, tasks_path);
    } else {
        ensure_dir(dir);
        std::ofstream(tasks_path, std::ios::trunc);
        std::error_code ec;
        fs::remove(dir / "summary.json", ec);
        fs::remove(dir / "rows.csv", ec);
    }
    ensure_dir(dir);
    auto save_manifest = [&](std::size_t completed, const std::string& finished) {
        write_atomic(manifest_path,
                     manifest_json("exponent", canon, cfg.seed, started, finished, plan.tasks(), completed).dump(2) +
                         "\n");
    };
    save_manifest(records.size(), "");

    std::size_t first = records.size();
    std::size_t count = plan.tasks() - first;
    if (f.stop_after) count = std::min(count, *f.stop_after);
    {
        std::ofstream tasks(tasks_path, std::ios::app | std::ios::binary);
        if (!tasks) throw ManifestError("cannot write " + tasks_path.string());
        std::mutex mutex;
        std::map<std::size_t, TaskRecord> ready;
        std::size_t next = first;
        parallel_for(count, f.workers, [&](std::size_t i) {
            TaskRecord rec = run_task(plan, first + i);
            std::lock_guard lock(mutex);
            ready.emplace(first + i, std::move(rec));
            bool wrote = false;
            for (auto it = ready.find(next); it != ready.end(); it = ready.find(next)) {
                tasks << to_json_line(plan, it->second) << '\n';
                records.push_back(std::move(it->second));
                ready.erase(it);
                ++next;
                wrote = true;
            }
            if (wrote) {
                tasks.flush();
                save_manifest(next, "");
            }
        });
    }
    if (records.size() < plan.tasks()) {
        err << "stopped after " << records.size() << " of " << plan.tasks()
            << " tasks; rerun with --resume to continue\n";
        return kExitOk;
    }

    const ExperimentReport report = aggregate(plan, records);
    std::ostringstream csv;
    write_rows_csv(report, csv);
    write_atomic(dir / "rows.csv", csv.str());
    save_manifest(plan.tasks(), timestamp());
    const std::string summary = summary_json(report);
    write_atomic(dir / "summary.json", summary + "\n");
    for (const FitRecord& fit : report.fits) {
        json line;
        line["fit"] = fit.name;
        line["slope"] = number(fit.fit.slope);
        line["ci_low"] = number(fit.fit.ci_low);
        line["ci_high"] = number(fit.fit.ci_high);
        line["target"] = fit.target;
        out << line.dump() << '\n';
    }
    bool ok = true;
    for (const CheckRecord& c : report.checks) ok = ok && c.passed;
    return ok ? kExitOk : kExitFailure;
}

template <class T>
void list_option(CLI::App* app, const std::string& name, std::vector<T>& target, const std::string& help) {
    app->add_option(name, target, help)->delimiter(',');
}

}  // namespace

std::string config_hash(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

int run_cli(const std::vector<std::string>& input, std::ostream& out, std::ostream& err) {
    CLI::App app{"Monte Carlo experiments for the semi-discrete Brownian polymer", "dpbe"};
    app.require_subcommand(1);
    app.set_version_flag("--version", DPBE_VERSION);

    SimulateFlags sim;
    CLI::App* simulate = app.add_subcommand("simulate", "Per-replica log partition functions of one model");
    simulate->add_option("--kind", sim.kind, "ptp | stationary | kpz")->required();
    simulate->add_option("--n", sim.n, "Number of levels (size parameter)")->required();
    simulate->add_option("--t", sim.t, "Horizon of the beta = 1 model");
    simulate->add_option("--alpha", sim.alpha, "Intermediate-disorder exponent in [0, 0.25]");
    simulate->add_option("--beta0", sim.beta0, "Inverse temperature prefactor");
    simulate->add_option("--tau", sim.tau, "Macroscopic time");
    simulate->add_option("--theta", sim.theta, "Boundary parameter (stationary)");
    simulate->add_option("--replicas", sim.replicas, "Number of replicas");
    simulate->add_option("--seed", sim.seed, "Master seed");
    simulate->add_option("--delta", sim.delta, "Grid step");
    simulate->add_flag("--auto-delta", sim.auto_delta, "Grid step min(0.02, 0.1 / theta^2) (default)");
    simulate->add_flag("--auto-char-t", sim.auto_char_t, "Characteristic horizon t = n psi1(theta)");
    simulate->add_flag("--zero-env", sim.zero_env, "All-zero environment and boundary weights");
    simulate->add_option("--phi", sim.phi, "kpz initial profile: none | zero | const:c | sin:K");
    simulate->add_option("--budget", sim.budget, "Budget in core-hours");
    simulate->add_option("--out", sim.out, "Output directory");
    simulate->add_option("--workers", sim.workers, "Worker threads");
    simulate->add_option("--config", "key=value config file");

    IdentityFlags ids;
    CLI::App* identities = app.add_subcommand("identities", "Statistical checks of exact identities");
    list_option(identities, "--only", ids.only, "Comma-separated subset (see --list)");
    identities->add_flag("--list", ids.list, "List identity names");
    identities->add_option("--seed", ids.seed, "Master seed");
    identities->add_option("--workers", ids.workers, "Worker threads");
    identities->add_option("--delta", ids.delta, "Grid step (0: automatic)");
    identities->add_option("--scale", ids.scale, "Multiplier of the default replica counts");
    identities->add_option("--out", ids.out, "Output directory for identities.jsonl");
    identities->add_option("--config", "key=value config file");

    ExponentFlags ex;
    CLI::App* exponent = app.add_subcommand("exponent", "Fluctuation exponent experiments");
    exponent->add_option("--experiment", ex.experiment, "var | ptp | path | kpz")->required();
    exponent->add_option("--model", ex.model, "path experiment model: stationary | ptp");
    exponent->add_option("--alpha", ex.cfg.alpha, "Intermediate-disorder exponent in [0, 0.25]");
    exponent->add_option("--beta0", ex.cfg.beta0, "Inverse temperature prefactor");
    list_option(exponent, "--n", ex.n_list, "Comma-separated sizes (span >= 8)");
    list_option(exponent, "--tau", ex.tau_list, "Comma-separated macroscopic times");
    exponent->add_option("--gamma", ex.cfg.gamma, "Level fraction for the path experiment");
    exponent->add_option("--replicas", ex.cfg.replicas, "Replicas per point (0: split the budget)");
    exponent->add_option("--seed", ex.cfg.seed, "Master seed");
    exponent->add_option("--delta", ex.cfg.delta, "Fixed grid step (0: min(0.02, delta-scale / theta^2))");
    exponent->add_option("--delta-scale", ex.cfg.delta_scale, "Grid step policy coefficient");
    exponent->add_option("--budget", ex.cfg.budget_core_hours, "Budget in core-hours");
    exponent->add_option("--phi", ex.cfg.phi, "kpz initial profile: none | zero | const:c | sin:K");
    list_option(exponent, "--tail-b", ex.tail_b, "Tail multiples b");
    exponent->add_option("--bootstrap", ex.cfg.bootstrap, "Bootstrap resamples (>= 200)");
    exponent->add_option("--workers", ex.workers, "Worker threads");
    exponent->add_option("--out", ex.out, "Output directory");
    exponent->add_flag("--resume", ex.resume, "Continue the run recorded in the output directory");
    exponent->add_option("--stop-after", ex.stop_after, "Stop after this many tasks")->group("");
    exponent->add_option("--config", "key=value config file");

    std::vector<std::string> args = input;
    try {
        if (!args.empty()) {
            CLI::App* sub = nullptr;
            for (CLI::App* s : {simulate, identities, exponent})
                if (s->get_name() == args[0]) sub = s;
            if (sub) apply_config_file(*sub, args);
        }
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << DPBE_VERSION << '\n';
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    }

    try {
        if (simulate->parsed()) return cmd_simulate(sim, out);
        if (identities->parsed()) return cmd_identities(ids, out);
        return cmd_exponent(ex, out, err);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const BudgetError& e) {
        err << "error: " << e.what() << '\n';
        return kExitResource;
    } catch (const ManifestError& e) {
        err << "error: " << e.what() << '\n';
        return kExitResource;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitResource;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args, out, err);
}

}  // namespace dpbe
