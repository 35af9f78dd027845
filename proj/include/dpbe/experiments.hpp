#pragma once

// Exponent-estimation harness. An experiment is planned as a list of points
// (n, tau) grouped into task groups; each (group, replica) task is a pure
// function of the plan and produces per-replica values for every point of
// its group. Aggregation of the task records in task order yields report
// rows, log-log fits against the predicted exponents, and consistency checks.
//
// Points are the n sweep {(n, tau_list[0]) : n in n_list} and, when tau_list
// has more than one entry, the tau sweep {(n_list.back(), tau)}. Stationary
// final values at several tau share one sweep (nested group): theta and the
// grid step depend on n only, and U_{tau n}(tau t_1) for every tau is read off
// the run at the largest tau.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dpbe/environment.hpp"
#include "dpbe/partition.hpp"
#include "dpbe/specialfn.hpp"
#include "dpbe/stats.hpp"

namespace dpbe {

enum class ExperimentKind { variance, ptp, path, kpz };

std::string to_string(ExperimentKind kind);
/// Accepts var|variance, ptp, path, kpz; DomainError otherwise.
ExperimentKind parse_experiment_kind(const std::string& name);

struct ExperimentConfig {
    ExperimentKind experiment = ExperimentKind::variance;
    /// Model for the path experiment (variance: stationary, ptp: point to
    /// point, kpz: fixed by the regime).
    TableKind model = TableKind::stationary;
    double alpha = 0;
    double beta0 = 1;
    std::vector<std::size_t> n_list;
    std::vector<double> tau_list{1.0};
    double gamma = 0.5;
    /// Replicas per point; 0 splits the budget evenly.
    std::size_t replicas = 0;
    std::uint64_t seed = 1;
    /// Fixed grid step of the scaled model; 0 selects the step policy.
    double delta = 0;
    /// Step policy: delta = min(0.02, delta_scale / theta^2).
    double delta_scale = 0.4;
    /// Upper bound on the estimated cost of the whole run.
    double budget_core_hours = 1.0;
    /// Cost model: seconds per DP cell (level x grid node).
    double seconds_per_cell = 8e-9;
    /// kpz initial profile: none | zero | const:c | sin:K.
    std::string phi = "none";
    /// Multiples b of the fluctuation scale at which tail frequencies are
    /// recorded (ptp and path).
    std::vector<double> tail_b{1, 2, 4};
    std::size_t bootstrap = 200;
    /// Variance cross-check against the exact identity when the full table
    /// has at most this many cells (0 disables it).
    std::size_t crosscheck_cells = std::size_t{1} << 22;
};

/// Flat key=value rendering of every field, in a fixed order. Two configs
/// with equal canonical strings plan identical runs.
std::string canonical(const ExperimentConfig& cfg);

/// Parses a phi descriptor. none yields an empty function; zero, const:c and
/// sin:K (K sin x) are bounded; linear:a is rejected as unbounded.
Phi parse_phi(const std::string& descriptor);

struct ExperimentPoint {
    std::size_t n = 0;
    double tau = 1;
    ScaledParams params;
    std::size_t group = 0;
    /// Grid node of the scaled horizon within the group's grid.
    std::size_t node = 0;
    /// Predicted fluctuation scale used for tail thresholds.
    double scale = 0;
};

struct TaskGroup {
    std::size_t n = 0;
    std::vector<std::size_t> points;  ///< indices into ExperimentPlan::points
    GridSpec grid;
    std::size_t levels = 0;
    std::uint64_t seed = 0;
    bool nested = false;
    bool crosscheck = false;
};

struct ExperimentPlan {
    ExperimentConfig config;
    std::vector<ExperimentPoint> points;
    std::vector<TaskGroup> groups;
    std::size_t replicas = 0;
    /// Names of the per-replica values every task reports per point.
    std::vector<std::string> values;
    double cells_per_replica = 0;
    double estimated_core_hours = 0;
    std::vector<std::string> warnings;

    std::size_t tasks() const { return groups.size() * replicas; }
};

/// Validates the configuration and lays out points, groups and replicas.
/// DomainError for invalid parameters, BudgetError when the estimated cost
/// exceeds the budget.
ExperimentPlan plan_experiment(const ExperimentConfig& cfg);

/// Seed of the environment and boundary weights of the group at (n, tau),
/// where tau is the largest tau of the group.
std::uint64_t group_seed(std::uint64_t master_seed, std::size_t n, double tau);

/// Grid step of the scaled model at characteristic parameter theta.
double experiment_delta(const ExperimentConfig& cfg, double theta);

struct TaskRecord {
    std::size_t group = 0;
    std::size_t replica = 0;
    /// values[i][v]: value v (plan.values) of the i-th point of the group.
    std::vector<std::vector<double>> values;
};

std::size_t task_index(const ExperimentPlan& plan, std::size_t group, std::size_t replica);
TaskRecord run_task(const ExperimentPlan& plan, std::size_t task);

struct ReportRow {
    std::string kind;
    double alpha = 0, beta0 = 1, tau = 1;
    std::size_t n = 0, replicas = 0;
    double delta = 0;
    std::string statistic;
    double value = 0, se = 0;
};

struct FitRecord {
    std::string name;
    std::string abscissa;   ///< "n" or "tau"
    std::string statistic;
    std::vector<double> x, y;
    PowerLawFit fit;
    double target = 0;
    std::string target_source;
};

struct CheckRecord {
    std::string name;
    double value = 0;
    double threshold = 0;
    bool passed = false;
    std::string detail;
};

struct ExperimentReport {
    ExperimentConfig config;
    std::size_t replicas = 0;
    std::vector<ReportRow> rows;
    std::vector<FitRecord> fits;
    std::vector<CheckRecord> checks;
    std::vector<std::string> warnings;

    const FitRecord& fit(const std::string& name) const;
    const CheckRecord& check(const std::string& name) const;
    /// Row of `statistic` at (n, tau); IndexError when absent.
    const ReportRow& row(std::size_t n, double tau, const std::string& statistic) const;
};

/// Summary of complete task records (any order; they are sorted by task).
ExperimentReport aggregate(const ExperimentPlan& plan, std::vector<TaskRecord> records);

/// Plans, runs every task on `workers` threads and aggregates.
ExperimentReport run_experiment(const ExperimentConfig& cfg, std::size_t workers = 1);

/// Stationary model on the characteristic direction; fits Var log Z against
/// n (target 2(1 - 4 alpha)/3) and against tau (target 2/3).
ExperimentReport run_variance_scaling(const ExperimentConfig& cfg, std::size_t workers = 1);
/// Point-to-point E|log Z - f_n| against n (target (1 - 4 alpha)/3); alpha < 1/4.
ExperimentReport run_ptp_fluctuation(const ExperimentConfig& cfg, std::size_t workers = 1);
/// E|sigma_{floor(gamma n)} - gamma t| against n (target 2(1 - alpha)/3).
ExperimentReport run_path_fluctuation(const ExperimentConfig& cfg, std::size_t workers = 1);
/// Var log Z_n^phi(tau) against tau at alpha = 1/4 (target 2/3).
ExperimentReport run_kpz_scaling(const ExperimentConfig& cfg, std::size_t workers = 1);

/// CSV header and rows: kind,alpha,beta0,tau,n,replicas,delta,statistic,value,se.
void write_rows_csv(const ExperimentReport& report, std::ostream& out);
/// One JSON document with the config, fits, checks and warnings.
std::string summary_json(const ExperimentReport& report);

/// JSON-lines encoding of task records (exact round trip of every double).
std::string to_json_line(const ExperimentPlan& plan, const TaskRecord& record);
TaskRecord task_from_json_line(const ExperimentPlan& plan, const std::string& line);

}  // namespace dpbe
