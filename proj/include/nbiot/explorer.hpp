#pragma once

// Parameter sweeps over the scheduling knobs, optimum extraction and
// latency/lifetime tradeoff frontiers.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "nbiot/config.hpp"

namespace nbiot::explore {

enum class Metric { D_u, D_d, L };

const char* to_string(Metric m);

struct MetricKey {
  Metric metric = Metric::D_u;
  std::size_t cls = 0;  // zero-based

  bool operator==(const MetricKey&) const = default;
};

/// Parses "D_u:1" (class numbers are one-based in text).
MetricKey parse_metric_key(const std::string& text);
std::string to_string(const MetricKey& key);

struct Axis {
  std::string param;  // t, d, tau, u, S, N, p, lambda_b, T_th, c<j>, f<j>
  std::vector<double> values;
  bool operator==(const Axis&) const = default;
};

/// Sets one sweep parameter. Throws ConfigError for an unknown parameter.
void apply_parameter(SystemConfig& config, const std::string& param, double value);

struct SimulationEvaluator {
  std::vector<std::uint64_t> seeds{1, 2, 3};
  double horizon = 3600.0;
  double warmup = 360.0;
};

struct SweepSpec {
  SystemConfig base;
  std::vector<Axis> axes;
  std::optional<SimulationEvaluator> simulation;  // analytic when empty
  std::vector<MetricKey> metrics;                 // selects the exported columns
  unsigned threads = 0;                           // 0: hardware concurrency
};

/// Reads a JSON sweep spec; a relative "base" config path resolves against `spec_dir`.
SweepSpec parse_sweep_spec(const nlohmann::json& spec, const std::filesystem::path& spec_dir);
SweepSpec load_sweep_spec(const std::filesystem::path& path);

struct ClassValues {
  double D_u = 0.0, D_d = 0.0, L = 0.0;
  double D_u_ci = 0.0, D_d_ci = 0.0, L_ci = 0.0;  // zero for the analytic evaluator

  double get(Metric m) const;
  bool operator==(const ClassValues&) const = default;
};

struct GridPoint {
  std::vector<double> coords;  // one per axis
  bool feasible = false;
  std::string reason;          // why the point is infeasible
  std::vector<ClassValues> classes;

  bool operator==(const GridPoint&) const = default;
};

/// Points are stored row-major with the last axis varying fastest.
struct SweepResult {
  std::vector<Axis> axes;
  std::vector<MetricKey> metrics;
  std::size_t class_count = 0;
  std::vector<GridPoint> points;

  std::size_t feasible_count() const;
  bool operator==(const SweepResult&) const = default;
};

/// Raised when no grid point is feasible.
class InfeasibleGridError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Throws ConfigError for malformed axes and InfeasibleGridError when nothing is feasible.
SweepResult sweep(const SweepSpec& spec);

/// Evaluates a single configuration the way sweep() does.
GridPoint evaluate_point(const SystemConfig& config, const std::optional<SimulationEvaluator>& simulation);

struct OperatingPoint {
  std::size_t index = 0;
  std::vector<double> coords;
  double value = 0.0;
};

/// argmin for latencies, argmax for lifetime; ties go to the earliest point in
/// grid order, i.e. the lexicographically smallest coordinates.
OperatingPoint find_optima(const SweepResult& result, Metric metric, std::size_t cls);

/// Indices of mutually non-dominated vectors when every component is minimized.
std::vector<std::size_t> pareto_indices(const std::vector<std::array<double, 3>>& objectives);
/// O(n^2) reference version.
std::vector<std::size_t> pareto_indices_bruteforce(const std::vector<std::array<double, 3>>& objectives);

/// Feasible grid points not dominated under (min D_u, min D_d, max L) for the class.
std::vector<std::size_t> pareto_frontier(const SweepResult& result, std::size_t cls);

struct MutualImpactRow {
  int c2 = 0;
  double f1 = 0.0;
  bool feasible = false;
  std::string reason;
  double L1 = 0.0, L2 = 0.0;
  /// Relative lifetime drop from the previous c2 in the grid; NaN for the first entry or after an infeasible one.
  double drop1 = 0.0, drop2 = 0.0;
};

/// Class lifetimes for every (f1, c2) pair of a two-class configuration, grouped by f1.
std::vector<MutualImpactRow> mutual_impact(const SystemConfig& base, const std::vector<int>& c2_grid,
                                           const std::vector<double>& f1_values);

/// Long format: axis columns..., class, metric, value, ci95, feasible, reason.
std::string to_long_csv(const SweepResult& result);

/// Axes, optima, frontier per class, min-max normalization ranges and infeasible points.
nlohmann::ordered_json summary_json(const SweepResult& result);

/// gnuplot "matrix nonuniform" block for two-axis sweeps (first axis as rows,
/// second as columns), or "x value" lines for one axis. Infeasible points are NaN.
std::string gnuplot_matrix(const SweepResult& result, const MetricKey& key);

}  // namespace nbiot::explore
