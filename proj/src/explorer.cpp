#include "nbiot/explorer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "nbiot/analytic.hpp"
#include "nbiot/config_io.hpp"
#include "nbiot/errors.hpp"
#include "nbiot/report_io.hpp"
#include "nbiot/sim.hpp"
#include "nbiot/stats.hpp"

namespace nbiot::explore {

using Json = nlohmann::ordered_json;

const char* to_string(Metric m)
{
  switch (m) {
    case Metric::D_u: return "D_u";
    case Metric::D_d: return "D_d";
    case Metric::L: return "L";
  }
  return "?";
}

std::string to_string(const MetricKey& key)
{
  return std::string(to_string(key.metric)) + ":" + std::to_string(key.cls + 1);
}

MetricKey parse_metric_key(const std::string& text)
{
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  MetricKey key;
  if (name == "D_u") {
    key.metric = Metric::D_u;
  } else if (name == "D_d") {
    key.metric = Metric::D_d;
  } else if (name == "L") {
    key.metric = Metric::L;
  } else {
    throw ConfigError("unknown metric '" + name + "' (expected D_u, D_d or L)", {"metrics"});
  }
  if (colon != std::string::npos) {
    const std::string cls = text.substr(colon + 1);
    int n = 0;
    try {
      std::size_t used = 0;
      n = std::stoi(cls, &used);
      if (used != cls.size()) {
        n = 0;
      }
    } catch (const std::exception&) {
      n = 0;
    }
    if (n < 1) {
      throw ConfigError("metric '" + text + "' needs a class number >= 1", {"metrics"});
    }
    key.cls = static_cast<std::size_t>(n - 1);
  }
  return key;
}

double ClassValues::get(Metric m) const
{
  switch (m) {
    case Metric::D_u: return D_u;
    case Metric::D_d: return D_d;
    case Metric::L: return L;
  }
  return 0.0;
}

std::size_t SweepResult::feasible_count() const
{
  return static_cast<std::size_t>(
      std::count_if(points.begin(), points.end(), [](const GridPoint& p) { return p.feasible; }));
}

// ---------------------------------------------------------------------------
// Parameters

namespace {

Quantity parameter_quantity(const std::string& param)
{
  if (param == "t" || param == "d" || param == "tau" || param == "u" || param == "T_th") {
    return Quantity::duration;
  }
  if (param == "S") {
    return Quantity::per_day;
  }
  if (param == "lambda_b") {
    return Quantity::per_second;
  }
  return Quantity::dimensionless;
}

std::optional<std::size_t> class_suffix(const std::string& param, char prefix, std::size_t classes)
{
  if (param.size() < 2 || param[0] != prefix) {
    return std::nullopt;
  }
  const std::string digits = param.substr(1);
  if (!std::all_of(digits.begin(), digits.end(), [](char ch) { return ch >= '0' && ch <= '9'; })) {
    return std::nullopt;
  }
  const auto n = static_cast<std::size_t>(std::stoul(digits));
  if (n < 1 || n > classes) {
    throw ConfigError("sweep parameter '" + param + "' refers to a class that does not exist", {param});
  }
  return n - 1;
}

}  // namespace

void apply_parameter(SystemConfig& config, const std::string& param, double value)
{
  auto& tr = config.traffic;
  auto& sc = config.schedule;
  if (param == "t") {
    set_common_nprach_period(config, value);
  } else if (param == "d") {
    sc.npdcch_period = value;
  } else if (param == "tau") {
    sc.nprach_unit = value;
  } else if (param == "u") {
    sc.control_tx_time = value;
  } else if (param == "S") {
    tr.sessions_per_day = value;
  } else if (param == "N") {
    tr.devices = value;
  } else if (param == "p") {
    tr.uplink_prob = value;
  } else if (param == "lambda_b") {
    tr.bs_control_rate = value;
  } else if (param == "T_th") {
    tr.rar_window = value;
  } else if (auto j = class_suffix(param, 'c', config.class_count())) {
    if (value != std::round(value)) {
      throw ConfigError("sweep parameter '" + param + "' takes integer repetitions", {param});
    }
    config.classes[*j].repetitions = static_cast<int>(value);
  } else if (auto f = class_suffix(param, 'f', config.class_count())) {
    set_class_fraction(config, *f, value);
  } else {
    throw ConfigError("unknown sweep parameter '" + param + "' (expected t, d, tau, u, S, N, p, lambda_b, T_th, cJ or fJ)",
                      {param});
  }
}

// ---------------------------------------------------------------------------
// Spec parsing

namespace {

double axis_value(const nlohmann::json& v, const std::string& param)
{
  if (v.is_number()) {
    return v.get<double>();
  }
  if (v.is_string()) {
    return parse_quantity(v.get<std::string>(), parameter_quantity(param));
  }
  throw ConfigError("axis '" + param + "': grid values must be numbers or quantity strings", {param});
}

Axis parse_axis(const nlohmann::json& j)
{
  if (!j.is_object() || !j.contains("param") || !j["param"].is_string()) {
    throw ConfigError("every axis needs a \"param\" name", {"axes"});
  }
  Axis axis;
  axis.param = j["param"].get<std::string>();
  if (j.contains("values")) {
    if (!j["values"].is_array()) {
      throw ConfigError("axis '" + axis.param + "': \"values\" must be an array", {axis.param});
    }
    for (const auto& v : j["values"]) {
      axis.values.push_back(axis_value(v, axis.param));
    }
  } else if (j.contains("from") && j.contains("to") && j.contains("step")) {
    const double from = axis_value(j["from"], axis.param);
    const double to = axis_value(j["to"], axis.param);
    const double step = axis_value(j["step"], axis.param);
    if (!(step > 0.0)) {
      throw ConfigError("axis '" + axis.param + "': step must be > 0", {axis.param});
    }
    const double span = (to - from) / step;
    if (span >= 0.0) {
      const auto n = static_cast<long>(std::floor(span + 1e-9));
      for (long k = 0; k <= n; ++k) {
        axis.values.push_back(from + static_cast<double>(k) * step);
      }
    }
  } else {
    throw ConfigError("axis '" + axis.param + "' needs \"values\" or \"from\"/\"to\"/\"step\"", {axis.param});
  }
  return axis;
}

double json_quantity(const nlohmann::json& v, Quantity q, const char* what)
{
  if (v.is_number()) {
    return v.get<double>();
  }
  if (v.is_string()) {
    return parse_quantity(v.get<std::string>(), q);
  }
  throw ConfigError(std::string("\"") + what + "\" must be a number or quantity string", {what});
}

void check_axes(const SweepSpec& spec)
{
  if (spec.axes.empty()) {
    throw ConfigError("sweep spec has no axes", {"axes"});
  }
  for (std::size_t a = 0; a < spec.axes.size(); ++a) {
    const auto& axis = spec.axes[a];
    if (axis.values.empty()) {
      throw ConfigError("axis '" + axis.param + "': grid is empty", {axis.param});
    }
    for (std::size_t i = 1; i < axis.values.size(); ++i) {
      if (!(axis.values[i] > axis.values[i - 1])) {
        throw ConfigError("axis '" + axis.param + "': grid must be strictly increasing", {axis.param});
      }
    }
    for (std::size_t b = 0; b < a; ++b) {
      if (spec.axes[b].param == axis.param) {
        throw ConfigError("axis '" + axis.param + "' appears twice", {axis.param});
      }
    }
    SystemConfig probe = spec.base;
    apply_parameter(probe, axis.param, axis.values.front());
  }
  for (const auto& m : spec.metrics) {
    if (m.cls >= spec.base.class_count()) {
      throw ConfigError("metric " + to_string(m) + " refers to a class that does not exist", {"metrics"});
    }
  }
}

}  // namespace

SweepSpec parse_sweep_spec(const nlohmann::json& j, const std::filesystem::path& spec_dir)
{
  if (!j.is_object()) {
    throw ConfigError("sweep spec must be a JSON object");
  }
  for (const auto& [key, value] : j.items()) {
    static const char* known[] = {"base", "axes", "evaluator", "metrics", "threads"};
    if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) == std::end(known)) {
      throw ConfigError("unknown sweep spec key '" + key + "'", {key});
    }
  }
  SweepSpec spec;
  if (!j.contains("base") || !j["base"].is_string()) {
    throw ConfigError("sweep spec needs a \"base\" config path", {"base"});
  }
  std::filesystem::path base = j["base"].get<std::string>();
  if (base.is_relative()) {
    base = spec_dir / base;
  }
  spec.base = load_config(base);

  if (!j.contains("axes") || !j["axes"].is_array()) {
    throw ConfigError("sweep spec needs an \"axes\" array", {"axes"});
  }
  for (const auto& a : j["axes"]) {
    spec.axes.push_back(parse_axis(a));
  }

  if (j.contains("evaluator")) {
    const auto& e = j["evaluator"];
    const std::string type = e.is_string() ? e.get<std::string>() : e.value("type", std::string());
    if (type == "simulation") {
      SimulationEvaluator sim;
      if (e.is_object()) {
        if (e.contains("seeds")) {
          sim.seeds = e["seeds"].get<std::vector<std::uint64_t>>();
        }
        if (e.contains("horizon")) {
          sim.horizon = json_quantity(e["horizon"], Quantity::duration, "horizon");
          sim.warmup = 0.1 * sim.horizon;
        }
        if (e.contains("warmup")) {
          sim.warmup = json_quantity(e["warmup"], Quantity::duration, "warmup");
        }
      }
      if (sim.seeds.empty()) {
        throw ConfigError("simulation evaluator needs at least one seed", {"evaluator"});
      }
      spec.simulation = sim;
    } else if (type != "analytic") {
      throw ConfigError("evaluator must be \"analytic\" or \"simulation\"", {"evaluator"});
    }
  }

  if (j.contains("metrics")) {
    for (const auto& m : j["metrics"]) {
      spec.metrics.push_back(parse_metric_key(m.get<std::string>()));
    }
  }
  spec.threads = j.value("threads", 0U);
  check_axes(spec);
  return spec;
}

SweepSpec load_sweep_spec(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot read sweep spec " + path.string());
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("sweep spec " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_sweep_spec(j, path.parent_path());
}

// ---------------------------------------------------------------------------
// Evaluation

GridPoint evaluate_point(const SystemConfig& config, const std::optional<SimulationEvaluator>& simulation)
{
  GridPoint p;
  analytic::AnalyticReport a;
  try {
    a = analytic::evaluate(config);
  } catch (const StabilityError& e) {
    p.reason = e.what();
    return p;
  } catch (const ConfigError& e) {
    p.reason = e.what();
    return p;
  }
  if (!simulation) {
    for (const auto& m : a.classes) {
      p.classes.push_back(ClassValues{m.D_u, m.D_d, m.L});
    }
    p.feasible = true;
    return p;
  }

  const auto& s = *simulation;
  try {
    if (s.seeds.size() == 1) {
      const auto r = sim::run(config, s.seeds.front(), s.horizon, s.warmup);
      for (const auto& c : r.classes) {
        p.classes.push_back(ClassValues{c.D_u.mean, c.D_d.mean, c.L, c.D_u.half_width, c.D_d.half_width, 0.0});
      }
    } else {
      const auto r = sim::run_replicated(config, s.seeds, s.horizon, s.warmup);
      for (std::size_t j = 0; j < r.classes.size(); ++j) {
        const auto& c = r.classes[j];
        std::vector<double> lifetimes;
        for (const auto& rep : r.replications) {
          lifetimes.push_back(rep.classes[j].L);
        }
        p.classes.push_back(ClassValues{c.D_u.mean, c.D_d.mean, c.L, c.D_u.half_width, c.D_d.half_width,
                                        stats::independent_ci(lifetimes).half_width});
      }
    }
  } catch (const UnderSampledError& e) {
    p.classes.clear();
    p.reason = std::string("under-sampled: ") + e.what();
    return p;
  }
  p.feasible = true;
  return p;
}

SweepResult sweep(const SweepSpec& spec)
{
  check_axes(spec);
  SweepResult result;
  result.axes = spec.axes;
  result.class_count = spec.base.class_count();
  result.metrics = spec.metrics;
  if (result.metrics.empty()) {
    for (std::size_t j = 0; j < result.class_count; ++j) {
      for (Metric m : {Metric::D_u, Metric::D_d, Metric::L}) {
        result.metrics.push_back(MetricKey{m, j});
      }
    }
  }

  std::size_t total = 1;
  for (const auto& a : spec.axes) {
    total *= a.values.size();
  }
  result.points.resize(total);
  for (std::size_t i = 0; i < total; ++i) {
    std::size_t rest = i;
    auto& coords = result.points[i].coords;
    coords.resize(spec.axes.size());
    for (std::size_t a = spec.axes.size(); a-- > 0;) {
      const auto n = spec.axes[a].values.size();
      coords[a] = spec.axes[a].values[rest % n];
      rest /= n;
    }
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < total; i = next++) {
      try {
        SystemConfig cfg = spec.base;
        for (std::size_t a = 0; a < spec.axes.size(); ++a) {
          apply_parameter(cfg, spec.axes[a].param, result.points[i].coords[a]);
        }
        auto coords = std::move(result.points[i].coords);
        result.points[i] = evaluate_point(cfg, spec.simulation);
        result.points[i].coords = std::move(coords);
      } catch (...) {
        const std::lock_guard lock(failure_mutex);
        if (!failure) {
          failure = std::current_exception();
        }
        next = total;
      }
    }
  };
  unsigned threads = spec.threads ? spec.threads : std::max(1U, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, total));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) {
    pool.emplace_back(worker);
  }
  worker();
  for (auto& t : pool) {
    t.join();
  }
  if (failure) {
    std::rethrow_exception(failure);
  }
  if (result.feasible_count() == 0) {
    throw InfeasibleGridError("no grid point is feasible; first reason: " + result.points.front().reason);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Optima and frontier

OperatingPoint find_optima(const SweepResult& result, Metric metric, std::size_t cls)
{
  const bool maximize = metric == Metric::L;
  std::optional<OperatingPoint> best;
  for (std::size_t i = 0; i < result.points.size(); ++i) {
    const auto& p = result.points[i];
    if (!p.feasible || cls >= p.classes.size()) {
      continue;
    }
    const double v = p.classes[cls].get(metric);
    if (std::isnan(v)) {
      continue;
    }
    if (!best || (maximize ? v > best->value : v < best->value)) {
      best = OperatingPoint{i, p.coords, v};
    }
  }
  if (!best) {
    throw InfeasibleGridError("no feasible point to optimize " + std::string(to_string(metric)));
  }
  return *best;
}

namespace {

bool dominates(const std::array<double, 3>& a, const std::array<double, 3>& b)
{
  bool strict = false;
  for (std::size_t k = 0; k < 3; ++k) {
    if (a[k] > b[k]) {
      return false;
    }
    strict = strict || a[k] < b[k];
  }
  return strict;
}

}  // namespace

std::vector<std::size_t> pareto_indices(const std::vector<std::array<double, 3>>& objectives)
{
  std::vector<std::size_t> order(objectives.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return objectives[a] < objectives[b]; });
  std::vector<std::size_t> front;
  for (std::size_t i : order) {
    const bool dominated = std::any_of(front.begin(), front.end(),
                                       [&](std::size_t f) { return dominates(objectives[f], objectives[i]); });
    if (!dominated) {
      front.push_back(i);
    }
  }
  std::sort(front.begin(), front.end());
  return front;
}

std::vector<std::size_t> pareto_indices_bruteforce(const std::vector<std::array<double, 3>>& objectives)
{
  std::vector<std::size_t> front;
  for (std::size_t i = 0; i < objectives.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < objectives.size() && !dominated; ++j) {
      dominated = j != i && dominates(objectives[j], objectives[i]);
    }
    if (!dominated) {
      front.push_back(i);
    }
  }
  return front;
}

std::vector<std::size_t> pareto_frontier(const SweepResult& result, std::size_t cls)
{
  std::vector<std::size_t> index;
  std::vector<std::array<double, 3>> objectives;
  for (std::size_t i = 0; i < result.points.size(); ++i) {
    const auto& p = result.points[i];
    if (p.feasible && cls < p.classes.size()) {
      index.push_back(i);
      objectives.push_back({p.classes[cls].D_u, p.classes[cls].D_d, -p.classes[cls].L});
    }
  }
  if (index.empty()) {
    throw InfeasibleGridError("no feasible point for a frontier");
  }
  std::vector<std::size_t> front;
  for (std::size_t k : pareto_indices(objectives)) {
    front.push_back(index[k]);
  }
  return front;
}

// ---------------------------------------------------------------------------
// Mutual impact

std::vector<MutualImpactRow> mutual_impact(const SystemConfig& base, const std::vector<int>& c2_grid,
                                           const std::vector<double>& f1_values)
{
  if (base.class_count() != 2) {
    throw ConfigError("mutual impact needs exactly two classes", {"classes"});
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<MutualImpactRow> rows;
  for (double f1 : f1_values) {
    const MutualImpactRow* prev = nullptr;
    for (int c2 : c2_grid) {
      SystemConfig cfg = base;
      cfg.classes[1].repetitions = c2;
      set_class_fraction(cfg, 0, f1);
      MutualImpactRow row;
      row.c2 = c2;
      row.f1 = f1;
      row.drop1 = row.drop2 = nan;
      const GridPoint p = evaluate_point(cfg, std::nullopt);
      row.feasible = p.feasible;
      row.reason = p.reason;
      if (p.feasible) {
        row.L1 = p.classes[0].L;
        row.L2 = p.classes[1].L;
        if (prev && prev->feasible) {
          row.drop1 = (prev->L1 - row.L1) / prev->L1;
          row.drop2 = (prev->L2 - row.L2) / prev->L2;
        }
      } else {
        row.L1 = row.L2 = nan;
      }
      rows.push_back(row);
      prev = &rows.back();
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Exports

namespace {

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
};

Range metric_range(const SweepResult& r, const MetricKey& key)
{
  Range range;
  for (const auto& p : r.points) {
    if (p.feasible) {
      const double v = p.classes[key.cls].get(key.metric);
      range.lo = std::min(range.lo, v);
      range.hi = std::max(range.hi, v);
    }
  }
  return range;
}

double normalize(double v, const Range& r)
{
  return r.hi > r.lo ? (v - r.lo) / (r.hi - r.lo) : 0.0;
}

std::string csv_quote(const std::string& s)
{
  std::string out = "\"";
  for (char ch : s) {
    out += ch;
    if (ch == '"') {
      out += '"';
    }
  }
  return out + "\"";
}

Json coords_json(const SweepResult& r, const std::vector<double>& coords)
{
  Json j = Json::object();
  for (std::size_t a = 0; a < r.axes.size(); ++a) {
    j[r.axes[a].param] = coords[a];
  }
  return j;
}

double ci_of(const ClassValues& v, Metric m)
{
  switch (m) {
    case Metric::D_u: return v.D_u_ci;
    case Metric::D_d: return v.D_d_ci;
    case Metric::L: return v.L_ci;
  }
  return 0.0;
}

}  // namespace

std::string to_long_csv(const SweepResult& r)
{
  std::ostringstream out;
  for (const auto& a : r.axes) {
    out << a.param << ',';
  }
  out << "class,metric,value,ci95,normalized,feasible,reason\n";
  std::vector<Range> ranges;
  for (const auto& key : r.metrics) {
    ranges.push_back(metric_range(r, key));
  }
  for (const auto& p : r.points) {
    for (std::size_t k = 0; k < r.metrics.size(); ++k) {
      const auto& key = r.metrics[k];
      for (double c : p.coords) {
        out << io::format_number(c) << ',';
      }
      out << key.cls + 1 << ',' << to_string(key.metric) << ',';
      if (p.feasible) {
        const double v = p.classes[key.cls].get(key.metric);
        out << io::format_number(v) << ',' << io::format_number(ci_of(p.classes[key.cls], key.metric)) << ','
            << io::format_number(normalize(v, ranges[k])) << ",1,\n";
      } else {
        out << ",,,0," << csv_quote(p.reason) << '\n';
      }
    }
  }
  return out.str();
}

Json summary_json(const SweepResult& r)
{
  Json axes = Json::array();
  for (const auto& a : r.axes) {
    axes.push_back(Json{{"param", a.param}, {"values", a.values}});
  }
  Json optima = Json::array();
  Json normalization = Json::array();
  for (const auto& key : r.metrics) {
    const auto opt = find_optima(r, key.metric, key.cls);
    optima.push_back(Json{{"metric", to_string(key.metric)},
                          {"class", key.cls + 1},
                          {"goal", key.metric == Metric::L ? "max" : "min"},
                          {"coords", coords_json(r, opt.coords)},
                          {"value", opt.value}});
    const auto range = metric_range(r, key);
    normalization.push_back(
        Json{{"metric", to_string(key.metric)}, {"class", key.cls + 1}, {"min", range.lo}, {"max", range.hi}});
  }
  Json frontiers = Json::array();
  for (std::size_t j = 0; j < r.class_count; ++j) {
    Json points = Json::array();
    for (std::size_t i : pareto_frontier(r, j)) {
      const auto& v = r.points[i].classes[j];
      points.push_back(Json{{"coords", coords_json(r, r.points[i].coords)}, {"D_u", v.D_u}, {"D_d", v.D_d}, {"L", v.L}});
    }
    frontiers.push_back(Json{{"class", j + 1}, {"points", points}});
  }
  Json infeasible = Json::array();
  for (const auto& p : r.points) {
    if (!p.feasible) {
      infeasible.push_back(Json{{"coords", coords_json(r, p.coords)}, {"reason", p.reason}});
    }
  }
  return Json{{"schema_version", io::kSchemaVersion},
              {"kind", "sweep"},
              {"axes", axes},
              {"points", r.points.size()},
              {"feasible", r.feasible_count()},
              {"optima", optima},
              {"frontier", frontiers},
              {"normalization", normalization},
              {"infeasible", infeasible}};
}

std::string gnuplot_matrix(const SweepResult& r, const MetricKey& key)
{
  auto value = [&](const GridPoint& p) {
    return p.feasible ? io::format_number(p.classes[key.cls].get(key.metric)) : std::string("NaN");
  };
  std::ostringstream out;
  out << "# " << to_string(key) << '\n';
  if (r.axes.size() == 1) {
    out << "# " << r.axes[0].param << ' ' << to_string(key.metric) << '\n';
    for (const auto& p : r.points) {
      out << io::format_number(p.coords[0]) << ' ' << value(p) << '\n';
    }
    return out.str();
  }
  if (r.axes.size() != 2) {
    throw ConfigError("gnuplot matrix export needs one or two axes", {"axes"});
  }
  out << "# rows: " << r.axes[0].param << ", columns: " << r.axes[1].param << '\n';
  const auto& cols = r.axes[1].values;
  out << cols.size();
  for (double c : cols) {
    out << ' ' << io::format_number(c);
  }
  out << '\n';
  for (std::size_t i = 0; i < r.axes[0].values.size(); ++i) {
    out << io::format_number(r.axes[0].values[i]);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      out << ' ' << value(r.points[i * cols.size() + k]);
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace nbiot::explore
