#include "nbiot/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include "nbiot/analytic.hpp"
#include "nbiot/config_io.hpp"
#include "nbiot/errors.hpp"
#include "nbiot/explorer.hpp"
#include "nbiot/report_io.hpp"
#include "nbiot/sim.hpp"

#ifndef NBIOT_VERSION
#define NBIOT_VERSION "0.0.0"
#endif

namespace nbiot::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

std::string content_id(const std::string& text)
{
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_Digest(text.data(), text.size(), digest, &length, EVP_sha256(), nullptr);
  std::ostringstream hex;
  for (unsigned int i = 0; i < 8 && i < length; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

namespace {

std::string utc_timestamp()
{
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_file(const fs::path& path, const std::string& content)
{
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
}

/// Seed lists like "1,2,7" or "1..5" (inclusive ranges may be mixed with singles).
std::vector<std::uint64_t> parse_seeds(const std::string& text)
{
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  auto number = [&](const std::string& s) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) {
      throw ConfigError("invalid seed list '" + text + "'", {"seeds"});
    }
    return static_cast<std::uint64_t>(v);
  };
  while (std::getline(ss, item, ',')) {
    const auto dots = item.find("..");
    if (dots == std::string::npos) {
      seeds.push_back(number(item));
      continue;
    }
    const auto lo = number(item.substr(0, dots));
    const auto hi = number(item.substr(dots + 2));
    if (hi < lo || hi - lo > 100000) {
      throw ConfigError("invalid seed range '" + item + "'", {"seeds"});
    }
    for (auto s = lo; s <= hi; ++s) {
      seeds.push_back(s);
    }
  }
  if (seeds.empty()) {
    throw ConfigError("at least one seed is required", {"seeds"});
  }
  return seeds;
}

double parse_fraction(const std::string& text)
{
  std::string t = text;
  double scale = 1.0;
  if (!t.empty() && t.back() == '%') {
    t.pop_back();
    scale = 0.01;
  }
  const double v = parse_quantity(t, Quantity::dimensionless) * scale;
  if (!(v >= 0.0)) {
    throw ConfigError("tolerance must be >= 0", {"tolerance"});
  }
  return v;
}

struct Common {
  std::string config;
  std::string out_root;
  std::string format = "both";

  bool csv() const { return format != "json"; }
  bool json() const { return format != "csv"; }
};

/// Output directory and manifest of one invocation.
class Run {
public:
  Run(const Common& common, const std::string& subcommand, const std::string& identity_text, Json options,
      std::string config_snapshot)
      : subcommand_(subcommand)
  {
    id_ = content_id(identity_text);
    const fs::path root = common.out_root;
    fs::create_directories(root);
    dir_ = root / id_;
    for (int n = 2; !fs::create_directory(dir_); ++n) {
      dir_ = root / (id_ + "-" + std::to_string(n));
    }
    manifest_ = Json{{"schema_version", io::kSchemaVersion},
                     {"run_id", id_},
                     {"directory", dir_.filename().string()},
                     {"subcommand", subcommand},
                     {"status", "running"},
                     {"started", utc_timestamp()},
                     {"tool_version", NBIOT_VERSION},
                     {"options", std::move(options)},
                     {"config", std::move(config_snapshot)},
                     {"artifacts", Json::array()}};
    flush();
  }

  const fs::path& dir() const { return dir_; }

  void artifact(const std::string& name, const std::string& content)
  {
    write_file(dir_ / name, content);
    manifest_["artifacts"].push_back(name);
  }

  void finish(int code)
  {
    manifest_["status"] = code == Exit::ok ? "complete" : "failed";
    manifest_["exit_code"] = code;
    manifest_["finished"] = utc_timestamp();
    flush();
  }

private:
  void flush() { write_file(dir_ / "manifest.json", manifest_.dump(2) + "\n"); }

  std::string subcommand_;
  std::string id_;
  fs::path dir_;
  Json manifest_;
};

void print_stability(const StabilityError& e, std::ostream& err)
{
  err << "error: " << e.what() << '\n';
  for (const auto& [name, value] : e.figures()) {
    err << "  " << name << " = " << value << '\n';
  }
}

void print_config_error(const ConfigError& e, std::ostream& err)
{
  err << "error: " << e.what() << '\n';
  for (const auto& v : e.violations()) {
    err << "  - " << v << '\n';
  }
}

/// Runs `body` against a fresh run directory, translating errors into exit codes.
template <typename Body>
int guarded(std::optional<Run>& run, std::ostream& err, Body&& body)
{
  int code = Exit::ok;
  try {
    code = body();
  } catch (const ConfigError& e) {
    print_config_error(e, err);
    code = Exit::config_error;
  } catch (const StabilityError& e) {
    print_stability(e, err);
    code = Exit::instability;
  } catch (const explore::InfeasibleGridError& e) {
    err << "error: " << e.what() << '\n';
    code = Exit::instability;
  } catch (const UnderSampledError& e) {
    err << "error: " << e.what() << '\n';
    code = Exit::under_sampled;
  }
  if (run) {
    run->finish(code);
  }
  return code;
}

std::string fmt(double v, int precision = 6)
{
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

// ---------------------------------------------------------------------------

struct SimArgs {
  std::string seeds = "1";
  std::string horizon = "3600 s";
  std::string warmup;
  bool trace = false;
  std::size_t trace_limit = 20;
};

struct ValidateArgs {
  std::string seeds = "1..5";
  std::string horizon = "7200 s";
  std::string warmup = "600 s";
  std::string tolerance = "0.15";
};

struct TraceArgs {
  std::uint64_t seed = 1;
  std::string horizon = "600 s";
  std::optional<std::uint64_t> session;
  std::optional<int> cls;
  std::string direction;
  std::size_t limit = 10;
};

SystemConfig load_stable(const std::string& path, analytic::AnalyticReport* report = nullptr)
{
  SystemConfig cfg = load_config(path);
  auto r = analytic::evaluate(cfg);
  if (report) {
    *report = std::move(r);
  }
  return cfg;
}

int cmd_analytic(const Common& c, std::ostream& out, std::ostream& err)
{
  std::optional<Run> run;
  return guarded(run, err, [&] {
    const SystemConfig cfg = load_config(c.config);
    const std::string text = to_config_text(cfg);
    run.emplace(c, "analytic", text + "\nanalytic\n", Json{{"format", c.format}}, text);
    const auto report = analytic::evaluate(cfg);
    if (c.csv()) {
      run->artifact("analytic.csv", io::analytic_csv(report));
    }
    if (c.json()) {
      run->artifact("analytic.json", io::analytic_json(report).dump(2) + "\n");
    }
    out << "run " << run->dir().string() << '\n';
    out << "class  D_u [s]      D_d [s]      L [days]\n";
    for (std::size_t j = 0; j < report.classes.size(); ++j) {
      const auto& m = report.classes[j];
      out << std::left << std::setw(7) << j + 1 << std::setw(13) << fmt(m.D_u) << std::setw(13) << fmt(m.D_d)
          << fmt(m.L) << '\n';
    }
    for (const auto& d : report.diagnostics) {
      err << "warning: " << d << '\n';
    }
    return static_cast<int>(Exit::ok);
  });
}

int cmd_simulate(const Common& c, const SimArgs& a, std::ostream& out, std::ostream& err)
{
  std::optional<Run> run;
  return guarded(run, err, [&] {
    const auto seeds = parse_seeds(a.seeds);
    const double horizon = parse_quantity(a.horizon, Quantity::duration);
    const double warmup = a.warmup.empty() ? 0.1 * horizon : parse_quantity(a.warmup, Quantity::duration);
    const SystemConfig cfg = load_stable(c.config);
    const std::string text = to_config_text(cfg);
    std::ostringstream identity;
    identity << text << "\nsimulate\nseeds";
    for (auto s : seeds) {
      identity << ' ' << s;
    }
    identity << "\nhorizon " << io::format_number(horizon) << "\nwarmup " << io::format_number(warmup)
             << "\ntrace " << a.trace << ' ' << a.trace_limit << '\n';
    run.emplace(c, "simulate", identity.str(),
                Json{{"seeds", seeds}, {"horizon", horizon}, {"warmup", warmup}, {"format", c.format},
                     {"trace", a.trace}},
                text);

    const sim::SimReport report =
        seeds.size() == 1 ? sim::run(cfg, seeds.front(), horizon, warmup) : sim::run_replicated(cfg, seeds, horizon, warmup);
    if (c.csv()) {
      run->artifact("simulation.csv", io::sim_csv(report));
    }
    if (c.json()) {
      run->artifact("simulation.json", io::sim_json(report).dump(2) + "\n");
    }
    if (a.trace) {
      sim::TraceFilter filter;
      filter.limit = a.trace_limit;
      run->artifact("trace.jsonl", io::trace_jsonl(sim::trace(cfg, seeds.front(), horizon, filter)));
    }
    out << "run " << run->dir().string() << '\n';
    out << "class  D_u [s] (+-95%)          D_d [s] (+-95%)          L [days]\n";
    for (std::size_t j = 0; j < report.classes.size(); ++j) {
      const auto& r = report.classes[j];
      out << std::left << std::setw(7) << j + 1 << std::setw(25)
          << (fmt(r.D_u.mean) + " +- " + fmt(r.D_u.half_width, 3)) << std::setw(25)
          << (fmt(r.D_d.mean) + " +- " + fmt(r.D_d.half_width, 3)) << fmt(r.L) << '\n';
    }
    return static_cast<int>(Exit::ok);
  });
}

int cmd_validate(const Common& c, const ValidateArgs& a, std::ostream& out, std::ostream& err)
{
  std::optional<Run> run;
  return guarded(run, err, [&] {
    const auto seeds = parse_seeds(a.seeds);
    const double horizon = parse_quantity(a.horizon, Quantity::duration);
    const double warmup = parse_quantity(a.warmup, Quantity::duration);
    const double tolerance = parse_fraction(a.tolerance);
    analytic::AnalyticReport expected;
    const SystemConfig cfg = load_stable(c.config, &expected);
    const std::string text = to_config_text(cfg);
    std::ostringstream identity;
    identity << text << "\nvalidate\nseeds";
    for (auto s : seeds) {
      identity << ' ' << s;
    }
    identity << "\nhorizon " << io::format_number(horizon) << "\nwarmup " << io::format_number(warmup)
             << "\ntolerance " << io::format_number(tolerance) << '\n';
    run.emplace(c, "validate", identity.str(),
                Json{{"seeds", seeds}, {"horizon", horizon}, {"warmup", warmup}, {"tolerance", tolerance},
                     {"format", c.format}},
                text);

    const sim::SimReport measured =
        seeds.size() == 1 ? sim::run(cfg, seeds.front(), horizon, warmup) : sim::run_replicated(cfg, seeds, horizon, warmup);

    bool pass = true;
    std::ostringstream csv;
    csv << "class,metric,analytic,simulation,ci95,deviation,within\n";
    Json rows = Json::array();
    std::ostringstream table;
    table << "class  metric  analytic      simulation    deviation\n";
    for (std::size_t j = 0; j < expected.classes.size(); ++j) {
      const auto& m = expected.classes[j];
      const auto& s = measured.classes[j];
      const std::pair<const char*, std::array<double, 3>> metrics[] = {
          {"D_u", {m.D_u, s.D_u.mean, s.D_u.half_width}},
          {"D_d", {m.D_d, s.D_d.mean, s.D_d.half_width}},
          {"L", {m.L, s.L, std::numeric_limits<double>::quiet_NaN()}}};
      for (const auto& [name, v] : metrics) {
        const double deviation = std::abs(v[1] - v[0]) / std::abs(v[0]);
        const bool within = deviation <= tolerance;
        pass = pass && within;
        csv << j + 1 << ',' << name << ',' << io::format_number(v[0]) << ',' << io::format_number(v[1]) << ','
            << io::format_number(v[2]) << ',' << io::format_number(deviation) << ',' << (within ? 1 : 0) << '\n';
        rows.push_back(Json{{"class", j + 1}, {"metric", name}, {"analytic", v[0]}, {"simulation", v[1]},
                            {"ci95", std::isfinite(v[2]) ? Json(v[2]) : Json(nullptr)},
                            {"deviation", deviation}, {"within", within}});
        table << std::left << std::setw(7) << j + 1 << std::setw(8) << name << std::setw(14) << fmt(v[0])
              << std::setw(14) << fmt(v[1]) << fmt(100.0 * deviation, 3) << "%" << (within ? "" : "  EXCEEDED")
              << '\n';
      }
    }
    if (c.csv()) {
      run->artifact("validation.csv", csv.str());
    }
    if (c.json()) {
      run->artifact("validation.json", Json{{"schema_version", io::kSchemaVersion},
                                            {"kind", "validation"},
                                            {"tolerance", tolerance},
                                            {"pass", pass},
                                            {"rows", rows}}
                                           .dump(2) + "\n");
    }
    out << "run " << run->dir().string() << '\n' << table.str();
    out << (pass ? "all deviations within " : "deviation exceeds ") << fmt(100.0 * tolerance, 4) << "%\n";
    return static_cast<int>(pass ? Exit::ok : Exit::tolerance_exceeded);
  });
}

int cmd_trace(const Common& c, const TraceArgs& a, std::ostream& out, std::ostream& err)
{
  std::optional<Run> run;
  return guarded(run, err, [&] {
    const double horizon = parse_quantity(a.horizon, Quantity::duration);
    const SystemConfig cfg = load_config(c.config);
    sim::TraceFilter filter;
    filter.limit = a.limit;
    filter.session = a.session;
    if (a.cls) {
      if (*a.cls < 1 || static_cast<std::size_t>(*a.cls) > cfg.class_count()) {
        throw ConfigError("--class must name an existing class", {"class"});
      }
      filter.cls = static_cast<std::size_t>(*a.cls - 1);
    }
    if (a.direction == "uplink") {
      filter.direction = sim::Direction::uplink;
    } else if (a.direction == "downlink") {
      filter.direction = sim::Direction::downlink;
    } else if (!a.direction.empty()) {
      throw ConfigError("--direction must be uplink or downlink", {"direction"});
    }
    const std::string text = to_config_text(cfg);
    std::ostringstream identity;
    identity << text << "\ntrace\nseed " << a.seed << "\nhorizon " << io::format_number(horizon) << "\nfilter "
             << (a.session ? std::to_string(*a.session) : "-") << ' ' << (a.cls ? std::to_string(*a.cls) : "-") << ' '
             << (a.direction.empty() ? "-" : a.direction) << ' ' << a.limit << '\n';
    run.emplace(c, "trace", identity.str(), Json{{"seed", a.seed}, {"horizon", horizon}, {"limit", a.limit}}, text);
    const auto sessions = sim::trace(cfg, a.seed, horizon, filter);
    run->artifact("trace.jsonl", io::trace_jsonl(sessions));
    out << "run " << run->dir().string() << '\n';
    for (const auto& s : sessions) {
      out << "session " << s.id << " class " << s.cls + 1 << ' ' << sim::to_string(s.direction) << ": "
          << s.attempt_count() << " attempt(s), energy " << fmt(s.energy) << " J, "
          << (s.terminal == sim::Terminal::served      ? "served"
              : s.terminal == sim::Terminal::abandoned ? "abandoned"
                                                       : "in flight")
          << '\n';
    }
    return static_cast<int>(Exit::ok);
  });
}

int cmd_sweep(const Common& c, std::ostream& out, std::ostream& err)
{
  std::optional<Run> run;
  return guarded(run, err, [&] {
    const fs::path spec_path = c.config;
    const auto spec = explore::load_sweep_spec(spec_path);
    std::ifstream in(spec_path);
    std::ostringstream spec_text;
    spec_text << in.rdbuf();
    const std::string base_text = to_config_text(spec.base);
    Json axes = Json::array();
    for (const auto& axis : spec.axes) {
      axes.push_back(Json{{"param", axis.param}, {"values", axis.values}});
    }
    Json options{{"spec", spec_text.str()}, {"axes", axes}, {"format", c.format}};
    if (spec.simulation) {
      options["evaluator"] = Json{{"type", "simulation"},
                                  {"seeds", spec.simulation->seeds},
                                  {"horizon", spec.simulation->horizon},
                                  {"warmup", spec.simulation->warmup}};
    } else {
      options["evaluator"] = "analytic";
    }
    run.emplace(c, "sweep", base_text + "\nsweep\n" + options.dump() + "\n", options, base_text);

    const auto result = explore::sweep(spec);
    if (c.csv()) {
      run->artifact("sweep.csv", explore::to_long_csv(result));
    }
    if (c.json()) {
      run->artifact("sweep.json", explore::summary_json(result).dump(2) + "\n");
    }
    if (result.axes.size() <= 2) {
      for (const auto& key : result.metrics) {
        run->artifact("matrix_" + std::string(explore::to_string(key.metric)) + "_" + std::to_string(key.cls + 1) +
                          ".dat",
                      explore::gnuplot_matrix(result, key));
      }
    }
    out << "run " << run->dir().string() << '\n';
    out << result.feasible_count() << " of " << result.points.size() << " grid points feasible\n";
    for (const auto& key : result.metrics) {
      const auto opt = explore::find_optima(result, key.metric, key.cls);
      out << (key.metric == explore::Metric::L ? "max " : "min ") << explore::to_string(key) << " = "
          << fmt(opt.value) << " at";
      for (std::size_t i = 0; i < result.axes.size(); ++i) {
        out << ' ' << result.axes[i].param << '=' << fmt(opt.coords[i]);
      }
      out << '\n';
    }
    return static_cast<int>(Exit::ok);
  });
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
  CLI::App app{"Latency, energy and lifetime model of NB-IoT channel scheduling", "nbiot"};
  app.set_version_flag("--version", NBIOT_VERSION);
  app.require_subcommand(1);

  Common common;
  if (const char* env = std::getenv(kOutputRootEnv); env && *env) {
    common.out_root = env;
  } else {
    common.out_root = "out";
  }
  auto add_common = [&](CLI::App* sub, bool needs_config, const char* config_help) {
    auto* opt = sub->add_option("--config", common.config, config_help);
    if (needs_config) {
      opt->required();
    }
    sub->add_option("--out", common.out_root, "Output root; one run directory is created below it")
        ->capture_default_str();
    sub->add_option("--format", common.format, "Report format")
        ->check(CLI::IsMember({"csv", "json", "both"}))
        ->capture_default_str();
  };

  auto* analytic_cmd = app.add_subcommand("analytic", "Evaluate the closed-form model for one configuration");
  add_common(analytic_cmd, true, "Configuration file");

  SimArgs sim_args;
  auto* simulate_cmd = app.add_subcommand("simulate", "Run the discrete-event simulator");
  add_common(simulate_cmd, true, "Configuration file");
  simulate_cmd->add_option("--seeds", sim_args.seeds, "Seeds, e.g. 1,2,3 or 1..5")->capture_default_str();
  simulate_cmd->add_option("--horizon", sim_args.horizon, "Simulated time, e.g. 3600 s or 2 h")->capture_default_str();
  simulate_cmd->add_option("--warmup", sim_args.warmup, "Discarded initial period (default 10% of the horizon)");
  simulate_cmd->add_flag("--trace", sim_args.trace, "Also write event logs of the first sessions");
  simulate_cmd->add_option("--trace-limit", sim_args.trace_limit, "Sessions kept with --trace")->capture_default_str();

  auto* sweep_cmd = app.add_subcommand("sweep", "Evaluate a parameter grid from a JSON sweep spec");
  add_common(sweep_cmd, false, "Sweep spec (alias of --spec)");
  sweep_cmd->add_option("--spec", common.config, "Sweep spec (JSON)");

  ValidateArgs val_args;
  auto* validate_cmd = app.add_subcommand("validate", "Compare analytic and simulated D_u, D_d and L");
  add_common(validate_cmd, true, "Configuration file");
  validate_cmd->add_option("--seeds", val_args.seeds, "Seeds, e.g. 1..5")->capture_default_str();
  validate_cmd->add_option("--horizon", val_args.horizon, "Simulated time per seed")->capture_default_str();
  validate_cmd->add_option("--warmup", val_args.warmup, "Discarded initial period")->capture_default_str();
  validate_cmd->add_option("--tolerance", val_args.tolerance, "Largest relative deviation, e.g. 0.15 or 15%")
      ->capture_default_str();

  TraceArgs trace_args;
  auto* trace_cmd = app.add_subcommand("trace", "Write per-session event logs");
  add_common(trace_cmd, true, "Configuration file");
  trace_cmd->add_option("--seed", trace_args.seed, "Seed")->capture_default_str();
  trace_cmd->add_option("--horizon", trace_args.horizon, "Simulated time")->capture_default_str();
  trace_cmd->add_option("--session", trace_args.session, "Only this session id");
  trace_cmd->add_option("--class", trace_args.cls, "Only this class (1-based)");
  trace_cmd->add_option("--direction", trace_args.direction, "Only uplink or downlink sessions");
  trace_cmd->add_option("--limit", trace_args.limit, "Largest number of sessions")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? Exit::ok : Exit::config_error;
  }

  try {
    if (*analytic_cmd) {
      return cmd_analytic(common, out, err);
    }
    if (*simulate_cmd) {
      return cmd_simulate(common, sim_args, out, err);
    }
    if (*sweep_cmd) {
      if (common.config.empty()) {
        err << "error: sweep needs --spec\n";
        return Exit::config_error;
      }
      return cmd_sweep(common, out, err);
    }
    if (*validate_cmd) {
      return cmd_validate(common, val_args, out, err);
    }
    if (*trace_cmd) {
      return cmd_trace(common, trace_args, out, err);
    }
  } catch (const ConfigError& e) {
    print_config_error(e, err);
    return Exit::config_error;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return Exit::config_error;
  }
  return Exit::config_error;
}

}  // namespace nbiot::cli
