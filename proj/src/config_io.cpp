#include "nbiot/config_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "nbiot/errors.hpp"

namespace nbiot {

namespace pt = boost::property_tree;

namespace {

std::string_view trim(std::string_view s)
{
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) {
    return {};
  }
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

const std::map<std::string, double, std::less<>>& unit_table(Quantity q)
{
  static const std::map<std::string, double, std::less<>> none{};
  static const std::map<std::string, double, std::less<>> duration{
      {"s", 1.0}, {"sec", 1.0}, {"ms", 1e-3}, {"us", 1e-6}, {"min", 60.0}, {"h", 3600.0}};
  static const std::map<std::string, double, std::less<>> rate{
      {"bit/s", 1.0},  {"bps", 1.0},  {"kbit/s", 1e3}, {"Kbit/s", 1e3},
      {"kbps", 1e3},   {"Mbit/s", 1e6}, {"Mbps", 1e6}};
  static const std::map<std::string, double, std::less<>> bits{
      {"bit", 1.0}, {"bits", 1.0}, {"kbit", 1e3}, {"Kbit", 1e3}, {"kbits", 1e3}, {"Kbits", 1e3}};
  static const std::map<std::string, double, std::less<>> bits_squared{{"bit^2", 1.0}, {"bit2", 1.0}};
  static const std::map<std::string, double, std::less<>> per_day{
      {"/day", 1.0},   {"/d", 1.0},      {"per-day", 1.0}, {"1/day", 1.0},
      {"/h", 24.0},    {"/hour", 24.0},  {"per-hour", 24.0}, {"1/h", 24.0}};
  static const std::map<std::string, double, std::less<>> per_second{
      {"/s", 1.0}, {"1/s", 1.0}, {"Hz", 1.0}, {"/ms", 1e3}};
  static const std::map<std::string, double, std::less<>> power{{"W", 1.0}, {"mW", 1e-3}, {"uW", 1e-6}};
  static const std::map<std::string, double, std::less<>> energy{
      {"J", 1.0}, {"mJ", 1e-3}, {"kJ", 1e3}, {"KJ", 1e3}, {"Wh", 3600.0}};

  switch (q) {
  case Quantity::dimensionless: return none;
  case Quantity::duration: return duration;
  case Quantity::rate: return rate;
  case Quantity::bits: return bits;
  case Quantity::bits_squared: return bits_squared;
  case Quantity::per_day: return per_day;
  case Quantity::per_second: return per_second;
  case Quantity::power: return power;
  case Quantity::energy: return energy;
  }
  return none;
}

const char* canonical_unit(Quantity q)
{
  switch (q) {
  case Quantity::dimensionless: return "";
  case Quantity::duration: return "s";
  case Quantity::rate: return "bit/s";
  case Quantity::bits: return "bit";
  case Quantity::bits_squared: return "bit^2";
  case Quantity::per_day: return "/day";
  case Quantity::per_second: return "/s";
  case Quantity::power: return "W";
  case Quantity::energy: return "J";
  }
  return "";
}

std::string format_exact(double v)
{
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string quantity_text(double v, Quantity q)
{
  std::string s = format_exact(v);
  if (q != Quantity::dimensionless) {
    s += ' ';
    s += canonical_unit(q);
  }
  return s;
}

long parse_integer(std::string_view text, const std::string& key)
{
  const auto t = trim(text);
  long value = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc{} || ptr != t.data() + t.size()) {
    throw ConfigError("invalid integer for '" + key + "': '" + std::string(t) + "'");
  }
  return value;
}

bool parse_bool(std::string_view text, const std::string& key)
{
  const auto t = trim(text);
  if (t == "true" || t == "yes" || t == "on" || t == "1") {
    return true;
  }
  if (t == "false" || t == "no" || t == "off" || t == "0") {
    return false;
  }
  throw ConfigError("invalid boolean for '" + key + "': '" + std::string(t) + "'");
}

/// Pulls typed values out of one section and rejects keys nobody asked for.
class Section {
public:
  Section(const pt::ptree& tree, std::string name) : tree_(tree), name_(std::move(name)) {}


  std::optional<std::string> raw(const std::string& key)
  {
    seen_.insert(key);
    if (auto v = tree_.get_optional<std::string>(pt::ptree::path_type(key, '\0'))) {
      return *v;
    }
    return std::nullopt;
  }

  void quantity(const std::string& key, double& out, Quantity q)
  {
    if (auto v = raw(key)) {
      try {
        out = parse_quantity(*v, q);
      } catch (const ConfigError& e) {
        throw ConfigError(name_ + "." + key + ": " + e.what());
      }
    }
  }

  void optional_quantity(const std::string& key, std::optional<double>& out, Quantity q)
  {
    if (raw(key)) {
      double v = 0.0;
      quantity(key, v, q);
      out = v;
    }
  }

  void integer(const std::string& key, int& out)
  {
    if (auto v = raw(key)) {
      out = static_cast<int>(parse_integer(*v, name_ + "." + key));
    }
  }

  void boolean(const std::string& key, bool& out)
  {
    if (auto v = raw(key)) {
      out = parse_bool(*v, name_ + "." + key);
    }
  }

  void reject_unknown() const
  {
    for (const auto& [key, child] : tree_) {
      if (!seen_.count(key)) {
        throw ConfigError("unknown key '" + key + "' in section [" + name_ + "]");
      }
    }
  }

private:
  const pt::ptree& tree_;
  std::string name_;
  std::set<std::string> seen_;
};

const pt::ptree& child_or_empty(const pt::ptree& root, const std::string& name)
{
  static const pt::ptree empty;
  auto it = root.find(name);
  return it == root.not_found() ? empty : it->second;
}

}  // namespace

double parse_quantity(std::string_view text, Quantity quantity)
{
  const auto t = trim(text);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc{} || ptr == t.data()) {
    throw ConfigError("invalid number '" + std::string(t) + "'");
  }
  const auto unit = trim(t.substr(static_cast<std::size_t>(ptr - t.data())));
  if (unit.empty()) {
    return value;
  }
  const auto& table = unit_table(quantity);
  const auto it = table.find(unit);
  if (it == table.end()) {
    throw ConfigError("unsupported unit '" + std::string(unit) + "' in '" + std::string(t) + "'");
  }
  return value * it->second;
}

SystemConfig parse_config(const std::string& text)
{
  pt::ptree root;
  std::istringstream in(text);
  try {
    pt::read_ini(in, root);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }

  SystemConfig config;
  bool bs_rate_given = false;

  std::map<int, CoverageClass> classes;
  {
    std::istringstream scan(text);
    std::string line;
    while (std::getline(scan, line)) {
      const auto open = line.find_first_not_of(" \t");
      const auto close = line.find_last_not_of(" \t\r");
      if (open == std::string::npos || line[open] != '[' || line[close] != ']') {
        continue;
      }
      const std::string name = line.substr(open + 1, close - open - 1);
      if (name.rfind("class", 0) == 0 && root.find(name) == root.not_found()) {
        root.put_child(name, pt::ptree{});
      }
    }
  }
  for (const auto& [name, section] : root) {
    if (name == "model" || name == "traffic" || name == "schedule" || name == "power") {
      continue;
    }
    if (section.empty() && !section.data().empty()) {
      throw ConfigError("key '" + name + "' appears outside any section");
    }
    if (name.rfind("class", 0) != 0) {
      throw ConfigError("unknown section [" + name + "]");
    }
    const int index = static_cast<int>(parse_integer(std::string_view(name).substr(5), "section " + name));
    if (index < 1) {
      throw ConfigError("class sections are numbered from 1: [" + name + "]");
    }
    CoverageClass c;
    Section s(section, name);
    s.integer("repetitions", c.repetitions);
    s.quantity("fraction", c.fraction, Quantity::dimensionless);
    s.integer("preambles", c.preambles);
    s.quantity("nprach_period", c.nprach_period, Quantity::duration);
    s.quantity("uplink_rate", c.uplink_rate, Quantity::rate);
    s.quantity("downlink_rate", c.downlink_rate, Quantity::rate);
    s.quantity("sync_latency", c.sync_latency, Quantity::duration);
    s.optional_quantity("tx_power", c.tx_power, Quantity::power);
    s.reject_unknown();
    classes[index] = c;
  }
  int expected = 1;
  for (const auto& [index, c] : classes) {
    if (index != expected++) {
      throw ConfigError("class sections must be numbered 1..C without gaps");
    }
    config.classes.push_back(c);
  }

  {
    Section s(child_or_empty(root, "model"), "model");
    if (auto mode = s.raw("rach_mode")) {
      const auto m = trim(*mode);
      if (m == "faithful") {
        config.options.rach_mode = RachMode::faithful;
      } else if (m == "corrected") {
        config.options.rach_mode = RachMode::corrected;
      } else {
        throw ConfigError("model.rach_mode must be 'faithful' or 'corrected'");
      }
    }
    s.boolean("energy_attempt_multiplier", config.options.energy_attempt_multiplier);
    s.boolean("squared_dl_moment2", config.options.squared_dl_moment2);
    s.boolean("strict_3gpp", config.options.strict_3gpp);
    s.reject_unknown();
  }
  {
    auto& tr = config.traffic;
    Section s(child_or_empty(root, "traffic"), "traffic");
    s.quantity("devices", tr.devices, Quantity::dimensionless);
    s.quantity("sessions", tr.sessions_per_day, Quantity::per_day);
    s.quantity("uplink_prob", tr.uplink_prob, Quantity::dimensionless);
    s.quantity("ul_packet_mean", tr.ul_packet_mean, Quantity::bits);
    s.optional_quantity("ul_packet_moment2", tr.ul_packet_m2, Quantity::bits_squared);
    s.quantity("dl_packet_mean", tr.dl_packet_mean, Quantity::bits);
    s.optional_quantity("dl_packet_moment2", tr.dl_packet_m2, Quantity::bits_squared);
    s.quantity("rar_window", tr.rar_window, Quantity::duration);
    bs_rate_given = s.raw("bs_control_rate").has_value();
    s.quantity("bs_control_rate", tr.bs_control_rate, Quantity::per_second);
    s.reject_unknown();
  }
  {
    auto& sc = config.schedule;
    Section s(child_or_empty(root, "schedule"), "schedule");
    s.quantity("npdcch_period", sc.npdcch_period, Quantity::duration);
    s.quantity("nprach_unit", sc.nprach_unit, Quantity::duration);
    s.quantity("control_tx_time", sc.control_tx_time, Quantity::duration);
    s.quantity("ref_signal_fraction", sc.ref_signal_fraction, Quantity::dimensionless);
    s.quantity("frame_length", sc.frame_length, Quantity::duration);
    s.integer("max_attempts", sc.max_attempts);
    s.reject_unknown();
  }
  {
    auto& pw = config.power;
    Section s(child_or_empty(root, "power"), "power");
    s.quantity("pa_efficiency", pw.pa_efficiency, Quantity::dimensionless);
    s.quantity("idle", pw.idle, Quantity::power);
    s.quantity("circuit", pw.circuit, Quantity::power);
    s.quantity("listen", pw.listen, Quantity::power);
    s.quantity("tx", pw.tx_power, Quantity::power);
    s.quantity("ack_energy", pw.ack_energy, Quantity::energy);
    s.quantity("battery", pw.battery, Quantity::energy);
    s.reject_unknown();
  }
  // BS-initiated control arrivals default to one per communication frame.
  if (!bs_rate_given && config.schedule.frame_length > 0.0) {
    config.traffic.bs_control_rate = 1.0 / config.schedule.frame_length;
  }
  return config;
}

SystemConfig load_config(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot read config file '" + path.string() + "'");
  }
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string to_config_text(const SystemConfig& config)
{
  std::ostringstream out;
  const auto line = [&out](const char* key, const std::string& value) { out << key << " = " << value << '\n'; };
  const auto qty = [&](const char* key, double v, Quantity q) { line(key, quantity_text(v, q)); };
  const auto flag = [&](const char* key, bool v) { line(key, v ? "true" : "false"); };

  out << "[model]\n";
  line("rach_mode", config.options.rach_mode == RachMode::faithful ? "faithful" : "corrected");
  flag("energy_attempt_multiplier", config.options.energy_attempt_multiplier);
  flag("squared_dl_moment2", config.options.squared_dl_moment2);
  flag("strict_3gpp", config.options.strict_3gpp);

  const auto& tr = config.traffic;
  out << "\n[traffic]\n";
  qty("devices", tr.devices, Quantity::dimensionless);
  qty("sessions", tr.sessions_per_day, Quantity::per_day);
  qty("uplink_prob", tr.uplink_prob, Quantity::dimensionless);
  qty("ul_packet_mean", tr.ul_packet_mean, Quantity::bits);
  if (tr.ul_packet_m2) {
    qty("ul_packet_moment2", *tr.ul_packet_m2, Quantity::bits_squared);
  }
  qty("dl_packet_mean", tr.dl_packet_mean, Quantity::bits);
  if (tr.dl_packet_m2) {
    qty("dl_packet_moment2", *tr.dl_packet_m2, Quantity::bits_squared);
  }
  qty("rar_window", tr.rar_window, Quantity::duration);
  qty("bs_control_rate", tr.bs_control_rate, Quantity::per_second);

  const auto& sc = config.schedule;
  out << "\n[schedule]\n";
  qty("npdcch_period", sc.npdcch_period, Quantity::duration);
  qty("nprach_unit", sc.nprach_unit, Quantity::duration);
  qty("control_tx_time", sc.control_tx_time, Quantity::duration);
  qty("ref_signal_fraction", sc.ref_signal_fraction, Quantity::dimensionless);
  qty("frame_length", sc.frame_length, Quantity::duration);
  line("max_attempts", std::to_string(sc.max_attempts));

  const auto& pw = config.power;
  out << "\n[power]\n";
  qty("pa_efficiency", pw.pa_efficiency, Quantity::dimensionless);
  qty("idle", pw.idle, Quantity::power);
  qty("circuit", pw.circuit, Quantity::power);
  qty("listen", pw.listen, Quantity::power);
  qty("tx", pw.tx_power, Quantity::power);
  qty("ack_energy", pw.ack_energy, Quantity::energy);
  qty("battery", pw.battery, Quantity::energy);

  for (std::size_t j = 0; j < config.classes.size(); ++j) {
    const auto& c = config.classes[j];
    out << "\n[class" << j + 1 << "]\n";
    line("repetitions", std::to_string(c.repetitions));
    qty("fraction", c.fraction, Quantity::dimensionless);
    line("preambles", std::to_string(c.preambles));
    qty("nprach_period", c.nprach_period, Quantity::duration);
    qty("uplink_rate", c.uplink_rate, Quantity::rate);
    qty("downlink_rate", c.downlink_rate, Quantity::rate);
    qty("sync_latency", c.sync_latency, Quantity::duration);
    if (c.tx_power) {
      qty("tx_power", *c.tx_power, Quantity::power);
    }
  }
  return out.str();
}

}  // namespace nbiot
