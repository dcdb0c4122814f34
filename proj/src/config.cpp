#include "nbiot/config.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "nbiot/analytic.hpp"

namespace nbiot {

SystemConfig table1_config()
{
  SystemConfig config;
  CoverageClass c1;
  c1.repetitions = 1;
  c1.fraction = 0.5;
  c1.sync_latency = 0.33;
  CoverageClass c2 = c1;
  c2.repetitions = 2;
  c2.sync_latency = 0.66;
  config.classes = {c1, c2};
  return config;
}

bool ValidationOutcome::has_structural() const
{
  return std::any_of(violations.begin(), violations.end(),
                     [](const Violation& v) { return v.kind == Violation::Kind::structural; });
}

bool ValidationOutcome::has_stability() const
{
  return std::any_of(violations.begin(), violations.end(),
                     [](const Violation& v) { return v.kind == Violation::Kind::stability; });
}

std::string ValidationOutcome::summary() const
{
  std::ostringstream out;
  for (const auto& v : violations) {
    out << v.field << ": " << v.message << '\n';
  }
  return out.str();
}

namespace {

class Checker {
public:
  void require(bool condition, const std::string& field, const std::string& message,
               Violation::Kind kind = Violation::Kind::structural)
  {
    if (!condition) {
      outcome_.violations.push_back({kind, field, message});
    }
  }

  ValidationOutcome take() { return std::move(outcome_); }

private:
  ValidationOutcome outcome_;
};

std::string fmt_number(double v)
{
  std::ostringstream out;
  out.precision(6);
  out << v;
  return out.str();
}

bool finite_positive(double v) { return std::isfinite(v) && v > 0.0; }
bool finite_nonnegative(double v) { return std::isfinite(v) && v >= 0.0; }

}  // namespace

ValidationOutcome validate(const SystemConfig& config)
{
  Checker check;
  constexpr std::array<int, 8> kRepetitions3gpp{1, 2, 4, 8, 16, 32, 64, 128};

  check.require(!config.classes.empty(), "classes", "at least one coverage class is required");

  double fraction_sum = 0.0;
  for (std::size_t j = 0; j < config.classes.size(); ++j) {
    const auto& c = config.classes[j];
    const std::string prefix = "class" + std::to_string(j + 1) + ".";
    check.require(c.repetitions >= 1, prefix + "repetitions", "must be a positive integer");
    if (config.options.strict_3gpp) {
      check.require(std::find(kRepetitions3gpp.begin(), kRepetitions3gpp.end(), c.repetitions) !=
                        kRepetitions3gpp.end(),
                    prefix + "repetitions", "must be one of 1,2,4,...,128 under strict 3GPP validation");
    }
    check.require(c.fraction >= 0.0 && c.fraction <= 1.0, prefix + "fraction", "must lie in [0, 1]");
    check.require(c.preambles >= 1, prefix + "preambles", "must be >= 1");
    check.require(finite_positive(c.nprach_period), prefix + "nprach_period", "must be > 0");
    check.require(finite_positive(c.uplink_rate), prefix + "uplink_rate", "must be > 0");
    check.require(finite_positive(c.downlink_rate), prefix + "downlink_rate", "must be > 0");
    check.require(finite_nonnegative(c.sync_latency), prefix + "sync_latency", "must be >= 0");
    if (c.tx_power) {
      check.require(finite_nonnegative(*c.tx_power), prefix + "tx_power", "must be >= 0");
    }
    fraction_sum += c.fraction;
  }
  if (!config.classes.empty()) {
    check.require(std::abs(fraction_sum - 1.0) <= 1e-9, "classes.fraction",
                  "class fractions sum to " + fmt_number(fraction_sum) + ", expected 1");
  }

  const auto& tr = config.traffic;
  check.require(std::isfinite(tr.devices) && tr.devices >= 1.0, "traffic.devices", "must be >= 1");
  check.require(finite_positive(tr.sessions_per_day), "traffic.sessions", "must be > 0");
  check.require(tr.uplink_prob >= 0.0 && tr.uplink_prob <= 1.0, "traffic.uplink_prob", "must lie in [0, 1]");
  check.require(finite_positive(tr.ul_packet_mean), "traffic.ul_packet_mean", "must be > 0");
  check.require(finite_positive(tr.dl_packet_mean), "traffic.dl_packet_mean", "must be > 0");
  check.require(tr.ul_packet_moment2() >= tr.ul_packet_mean * tr.ul_packet_mean * (1.0 - 1e-12),
                "traffic.ul_packet_moment2", "second moment must be >= l1^2");
  check.require(tr.dl_packet_moment2() >= tr.dl_packet_mean * tr.dl_packet_mean * (1.0 - 1e-12),
                "traffic.dl_packet_moment2", "second moment must be >= m1^2");
  check.require(finite_positive(tr.rar_window), "traffic.rar_window", "must be > 0");
  check.require(finite_nonnegative(tr.bs_control_rate), "traffic.bs_control_rate", "must be >= 0");

  const auto& s = config.schedule;
  check.require(finite_positive(s.npdcch_period), "schedule.npdcch_period", "must be > 0");
  check.require(finite_positive(s.nprach_unit), "schedule.nprach_unit", "must be > 0");
  check.require(finite_positive(s.control_tx_time), "schedule.control_tx_time", "must be > 0");
  check.require(s.ref_signal_fraction > 0.0 && s.ref_signal_fraction < 1.0, "schedule.ref_signal_fraction",
                "must lie in (0, 1)");
  check.require(finite_positive(s.frame_length), "schedule.frame_length", "must be > 0");
  check.require(s.max_attempts >= 1, "schedule.max_attempts", "must be >= 1");

  const auto& p = config.power;
  check.require(finite_nonnegative(p.pa_efficiency), "power.pa_efficiency", "must be >= 0");
  check.require(finite_nonnegative(p.idle), "power.idle", "must be >= 0");
  check.require(finite_nonnegative(p.circuit), "power.circuit", "must be >= 0");
  check.require(finite_nonnegative(p.listen), "power.listen", "must be >= 0");
  check.require(finite_nonnegative(p.tx_power), "power.tx", "must be >= 0");
  check.require(finite_nonnegative(p.ack_energy), "power.ack_energy", "must be >= 0");
  check.require(finite_positive(p.battery), "power.battery", "must be > 0");

  ValidationOutcome outcome = check.take();
  if (outcome.ok()) {
    // Duty fractions only make sense on a structurally valid config.
    const double w = analytic::uplink_duty_raw(config);
    if (!(w > 0.0)) {
      outcome.violations.push_back({Violation::Kind::stability, "schedule",
                                    "uplink duty fraction w = " + fmt_number(w) + " must be > 0"});
    }
    const double y = analytic::downlink_duty_raw(config);
    if (!(y > 0.0)) {
      outcome.violations.push_back({Violation::Kind::stability, "schedule",
                                    "downlink duty fraction y = " + fmt_number(y) + " must be > 0"});
    }
  }
  return outcome;
}

ArrivalRates arrival_rates(const TrafficConfig& traffic)
{
  const double sessions = traffic.devices * traffic.sessions_per_day / kSecondsPerDay;
  return {sessions * traffic.uplink_prob, sessions * (1.0 - traffic.uplink_prob)};
}

void set_common_nprach_period(SystemConfig& config, double period)
{
  for (auto& c : config.classes) {
    c.nprach_period = period;
  }
}

void set_class_fraction(SystemConfig& config, std::size_t j, double fraction)
{
  auto& classes = config.classes;
  double others = 0.0;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (i != j) {
      others += classes[i].fraction;
    }
  }
  const double remaining = 1.0 - fraction;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (i == j) {
      classes[i].fraction = fraction;
    } else if (others > 0.0) {
      classes[i].fraction *= remaining / others;
    } else {
      classes[i].fraction = remaining / static_cast<double>(classes.size() - 1);
    }
  }
}

}  // namespace nbiot
