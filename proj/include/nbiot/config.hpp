#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace nbiot {

inline constexpr double kSecondsPerDay = 24.0 * 3600.0;

/// One coverage class. All quantities in SI base units (s, bit/s, W).
struct CoverageClass {
  int repetitions = 1;           // c_j
  double fraction = 1.0;         // f_j
  int preambles = 16;            // M_j
  double nprach_period = 0.2;    // t_j [s]
  double uplink_rate = 5000.0;   // R_j [bit/s]
  double downlink_rate = 15000.0;// RR_j [bit/s]
  double sync_latency = 0.33;    // D_sy_j [s]
  std::optional<double> tx_power;// P_t_j [W]; falls back to PowerProfile::tx_power

  bool operator==(const CoverageClass&) const = default;
};

struct TrafficConfig {
  double devices = 20000.0;           // N
  double sessions_per_day = 12.0;     // S
  double uplink_prob = 0.8;           // p
  double ul_packet_mean = 500.0;      // l1 [bit]
  std::optional<double> ul_packet_m2; // l2 [bit^2]; defaults to l1^2
  double dl_packet_mean = 5000.0;     // m1 [bit]
  std::optional<double> dl_packet_m2; // m2 [bit^2]; defaults to m1^2
  double rar_window = 2.0;            // T_th [s]
  double bs_control_rate = 100.0;     // lambda_b [1/s]

  double ul_packet_moment2() const { return ul_packet_m2.value_or(ul_packet_mean * ul_packet_mean); }
  double dl_packet_moment2() const { return dl_packet_m2.value_or(dl_packet_mean * dl_packet_mean); }

  bool operator==(const TrafficConfig&) const = default;
};

struct ScheduleConfig {
  double npdcch_period = 0.010;    // d [s]
  double nprach_unit = 0.010;      // tau [s]
  double control_tx_time = 0.002;  // u [s]
  double ref_signal_fraction = 0.2;// b
  double frame_length = 0.010;     // CF [s]
  int max_attempts = 10;           // N_rmax

  bool operator==(const ScheduleConfig&) const = default;
};

struct PowerProfile {
  double pa_efficiency = 1.0;  // xi, multiplies the transmit power
  double idle = 0.01;          // P_I [W]
  double circuit = 0.01;       // P_c [W]
  double listen = 0.1;         // P_l [W]
  double tx_power = 0.2;       // shared P_t [W]
  double ack_energy = 0.0;     // E_s [J]
  double battery = 1000.0;     // E_0 [J]

  bool operator==(const PowerProfile&) const = default;
};

enum class RachMode { faithful, corrected };

/// Switches between the formulas as printed and the consistency fixes.
struct ModelOptions {
  RachMode rach_mode = RachMode::corrected;
  /// Multiply per-attempt reservation energy by the attempt index, like the latency series.
  bool energy_attempt_multiplier = true;
  /// Use m2^2 instead of m2 inside the downlink second service moment.
  bool squared_dl_moment2 = false;
  /// Restrict repetitions to the 3GPP set {1,2,4,...,128}.
  bool strict_3gpp = false;

  bool operator==(const ModelOptions&) const = default;
};

struct SystemConfig {
  std::vector<CoverageClass> classes;
  TrafficConfig traffic;
  ScheduleConfig schedule;
  PowerProfile power;
  ModelOptions options;

  std::size_t class_count() const { return classes.size(); }
  const CoverageClass& cls(std::size_t j) const { return classes.at(j); }
  double tx_power(std::size_t j) const { return classes.at(j).tx_power.value_or(power.tx_power); }

  bool operator==(const SystemConfig&) const = default;
};

/// Table I of the reference scenario with t = 200 ms for both classes.
SystemConfig table1_config();

struct Violation {
  enum class Kind { structural, stability };
  Kind kind = Kind::structural;
  std::string field;
  std::string message;
};

struct ValidationOutcome {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool has_structural() const;
  bool has_stability() const;
  std::string summary() const;
};

ValidationOutcome validate(const SystemConfig& config);

struct ArrivalRates {
  double uplink = 0.0;   // G_u [1/s]
  double downlink = 0.0; // G_d [1/s]
  double total() const { return uplink + downlink; }
};

ArrivalRates arrival_rates(const TrafficConfig& traffic);

/// Binds every class's NPRACH period to one value.
void set_common_nprach_period(SystemConfig& config, double period);

/// Sets f_j and rescales the remaining classes so fractions still sum to one.
void set_class_fraction(SystemConfig& config, std::size_t j, double fraction);

}  // namespace nbiot
