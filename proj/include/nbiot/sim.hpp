#pragma once

// Discrete-event simulator of the NB-IoT access queuing system: devices
// synchronize, contend on NPRACH, wait for their RAR on NPDCCH and then move
// data over NPUSCH/NPDSCH, while an energy ledger follows their power states.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nbiot/config.hpp"
#include "nbiot/stats.hpp"

namespace nbiot::sim {

enum class Direction : std::uint8_t { uplink, downlink };

enum class PowerState : std::uint8_t { sleep, listen, idle, transmit, receive };

enum class EventKind : std::uint8_t {
  arrival,       // sync starts
  sync_done,     // waiting for the class's NPRACH window
  ra_start,      // preamble transmission
  ra_end,        // listening for the RAR
  ra_collision,  // preamble collided, failure detected
  rar_timeout,   // RAR not delivered within T_th
  rar_received,  // waiting for the data channel
  data_start,
  data_end,
  ack,           // lump energy E_s
  abandoned,
};

const char* to_string(Direction d);
const char* to_string(PowerState s);
const char* to_string(EventKind k);

struct LogEntry {
  double time = 0.0;
  EventKind kind = EventKind::arrival;
  PowerState state = PowerState::sleep;  // state entered at `time`
  double power = 0.0;                    // W drawn in that state
  double lump = 0.0;                     // J charged instantaneously at `time`
  bool operator==(const LogEntry&) const = default;
};

/// Integral of the piecewise-constant power trace plus lumps, in log order.
double replay_energy(const std::vector<LogEntry>& log);

enum class AttemptOutcome : std::uint8_t { pending, success, collision, timeout };

struct Attempt {
  double window_start = 0.0;
  double window_end = 0.0;
  int preamble = 0;
  AttemptOutcome outcome = AttemptOutcome::pending;
  bool operator==(const Attempt&) const = default;
};

enum class Terminal : std::uint8_t { in_flight, served, abandoned };

struct DeviceSession {
  std::uint64_t id = 0;
  std::size_t cls = 0;
  Direction direction = Direction::uplink;
  double packet_bits = 0.0;
  double arrival = 0.0;
  double sync_end = 0.0;
  std::vector<Attempt> attempts;
  double rar_delivery = -1.0;
  double data_start = -1.0;
  double data_end = -1.0;
  double energy = 0.0;
  Terminal terminal = Terminal::in_flight;
  std::vector<LogEntry> log;

  int attempt_count() const { return static_cast<int>(attempts.size()); }
  double latency() const { return data_end - arrival; }
  bool operator==(const DeviceSession&) const = default;
};

struct ScriptedArrival {
  double time = 0.0;
  std::size_t cls = 0;
  Direction direction = Direction::uplink;
  std::optional<double> packet_bits;  // defaults to the configured mean
};

struct TraceFilter {
  std::optional<std::uint64_t> session;
  std::optional<std::size_t> cls;
  std::optional<Direction> direction;
  std::size_t limit = 100;
};

struct SimOptions {
  std::uint64_t seed = 1;
  double horizon = 3600.0;
  double warmup = 360.0;
  /// When set, these arrivals replace the Poisson session process.
  std::optional<std::vector<ScriptedArrival>> script;
  /// Keep complete session records matching the filter in the report.
  std::optional<TraceFilter> trace;
  /// Raise UnderSampledError when a class has no served session after warmup.
  bool require_samples = true;
  std::size_t ci_batches = 20;
};

struct ClassSimReport {
  stats::Estimate D_u, D_d;
  stats::Estimate E_u, E_d;
  double L = 0.0;  // lifetime implied by the mean session energies [days]

  std::uint64_t generated = 0, served = 0, abandoned = 0, in_flight = 0;
  std::uint64_t attempts = 0, collisions = 0, rar_timeouts = 0;
  std::uint64_t windows = 0;
  double preamble_success_rate = 0.0;  // successful preambles / preambles sent
  double mean_contenders = 0.0;        // preambles per NPRACH window
  std::vector<std::uint64_t> attempts_histogram;  // served sessions by attempts used (index 0 = 1 attempt)

  bool operator==(const ClassSimReport&) const = default;
};

struct SimReport {
  std::uint64_t seed = 0;
  double horizon = 0.0;
  double warmup = 0.0;
  std::vector<ClassSimReport> classes;

  std::uint64_t generated = 0, served = 0, abandoned = 0, in_flight = 0;
  std::uint64_t collisions = 0, rar_timeouts = 0;

  // Measured channel occupancy over [warmup, horizon).
  double w = 0.0, y = 0.0, rho = 0.0, nu = 0.0;
  double npdcch_fraction = 0.0;

  // NPDCCH queue, for the Little's-law check.
  double npdcch_arrival_rate = 0.0;
  double npdcch_mean_sojourn = 0.0;
  double npdcch_mean_queue = 0.0;

  std::vector<DeviceSession> traced;
  /// Per-replication reports when produced by run_replicated.
  std::vector<SimReport> replications;

  bool operator==(const SimReport&) const = default;
};

SimReport run(const SystemConfig& config, const SimOptions& options);
SimReport run(const SystemConfig& config, std::uint64_t seed, double horizon, double warmup);

/// Independent replications; pooled estimates use the across-replication t-interval.
SimReport run_replicated(const SystemConfig& config, const std::vector<std::uint64_t>& seeds, double horizon,
                         double warmup);

/// Session records with their event logs.
std::vector<DeviceSession> trace(const SystemConfig& config, std::uint64_t seed, double horizon,
                                 const TraceFilter& filter);

}  // namespace nbiot::sim
