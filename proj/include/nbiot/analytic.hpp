#pragma once

// Closed-form latency, energy and lifetime model of NB-IoT channel scheduling.
//
// Every function takes the class index j zero-based. Latencies are in seconds,
// energies in joules, lifetimes in days.

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "nbiot/config.hpp"

namespace nbiot::analytic {

/// Expected number of requests found in the NPDCCH queue when the downlink server visits it.
double npdcch_load(const SystemConfig& config);

/// Mean NPDCCH service time over the class mixture, sum_j f_j c_j u.
double mean_control_service_time(const SystemConfig& config);

struct RarLatency {
  double total = 0.0;   // D_rar_j
  double waiting = 0.0; // D_w, queueing behind earlier requests at the visit
};

RarLatency rar_latency(const SystemConfig& config, std::size_t j);

/// Wait for the class's NPRACH window plus the preamble transmission.
double ra_latency(const SystemConfig& config, std::size_t j);

/// Expected contenders per NPRACH window of class j, f_j (G_u + G_d) t_j.
double contenders(const SystemConfig& config, std::size_t j);

/// Preamble success probability as printed: sum_{k=2}^{max_k} Pois(k; n) ((M-1)/M)^(k-1).
/// `preambles` may be +infinity.
double prach_success_faithful(double mean_contenders, double preambles, double max_k);

/// Survival of a tagged device against Poisson contenders that each pick its preamble w.p. 1/M.
double prach_success_corrected(double mean_contenders, double preambles);

double prach_success_prob(const SystemConfig& config, std::size_t j);

/// Lattice distribution of the summed NPDCCH service time of n requests, each
/// drawn from the class mixture (c_j u with weight f_j). Support is k*u for integer k.
class ServiceTimeDistribution {
public:
  ServiceTimeDistribution(const SystemConfig& config, int n);

  /// Convolves one more request into the distribution (n -> n+1).
  void add_request();

  /// Drops mass above x. Every request adds at least one unit, so the CDF stays
  /// exact for arguments <= x.
  void truncate_above(double x);

  int requests() const { return requests_; }
  double unit() const { return unit_; }
  /// pmf()[k] is P(total = k * unit).
  const std::vector<double>& pmf() const { return pmf_; }
  /// Right-continuous CDF.
  double cdf(double x) const;

private:
  std::vector<double> single_;
  std::vector<double> pmf_;
  double unit_;
  std::size_t cap_ = std::numeric_limits<std::size_t>::max() - 1;
  int requests_ = 0;
};

/// F_n(x); rejects n < 1.
double service_time_cdf(const SystemConfig& config, int n, double x);

/// Probability that the RAR is delivered within T_th, truncated where the Poisson tail of Q is < 1e-12.
double rar_timely_prob(const SystemConfig& config, std::size_t j);

/// sum_{l=1}^{n_max} (1-P)^(l-1) P l
double attempt_multiplier(double success_prob, int max_attempts);
/// sum_{l=1}^{n_max} (1-P)^(l-1) P
double attempt_mass(double success_prob, int max_attempts);

struct ResourceReservation {
  double success_prob = 0.0; // P_j
  double prach = 0.0;        // P_RACH_j
  double rar = 0.0;          // P_RAR_j
  double latency = 0.0;      // D_rr_j
  double energy = 0.0;       // E_rr_j
  bool low_success = false;  // P_j < 0.05, series dominated by truncation
};

ResourceReservation resource_reservation(const SystemConfig& config, std::size_t j);

/// Raw duty fractions, no stability check.
double uplink_duty_raw(const SystemConfig& config);
double downlink_duty_raw(const SystemConfig& config);

/// Duty fractions; throw StabilityError when not in (0, 1].
double uplink_duty(const SystemConfig& config);
double downlink_duty(const SystemConfig& config);

/// Batch-Poisson queue figures for one data channel.
struct BatchQueue {
  double batch_mean = 0.0; // mean batch size per NPRACH opportunity
  double s1 = 0.0;         // first moment of the stretched service time
  double s2 = 0.0;         // second moment
  double load = 0.0;       // rho or nu
};

BatchQueue uplink_queue(const SystemConfig& config);
BatchQueue downlink_queue(const SystemConfig& config);

/// Sojourn time in a BPP/G/1 queue:
///   load*s2 / (2 s1 (1-load)) + batch_excess*s1 / (2 (1-load)) + own_service
/// where batch_excess = E[X(X-1)]/E[X] for batch size X (equal to the mean batch
/// for Poisson-sized batches, 0 for single arrivals).
double bpp_g1_sojourn(double load, double s1, double s2, double batch_excess, double own_service);

/// Bare (stretched) transmission time of one class-j packet.
double uplink_bare_time(const SystemConfig& config, std::size_t j);
double downlink_bare_time(const SystemConfig& config, std::size_t j);

double uplink_tx_latency(const SystemConfig& config, std::size_t j);
double downlink_rx_latency(const SystemConfig& config, std::size_t j);

struct EnergyLedger {
  double sync = 0.0;        // E_sy
  double ra = 0.0;          // E_ra
  double rar = 0.0;         // E_rar
  double reservation = 0.0; // E_rr
  double tx = 0.0;          // E_tx
  double rx = 0.0;          // E_rx
  double uplink = 0.0;      // E_u, including E_s
  double downlink = 0.0;    // E_d, including E_s
};

EnergyLedger energy_ledger(const SystemConfig& config, std::size_t j);

/// E_0 / (S p E_u + S (1-p) E_d), in days.
double lifetime_days(double battery, double sessions_per_day, double uplink_prob, double uplink_energy,
                     double downlink_energy);
double lifetime(const SystemConfig& config, std::size_t j);

struct ClassMetrics {
  double D_sy = 0, D_ra = 0, D_rar = 0, D_rr = 0, D_tx = 0, D_rx = 0, D_u = 0, D_d = 0;
  double E_sy = 0, E_ra = 0, E_rar = 0, E_rr = 0, E_tx = 0, E_rx = 0, E_u = 0, E_d = 0;
  double L = 0;
  double contenders = 0, P_rach = 0, P_rar = 0, P = 0;

  bool operator==(const ClassMetrics&) const = default;
};

struct AnalyticReport {
  std::vector<ClassMetrics> classes;
  double G_u = 0, G_d = 0;
  double Q = 0, DD_t = 0, D_w = 0;
  double w = 0, y = 0;
  double G_batch = 0, GG_batch = 0;
  double s1 = 0, s2 = 0, h1 = 0, h2 = 0;
  double rho = 0, nu = 0;
  std::vector<std::string> diagnostics;

  bool operator==(const AnalyticReport&) const = default;
};

/// Full evaluation. Throws StabilityError (w, y, rho, nu) and ConfigError (invalid config).
AnalyticReport evaluate(const SystemConfig& config);

}  // namespace nbiot::analytic
