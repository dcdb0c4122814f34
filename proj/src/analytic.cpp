#include "nbiot/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <sstream>

#include "nbiot/errors.hpp"

namespace nbiot::analytic {

namespace {

double repetitions(const SystemConfig& config, std::size_t j)
{
  return static_cast<double>(config.cls(j).repetitions);
}

double transmit_power(const SystemConfig& config, std::size_t j)
{
  return config.power.circuit + config.power.pa_efficiency * config.tx_power(j);
}

std::string class_label(std::size_t j) { return "class " + std::to_string(j + 1); }

}  // namespace

double npdcch_load(const SystemConfig& config)
{
  const double g = arrival_rates(config.traffic).total();
  const double d = config.schedule.npdcch_period;
  double q = 0.0;
  for (const auto& c : config.classes) {
    q += c.fraction * g * std::max(d, c.nprach_period);
  }
  return q + config.traffic.bs_control_rate * d;
}

double mean_control_service_time(const SystemConfig& config)
{
  double dt = 0.0;
  for (const auto& c : config.classes) {
    dt += c.fraction * static_cast<double>(c.repetitions) * config.schedule.control_tx_time;
  }
  return dt;
}

RarLatency rar_latency(const SystemConfig& config, std::size_t j)
{
  RarLatency r;
  r.waiting = 0.5 * npdcch_load(config) * mean_control_service_time(config);
  r.total = 0.5 * config.schedule.npdcch_period + r.waiting + repetitions(config, j) * config.schedule.control_tx_time;
  return r;
}

double ra_latency(const SystemConfig& config, std::size_t j)
{
  return 0.5 * config.cls(j).nprach_period + repetitions(config, j) * config.schedule.nprach_unit;
}

double contenders(const SystemConfig& config, std::size_t j)
{
  const auto& c = config.cls(j);
  return c.fraction * arrival_rates(config.traffic).total() * c.nprach_period;
}

double prach_success_faithful(double mean_contenders, double preambles, double max_k)
{
  if (mean_contenders <= 0.0) {
    return 0.0;
  }
  const double keep = std::isinf(preambles) ? 1.0 : (preambles - 1.0) / preambles;
  const double log_n = std::log(mean_contenders);
  const double log_keep = keep > 0.0 ? std::log(keep) : -std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (double k = 2.0; k <= max_k; k += 1.0) {
    const double term = std::exp(-mean_contenders + k * log_n - std::lgamma(k + 1.0) + (k - 1.0) * log_keep);
    sum += term;
    if (k > mean_contenders && term < 1e-18 * std::max(sum, 1e-300)) {
      break;
    }
    if (keep == 0.0) {
      break;
    }
  }
  return std::clamp(sum, 0.0, 1.0);
}

double prach_success_corrected(double mean_contenders, double preambles)
{
  return std::exp(-mean_contenders / preambles);
}

double prach_success_prob(const SystemConfig& config, std::size_t j)
{
  const double n = contenders(config, j);
  const double m = static_cast<double>(config.cls(j).preambles);
  if (config.options.rach_mode == RachMode::faithful) {
    return prach_success_faithful(n, m, config.traffic.devices);
  }
  return prach_success_corrected(n, m);
}

// ---------------------------------------------------------------------------
// NPDCCH service time distribution

ServiceTimeDistribution::ServiceTimeDistribution(const SystemConfig& config, int n)
    : pmf_{1.0}, unit_(config.schedule.control_tx_time)
{
  if (n < 1) {
    throw std::invalid_argument("service time distribution needs n >= 1");
  }
  int max_c = 0;
  for (const auto& c : config.classes) {
    max_c = std::max(max_c, c.repetitions);
  }
  single_.assign(static_cast<std::size_t>(max_c) + 1, 0.0);
  for (const auto& c : config.classes) {
    single_[static_cast<std::size_t>(c.repetitions)] += c.fraction;
  }
  for (int i = 0; i < n; ++i) {
    add_request();
  }
}

void ServiceTimeDistribution::truncate_above(double x)
{
  cap_ = static_cast<std::size_t>(std::max(0.0, std::floor(x / unit_ + 1e-9)));
  if (pmf_.size() > cap_ + 1) {
    pmf_.resize(cap_ + 1);
  }
}

void ServiceTimeDistribution::add_request()
{
  std::vector<double> next(pmf_.size() + single_.size() - 1, 0.0);
  for (std::size_t a = 0; a < pmf_.size(); ++a) {
    if (pmf_[a] == 0.0) {
      continue;
    }
    for (std::size_t b = 0; b < single_.size(); ++b) {
      if (single_[b] != 0.0) {
        next[a + b] += pmf_[a] * single_[b];
      }
    }
  }
  if (next.size() > cap_ + 1) {
    next.resize(cap_ + 1);
  }
  pmf_ = std::move(next);
  ++requests_;
}

double ServiceTimeDistribution::cdf(double x) const
{
  if (x < 0.0) {
    return 0.0;
  }
  // Lattice points k*unit <= x, with slack for representation error at the jumps.
  const double k_max = std::floor(x / unit_ + 1e-9);
  const auto last = static_cast<std::size_t>(std::min<double>(k_max, static_cast<double>(pmf_.size() - 1)));
  double sum = 0.0;
  for (std::size_t k = 0; k <= last; ++k) {
    sum += pmf_[k];
  }
  return std::min(sum, 1.0);
}

double service_time_cdf(const SystemConfig& config, int n, double x)
{
  if (n < 1) {
    throw std::invalid_argument("service_time_cdf needs n >= 1");
  }
  return ServiceTimeDistribution(config, n).cdf(x);
}

double rar_timely_prob(const SystemConfig& config, std::size_t /*j*/)
{
  const double q = npdcch_load(config);
  if (q <= 0.0) {
    return 1.0;
  }
  const double threshold = config.traffic.rar_window;

  // Outer Poisson series: stop where the remaining tail mass is < 1e-12.
  std::vector<double> poisson;
  double cumulative = 0.0;
  for (int k = 0;; ++k) {
    const double pk = std::exp(-q + k * std::log(q) - std::lgamma(k + 1.0));
    poisson.push_back(pk);
    cumulative += pk;
    if (k >= 2 && k > q && 1.0 - cumulative < 1e-12) {
      break;
    }
  }
  const int k_max = static_cast<int>(poisson.size()) - 1;

  // F_n(T_th) for n = 0..k_max-1, with F_0 = 1.
  std::vector<double> f_at_threshold{1.0};
  ServiceTimeDistribution dist(config, 1);
  dist.truncate_above(threshold);
  for (int n = 1; n < k_max; ++n) {
    f_at_threshold.push_back(dist.cdf(threshold));
    dist.add_request();
  }

  double loss = 0.0;
  for (int big_k = 2; big_k <= k_max; ++big_k) {
    double inner = 0.0;
    for (int k = 1; k <= big_k - 1; ++k) {
      const double late = 1.0 - f_at_threshold[static_cast<std::size_t>(big_k - k)];
      inner += (static_cast<double>(k) / big_k) * late * f_at_threshold[static_cast<std::size_t>(big_k - k - 1)];
    }
    loss += poisson[static_cast<std::size_t>(big_k)] * inner;
  }
  return std::clamp(1.0 - loss, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Resource reservation

double attempt_multiplier(double success_prob, int max_attempts)
{
  double sum = 0.0;
  double fail_pow = 1.0;
  for (int l = 1; l <= max_attempts; ++l) {
    sum += fail_pow * success_prob * l;
    fail_pow *= 1.0 - success_prob;
  }
  return sum;
}

double attempt_mass(double success_prob, int max_attempts)
{
  double sum = 0.0;
  double fail_pow = 1.0;
  for (int l = 1; l <= max_attempts; ++l) {
    sum += fail_pow * success_prob;
    fail_pow *= 1.0 - success_prob;
  }
  return sum;
}

namespace {

double ra_energy(const SystemConfig& config, std::size_t j, double d_ra)
{
  const double tx_time = repetitions(config, j) * config.schedule.nprach_unit;
  return (d_ra - tx_time) * config.power.idle + tx_time * transmit_power(config, j);
}

}  // namespace

ResourceReservation resource_reservation(const SystemConfig& config, std::size_t j)
{
  ResourceReservation r;
  r.prach = prach_success_prob(config, j);
  r.rar = rar_timely_prob(config, j);
  r.success_prob = r.prach * r.rar;
  r.low_success = r.success_prob < 0.05;

  const double d_ra = ra_latency(config, j);
  const double d_rar = rar_latency(config, j).total;
  const int n_max = config.schedule.max_attempts;
  const double multiplier = attempt_multiplier(r.success_prob, n_max);
  r.latency = multiplier * (d_ra + d_rar);

  const double per_attempt = ra_energy(config, j, d_ra) + config.power.listen * d_rar;
  const double energy_weight =
      config.options.energy_attempt_multiplier ? multiplier : attempt_mass(r.success_prob, n_max);
  r.energy = energy_weight * per_attempt;
  return r;
}

// ---------------------------------------------------------------------------
// Duty fractions and data-channel queues

double uplink_duty_raw(const SystemConfig& config)
{
  double used = 0.0;
  for (const auto& c : config.classes) {
    used += static_cast<double>(c.repetitions) * config.schedule.nprach_unit / c.nprach_period;
  }
  return 1.0 - used;
}

double downlink_duty_raw(const SystemConfig& config)
{
  const auto& s = config.schedule;
  return 1.0 - s.ref_signal_fraction - npdcch_load(config) / s.npdcch_period * mean_control_service_time(config);
}

double uplink_duty(const SystemConfig& config)
{
  const double w = uplink_duty_raw(config);
  if (!(w > 0.0 && w <= 1.0)) {
    std::ostringstream msg;
    msg << "uplink duty fraction w = " << w << " outside (0, 1]: NPRACH windows (repetitions * nprach_unit / "
        << "nprach_period) fill the uplink frame";
    throw StabilityError(msg.str(), {{"w", w}});
  }
  return w;
}

double downlink_duty(const SystemConfig& config)
{
  const double y = downlink_duty_raw(config);
  if (!(y > 0.0 && y <= 1.0)) {
    std::ostringstream msg;
    msg << "downlink duty fraction y = " << y << " outside (0, 1]: reference signals (b) and NPDCCH load "
        << "(Q = " << npdcch_load(config) << ", d = " << config.schedule.npdcch_period << ") fill the downlink frame";
    throw StabilityError(msg.str(), {{"y", y}, {"Q", npdcch_load(config)}});
  }
  return y;
}

namespace {

BatchQueue data_queue(const SystemConfig& config, double arrival_rate, double packet_m1, double packet_m2, double duty,
                      bool downlink)
{
  BatchQueue q;
  const auto n_classes = static_cast<double>(config.class_count());
  for (const auto& c : config.classes) {
    const double rate = downlink ? c.downlink_rate : c.uplink_rate;
    const double reps = static_cast<double>(c.repetitions);
    q.batch_mean += c.fraction * arrival_rate * c.nprach_period;
    q.s1 += c.fraction * reps * packet_m1 / (rate * duty);
    q.s2 += c.fraction * reps * reps * packet_m2 / (rate * rate * duty * duty);
  }
  q.batch_mean /= n_classes;
  for (const auto& c : config.classes) {
    q.load += q.batch_mean * q.s1 / c.nprach_period;
  }
  return q;
}

}  // namespace

BatchQueue uplink_queue(const SystemConfig& config)
{
  const auto& tr = config.traffic;
  return data_queue(config, arrival_rates(tr).uplink, tr.ul_packet_mean, tr.ul_packet_moment2(), uplink_duty(config),
                    false);
}

BatchQueue downlink_queue(const SystemConfig& config)
{
  const auto& tr = config.traffic;
  const double m2 = config.options.squared_dl_moment2 ? tr.dl_packet_moment2() * tr.dl_packet_moment2()
                                                      : tr.dl_packet_moment2();
  return data_queue(config, arrival_rates(tr).downlink, tr.dl_packet_mean, m2, downlink_duty(config), true);
}

double bpp_g1_sojourn(double load, double s1, double s2, double batch_excess, double own_service)
{
  const double idle = 1.0 - load;
  return load * s2 / (2.0 * s1 * idle) + batch_excess * s1 / (2.0 * idle) + own_service;
}

double uplink_bare_time(const SystemConfig& config, std::size_t j)
{
  return repetitions(config, j) * config.traffic.ul_packet_mean / (config.cls(j).uplink_rate * uplink_duty(config));
}

double downlink_bare_time(const SystemConfig& config, std::size_t j)
{
  return repetitions(config, j) * config.traffic.dl_packet_mean /
         (config.cls(j).downlink_rate * downlink_duty(config));
}

namespace {

void require_stable(const char* name, const BatchQueue& q, double duty, const char* duty_name)
{
  if (q.load >= 1.0) {
    std::ostringstream msg;
    msg << name << " = " << q.load << " >= 1 (batch mean " << q.batch_mean << ", service moments " << q.s1 << ", "
        << q.s2 << ", " << duty_name << " = " << duty << ")";
    throw StabilityError(msg.str(),
                         {{name, q.load}, {"batch_mean", q.batch_mean}, {"s1", q.s1}, {"s2", q.s2}, {duty_name, duty}});
  }
}

}  // namespace

double uplink_tx_latency(const SystemConfig& config, std::size_t j)
{
  const auto q = uplink_queue(config);
  require_stable("rho", q, uplink_duty(config), "w");
  return bpp_g1_sojourn(q.load, q.s1, q.s2, q.batch_mean, uplink_bare_time(config, j));
}

double downlink_rx_latency(const SystemConfig& config, std::size_t j)
{
  const auto q = downlink_queue(config);
  require_stable("nu", q, downlink_duty(config), "y");
  return bpp_g1_sojourn(q.load, q.s1, q.s2, q.batch_mean, downlink_bare_time(config, j));
}

// ---------------------------------------------------------------------------
// Energy and lifetime

EnergyLedger energy_ledger(const SystemConfig& config, std::size_t j)
{
  const auto& pw = config.power;
  EnergyLedger e;
  const double d_ra = ra_latency(config, j);
  const double d_rar = rar_latency(config, j).total;
  e.sync = pw.listen * config.cls(j).sync_latency;
  e.rar = pw.listen * d_rar;
  e.ra = ra_energy(config, j, d_ra);
  e.reservation = resource_reservation(config, j).energy;

  const double bare_tx = uplink_bare_time(config, j);
  e.tx = (uplink_tx_latency(config, j) - bare_tx) * pw.idle + transmit_power(config, j) * bare_tx;
  const double bare_rx = downlink_bare_time(config, j);
  e.rx = (downlink_rx_latency(config, j) - bare_rx) * pw.idle + pw.listen * bare_rx;

  e.uplink = e.sync + e.reservation + e.tx + pw.ack_energy;
  e.downlink = e.sync + e.reservation + e.rx + pw.ack_energy;
  return e;
}

double lifetime_days(double battery, double sessions_per_day, double uplink_prob, double uplink_energy,
                     double downlink_energy)
{
  const double daily = sessions_per_day * (uplink_prob * uplink_energy + (1.0 - uplink_prob) * downlink_energy);
  if (!(daily > 0.0)) {
    throw ConfigError("daily energy consumption is zero: lifetime is unbounded");
  }
  return battery / daily;
}

double lifetime(const SystemConfig& config, std::size_t j)
{
  const auto e = energy_ledger(config, j);
  return lifetime_days(config.power.battery, config.traffic.sessions_per_day, config.traffic.uplink_prob, e.uplink,
                       e.downlink);
}

// ---------------------------------------------------------------------------

AnalyticReport evaluate(const SystemConfig& config)
{
  const auto outcome = validate(config);
  if (outcome.has_structural()) {
    std::vector<std::string> messages;
    for (const auto& v : outcome.violations) {
      messages.push_back(v.field + ": " + v.message);
    }
    throw ConfigError("invalid configuration", messages);
  }

  AnalyticReport r;
  const auto rates = arrival_rates(config.traffic);
  r.G_u = rates.uplink;
  r.G_d = rates.downlink;
  r.Q = npdcch_load(config);
  r.DD_t = mean_control_service_time(config);
  r.D_w = 0.5 * r.Q * r.DD_t;

  // Collect every load figure before deciding on stability so the error can report them all.
  std::map<std::string, double> figures;
  std::vector<std::string> problems;
  const double w = uplink_duty_raw(config);
  const double y = downlink_duty_raw(config);
  figures["w"] = w;
  figures["y"] = y;
  if (!(w > 0.0 && w <= 1.0)) {
    problems.push_back("w = " + std::to_string(w) + " <= 0");
  } else {
    const auto up = uplink_queue(config);
    figures["rho"] = up.load;
    if (up.load >= 1.0) {
      problems.push_back("rho = " + std::to_string(up.load) + " >= 1");
    }
  }
  if (!(y > 0.0 && y <= 1.0)) {
    problems.push_back("y = " + std::to_string(y) + " <= 0");
  } else {
    const auto down = downlink_queue(config);
    figures["nu"] = down.load;
    if (down.load >= 1.0) {
      problems.push_back("nu = " + std::to_string(down.load) + " >= 1");
    }
  }
  if (!problems.empty()) {
    std::string msg = "unstable operating point:";
    for (const auto& p : problems) {
      msg += " " + p + ";";
    }
    throw StabilityError(msg, figures);
  }

  r.w = w;
  r.y = y;
  const auto up = uplink_queue(config);
  const auto down = downlink_queue(config);
  r.G_batch = up.batch_mean;
  r.s1 = up.s1;
  r.s2 = up.s2;
  r.rho = up.load;
  r.GG_batch = down.batch_mean;
  r.h1 = down.s1;
  r.h2 = down.s2;
  r.nu = down.load;
  if (r.rho > 0.95) {
    r.diagnostics.push_back("uplink load rho = " + std::to_string(r.rho) + " is close to saturation");
  }
  if (r.nu > 0.95) {
    r.diagnostics.push_back("downlink load nu = " + std::to_string(r.nu) + " is close to saturation");
  }

  for (std::size_t j = 0; j < config.class_count(); ++j) {
    ClassMetrics m;
    m.D_sy = config.cls(j).sync_latency;
    m.D_ra = ra_latency(config, j);
    m.D_rar = rar_latency(config, j).total;
    const auto rr = resource_reservation(config, j);
    m.D_rr = rr.latency;
    m.contenders = contenders(config, j);
    m.P_rach = rr.prach;
    m.P_rar = rr.rar;
    m.P = rr.success_prob;
    if (rr.low_success) {
      r.diagnostics.push_back(class_label(j) + ": reservation success probability " + std::to_string(rr.success_prob) +
                              " < 0.05, D_rr is dominated by the attempt cap");
    }
    m.D_tx = bpp_g1_sojourn(up.load, up.s1, up.s2, up.batch_mean, uplink_bare_time(config, j));
    m.D_rx = bpp_g1_sojourn(down.load, down.s1, down.s2, down.batch_mean, downlink_bare_time(config, j));
    m.D_u = m.D_sy + m.D_rr + m.D_tx;
    m.D_d = m.D_sy + m.D_rr + m.D_rx;

    const auto e = energy_ledger(config, j);
    m.E_sy = e.sync;
    m.E_ra = e.ra;
    m.E_rar = e.rar;
    m.E_rr = e.reservation;
    m.E_tx = e.tx;
    m.E_rx = e.rx;
    m.E_u = e.uplink;
    m.E_d = e.downlink;
    m.L = lifetime_days(config.power.battery, config.traffic.sessions_per_day, config.traffic.uplink_prob, e.uplink,
                        e.downlink);
    r.classes.push_back(m);
  }
  return r;
}

}  // namespace nbiot::analytic
