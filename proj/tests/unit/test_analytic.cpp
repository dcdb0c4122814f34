#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "nbiot/analytic.hpp"
#include "nbiot/errors.hpp"
#include "support/oracles.hpp"
#include "support/random_config.hpp"

using namespace nbiot;
using namespace nbiot::analytic;

namespace {

constexpr double kRel = 1e-6;

SystemConfig fig4_point()
{
  auto c = table1_config();
  c.traffic.sessions_per_day = 6.0;
  c.traffic.ul_packet_mean = 200.0;
  return c;
}

SystemConfig fig5_point()
{
  auto c = table1_config();
  c.traffic.sessions_per_day = 6.0;
  c.schedule.nprach_unit = 0.002;
  set_common_nprach_period(c, 0.065);
  return c;
}

void check_frozen(const SystemConfig& c, std::size_t j, double du, double dd, double life)
{
  const auto r = evaluate(c);
  CHECK(r.classes[j].D_u == doctest::Approx(du).epsilon(kRel));
  CHECK(r.classes[j].D_d == doctest::Approx(dd).epsilon(kRel));
  CHECK(r.classes[j].L == doctest::Approx(life).epsilon(kRel));
}

// Dyadic fractions and small repetition counts keep every lattice probability exact.
SystemConfig dyadic_mixture(std::mt19937_64& rng, std::vector<oracle::ClassService>& mirror)
{
  static const std::vector<std::vector<double>> splits{{1.0}, {0.5, 0.5}, {0.75, 0.25}, {0.5, 0.25, 0.25},
                                                        {0.125, 0.375, 0.5}};
  std::uniform_int_distribution<std::size_t> pick(0, splits.size() - 1);
  std::uniform_int_distribution<int> reps(1, 5);
  auto c = table1_config();
  c.classes.clear();
  mirror.clear();
  for (double f : splits[pick(rng)]) {
    CoverageClass k;
    k.fraction = f;
    k.repetitions = reps(rng);
    c.classes.push_back(k);
    mirror.push_back({k.repetitions, f});
  }
  return c;
}

}  // namespace

TEST_SUITE("analytic") {

TEST_CASE("frozen reference outputs")
{
  const auto t1 = table1_config();
  check_frozen(t1, 0, 0.664579411375, 5.86808984781, 963.769063061);
  check_frozen(t1, 1, 1.12443662249, 7.2103000001, 515.768916103);

  check_frozen(fig4_point(), 0, 0.50460507059, 1.60828675603, 2700.81538787);
  check_frozen(fig4_point(), 1, 0.89376851421, 2.75039137612, 1378.14289399);

  check_frozen(fig5_point(), 0, 0.507730454902, 1.32908917214, 2454.05234078);
  check_frozen(fig5_point(), 1, 0.951911247083, 2.36794628777, 1242.46425838);

  auto plain = table1_config();
  plain.options.energy_attempt_multiplier = false;
  const auto r = evaluate(plain);
  CHECK(r.classes[0].L == doctest::Approx(964.557013922).epsilon(kRel));
  CHECK(r.classes[1].L == doctest::Approx(516.123219277).epsilon(kRel));
}

TEST_CASE("intermediate quantities of the reference scenario")
{
  const auto c = table1_config();
  const auto r = evaluate(c);
  CHECK(r.G_u == doctest::Approx(20000.0 * 12.0 * 0.8 / 86400.0).epsilon(1e-12));
  CHECK(r.G_d == doctest::Approx(20000.0 * 12.0 * 0.2 / 86400.0).epsilon(1e-12));
  CHECK(r.Q == doctest::Approx(1.5556).epsilon(1e-4));
  CHECK(r.DD_t == doctest::Approx(0.003).epsilon(1e-12));
  CHECK(r.w == doctest::Approx(0.85).epsilon(1e-12));
  CHECK(r.y == doctest::Approx(1.0 / 3.0).epsilon(1e-4));
  CHECK(r.s1 == doctest::Approx(0.17647058823529).epsilon(1e-10));
  CHECK(r.s2 == doctest::Approx(0.03460207612456748).epsilon(1e-10));
  CHECK(r.G_batch == doctest::Approx(0.2222).epsilon(1e-3));
  CHECK(r.rho == doctest::Approx(0.39215686).epsilon(1e-6));
  CHECK(r.classes[0].D_tx == doctest::Approx(0.21315623023402908).epsilon(1e-10));
  CHECK(r.classes[0].D_rar == doctest::Approx(0.0093333).epsilon(1e-4));
  CHECK(r.classes[0].E_sy == doctest::Approx(0.033).epsilon(1e-12));
  CHECK(r.classes[1].E_sy == doctest::Approx(0.066).epsilon(1e-12));
  CHECK(r.classes[0].E_rar == doctest::Approx(0.1 * r.classes[0].D_rar).epsilon(1e-12));
  CHECK(downlink_bare_time(c, 1) == doctest::Approx(2.0).epsilon(1e-4));
  CHECK(uplink_bare_time(c, 0) == doctest::Approx(500.0 / (5000.0 * 0.85)).epsilon(1e-12));
  for (std::size_t j = 0; j < 2; ++j) {
    CHECK(ra_latency(c, j) == doctest::Approx(0.1 + c.cls(j).repetitions * 0.01).epsilon(1e-12));
    CHECK(r.classes[j].D_rr == doctest::Approx(attempt_multiplier(r.classes[j].P, 10) *
                                               (r.classes[j].D_ra + r.classes[j].D_rar))
                                   .epsilon(1e-12));
  }
}

TEST_CASE("faithful preamble formula on the reference scenario")
{
  auto c = table1_config();
  c.options.rach_mode = RachMode::faithful;
  CHECK(contenders(c, 0) == doctest::Approx(0.2777777777777778).epsilon(1e-12));
  CHECK(prach_success_prob(c, 0) == doctest::Approx(0.02993818919475847).epsilon(1e-9));
  CHECK(prach_success_faithful(0.0, 16.0, 100.0) == 0.0);
}

TEST_CASE("corrected preamble survival equals the thinned Poisson series")
{
  for (double n = 0.0; n <= 50.0; n += 0.25) {
    for (int m = 1; m <= 64; ++m) {
      const double series = oracle::poisson_thinned_series(n, (m - 1.0) / m);
      REQUIRE(prach_success_corrected(n, m) == doctest::Approx(series).epsilon(1e-9));
    }
  }
}

TEST_CASE("faithful series with unlimited preambles tends to P(K >= 2)")
{
  const double inf = std::numeric_limits<double>::infinity();
  for (double n : {0.1, 0.5, 1.0, 2.0, 8.0, 30.0}) {
    CHECK(std::abs(prach_success_faithful(n, inf, inf) - oracle::poisson_tail_from_two(n)) < 1e-9);
    CHECK(std::abs(prach_success_faithful(n, 1e13, 1e6) - (1.0 - std::exp(-n) * (1.0 + n))) < 1e-9);
  }
}

TEST_CASE("single-request service CDF of the reference mixture")
{
  const auto c = table1_config();
  CHECK(service_time_cdf(c, 1, 0.001) == 0.0);
  CHECK(service_time_cdf(c, 1, 0.002) == doctest::Approx(0.5));
  CHECK(service_time_cdf(c, 1, 0.004) == doctest::Approx(1.0));
  ServiceTimeDistribution two(c, 2);
  REQUIRE(two.pmf().size() >= 5);
  CHECK(two.pmf()[2] == doctest::Approx(0.25));
  CHECK(two.pmf()[3] == doctest::Approx(0.5));
  CHECK(two.pmf()[4] == doctest::Approx(0.25));
  CHECK(service_time_cdf(c, 2, 0.006) == doctest::Approx(0.75));
  CHECK_THROWS_AS(service_time_cdf(c, 0, 1.0), std::invalid_argument);
}

TEST_CASE("convolution matches tuple enumeration exactly")
{
  std::mt19937_64 rng(2024);
  std::vector<oracle::ClassService> mirror;
  for (int trial = 0; trial < 40; ++trial) {
    const auto c = dyadic_mixture(rng, mirror);
    const double u = c.schedule.control_tx_time;
    for (int n = 1; n <= 4; ++n) {
      ServiceTimeDistribution dist(c, n);
      const auto expected = oracle::enumerated_service_pmf(mirror, n);
      for (std::size_t k = 0; k < expected.size(); ++k) {
        const double got = k < dist.pmf().size() ? dist.pmf()[k] : 0.0;
        CHECK(got == expected[k]);
        const double x = (static_cast<double>(k) + 0.5) * u;
        CHECK(dist.cdf(x) == oracle::enumerated_service_cdf(mirror, u, n, x));
      }
    }
  }
}

TEST_CASE("add_request and truncate_above agree with a fresh build")
{
  const auto c = table1_config();
  ServiceTimeDistribution grown(c, 1);
  grown.add_request();
  grown.add_request();
  ServiceTimeDistribution fresh(c, 3);
  CHECK(grown.requests() == 3);
  CHECK(grown.pmf() == fresh.pmf());
  grown.truncate_above(0.008);
  for (double x : {0.006, 0.007, 0.008}) {
    CHECK(grown.cdf(x) == doctest::Approx(fresh.cdf(x)).epsilon(1e-15));
  }
}

TEST_CASE("fuzzed service CDFs are valid distribution functions")
{
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto c = testing::random_config(rng);
    const int n = 1 + static_cast<int>(unit(rng) * 6);
    const double u = c.schedule.control_tx_time;
    int max_c = 0;
    for (const auto& k : c.classes) {
      max_c = std::max(max_c, k.repetitions);
    }
    double prev = 0.0;
    bool monotone = true;
    bool bounded = true;
    for (int k = 0; k <= n * max_c + 1; ++k) {
      const double v = service_time_cdf(c, n, (k + 0.5) * u);
      monotone = monotone && v >= prev - 1e-15;
      bounded = bounded && v >= 0.0 && v <= 1.0 + 1e-12;
      prev = v;
    }
    CHECK(monotone);
    CHECK(bounded);
    CHECK(service_time_cdf(c, n, (n - 0.5) * u) == 0.0);
    CHECK(prev == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("timely RAR probability is a probability and grows with the window")
{
  auto c = table1_config();
  double prev = 0.0;
  for (double window : {0.001, 0.005, 0.02, 0.1, 0.5, 2.0}) {
    c.traffic.rar_window = window;
    const double p = rar_timely_prob(c, 0);
    CHECK(p >= prev - 1e-12);
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
    prev = p;
  }
  CHECK(prev == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("attempt series")
{
  CHECK(attempt_multiplier(0.5, 3) == doctest::Approx(1.375).epsilon(1e-15));
  CHECK(attempt_mass(0.5, 3) == doctest::Approx(0.875).epsilon(1e-15));
  CHECK(attempt_multiplier(1.0, 10) == 1.0);
  CHECK(attempt_multiplier(0.0, 10) == 0.0);
  for (double p = 0.01; p <= 1.0; p += 0.01) {
    CHECK(attempt_mass(p, 10) <= 1.0 + 1e-15);
    CHECK(attempt_multiplier(p, 10) >= attempt_mass(p, 10));
    CHECK(attempt_multiplier(p, 10) <= 1.0 / p + 1e-12);
  }
}

TEST_CASE("duty fractions and their stability limits")
{
  auto c = table1_config();
  CHECK(uplink_duty_raw(c) == doctest::Approx(1.0 - 0.05 - 0.1).epsilon(1e-12));
  c.traffic.bs_control_rate = 0.0;
  c.traffic.devices = 1e-9;
  CHECK(downlink_duty_raw(c) == doctest::Approx(0.8).epsilon(1e-9));

  auto full = table1_config();
  set_common_nprach_period(full, 0.030);
  CHECK(uplink_duty_raw(full) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS_AS(uplink_duty(full), StabilityError);
  CHECK_THROWS_AS(evaluate(full), StabilityError);

  auto crowded = table1_config();
  crowded.traffic.bs_control_rate = 400.0;
  CHECK(downlink_duty_raw(crowded) < 0.0);
  try {
    evaluate(crowded);
    FAIL("expected a stability error");
  } catch (const StabilityError& e) {
    CHECK(e.figures().count("y") == 1);
  }
}

TEST_CASE("queue load at the edge of stability")
{
  CHECK(std::isfinite(bpp_g1_sojourn(0.999, 0.1, 0.01, 0.2, 0.1)));
  CHECK(bpp_g1_sojourn(0.999, 0.1, 0.01, 0.2, 0.1) > bpp_g1_sojourn(0.9, 0.1, 0.01, 0.2, 0.1));
  CHECK(bpp_g1_sojourn(0.0, 0.1, 0.01, 0.0, 0.1) == doctest::Approx(0.1));

  auto c = table1_config();
  c.traffic.ul_packet_mean = 2000.0;
  const auto q = uplink_queue(c);
  CHECK(q.load > 1.0);
  try {
    evaluate(c);
    FAIL("expected a stability error");
  } catch (const StabilityError& e) {
    CHECK(e.figures().count("rho") == 1);
  }
}

TEST_CASE("single arrivals with deterministic service reduce to M/D/1")
{
  const double s = 0.1;
  for (double load : {0.3, 0.6, 0.9}) {
    const double lambda = load / s;
    const double formula = bpp_g1_sojourn(load, s, s * s, 0.0, s);
    const double simulated = oracle::md1_sojourn(lambda, s, 2'000'000, 17);
    CHECK(formula == doctest::Approx(s + load * s / (2.0 * (1.0 - load))).epsilon(1e-12));
    CHECK(std::abs(simulated / formula - 1.0) < 0.05);
  }
}

TEST_CASE("monotone responses")
{
  auto base = table1_config();
  double prev_ra = 0.0;
  double prev_rach = 1.0;
  for (double t : {0.05, 0.1, 0.2, 0.4}) {
    auto c = base;
    set_common_nprach_period(c, t);
    CHECK(ra_latency(c, 0) > prev_ra);
    CHECK(prach_success_prob(c, 0) < prev_rach);
    prev_ra = ra_latency(c, 0);
    prev_rach = prach_success_prob(c, 0);
  }
  double prev_rar = 0.0;
  for (double lb : {0.0, 20.0, 60.0, 100.0}) {
    auto c = base;
    c.traffic.bs_control_rate = lb;
    CHECK(rar_latency(c, 0).total > prev_rar);
    prev_rar = rar_latency(c, 0).total;
  }
  double prev_tx = 0.0;
  for (double l1 : {100.0, 200.0, 400.0, 800.0}) {
    auto c = base;
    c.traffic.ul_packet_mean = l1;
    CHECK(uplink_tx_latency(c, 0) > prev_tx);
    prev_tx = uplink_tx_latency(c, 0);
  }
}

TEST_CASE("swapping two classes permutes the outputs")
{
  const auto c = table1_config();
  auto swapped = c;
  std::swap(swapped.classes[0], swapped.classes[1]);
  const auto a = evaluate(c);
  const auto b = evaluate(swapped);
  for (std::size_t j = 0; j < 2; ++j) {
    const auto& x = a.classes[j];
    const auto& y = b.classes[1 - j];
    CHECK(x.D_u == doctest::Approx(y.D_u).epsilon(1e-12));
    CHECK(x.D_d == doctest::Approx(y.D_d).epsilon(1e-12));
    CHECK(x.L == doctest::Approx(y.L).epsilon(1e-12));
  }
}

TEST_CASE("energy ledger composition")
{
  const auto c = table1_config();
  for (std::size_t j = 0; j < 2; ++j) {
    const auto e = energy_ledger(c, j);
    const auto rr = resource_reservation(c, j);
    CHECK(e.sync == doctest::Approx(c.power.listen * c.cls(j).sync_latency).epsilon(1e-12));
    CHECK(e.rar == doctest::Approx(c.power.listen * rar_latency(c, j).total).epsilon(1e-12));
    CHECK(e.reservation == doctest::Approx(rr.energy).epsilon(1e-12));
    CHECK(e.reservation == doctest::Approx(attempt_multiplier(rr.success_prob, 10) * (e.ra + e.rar)).epsilon(1e-12));
    CHECK(e.uplink == doctest::Approx(e.sync + e.reservation + e.tx + c.power.ack_energy).epsilon(1e-12));
    CHECK(e.downlink == doctest::Approx(e.sync + e.reservation + e.rx + c.power.ack_energy).epsilon(1e-12));
  }
  auto acked = c;
  acked.power.ack_energy = 0.01;
  CHECK(energy_ledger(acked, 0).uplink == doctest::Approx(energy_ledger(c, 0).uplink + 0.01).epsilon(1e-12));
}

TEST_CASE("lifetime")
{
  CHECK(lifetime_days(1000.0, 12.0, 0.8, 0.05, 0.15) == doctest::Approx(1190.48).epsilon(1e-5));
  CHECK_THROWS_AS(lifetime_days(1000.0, 0.0, 0.8, 0.05, 0.15), ConfigError);
  CHECK_THROWS_AS(lifetime_days(1000.0, 12.0, 0.8, 0.0, 0.0), ConfigError);

  auto c = table1_config();
  const double base = lifetime(c, 0);
  c.power.battery *= 3.0;
  CHECK(lifetime(c, 0) == doctest::Approx(3.0 * base).epsilon(1e-12));
}

TEST_CASE("fuzzed configurations either evaluate cleanly or report instability")
{
  std::mt19937_64 rng(5);
  int stable = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    auto c = testing::random_config(rng);
    c.traffic.devices = std::min(c.traffic.devices, 300.0);
    try {
      const auto r = evaluate(c);
      ++stable;
      CHECK(evaluate(c) == r);
      CHECK(r.w > 0.0);
      CHECK(r.w <= 1.0);
      CHECK(r.y > 0.0);
      CHECK(r.rho < 1.0);
      CHECK(r.nu < 1.0);
      for (std::size_t j = 0; j < r.classes.size(); ++j) {
        const auto& m = r.classes[j];
        for (double prob : {m.P_rach, m.P_rar, m.P}) {
          CHECK(prob >= 0.0);
          CHECK(prob <= 1.0);
        }
        CHECK(m.P == doctest::Approx(m.P_rach * m.P_rar).epsilon(1e-12));
        CHECK(m.D_u >= m.D_sy);
        CHECK(m.D_d >= m.D_sy);
        CHECK(m.D_tx >= uplink_bare_time(c, j) * (1.0 - 1e-12));
        CHECK(m.E_u >= m.E_sy);
        CHECK(std::isfinite(m.D_u));
        CHECK(std::isfinite(m.D_d));
        CHECK(m.L > 0.0);
      }
    } catch (const StabilityError&) {
    }
  }
  CHECK(stable >= 100);
}

TEST_CASE("NPDCCH load and control service time edge cases")
{
  auto c = table1_config();
  CHECK(npdcch_load(c) == doctest::Approx(2.7777777777777777 * 0.2 + 1.0).epsilon(1e-12));
  CHECK(mean_control_service_time(c) == doctest::Approx(0.003).epsilon(1e-12));

  auto idle = c;
  idle.traffic.bs_control_rate = 0.0;
  idle.traffic.sessions_per_day = 0.0;
  CHECK(npdcch_load(idle) == 0.0);
  CHECK(rar_timely_prob(idle, 0) == 1.0);
  CHECK(rar_latency(idle, 0).total == doctest::Approx(0.5 * 0.01 + 0.002).epsilon(1e-12));

  auto slow = c;
  slow.schedule.npdcch_period = 1.0;
  slow.traffic.bs_control_rate = 0.0;
  CHECK(npdcch_load(slow) == doctest::Approx(2.7777777777777777).epsilon(1e-12));

  auto single = c;
  single.classes.resize(1);
  single.classes[0].fraction = 1.0;
  CHECK(mean_control_service_time(single) == doctest::Approx(0.002).epsilon(1e-15));
  auto lopsided = c;
  lopsided.classes[0].fraction = 1.0;
  lopsided.classes[1].fraction = 0.0;
  lopsided.classes[1].repetitions = 7;
  CHECK(mean_control_service_time(lopsided) == doctest::Approx(0.002).epsilon(1e-15));
}

TEST_CASE("random access latency")
{
  auto c = table1_config();
  set_common_nprach_period(c, 0.065);
  CHECK(ra_latency(c, 0) == doctest::Approx(0.0425).epsilon(1e-12));
  c.schedule.nprach_unit = 0.002;
  CHECK(ra_latency(c, 1) == doctest::Approx(0.0365).epsilon(1e-12));
  set_common_nprach_period(c, 1e-12);
  CHECK(ra_latency(c, 1) == doctest::Approx(0.004).epsilon(1e-9));
}

TEST_CASE("corrected preamble survival special values")
{
  CHECK(prach_success_corrected(0.0, 16.0) == 1.0);
  CHECK(prach_success_corrected(16.0 * std::log(2.0), 16.0) == doctest::Approx(0.5).epsilon(1e-14));
  const auto mc = oracle::monte_carlo_preamble_success(4.0, 16, 1'000'000, 41);
  CHECK(std::abs(mc.estimate - prach_success_corrected(4.0, 16.0)) <= 3.0 * mc.std_error);
}

TEST_CASE("timely RAR probability limits")
{
  auto c = table1_config();
  const double p = rar_timely_prob(c, 0);
  CHECK(p <= 1.0);
  CHECK(1.0 - p < 1e-6);
  c.traffic.rar_window = 1e6;
  CHECK(rar_timely_prob(c, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("reservation latency multiplier limits")
{
  CHECK(attempt_multiplier(0.5, 200) == doctest::Approx(2.0).epsilon(1e-12));
  auto c = table1_config();
  c.classes[0].preambles = 1'000'000'000;
  c.traffic.bs_control_rate = 0.0;
  const auto rr = resource_reservation(c, 0);
  CHECK(rr.success_prob == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(rr.latency == doctest::Approx(ra_latency(c, 0) + rar_latency(c, 0).total).epsilon(1e-6));
}

TEST_CASE("light traffic limits of the data latencies")
{
  auto c = table1_config();
  c.traffic.sessions_per_day = 1e-9;
  c.traffic.bs_control_rate = 0.0;
  for (std::size_t j = 0; j < 2; ++j) {
    const double bare_up = c.cls(j).repetitions * 500.0 / (5000.0 * 0.85);
    const double bare_down = c.cls(j).repetitions * 5000.0 / (15000.0 * 0.8);
    CHECK(uplink_tx_latency(c, j) == doctest::Approx(bare_up).epsilon(1e-6));
    CHECK(downlink_rx_latency(c, j) == doctest::Approx(bare_down).epsilon(1e-6));
    const auto m = evaluate(c).classes[j];
    const double access = ra_latency(c, j) + 0.5 * 0.01 + c.cls(j).repetitions * 0.002;
    CHECK(m.D_u == doctest::Approx(c.cls(j).sync_latency + access + bare_up).epsilon(1e-6));
  }
}

TEST_CASE("energies vanish with every power at zero")
{
  auto c = table1_config();
  c.power.idle = c.power.circuit = c.power.listen = c.power.tx_power = 0.0;
  const auto e = energy_ledger(c, 0);
  for (double v : {e.sync, e.ra, e.rar, e.reservation, e.tx, e.rx, e.uplink, e.downlink}) {
    CHECK(v == 0.0);
  }
  auto no_idle = table1_config();
  no_idle.power.idle = 0.0;
  CHECK(energy_ledger(no_idle, 1).ra == doctest::Approx(2 * 0.01 * (0.01 + 0.2)).epsilon(1e-12));
}

TEST_CASE("uplink-only lifetime")
{
  CHECK(lifetime_days(1000.0, 12.0, 1.0, 0.05, 123.0) == doctest::Approx(1000.0 / (12.0 * 0.05)).epsilon(1e-12));
}

}  // TEST_SUITE
