#include <doctest.h>

#include <cmath>

#include "nbiot/analytic.hpp"
#include "nbiot/errors.hpp"
#include "nbiot/sim.hpp"

using namespace nbiot;
using namespace nbiot::sim;

namespace {

SimOptions scripted(std::vector<ScriptedArrival> arrivals, double horizon = 20.0)
{
  SimOptions o;
  o.horizon = horizon;
  o.warmup = 0.0;
  o.script = std::move(arrivals);
  o.trace = TraceFilter{};
  o.require_samples = false;
  return o;
}

SystemConfig quiet_table1()
{
  auto c = table1_config();
  c.traffic.bs_control_rate = 0.0;
  return c;
}

std::vector<EventKind> kinds(const DeviceSession& s)
{
  std::vector<EventKind> out;
  for (const auto& e : s.log) {
    out.push_back(e.kind);
  }
  return out;
}

}  // namespace

TEST_SUITE("queue-sim") {

TEST_CASE("single uplink device follows the hand-computed schedule")
{
  const auto c = quiet_table1();
  const auto r = run(c, scripted({{1.0, 0, Direction::uplink, std::nullopt}}));
  REQUIRE(r.traced.size() == 1);
  const auto& s = r.traced[0];
  CHECK(s.terminal == Terminal::served);
  CHECK(s.attempt_count() == 1);
  CHECK(s.sync_end == doctest::Approx(1.33));
  CHECK(s.attempts[0].window_start == doctest::Approx(1.4));
  CHECK(s.attempts[0].window_end == doctest::Approx(1.41));
  CHECK(s.rar_delivery == doctest::Approx(1.414));
  CHECK(s.data_start == doctest::Approx(1.43));
  CHECK(s.data_end == doctest::Approx(1.53));
  CHECK(s.latency() == doctest::Approx(0.53));
  const double expected = 0.33 * 0.1 + 0.07 * 0.01 + 0.01 * 0.21 + 0.004 * 0.1 + 0.016 * 0.01 + 0.1 * 0.21;
  CHECK(s.energy == doctest::Approx(expected).epsilon(1e-9));
  CHECK(kinds(s) == std::vector<EventKind>{EventKind::arrival, EventKind::sync_done, EventKind::ra_start,
                                           EventKind::ra_end, EventKind::rar_received, EventKind::data_start,
                                           EventKind::data_end, EventKind::ack});
  CHECK(replay_energy(s.log) == s.energy);
}

TEST_CASE("downlink device receives at listen power")
{
  const auto c = quiet_table1();
  const auto r = run(c, scripted({{1.0, 0, Direction::downlink, 1500.0}}));
  const auto& s = r.traced.at(0);
  CHECK(s.terminal == Terminal::served);
  CHECK(s.log.at(5).state == PowerState::receive);
  CHECK(s.log.at(5).power == doctest::Approx(0.1));
  CHECK(s.data_end - s.data_start >= 0.1 - 1e-12);
}

TEST_CASE("two devices on one preamble collide and retry")
{
  auto c = quiet_table1();
  c.classes[0].preambles = 1;
  c.schedule.max_attempts = 3;
  const auto r = run(c, scripted({{1.0, 0, Direction::uplink, std::nullopt}, {1.0, 0, Direction::uplink, std::nullopt}}));
  REQUIRE(r.traced.size() == 2);
  for (const auto& s : r.traced) {
    CHECK(s.terminal == Terminal::abandoned);
    CHECK(s.attempt_count() == 3);
    for (const auto& a : s.attempts) {
      CHECK(a.outcome == AttemptOutcome::collision);
    }
    CHECK(s.log.back().kind == EventKind::abandoned);
    CHECK(replay_energy(s.log) == s.energy);
  }
  CHECK(r.collisions == 6);
  CHECK(r.abandoned == 2);
  const auto& first = r.traced[0].attempts;
  CHECK(first[1].window_start - first[0].window_start == doctest::Approx(c.classes[0].nprach_period));
}

TEST_CASE("a single attempt budget abandons after the first collision")
{
  auto c = quiet_table1();
  c.classes[0].preambles = 1;
  c.schedule.max_attempts = 1;
  const auto r = run(c, scripted({{1.0, 0, Direction::uplink, std::nullopt}, {1.0, 0, Direction::uplink, std::nullopt},
                                  {5.0, 0, Direction::uplink, std::nullopt}}));
  CHECK(r.abandoned == 2);
  CHECK(r.served == 1);
  CHECK(r.traced[0].attempt_count() == 1);
}

TEST_CASE("a late RAR times out at the deadline")
{
  auto c = quiet_table1();
  c.traffic.rar_window = 0.001;
  c.schedule.max_attempts = 2;
  const auto r = run(c, scripted({{1.0, 0, Direction::uplink, std::nullopt}}));
  const auto& s = r.traced.at(0);
  CHECK(s.terminal == Terminal::abandoned);
  CHECK(r.rar_timeouts == 2);
  CHECK(s.attempts[0].outcome == AttemptOutcome::timeout);
  CHECK(s.log[4].kind == EventKind::rar_timeout);
  CHECK(s.log[4].time == doctest::Approx(1.411));
}

TEST_CASE("same seed gives identical reports and a different seed does not")
{
  const auto c = table1_config();
  const auto a = run(c, 7, 900.0, 90.0);
  const auto b = run(c, 7, 900.0, 90.0);
  const auto other = run(c, 8, 900.0, 90.0);
  CHECK(a == b);
  CHECK_FALSE(a == other);
}

TEST_CASE("session accounting is conserved")
{
  const auto c = table1_config();
  const auto r = run(c, 3, 1800.0, 180.0);
  std::uint64_t served = 0;
  for (const auto& k : r.classes) {
    CHECK(k.served + k.abandoned + k.in_flight == k.generated);
    std::uint64_t hist = 0;
    for (auto v : k.attempts_histogram) {
      hist += v;
    }
    CHECK(hist == k.served);
    CHECK(k.attempts >= k.served + k.abandoned);
    served += k.served;
  }
  CHECK(served == r.served);
  CHECK(r.served + r.abandoned + r.in_flight == r.generated);
}

TEST_CASE("traced sessions replay to their recorded energy")
{
  const auto c = table1_config();
  TraceFilter f;
  f.limit = 300;
  const auto sessions = trace(c, 4, 400.0, f);
  CHECK(sessions.size() == 300);
  for (const auto& s : sessions) {
    CHECK(replay_energy(s.log) == s.energy);
    CHECK(s.log.front().kind == EventKind::arrival);
  }
  TraceFilter only2;
  only2.cls = 1;
  only2.direction = Direction::downlink;
  only2.limit = 20;
  for (const auto& s : trace(c, 4, 400.0, only2)) {
    CHECK(s.cls == 1);
    CHECK(s.direction == Direction::downlink);
  }
}

TEST_CASE("NPDCCH queue obeys Little's law")
{
  const auto r = run(table1_config(), 5, 3600.0, 360.0);
  const double little = r.npdcch_arrival_rate * r.npdcch_mean_sojourn;
  CHECK(r.npdcch_mean_queue == doctest::Approx(little).epsilon(0.10));
}

TEST_CASE("measured occupancies track the analytic ones")
{
  const auto c = table1_config();
  const auto a = analytic::evaluate(c);
  const auto r = run(c, 6, 3600.0, 360.0);
  CHECK(std::abs(r.w - a.w) <= 0.02);
  CHECK(std::abs(r.y - a.y) <= 0.02);
  CHECK(r.rho == doctest::Approx(a.rho).epsilon(0.15));
}

TEST_CASE("preamble success at low load matches the survival probability")
{
  const auto c = table1_config();
  const auto r = run(c, 9, 3600.0, 360.0);
  for (std::size_t j = 0; j < 2; ++j) {
    const double p = analytic::prach_success_prob(c, j);
    const double n = static_cast<double>(r.classes[j].attempts);
    const double sigma = std::sqrt(p * (1.0 - p) / n);
    CHECK(std::abs(r.classes[j].preamble_success_rate - p) <= 3.0 * sigma);
  }
}

TEST_CASE("random packet sizes keep the configured mean")
{
  auto c = table1_config();
  c.traffic.ul_packet_m2 = 2.0 * c.traffic.ul_packet_mean * c.traffic.ul_packet_mean;
  TraceFilter f;
  f.direction = Direction::uplink;
  f.limit = 4000;
  const auto sessions = trace(c, 2, 2000.0, f);
  double sum = 0.0;
  for (const auto& s : sessions) {
    sum += s.packet_bits;
  }
  CHECK(sum / static_cast<double>(sessions.size()) == doctest::Approx(500.0).epsilon(0.05));
}

TEST_CASE("more replications tighten the pooled interval")
{
  const auto c = table1_config();
  const auto two = run_replicated(c, {1, 2}, 900.0, 90.0);
  const auto ten = run_replicated(c, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, 900.0, 90.0);
  CHECK(two.replications.size() == 2);
  CHECK(ten.replications.size() == 10);
  for (std::size_t j = 0; j < 2; ++j) {
    CHECK(ten.classes[j].D_u.half_width < two.classes[j].D_u.half_width);
    CHECK(ten.classes[j].E_u.half_width < two.classes[j].E_u.half_width);
  }
  int covering = 0;
  for (const auto& rep : ten.replications) {
    const auto& e = rep.classes[0].D_u;
    covering += std::abs(e.mean - ten.classes[0].D_u.mean) <= e.half_width ? 1 : 0;
  }
  CHECK(covering >= 8);
  CHECK_THROWS_AS(run_replicated(c, {1}, 900.0, 90.0), ConfigError);
}

TEST_CASE("argument and sampling errors")
{
  const auto c = table1_config();
  CHECK_THROWS_AS(run(c, 1, 2.0, 1.0), UnderSampledError);
  CHECK_THROWS_AS(run(c, 1, 100.0, 100.0), ConfigError);
  CHECK_THROWS_AS(run(c, 1, 100.0, -1.0), ConfigError);
  auto bad = c;
  bad.classes[0].fraction = 0.9;
  CHECK_THROWS_AS(run(bad, 1, 100.0, 10.0), ConfigError);
  auto unstable = c;
  set_common_nprach_period(unstable, 0.03);
  CHECK_THROWS_AS(run(unstable, 1, 100.0, 10.0), StabilityError);
}

TEST_CASE("reference scenario class-1 uplink latency is within 15% of the closed form")
{
  const auto c = table1_config();
  const auto r = run(c, 42, 7200.0, 600.0);
  const double expected = analytic::evaluate(c).classes[0].D_u;
  CHECK(std::abs(r.classes[0].D_u.mean / expected - 1.0) <= 0.15);
  CHECK(r.classes[0].D_u.half_width > 0.0);
}

}  // TEST_SUITE
