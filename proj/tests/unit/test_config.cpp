#include <doctest.h>

#include <algorithm>
#include <random>

#include "nbiot/analytic.hpp"
#include "nbiot/config.hpp"
#include "nbiot/config_io.hpp"
#include "nbiot/errors.hpp"
#include "support/random_config.hpp"

using namespace nbiot;

namespace {

bool mentions(const ValidationOutcome& o, const std::string& text)
{
  for (const auto& v : o.violations) {
    if (v.message.find(text) != std::string::npos) {
      return true;
    }
  }
  return false;
}

}  // namespace

TEST_SUITE("model-config") {

TEST_CASE("Table I configuration is valid with w = 0.85")
{
  const auto c = table1_config();
  const auto outcome = validate(c);
  CHECK(outcome.ok());
  CHECK(analytic::uplink_duty(c) == doctest::Approx(0.85).epsilon(1e-12));
}

TEST_CASE("fractions summing to 1.2 are named in the violation")
{
  auto c = table1_config();
  c.classes[0].fraction = 0.6;
  c.classes[1].fraction = 0.6;
  const auto outcome = validate(c);
  CHECK(outcome.has_structural());
  CHECK(mentions(outcome, "class fractions sum to 1.2"));
}

TEST_CASE("a single class filling the uplink reports w = 0")
{
  auto c = table1_config();
  c.classes.resize(1);
  c.classes[0].fraction = 1.0;
  c.classes[0].repetitions = 1;
  c.classes[0].nprach_period = 0.010;
  c.schedule.nprach_unit = 0.010;
  const auto outcome = validate(c);
  CHECK(outcome.has_stability());
  CHECK_FALSE(outcome.has_structural());
  CHECK(mentions(outcome, "uplink duty fraction w = 0"));
}

TEST_CASE("structural invariants are each reported with their field")
{
  auto c = table1_config();
  c.classes[0].preambles = 0;
  c.traffic.uplink_prob = 1.5;
  c.traffic.ul_packet_m2 = 1.0;
  c.schedule.ref_signal_fraction = 1.0;
  c.power.battery = 0.0;
  const auto outcome = validate(c);
  std::vector<std::string> fields;
  for (const auto& v : outcome.violations) {
    fields.push_back(v.field);
  }
  for (const char* f : {"class1.preambles", "traffic.uplink_prob", "traffic.ul_packet_moment2",
                        "schedule.ref_signal_fraction", "power.battery"}) {
    CHECK(std::find(fields.begin(), fields.end(), f) != fields.end());
  }
}

TEST_CASE("strict 3GPP mode restricts repetitions to powers of two")
{
  auto c = table1_config();
  c.classes[1].repetitions = 3;
  CHECK(validate(c).ok());
  c.options.strict_3gpp = true;
  CHECK(validate(c).has_structural());
  c.classes[1].repetitions = 4;
  CHECK(validate(c).ok());
}

TEST_CASE("validate is idempotent and leaves the config untouched")
{
  std::mt19937_64 rng(7);
  for (int i = 0; i < 50; ++i) {
    const auto c = testing::random_config(rng);
    const auto copy = c;
    const auto a = validate(c);
    const auto b = validate(c);
    CHECK(c == copy);
    CHECK(a.summary() == b.summary());
  }
}

TEST_CASE("arrival rates of the reference traffic")
{
  const auto r = arrival_rates(table1_config().traffic);
  CHECK(r.uplink == doctest::Approx(2.2222).epsilon(1e-4));
  CHECK(r.downlink == doctest::Approx(0.5556).epsilon(1e-4));

  TrafficConfig all_up = table1_config().traffic;
  all_up.uplink_prob = 1.0;
  CHECK(arrival_rates(all_up).downlink == 0.0);

  TrafficConfig empty = table1_config().traffic;
  empty.devices = 0.0;
  CHECK(arrival_rates(empty).uplink == 0.0);
  CHECK(arrival_rates(empty).downlink == 0.0);
}

TEST_CASE("uplink plus downlink rate equals N S / 86400")
{
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    TrafficConfig t;
    t.devices = unit(rng) * 1e6;
    t.sessions_per_day = unit(rng) * 1000.0;
    t.uplink_prob = unit(rng);
    const auto r = arrival_rates(t);
    CHECK(r.total() == doctest::Approx(t.devices * t.sessions_per_day / 86400.0).epsilon(1e-12));
  }
}

TEST_CASE("class fraction helper rebalances the others")
{
  auto c = table1_config();
  set_class_fraction(c, 0, 0.9);
  CHECK(c.classes[0].fraction == doctest::Approx(0.9));
  CHECK(c.classes[1].fraction == doctest::Approx(0.1));
  set_common_nprach_period(c, 0.065);
  CHECK(c.classes[0].nprach_period == 0.065);
  CHECK(c.classes[1].nprach_period == 0.065);
}

TEST_CASE("quantities carry units")
{
  CHECK(parse_quantity("0.5 /h", Quantity::per_day) == doctest::Approx(12.0));
  CHECK(parse_quantity("12/day", Quantity::per_day) == 12.0);
  CHECK(parse_quantity("12", Quantity::per_day) == 12.0);
  CHECK(parse_quantity("10 ms", Quantity::duration) == doctest::Approx(0.01));
  CHECK(parse_quantity("2 s", Quantity::duration) == 2.0);
  CHECK(parse_quantity("5 kbit/s", Quantity::rate) == 5000.0);
  CHECK(parse_quantity("5 kbit", Quantity::bits) == 5000.0);
  CHECK(parse_quantity("100 mW", Quantity::power) == doctest::Approx(0.1));
  CHECK(parse_quantity("1 kJ", Quantity::energy) == 1000.0);
  CHECK_THROWS_AS(parse_quantity("10 parsecs", Quantity::duration), ConfigError);
  CHECK_THROWS_AS(parse_quantity("ten ms", Quantity::duration), ConfigError);
  CHECK_THROWS_AS(parse_quantity("5 kbit/s", Quantity::duration), ConfigError);
}

TEST_CASE("config text round-trips field by field")
{
  const auto base = table1_config();
  CHECK(parse_config(to_config_text(base)) == base);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const auto c = testing::random_config(rng);
    const auto back = parse_config(to_config_text(c));
    CHECK(back == c);
  }
}

TEST_CASE("config parser rejects malformed input")
{
  const std::string good = to_config_text(table1_config());
  CHECK_NOTHROW(parse_config(good));
  CHECK_THROWS_AS(parse_config(good + "\n[bogus]\nx = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[traffic]\nunknown_key = 3\n[class1]\nrepetitions = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[traffic]\ndevices = 10\n[class2]\nrepetitions = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[class1]\nrepetitions = 1.5\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[schedule]\nnpdcch_period = 10 kbit/s\n[class1]\nrepetitions = 1\n"), ConfigError);
}

TEST_CASE("an empty class section takes every default")
{
  const auto c = parse_config("[class1]\nfraction = 0.5\n[class2]\n");
  REQUIRE(c.classes.size() == 2);
  CHECK(c.classes[1] == CoverageClass{});
  CHECK_THROWS_AS(parse_config("devices = 3\n[class1]\n"), ConfigError);
}

TEST_CASE("omitted bs_control_rate defaults to one per frame")
{
  const auto c = parse_config("[schedule]\nframe_length = 20 ms\n[class1]\nfraction = 1\n");
  CHECK(c.traffic.bs_control_rate == doctest::Approx(50.0));
}

TEST_CASE("bundled Table I file matches the built-in reference")
{
  const auto c = load_config(std::string(NBIOT_CONFIG_DIR) + "/table1.cfg");
  CHECK(c == table1_config());
}

}  // TEST_SUITE
