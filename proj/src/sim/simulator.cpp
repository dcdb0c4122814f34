#include "nbiot/sim.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <map>
#include <queue>
#include <random>
#include <unordered_map>

#include "nbiot/analytic.hpp"
#include "nbiot/errors.hpp"
#include "nbiot/timeline.hpp"

namespace nbiot::sim {

const char* to_string(Direction d)
{
  return d == Direction::uplink ? "uplink" : "downlink";
}

const char* to_string(PowerState s)
{
  switch (s) {
    case PowerState::sleep: return "sleep";
    case PowerState::listen: return "listen";
    case PowerState::idle: return "idle";
    case PowerState::transmit: return "transmit";
    case PowerState::receive: return "receive";
  }
  return "?";
}

const char* to_string(EventKind k)
{
  switch (k) {
    case EventKind::arrival: return "arrival";
    case EventKind::sync_done: return "sync_done";
    case EventKind::ra_start: return "ra_start";
    case EventKind::ra_end: return "ra_end";
    case EventKind::ra_collision: return "ra_collision";
    case EventKind::rar_timeout: return "rar_timeout";
    case EventKind::rar_received: return "rar_received";
    case EventKind::data_start: return "data_start";
    case EventKind::data_end: return "data_end";
    case EventKind::ack: return "ack";
    case EventKind::abandoned: return "abandoned";
  }
  return "?";
}

double replay_energy(const std::vector<LogEntry>& log)
{
  double energy = 0.0;
  for (std::size_t i = 0; i < log.size(); ++i) {
    if (i > 0) {
      energy += log[i - 1].power * (log[i].time - log[i - 1].time);
    }
    energy += log[i].lump;
  }
  return energy;
}

namespace {

enum Stream : std::uint64_t { arrivals, class_draw, direction_draw, preamble_draw, packet_size, control_arrivals, control_class };

std::mt19937_64 make_stream(std::uint64_t seed, Stream stream)
{
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

enum class EventType : std::uint8_t { session_arrival, sync_done, window_end, control_arrival, failure, rar_delivered, data_end };

struct Event {
  double time;
  std::uint64_t seq;
  EventType type;
  std::uint64_t a = 0;  // session id, or class index for window_end
  std::uint64_t b = 0;  // window ordinal
  AttemptOutcome outcome = AttemptOutcome::pending;

  bool operator>(const Event& o) const { return time != o.time ? time > o.time : seq > o.seq; }
};

struct Window {
  double start;
  double end;
  std::uint64_t ordinal;
};

struct Live {
  DeviceSession s;
  bool keep_log = false;
  double last_time = 0.0;
  double last_power = 0.0;
};

class PacketSizer {
public:
  PacketSizer(double m1, double m2) : mean_(m1)
  {
    const double var = m2 - m1 * m1;
    if (var > 1e-12 * m1 * m1) {
      gamma_ = std::gamma_distribution<double>(m1 * m1 / var, var / m1);
      random_ = true;
    }
  }

  double draw(std::mt19937_64& rng) { return random_ ? gamma_(rng) : mean_; }

private:
  double mean_;
  bool random_ = false;
  std::gamma_distribution<double> gamma_;
};

struct ClassAccumulator {
  std::vector<double> d_u, d_d, e_u, e_d;
  ClassSimReport report;
  std::uint64_t preambles_sent = 0, preambles_won = 0, window_preambles = 0;
};

/// Busy time of [from, to) inside the measurement window.
double overlap(double from, double to, double lo, double hi)
{
  return std::max(0.0, std::min(to, hi) - std::max(from, lo));
}

class Simulation {
public:
  Simulation(const SystemConfig& config, const SimOptions& options)
      : cfg_(config),
        opt_(options),
        uplink_(std::make_unique<UplinkSource>(config)),
        downlink_(std::make_unique<DownlinkSource>(
            config, analytic::npdcch_load(config) * analytic::mean_control_service_time(config))),
        arrival_rng_(make_stream(options.seed, arrivals)),
        class_rng_(make_stream(options.seed, class_draw)),
        direction_rng_(make_stream(options.seed, direction_draw)),
        preamble_rng_(make_stream(options.seed, preamble_draw)),
        size_rng_(make_stream(options.seed, packet_size)),
        control_rng_(make_stream(options.seed, control_arrivals)),
        control_class_rng_(make_stream(options.seed, control_class)),
        ul_sizer_(config.traffic.ul_packet_mean, config.traffic.ul_packet_moment2()),
        dl_sizer_(config.traffic.dl_packet_mean, config.traffic.dl_packet_moment2()),
        windows_(config.class_count()),
        acc_(config.class_count())
  {
    std::vector<double> weights;
    for (const auto& c : config.classes) {
      weights.push_back(c.fraction);
    }
    class_dist_ = std::discrete_distribution<std::size_t>(weights.begin(), weights.end());

    uplink_.set_measurement_window(options.warmup, options.horizon);
    downlink_.set_measurement_window(options.warmup, options.horizon);
    uplink_.on_segment([this](const Segment& s) {
      if (s.use != Use::nprach) {
        return;
      }
      const auto j = static_cast<std::size_t>(s.cls);
      windows_[j].push_back(Window{s.start, s.end, s.window});
      if (s.start >= opt_.warmup && s.end <= opt_.horizon) {
        ++acc_[j].report.windows;
      }
    });
    visit_phase_ = config.schedule.ref_signal_fraction * config.schedule.frame_length;
  }

  SimReport run()
  {
    const double rate = arrival_rates(cfg_.traffic).total();
    if (opt_.script) {
      for (std::size_t i = 0; i < opt_.script->size(); ++i) {
        push(Event{(*opt_.script)[i].time, 0, EventType::session_arrival, i});
      }
    } else if (rate > 0.0) {
      arrival_gap_ = std::exponential_distribution<double>(rate);
      push(Event{arrival_gap_(arrival_rng_), 0, EventType::session_arrival});
    }
    if (cfg_.traffic.bs_control_rate > 0.0) {
      control_gap_ = std::exponential_distribution<double>(cfg_.traffic.bs_control_rate);
      push(Event{control_gap_(control_rng_), 0, EventType::control_arrival});
    }

    std::uint64_t processed = 0;
    while (!events_.empty() && events_.top().time < opt_.horizon) {
      const Event e = events_.top();
      events_.pop();
      now_ = e.time;
      dispatch(e);
      if (++processed % 4096 == 0) {
        uplink_.discard_before(now_);
        downlink_.discard_before(now_);
      }
    }
    finish_timeline(uplink_);
    finish_timeline(downlink_);
    return build_report();
  }

private:
  void push(Event e)
  {
    e.seq = next_seq_++;
    events_.push(e);
  }

  void finish_timeline(Timeline& tl)
  {
    tl.discard_before(now_);
    for (double t = now_; t < opt_.horizon;) {
      t = std::min(opt_.horizon, t + 60.0);
      tl.extend_to(t);
      tl.discard_before(t);
    }
  }

  void dispatch(const Event& e)
  {
    switch (e.type) {
      case EventType::session_arrival: on_session_arrival(e); break;
      case EventType::sync_done: on_sync_done(live_.at(e.a)); break;
      case EventType::window_end: on_window_end(static_cast<std::size_t>(e.a), e.b); break;
      case EventType::control_arrival: on_control_arrival(); break;
      case EventType::failure: on_failure(live_.at(e.a), e.outcome); break;
      case EventType::rar_delivered: on_rar_delivered(live_.at(e.a)); break;
      case EventType::data_end: on_data_end(e.a); break;
    }
  }

  bool counted(const DeviceSession& s) const { return s.arrival >= opt_.warmup; }

  void record(Live& l, EventKind kind, PowerState state, double time, double lump = 0.0)
  {
    double power = 0.0;
    const auto& pw = cfg_.power;
    switch (state) {
      case PowerState::sleep: power = 0.0; break;
      case PowerState::listen:
      case PowerState::receive: power = pw.listen; break;
      case PowerState::idle: power = pw.idle; break;
      case PowerState::transmit: power = pw.circuit + pw.pa_efficiency * cfg_.tx_power(l.s.cls); break;
    }
    if (l.keep_log) {
      l.s.log.push_back(LogEntry{time, kind, state, power, lump});
    }
    l.s.energy += l.last_power * (time - l.last_time);
    l.s.energy += lump;
    l.last_time = time;
    l.last_power = power;
  }

  bool wants_trace(const DeviceSession& s)
  {
    if (!opt_.trace) {
      return false;
    }
    const auto& f = *opt_.trace;
    if (traced_count_ >= f.limit) {
      return false;
    }
    if ((f.session && *f.session != s.id) || (f.cls && *f.cls != s.cls) || (f.direction && *f.direction != s.direction)) {
      return false;
    }
    ++traced_count_;
    return true;
  }

  void on_session_arrival(const Event& e)
  {
    Live l;
    l.s.id = next_session_++;
    l.s.arrival = now_;
    if (opt_.script) {
      const auto& sa = (*opt_.script)[e.a];
      l.s.cls = sa.cls;
      l.s.direction = sa.direction;
      l.s.packet_bits = sa.packet_bits.value_or(sa.direction == Direction::uplink ? cfg_.traffic.ul_packet_mean
                                                                                 : cfg_.traffic.dl_packet_mean);
    } else {
      l.s.cls = class_dist_(class_rng_);
      l.s.direction = std::bernoulli_distribution(cfg_.traffic.uplink_prob)(direction_rng_) ? Direction::uplink
                                                                                           : Direction::downlink;
      l.s.packet_bits = l.s.direction == Direction::uplink ? ul_sizer_.draw(size_rng_) : dl_sizer_.draw(size_rng_);
      push(Event{now_ + arrival_gap_(arrival_rng_), 0, EventType::session_arrival});
    }
    l.keep_log = wants_trace(l.s);
    l.last_time = now_;
    if (counted(l.s)) {
      ++acc_[l.s.cls].report.generated;
    }
    record(l, EventKind::arrival, PowerState::listen, now_);
    l.s.sync_end = now_ + cfg_.cls(l.s.cls).sync_latency;
    push(Event{l.s.sync_end, 0, EventType::sync_done, l.s.id});
    live_.emplace(l.s.id, std::move(l));
  }

  const Window& next_window(std::size_t j, double from)
  {
    auto& q = windows_[j];
    while (!q.empty() && q.front().start < from) {
      q.pop_front();
    }
    while (q.empty()) {
      uplink_.extend_to(uplink_.generated_until());
      while (!q.empty() && q.front().start < from) {
        q.pop_front();
      }
    }
    return q.front();
  }

  void join_window(Live& l)
  {
    const std::size_t j = l.s.cls;
    const Window w = next_window(j, now_);
    std::uniform_int_distribution<int> pick(0, cfg_.cls(j).preambles - 1);
    Attempt a;
    a.window_start = w.start;
    a.window_end = w.end;
    a.preamble = pick(preamble_rng_);
    l.s.attempts.push_back(a);
    record(l, EventKind::ra_start, PowerState::transmit, w.start);

    auto key = std::make_pair(j, w.ordinal);
    auto [it, inserted] = contenders_.try_emplace(key);
    if (inserted) {
      push(Event{w.end, 0, EventType::window_end, j, w.ordinal});
    }
    it->second.push_back(l.s.id);
  }

  void on_sync_done(Live& l)
  {
    record(l, EventKind::sync_done, PowerState::idle, now_);
    join_window(l);
  }

  double next_visit(double t) const
  {
    const double d = cfg_.schedule.npdcch_period;
    double k = std::ceil((t - visit_phase_) / d - 1e-9);
    k = std::max(k, 0.0);
    double v = visit_phase_ + k * d;
    if (v < t) {
      v += d;
    }
    return v;
  }

  double npdcch_enqueue(double arrival, double service)
  {
    const double start = npdcch_free_ > arrival ? npdcch_free_ : next_visit(arrival);
    const double done = start + service;
    npdcch_free_ = done;
    const double lo = opt_.warmup, hi = opt_.horizon;
    npdcch_busy_ += overlap(start, done, lo, hi);
    npdcch_area_ += overlap(arrival, done, lo, hi);
    if (arrival >= lo && arrival < hi) {
      ++npdcch_arrivals_;
      npdcch_sojourn_.add(done - arrival);
    }
    return done;
  }

  void on_control_arrival()
  {
    const std::size_t j = class_dist_(control_class_rng_);
    npdcch_enqueue(now_, cfg_.cls(j).repetitions * cfg_.schedule.control_tx_time);
    push(Event{now_ + control_gap_(control_rng_), 0, EventType::control_arrival});
  }

  void on_window_end(std::size_t j, std::uint64_t ordinal)
  {
    const auto node = contenders_.extract(std::make_pair(j, ordinal));
    const auto& ids = node.mapped();
    std::map<int, int> usage;
    for (auto id : ids) {
      ++usage[live_.at(id).s.attempts.back().preamble];
    }
    const double service = cfg_.cls(j).repetitions * cfg_.schedule.control_tx_time;
    const bool in_window = now_ >= opt_.warmup;
    auto& acc = acc_[j];
    if (in_window) {
      acc.window_preambles += ids.size();
    }
    for (auto id : ids) {
      Live& l = live_.at(id);
      record(l, EventKind::ra_end, PowerState::listen, now_);
      const bool won = usage[l.s.attempts.back().preamble] == 1;
      if (in_window) {
        ++acc.preambles_sent;
        acc.preambles_won += won ? 1 : 0;
      }
      if (!won) {
        push(Event{next_visit(now_) + service, 0, EventType::failure, id, 0, AttemptOutcome::collision});
        continue;
      }
      const double done = npdcch_enqueue(now_, service);
      const double deadline = now_ + cfg_.traffic.rar_window;
      if (done <= deadline) {
        push(Event{done, 0, EventType::rar_delivered, id});
      } else {
        push(Event{deadline, 0, EventType::failure, id, 0, AttemptOutcome::timeout});
      }
    }
  }

  void on_failure(Live& l, AttemptOutcome outcome)
  {
    l.s.attempts.back().outcome = outcome;
    auto& rep = acc_[l.s.cls].report;
    if (counted(l.s)) {
      ++(outcome == AttemptOutcome::collision ? rep.collisions : rep.rar_timeouts);
    }
    const EventKind kind = outcome == AttemptOutcome::collision ? EventKind::ra_collision : EventKind::rar_timeout;
    if (l.s.attempt_count() >= cfg_.schedule.max_attempts) {
      record(l, kind, PowerState::sleep, now_);
      record(l, EventKind::abandoned, PowerState::sleep, now_);
      l.s.terminal = Terminal::abandoned;
      finalize(l.s.id);
      return;
    }
    record(l, kind, PowerState::idle, now_);
    join_window(l);
  }

  void on_rar_delivered(Live& l)
  {
    l.s.attempts.back().outcome = AttemptOutcome::success;
    l.s.rar_delivery = now_;
    record(l, EventKind::rar_received, PowerState::idle, now_);
    const std::size_t j = l.s.cls;
    const auto& c = cfg_.cls(j);
    const bool up = l.s.direction == Direction::uplink;
    Timeline& tl = up ? uplink_ : downlink_;
    double& free_at = up ? uplink_free_ : downlink_free_;
    const double work = c.repetitions * l.s.packet_bits / (up ? c.uplink_rate : c.downlink_rate);
    const double start = tl.next_available(std::max(now_, free_at), Use::free);
    const double end = tl.advance(start, work, Use::free);
    free_at = end;
    (up ? uplink_busy_ : downlink_busy_) += overlap(start, end, opt_.warmup, opt_.horizon);
    l.s.data_start = start;
    l.s.data_end = end;
    record(l, EventKind::data_start, up ? PowerState::transmit : PowerState::receive, start);
    push(Event{end, 0, EventType::data_end, l.s.id});
  }

  void on_data_end(std::uint64_t id)
  {
    Live& l = live_.at(id);
    record(l, EventKind::data_end, PowerState::sleep, now_);
    record(l, EventKind::ack, PowerState::sleep, now_, cfg_.power.ack_energy);
    l.s.terminal = Terminal::served;
    finalize(id);
  }

  void finalize(std::uint64_t id)
  {
    auto node = live_.extract(id);
    Live& l = node.mapped();
    DeviceSession& s = l.s;
    if (counted(s)) {
      auto& acc = acc_[s.cls];
      const bool up = s.direction == Direction::uplink;
      (up ? acc.e_u : acc.e_d).push_back(s.energy);
      if (s.terminal == Terminal::served) {
        ++acc.report.served;
        (up ? acc.d_u : acc.d_d).push_back(s.latency());
        const auto n = static_cast<std::size_t>(s.attempt_count());
        if (acc.report.attempts_histogram.size() < n) {
          acc.report.attempts_histogram.resize(n, 0);
        }
        ++acc.report.attempts_histogram[n - 1];
      } else {
        ++acc.report.abandoned;
      }
      acc.report.attempts += static_cast<std::uint64_t>(s.attempt_count());
    }
    if (l.keep_log) {
      traced_.push_back(std::move(s));
    }
  }

  SimReport build_report()
  {
    SimReport r;
    r.seed = opt_.seed;
    r.horizon = opt_.horizon;
    r.warmup = opt_.warmup;
    const double span = opt_.horizon - opt_.warmup;

    for (const auto& [id, l] : live_) {
      if (counted(l.s)) {
        ++acc_[l.s.cls].report.in_flight;
      }
      if (l.keep_log) {
        traced_.push_back(l.s);
      }
    }
    std::sort(traced_.begin(), traced_.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    r.traced = std::move(traced_);

    const double p = cfg_.traffic.uplink_prob;
    for (std::size_t j = 0; j < acc_.size(); ++j) {
      auto& acc = acc_[j];
      auto& c = acc.report;
      if (opt_.require_samples && (c.served == 0 || (p > 0.0 && acc.e_u.empty()) || (p < 1.0 && acc.e_d.empty()))) {
        throw UnderSampledError("class " + std::to_string(j + 1) + " has no served session after warmup (horizon " +
                                std::to_string(opt_.horizon) + " s, warmup " + std::to_string(opt_.warmup) +
                                " s); increase the horizon");
      }
      c.D_u = stats::batch_means_ci(acc.d_u, opt_.ci_batches);
      c.D_d = stats::batch_means_ci(acc.d_d, opt_.ci_batches);
      c.E_u = stats::batch_means_ci(acc.e_u, opt_.ci_batches);
      c.E_d = stats::batch_means_ci(acc.e_d, opt_.ci_batches);
      c.preamble_success_rate =
          acc.preambles_sent ? static_cast<double>(acc.preambles_won) / static_cast<double>(acc.preambles_sent) : 0.0;
      c.mean_contenders = c.windows ? static_cast<double>(acc.window_preambles) / static_cast<double>(c.windows) : 0.0;
      const double eu = acc.e_u.empty() ? 0.0 : c.E_u.mean;
      const double ed = acc.e_d.empty() ? 0.0 : c.E_d.mean;
      const double daily = cfg_.traffic.sessions_per_day * (p * eu + (1.0 - p) * ed);
      c.L = daily > 0.0 ? cfg_.power.battery / daily : std::numeric_limits<double>::infinity();

      r.generated += c.generated;
      r.served += c.served;
      r.abandoned += c.abandoned;
      r.in_flight += c.in_flight;
      r.collisions += c.collisions;
      r.rar_timeouts += c.rar_timeouts;
      r.classes.push_back(std::move(c));
    }

    r.w = uplink_.measured(Use::free) / span;
    r.y = downlink_.measured(Use::free) / span;
    r.rho = uplink_busy_ / span;
    r.nu = downlink_busy_ / span;
    r.npdcch_fraction = npdcch_busy_ / span;
    r.npdcch_arrival_rate = static_cast<double>(npdcch_arrivals_) / span;
    r.npdcch_mean_sojourn = npdcch_sojourn_.count() ? npdcch_sojourn_.mean() : 0.0;
    r.npdcch_mean_queue = npdcch_area_ / span;
    return r;
  }

  const SystemConfig& cfg_;
  const SimOptions& opt_;
  Timeline uplink_;
  Timeline downlink_;

  std::mt19937_64 arrival_rng_, class_rng_, direction_rng_, preamble_rng_, size_rng_, control_rng_, control_class_rng_;
  std::exponential_distribution<double> arrival_gap_{1.0};
  std::exponential_distribution<double> control_gap_{1.0};
  std::discrete_distribution<std::size_t> class_dist_;
  PacketSizer ul_sizer_, dl_sizer_;

  std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
  std::uint64_t next_seq_ = 0;
  std::uint64_t next_session_ = 0;
  double now_ = 0.0;

  std::unordered_map<std::uint64_t, Live> live_;
  std::vector<std::deque<Window>> windows_;
  std::map<std::pair<std::size_t, std::uint64_t>, std::vector<std::uint64_t>> contenders_;

  double visit_phase_ = 0.0;
  double npdcch_free_ = 0.0;
  double uplink_free_ = 0.0;
  double downlink_free_ = 0.0;

  double uplink_busy_ = 0.0, downlink_busy_ = 0.0, npdcch_busy_ = 0.0, npdcch_area_ = 0.0;
  std::uint64_t npdcch_arrivals_ = 0;
  stats::Running npdcch_sojourn_;

  std::vector<ClassAccumulator> acc_;
  std::vector<DeviceSession> traced_;
  std::size_t traced_count_ = 0;
};

void check_run_args(const SystemConfig& config, double horizon, double warmup)
{
  const auto outcome = validate(config);
  if (!outcome.ok()) {
    if (outcome.has_structural()) {
      std::vector<std::string> list;
      for (const auto& v : outcome.violations) {
        list.push_back(v.field + ": " + v.message);
      }
      throw ConfigError("invalid configuration: " + outcome.summary(), list);
    }
    std::map<std::string, double> figures{{"w", analytic::uplink_duty_raw(config)},
                                          {"y", analytic::downlink_duty_raw(config)}};
    throw StabilityError("unstable configuration: " + outcome.summary(), figures);
  }
  if (!(horizon > warmup) || !(warmup >= 0.0)) {
    throw ConfigError("simulation needs horizon > warmup >= 0", {"horizon", "warmup"});
  }
}

}  // namespace

SimReport run(const SystemConfig& config, const SimOptions& options)
{
  check_run_args(config, options.horizon, options.warmup);
  Simulation sim(config, options);
  return sim.run();
}

SimReport run(const SystemConfig& config, std::uint64_t seed, double horizon, double warmup)
{
  SimOptions o;
  o.seed = seed;
  o.horizon = horizon;
  o.warmup = warmup;
  return run(config, o);
}

namespace {

stats::Estimate pool(const std::vector<SimReport>& reps, std::size_t j, stats::Estimate ClassSimReport::*field)
{
  std::vector<double> means;
  std::size_t samples = 0;
  for (const auto& r : reps) {
    const auto& e = r.classes[j].*field;
    if (e.samples > 0) {
      means.push_back(e.mean);
      samples += e.samples;
    }
  }
  auto e = stats::independent_ci(means);
  e.samples = samples;
  return e;
}

}  // namespace

SimReport run_replicated(const SystemConfig& config, const std::vector<std::uint64_t>& seeds, double horizon,
                         double warmup)
{
  if (seeds.size() < 2) {
    throw ConfigError("replicated runs need at least two seeds", {"seeds"});
  }
  check_run_args(config, horizon, warmup);
  std::vector<std::future<SimReport>> jobs;
  for (auto seed : seeds) {
    jobs.push_back(std::async(std::launch::async, [&config, seed, horizon, warmup] {
      return run(config, seed, horizon, warmup);
    }));
  }
  std::vector<SimReport> reps;
  for (auto& j : jobs) {
    reps.push_back(j.get());
  }

  SimReport r;
  r.seed = seeds.front();
  r.horizon = horizon;
  r.warmup = warmup;
  const auto n = static_cast<double>(reps.size());
  for (std::size_t j = 0; j < config.class_count(); ++j) {
    ClassSimReport c;
    c.D_u = pool(reps, j, &ClassSimReport::D_u);
    c.D_d = pool(reps, j, &ClassSimReport::D_d);
    c.E_u = pool(reps, j, &ClassSimReport::E_u);
    c.E_d = pool(reps, j, &ClassSimReport::E_d);
    double contenders = 0.0, success = 0.0;
    for (const auto& rep : reps) {
      const auto& x = rep.classes[j];
      c.generated += x.generated;
      c.served += x.served;
      c.abandoned += x.abandoned;
      c.in_flight += x.in_flight;
      c.attempts += x.attempts;
      c.collisions += x.collisions;
      c.rar_timeouts += x.rar_timeouts;
      c.windows += x.windows;
      contenders += x.mean_contenders;
      success += x.preamble_success_rate;
      if (c.attempts_histogram.size() < x.attempts_histogram.size()) {
        c.attempts_histogram.resize(x.attempts_histogram.size(), 0);
      }
      for (std::size_t k = 0; k < x.attempts_histogram.size(); ++k) {
        c.attempts_histogram[k] += x.attempts_histogram[k];
      }
    }
    c.mean_contenders = contenders / n;
    c.preamble_success_rate = success / n;
    const double p = config.traffic.uplink_prob;
    const double eu = c.E_u.samples ? c.E_u.mean : 0.0;
    const double ed = c.E_d.samples ? c.E_d.mean : 0.0;
    c.L = config.power.battery / (config.traffic.sessions_per_day * (p * eu + (1.0 - p) * ed));
    r.generated += c.generated;
    r.served += c.served;
    r.abandoned += c.abandoned;
    r.in_flight += c.in_flight;
    r.collisions += c.collisions;
    r.rar_timeouts += c.rar_timeouts;
    r.classes.push_back(std::move(c));
  }
  for (const auto& rep : reps) {
    r.w += rep.w / n;
    r.y += rep.y / n;
    r.rho += rep.rho / n;
    r.nu += rep.nu / n;
    r.npdcch_fraction += rep.npdcch_fraction / n;
    r.npdcch_arrival_rate += rep.npdcch_arrival_rate / n;
    r.npdcch_mean_sojourn += rep.npdcch_mean_sojourn / n;
    r.npdcch_mean_queue += rep.npdcch_mean_queue / n;
  }
  r.replications = std::move(reps);
  return r;
}

std::vector<DeviceSession> trace(const SystemConfig& config, std::uint64_t seed, double horizon,
                                 const TraceFilter& filter)
{
  SimOptions o;
  o.seed = seed;
  o.horizon = horizon;
  o.warmup = 0.0;
  o.trace = filter;
  o.require_samples = false;
  return run(config, o).traced;
}

}  // namespace nbiot::sim
