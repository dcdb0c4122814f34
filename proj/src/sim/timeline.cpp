#include "nbiot/timeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace nbiot::sim {

namespace {

// Remaining work below this is rounding noise from repeated subtraction.
constexpr double kWorkEpsilon = 1e-12;
// Guards against a server that is never granted any time.
constexpr std::size_t kMaxScan = 50'000'000;

}  // namespace

Timeline::Timeline(std::unique_ptr<SegmentSource> source) : source_(std::move(source)) {}

void Timeline::set_measurement_window(double from, double to)
{
  measure_from_ = from;
  measure_to_ = to;
  measured_.fill(0.0);
}

void Timeline::generate_one()
{
  Segment s = source_->next();
  const double lo = std::max(s.start, measure_from_);
  const double hi = std::min(s.end, measure_to_);
  if (hi > lo) {
    measured_[static_cast<std::size_t>(s.use)] += hi - lo;
  }
  if (observer_) {
    observer_(s);
  }
  segments_.push_back(s);
}

void Timeline::extend_to(double t)
{
  while (segments_.empty() || segments_.back().end <= t) {
    generate_one();
  }
}

void Timeline::discard_before(double t)
{
  while (segments_.size() > 1 && segments_.front().end <= t) {
    segments_.pop_front();
  }
}

std::size_t Timeline::locate(double t)
{
  extend_to(t);
  if (t < segments_.front().start) {
    throw std::logic_error("timeline queried before its discarded prefix");
  }
  const auto it = std::upper_bound(segments_.begin(), segments_.end(), t,
                                   [](double value, const Segment& s) { return value < s.end; });
  return static_cast<std::size_t>(it - segments_.begin());
}

double Timeline::advance(double from, double work, Use use)
{
  std::size_t i = locate(from);
  double t = from;
  double remaining = work;
  for (std::size_t scanned = 0; scanned < kMaxScan; ++scanned) {
    if (i == segments_.size()) {
      generate_one();
    }
    const Segment& s = segments_[i];
    if (s.use == use) {
      const double begin = std::max(t, s.start);
      const double available = s.end - begin;
      if (remaining <= available) {
        return begin + remaining;
      }
      remaining -= available;
      if (remaining < kWorkEpsilon) {
        return s.end;
      }
    }
    ++i;
  }
  throw std::runtime_error("timeline: channel never becomes available");
}

Segment Timeline::next_segment(double from, Use use)
{
  std::size_t i = locate(from);
  for (std::size_t scanned = 0; scanned < kMaxScan; ++scanned) {
    if (i == segments_.size()) {
      generate_one();
    }
    if (segments_[i].use == use) {
      return segments_[i];
    }
    ++i;
  }
  throw std::runtime_error("timeline: channel never becomes available");
}

double Timeline::next_available(double from, Use use)
{
  return std::max(from, next_segment(from, use).start);
}

// ---------------------------------------------------------------------------

UplinkSource::UplinkSource(const SystemConfig& config)
{
  double offset = 0.0;
  for (const auto& c : config.classes) {
    const double width = static_cast<double>(c.repetitions) * config.schedule.nprach_unit;
    offset_.push_back(offset);
    period_.push_back(c.nprach_period);
    width_.push_back(width);
    next_index_.push_back(0);
    offset += width;
  }
}

double UplinkSource::nominal_start(std::size_t j) const
{
  return offset_[j] + static_cast<double>(next_index_[j]) * period_[j];
}

Segment UplinkSource::next()
{
  if (!pending_) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < period_.size(); ++j) {
      if (nominal_start(j) < nominal_start(best)) {
        best = j;
      }
    }
    const double start = std::max(nominal_start(best), cursor_);
    pending_window_ = Segment{start, start + width_[best], Use::nprach, static_cast<int>(best), next_index_[best]};
    ++next_index_[best];
    pending_ = true;
  }
  if (cursor_ < pending_window_.start) {
    Segment gap{cursor_, pending_window_.start, Use::free};
    cursor_ = pending_window_.start;
    return gap;
  }
  pending_ = false;
  cursor_ = pending_window_.end;
  return pending_window_;
}

// ---------------------------------------------------------------------------

DownlinkSource::DownlinkSource(const SystemConfig& config, double npdcch_reserve)
    : frame_(config.schedule.frame_length),
      reference_(config.schedule.ref_signal_fraction * config.schedule.frame_length),
      period_(config.schedule.npdcch_period),
      phase_(reference_),
      reserve_(npdcch_reserve)
{
}

Segment DownlinkSource::next()
{
  for (;;) {
    const double ref_start = static_cast<double>(frame_index_) * frame_;
    const double ref_end = ref_start + reference_;
    if (cursor_ >= ref_end) {
      ++frame_index_;
      continue;
    }
    if (cursor_ >= ref_start) {
      Segment s{cursor_, ref_end, Use::reference};
      cursor_ = ref_end;
      return s;
    }
    // Between reference blocks: open any NPDCCH visits that are due.
    while (phase_ + static_cast<double>(visit_index_) * period_ <= cursor_) {
      pending_ += reserve_;
      ++visit_index_;
    }
    if (pending_ > 0.0) {
      const double end = std::min(ref_start, cursor_ + pending_);
      pending_ -= end - cursor_;
      if (pending_ < kWorkEpsilon) {
        pending_ = 0.0;
      }
      Segment s{cursor_, end, Use::npdcch};
      cursor_ = end;
      return s;
    }
    const double end = std::min(ref_start, phase_ + static_cast<double>(visit_index_) * period_);
    Segment s{cursor_, end, Use::free};
    cursor_ = end;
    return s;
  }
}

}  // namespace nbiot::sim
