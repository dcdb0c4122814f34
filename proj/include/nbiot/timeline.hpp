#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <vector>

#include "nbiot/config.hpp"

namespace nbiot::sim {

/// What a channel (uplink or downlink carrier) is doing during a segment.
enum class Use : std::uint8_t { free, nprach, reference, npdcch };
inline constexpr std::size_t kUseCount = 4;

struct Segment {
  double start = 0.0;
  double end = 0.0;
  Use use = Use::free;
  int cls = -1;  // NPRACH class index, -1 otherwise
  std::uint64_t window = 0;  // per-class NPRACH window ordinal
};

/// Produces consecutive, gap-free segments starting at time 0.
class SegmentSource {
public:
  virtual ~SegmentSource() = default;
  virtual Segment next() = 0;
};

/// Lazily materialized partition of [0, inf) into labelled segments. Servers
/// use it to map work onto the time they are allowed to occupy.
class Timeline {
public:
  explicit Timeline(std::unique_ptr<SegmentSource> source);

  /// Observer called once for every generated segment, in time order.
  void on_segment(std::function<void(const Segment&)> observer) { observer_ = std::move(observer); }

  /// Completion time of `work` seconds of service that may only run during `use`
  /// segments and starts no earlier than `from`.
  double advance(double from, double work, Use use);

  /// First instant >= from that lies inside a `use` segment.
  double next_available(double from, Use use);

  /// The `use` segment found by next_available(from, use).
  Segment next_segment(double from, Use use);

  /// Generates segments until one ends after t.
  void extend_to(double t);

  /// End of the last generated segment.
  double generated_until() const { return segments_.empty() ? 0.0 : segments_.back().end; }

  /// Forgets segments ending at or before t. All later queries must use times >= t.
  void discard_before(double t);

  /// Per-use time spent inside [from, to), counted as segments are generated.
  void set_measurement_window(double from, double to);
  double measured(Use use) const { return measured_[static_cast<std::size_t>(use)]; }

private:
  std::size_t locate(double t);
  void generate_one();

  std::unique_ptr<SegmentSource> source_;
  std::deque<Segment> segments_;
  std::function<void(const Segment&)> observer_;
  double measure_from_ = 0.0;
  double measure_to_ = 0.0;
  std::array<double, kUseCount> measured_{};
};

/// Uplink carrier: per-class NPRACH windows of width c_j * tau every t_j; class j
/// is offset by the widths of classes before it. Windows that would overlap are
/// serialized in order of nominal start. Everything else is NPUSCH time.
class UplinkSource : public SegmentSource {
public:
  explicit UplinkSource(const SystemConfig& config);
  Segment next() override;

private:
  double nominal_start(std::size_t j) const;

  std::vector<double> offset_;
  std::vector<double> period_;
  std::vector<double> width_;
  std::vector<std::uint64_t> next_index_;
  double cursor_ = 0.0;
  bool pending_ = false;
  Segment pending_window_;
};

/// Downlink carrier: reference signals fill the first b * CF of every frame; an
/// NPDCCH search space of `npdcch_reserve` seconds (of non-reference time) opens
/// every d seconds; everything else is NPDSCH time.
class DownlinkSource : public SegmentSource {
public:
  DownlinkSource(const SystemConfig& config, double npdcch_reserve);
  Segment next() override;

private:
  double frame_;
  double reference_;
  double period_;
  double phase_;
  double reserve_;
  std::uint64_t frame_index_ = 0;
  std::uint64_t visit_index_ = 0;
  double pending_ = 0.0;
  double cursor_ = 0.0;
};

}  // namespace nbiot::sim
