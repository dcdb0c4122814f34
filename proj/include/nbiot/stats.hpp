#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace nbiot::stats {

/// Welford accumulator.
class Running {
public:
  void add(double x)
  {
    ++n_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (x - mean_);
  }

  std::size_t count() const { return n_; }
  double mean() const { return n_ ? mean_ : std::numeric_limits<double>::quiet_NaN(); }
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }

private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

struct Estimate {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double half_width = std::numeric_limits<double>::quiet_NaN(); // 95% CI half-width
  std::size_t samples = 0;

  /// Bitwise comparison, so that two NaN fields compare equal.
  bool operator==(const Estimate& o) const
  {
    return std::bit_cast<std::uint64_t>(mean) == std::bit_cast<std::uint64_t>(o.mean) &&
           std::bit_cast<std::uint64_t>(half_width) == std::bit_cast<std::uint64_t>(o.half_width) &&
           samples == o.samples;
  }
};

/// Two-sided Student-t quantile t_{1-alpha/2, dof}.
double student_t_quantile(double confidence, std::size_t dof);

/// 95% t-interval treating the values as independent.
Estimate independent_ci(std::span<const double> values);

/// 95% interval from non-overlapping batch means (values in time order). Falls
/// back to independent_ci when there are fewer than 2 * batches values.
Estimate batch_means_ci(std::span<const double> values, std::size_t batches = 20);

}  // namespace nbiot::stats
