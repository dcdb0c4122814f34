#include "nbiot/stats.hpp"

#include <cmath>

#include <boost/math/distributions/students_t.hpp>

namespace nbiot::stats {

double student_t_quantile(double confidence, std::size_t dof)
{
  const boost::math::students_t dist(static_cast<double>(dof));
  return boost::math::quantile(dist, 0.5 + 0.5 * confidence);
}

Estimate independent_ci(std::span<const double> values)
{
  Running acc;
  for (double v : values) {
    acc.add(v);
  }
  Estimate e;
  e.samples = acc.count();
  e.mean = acc.mean();
  if (acc.count() > 1) {
    e.half_width = student_t_quantile(0.95, acc.count() - 1) * std::sqrt(acc.variance() / static_cast<double>(acc.count()));
  }
  return e;
}

Estimate batch_means_ci(std::span<const double> values, std::size_t batches)
{
  if (batches < 2 || values.size() < 2 * batches) {
    return independent_ci(values);
  }
  std::vector<double> means;
  means.reserve(batches);
  const std::size_t n = values.size();
  for (std::size_t b = 0; b < batches; ++b) {
    const std::size_t lo = b * n / batches;
    const std::size_t hi = (b + 1) * n / batches;
    double sum = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      sum += values[i];
    }
    means.push_back(sum / static_cast<double>(hi - lo));
  }
  Estimate e = independent_ci(means);
  Running all;
  for (double v : values) {
    all.add(v);
  }
  e.mean = all.mean();
  e.samples = n;
  return e;
}

}  // namespace nbiot::stats
