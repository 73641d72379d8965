#pragma once

#include <array>
#include <span>

namespace ssc::geometry {

struct Stats4 {
  double mean = 0;
  double std = 0;  // population
  double median = 0;
  double iqr = 0;

  std::array<double, 4> values() const { return {mean, std, median, iqr}; }
};

/// Quantiles use linear interpolation between order statistics.
Stats4 stats4(std::span<const double> values);
double quantile_sorted(std::span<const double> sorted, double q);

}  // namespace ssc::geometry
