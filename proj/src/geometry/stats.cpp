#include "ssc/geometry/stats.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "ssc/common.hpp"

namespace ssc::geometry {

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw Error("quantile of an empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

Stats4 stats4(std::span<const double> values) {
  if (values.empty()) throw Error("stats4 of an empty sample");
  for (double v : values)
    if (!std::isfinite(v)) throw NonFiniteError("stats4: non-finite value");
  std::vector<double> s(values.begin(), values.end());
  std::sort(s.begin(), s.end());
  Stats4 out;
  double sum = 0;
  for (double v : s) sum += v;
  out.mean = sum / static_cast<double>(s.size());
  double ss = 0;
  for (double v : s) ss += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(ss / static_cast<double>(s.size()));
  out.median = quantile_sorted(s, 0.5);
  out.iqr = quantile_sorted(s, 0.75) - quantile_sorted(s, 0.25);
  return out;
}

}  // namespace ssc::geometry
