#pragma once

#include <array>
#include <span>
#include <utility>
#include <vector>

namespace ssc::geometry {

struct Point {
  double x = 0;
  double y = 0;
  auto operator<=>(const Point&) const = default;
};

/// Sign of the doubled signed area of (a, b, c): +1 counter-clockwise.
/// Exact: a floating-point filter falls back to rational arithmetic.
int orient2d(Point a, Point b, Point c);

/// +1 if d lies strictly inside the circle through the counter-clockwise
/// triangle (a, b, c), 0 on it, -1 outside. Exact.
int incircle(Point a, Point b, Point c, Point d);

struct DelaunayGraph {
  std::vector<Point> nodes;                      // sorted, duplicates removed
  std::vector<std::array<int, 3>> triangles;     // counter-clockwise
  std::vector<std::pair<int, int>> edges;        // i < j, sorted
  std::vector<double> lengths;                   // per edge

  std::vector<int> degrees() const;
  /// Mean length of the edges incident on each node.
  std::vector<double> mean_incident_lengths() const;
};

/// Throws DegenerateGeometry for fewer than three distinct points or when
/// all points are collinear.
DelaunayGraph delaunay(std::span<const Point> points);

/// stats4 of node degrees followed by stats4 of mean incident edge length.
std::array<double, 8> delaunay_stats(const DelaunayGraph& graph);

}  // namespace ssc::geometry
