#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ssc/geometry/delaunay.hpp"

namespace ssc {

using Polygon = std::vector<geometry::Point>;

enum class Provenance { manual, mined };

/// Labels: epithelium, stroma, fat (CNN I); normal_stroma, tumor_stroma (CNN II).
struct AnnotatedRegion {
  std::string slide_id;
  std::string label;
  Polygon polygon;  // pixel coordinates; pixel (x, y) has its centre at (x+.5, y+.5)
  Provenance provenance = Provenance::manual;
  bool operator==(const AnnotatedRegion&) const = default;
};

double polygon_area(const Polygon& poly);  // unsigned
bool point_in_polygon(const Polygon& poly, geometry::Point p);  // even-odd
/// No repeated vertices, positive area, no two non-adjacent edges touching.
bool is_simple(const Polygon& poly);

struct PixelBox {
  int x0, y0, x1, y1;  // inclusive-exclusive
};
PixelBox bounding_pixels(const Polygon& poly);

/// Calls f(x, y) for every pixel whose centre lies inside the polygon.
template <typename F>
void for_each_pixel(const Polygon& poly, int width, int height, F&& f) {
  const PixelBox b = bounding_pixels(poly);
  for (int y = std::max(0, b.y0); y < std::min(height, b.y1); ++y)
    for (int x = std::max(0, b.x0); x < std::min(width, b.x1); ++x)
      if (point_in_polygon(poly, {x + 0.5, y + 0.5})) f(x, y);
}

void write_annotations(const std::filesystem::path& path,
                       const std::vector<AnnotatedRegion>& regions);
std::vector<AnnotatedRegion> read_annotations(const std::filesystem::path& path);

const char* to_string(Provenance p);

}  // namespace ssc
