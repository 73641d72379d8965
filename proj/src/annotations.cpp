#include "ssc/annotations.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "ssc/common.hpp"

namespace ssc {

using geometry::Point;

double polygon_area(const Polygon& poly) {
  double s = 0;
  for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
    const Point& a = poly[i];
    const Point& b = poly[(i + 1) % n];
    s += a.x * b.y - b.x * a.y;
  }
  return std::abs(s) / 2;
}

bool point_in_polygon(const Polygon& poly, Point p) {
  bool inside = false;
  for (std::size_t i = 0, n = poly.size(), j = n - 1; i < n; j = i++) {
    const Point& a = poly[i];
    const Point& b = poly[j];
    if ((a.y > p.y) != (b.y > p.y) &&
        p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x)
      inside = !inside;
  }
  return inside;
}

namespace {

bool on_segment(Point a, Point b, Point p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
         std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y);
}

bool segments_touch(Point a, Point b, Point c, Point d) {
  const int o1 = geometry::orient2d(a, b, c), o2 = geometry::orient2d(a, b, d);
  const int o3 = geometry::orient2d(c, d, a), o4 = geometry::orient2d(c, d, b);
  if (o1 != o2 && o3 != o4) return true;
  return (o1 == 0 && on_segment(a, b, c)) || (o2 == 0 && on_segment(a, b, d)) ||
         (o3 == 0 && on_segment(c, d, a)) || (o4 == 0 && on_segment(c, d, b));
}

}  // namespace

bool is_simple(const Polygon& poly) {
  const std::size_t n = poly.size();
  if (n < 3 || !(polygon_area(poly) > 0)) return false;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      if (poly[i] == poly[j]) return false;
      const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
      if (!adjacent &&
          segments_touch(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]))
        return false;
    }
  return true;
}

PixelBox bounding_pixels(const Polygon& poly) {
  double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
  for (const Point& p : poly) {
    x0 = std::min(x0, p.x);
    y0 = std::min(y0, p.y);
    x1 = std::max(x1, p.x);
    y1 = std::max(y1, p.y);
  }
  return {static_cast<int>(std::floor(x0)), static_cast<int>(std::floor(y0)),
          static_cast<int>(std::ceil(x1)) + 1, static_cast<int>(std::ceil(y1)) + 1};
}

const char* to_string(Provenance p) { return p == Provenance::manual ? "manual" : "mined"; }

void write_annotations(const std::filesystem::path& path,
                       const std::vector<AnnotatedRegion>& regions) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : regions) {
    nlohmann::json poly = nlohmann::json::array();
    for (const Point& p : r.polygon) poly.push_back({p.x, p.y});
    j.push_back({{"slide_id", r.slide_id},
                 {"label", r.label},
                 {"provenance", to_string(r.provenance)},
                 {"polygon", poly}});
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump() << '\n';
}

std::vector<AnnotatedRegion> read_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<AnnotatedRegion> out;
  try {
    for (const auto& r : nlohmann::json::parse(in)) {
      AnnotatedRegion a;
      a.slide_id = r.at("slide_id").get<std::string>();
      a.label = r.at("label").get<std::string>();
      const auto prov = r.at("provenance").get<std::string>();
      if (prov != "manual" && prov != "mined") throw IoError("unknown provenance " + prov);
      a.provenance = prov == "manual" ? Provenance::manual : Provenance::mined;
      for (const auto& p : r.at("polygon")) a.polygon.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
      out.push_back(std::move(a));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  return out;
}

}  // namespace ssc
