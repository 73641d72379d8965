#include "ssc/geometry/regions.hpp"

#include <cmath>
#include <limits>

namespace ssc::geometry {

RegionProps region_props(const wsi::Component& component, double cell_um) {
  if (component.empty()) throw Error("region_props of an empty component");
  RegionProps r;
  r.area_cells = static_cast<int>(component.size());
  r.area_um2 = r.area_cells * cell_um * cell_um;
  double sx = 0, sy = 0;
  for (const auto& c : component) {
    sx += c.col;
    sy += c.row;
  }
  const double n = r.area_cells;
  r.centroid = {sx / n, sy / n};
  double cxx = 0, cyy = 0, cxy = 0;
  for (const auto& c : component) {
    const double dx = c.col - r.centroid.x, dy = c.row - r.centroid.y;
    cxx += dx * dx;
    cyy += dy * dy;
    cxy += dx * dy;
  }
  cxx = cxx / n + 1.0 / 12.0;
  cyy = cyy / n + 1.0 / 12.0;
  cxy /= n;
  const double half_tr = 0.5 * (cxx + cyy);
  const double disc = std::sqrt(0.25 * (cxx - cyy) * (cxx - cyy) + cxy * cxy);
  const double l1 = half_tr + disc, l2 = half_tr - disc;
  r.eccentricity = std::sqrt(std::max(0.0, 1.0 - l2 / l1));
  return r;
}

namespace {

// 1-D lower envelope of parabolas (Felzenszwalb and Huttenlocher).
void edt_1d(const std::vector<double>& f, std::vector<double>& d) {
  const int n = static_cast<int>(f.size());
  std::vector<int> v(n);
  std::vector<double> z(n + 1);
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = 1; q < n; ++q) {
    auto meet = [&](int p) {
      return ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * q - 2.0 * p);
    };
    double s = meet(v[k]);
    while (s <= z[k]) s = meet(v[--k]);
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    d[q] = double(q - v[k]) * (q - v[k]) + f[v[k]];
  }
}

}  // namespace

Grid<double> squared_distance_transform(const Mask& sources) {
  const int rows = sources.rows(), cols = sources.cols();
  // Larger than any real squared distance on the grid, small enough that
  // the parabola arithmetic stays exact.
  const double big = 4.0 * (double(rows) * rows + double(cols) * cols) + 1.0;
  Grid<double> out(rows, cols);
  std::vector<double> f(std::max(rows, cols)), d(std::max(rows, cols));
  for (int c = 0; c < cols; ++c) {
    f.resize(rows);
    d.resize(rows);
    for (int r = 0; r < rows; ++r) f[r] = sources.at(r, c) ? 0.0 : big;
    edt_1d(f, d);
    for (int r = 0; r < rows; ++r) out.at(r, c) = d[r];
  }
  for (int r = 0; r < rows; ++r) {
    f.resize(cols);
    d.resize(cols);
    for (int c = 0; c < cols; ++c) f[c] = out.at(r, c);
    edt_1d(f, d);
    for (int c = 0; c < cols; ++c) out.at(r, c) = std::min(d[c], big);
  }
  return out;
}

AreaVoronoi area_voronoi(const std::vector<wsi::Component>& regions, const Mask& domain) {
  if (regions.empty()) throw Error("area_voronoi needs at least one region");
  AreaVoronoi out;
  out.owner = Grid<int>(domain.rows(), domain.cols(), -1);
  out.zoi_cells.assign(regions.size(), 0);
  Grid<double> best(domain.rows(), domain.cols(), std::numeric_limits<double>::infinity());
  for (std::size_t id = 0; id < regions.size(); ++id) {
    Mask src(domain.rows(), domain.cols());
    for (const auto& c : regions[id]) {
      if (!src.contains(c.row, c.col)) throw ShapeError("area_voronoi: region outside grid");
      src.at(c.row, c.col) = 1;
    }
    Grid<double> d = squared_distance_transform(src);
    for (std::size_t i = 0; i < d.size(); ++i)
      if (domain[i] && d[i] < best[i]) {  // strict: ties keep the lower id
        best[i] = d[i];
        out.owner[i] = static_cast<int>(id);
      }
  }
  for (std::size_t i = 0; i < out.owner.size(); ++i)
    if (out.owner[i] >= 0) ++out.zoi_cells[out.owner[i]];
  return out;
}

std::array<double, 6> tissue_amounts(const wsi::LabelMap& map) {
  std::array<double, 3> n{};
  for (std::uint8_t v : map.labels.cells())
    if (v >= 1 && v <= 3) n[v - 1] += 1;
  const double total = n[0] + n[1] + n[2];
  if (total == 0) throw DegenerateGeometry("tissue_amounts: no tissue cells");
  const double cell = map.geometry.cell_um() * map.geometry.cell_um();
  return {n[0] * cell, n[1] * cell, n[2] * cell, n[0] / total, n[1] / total, n[2] / total};
}

}  // namespace ssc::geometry
