#pragma once

#include <vector>

#include "ssc/geometry/delaunay.hpp"
#include "ssc/grid.hpp"
#include "ssc/wsi/maps.hpp"

namespace ssc::geometry {

struct RegionProps {
  int area_cells = 0;
  double area_um2 = 0;
  Point centroid;  // cell units: x = column, y = row
  double eccentricity = 0;
};

/// Cells are unit squares; the covariance includes the 1/12 of each square
/// so a lone cell is isotropic.
RegionProps region_props(const wsi::Component& component, double cell_um);

struct AreaVoronoi {
  Grid<int> owner;           // region id, -1 outside the domain
  std::vector<int> zoi_cells;
};

/// Every domain cell goes to the region with the nearest cell (Euclidean,
/// 0 inside a region); ties go to the lower region id.
AreaVoronoi area_voronoi(const std::vector<wsi::Component>& regions, const Mask& domain);

/// Squared Euclidean distance to the nearest set cell; cells with no set cell
/// anywhere get a large sentinel.
Grid<double> squared_distance_transform(const Mask& sources);

/// Tissue areas (epithelium, stroma, fat) in um^2 then their fractions.
std::array<double, 6> tissue_amounts(const wsi::LabelMap& map);

}  // namespace ssc::geometry
