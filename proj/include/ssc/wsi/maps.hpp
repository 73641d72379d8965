#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ssc/grid.hpp"

namespace ssc::wsi {

enum class Tissue : std::uint8_t { background = 0, epithelium = 1, stroma = 2, fat = 3 };

/// Cell (i, j) sees the input window whose top-left pixel is
/// (j * stride, i * stride); its centre pixel is origin + stride * (j, i).
struct MapGeometry {
  int stride = 1;
  int window = 1;
  int origin = 0;
  double spacing_um = 0.455;

  double cell_um() const { return stride * spacing_um; }
  /// Number of cells along an axis of `pixels` length.
  int extent(int pixels) const { return pixels < window ? 0 : (pixels - window) / stride + 1; }
  int centre(int index) const { return origin + stride * index; }
  bool operator==(const MapGeometry&) const = default;
};

struct LabelMap {
  MapGeometry geometry;
  Grid<std::uint8_t> labels;
};

struct LikelihoodMap {
  MapGeometry geometry;
  Grid<float> values;
  Mask applicable;
};

struct Cell {
  int row = 0;
  int col = 0;
  bool operator==(const Cell&) const = default;
};
using Component = std::vector<Cell>;

LikelihoodMap restrict_to_stroma(const LikelihoodMap& cnn2, const LabelMap& cnn1);
Mask threshold_map(const LikelihoodMap& map, double t);

/// 8-connected components, each sorted row-major, listed by (min row, min col).
std::vector<Component> connected_components(const Mask& mask);

/// Label maps use palette indices; likelihoods are 16-bit with
/// round(p * 65534) and 65535 marking not-applicable cells.
void write_label_map(const std::filesystem::path& png, const LabelMap& map);
LabelMap read_label_map(const std::filesystem::path& png);
void write_likelihood_map(const std::filesystem::path& png, const LikelihoodMap& map);
LikelihoodMap read_likelihood_map(const std::filesystem::path& png);

constexpr std::uint16_t kNotApplicable16 = 65535;

}  // namespace ssc::wsi
