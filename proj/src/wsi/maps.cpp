#include "ssc/wsi/maps.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "ssc/io/png.hpp"

namespace ssc::wsi {

namespace {

const std::array<std::array<std::uint8_t, 3>, 4> kLabelPalette{{
    {255, 255, 255}, {112, 48, 160}, {236, 140, 180}, {250, 230, 160}}};

void write_geometry(const std::filesystem::path& png, const MapGeometry& g) {
  nlohmann::json j{{"stride", g.stride},
                   {"window", g.window},
                   {"origin", g.origin},
                   {"spacing_um", g.spacing_um}};
  std::ofstream out(std::filesystem::path(png).replace_extension(".json"));
  if (!out) throw IoError("cannot write geometry sidecar for " + png.string());
  out << j.dump(2) << '\n';
}

MapGeometry read_geometry(const std::filesystem::path& png) {
  const auto path = std::filesystem::path(png).replace_extension(".json");
  std::ifstream in(path);
  if (!in) throw IoError("missing geometry sidecar " + path.string());
  try {
    nlohmann::json j = nlohmann::json::parse(in);
    MapGeometry g;
    g.stride = j.at("stride").get<int>();
    g.window = j.at("window").get<int>();
    g.origin = j.at("origin").get<int>();
    g.spacing_um = j.at("spacing_um").get<double>();
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace

LikelihoodMap restrict_to_stroma(const LikelihoodMap& cnn2, const LabelMap& cnn1) {
  if (!(cnn2.geometry == cnn1.geometry) || !cnn2.values.same_shape(cnn1.labels) ||
      !cnn2.applicable.same_shape(cnn2.values))
    throw ShapeError("restrict_to_stroma: maps are not aligned");
  LikelihoodMap out = cnn2;
  for (std::size_t i = 0; i < out.values.size(); ++i)
    if (cnn1.labels[i] != static_cast<std::uint8_t>(Tissue::stroma)) out.applicable[i] = 0;
  return out;
}

Mask threshold_map(const LikelihoodMap& map, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("threshold must lie in [0, 1]");
  Mask out(map.values.rows(), map.values.cols());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = map.applicable[i] && map.values[i] >= t;
  return out;
}

std::vector<Component> connected_components(const Mask& mask) {
  std::vector<Component> out;
  Grid<std::uint8_t> seen(mask.rows(), mask.cols());
  std::vector<Cell> stack;
  // Raster order discovery: the first cell found is the component's minimum
  // row, and within that row its minimum column.
  for (int r = 0; r < mask.rows(); ++r)
    for (int c = 0; c < mask.cols(); ++c) {
      if (!mask.at(r, c) || seen.at(r, c)) continue;
      Component comp;
      seen.at(r, c) = 1;
      stack.push_back({r, c});
      while (!stack.empty()) {
        Cell cur = stack.back();
        stack.pop_back();
        comp.push_back(cur);
        for (int dr = -1; dr <= 1; ++dr)
          for (int dc = -1; dc <= 1; ++dc) {
            const int rr = cur.row + dr, cc = cur.col + dc;
            if (!mask.contains(rr, cc) || !mask.at(rr, cc) || seen.at(rr, cc)) continue;
            seen.at(rr, cc) = 1;
            stack.push_back({rr, cc});
          }
      }
      std::sort(comp.begin(), comp.end(), [](const Cell& a, const Cell& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
      });
      out.push_back(std::move(comp));
    }
  return out;
}

void write_label_map(const std::filesystem::path& png, const LabelMap& map) {
  io::write_palette_png(png, map.labels, kLabelPalette);
  write_geometry(png, map.geometry);
}

LabelMap read_label_map(const std::filesystem::path& png) {
  LabelMap m;
  m.labels = io::read_index_png(png);
  for (std::uint8_t v : m.labels.cells())
    if (v > 3) throw IoError(png.string() + ": label out of range");
  m.geometry = read_geometry(png);
  return m;
}

void write_likelihood_map(const std::filesystem::path& png, const LikelihoodMap& map) {
  Grid<std::uint16_t> g(map.values.rows(), map.values.cols());
  for (std::size_t i = 0; i < g.size(); ++i)
    g[i] = map.applicable[i]
               ? static_cast<std::uint16_t>(
                     std::lround(std::clamp(map.values[i], 0.0f, 1.0f) * 65534.0))
               : kNotApplicable16;
  io::write_gray16_png(png, g);
  write_geometry(png, map.geometry);
}

LikelihoodMap read_likelihood_map(const std::filesystem::path& png) {
  Grid<std::uint16_t> g = io::read_gray16_png(png);
  LikelihoodMap m;
  m.geometry = read_geometry(png);
  m.values = Grid<float>(g.rows(), g.cols());
  m.applicable = Mask(g.rows(), g.cols());
  for (std::size_t i = 0; i < g.size(); ++i) {
    m.applicable[i] = g[i] != kNotApplicable16;
    m.values[i] = m.applicable[i] ? static_cast<float>(g[i] / 65534.0) : 0.0f;
  }
  return m;
}

}  // namespace ssc::wsi
