#include "ssc/wsi/inference.hpp"

#include <algorithm>

#include "ssc/color.hpp"

namespace ssc::wsi {

void to_input(const RgbImage& rgb, nn::Tensor& batch, int index) {
  const auto& s = batch.shape();
  if (s.c != 3 || s.h != rgb.height || s.w != rgb.width || index >= s.n)
    throw ShapeError("to_input: batch slot does not match the image");
  float* dst = batch.ptr() + static_cast<std::size_t>(index) * 3 * s.plane();
  for (std::size_t i = 0; i < rgb.data.size(); ++i) dst[i] = rgb.data[i] - 0.5f;
}

nn::Tensor to_input(const RgbImage& rgb) {
  nn::Tensor t({1, 3, rgb.height, rgb.width});
  to_input(rgb, t, 0);
  return t;
}

Mask background_mask(const RgbImage& rgb) {
  const int h = rgb.height, w = rgb.width;
  Mask raw(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const Hsv v = rgb_to_hsv(rgb.at(0, y, x), rgb.at(1, y, x), rgb.at(2, y, x));
      raw.at(y, x) = v.s >= 0.04 && v.v <= 0.98;
    }
  // closing = dilation then erosion, both separable for a square element
  auto filter = [&](const Mask& in, bool dilate) {
    Mask tmp(h, w), out(h, w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        bool acc = !dilate;
        for (int d = -2; d <= 2; ++d) {
          const int xx = x + d;
          if (xx < 0 || xx >= w) continue;
          acc = dilate ? (acc || in.at(y, xx)) : (acc && in.at(y, xx));
        }
        tmp.at(y, x) = acc;
      }
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        bool acc = !dilate;
        for (int d = -2; d <= 2; ++d) {
          const int yy = y + d;
          if (yy < 0 || yy >= h) continue;
          acc = dilate ? (acc || tmp.at(yy, x)) : (acc && tmp.at(yy, x));
        }
        out.at(y, x) = acc;
      }
    return out;
  };
  return filter(filter(raw, true), false);
}

MapGeometry map_geometry(const arch::StrideProfile& profile, double spacing_um) {
  MapGeometry g;
  g.stride = profile.output_stride;
  g.window = profile.receptive_field;
  g.origin = profile.receptive_field / 2;
  g.spacing_um = spacing_um;
  return g;
}

ProbabilityMap infer_map(const nn::Network& fcn, const arch::StrideProfile& profile,
                         const SlideImage& slide, const Mask& tissue, int tile_px) {
  for (const auto& l : fcn.layers())
    if (l.kind == nn::LayerKind::dense)
      throw ConfigError("infer_map needs a convolutionalized network");
  if (tissue.rows() != slide.height() || tissue.cols() != slide.width())
    throw ShapeError("tissue mask does not match the slide");
  ProbabilityMap out;
  out.geometry = map_geometry(profile, slide.spacing_um);
  const MapGeometry& g = out.geometry;
  const int rows = g.extent(slide.height()), cols = g.extent(slide.width());
  if (rows == 0 || cols == 0) throw ShapeError("slide smaller than the network window");
  if (tile_px == 0) tile_px = std::max(g.window + (rows - 1) * g.stride, g.window + (cols - 1) * g.stride);
  if (tile_px < profile.min_input || tile_px < g.window)
    throw ConfigError("tile smaller than the network's minimum input");
  const int per_tile = (tile_px - g.window) / g.stride + 1;

  int classes = -1;
  for (int i0 = 0; i0 < rows; i0 += per_tile)
    for (int j0 = 0; j0 < cols; j0 += per_tile) {
      const int tr = std::min(per_tile, rows - i0), tc = std::min(per_tile, cols - j0);
      const RgbImage block = slide.tile(j0 * g.stride, i0 * g.stride, g.window + (tc - 1) * g.stride,
                                        g.window + (tr - 1) * g.stride);
      nn::Tensor p = fcn.predict(to_input(block));
      if (p.shape().h != tr || p.shape().w != tc)
        throw ShapeError("network output does not match the tile grid");
      if (classes < 0) {
        classes = p.shape().c;
        out.probs = nn::Tensor({1, classes, rows, cols});
      }
      for (int c = 0; c < classes; ++c)
        for (int i = 0; i < tr; ++i)
          for (int j = 0; j < tc; ++j) out.probs.at(0, c, i0 + i, j0 + j) = p.at(0, c, i, j);
    }

  out.background = Mask(rows, cols);
  const int half = g.stride / 2;
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) {
      const int cy = g.centre(i), cx = g.centre(j);
      bool any = false;
      for (int y = std::max(0, cy - half); y < std::min(slide.height(), cy - half + g.stride); ++y)
        for (int x = std::max(0, cx - half); x < std::min(slide.width(), cx - half + g.stride); ++x)
          any = any || tissue.at(y, x);
      out.background.at(i, j) = !any;
    }
  return out;
}

LabelMap to_label_map(const ProbabilityMap& map) {
  const auto& s = map.probs.shape();
  if (s.c != 3) throw ShapeError("label maps need a 3-class network");
  LabelMap out;
  out.geometry = map.geometry;
  out.labels = Grid<std::uint8_t>(s.h, s.w);
  for (int i = 0; i < s.h; ++i)
    for (int j = 0; j < s.w; ++j) {
      if (map.background.at(i, j)) continue;
      int best = 0;
      for (int c = 1; c < 3; ++c)
        if (map.probs.at(0, c, i, j) > map.probs.at(0, best, i, j)) best = c;
      out.labels.at(i, j) = static_cast<std::uint8_t>(best + 1);
    }
  return out;
}

LikelihoodMap to_likelihood_map(const ProbabilityMap& map, int positive) {
  const auto& s = map.probs.shape();
  if (positive < 0 || positive >= s.c) throw ShapeError("positive channel out of range");
  LikelihoodMap out;
  out.geometry = map.geometry;
  out.values = Grid<float>(s.h, s.w);
  out.applicable = Mask(s.h, s.w);
  for (int i = 0; i < s.h; ++i)
    for (int j = 0; j < s.w; ++j) {
      out.values.at(i, j) = map.probs.at(0, positive, i, j);
      out.applicable.at(i, j) = !map.background.at(i, j);
    }
  return out;
}

}  // namespace ssc::wsi
