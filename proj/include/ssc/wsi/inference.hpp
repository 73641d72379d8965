#pragma once

#include "ssc/arch/architectures.hpp"
#include "ssc/nn/network.hpp"
#include "ssc/wsi/maps.hpp"
#include "ssc/wsi/slide.hpp"

namespace ssc::wsi {

/// Network input for an RGB block: values shifted to [-0.5, 0.5].
nn::Tensor to_input(const RgbImage& rgb);
void to_input(const RgbImage& rgb, nn::Tensor& batch, int index);

/// Tissue = saturation >= 0.04 and value <= 0.98, then a 5x5 closing.
/// Pixels outside the image do not take part in the closing.
Mask background_mask(const RgbImage& rgb);

struct ProbabilityMap {
  MapGeometry geometry;
  nn::Tensor probs;  // (1, classes, rows, cols)
  Mask background;   // cells whose stride x stride footprint holds no tissue
};

MapGeometry map_geometry(const arch::StrideProfile& profile, double spacing_um);

/// Runs a convolutionalized network over the slide. `tile_px` = 0 means one
/// pass over the whole slide; otherwise tiles of at most tile_px pixels
/// overlapping by (window - stride) are stitched.
ProbabilityMap infer_map(const nn::Network& fcn, const arch::StrideProfile& profile,
                         const SlideImage& slide, const Mask& tissue, int tile_px = 0);

/// CNN I: argmax over (epithelium, stroma, fat) shifted to Tissue codes.
LabelMap to_label_map(const ProbabilityMap& map);
/// CNN II: probability of channel `positive`; background cells not applicable.
LikelihoodMap to_likelihood_map(const ProbabilityMap& map, int positive = 1);

}  // namespace ssc::wsi
