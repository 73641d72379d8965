#pragma once

#include <string>

#include "ssc/grid.hpp"

namespace ssc::wsi {

struct SlideImage {
  std::string slide_id;
  std::string patient_id;
  int label = -1;  // 0 benign, 1 cancer, -1 unknown
  double spacing_um = 0.455;
  RgbImage rgb;

  int width() const { return rgb.width; }
  int height() const { return rgb.height; }
  /// Copies the w x h block at (x, y); throws if it leaves the slide.
  RgbImage tile(int x, int y, int w, int h) const;
};

}  // namespace ssc::wsi
