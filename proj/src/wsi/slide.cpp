#include "ssc/wsi/slide.hpp"

#include "ssc/common.hpp"

namespace ssc::wsi {

RgbImage SlideImage::tile(int x, int y, int w, int h) const {
  if (x < 0 || y < 0 || w < 0 || h < 0 || x + w > rgb.width || y + h > rgb.height)
    throw ShapeError("tile outside slide " + slide_id);
  RgbImage out(w, h);
  for (int c = 0; c < 3; ++c)
    for (int yy = 0; yy < h; ++yy)
      for (int xx = 0; xx < w; ++xx) out.at(c, yy, xx) = rgb.at(c, y + yy, x + xx);
  return out;
}

}  // namespace ssc::wsi
