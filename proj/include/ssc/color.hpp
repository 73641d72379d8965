#pragma once

#include <algorithm>
#include <cmath>

namespace ssc {

struct Hsv {
  double h = 0;  // degrees in [0, 360)
  double s = 0;
  double v = 0;
};

inline Hsv rgb_to_hsv(double r, double g, double b) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double d = mx - mn;
  Hsv out;
  out.v = mx;
  out.s = mx > 0 ? d / mx : 0.0;
  if (d <= 0) return out;
  double h;
  if (mx == r)
    h = std::fmod((g - b) / d, 6.0);
  else if (mx == g)
    h = (b - r) / d + 2.0;
  else
    h = (r - g) / d + 4.0;
  h *= 60.0;
  if (h < 0) h += 360.0;
  out.h = h;
  return out;
}

inline void hsv_to_rgb(const Hsv& in, double& r, double& g, double& b) {
  double h = std::fmod(in.h, 360.0);
  if (h < 0) h += 360.0;
  const double c = in.v * in.s;
  const double hp = h / 60.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r1 = 0, g1 = 0, b1 = 0;
  switch (static_cast<int>(hp) % 6) {
    case 0: r1 = c; g1 = x; break;
    case 1: r1 = x; g1 = c; break;
    case 2: g1 = c; b1 = x; break;
    case 3: g1 = x; b1 = c; break;
    case 4: r1 = x; b1 = c; break;
    default: r1 = c; b1 = x; break;
  }
  const double m = in.v - c;
  r = r1 + m;
  g = g1 + m;
  b = b1 + m;
}

}  // namespace ssc
