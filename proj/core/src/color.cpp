#include "tsnca/color.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tsnca::color {

std::array<double, 3> rgb_to_hsv(double r, double g, double b) {
  const double hi = std::max({r, g, b});
  const double lo = std::min({r, g, b});
  const double chroma = hi - lo;
  const double s = hi == 0.0 ? 0.0 : chroma / hi;
  double sector = 0.0;
  if (chroma > 0.0) {
    if (hi == r) {
      sector = (g - b) / chroma;
      if (sector < 0.0) sector += 6.0;
    } else if (hi == g) {
      sector = (b - r) / chroma + 2.0;
    } else {
      sector = (r - g) / chroma + 4.0;
    }
  }
  double h = sector / 6.0;
  if (h >= 1.0) h = 0.0;
  return {h, s, hi};
}

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
  if (s == 0.0) return {v, v, v};
  const double h6 = h * 6.0;
  const double base = std::floor(h6);
  const double f = h6 - base;
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - s * f);
  const double t = v * (1.0 - s * (1.0 - f));
  std::array<double, 3> rgb;
  switch (static_cast<int>(base) % 6) {
    case 0: rgb = {v, t, p}; break;
    case 1: rgb = {q, v, p}; break;
    case 2: rgb = {p, v, t}; break;
    case 3: rgb = {p, q, v}; break;
    case 4: rgb = {t, p, v}; break;
    default: rgb = {v, p, q}; break;
  }
  for (auto& c : rgb) c = std::clamp(c, 0.0, 1.0);
  return rgb;
}

HsvImage rgb_to_hsv(const RgbImage& image) {
  validate_unit_range(image, "rgb_to_hsv");
  HsvImage out(image.height(), image.width());
  for (std::size_t i = 0; i < image.pixels(); ++i) {
    const auto hsv = rgb_to_hsv(image.r().values[i], image.g().values[i], image.b().values[i]);
    for (std::size_t c = 0; c < 3; ++c) out.planes[c].values[i] = static_cast<float>(hsv[c]);
  }
  // float rounding can lift a hue just below 1 onto 1.0f
  for (auto& h : out.h().values) {
    if (h >= 1.0f) h = 0.0f;
  }
  return out;
}

RgbImage hsv_to_rgb(const HsvImage& image) {
  validate_unit_range(image, "hsv_to_rgb");
  for (const float h : image.h().values) {
    if (h >= 1.0f) throw RangeError("hsv_to_rgb: hue " + std::to_string(h) + " outside [0,1)");
  }
  RgbImage out(image.height(), image.width());
  for (std::size_t i = 0; i < image.pixels(); ++i) {
    const auto rgb = hsv_to_rgb(image.h().values[i], image.s().values[i], image.v().values[i]);
    for (std::size_t c = 0; c < 3; ++c) out.planes[c].values[i] = static_cast<float>(rgb[c]);
  }
  return out;
}

HsvImage replace_value_channel(const HsvImage& original, const ImagePlane& new_v) {
  if (!original.planes[0].same_dims(new_v)) {
    throw ShapeError("replace_value_channel: V plane is " + std::to_string(new_v.height) + "x" +
                     std::to_string(new_v.width) + " but image is " +
                     std::to_string(original.height()) + "x" + std::to_string(original.width()));
  }
  validate_unit_range(new_v, "replace_value_channel");
  HsvImage out = original;
  out.v() = new_v;
  return out;
}

}  // namespace tsnca::color
