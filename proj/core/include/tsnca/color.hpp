#pragma once

#include <array>

#include "tsnca/image.hpp"

namespace tsnca::color {

// Per-pixel hexcone conversion. Hue is a fraction of a full turn in [0,1);
// hue is 0 wherever saturation is 0.
std::array<double, 3> rgb_to_hsv(double r, double g, double b);
std::array<double, 3> hsv_to_rgb(double h, double s, double v);

// Throw RangeError for values outside [0,1] (hue outside [0,1)).
HsvImage rgb_to_hsv(const RgbImage& image);
RgbImage hsv_to_rgb(const HsvImage& image);

// H and S copied from original, V replaced by new_v.
HsvImage replace_value_channel(const HsvImage& original, const ImagePlane& new_v);

}  // namespace tsnca::color
