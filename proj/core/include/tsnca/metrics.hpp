#pragma once

#include <array>
#include <string_view>
#include <vector>

#include "tsnca/image.hpp"

// Full-reference quality and colour-fidelity metrics. Every function takes
// (prediction, ground truth) images of equal dimensions with values in
// [0,1] and throws ShapeError / RangeError otherwise.
namespace tsnca::metrics {

double mse(const RgbImage& pred, const RgbImage& gt);

// 10*log10(1/mse); +infinity for identical images.
double psnr(const RgbImage& pred, const RgbImage& gt);
double rmse(const RgbImage& pred, const RgbImage& gt);

// Gaussian-window SSIM averaged over pixels and channels.
double ssim(const RgbImage& pred, const RgbImage& gt);

// Universal quality index over every window x window block (stride 1),
// averaged over blocks and channels. Blocks with a zero denominator count
// as 1 when both blocks are identically zero and are skipped otherwise; if
// every block is skipped the result is 1 for identical images, else 0.
double uqi(const RgbImage& pred, const RgbImage& gt, std::size_t window = 8);

// 20*log10(||gt|| / ||gt - pred||) in dB; +infinity for identical images.
double srer(const RgbImage& pred, const RgbImage& gt);

// Per-pixel angle in degrees between RGB vectors, pixels where either
// vector is zero omitted.
std::vector<double> pixel_angles(const RgbImage& pred, const RgbImage& gt);

// Mean pixel angle in degrees (0 when no pixel qualifies).
double sam(const RgbImage& pred, const RgbImage& gt);

struct AngularStats {
  double mean = 0.0;
  double median = 0.0;
};
// Median of an even count is the midpoint of the two central values.
AngularStats angular_error(const RgbImage& pred, const RgbImage& gt);

struct Lab {
  double l = 0.0, a = 0.0, b = 0.0;
};
// sRGB in [0,1] -> linear (piecewise 2.4 gamma) -> XYZ (D65) -> CIELAB.
Lab srgb_to_lab(double r, double g, double b);
// CIEDE2000 with kL = kC = kH = 1.
double ciede2000(const Lab& x, const Lab& y);
// Mean CIEDE2000 over pixels.
double delta_e2000(const RgbImage& pred, const RgbImage& gt);

struct MetricReport {
  double psnr = 0.0;
  double ssim = 0.0;
  double rmse = 0.0;
  double uqi = 0.0;
  double srer = 0.0;
  double sam = 0.0;
  double angular_mean = 0.0;
  double angular_median = 0.0;
  double delta_e = 0.0;

  static constexpr std::array<std::string_view, 9> field_names{
      "psnr", "ssim", "rmse", "uqi", "srer", "sam", "angular_mean", "angular_median", "delta_e"};
  std::array<double, 9> values() const {
    return {psnr, ssim, rmse, uqi, srer, sam, angular_mean, angular_median, delta_e};
  }
};

MetricReport evaluate_pair(const RgbImage& pred, const RgbImage& gt);

}  // namespace tsnca::metrics
