#include "tsnca/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>

#include "tsnca/losses.hpp"

namespace tsnca::metrics {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kDegPerRad = 180.0 / std::numbers::pi;

void check_pair(const RgbImage& pred, const RgbImage& gt, const char* what) {
  if (!pred.same_dims(gt)) {
    throw ShapeError(std::string(what) + ": prediction is " + std::to_string(pred.height()) + "x" +
                     std::to_string(pred.width()) + " but ground truth is " +
                     std::to_string(gt.height()) + "x" + std::to_string(gt.width()));
  }
  if (pred.pixels() == 0) throw ShapeError(std::string(what) + ": empty images");
  validate_unit_range(pred, what);
  validate_unit_range(gt, what);
}

double squared_error_sum(const RgbImage& pred, const RgbImage& gt) {
  double acc = 0.0;
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < pred.pixels(); ++i) {
      const double d = static_cast<double>(pred.planes[c].values[i]) - gt.planes[c].values[i];
      acc += d * d;
    }
  return acc;
}

double degrees(double rad) { return rad * kDegPerRad; }

double wrap_degrees(double deg) {
  if (deg < 0.0) deg += 360.0;
  return deg;
}

// Q over one block, or nullopt when the block is skipped.
std::optional<double> uqi_block(const ImagePlane& x, const ImagePlane& y, std::size_t y0,
                                std::size_t x0, std::size_t window) {
  const double n = static_cast<double>(window * window);
  double sx = 0.0, sy = 0.0;
  for (std::size_t r = 0; r < window; ++r)
    for (std::size_t c = 0; c < window; ++c) {
      sx += x.at(y0 + r, x0 + c);
      sy += y.at(y0 + r, x0 + c);
    }
  const double mx = sx / n, my = sy / n;
  double vx = 0.0, vy = 0.0, cxy = 0.0;
  for (std::size_t r = 0; r < window; ++r)
    for (std::size_t c = 0; c < window; ++c) {
      const double dx = x.at(y0 + r, x0 + c) - mx;
      const double dy = y.at(y0 + r, x0 + c) - my;
      vx += dx * dx;
      vy += dy * dy;
      cxy += dx * dy;
    }
  vx /= n - 1.0;
  vy /= n - 1.0;
  cxy /= n - 1.0;
  const double var_sum = vx + vy;
  const double mean_sq = mx * mx + my * my;
  if (var_sum * mean_sq == 0.0) {
    if (var_sum == 0.0 && mean_sq == 0.0) return 1.0;
    return std::nullopt;
  }
  return 4.0 * cxy * mx * my / (var_sum * mean_sq);
}

}  // namespace

double mse(const RgbImage& pred, const RgbImage& gt) {
  check_pair(pred, gt, "mse");
  return squared_error_sum(pred, gt) / static_cast<double>(3 * pred.pixels());
}

double psnr(const RgbImage& pred, const RgbImage& gt) {
  const double e = mse(pred, gt);
  if (e == 0.0) return kInf;
  return 10.0 * std::log10(1.0 / e);
}

double rmse(const RgbImage& pred, const RgbImage& gt) { return std::sqrt(mse(pred, gt)); }

double ssim(const RgbImage& pred, const RgbImage& gt) {
  check_pair(pred, gt, "ssim");
  return losses::ssim(to_tensor<double>(pred), to_tensor<double>(gt)).item();
}

double uqi(const RgbImage& pred, const RgbImage& gt, std::size_t window) {
  check_pair(pred, gt, "uqi");
  if (window == 0 || pred.height() < window || pred.width() < window) {
    throw ShapeError("uqi: image " + std::to_string(pred.height()) + "x" +
                     std::to_string(pred.width()) + " smaller than " + std::to_string(window) +
                     "x" + std::to_string(window) + " window");
  }
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y0 = 0; y0 + window <= pred.height(); ++y0)
      for (std::size_t x0 = 0; x0 + window <= pred.width(); ++x0) {
        if (auto q = uqi_block(pred.planes[c], gt.planes[c], y0, x0, window)) {
          total += *q;
          ++counted;
        }
      }
  if (counted == 0) return pred == gt ? 1.0 : 0.0;
  return total / static_cast<double>(counted);
}

double srer(const RgbImage& pred, const RgbImage& gt) {
  check_pair(pred, gt, "srer");
  double signal = 0.0;
  for (const auto& p : gt.planes)
    for (const float v : p.values) signal += static_cast<double>(v) * v;
  const double error = squared_error_sum(pred, gt);
  if (error == 0.0) return kInf;
  return 10.0 * std::log10(signal / error);
}

std::vector<double> pixel_angles(const RgbImage& pred, const RgbImage& gt) {
  check_pair(pred, gt, "pixel_angles");
  std::vector<double> angles;
  angles.reserve(pred.pixels());
  for (std::size_t i = 0; i < pred.pixels(); ++i) {
    const double p[3] = {pred.r().values[i], pred.g().values[i], pred.b().values[i]};
    const double g[3] = {gt.r().values[i], gt.g().values[i], gt.b().values[i]};
    const double pp = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
    const double gg = g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
    if (pp == 0.0 || gg == 0.0) continue;
    // atan2(|p x g|, p.g) stays exact for parallel vectors, unlike acos.
    const double cx = p[1] * g[2] - p[2] * g[1];
    const double cy = p[2] * g[0] - p[0] * g[2];
    const double cz = p[0] * g[1] - p[1] * g[0];
    const double cross = std::sqrt(cx * cx + cy * cy + cz * cz);
    const double dot = p[0] * g[0] + p[1] * g[1] + p[2] * g[2];
    angles.push_back(degrees(std::atan2(cross, dot)));
  }
  return angles;
}

double sam(const RgbImage& pred, const RgbImage& gt) {
  const auto angles = pixel_angles(pred, gt);
  if (angles.empty()) return 0.0;
  double acc = 0.0;
  for (const double a : angles) acc += a;
  return acc / static_cast<double>(angles.size());
}

AngularStats angular_error(const RgbImage& pred, const RgbImage& gt) {
  auto angles = pixel_angles(pred, gt);
  AngularStats stats;
  if (angles.empty()) return stats;
  double acc = 0.0;
  for (const double a : angles) acc += a;
  stats.mean = acc / static_cast<double>(angles.size());
  const std::size_t mid = angles.size() / 2;
  std::nth_element(angles.begin(), angles.begin() + static_cast<std::ptrdiff_t>(mid), angles.end());
  const double upper = angles[mid];
  if (angles.size() % 2 == 1) {
    stats.median = upper;
  } else {
    const double lower = *std::max_element(angles.begin(), angles.begin() + static_cast<std::ptrdiff_t>(mid));
    stats.median = 0.5 * (lower + upper);
  }
  return stats;
}

Lab srgb_to_lab(double r, double g, double b) {
  auto linear = [](double c) {
    return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
  };
  static constexpr double m[3][3] = {{0.4124564, 0.3575761, 0.1804375},
                                     {0.2126729, 0.7151522, 0.0721750},
                                     {0.0193339, 0.1191920, 0.9503041}};
  // D65 white taken as the image of RGB (1,1,1) so greys have a = b = 0.
  static constexpr double xn = m[0][0] + m[0][1] + m[0][2];
  static constexpr double yn = m[1][0] + m[1][1] + m[1][2];
  static constexpr double zn = m[2][0] + m[2][1] + m[2][2];
  const double rl = linear(r), gl = linear(g), bl = linear(b);
  const double x = m[0][0] * rl + m[0][1] * gl + m[0][2] * bl;
  const double y = m[1][0] * rl + m[1][1] * gl + m[1][2] * bl;
  const double z = m[2][0] * rl + m[2][1] * gl + m[2][2] * bl;
  constexpr double delta = 6.0 / 29.0;
  auto f = [&](double t) {
    return t > delta * delta * delta ? std::cbrt(t) : t / (3.0 * delta * delta) + 4.0 / 29.0;
  };
  const double fx = f(x / xn), fy = f(y / yn), fz = f(z / zn);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

double ciede2000(const Lab& x, const Lab& y) {
  constexpr double pow25_7 = 6103515625.0;  // 25^7
  const double c1 = std::hypot(x.a, x.b);
  const double c2 = std::hypot(y.a, y.b);
  const double c_bar7 = std::pow(0.5 * (c1 + c2), 7.0);
  const double g = 0.5 * (1.0 - std::sqrt(c_bar7 / (c_bar7 + pow25_7)));
  const double a1 = (1.0 + g) * x.a;
  const double a2 = (1.0 + g) * y.a;
  const double cp1 = std::hypot(a1, x.b);
  const double cp2 = std::hypot(a2, y.b);
  const double hp1 = (a1 == 0.0 && x.b == 0.0) ? 0.0 : wrap_degrees(degrees(std::atan2(x.b, a1)));
  const double hp2 = (a2 == 0.0 && y.b == 0.0) ? 0.0 : wrap_degrees(degrees(std::atan2(y.b, a2)));

  const double dl = y.l - x.l;
  const double dc = cp2 - cp1;
  double dh = 0.0;
  const bool chroma_zero = cp1 * cp2 == 0.0;
  if (!chroma_zero) {
    dh = hp2 - hp1;
    if (dh > 180.0) dh -= 360.0;
    else if (dh < -180.0) dh += 360.0;
  }
  const double dH = 2.0 * std::sqrt(cp1 * cp2) * std::sin(dh / 2.0 / kDegPerRad);

  const double l_bar = 0.5 * (x.l + y.l);
  const double c_bar = 0.5 * (cp1 + cp2);
  double h_bar = hp1 + hp2;
  if (!chroma_zero) {
    if (std::abs(hp1 - hp2) <= 180.0) h_bar *= 0.5;
    else if (hp1 + hp2 < 360.0) h_bar = 0.5 * (hp1 + hp2 + 360.0);
    else h_bar = 0.5 * (hp1 + hp2 - 360.0);
  }
  auto cosd = [](double d) { return std::cos(d / kDegPerRad); };
  const double t = 1.0 - 0.17 * cosd(h_bar - 30.0) + 0.24 * cosd(2.0 * h_bar) +
                   0.32 * cosd(3.0 * h_bar + 6.0) - 0.20 * cosd(4.0 * h_bar - 63.0);
  const double d_theta = 30.0 * std::exp(-std::pow((h_bar - 275.0) / 25.0, 2.0));
  const double c_bar_7 = std::pow(c_bar, 7.0);
  const double rc = 2.0 * std::sqrt(c_bar_7 / (c_bar_7 + pow25_7));
  const double l50 = (l_bar - 50.0) * (l_bar - 50.0);
  const double sl = 1.0 + 0.015 * l50 / std::sqrt(20.0 + l50);
  const double sc = 1.0 + 0.045 * c_bar;
  const double sh = 1.0 + 0.015 * c_bar * t;
  const double rt = -std::sin(2.0 * d_theta / kDegPerRad) * rc;

  const double tl = dl / sl, tc = dc / sc, th = dH / sh;
  return std::sqrt(tl * tl + tc * tc + th * th + rt * tc * th);
}

double delta_e2000(const RgbImage& pred, const RgbImage& gt) {
  check_pair(pred, gt, "delta_e2000");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.pixels(); ++i) {
    const Lab p = srgb_to_lab(pred.r().values[i], pred.g().values[i], pred.b().values[i]);
    const Lab g = srgb_to_lab(gt.r().values[i], gt.g().values[i], gt.b().values[i]);
    acc += ciede2000(p, g);
  }
  return acc / static_cast<double>(pred.pixels());
}

MetricReport evaluate_pair(const RgbImage& pred, const RgbImage& gt) {
  MetricReport r;
  r.psnr = psnr(pred, gt);
  r.ssim = ssim(pred, gt);
  r.rmse = rmse(pred, gt);
  r.uqi = uqi(pred, gt);
  r.srer = srer(pred, gt);
  r.sam = sam(pred, gt);
  const auto angular = angular_error(pred, gt);
  r.angular_mean = angular.mean;
  r.angular_median = angular.median;
  r.delta_e = delta_e2000(pred, gt);
  return r;
}

}  // namespace tsnca::metrics
