#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace tsnca::oracle {

std::vector<double> conv2d(const std::vector<double>& x, const Shape& xs, const std::vector<double>& w,
                           const Shape& ws, const std::vector<double>& bias, std::size_t stride,
                           std::size_t padding, Shape* out_shape) {
  const std::size_t n = xs[0], ci = xs[1], h = xs[2], wd = xs[3];
  const std::size_t co = ws[0], k = ws[2];
  const std::size_t oh = (h + 2 * padding - k) / stride + 1, ow = (wd + 2 * padding - k) / stride + 1;
  std::vector<double> out(n * co * oh * ow, 0.0);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t o = 0; o < co; ++o)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t xx = 0; xx < ow; ++xx) {
          double acc = bias.empty() ? 0.0 : bias[o];
          for (std::size_t c = 0; c < ci; ++c)
            for (std::size_t ky = 0; ky < k; ++ky)
              for (std::size_t kx = 0; kx < k; ++kx) {
                const long iy = static_cast<long>(y * stride + ky) - static_cast<long>(padding);
                const long ix = static_cast<long>(xx * stride + kx) - static_cast<long>(padding);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(wd)) continue;
                acc += x[((b * ci + c) * h + iy) * wd + ix] * w[((o * ci + c) * k + ky) * k + kx];
              }
          out[((b * co + o) * oh + y) * ow + xx] = acc;
        }
  if (out_shape) *out_shape = {n, co, oh, ow};
  return out;
}

namespace {
long mirror(long i, long n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return i;
}
}  // namespace

double ssim_plane(const std::vector<double>& a, const std::vector<double>& b, std::size_t h,
                  std::size_t w) {
  const int r = 5;
  const double sigma = 1.5;
  double g1[11], total = 0.0;
  for (int i = -r; i <= r; ++i) total += (g1[i + r] = std::exp(-i * i / (2 * sigma * sigma)));
  for (double& v : g1) v /= total;
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double acc = 0.0;
  for (long y = 0; y < static_cast<long>(h); ++y)
    for (long x = 0; x < static_cast<long>(w); ++x) {
      double ma = 0, mb = 0, aa = 0, bb = 0, ab = 0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          const double wt = g1[dy + r] * g1[dx + r];
          const std::size_t idx = mirror(y + dy, h) * w + mirror(x + dx, w);
          ma += wt * a[idx];
          mb += wt * b[idx];
          aa += wt * a[idx] * a[idx];
          bb += wt * b[idx] * b[idx];
          ab += wt * a[idx] * b[idx];
        }
      const double va = aa - ma * ma, vb = bb - mb * mb, cov = ab - ma * mb;
      acc += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
  return acc / static_cast<double>(h * w);
}

std::vector<double> values(const Tensor<double>& t) { return {t.data().begin(), t.data().end()}; }

std::vector<double> features(const FeatureExtractor<double>& fx, const Tensor<double>& x, Shape* shape) {
  Shape s = x.shape();
  std::vector<double> cur = values(x);
  if (s[1] == 1 && fx.input_channels() != 1) {
    std::vector<double> rep;
    const std::size_t plane = s[2] * s[3];
    for (std::size_t n = 0; n < s[0]; ++n)
      for (std::size_t c = 0; c < fx.input_channels(); ++c)
        rep.insert(rep.end(), cur.begin() + n * plane, cur.begin() + (n + 1) * plane);
    cur = rep;
    s[1] = fx.input_channels();
  }
  for (const auto& layer : fx.layers()) {
    if (layer.kind != FeatureExtractor<double>::Layer::Kind::conv_relu) throw std::logic_error("oracle: pooling layers unsupported");
    Shape os;
    cur = conv2d(cur, s, values(layer.weight), layer.weight.shape(), values(layer.bias),
                         layer.stride, layer.weight.dim(2) / 2, &os);
    for (auto& v : cur) v = std::max(v, 0.0);
    s = os;
  }
  *shape = s;
  return cur;
}

double perceptual(const FeatureExtractor<double>& fx, const Tensor<double>& a, const Tensor<double>& b) {
  Shape sa, sb;
  const auto fa = features(fx, a, &sa), fb = features(fx, b, &sb);
  double acc = 0.0;
  for (std::size_t i = 0; i < fa.size(); ++i) acc += (fa[i] - fb[i]) * (fa[i] - fb[i]);
  return acc / static_cast<double>(fa.size());
}

std::pair<std::vector<double>, std::vector<double>> gradients(const Tensor<double>& t) {
  const auto& s = t.shape();
  const std::size_t h = s[2], w = s[3];
  std::vector<double> gx(t.numel(), 0.0), gy(t.numel(), 0.0);
  const auto d = t.data();
  for (std::size_t p = 0; p < s[0] * s[1]; ++p)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const std::size_t i = (p * h + y) * w + x;
        if (x + 1 < w) gx[i] = d[i + 1] - d[i];
        if (y + 1 < h) gy[i] = d[i + w] - d[i];
      }
  return {gx, gy};
}

double ssim(const Tensor<double>& a, const Tensor<double>& b) {
  const auto& s = a.shape();
  const std::size_t plane = s[2] * s[3];
  double acc = 0.0;
  for (std::size_t p = 0; p < s[0] * s[1]; ++p) {
    std::vector<double> pa(a.data().begin() + p * plane, a.data().begin() + (p + 1) * plane);
    std::vector<double> pb(b.data().begin() + p * plane, b.data().begin() + (p + 1) * plane);
    acc += ssim_plane(pa, pb, s[2], s[3]);
  }
  return acc / static_cast<double>(s[0] * s[1]);
}

double stage1_total(const FeatureExtractor<double>& fx, const Tensor<double>& a, const Tensor<double>& b) {
  const auto [ax, ay] = gradients(a);
  const auto [bx, by] = gradients(b);
  double l1 = 0, gh = 0, gv = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    l1 += std::abs(a.data()[i] - b.data()[i]);
    gh += std::abs(ax[i] - bx[i]);
    gv += std::abs(ay[i] - by[i]);
  }
  const double n = static_cast<double>(a.numel());
  return l1 / n + gh / n + gv / n + perceptual(fx, a, b);
}

double stage2_total(const Tensor<double>& a, const Tensor<double>& b) {
  const auto [ax, ay] = gradients(a);
  const auto [bx, by] = gradients(b);
  double se = 0, gh = 0, gv = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    se += (a.data()[i] - b.data()[i]) * (a.data()[i] - b.data()[i]);
    gh += (ax[i] - bx[i]) * (ax[i] - bx[i]);
    gv += (ay[i] - by[i]) * (ay[i] - by[i]);
  }
  const double n = static_cast<double>(a.numel());
  return se / n - ssim(a, b) + gh / n + gv / n;
}

double mse(const RgbImage& p, const RgbImage& g) {
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < p.pixels(); ++i, ++n) {
      const double d = static_cast<double>(p.planes[c].values[i]) - g.planes[c].values[i];
      acc += d * d;
    }
  return acc / static_cast<double>(n);
}

double psnr(const RgbImage& p, const RgbImage& g) { return 10.0 * std::log10(1.0 / mse(p, g)); }

double uqi(const RgbImage& p, const RgbImage& g, std::size_t win) {
  double total = 0.0;
  std::size_t count = 0;
  const double n = static_cast<double>(win * win);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y0 = 0; y0 + win <= p.height(); ++y0)
      for (std::size_t x0 = 0; x0 + win <= p.width(); ++x0) {
        double sx = 0, sy = 0;
        for (std::size_t y = y0; y < y0 + win; ++y)
          for (std::size_t x = x0; x < x0 + win; ++x) {
            sx += p.planes[c].at(y, x);
            sy += g.planes[c].at(y, x);
          }
        const double mx = sx / n, my = sy / n;
        double vx = 0, vy = 0, cxy = 0;
        for (std::size_t y = y0; y < y0 + win; ++y)
          for (std::size_t x = x0; x < x0 + win; ++x) {
            const double dx = p.planes[c].at(y, x) - mx, dy = g.planes[c].at(y, x) - my;
            vx += dx * dx;
            vy += dy * dy;
            cxy += dx * dy;
          }
        vx /= n - 1;
        vy /= n - 1;
        cxy /= n - 1;
        const double den = (vx + vy) * (mx * mx + my * my);
        if (den == 0.0) continue;
        total += 4.0 * cxy * mx * my / den;
        ++count;
      }
  return total / static_cast<double>(count);
}

double srer(const RgbImage& p, const RgbImage& g) {
  double sig = 0.0, err = 0.0;
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < p.pixels(); ++i) {
      const double gv = g.planes[c].values[i], pv = p.planes[c].values[i];
      sig += gv * gv;
      err += (gv - pv) * (gv - pv);
    }
  return 20.0 * std::log10(std::sqrt(sig) / std::sqrt(err));
}

std::vector<double> angles(const RgbImage& p, const RgbImage& g) {
  std::vector<double> out;
  for (std::size_t i = 0; i < p.pixels(); ++i) {
    double dot = 0, np = 0, ng = 0;
    for (std::size_t c = 0; c < 3; ++c) {
      const double a = p.planes[c].values[i], b = g.planes[c].values[i];
      dot += a * b;
      np += a * a;
      ng += b * b;
    }
    if (np == 0.0 || ng == 0.0) continue;
    const double cosine = std::clamp(dot / std::sqrt(np * ng), -1.0, 1.0);
    out.push_back(std::acos(cosine) * 180.0 / std::numbers::pi);
  }
  return out;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace tsnca::oracle
