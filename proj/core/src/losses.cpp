#include "tsnca/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "tsnca/ops.hpp"

namespace tsnca::losses {
namespace {

template <typename T>
void require_same(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
  if (a.rank() != 4) {
    throw ShapeError(std::string(op) + ": expected [N,C,H,W], got " + shape_to_string(a.shape()));
  }
}

template <typename T>
Tensor<T> blur(const Tensor<T>& x, const std::vector<double>& taps) {
  return ops::filter1d_reflect(ops::filter1d_reflect(x, taps, 3), taps, 2);
}

}  // namespace

template <typename T>
GradientPair<T> gradient_map(const Tensor<T>& image) {
  if (image.rank() != 4 || image.dim(2) < 2 || image.dim(3) < 2) {
    throw ShapeError("gradient_map: need [N,C,H,W] with H,W >= 2, got " +
                     shape_to_string(image.shape()));
  }
  return {ops::diff_horizontal(image), ops::diff_vertical(image)};
}

std::vector<double> gaussian_window(std::size_t size, double sigma) {
  if (size == 0 || size % 2 == 0) throw std::invalid_argument("gaussian_window: size must be odd");
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_window: sigma must be positive");
  std::vector<double> w(size);
  const double centre = static_cast<double>(size / 2);
  double total = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double d = static_cast<double>(i) - centre;
    w[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    total += w[i];
  }
  for (auto& v : w) v /= total;
  return w;
}

template <typename T>
Tensor<T> ssim_map(const Tensor<T>& a, const Tensor<T>& b, const SsimOptions& options) {
  require_same("ssim", a, b);
  const auto taps = gaussian_window(options.window, options.sigma);
  const T c1 = static_cast<T>(std::pow(options.k1 * options.dynamic_range, 2));
  const T c2 = static_cast<T>(std::pow(options.k2 * options.dynamic_range, 2));

  auto mu_a = blur(a, taps);
  auto mu_b = blur(b, taps);
  auto mu_aa = ops::mul(mu_a, mu_a);
  auto mu_bb = ops::mul(mu_b, mu_b);
  auto mu_ab = ops::mul(mu_a, mu_b);
  auto var_a = ops::sub(blur(ops::mul(a, a), taps), mu_aa);
  auto var_b = ops::sub(blur(ops::mul(b, b), taps), mu_bb);
  auto cov = ops::sub(blur(ops::mul(a, b), taps), mu_ab);

  // With a == b each factor pair below is bitwise equal, so the map is exactly 1.
  auto luminance_num = ops::add_scalar(ops::scale(mu_ab, T{2}), c1);
  auto luminance_den = ops::add_scalar(ops::add(mu_aa, mu_bb), c1);
  auto structure_num = ops::add_scalar(ops::scale(cov, T{2}), c2);
  auto structure_den = ops::add_scalar(ops::add(var_a, var_b), c2);
  return ops::div(ops::mul(luminance_num, structure_num), ops::mul(luminance_den, structure_den));
}

template <typename T>
Tensor<T> ssim(const Tensor<T>& a, const Tensor<T>& b, const SsimOptions& options) {
  return ops::mean(ssim_map(a, b, options));
}

template <typename T>
Tensor<T> perceptual_loss(const Tensor<T>& a, const Tensor<T>& b,
                          const FeatureExtractor<T>& extractor) {
  require_same("perceptual_loss", a, b);
  auto fa = extractor.features(a);
  auto fb = extractor.features(b);
  return ops::mean(ops::square(ops::sub(fa, fb)));
}

template <typename T>
double LossReport<T>::term(const std::string& name) const {
  for (const auto& [n, v] : terms) {
    if (n == name) return v;
  }
  throw std::out_of_range("loss report: no term named '" + name + "'");
}

template <typename T>
std::vector<std::string> LossReport<T>::term_names() const {
  std::vector<std::string> out;
  for (const auto& [n, v] : terms) out.push_back(n);
  return out;
}

template <typename T>
LossReport<T> stage1_loss(const Tensor<T>& v_out, const Tensor<T>& v_high,
                          const FeatureExtractor<T>& extractor, bool with_ssim_term) {
  require_same("stage1_loss", v_out, v_high);
  auto l1 = ops::mean(ops::abs(ops::sub(v_out, v_high)));
  const auto go = gradient_map(v_out);
  const auto gh = gradient_map(v_high);
  auto grad = ops::add(ops::mean(ops::abs(ops::sub(go.horizontal, gh.horizontal))),
                       ops::mean(ops::abs(ops::sub(go.vertical, gh.vertical))));
  auto perceptual = perceptual_loss(v_out, v_high, extractor);

  LossReport<T> report;
  report.total = ops::add(ops::add(l1, grad), perceptual);
  report.terms = {{"l1", l1.item()}, {"grad", grad.item()}, {"perceptual", perceptual.item()}};
  if (with_ssim_term) {
    auto s = ssim(v_out, v_high);
    report.total = ops::sub(report.total, s);
    report.terms.emplace_back("ssim", s.item());
  }
  return report;
}

template <typename T>
LossReport<T> stage2_loss(const Tensor<T>& i_out, const Tensor<T>& i_high) {
  require_same("stage2_loss", i_out, i_high);
  auto mse = ops::mean(ops::square(ops::sub(i_out, i_high)));
  auto s = ssim(i_out, i_high);
  const auto go = gradient_map(i_out);
  const auto gh = gradient_map(i_high);
  auto grad = ops::add(ops::mean(ops::square(ops::sub(go.horizontal, gh.horizontal))),
                       ops::mean(ops::square(ops::sub(go.vertical, gh.vertical))));
  LossReport<T> report;
  report.total = ops::add(ops::sub(mse, s), grad);
  report.terms = {{"mse", mse.item()}, {"ssim", s.item()}, {"grad", grad.item()}};
  return report;
}

#define TSNCA_INSTANTIATE_LOSSES(T)                                                          \
  template GradientPair<T> gradient_map(const Tensor<T>&);                                   \
  template Tensor<T> ssim_map(const Tensor<T>&, const Tensor<T>&, const SsimOptions&);       \
  template Tensor<T> ssim(const Tensor<T>&, const Tensor<T>&, const SsimOptions&);           \
  template Tensor<T> perceptual_loss(const Tensor<T>&, const Tensor<T>&,                     \
                                     const FeatureExtractor<T>&);                            \
  template struct LossReport<T>;                                                             \
  template LossReport<T> stage1_loss(const Tensor<T>&, const Tensor<T>&,                     \
                                     const FeatureExtractor<T>&, bool);                      \
  template LossReport<T> stage2_loss(const Tensor<T>&, const Tensor<T>&);

TSNCA_INSTANTIATE_LOSSES(float)
TSNCA_INSTANTIATE_LOSSES(double)

#undef TSNCA_INSTANTIATE_LOSSES

}  // namespace tsnca::losses
