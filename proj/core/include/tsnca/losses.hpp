#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tsnca/feature_extractor.hpp"
#include "tsnca/tensor.hpp"

namespace tsnca::losses {

template <typename T>
struct GradientPair {
  Tensor<T> horizontal;
  Tensor<T> vertical;
};

// Forward differences: horizontal[y][x] = I[y][x+1] - I[y][x] with the last
// column zero; vertical likewise along rows. Requires H, W >= 2.
template <typename T>
GradientPair<T> gradient_map(const Tensor<T>& image);

struct SsimOptions {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
std::vector<double> gaussian_window(std::size_t size, double sigma);

// Per-pixel SSIM (same shape as the inputs), Gaussian-weighted local
// statistics with mirror-reflected borders.
template <typename T>
Tensor<T> ssim_map(const Tensor<T>& a, const Tensor<T>& b, const SsimOptions& options = {});
// Mean of ssim_map over pixels, channels and batch.
template <typename T>
Tensor<T> ssim(const Tensor<T>& a, const Tensor<T>& b, const SsimOptions& options = {});

// Mean squared feature distance: for one sample, ||F(a) - F(b)||^2 / (C*H*W)
// over the extractor's output map; averaged across the batch.
template <typename T>
Tensor<T> perceptual_loss(const Tensor<T>& a, const Tensor<T>& b,
                          const FeatureExtractor<T>& extractor);

// Composite objective plus its named terms. Terms named "ssim" enter the
// total negated; all others are added.
template <typename T>
struct LossReport {
  Tensor<T> total;
  std::vector<std::pair<std::string, double>> terms;

  double total_value() const { return static_cast<double>(total.item()); }
  double term(const std::string& name) const;
  std::vector<std::string> term_names() const;
};

// mean|v_out - v_high| + mean|grad diff| (both directions) + perceptual,
// optionally minus ssim(v_out, v_high).
template <typename T>
LossReport<T> stage1_loss(const Tensor<T>& v_out, const Tensor<T>& v_high,
                          const FeatureExtractor<T>& extractor, bool with_ssim_term = false);

// mean((i_out - i_high)^2) - ssim(i_out, i_high) + mean squared grad diff
// (both directions). Minimum -1 at i_out == i_high.
template <typename T>
LossReport<T> stage2_loss(const Tensor<T>& i_out, const Tensor<T>& i_high);

}  // namespace tsnca::losses
