#pragma once

// Straightforward scalar-loop reference implementations, written without the
// library's ops so tests compare two independent computations.

#include <vector>

#include "tsnca/feature_extractor.hpp"
#include "tsnca/image.hpp"
#include "tsnca/tensor.hpp"

namespace tsnca::oracle {

// Direct 7-loop convolution with zero padding; x [N,Ci,H,W], w [Co,Ci,k,k].
std::vector<double> conv2d(const std::vector<double>& x, const Shape& xs, const std::vector<double>& w,
                           const Shape& ws, const std::vector<double>& bias, std::size_t stride,
                           std::size_t padding, Shape* out_shape);

// Per-pixel 2-D Gaussian SSIM with mirror borders (d c b | a b c d) on one plane.
double ssim_plane(const std::vector<double>& a, const std::vector<double>& b, std::size_t h,
                  std::size_t w);

std::vector<double> values(const Tensor<double>& t);
// Feature map through conv + relu layers; single-channel input replicated.
std::vector<double> features(const FeatureExtractor<double>& fx, const Tensor<double>& x, Shape* shape);
// Mean squared feature difference.
double perceptual(const FeatureExtractor<double>& fx, const Tensor<double>& a, const Tensor<double>& b);
// Forward differences along x and y with the last column/row zero.
std::pair<std::vector<double>, std::vector<double>> gradients(const Tensor<double>& t);
// Mean of ssim_plane over every plane of an [N,C,H,W] tensor.
double ssim(const Tensor<double>& a, const Tensor<double>& b);
// Composite objectives rebuilt from the oracles above.
double stage1_total(const FeatureExtractor<double>& fx, const Tensor<double>& a, const Tensor<double>& b);
double stage2_total(const Tensor<double>& a, const Tensor<double>& b);

double mse(const RgbImage& p, const RgbImage& g);
double psnr(const RgbImage& p, const RgbImage& g);
double uqi(const RgbImage& p, const RgbImage& g, std::size_t window);
double srer(const RgbImage& p, const RgbImage& g);
// Angles via acos of the clamped cosine; zero vectors skipped.
std::vector<double> angles(const RgbImage& p, const RgbImage& g);
double mean(const std::vector<double>& v);
double median(std::vector<double> v);

}  // namespace tsnca::oracle
