#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "tsnca/dataset.hpp"
#include "tsnca/image.hpp"
#include "tsnca/nn.hpp"
#include "tsnca/tensor.hpp"

namespace tsnca::testing {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

template <typename T>
Tensor<T> random_tensor(const Shape& shape, Rng& rng, double lo = 0.0, double hi = 1.0,
                        bool requires_grad = false) {
  std::vector<T> data(shape_numel(shape));
  for (auto& v : data) v = static_cast<T>(rng.uniform(lo, hi));
  return Tensor<T>::from_data(shape, std::move(data), requires_grad);
}

RgbImage random_image(std::size_t h, std::size_t w, Rng& rng);
ImagePlane random_plane(std::size_t h, std::size_t w, Rng& rng);

// Smooth, textured synthetic scene and a dark noisy counterpart.
ImagePair synthetic_pair(const std::string& name, std::size_t size, std::uint64_t seed);

// Central-difference gradient check over every element of `leaves`.
struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;  // "<leaf>[index] analytic vs numeric"
  std::size_t checked = 0;
};
GradCheckResult grad_check(const std::function<Tensor<double>()>& loss,
                           const std::vector<std::pair<std::string, Tensor<double>>>& leaves,
                           double step = 1e-4);

// Relative error used by the gradient check.
double relative_error(double analytic, double numeric);

// Fixed random linear functional sum(w * x) used to reduce a tensor to a scalar.
Tensor<double> random_projection(const Tensor<double>& x, std::uint64_t seed);

nn::NetworkParams<double> to_double(const nn::NetworkParams<float>& params, bool requires_grad);

std::string fixture_path(const std::string& name);

}  // namespace tsnca::testing

namespace tsnca::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Writes pairs as PNG files under root/low and root/high.
void write_dataset(const std::filesystem::path& root, const std::vector<ImagePair>& pairs);

std::string read_file(const std::filesystem::path& path);

}  // namespace tsnca::testing
