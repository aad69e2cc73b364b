#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tsnca/tensor.hpp"

namespace tsnca {

struct AdamOptions {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
using NamedTensors = std::vector<std::pair<std::string, Tensor<T>>>;

// Bias-corrected Adam over a fixed, named parameter set. Moment buffers are
// created for exactly the registered parameters; step() never clears
// gradients (call zero_grad()).
template <typename T>
class Adam {
 public:
  Adam(NamedTensors<T> params, AdamOptions options);

  // Throws GraphError if any registered parameter has no gradient.
  void step();
  void zero_grad();

  std::uint64_t step_count() const { return step_; }
  const AdamOptions& options() const { return options_; }
  const NamedTensors<T>& params() const { return params_; }

  const std::vector<std::vector<T>>& first_moments() const { return m_; }
  const std::vector<std::vector<T>>& second_moments() const { return v_; }

  // Restores persisted moments; sizes must match the registered parameters.
  void restore(std::uint64_t step, std::vector<std::vector<T>> first,
               std::vector<std::vector<T>> second);

 private:
  NamedTensors<T> params_;
  AdamOptions options_;
  std::uint64_t step_ = 0;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace tsnca
