#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "tsnca/adam.hpp"
#include "tsnca/tensor.hpp"

namespace tsnca {

// Fixed convolutional feature network for the perceptual loss. Weights never
// track gradients, but gradients flow through to the input.
template <typename T>
class FeatureExtractor {
 public:
  struct Layer {
    enum class Kind { conv_relu, max_pool } kind = Kind::conv_relu;
    Tensor<T> weight;
    Tensor<T> bias;
    std::size_t stride = 1;
  };

  FeatureExtractor() = default;
  explicit FeatureExtractor(std::vector<Layer> layers);

  // 3->16 (stride 1), 16->32 (stride 2), 32->64 (stride 2), 64->64 (stride 1),
  // each a 3x3 conv + relu; He-normal weights, zero biases.
  static FeatureExtractor seeded(std::uint64_t seed);

  // VGG-style layout: tensors "features.<index>.weight"/".bias" as in the
  // torchvision feature stack, relu after each conv, and a 2x2 max-pool
  // wherever the index sequence skips a slot. Layers up to and including
  // `tap` are kept; by default the relu after the last conv.
  static FeatureExtractor from_vgg_tensors(const NamedTensors<float>& tensors,
                                           std::optional<std::size_t> tap = std::nullopt);
  static FeatureExtractor load(const std::filesystem::path& path,
                               std::optional<std::size_t> tap = std::nullopt);

  std::size_t input_channels() const;
  const std::vector<Layer>& layers() const { return layers_; }

  // Single-channel inputs are replicated to input_channels().
  Tensor<T> features(const Tensor<T>& x) const;
  Shape output_shape(const Shape& input) const;

  template <typename U>
  FeatureExtractor<U> cast() const {
    std::vector<typename FeatureExtractor<U>::Layer> out;
    for (const auto& l : layers_) {
      typename FeatureExtractor<U>::Layer c;
      c.kind = l.kind == Layer::Kind::conv_relu ? FeatureExtractor<U>::Layer::Kind::conv_relu
                                                : FeatureExtractor<U>::Layer::Kind::max_pool;
      if (l.weight.defined()) c.weight = l.weight.template cast<U>();
      if (l.bias.defined()) c.bias = l.bias.template cast<U>();
      c.stride = l.stride;
      out.push_back(std::move(c));
    }
    return FeatureExtractor<U>(std::move(out));
  }

 private:
  std::vector<Layer> layers_;
};

extern template class FeatureExtractor<float>;
extern template class FeatureExtractor<double>;

}  // namespace tsnca
