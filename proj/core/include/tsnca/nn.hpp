#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tsnca/adam.hpp"
#include "tsnca/tensor.hpp"

namespace tsnca::nn {

enum class FinalActivation { sigmoid, identity };

// Encoder/decoder U-Net layout. Level i carries base_channels * 2^i
// channels; the bottleneck carries base_channels * 2^depth.
struct UNetConfig {
  std::size_t in_channels = 3;
  std::size_t out_channels = 1;
  std::size_t base_channels = 8;
  std::size_t depth = 3;
  std::size_t se_reduction = 4;
  bool with_channel_attention = false;
  FinalActivation final_activation = FinalActivation::sigmoid;

  // Stage one: [H,S,V] (or replicated V) in, V out.
  static UNetConfig enhancer(std::size_t base_channels = 8, std::size_t depth = 3);
  // Stage two: RGB in, RGB out, SE blocks on skips when requested.
  static UNetConfig restorer(std::size_t base_channels = 8, std::size_t depth = 3,
                             bool with_channel_attention = true);

  std::size_t channels_at(std::size_t level) const { return base_channels << level; }
  std::size_t size_multiple() const { return std::size_t{1} << depth; }

  // Throws std::invalid_argument describing the first violated constraint.
  void validate() const;

  // Canonical text form; equal configs give equal fingerprints.
  std::string fingerprint() const;
  static UNetConfig from_fingerprint(std::string_view text);

  bool operator==(const UNetConfig&) const = default;
};

// Name, shape, and He fan-in of one learnable tensor.
struct ParamSpec {
  std::string name;
  Shape shape;
  std::size_t fan_in = 0;
  bool is_bias = false;
};

// Every learnable tensor the config implies, in canonical order.
std::vector<ParamSpec> parameter_specs(const UNetConfig& config);

// Ordered name -> tensor table tagged with the architecture fingerprint.
template <typename T>
class NetworkParams {
 public:
  NetworkParams() = default;
  explicit NetworkParams(std::string fingerprint) : fingerprint_(std::move(fingerprint)) {}

  void add(std::string name, Tensor<T> tensor);
  bool contains(std::string_view name) const;
  const Tensor<T>& at(std::string_view name) const;

  const std::string& fingerprint() const { return fingerprint_; }
  const NamedTensors<T>& entries() const { return entries_; }
  std::vector<std::string> names() const;
  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;

  void set_requires_grad(bool flag);
  void zero_grad();
  // Independent copy of every tensor.
  NetworkParams deep_copy() const;

 private:
  std::string fingerprint_;
  NamedTensors<T> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// He-normal weights (stddev sqrt(2 / fan_in)) and zero biases. Each tensor
// draws from its own stream keyed by (seed, name), so toggling channel
// attention leaves every shared tensor unchanged.
template <typename T>
NetworkParams<T> init_params(const UNetConfig& config, std::uint64_t seed,
                             bool requires_grad = true);

// Throws std::invalid_argument unless params carry exactly the config's
// names and shapes and its fingerprint.
template <typename T>
void validate_params(const NetworkParams<T>& params, const UNetConfig& config);

// Squeeze-and-excitation block: fc1 [C/r, C], fc2 [C, C/r].
template <typename T>
struct SeBlockParams {
  std::size_t channels = 0;
  std::size_t reduction = 1;
  Tensor<T> fc1_weight, fc1_bias, fc2_weight, fc2_bias;

  std::size_t bottleneck() const { return channels / reduction; }
  // C*(C/r)*2 weights plus (C/r)+C biases.
  static std::size_t parameter_count(std::size_t channels, std::size_t reduction);

  static SeBlockParams from_network(const NetworkParams<T>& params, std::string_view prefix,
                                    std::size_t channels, std::size_t reduction);
};

// features * sigmoid(fc2(relu(fc1(gap(features))))), gate broadcast over H,W.
template <typename T>
Tensor<T> se_block_forward(const Tensor<T>& features, const SeBlockParams<T>& params);

template <typename T>
Tensor<T> unet_forward(const Tensor<T>& input, const NetworkParams<T>& params,
                       const UNetConfig& config);

// Prefix of the SE block guarding skip connection `level`.
std::string se_prefix(std::size_t level);

}  // namespace tsnca::nn
