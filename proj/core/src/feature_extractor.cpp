#include "tsnca/feature_extractor.hpp"

#include <cmath>
#include <map>
#include <random>
#include <stdexcept>
#include <string>

#include "tsnca/checkpoint.hpp"
#include "tsnca/ops.hpp"

namespace tsnca {

template <typename T>
FeatureExtractor<T>::FeatureExtractor(std::vector<Layer> layers) : layers_(std::move(layers)) {
  bool has_conv = false;
  for (const auto& l : layers_) {
    if (l.kind == Layer::Kind::conv_relu) {
      has_conv = true;
      if (!l.weight.defined() || l.weight.rank() != 4) {
        throw ShapeError("feature extractor: conv layer needs a [Cout,Cin,k,k] weight");
      }
    }
  }
  if (!has_conv) throw ShapeError("feature extractor: no convolution layers");
}

template <typename T>
FeatureExtractor<T> FeatureExtractor<T>::seeded(std::uint64_t seed) {
  struct Spec {
    std::size_t cin, cout, stride;
  };
  constexpr Spec specs[] = {{3, 16, 1}, {16, 32, 2}, {32, 64, 2}, {64, 64, 1}};
  std::mt19937_64 rng(seed);
  std::vector<Layer> layers;
  for (const auto& s : specs) {
    const std::size_t fan_in = s.cin * 9;
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    std::vector<T> w(s.cout * fan_in);
    for (auto& v : w) v = static_cast<T>(normal(rng));
    Layer l;
    l.weight = Tensor<T>::from_data({s.cout, s.cin, 3, 3}, std::move(w));
    l.bias = Tensor<T>::zeros({s.cout});
    l.stride = s.stride;
    layers.push_back(std::move(l));
  }
  return FeatureExtractor(std::move(layers));
}

template <typename T>
FeatureExtractor<T> FeatureExtractor<T>::from_vgg_tensors(const NamedTensors<float>& tensors,
                                                          std::optional<std::size_t> tap) {
  std::map<std::size_t, std::pair<Tensor<float>, Tensor<float>>> convs;
  for (const auto& [name, t] : tensors) {
    constexpr std::string_view prefix = "features.";
    if (!name.starts_with(prefix)) continue;
    const auto dot = name.find('.', prefix.size());
    if (dot == std::string::npos) continue;
    std::size_t index = 0;
    try {
      index = std::stoul(name.substr(prefix.size(), dot - prefix.size()));
    } catch (const std::exception&) {
      continue;
    }
    const std::string field = name.substr(dot + 1);
    if (field == "weight") convs[index].first = t;
    else if (field == "bias") convs[index].second = t;
  }
  if (convs.empty()) throw std::invalid_argument("feature extractor: no 'features.<i>.weight' tensors");

  const std::size_t last_conv = convs.rbegin()->first;
  const std::size_t limit = tap.value_or(last_conv + 1);
  std::vector<Layer> layers;
  for (auto it = convs.begin(); it != convs.end(); ++it) {
    const auto [index, wb] = *it;
    if (index >= limit) break;
    if (!wb.first.defined()) {
      throw std::invalid_argument("feature extractor: features." + std::to_string(index) +
                                  " has a bias but no weight");
    }
    Layer conv;
    conv.weight = wb.first.template cast<T>();
    conv.bias = wb.second.defined() ? wb.second.template cast<T>()
                                    : Tensor<T>::zeros({wb.first.dim(0)});
    layers.push_back(std::move(conv));
    // conv at i, relu at i+1; a further gap before the next conv is a pool.
    auto next = std::next(it);
    const std::size_t pool_index = index + 2;
    const bool pool_follows = next == convs.end() ? tap.has_value() : next->first > pool_index;
    if (pool_follows && pool_index <= limit) {
      Layer pool;
      pool.kind = Layer::Kind::max_pool;
      layers.push_back(std::move(pool));
    }
  }
  return FeatureExtractor(std::move(layers));
}

template <typename T>
FeatureExtractor<T> FeatureExtractor<T>::load(const std::filesystem::path& path,
                                              std::optional<std::size_t> tap) {
  return from_vgg_tensors(read_checkpoint(path).tensors, tap);
}

template <typename T>
std::size_t FeatureExtractor<T>::input_channels() const {
  for (const auto& l : layers_) {
    if (l.kind == Layer::Kind::conv_relu) return l.weight.dim(1);
  }
  return 0;
}

template <typename T>
Tensor<T> FeatureExtractor<T>::features(const Tensor<T>& x) const {
  if (x.rank() != 4) throw ShapeError("feature extractor: expected [N,C,H,W] input");
  Tensor<T> h = x;
  const std::size_t want = input_channels();
  if (x.dim(1) == 1 && want != 1) {
    h = ops::concat_channels(std::vector<Tensor<T>>(want, x));
  } else if (x.dim(1) != want) {
    throw ShapeError("feature extractor: input has " + std::to_string(x.dim(1)) +
                     " channels, extractor expects " + std::to_string(want));
  }
  for (const auto& l : layers_) {
    if (l.kind == Layer::Kind::max_pool) {
      h = ops::max_pool2x2(h);
    } else {
      h = ops::relu(ops::conv2d(h, l.weight, l.bias, l.stride, l.weight.dim(2) / 2));
    }
  }
  return h;
}

template <typename T>
Shape FeatureExtractor<T>::output_shape(const Shape& input) const {
  if (input.size() != 4) throw ShapeError("feature extractor: expected [N,C,H,W] shape");
  Shape s = input;
  for (const auto& l : layers_) {
    if (l.kind == Layer::Kind::max_pool) {
      s[2] /= 2;
      s[3] /= 2;
    } else {
      const std::size_t k = l.weight.dim(2), pad = k / 2;
      s[1] = l.weight.dim(0);
      s[2] = (s[2] + 2 * pad - k) / l.stride + 1;
      s[3] = (s[3] + 2 * pad - k) / l.stride + 1;
    }
  }
  return s;
}

template class FeatureExtractor<float>;
template class FeatureExtractor<double>;

}  // namespace tsnca
