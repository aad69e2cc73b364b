#include "tsnca/nn.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include "tsnca/ops.hpp"

namespace tsnca::nn {
namespace {

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void push_conv(std::vector<ParamSpec>& specs, const std::string& name, std::size_t cout,
               std::size_t cin, std::size_t k) {
  specs.push_back({name + ".weight", {cout, cin, k, k}, cin * k * k, false});
  specs.push_back({name + ".bias", {cout}, cin * k * k, true});
}

void push_linear(std::vector<ParamSpec>& specs, const std::string& name, std::size_t out,
                 std::size_t in) {
  specs.push_back({name + ".weight", {out, in}, in, false});
  specs.push_back({name + ".bias", {out}, in, true});
}

const char* activation_name(FinalActivation a) {
  return a == FinalActivation::sigmoid ? "sigmoid" : "identity";
}

template <typename T>
Tensor<T> conv(const Tensor<T>& x, const NetworkParams<T>& p, const std::string& name,
               std::size_t stride, std::size_t padding) {
  return ops::conv2d(x, p.at(name + ".weight"), p.at(name + ".bias"), stride, padding);
}

template <typename T>
Tensor<T> conv_relu(const Tensor<T>& x, const NetworkParams<T>& p, const std::string& name,
                    std::size_t stride = 1) {
  return ops::relu(conv(x, p, name, stride, 1));
}

}  // namespace

UNetConfig UNetConfig::enhancer(std::size_t base_channels, std::size_t depth) {
  UNetConfig c;
  c.in_channels = 3;
  c.out_channels = 1;
  c.base_channels = base_channels;
  c.depth = depth;
  c.with_channel_attention = false;
  return c;
}

UNetConfig UNetConfig::restorer(std::size_t base_channels, std::size_t depth,
                                bool with_channel_attention) {
  UNetConfig c;
  c.in_channels = 3;
  c.out_channels = 3;
  c.base_channels = base_channels;
  c.depth = depth;
  c.with_channel_attention = with_channel_attention;
  return c;
}

void UNetConfig::validate() const {
  if (in_channels == 0 || out_channels == 0 || base_channels == 0) {
    throw std::invalid_argument("unet config: channel counts must be positive");
  }
  if (depth == 0) throw std::invalid_argument("unet config: depth must be at least 1");
  if (depth > 12) throw std::invalid_argument("unet config: depth too large");
  if (with_channel_attention) {
    if (se_reduction == 0 || base_channels % se_reduction != 0) {
      throw std::invalid_argument("unet config: SE reduction " + std::to_string(se_reduction) +
                                  " must divide base_channels " + std::to_string(base_channels));
    }
  }
}

std::string UNetConfig::fingerprint() const {
  std::ostringstream os;
  os << "unet/v1 in=" << in_channels << " out=" << out_channels << " base=" << base_channels
     << " depth=" << depth << " ca=" << (with_channel_attention ? 1 : 0) << " r=" << se_reduction
     << " act=" << activation_name(final_activation);
  return os.str();
}

UNetConfig UNetConfig::from_fingerprint(std::string_view text) {
  std::istringstream is{std::string(text)};
  std::string tag;
  is >> tag;
  if (tag != "unet/v1") {
    throw std::invalid_argument("fingerprint: unrecognised architecture tag '" + tag + "'");
  }
  UNetConfig c;
  std::string item;
  int seen = 0;
  while (is >> item) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("fingerprint: malformed item '" + item + "'");
    const std::string key = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    auto number = [&]() -> std::size_t {
      try {
        return std::stoul(value);
      } catch (const std::exception&) {
        throw std::invalid_argument("fingerprint: bad value for '" + key + "'");
      }
    };
    if (key == "in") c.in_channels = number();
    else if (key == "out") c.out_channels = number();
    else if (key == "base") c.base_channels = number();
    else if (key == "depth") c.depth = number();
    else if (key == "ca") c.with_channel_attention = number() != 0;
    else if (key == "r") c.se_reduction = number();
    else if (key == "act") {
      if (value == "sigmoid") c.final_activation = FinalActivation::sigmoid;
      else if (value == "identity") c.final_activation = FinalActivation::identity;
      else throw std::invalid_argument("fingerprint: unknown activation '" + value + "'");
    } else {
      throw std::invalid_argument("fingerprint: unknown key '" + key + "'");
    }
    ++seen;
  }
  if (seen != 7) throw std::invalid_argument("fingerprint: incomplete architecture description");
  c.validate();
  return c;
}

std::string se_prefix(std::size_t level) { return "skip" + std::to_string(level) + ".se"; }

std::vector<ParamSpec> parameter_specs(const UNetConfig& config) {
  config.validate();
  std::vector<ParamSpec> specs;
  std::size_t in = config.in_channels;
  for (std::size_t i = 0; i < config.depth; ++i) {
    const std::size_t c = config.channels_at(i);
    const std::string level = "enc" + std::to_string(i);
    push_conv(specs, level + ".conv1", c, in, 3);
    push_conv(specs, level + ".conv2", c, c, 3);
    push_conv(specs, level + ".down", c, c, 3);
    in = c;
  }
  const std::size_t mid = config.channels_at(config.depth);
  push_conv(specs, "mid.conv1", mid, in, 3);
  push_conv(specs, "mid.conv2", mid, mid, 3);
  if (config.with_channel_attention) {
    for (std::size_t i = 0; i < config.depth; ++i) {
      const std::size_t c = config.channels_at(i);
      const std::size_t squeezed = c / config.se_reduction;
      push_linear(specs, se_prefix(i) + ".fc1", squeezed, c);
      push_linear(specs, se_prefix(i) + ".fc2", c, squeezed);
    }
  }
  for (std::size_t j = config.depth; j-- > 0;) {
    const std::size_t c = config.channels_at(j);
    const std::string level = "dec" + std::to_string(j);
    push_conv(specs, level + ".up", c, config.channels_at(j + 1), 3);
    push_conv(specs, level + ".conv1", c, 2 * c, 3);
    push_conv(specs, level + ".conv2", c, c, 3);
  }
  push_conv(specs, "head", config.out_channels, config.base_channels, 1);
  return specs;
}

template <typename T>
void NetworkParams<T>::add(std::string name, Tensor<T> tensor) {
  if (index_.contains(name)) throw std::invalid_argument("params: duplicate name '" + name + "'");
  index_.emplace(name, entries_.size());
  entries_.emplace_back(std::move(name), std::move(tensor));
}

template <typename T>
bool NetworkParams<T>::contains(std::string_view name) const {
  return index_.contains(std::string(name));
}

template <typename T>
const Tensor<T>& NetworkParams<T>::at(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw std::out_of_range("params: no tensor named '" + std::string(name) + "'");
  return entries_[it->second].second;
}

template <typename T>
std::vector<std::string> NetworkParams<T>::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, t] : entries_) out.push_back(name);
  return out;
}

template <typename T>
std::size_t NetworkParams<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) n += t.numel();
  return n;
}

template <typename T>
void NetworkParams<T>::set_requires_grad(bool flag) {
  for (auto& [name, t] : entries_) t.set_requires_grad(flag);
}

template <typename T>
void NetworkParams<T>::zero_grad() {
  for (auto& [name, t] : entries_) t.zero_grad();
}

template <typename T>
NetworkParams<T> NetworkParams<T>::deep_copy() const {
  NetworkParams out(fingerprint_);
  for (const auto& [name, t] : entries_) out.add(name, t.clone(t.requires_grad()));
  return out;
}

template <typename T>
NetworkParams<T> init_params(const UNetConfig& config, std::uint64_t seed, bool requires_grad) {
  NetworkParams<T> params(config.fingerprint());
  for (const auto& spec : parameter_specs(config)) {
    std::vector<T> values(shape_numel(spec.shape), T{0});
    if (!spec.is_bias) {
      std::mt19937_64 rng(splitmix64(seed ^ fnv1a(spec.name)));
      std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(spec.fan_in)));
      for (auto& v : values) v = static_cast<T>(normal(rng));
    }
    params.add(spec.name, Tensor<T>::from_data(spec.shape, std::move(values), requires_grad));
  }
  return params;
}

template <typename T>
void validate_params(const NetworkParams<T>& params, const UNetConfig& config) {
  if (params.fingerprint() != config.fingerprint()) {
    throw std::invalid_argument("params: fingerprint '" + params.fingerprint() +
                                "' does not match expected '" + config.fingerprint() + "'");
  }
  const auto specs = parameter_specs(config);
  if (specs.size() != params.size()) {
    throw std::invalid_argument("params: expected " + std::to_string(specs.size()) +
                                " tensors, found " + std::to_string(params.size()));
  }
  for (const auto& spec : specs) {
    if (!params.contains(spec.name)) {
      throw std::invalid_argument("params: missing tensor '" + spec.name + "'");
    }
    if (params.at(spec.name).shape() != spec.shape) {
      throw std::invalid_argument("params: tensor '" + spec.name + "' has shape " +
                                  shape_to_string(params.at(spec.name).shape()) + ", expected " +
                                  shape_to_string(spec.shape));
    }
  }
}

template <typename T>
std::size_t SeBlockParams<T>::parameter_count(std::size_t channels, std::size_t reduction) {
  const std::size_t squeezed = channels / reduction;
  return channels * squeezed * 2 + squeezed + channels;
}

template <typename T>
SeBlockParams<T> SeBlockParams<T>::from_network(const NetworkParams<T>& params,
                                                std::string_view prefix, std::size_t channels,
                                                std::size_t reduction) {
  const std::string p(prefix);
  SeBlockParams<T> se;
  se.channels = channels;
  se.reduction = reduction;
  se.fc1_weight = params.at(p + ".fc1.weight");
  se.fc1_bias = params.at(p + ".fc1.bias");
  se.fc2_weight = params.at(p + ".fc2.weight");
  se.fc2_bias = params.at(p + ".fc2.bias");
  return se;
}

template <typename T>
Tensor<T> se_block_forward(const Tensor<T>& features, const SeBlockParams<T>& params) {
  if (features.rank() != 4 || features.dim(1) != params.channels) {
    throw ShapeError("se_block: features " + shape_to_string(features.shape()) +
                     " do not have " + std::to_string(params.channels) + " channels");
  }
  if (params.reduction == 0 || params.channels % params.reduction != 0) {
    throw ShapeError("se_block: reduction must divide the channel count");
  }
  const std::size_t n = features.dim(0);
  const std::size_t c = params.channels;
  auto squeezed = ops::reshape(ops::global_average_pool(features), {n, c});
  auto hidden = ops::relu(ops::linear(squeezed, params.fc1_weight, params.fc1_bias));
  auto gate = ops::sigmoid(ops::linear(hidden, params.fc2_weight, params.fc2_bias));
  return ops::broadcast_mul(features, ops::reshape(gate, {n, c, 1, 1}));
}

template <typename T>
Tensor<T> unet_forward(const Tensor<T>& input, const NetworkParams<T>& params,
                       const UNetConfig& config) {
  config.validate();
  if (input.rank() != 4 || input.dim(1) != config.in_channels) {
    throw ShapeError("unet: input " + shape_to_string(input.shape()) + " does not have " +
                     std::to_string(config.in_channels) + " channels");
  }
  const std::size_t m = config.size_multiple();
  if (input.dim(2) % m != 0 || input.dim(3) % m != 0) {
    throw ShapeError("unet: spatial extents " + std::to_string(input.dim(2)) + "x" +
                     std::to_string(input.dim(3)) + " must be divisible by " + std::to_string(m));
  }
  if (params.fingerprint() != config.fingerprint()) {
    throw ShapeError("unet: parameters built for '" + params.fingerprint() + "', not '" +
                     config.fingerprint() + "'");
  }

  std::vector<Tensor<T>> skips;
  Tensor<T> x = input;
  for (std::size_t i = 0; i < config.depth; ++i) {
    const std::string level = "enc" + std::to_string(i);
    x = conv_relu(x, params, level + ".conv1");
    x = conv_relu(x, params, level + ".conv2");
    skips.push_back(x);
    x = conv_relu(x, params, level + ".down", 2);
  }
  x = conv_relu(x, params, "mid.conv1");
  x = conv_relu(x, params, "mid.conv2");

  for (std::size_t j = config.depth; j-- > 0;) {
    const std::string level = "dec" + std::to_string(j);
    x = conv_relu(ops::upsample_nearest2x(x), params, level + ".up");
    Tensor<T> skip = skips[j];
    if (config.with_channel_attention) {
      skip = se_block_forward(skip, SeBlockParams<T>::from_network(
                                        params, se_prefix(j), config.channels_at(j),
                                        config.se_reduction));
    }
    x = ops::concat_channels<T>({skip, x});
    x = conv_relu(x, params, level + ".conv1");
    x = conv_relu(x, params, level + ".conv2");
  }
  x = conv(x, params, "head", 1, 0);
  return config.final_activation == FinalActivation::sigmoid ? ops::sigmoid(x) : x;
}

template class NetworkParams<float>;
template class NetworkParams<double>;
template struct SeBlockParams<float>;
template struct SeBlockParams<double>;
template NetworkParams<float> init_params<float>(const UNetConfig&, std::uint64_t, bool);
template NetworkParams<double> init_params<double>(const UNetConfig&, std::uint64_t, bool);
template void validate_params<float>(const NetworkParams<float>&, const UNetConfig&);
template void validate_params<double>(const NetworkParams<double>&, const UNetConfig&);
template Tensor<float> se_block_forward<float>(const Tensor<float>&, const SeBlockParams<float>&);
template Tensor<double> se_block_forward<double>(const Tensor<double>&, const SeBlockParams<double>&);
template Tensor<float> unet_forward<float>(const Tensor<float>&, const NetworkParams<float>&,
                                           const UNetConfig&);
template Tensor<double> unet_forward<double>(const Tensor<double>&, const NetworkParams<double>&,
                                             const UNetConfig&);

}  // namespace tsnca::nn
