#include "tsnca/adam.hpp"

#include <cmath>

namespace tsnca {

template <typename T>
Adam<T>::Adam(NamedTensors<T> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& [name, p] : params_) {
    if (!p.is_leaf()) throw GraphError("adam: parameter '" + name + "' is not a leaf tensor");
    m_.emplace_back(p.numel(), T{0});
    v_.emplace_back(p.numel(), T{0});
  }
}

template <typename T>
void Adam<T>::step() {
  for (const auto& [name, p] : params_) {
    if (!p.has_grad()) throw GraphError("adam: missing gradient for parameter '" + name + "'");
  }
  ++step_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i].second;
    auto values = p.mutable_data();
    auto grad = p.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double g = static_cast<double>(grad[j]);
      const double mj = b1 * static_cast<double>(m[j]) + (1.0 - b1) * g;
      const double vj = b2 * static_cast<double>(v[j]) + (1.0 - b2) * g * g;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double update = options_.learning_rate * (mj / c1) / (std::sqrt(vj / c2) + options_.epsilon);
      values[j] = static_cast<T>(static_cast<double>(values[j]) - update);
    }
  }
}

template <typename T>
void Adam<T>::zero_grad() {
  for (auto& [name, p] : params_) p.zero_grad();
}

template <typename T>
void Adam<T>::restore(std::uint64_t step, std::vector<std::vector<T>> first,
                      std::vector<std::vector<T>> second) {
  if (first.size() != params_.size() || second.size() != params_.size()) {
    throw ShapeError("adam: moment count does not match registered parameters");
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (first[i].size() != params_[i].second.numel() ||
        second[i].size() != params_[i].second.numel()) {
      throw ShapeError("adam: moment size mismatch for parameter '" + params_[i].first + "'");
    }
  }
  step_ = step;
  m_ = std::move(first);
  v_ = std::move(second);
}

template class Adam<float>;
template class Adam<double>;

}  // namespace tsnca
