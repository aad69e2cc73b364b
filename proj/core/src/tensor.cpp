#include "tsnca/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace tsnca {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace detail {

template <typename T>
std::span<T> Node<T>::grad_buffer() {
  if (grad.empty()) grad.assign(value.size(), T{0});
  return grad;
}

template struct Node<float>;
template struct Node<double>;

}  // namespace detail

template <typename T>
Tensor<T>::Tensor() = default;

template <typename T>
Tensor<T>::Tensor(NodePtr node) : node_(std::move(node)) {}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T{0}, requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return from_data(std::move(shape), std::vector<T>(n, value), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::from_data(Shape shape, std::vector<T> data, bool requires_grad) {
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("tensor: shape " + shape_to_string(shape) + " holds " +
                     std::to_string(shape_numel(shape)) + " values but " +
                     std::to_string(data.size()) + " were supplied");
  }
  auto node = std::make_shared<detail::Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return from_data({}, {value}, requires_grad);
}

template <typename T>
const Shape& Tensor<T>::shape() const {
  if (!node_) throw GraphError("tensor: use of an undefined tensor");
  return node_->shape;
}

template <typename T>
std::size_t Tensor<T>::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw ShapeError("tensor: axis " + std::to_string(axis) + " out of range for shape " +
                     shape_to_string(s));
  }
  return s[axis];
}

template <typename T>
std::size_t Tensor<T>::numel() const {
  return shape_numel(shape());
}

template <typename T>
std::span<const T> Tensor<T>::data() const {
  shape();
  return node_->value;
}

template <typename T>
std::span<T> Tensor<T>::mutable_data() {
  shape();
  if (!node_->is_leaf) throw GraphError("tensor: in-place write to a non-leaf tensor");
  return node_->value;
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) {
    throw ShapeError("tensor: item() on shape " + shape_to_string(shape()));
  }
  return node_->value[0];
}

template <typename T>
T Tensor<T>::at(std::initializer_list<std::size_t> index) const {
  const auto& s = shape();
  if (index.size() != s.size()) throw ShapeError("tensor: index rank mismatch");
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i >= s[axis]) throw ShapeError("tensor: index out of range");
    flat = flat * s[axis] + i;
    ++axis;
  }
  return node_->value[flat];
}

template <typename T>
bool Tensor<T>::requires_grad() const {
  return node_ && node_->requires_grad;
}

template <typename T>
void Tensor<T>::set_requires_grad(bool flag) {
  shape();
  if (!node_->is_leaf) throw GraphError("tensor: requires_grad can only be set on leaves");
  node_->requires_grad = flag;
}

template <typename T>
bool Tensor<T>::is_leaf() const {
  return node_ && node_->is_leaf;
}

template <typename T>
bool Tensor<T>::has_grad() const {
  return node_ && !node_->grad.empty();
}

template <typename T>
std::span<const T> Tensor<T>::grad() const {
  if (!has_grad()) throw GraphError("tensor: no gradient has been accumulated");
  return node_->grad;
}

template <typename T>
void Tensor<T>::zero_grad() {
  if (node_) node_->grad.clear();
}

template <typename T>
void Tensor<T>::backward() const {
  if (numel() != 1) {
    throw GraphError("backward: loss must be scalar, got shape " + shape_to_string(shape()));
  }
  if (!node_->requires_grad) {
    throw GraphError("backward: loss is detached from any gradient-tracking tensor");
  }
  if (node_->consumed) {
    throw GraphError("backward: graph already consumed by a previous backward call");
  }

  // Iterative post-order DFS yields a topological order (parents first).
  using NodeT = detail::Node<T>;
  std::vector<NodeT*> order;
  std::unordered_set<NodeT*> visited;
  std::vector<std::pair<NodeT*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      NodeT* p = n->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  for (NodeT* n : order) {
    if (!n->is_leaf && n->consumed) {
      throw GraphError("backward: graph already consumed by a previous backward call");
    }
  }

  node_->grad_buffer()[0] += T{1};
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    NodeT* n = *it;
    if (n->is_leaf || n->grad.empty() || !n->backward_fn) continue;
    n->backward_fn(*n);
  }
  for (NodeT* n : order) {
    if (n->is_leaf) continue;
    n->consumed = true;
    n->backward_fn = nullptr;
    n->parents.clear();
  }
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return clone(false);
}

template <typename T>
Tensor<T> Tensor<T>::clone(bool requires_grad) const {
  auto src = data();
  return from_data(shape(), std::vector<T>(src.begin(), src.end()), requires_grad);
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace tsnca
