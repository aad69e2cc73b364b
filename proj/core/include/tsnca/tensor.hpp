#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tsnca/errors.hpp"

namespace tsnca {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

namespace detail {

// One vertex of the reverse-mode graph. Non-leaf nodes own a closure that
// reads their own gradient and accumulates into their parents.
template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until the first accumulation
  bool requires_grad = false;
  bool is_leaf = true;
  bool consumed = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  std::span<T> grad_buffer();
};

}  // namespace detail

// Dense row-major tensor with handle semantics: copies share storage and
// graph position, like a reference-counted autograd variable.
//
// T is float for training/inference and double for gradient checking.
template <typename T>
class Tensor {
 public:
  using value_type = T;
  using NodePtr = std::shared_ptr<detail::Node<T>>;

  Tensor();
  explicit Tensor(NodePtr node);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<T> data, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;

  std::span<const T> data() const;
  // Only leaves may be written in place (parameters, inputs).
  std::span<T> mutable_data();
  T item() const;
  T at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  bool is_leaf() const;

  bool has_grad() const;
  std::span<const T> grad() const;
  void zero_grad();

  // Populates gradients on every reachable tensor that tracks them.
  // Throws GraphError for non-scalar losses, detached graphs, or a second
  // call on an already-consumed graph.
  void backward() const;

  // Fresh leaf holding a copy of the values; no graph history.
  Tensor detach() const;
  Tensor clone(bool requires_grad = false) const;

  template <typename U>
  Tensor<U> cast() const;

  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

template <typename T>
template <typename U>
Tensor<U> Tensor<T>::cast() const {
  std::vector<U> out(numel());
  auto src = data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<U>(src[i]);
  return Tensor<U>::from_data(shape(), std::move(out), false);
}

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace tsnca
