#pragma once

#include <span>
#include <vector>

#include "tsnca/tensor.hpp"

// Differentiable tensor operations. Every op validates shapes, rejects
// non-finite forward results with NumericError, and records a backward
// closure when any operand tracks gradients.
namespace tsnca::ops {

// Elementwise, identical shapes.
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b);

template <typename T> Tensor<T> add_scalar(const Tensor<T>& x, T c);
template <typename T> Tensor<T> scale(const Tensor<T>& x, T c);

template <typename T> Tensor<T> relu(const Tensor<T>& x);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& x);
// Subgradient 0 at 0.
template <typename T> Tensor<T> abs(const Tensor<T>& x);
template <typename T> Tensor<T> square(const Tensor<T>& x);

// x[N,C,H,W] * gate[N,C,1,1], gate broadcast over H and W.
template <typename T> Tensor<T> broadcast_mul(const Tensor<T>& x, const Tensor<T>& gate);

// Reductions to a rank-0 tensor.
template <typename T> Tensor<T> sum(const Tensor<T>& x);
template <typename T> Tensor<T> mean(const Tensor<T>& x);

template <typename T> Tensor<T> reshape(const Tensor<T>& x, Shape shape);

// input[N,Cin,H,W], weight[Cout,Cin,kH,kW], bias[Cout] or undefined.
// Zero padding; kernel extents must be odd.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 std::size_t stride, std::size_t padding);

// x[N,Cin] -> [N,Cout] with weight[Cout,Cin], bias[Cout].
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

// [N,C,H,W] -> [N,C,1,1]
template <typename T> Tensor<T> global_average_pool(const Tensor<T>& x);

template <typename T> Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts);
template <typename T> Tensor<T> upsample_nearest2x(const Tensor<T>& x);
// 2x2 window, stride 2; odd trailing rows/columns are dropped.
template <typename T> Tensor<T> max_pool2x2(const Tensor<T>& x);

// Forward differences along width (horizontal) or height (vertical) of a
// [N,C,H,W] tensor; the last column/row is zero.
template <typename T> Tensor<T> diff_horizontal(const Tensor<T>& x);
template <typename T> Tensor<T> diff_vertical(const Tensor<T>& x);

// Depthwise 1-D correlation along axis 2 (rows) or 3 (columns) with
// mirror-reflection boundary handling. Kernel length must be odd.
template <typename T>
Tensor<T> filter1d_reflect(const Tensor<T>& x, std::span<const double> kernel, std::size_t axis);

// Mirror index without edge duplication (numpy "reflect"), valid for any
// integer offset and any extent >= 1.
std::size_t reflect_index(long long i, std::size_t n);

}  // namespace tsnca::ops
