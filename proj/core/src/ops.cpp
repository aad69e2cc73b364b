#include "tsnca/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tsnca::ops {
namespace {

template <typename T>
using Node = detail::Node<T>;
template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;
template <typename T>
using BackwardFn = std::function<void(Node<T>&)>;

template <typename T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> value,
                      std::vector<NodePtr<T>> parents, BackwardFn<T> fn) {
  for (const T v : value) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string(op) + ": produced a non-finite value");
    }
  }
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->is_leaf = false;
  node->requires_grad = std::any_of(parents.begin(), parents.end(),
                                    [](const auto& p) { return p && p->requires_grad; });
  if (node->requires_grad) {
    node->parents = std::move(parents);
    node->backward_fn = std::move(fn);
  }
  return Tensor<T>(std::move(node));
}

template <typename T>
void require_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                     " vs " + shape_to_string(b.shape()));
  }
}

template <typename T>
void require_rank4(const char* op, const Tensor<T>& x) {
  if (x.rank() != 4) {
    throw ShapeError(std::string(op) + ": expected [N,C,H,W], got " + shape_to_string(x.shape()));
  }
}

// Applies f elementwise; dfdx(x, y) gives the local derivative from input and output.
template <typename T, typename F, typename D>
Tensor<T> unary(const char* op, const Tensor<T>& x, F f, D dfdx) {
  auto in = x.data();
  std::vector<T> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return make_result<T>(op, x.shape(), std::move(out), {x.node()}, [dfdx](Node<T>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] += self.grad[i] * dfdx(p.value[i], self.value[i]);
    }
  });
}

struct ConvGeometry {
  std::size_t n, cin, h, w, cout, kh, kw, stride, pad, ho, wo;
  std::size_t k() const { return cin * kh * kw; }
};

// Gathers the receptive fields of output rows [oy0, oy1) of one sample.
template <typename T>
void im2col(const ConvGeometry& g, const T* in, std::size_t oy0, std::size_t oy1, T* col) {
  const std::size_t cols = (oy1 - oy0) * g.wo;
  for (std::size_t ci = 0; ci < g.cin; ++ci) {
    const T* plane = in + ci * g.h * g.w;
    for (std::size_t ky = 0; ky < g.kh; ++ky) {
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        T* dst = col + ((ci * g.kh + ky) * g.kw + kx) * cols;
        for (std::size_t oy = oy0; oy < oy1; ++oy) {
          const long long iy = static_cast<long long>(oy * g.stride + ky) - static_cast<long long>(g.pad);
          T* row = dst + (oy - oy0) * g.wo;
          if (iy < 0 || iy >= static_cast<long long>(g.h)) {
            std::fill(row, row + g.wo, T{0});
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(iy) * g.w;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const long long ix = static_cast<long long>(ox * g.stride + kx) - static_cast<long long>(g.pad);
            row[ox] = (ix < 0 || ix >= static_cast<long long>(g.w)) ? T{0} : src[ix];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const ConvGeometry& g, const T* col, std::size_t oy0, std::size_t oy1, T* in_grad) {
  const std::size_t cols = (oy1 - oy0) * g.wo;
  for (std::size_t ci = 0; ci < g.cin; ++ci) {
    T* plane = in_grad + ci * g.h * g.w;
    for (std::size_t ky = 0; ky < g.kh; ++ky) {
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        const T* src = col + ((ci * g.kh + ky) * g.kw + kx) * cols;
        for (std::size_t oy = oy0; oy < oy1; ++oy) {
          const long long iy = static_cast<long long>(oy * g.stride + ky) - static_cast<long long>(g.pad);
          if (iy < 0 || iy >= static_cast<long long>(g.h)) continue;
          const T* row = src + (oy - oy0) * g.wo;
          T* dst = plane + static_cast<std::size_t>(iy) * g.w;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const long long ix = static_cast<long long>(ox * g.stride + kx) - static_cast<long long>(g.pad);
            if (ix >= 0 && ix < static_cast<long long>(g.w)) dst[ix] += row[ox];
          }
        }
      }
    }
  }
}

// Output rows per im2col tile, bounding the column buffer to ~2M elements.
std::size_t conv_tile_rows(const ConvGeometry& g) {
  constexpr std::size_t kBudget = std::size_t{1} << 21;
  const std::size_t per_row = std::max<std::size_t>(1, g.k() * g.wo);
  return std::clamp<std::size_t>(kBudget / per_row, 1, g.ho);
}

}  // namespace

std::size_t reflect_index(long long i, std::size_t n) {
  if (n == 1) return 0;
  const long long period = 2 * static_cast<long long>(n - 1);
  long long m = i % period;
  if (m < 0) m += period;
  if (m >= static_cast<long long>(n)) m = period - m;
  return static_cast<std::size_t>(m);
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("add", a, b);
  auto x = a.data(), y = b.data();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return make_result<T>("add", a.shape(), std::move(out), {a.node(), b.node()}, [](Node<T>& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      auto g = p->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("sub", a, b);
  auto x = a.data(), y = b.data();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return make_result<T>("sub", a.shape(), std::move(out), {a.node(), b.node()}, [](Node<T>& self) {
    if (self.parents[0]->requires_grad) {
      auto g = self.parents[0]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (self.parents[1]->requires_grad) {
      auto g = self.parents[1]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("mul", a, b);
  auto x = a.data(), y = b.data();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return make_result<T>("mul", a.shape(), std::move(out), {a.node(), b.node()}, [](Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto g = pa.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      auto g = pb.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.value[i];
    }
  });
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("div", a, b);
  auto x = a.data(), y = b.data();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] / y[i];
  return make_result<T>("div", a.shape(), std::move(out), {a.node(), b.node()}, [](Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto g = pa.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] / pb.value[i];
    }
    if (pb.requires_grad) {
      auto g = pb.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] -= self.grad[i] * self.value[i] / pb.value[i];
      }
    }
  });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T c) {
  return unary<T>("add_scalar", x, [c](T v) { return v + c; }, [](T, T) { return T{1}; });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T c) {
  return unary<T>("scale", x, [c](T v) { return v * c; }, [c](T, T) { return c; });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return unary<T>(
      "relu", x, [](T v) { return v > T{0} ? v : T{0}; },
      [](T v, T) { return v > T{0} ? T{1} : T{0}; });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary<T>(
      "sigmoid", x,
      [](T v) {
        // Branches keep exp() from overflowing for large |v|.
        if (v >= T{0}) return T{1} / (T{1} + std::exp(-v));
        const T e = std::exp(v);
        return e / (T{1} + e);
      },
      [](T, T y) { return y * (T{1} - y); });
}

template <typename T>
Tensor<T> abs(const Tensor<T>& x) {
  return unary<T>(
      "abs", x, [](T v) { return std::abs(v); },
      [](T v, T) { return v > T{0} ? T{1} : (v < T{0} ? T{-1} : T{0}); });
}

template <typename T>
Tensor<T> square(const Tensor<T>& x) {
  return unary<T>("square", x, [](T v) { return v * v; }, [](T v, T) { return T{2} * v; });
}

template <typename T>
Tensor<T> broadcast_mul(const Tensor<T>& x, const Tensor<T>& gate) {
  require_rank4("broadcast_mul", x);
  const auto& s = x.shape();
  if (gate.shape() != Shape{s[0], s[1], 1, 1}) {
    throw ShapeError("broadcast_mul: gate shape " + shape_to_string(gate.shape()) +
                     " incompatible with " + shape_to_string(s));
  }
  const std::size_t hw = s[2] * s[3];
  const std::size_t planes = s[0] * s[1];
  auto in = x.data();
  auto gv = gate.data();
  std::vector<T> out(in.size());
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t i = 0; i < hw; ++i) out[p * hw + i] = in[p * hw + i] * gv[p];
  }
  return make_result<T>("broadcast_mul", s, std::move(out), {x.node(), gate.node()},
                        [hw, planes](Node<T>& self) {
                          auto& px = *self.parents[0];
                          auto& pg = *self.parents[1];
                          if (px.requires_grad) {
                            auto g = px.grad_buffer();
                            for (std::size_t p = 0; p < planes; ++p)
                              for (std::size_t i = 0; i < hw; ++i)
                                g[p * hw + i] += self.grad[p * hw + i] * pg.value[p];
                          }
                          if (pg.requires_grad) {
                            auto g = pg.grad_buffer();
                            for (std::size_t p = 0; p < planes; ++p) {
                              T acc{0};
                              for (std::size_t i = 0; i < hw; ++i)
                                acc += self.grad[p * hw + i] * px.value[p * hw + i];
                              g[p] += acc;
                            }
                          }
                        });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  double acc = 0.0;
  for (const T v : x.data()) acc += static_cast<double>(v);
  return make_result<T>("sum", {}, {static_cast<T>(acc)}, {x.node()}, [](Node<T>& self) {
    auto g = self.parents[0]->grad_buffer();
    const T up = self.grad[0];
    for (auto& v : g) v += up;
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  const std::size_t n = x.numel();
  if (n == 0) throw ShapeError("mean: empty tensor");
  double acc = 0.0;
  for (const T v : x.data()) acc += static_cast<double>(v);
  return make_result<T>("mean", {}, {static_cast<T>(acc / static_cast<double>(n))}, {x.node()},
                        [n](Node<T>& self) {
                          auto g = self.parents[0]->grad_buffer();
                          const T up = self.grad[0] / static_cast<T>(n);
                          for (auto& v : g) v += up;
                        });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: cannot view " + shape_to_string(x.shape()) + " as " +
                     shape_to_string(shape));
  }
  auto in = x.data();
  return make_result<T>("reshape", std::move(shape), std::vector<T>(in.begin(), in.end()),
                        {x.node()}, [](Node<T>& self) {
                          auto g = self.parents[0]->grad_buffer();
                          for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                        });
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 std::size_t stride, std::size_t padding) {
  require_rank4("conv2d", input);
  if (weight.rank() != 4) {
    throw ShapeError("conv2d: weight must be [Cout,Cin,kH,kW], got " +
                     shape_to_string(weight.shape()));
  }
  const auto& is = input.shape();
  const auto& ws = weight.shape();
  if (is[1] != ws[1]) {
    throw ShapeError("conv2d: input has " + std::to_string(is[1]) + " channels but weight " +
                     shape_to_string(ws) + " expects " + std::to_string(ws[1]));
  }
  if (ws[2] % 2 == 0 || ws[3] % 2 == 0) {
    throw ShapeError("conv2d: kernel extents must be odd, got " + shape_to_string(ws));
  }
  if (stride == 0) throw ShapeError("conv2d: stride must be positive");
  if (is[2] + 2 * padding < ws[2] || is[3] + 2 * padding < ws[3]) {
    throw ShapeError("conv2d: padded input " + shape_to_string(is) + " smaller than kernel " +
                     shape_to_string(ws));
  }
  if (bias.defined() && bias.shape() != Shape{ws[0]}) {
    throw ShapeError("conv2d: bias shape " + shape_to_string(bias.shape()) +
                     " does not match Cout=" + std::to_string(ws[0]));
  }

  ConvGeometry g{is[0], is[1], is[2], is[3], ws[0], ws[2], ws[3], stride, padding, 0, 0};
  g.ho = (g.h + 2 * g.pad - g.kh) / g.stride + 1;
  g.wo = (g.w + 2 * g.pad - g.kw) / g.stride + 1;
  const std::size_t K = g.k();
  const std::size_t P = g.ho * g.wo;
  const std::size_t tile = conv_tile_rows(g);

  auto in = input.data();
  auto wv = weight.data();
  std::vector<T> out(g.n * g.cout * P);
  std::vector<T> col(K * tile * g.wo);

  for (std::size_t n = 0; n < g.n; ++n) {
    const T* in_n = in.data() + n * g.cin * g.h * g.w;
    T* out_n = out.data() + n * g.cout * P;
    for (std::size_t oy0 = 0; oy0 < g.ho; oy0 += tile) {
      const std::size_t oy1 = std::min(g.ho, oy0 + tile);
      const std::size_t cols = (oy1 - oy0) * g.wo;
      im2col(g, in_n, oy0, oy1, col.data());
      for (std::size_t co = 0; co < g.cout; ++co) {
        T* row = out_n + co * P + oy0 * g.wo;
        const T b = bias.defined() ? bias.data()[co] : T{0};
        std::fill(row, row + cols, b);
        const T* wrow = wv.data() + co * K;
        for (std::size_t k = 0; k < K; ++k) {
          const T w = wrow[k];
          const T* c = col.data() + k * cols;
          for (std::size_t j = 0; j < cols; ++j) row[j] += w * c[j];
        }
      }
    }
  }

  std::vector<NodePtr<T>> parents{input.node(), weight.node()};
  if (bias.defined()) parents.push_back(bias.node());
  return make_result<T>(
      "conv2d", {g.n, g.cout, g.ho, g.wo}, std::move(out), std::move(parents),
      [g, K, P, tile](Node<T>& self) {
        auto& pin = *self.parents[0];
        auto& pw = *self.parents[1];
        Node<T>* pb = self.parents.size() > 2 ? self.parents[2].get() : nullptr;
        const T* dout = self.grad.data();

        if (pb && pb->requires_grad) {
          auto gb = pb->grad_buffer();
          for (std::size_t n = 0; n < g.n; ++n)
            for (std::size_t co = 0; co < g.cout; ++co) {
              T acc{0};
              const T* d = dout + (n * g.cout + co) * P;
              for (std::size_t j = 0; j < P; ++j) acc += d[j];
              gb[co] += acc;
            }
        }
        if (!pin.requires_grad && !pw.requires_grad) return;

        std::vector<T> col(K * tile * g.wo);
        std::vector<T> dcol(pin.requires_grad ? col.size() : 0);
        T* gw = pw.requires_grad ? pw.grad_buffer().data() : nullptr;
        T* gin = pin.requires_grad ? pin.grad_buffer().data() : nullptr;
        const T* wv = pw.value.data();

        for (std::size_t n = 0; n < g.n; ++n) {
          const T* in_n = pin.value.data() + n * g.cin * g.h * g.w;
          const T* dout_n = dout + n * g.cout * P;
          for (std::size_t oy0 = 0; oy0 < g.ho; oy0 += tile) {
            const std::size_t oy1 = std::min(g.ho, oy0 + tile);
            const std::size_t cols = (oy1 - oy0) * g.wo;
            if (gw) {
              im2col(g, in_n, oy0, oy1, col.data());
              for (std::size_t co = 0; co < g.cout; ++co) {
                const T* d = dout_n + co * P + oy0 * g.wo;
                T* gwrow = gw + co * K;
                for (std::size_t k = 0; k < K; ++k) {
                  const T* c = col.data() + k * cols;
                  T acc{0};
                  for (std::size_t j = 0; j < cols; ++j) acc += d[j] * c[j];
                  gwrow[k] += acc;
                }
              }
            }
            if (gin) {
              std::fill(dcol.begin(), dcol.begin() + static_cast<std::ptrdiff_t>(K * cols), T{0});
              for (std::size_t co = 0; co < g.cout; ++co) {
                const T* d = dout_n + co * P + oy0 * g.wo;
                const T* wrow = wv + co * K;
                for (std::size_t k = 0; k < K; ++k) {
                  const T w = wrow[k];
                  T* dc = dcol.data() + k * cols;
                  for (std::size_t j = 0; j < cols; ++j) dc[j] += w * d[j];
                }
              }
              col2im(g, dcol.data(), oy0, oy1, gin + n * g.cin * g.h * g.w);
            }
          }
        }
      });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  if (x.rank() != 2 || weight.rank() != 2 || x.dim(1) != weight.dim(1)) {
    throw ShapeError("linear: input " + shape_to_string(x.shape()) + " incompatible with weight " +
                     shape_to_string(weight.shape()));
  }
  const std::size_t n = x.dim(0), in_f = x.dim(1), out_f = weight.dim(0);
  if (bias.defined() && bias.shape() != Shape{out_f}) {
    throw ShapeError("linear: bias shape " + shape_to_string(bias.shape()) +
                     " does not match out_features=" + std::to_string(out_f));
  }
  auto xv = x.data(), wv = weight.data();
  std::vector<T> out(n * out_f);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t o = 0; o < out_f; ++o) {
      T acc = bias.defined() ? bias.data()[o] : T{0};
      for (std::size_t i = 0; i < in_f; ++i) acc += wv[o * in_f + i] * xv[b * in_f + i];
      out[b * out_f + o] = acc;
    }
  std::vector<NodePtr<T>> parents{x.node(), weight.node()};
  if (bias.defined()) parents.push_back(bias.node());
  return make_result<T>("linear", {n, out_f}, std::move(out), std::move(parents),
                        [n, in_f, out_f](Node<T>& self) {
                          auto& px = *self.parents[0];
                          auto& pw = *self.parents[1];
                          const T* d = self.grad.data();
                          if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
                            auto gb = self.parents[2]->grad_buffer();
                            for (std::size_t b = 0; b < n; ++b)
                              for (std::size_t o = 0; o < out_f; ++o) gb[o] += d[b * out_f + o];
                          }
                          if (pw.requires_grad) {
                            auto gw = pw.grad_buffer();
                            for (std::size_t b = 0; b < n; ++b)
                              for (std::size_t o = 0; o < out_f; ++o)
                                for (std::size_t i = 0; i < in_f; ++i)
                                  gw[o * in_f + i] += d[b * out_f + o] * px.value[b * in_f + i];
                          }
                          if (px.requires_grad) {
                            auto gx = px.grad_buffer();
                            for (std::size_t b = 0; b < n; ++b)
                              for (std::size_t o = 0; o < out_f; ++o)
                                for (std::size_t i = 0; i < in_f; ++i)
                                  gx[b * in_f + i] += d[b * out_f + o] * pw.value[o * in_f + i];
                          }
                        });
}

template <typename T>
Tensor<T> global_average_pool(const Tensor<T>& x) {
  require_rank4("global_average_pool", x);
  const auto& s = x.shape();
  const std::size_t hw = s[2] * s[3];
  if (hw == 0) throw ShapeError("global_average_pool: empty spatial extent");
  const std::size_t planes = s[0] * s[1];
  auto in = x.data();
  std::vector<T> out(planes);
  for (std::size_t p = 0; p < planes; ++p) {
    double acc = 0.0;
    for (std::size_t i = 0; i < hw; ++i) acc += static_cast<double>(in[p * hw + i]);
    out[p] = static_cast<T>(acc / static_cast<double>(hw));
  }
  return make_result<T>("global_average_pool", {s[0], s[1], 1, 1}, std::move(out), {x.node()},
                        [hw, planes](Node<T>& self) {
                          auto g = self.parents[0]->grad_buffer();
                          for (std::size_t p = 0; p < planes; ++p) {
                            const T up = self.grad[p] / static_cast<T>(hw);
                            for (std::size_t i = 0; i < hw; ++i) g[p * hw + i] += up;
                          }
                        });
}

template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  for (const auto& p : parts) require_rank4("concat_channels", p);
  const auto& s0 = parts[0].shape();
  std::size_t channels = 0;
  for (const auto& p : parts) {
    const auto& s = p.shape();
    if (s[0] != s0[0] || s[2] != s0[2] || s[3] != s0[3]) {
      throw ShapeError("concat_channels: incompatible shapes " + shape_to_string(s0) + " and " +
                       shape_to_string(s));
    }
    channels += s[1];
  }
  const std::size_t n = s0[0], hw = s0[2] * s0[3];
  std::vector<T> out(n * channels * hw);
  std::vector<std::size_t> widths;
  std::vector<NodePtr<T>> parents;
  for (std::size_t b = 0; b < n; ++b) {
    std::size_t offset = 0;
    for (const auto& p : parts) {
      const std::size_t block = p.dim(1) * hw;
      auto src = p.data().subspan(b * block, block);
      std::copy(src.begin(), src.end(), out.begin() + static_cast<std::ptrdiff_t>((b * channels + offset) * hw));
      offset += p.dim(1);
    }
  }
  for (const auto& p : parts) {
    widths.push_back(p.dim(1));
    parents.push_back(p.node());
  }
  return make_result<T>("concat_channels", {n, channels, s0[2], s0[3]}, std::move(out),
                        std::move(parents), [n, hw, channels, widths](Node<T>& self) {
                          std::size_t offset = 0;
                          for (std::size_t i = 0; i < widths.size(); ++i) {
                            auto& p = *self.parents[i];
                            if (p.requires_grad) {
                              auto g = p.grad_buffer();
                              const std::size_t block = widths[i] * hw;
                              for (std::size_t b = 0; b < n; ++b) {
                                const T* src = self.grad.data() + (b * channels + offset) * hw;
                                for (std::size_t j = 0; j < block; ++j) g[b * block + j] += src[j];
                              }
                            }
                            offset += widths[i];
                          }
                        });
}

template <typename T>
Tensor<T> upsample_nearest2x(const Tensor<T>& x) {
  require_rank4("upsample_nearest2x", x);
  const auto& s = x.shape();
  const std::size_t planes = s[0] * s[1], h = s[2], w = s[3];
  auto in = x.data();
  std::vector<T> out(planes * 4 * h * w);
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t y = 0; y < 2 * h; ++y)
      for (std::size_t xx = 0; xx < 2 * w; ++xx)
        out[(p * 2 * h + y) * 2 * w + xx] = in[(p * h + y / 2) * w + xx / 2];
  return make_result<T>("upsample_nearest2x", {s[0], s[1], 2 * h, 2 * w}, std::move(out),
                        {x.node()}, [planes, h, w](Node<T>& self) {
                          auto g = self.parents[0]->grad_buffer();
                          for (std::size_t p = 0; p < planes; ++p)
                            for (std::size_t y = 0; y < 2 * h; ++y)
                              for (std::size_t xx = 0; xx < 2 * w; ++xx)
                                g[(p * h + y / 2) * w + xx / 2] +=
                                    self.grad[(p * 2 * h + y) * 2 * w + xx];
                        });
}

template <typename T>
Tensor<T> max_pool2x2(const Tensor<T>& x) {
  require_rank4("max_pool2x2", x);
  const auto& s = x.shape();
  const std::size_t planes = s[0] * s[1], h = s[2], w = s[3];
  const std::size_t ho = h / 2, wo = w / 2;
  if (ho == 0 || wo == 0) throw ShapeError("max_pool2x2: input smaller than 2x2");
  auto in = x.data();
  std::vector<T> out(planes * ho * wo);
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t y = 0; y < ho; ++y)
      for (std::size_t xx = 0; xx < wo; ++xx) {
        std::size_t best = (p * h + 2 * y) * w + 2 * xx;
        for (std::size_t dy = 0; dy < 2; ++dy)
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = (p * h + 2 * y + dy) * w + 2 * xx + dx;
            if (in[idx] > in[best]) best = idx;
          }
        const std::size_t o = (p * ho + y) * wo + xx;
        out[o] = in[best];
        argmax[o] = best;
      }
  return make_result<T>("max_pool2x2", {s[0], s[1], ho, wo}, std::move(out), {x.node()},
                        [argmax = std::move(argmax)](Node<T>& self) {
                          auto g = self.parents[0]->grad_buffer();
                          for (std::size_t o = 0; o < argmax.size(); ++o) g[argmax[o]] += self.grad[o];
                        });
}

template <typename T>
Tensor<T> diff_horizontal(const Tensor<T>& x) {
  require_rank4("diff_horizontal", x);
  const auto& s = x.shape();
  if (s[3] < 2) throw ShapeError("diff_horizontal: width must be at least 2");
  const std::size_t rows = s[0] * s[1] * s[2], w = s[3];
  auto in = x.data();
  std::vector<T> out(in.size(), T{0});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c + 1 < w; ++c) out[r * w + c] = in[r * w + c + 1] - in[r * w + c];
  return make_result<T>("diff_horizontal", s, std::move(out), {x.node()}, [rows, w](Node<T>& self) {
    auto g = self.parents[0]->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c + 1 < w; ++c) {
        const T d = self.grad[r * w + c];
        g[r * w + c + 1] += d;
        g[r * w + c] -= d;
      }
  });
}

template <typename T>
Tensor<T> diff_vertical(const Tensor<T>& x) {
  require_rank4("diff_vertical", x);
  const auto& s = x.shape();
  if (s[2] < 2) throw ShapeError("diff_vertical: height must be at least 2");
  const std::size_t planes = s[0] * s[1], h = s[2], w = s[3];
  auto in = x.data();
  std::vector<T> out(in.size(), T{0});
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t y = 0; y + 1 < h; ++y)
      for (std::size_t c = 0; c < w; ++c) {
        const std::size_t i = (p * h + y) * w + c;
        out[i] = in[i + w] - in[i];
      }
  return make_result<T>("diff_vertical", s, std::move(out), {x.node()}, [planes, h, w](Node<T>& self) {
    auto g = self.parents[0]->grad_buffer();
    for (std::size_t p = 0; p < planes; ++p)
      for (std::size_t y = 0; y + 1 < h; ++y)
        for (std::size_t c = 0; c < w; ++c) {
          const std::size_t i = (p * h + y) * w + c;
          g[i + w] += self.grad[i];
          g[i] -= self.grad[i];
        }
  });
}

template <typename T>
Tensor<T> filter1d_reflect(const Tensor<T>& x, std::span<const double> kernel, std::size_t axis) {
  require_rank4("filter1d_reflect", x);
  if (axis != 2 && axis != 3) throw ShapeError("filter1d_reflect: axis must be 2 or 3");
  if (kernel.empty() || kernel.size() % 2 == 0) {
    throw ShapeError("filter1d_reflect: kernel length must be odd");
  }
  const auto& s = x.shape();
  const std::size_t planes = s[0] * s[1], h = s[2], w = s[3];
  const std::size_t len = axis == 3 ? w : h;
  // Element stride along the filtered axis and the number of independent lines.
  const std::size_t step = axis == 3 ? 1 : w;
  const long long radius = static_cast<long long>(kernel.size() / 2);

  // Precompute tap source offsets; identical for every line.
  std::vector<std::size_t> taps(len * kernel.size());
  for (std::size_t i = 0; i < len; ++i)
    for (std::size_t t = 0; t < kernel.size(); ++t)
      taps[i * kernel.size() + t] =
          reflect_index(static_cast<long long>(i) + static_cast<long long>(t) - radius, len) * step;
  std::vector<T> k(kernel.begin(), kernel.end());

  auto line_start = [=](std::size_t p, std::size_t line) {
    return axis == 3 ? (p * h + line) * w : p * h * w + line;
  };
  const std::size_t lines = axis == 3 ? h : w;

  auto in = x.data();
  std::vector<T> out(in.size());
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t line = 0; line < lines; ++line) {
      const std::size_t base = line_start(p, line);
      for (std::size_t i = 0; i < len; ++i) {
        T acc{0};
        for (std::size_t t = 0; t < k.size(); ++t) acc += k[t] * in[base + taps[i * k.size() + t]];
        out[base + i * step] = acc;
      }
    }
  return make_result<T>("filter1d_reflect", s, std::move(out), {x.node()},
                        [=, taps = std::move(taps), k = std::move(k)](Node<T>& self) {
                          auto g = self.parents[0]->grad_buffer();
                          for (std::size_t p = 0; p < planes; ++p)
                            for (std::size_t line = 0; line < lines; ++line) {
                              const std::size_t base = line_start(p, line);
                              for (std::size_t i = 0; i < len; ++i) {
                                const T d = self.grad[base + i * step];
                                for (std::size_t t = 0; t < k.size(); ++t)
                                  g[base + taps[i * k.size() + t]] += k[t] * d;
                              }
                            }
                        });
}

#define TSNCA_INSTANTIATE_OPS(T)                                                              \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> div(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                         \
  template Tensor<T> scale(const Tensor<T>&, T);                                              \
  template Tensor<T> relu(const Tensor<T>&);                                                  \
  template Tensor<T> sigmoid(const Tensor<T>&);                                               \
  template Tensor<T> abs(const Tensor<T>&);                                                   \
  template Tensor<T> square(const Tensor<T>&);                                                \
  template Tensor<T> broadcast_mul(const Tensor<T>&, const Tensor<T>&);                       \
  template Tensor<T> sum(const Tensor<T>&);                                                   \
  template Tensor<T> mean(const Tensor<T>&);                                                  \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                        \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,             \
                            std::size_t, std::size_t);                                        \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);            \
  template Tensor<T> global_average_pool(const Tensor<T>&);                                   \
  template Tensor<T> concat_channels(const std::vector<Tensor<T>>&);                          \
  template Tensor<T> upsample_nearest2x(const Tensor<T>&);                                    \
  template Tensor<T> max_pool2x2(const Tensor<T>&);                                           \
  template Tensor<T> diff_horizontal(const Tensor<T>&);                                       \
  template Tensor<T> diff_vertical(const Tensor<T>&);                                         \
  template Tensor<T> filter1d_reflect(const Tensor<T>&, std::span<const double>, std::size_t);

TSNCA_INSTANTIATE_OPS(float)
TSNCA_INSTANTIATE_OPS(double)

#undef TSNCA_INSTANTIATE_OPS

}  // namespace tsnca::ops
