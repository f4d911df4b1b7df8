#include "singlegan/ops.hpp"

#include <cmath>
#include <limits>

#include "singlegan/kernels.hpp"

namespace singlegan::ops {

namespace kp = kernels::parallel;

namespace {

constexpr long kParallelThreshold = 1 << 14;

void require_rank(const Shape& s, std::size_t rank, const char* op) {
  if (s.size() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_string(s));
  }
}

void require_same(const Shape& a, const Shape& b, const char* op) {
  if (a != b) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " +
                     shape_string(b));
  }
}

template <typename T, typename F, typename G>
Var<T> unary(const Var<T>& x, F forward, G derivative) {
  const Tensor<T>& in = x.value();
  Tensor<T> out(in.shape());
  const long n = static_cast<long>(in.numel());
  const T* src = in.data();
  T* dst = out.data();
#pragma omp parallel for if (n > kParallelThreshold)
  for (long i = 0; i < n; ++i) dst[i] = forward(src[i]);
  return make_result<T>(std::move(out), {x}, [derivative](Node<T>& self) {
    T* dx = self.input_grad(0);
    if (!dx) return;
    const T* xv = self.inputs[0]->value.data();
    const T* yv = self.value.data();
    const T* g = self.grad.data();
    const long m = static_cast<long>(self.value.numel());
#pragma omp parallel for if (m > kParallelThreshold)
    for (long i = 0; i < m; ++i) dx[i] += g[i] * derivative(xv[i], yv[i]);
  });
}

template <typename T>
Var<T> scalar_result(double value, std::vector<Var<T>> inputs, std::function<void(Node<T>&)> fn) {
  return make_result<T>(Tensor<T>::scalar(static_cast<T>(value)), std::move(inputs), std::move(fn));
}

}  // namespace

template <typename T>
void check_finite(const Tensor<T>& t, const char* what) {
  for (const T v : t.values()) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite value in ") + what);
  }
}

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, std::size_t stride,
              std::size_t pad) {
  require_rank(x.shape(), 4, "conv2d input");
  require_rank(weight.shape(), 4, "conv2d weight");
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  if (ws[1] != xs[1] || ws[2] != ws[3]) {
    throw ShapeError("conv2d: weight " + shape_string(ws) + " incompatible with input " +
                     shape_string(xs));
  }
  if (bias.defined() && bias.shape() != Shape{ws[0]}) throw ShapeError("conv2d: bias shape");
  kernels::ConvGeometry g{xs[0], xs[1], xs[2], xs[3], ws[0], ws[2], stride, pad};
  if (!g.valid()) {
    throw ShapeError("conv2d: input " + shape_string(xs) + " too small for kernel " +
                     std::to_string(ws[2]));
  }
  Tensor<T> out(Shape{g.batch, g.out_channels, g.out_height(), g.out_width()});
  kp::conv2d_forward<T>(g, x.value().data(), weight.value().data(),
                        bias.defined() ? bias.value().data() : nullptr, out.data());
  std::vector<Var<T>> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return make_result<T>(std::move(out), std::move(inputs), [g](Node<T>& self) {
    kp::conv2d_backward<T>(g, self.inputs[0]->value.data(), self.inputs[1]->value.data(),
                           self.grad.data(), self.input_grad(0), self.input_grad(1),
                           self.inputs.size() > 2 ? self.input_grad(2) : nullptr);
  });
}

template <typename T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias,
                        std::size_t stride, std::size_t pad, std::size_t output_pad) {
  require_rank(x.shape(), 4, "conv_transpose2d input");
  require_rank(weight.shape(), 4, "conv_transpose2d weight");
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  if (ws[0] != xs[1] || ws[2] != ws[3]) {
    throw ShapeError("conv_transpose2d: weight " + shape_string(ws) + " incompatible with input " +
                     shape_string(xs));
  }
  if (bias.defined() && bias.shape() != Shape{ws[1]}) throw ShapeError("conv_transpose2d: bias shape");
  kernels::TransposedConvGeometry g{xs[0], xs[1], xs[2], xs[3], ws[1], ws[2], stride, pad, output_pad};
  if (!g.valid()) throw ShapeError("conv_transpose2d: invalid geometry for " + shape_string(xs));
  Tensor<T> out(Shape{g.batch, g.out_channels, g.out_height(), g.out_width()});
  kp::conv_transpose2d_forward<T>(g, x.value().data(), weight.value().data(),
                                  bias.defined() ? bias.value().data() : nullptr, out.data());
  std::vector<Var<T>> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return make_result<T>(std::move(out), std::move(inputs), [g](Node<T>& self) {
    kp::conv_transpose2d_backward<T>(g, self.inputs[0]->value.data(), self.inputs[1]->value.data(),
                                     self.grad.data(), self.input_grad(0), self.input_grad(1),
                                     self.inputs.size() > 2 ? self.input_grad(2) : nullptr);
  });
}

template <typename T>
Var<T> reflection_pad2d(const Var<T>& x, std::size_t pad) {
  require_rank(x.shape(), 4, "reflection_pad2d");
  const std::size_t n = x.shape()[0], c = x.shape()[1], h = x.shape()[2], w = x.shape()[3];
  if (pad >= h || pad >= w) {
    throw ShapeError("reflection_pad2d: pad " + std::to_string(pad) + " too large for " +
                     shape_string(x.shape()));
  }
  const std::size_t oh = h + 2 * pad, ow = w + 2 * pad;
  // Source index for every padded coordinate along one axis.
  auto reflect = [pad](std::size_t len) {
    std::vector<std::size_t> idx(len + 2 * pad);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      long s = static_cast<long>(i) - static_cast<long>(pad);
      if (s < 0) s = -s;
      if (s >= static_cast<long>(len)) s = 2 * (static_cast<long>(len) - 1) - s;
      idx[i] = static_cast<std::size_t>(s);
    }
    return idx;
  };
  auto rows = reflect(h), cols = reflect(w);
  Tensor<T> out(Shape{n, c, oh, ow});
  const T* src = x.value().data();
  T* dst = out.data();
  const long planes = static_cast<long>(n * c);
#pragma omp parallel for if (planes * static_cast<long>(oh * ow) > kParallelThreshold)
  for (long p = 0; p < planes; ++p) {
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        dst[(p * oh + i) * ow + j] = src[(p * h + rows[i]) * w + cols[j]];
      }
    }
  }
  return make_result<T>(std::move(out), {x},
                        [rows = std::move(rows), cols = std::move(cols), planes, h, w, oh, ow](Node<T>& self) {
                          T* dx = self.input_grad(0);
                          if (!dx) return;
                          const T* g = self.grad.data();
                          for (long p = 0; p < planes; ++p) {
                            for (std::size_t i = 0; i < oh; ++i) {
                              for (std::size_t j = 0; j < ow; ++j) {
                                dx[(p * h + rows[i]) * w + cols[j]] += g[(p * oh + i) * ow + j];
                              }
                            }
                          }
                        });
}

template <typename T>
Var<T> instance_normalize(const Var<T>& x, double eps) {
  require_rank(x.shape(), 4, "instance_normalize");
  const Shape& s = x.shape();
  const std::size_t planes = s[0] * s[1], plane_size = s[2] * s[3];
  if (plane_size == 0) throw ShapeError("instance_normalize: empty spatial extent");
  Tensor<T> out(s);
  Tensor<T> inv_std(Shape{planes});
  kp::instance_norm_forward<T>(planes, plane_size, x.value().data(), static_cast<T>(eps), out.data(),
                               inv_std.data());
  return make_result<T>(std::move(out), {x},
                        [inv_std = std::move(inv_std), planes, plane_size](Node<T>& self) {
                          T* dx = self.input_grad(0);
                          if (!dx) return;
                          kp::instance_norm_backward<T>(planes, plane_size, self.value.data(),
                                                        inv_std.data(), self.grad.data(), dx);
                        });
}

template <typename T>
Var<T> channel_affine(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta) {
  require_rank(x.shape(), 4, "channel_affine");
  const Shape& s = x.shape();
  const std::size_t n = s[0], c = s[1], plane = s[2] * s[3];
  if (gamma.shape() != Shape{c} || beta.shape() != Shape{c}) {
    throw ShapeError("channel_affine: gamma/beta must have length " + std::to_string(c));
  }
  Tensor<T> out(s);
  const T* xv = x.value().data();
  const T* gv = gamma.value().data();
  const T* bv = beta.value().data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < c; ++k) {
      const std::size_t off = (i * c + k) * plane;
      for (std::size_t j = 0; j < plane; ++j) out[off + j] = gv[k] * xv[off + j] + bv[k];
    }
  }
  return make_result<T>(std::move(out), {x, gamma, beta}, [n, c, plane](Node<T>& self) {
    T* dx = self.input_grad(0);
    T* dg = self.input_grad(1);
    T* db = self.input_grad(2);
    const T* xv = self.inputs[0]->value.data();
    const T* gv = self.inputs[1]->value.data();
    const T* g = self.grad.data();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < c; ++k) {
        const std::size_t off = (i * c + k) * plane;
        T sum_g = 0, sum_gx = 0;
        for (std::size_t j = 0; j < plane; ++j) {
          sum_g += g[off + j];
          sum_gx += g[off + j] * xv[off + j];
          if (dx) dx[off + j] += g[off + j] * gv[k];
        }
        if (dg) dg[k] += sum_gx;
        if (db) db[k] += sum_g;
      }
    }
  });
}

template <typename T>
Var<T> add_channel_bias(const Var<T>& x, const Var<T>& bias) {
  require_rank(x.shape(), 4, "add_channel_bias");
  const Shape& s = x.shape();
  const std::size_t planes = s[0] * s[1], plane = s[2] * s[3];
  if (bias.shape() != Shape{s[0], s[1]}) {
    throw ShapeError("add_channel_bias: bias " + shape_string(bias.shape()) + " for input " +
                     shape_string(s));
  }
  Tensor<T> out(s);
  const T* xv = x.value().data();
  const T* bv = bias.value().data();
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t j = 0; j < plane; ++j) out[p * plane + j] = xv[p * plane + j] + bv[p];
  }
  return make_result<T>(std::move(out), {x, bias}, [planes, plane](Node<T>& self) {
    T* dx = self.input_grad(0);
    T* db = self.input_grad(1);
    const T* g = self.grad.data();
    for (std::size_t p = 0; p < planes; ++p) {
      T acc = 0;
      for (std::size_t j = 0; j < plane; ++j) {
        acc += g[p * plane + j];
        if (dx) dx[p * plane + j] += g[p * plane + j];
      }
      if (db) db[p] += acc;
    }
  });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  return unary<T>(
      x, [](T v) { return v > T(0) ? v : T(0); }, [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Var<T> leaky_relu(const Var<T>& x, double slope) {
  const T a = static_cast<T>(slope);
  return unary<T>(
      x, [a](T v) { return v > T(0) ? v : a * v; }, [a](T v, T) { return v > T(0) ? T(1) : a; });
}

template <typename T>
Var<T> tanh(const Var<T>& x) {
  return unary<T>(
      x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same(a.shape(), b.shape(), "add");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] + b.value()[i];
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& self) {
    const T* g = self.grad.data();
    const std::size_t m = self.value.numel();
    for (std::size_t k = 0; k < 2; ++k) {
      if (T* d = self.input_grad(k)) {
        for (std::size_t i = 0; i < m; ++i) d[i] += g[i];
      }
    }
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same(a.shape(), b.shape(), "sub");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] - b.value()[i];
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& self) {
    const T* g = self.grad.data();
    const std::size_t m = self.value.numel();
    if (T* da = self.input_grad(0)) {
      for (std::size_t i = 0; i < m; ++i) da[i] += g[i];
    }
    if (T* db = self.input_grad(1)) {
      for (std::size_t i = 0; i < m; ++i) db[i] -= g[i];
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, double s) {
  const T k = static_cast<T>(s);
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = k * a.value()[i];
  return make_result<T>(std::move(out), {a}, [k](Node<T>& self) {
    if (T* d = self.input_grad(0)) {
      for (std::size_t i = 0; i < self.value.numel(); ++i) d[i] += k * self.grad[i];
    }
  });
}

template <typename T>
Var<T> sum(std::span<const Var<T>> terms) {
  if (terms.empty()) throw ArgumentError("sum of zero terms");
  Tensor<T> out(terms.front().shape());
  for (const auto& t : terms) {
    require_same(t.shape(), out.shape(), "sum");
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += t.value()[i];
  }
  return make_result<T>(std::move(out), std::vector<Var<T>>(terms.begin(), terms.end()),
                        [](Node<T>& self) {
                          for (std::size_t k = 0; k < self.inputs.size(); ++k) {
                            if (T* d = self.input_grad(k)) {
                              for (std::size_t i = 0; i < self.value.numel(); ++i) d[i] += self.grad[i];
                            }
                          }
                        });
}

template <typename T>
Var<T> avg_pool2d(const Var<T>& x, std::size_t factor) {
  require_rank(x.shape(), 4, "avg_pool2d");
  const Shape& s = x.shape();
  const std::size_t planes = s[0] * s[1], h = s[2], w = s[3];
  const std::size_t oh = h / factor, ow = w / factor;
  if (factor == 0 || oh == 0 || ow == 0) throw ShapeError("avg_pool2d: input too small");
  const T inv = T(1) / static_cast<T>(factor * factor);
  Tensor<T> out(Shape{s[0], s[1], oh, ow});
  const T* xv = x.value().data();
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        T acc = 0;
        for (std::size_t a = 0; a < factor; ++a) {
          for (std::size_t b = 0; b < factor; ++b) acc += xv[(p * h + i * factor + a) * w + j * factor + b];
        }
        out[(p * oh + i) * ow + j] = acc * inv;
      }
    }
  }
  return make_result<T>(std::move(out), {x}, [=](Node<T>& self) {
    T* dx = self.input_grad(0);
    if (!dx) return;
    for (std::size_t p = 0; p < planes; ++p) {
      for (std::size_t i = 0; i < oh; ++i) {
        for (std::size_t j = 0; j < ow; ++j) {
          const T g = self.grad[(p * oh + i) * ow + j] * inv;
          for (std::size_t a = 0; a < factor; ++a) {
            for (std::size_t b = 0; b < factor; ++b) dx[(p * h + i * factor + a) * w + j * factor + b] += g;
          }
        }
      }
    }
  });
}

template <typename T>
Var<T> global_avg_pool(const Var<T>& x) {
  require_rank(x.shape(), 4, "global_avg_pool");
  const Shape& s = x.shape();
  const std::size_t planes = s[0] * s[1], plane = s[2] * s[3];
  Tensor<T> out(Shape{s[0], s[1]});
  for (std::size_t p = 0; p < planes; ++p) {
    T acc = 0;
    for (std::size_t j = 0; j < plane; ++j) acc += x.value()[p * plane + j];
    out[p] = acc / static_cast<T>(plane);
  }
  return make_result<T>(std::move(out), {x}, [planes, plane](Node<T>& self) {
    T* dx = self.input_grad(0);
    if (!dx) return;
    for (std::size_t p = 0; p < planes; ++p) {
      const T g = self.grad[p] / static_cast<T>(plane);
      for (std::size_t j = 0; j < plane; ++j) dx[p * plane + j] += g;
    }
  });
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
  require_rank(x.shape(), 2, "linear input");
  require_rank(weight.shape(), 2, "linear weight");
  const std::size_t n = x.shape()[0], in = x.shape()[1], out_f = weight.shape()[0];
  if (weight.shape()[1] != in) {
    throw ShapeError("linear: weight " + shape_string(weight.shape()) + " for input " +
                     shape_string(x.shape()));
  }
  if (bias.defined() && bias.shape() != Shape{out_f}) throw ShapeError("linear: bias shape");
  Tensor<T> out(Shape{n, out_f});
  // Tiny matrices; direct loops beat a BLAS call here.
  const T* xv = x.value().data();
  const T* wv = weight.value().data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t o = 0; o < out_f; ++o) {
      T acc = bias.defined() ? bias.value()[o] : T(0);
      for (std::size_t k = 0; k < in; ++k) acc += xv[i * in + k] * wv[o * in + k];
      out[i * out_f + o] = acc;
    }
  }
  std::vector<Var<T>> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return make_result<T>(std::move(out), std::move(inputs), [n, in, out_f](Node<T>& self) {
    T* dx = self.input_grad(0);
    T* dw = self.input_grad(1);
    T* db = self.inputs.size() > 2 ? self.input_grad(2) : nullptr;
    const T* xv = self.inputs[0]->value.data();
    const T* wv = self.inputs[1]->value.data();
    const T* g = self.grad.data();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t o = 0; o < out_f; ++o) {
        const T go = g[i * out_f + o];
        if (db) db[o] += go;
        for (std::size_t k = 0; k < in; ++k) {
          if (dx) dx[i * in + k] += go * wv[o * in + k];
          if (dw) dw[o * in + k] += go * xv[i * in + k];
        }
      }
    }
  });
}

template <typename T>
Var<T> concat_columns(const Var<T>& a, const Var<T>& b) {
  require_rank(a.shape(), 2, "concat_columns");
  require_rank(b.shape(), 2, "concat_columns");
  if (a.shape()[0] != b.shape()[0]) throw ShapeError("concat_columns: row count mismatch");
  const std::size_t n = a.shape()[0], ma = a.shape()[1], mb = b.shape()[1];
  Tensor<T> out(Shape{n, ma + mb});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < ma; ++k) out[i * (ma + mb) + k] = a.value()[i * ma + k];
    for (std::size_t k = 0; k < mb; ++k) out[i * (ma + mb) + ma + k] = b.value()[i * mb + k];
  }
  return make_result<T>(std::move(out), {a, b}, [n, ma, mb](Node<T>& self) {
    T* da = self.input_grad(0);
    T* db = self.input_grad(1);
    for (std::size_t i = 0; i < n; ++i) {
      if (da) {
        for (std::size_t k = 0; k < ma; ++k) da[i * ma + k] += self.grad[i * (ma + mb) + k];
      }
      if (db) {
        for (std::size_t k = 0; k < mb; ++k) db[i * mb + k] += self.grad[i * (ma + mb) + ma + k];
      }
    }
  });
}

template <typename T>
Var<T> reparameterize(const Var<T>& mu, const Var<T>& logvar, const Tensor<T>& noise) {
  require_same(mu.shape(), logvar.shape(), "reparameterize");
  require_same(mu.shape(), noise.shape(), "reparameterize noise");
  check_finite(mu.value(), "reparameterize mu");
  check_finite(logvar.value(), "reparameterize logvar");
  Tensor<T> out(mu.shape());
  Tensor<T> stddev(mu.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) {
    stddev[i] = std::exp(T(0.5) * logvar.value()[i]);
    out[i] = mu.value()[i] + stddev[i] * noise[i];
  }
  return make_result<T>(std::move(out), {mu, logvar},
                        [noise, stddev = std::move(stddev)](Node<T>& self) {
                          T* dmu = self.input_grad(0);
                          T* dlv = self.input_grad(1);
                          for (std::size_t i = 0; i < self.value.numel(); ++i) {
                            if (dmu) dmu[i] += self.grad[i];
                            if (dlv) dlv[i] += self.grad[i] * T(0.5) * stddev[i] * noise[i];
                          }
                        });
}

template <typename T>
Var<T> mean(const Var<T>& x) {
  const std::size_t n = x.numel();
  if (n == 0) throw ArgumentError("mean of an empty tensor");
  double acc = 0;
  for (const T v : x.value().values()) acc += v;
  return scalar_result<T>(acc / static_cast<double>(n), {x}, [n](Node<T>& self) {
    if (T* d = self.input_grad(0)) {
      const T g = self.grad[0] / static_cast<T>(n);
      for (std::size_t i = 0; i < n; ++i) d[i] += g;
    }
  });
}

template <typename T>
Var<T> mean_squared_to(const Var<T>& x, double target) {
  const std::size_t n = x.numel();
  if (n == 0) throw ArgumentError("mean_squared_to of an empty tensor");
  double acc = 0;
  for (const T v : x.value().values()) acc += (v - target) * (v - target);
  return scalar_result<T>(acc / static_cast<double>(n), {x}, [n, target](Node<T>& self) {
    if (T* d = self.input_grad(0)) {
      const T k = T(2) * self.grad[0] / static_cast<T>(n);
      const T* xv = self.inputs[0]->value.data();
      for (std::size_t i = 0; i < n; ++i) d[i] += k * (xv[i] - static_cast<T>(target));
    }
  });
}

template <typename T>
Var<T> mean_abs_diff(const Var<T>& a, const Var<T>& b) {
  require_same(a.shape(), b.shape(), "mean_abs_diff");
  const std::size_t n = a.numel();
  if (n == 0) throw ArgumentError("mean_abs_diff of empty tensors");
  double acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += std::abs(a.value()[i] - b.value()[i]);
  return scalar_result<T>(acc / static_cast<double>(n), {a, b}, [n](Node<T>& self) {
    T* da = self.input_grad(0);
    T* db = self.input_grad(1);
    const T k = self.grad[0] / static_cast<T>(n);
    const T* av = self.inputs[0]->value.data();
    const T* bv = self.inputs[1]->value.data();
    for (std::size_t i = 0; i < n; ++i) {
      const T d = av[i] - bv[i];
      const T s = d > T(0) ? k : (d < T(0) ? -k : T(0));
      if (da) da[i] += s;
      if (db) db[i] -= s;
    }
  });
}

template <typename T>
Var<T> kl_to_standard_normal(const Var<T>& mu, const Var<T>& logvar) {
  require_same(mu.shape(), logvar.shape(), "kl_to_standard_normal");
  require_rank(mu.shape(), 2, "kl_to_standard_normal");
  check_finite(mu.value(), "kl mu");
  check_finite(logvar.value(), "kl logvar");
  const std::size_t rows = mu.shape()[0];
  if (rows == 0) throw ArgumentError("kl over an empty batch");
  double acc = 0;
  for (std::size_t i = 0; i < mu.numel(); ++i) {
    const double m = mu.value()[i], lv = logvar.value()[i];
    acc += 0.5 * (m * m + std::exp(lv) - lv - 1.0);
  }
  return scalar_result<T>(acc / static_cast<double>(rows), {mu, logvar}, [rows](Node<T>& self) {
    T* dmu = self.input_grad(0);
    T* dlv = self.input_grad(1);
    const T k = self.grad[0] / static_cast<T>(rows);
    const T* mv = self.inputs[0]->value.data();
    const T* lv = self.inputs[1]->value.data();
    for (std::size_t i = 0; i < self.inputs[0]->value.numel(); ++i) {
      if (dmu) dmu[i] += k * mv[i];
      if (dlv) dlv[i] += k * T(0.5) * (std::exp(lv[i]) - T(1));
    }
  });
}

template <typename T>
Var<T> softmax_cross_entropy(const Var<T>& logits, std::span<const std::size_t> labels) {
  require_rank(logits.shape(), 2, "softmax_cross_entropy");
  const std::size_t rows = logits.shape()[0], k = logits.shape()[1];
  if (labels.size() != rows) throw ShapeError("softmax_cross_entropy: label count mismatch");
  Tensor<T> probs(logits.shape());
  double loss = 0;
  for (std::size_t i = 0; i < rows; ++i) {
    if (labels[i] >= k) throw ArgumentError("softmax_cross_entropy: label out of range");
    const T* row = logits.value().data() + i * k;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) mx = std::max(mx, static_cast<double>(row[j]));
    double z = 0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(row[j] - mx);
    for (std::size_t j = 0; j < k; ++j) probs[i * k + j] = static_cast<T>(std::exp(row[j] - mx) / z);
    loss += -(row[labels[i]] - mx - std::log(z));
  }
  std::vector<std::size_t> owned(labels.begin(), labels.end());
  return scalar_result<T>(loss / static_cast<double>(rows), {logits},
                          [probs = std::move(probs), owned = std::move(owned), rows, k](Node<T>& self) {
                            T* d = self.input_grad(0);
                            if (!d) return;
                            const T g = self.grad[0] / static_cast<T>(rows);
                            for (std::size_t i = 0; i < rows; ++i) {
                              for (std::size_t j = 0; j < k; ++j) {
                                d[i * k + j] += g * (probs[i * k + j] - (j == owned[i] ? T(1) : T(0)));
                              }
                            }
                          });
}

#define SINGLEGAN_INSTANTIATE(T)                                                                  \
  template void check_finite<T>(const Tensor<T>&, const char*);                                  \
  template Var<T> conv2d<T>(const Var<T>&, const Var<T>&, const Var<T>&, std::size_t, std::size_t); \
  template Var<T> conv_transpose2d<T>(const Var<T>&, const Var<T>&, const Var<T>&, std::size_t,   \
                                      std::size_t, std::size_t);                                 \
  template Var<T> reflection_pad2d<T>(const Var<T>&, std::size_t);                               \
  template Var<T> instance_normalize<T>(const Var<T>&, double);                                  \
  template Var<T> channel_affine<T>(const Var<T>&, const Var<T>&, const Var<T>&);                \
  template Var<T> add_channel_bias<T>(const Var<T>&, const Var<T>&);                             \
  template Var<T> relu<T>(const Var<T>&);                                                        \
  template Var<T> leaky_relu<T>(const Var<T>&, double);                                          \
  template Var<T> tanh<T>(const Var<T>&);                                                        \
  template Var<T> add<T>(const Var<T>&, const Var<T>&);                                          \
  template Var<T> sub<T>(const Var<T>&, const Var<T>&);                                          \
  template Var<T> scale<T>(const Var<T>&, double);                                               \
  template Var<T> sum<T>(std::span<const Var<T>>);                                               \
  template Var<T> avg_pool2d<T>(const Var<T>&, std::size_t);                                     \
  template Var<T> global_avg_pool<T>(const Var<T>&);                                             \
  template Var<T> linear<T>(const Var<T>&, const Var<T>&, const Var<T>&);                        \
  template Var<T> concat_columns<T>(const Var<T>&, const Var<T>&);                               \
  template Var<T> reparameterize<T>(const Var<T>&, const Var<T>&, const Tensor<T>&);             \
  template Var<T> mean<T>(const Var<T>&);                                                        \
  template Var<T> mean_squared_to<T>(const Var<T>&, double);                                     \
  template Var<T> mean_abs_diff<T>(const Var<T>&, const Var<T>&);                                \
  template Var<T> kl_to_standard_normal<T>(const Var<T>&, const Var<T>&);                        \
  template Var<T> softmax_cross_entropy<T>(const Var<T>&, std::span<const std::size_t>);

SINGLEGAN_INSTANTIATE(float)
SINGLEGAN_INSTANTIATE(double)

}  // namespace singlegan::ops
