#include <cmath>

#include "singlegan/kernels.hpp"

namespace singlegan::kernels::reference {

template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* x, const T* w, const T* bias, T* y) {
  const std::size_t oh_n = g.out_height(), ow_n = g.out_width();
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t o = 0; o < g.out_channels; ++o) {
      for (std::size_t oh = 0; oh < oh_n; ++oh) {
        for (std::size_t ow = 0; ow < ow_n; ++ow) {
          T acc = bias ? bias[o] : T(0);
          for (std::size_t c = 0; c < g.in_channels; ++c) {
            for (std::size_t kh = 0; kh < g.kernel; ++kh) {
              const long ih = static_cast<long>(oh * g.stride + kh) - static_cast<long>(g.pad);
              if (ih < 0 || ih >= static_cast<long>(g.in_height)) continue;
              for (std::size_t kw = 0; kw < g.kernel; ++kw) {
                const long iw = static_cast<long>(ow * g.stride + kw) - static_cast<long>(g.pad);
                if (iw < 0 || iw >= static_cast<long>(g.in_width)) continue;
                acc += x[((n * g.in_channels + c) * g.in_height + ih) * g.in_width + iw] *
                       w[((o * g.in_channels + c) * g.kernel + kh) * g.kernel + kw];
              }
            }
          }
          y[((n * g.out_channels + o) * oh_n + oh) * ow_n + ow] = acc;
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward(const ConvGeometry& g, const T* x, const T* w, const T* dy, T* dx, T* dw,
                     T* dbias) {
  const std::size_t oh_n = g.out_height(), ow_n = g.out_width();
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t o = 0; o < g.out_channels; ++o) {
      for (std::size_t oh = 0; oh < oh_n; ++oh) {
        for (std::size_t ow = 0; ow < ow_n; ++ow) {
          const T grad = dy[((n * g.out_channels + o) * oh_n + oh) * ow_n + ow];
          if (dbias) dbias[o] += grad;
          for (std::size_t c = 0; c < g.in_channels; ++c) {
            for (std::size_t kh = 0; kh < g.kernel; ++kh) {
              const long ih = static_cast<long>(oh * g.stride + kh) - static_cast<long>(g.pad);
              if (ih < 0 || ih >= static_cast<long>(g.in_height)) continue;
              for (std::size_t kw = 0; kw < g.kernel; ++kw) {
                const long iw = static_cast<long>(ow * g.stride + kw) - static_cast<long>(g.pad);
                if (iw < 0 || iw >= static_cast<long>(g.in_width)) continue;
                const std::size_t xi = ((n * g.in_channels + c) * g.in_height + ih) * g.in_width + iw;
                const std::size_t wi = ((o * g.in_channels + c) * g.kernel + kh) * g.kernel + kw;
                if (dx) dx[xi] += grad * w[wi];
                if (dw) dw[wi] += grad * x[xi];
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
void conv_transpose2d_forward(const TransposedConvGeometry& g, const T* x, const T* w,
                              const T* bias, T* y) {
  const std::size_t oh_n = g.out_height(), ow_n = g.out_width();
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t o = 0; o < g.out_channels; ++o) {
      T* plane = y + (n * g.out_channels + o) * oh_n * ow_n;
      for (std::size_t i = 0; i < oh_n * ow_n; ++i) plane[i] = bias ? bias[o] : T(0);
    }
    for (std::size_t c = 0; c < g.in_channels; ++c) {
      for (std::size_t ih = 0; ih < g.in_height; ++ih) {
        for (std::size_t iw = 0; iw < g.in_width; ++iw) {
          const T v = x[((n * g.in_channels + c) * g.in_height + ih) * g.in_width + iw];
          for (std::size_t o = 0; o < g.out_channels; ++o) {
            for (std::size_t kh = 0; kh < g.kernel; ++kh) {
              const long oh = static_cast<long>(ih * g.stride + kh) - static_cast<long>(g.pad);
              if (oh < 0 || oh >= static_cast<long>(oh_n)) continue;
              for (std::size_t kw = 0; kw < g.kernel; ++kw) {
                const long ow = static_cast<long>(iw * g.stride + kw) - static_cast<long>(g.pad);
                if (ow < 0 || ow >= static_cast<long>(ow_n)) continue;
                y[((n * g.out_channels + o) * oh_n + oh) * ow_n + ow] +=
                    v * w[((c * g.out_channels + o) * g.kernel + kh) * g.kernel + kw];
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
void conv_transpose2d_backward(const TransposedConvGeometry& g, const T* x, const T* w,
                               const T* dy, T* dx, T* dw, T* dbias) {
  const std::size_t oh_n = g.out_height(), ow_n = g.out_width();
  for (std::size_t n = 0; n < g.batch; ++n) {
    if (dbias) {
      for (std::size_t o = 0; o < g.out_channels; ++o) {
        const T* plane = dy + (n * g.out_channels + o) * oh_n * ow_n;
        for (std::size_t i = 0; i < oh_n * ow_n; ++i) dbias[o] += plane[i];
      }
    }
    for (std::size_t c = 0; c < g.in_channels; ++c) {
      for (std::size_t ih = 0; ih < g.in_height; ++ih) {
        for (std::size_t iw = 0; iw < g.in_width; ++iw) {
          const std::size_t xi = ((n * g.in_channels + c) * g.in_height + ih) * g.in_width + iw;
          for (std::size_t o = 0; o < g.out_channels; ++o) {
            for (std::size_t kh = 0; kh < g.kernel; ++kh) {
              const long oh = static_cast<long>(ih * g.stride + kh) - static_cast<long>(g.pad);
              if (oh < 0 || oh >= static_cast<long>(oh_n)) continue;
              for (std::size_t kw = 0; kw < g.kernel; ++kw) {
                const long ow = static_cast<long>(iw * g.stride + kw) - static_cast<long>(g.pad);
                if (ow < 0 || ow >= static_cast<long>(ow_n)) continue;
                const T grad = dy[((n * g.out_channels + o) * oh_n + oh) * ow_n + ow];
                const std::size_t wi = ((c * g.out_channels + o) * g.kernel + kh) * g.kernel + kw;
                if (dx) dx[xi] += grad * w[wi];
                if (dw) dw[wi] += grad * x[xi];
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
void instance_norm_forward(std::size_t planes, std::size_t plane_size, const T* x, T eps, T* x_hat,
                           T* inv_std) {
  for (std::size_t p = 0; p < planes; ++p) {
    const T* in = x + p * plane_size;
    double mean = 0;
    for (std::size_t i = 0; i < plane_size; ++i) mean += in[i];
    mean /= static_cast<double>(plane_size);
    double var = 0;
    for (std::size_t i = 0; i < plane_size; ++i) var += (in[i] - mean) * (in[i] - mean);
    var /= static_cast<double>(plane_size);
    const double s = 1.0 / std::sqrt(var + static_cast<double>(eps));
    inv_std[p] = static_cast<T>(s);
    for (std::size_t i = 0; i < plane_size; ++i) {
      x_hat[p * plane_size + i] = static_cast<T>((in[i] - mean) * s);
    }
  }
}

template <typename T>
void instance_norm_backward(std::size_t planes, std::size_t plane_size, const T* x_hat,
                            const T* inv_std, const T* dx_hat, T* dx) {
  // dx = inv_std * (g - mean(g) - x_hat * mean(g * x_hat))
  for (std::size_t p = 0; p < planes; ++p) {
    const T* xh = x_hat + p * plane_size;
    const T* g = dx_hat + p * plane_size;
    double mean_g = 0, mean_gx = 0;
    for (std::size_t i = 0; i < plane_size; ++i) {
      mean_g += g[i];
      mean_gx += static_cast<double>(g[i]) * xh[i];
    }
    mean_g /= static_cast<double>(plane_size);
    mean_gx /= static_cast<double>(plane_size);
    for (std::size_t i = 0; i < plane_size; ++i) {
      dx[p * plane_size + i] += static_cast<T>(inv_std[p] * (g[i] - mean_g - xh[i] * mean_gx));
    }
  }
}

#define SINGLEGAN_INSTANTIATE(T)                                                                   \
  template void conv2d_forward<T>(const ConvGeometry&, const T*, const T*, const T*, T*);         \
  template void conv2d_backward<T>(const ConvGeometry&, const T*, const T*, const T*, T*, T*, T*); \
  template void conv_transpose2d_forward<T>(const TransposedConvGeometry&, const T*, const T*,    \
                                            const T*, T*);                                        \
  template void conv_transpose2d_backward<T>(const TransposedConvGeometry&, const T*, const T*,   \
                                             const T*, T*, T*, T*);                               \
  template void instance_norm_forward<T>(std::size_t, std::size_t, const T*, T, T*, T*);          \
  template void instance_norm_backward<T>(std::size_t, std::size_t, const T*, const T*, const T*, \
                                          T*);

SINGLEGAN_INSTANTIATE(float)
SINGLEGAN_INSTANTIATE(double)

}  // namespace singlegan::kernels::reference
