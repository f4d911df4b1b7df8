#include <cblas.h>

#include <cmath>
#include <vector>

#include "singlegan/kernels.hpp"

namespace singlegan::kernels::parallel {

namespace {

// Geometry of one im2col matrix: rows are (channel, kh, kw), columns are
// output positions. `image_*` describe the padded-source image, `col_*` the
// grid of kernel placements.
struct ColLayout {
  std::size_t channels, image_h, image_w, kernel, stride, pad, col_h, col_w;
};

template <typename T>
void im2col(const ColLayout& l, const T* image, T* col) {
  const long rows = static_cast<long>(l.channels * l.kernel * l.kernel);
#pragma omp parallel for schedule(static)
  for (long r = 0; r < rows; ++r) {
    const std::size_t kw = r % l.kernel;
    const std::size_t kh = (r / l.kernel) % l.kernel;
    const std::size_t c = r / (l.kernel * l.kernel);
    const T* plane = image + c * l.image_h * l.image_w;
    T* out = col + r * l.col_h * l.col_w;
    for (std::size_t oh = 0; oh < l.col_h; ++oh) {
      const long ih = static_cast<long>(oh * l.stride + kh) - static_cast<long>(l.pad);
      T* row = out + oh * l.col_w;
      if (ih < 0 || ih >= static_cast<long>(l.image_h)) {
        for (std::size_t ow = 0; ow < l.col_w; ++ow) row[ow] = T(0);
        continue;
      }
      const T* src = plane + ih * l.image_w;
      for (std::size_t ow = 0; ow < l.col_w; ++ow) {
        const long iw = static_cast<long>(ow * l.stride + kw) - static_cast<long>(l.pad);
        row[ow] = (iw < 0 || iw >= static_cast<long>(l.image_w)) ? T(0) : src[iw];
      }
    }
  }
}

// Scatter-add a column matrix back into an image. Parallel over channels so
// each thread owns whole planes and the summation order is fixed.
template <typename T>
void col2im(const ColLayout& l, const T* col, T* image) {
  const long channels = static_cast<long>(l.channels);
#pragma omp parallel for schedule(static)
  for (long c = 0; c < channels; ++c) {
    T* plane = image + c * l.image_h * l.image_w;
    for (std::size_t kh = 0; kh < l.kernel; ++kh) {
      for (std::size_t kw = 0; kw < l.kernel; ++kw) {
        const T* in = col + ((c * l.kernel + kh) * l.kernel + kw) * l.col_h * l.col_w;
        for (std::size_t oh = 0; oh < l.col_h; ++oh) {
          const long ih = static_cast<long>(oh * l.stride + kh) - static_cast<long>(l.pad);
          if (ih < 0 || ih >= static_cast<long>(l.image_h)) continue;
          T* dst = plane + ih * l.image_w;
          const T* row = in + oh * l.col_w;
          for (std::size_t ow = 0; ow < l.col_w; ++ow) {
            const long iw = static_cast<long>(ow * l.stride + kw) - static_cast<long>(l.pad);
            if (iw >= 0 && iw < static_cast<long>(l.image_w)) dst[iw] += row[ow];
          }
        }
      }
    }
  }
}

template <typename T>
void add_channel_bias(std::size_t channels, std::size_t plane, const T* bias, T* y) {
  const long cs = static_cast<long>(channels);
#pragma omp parallel for schedule(static)
  for (long c = 0; c < cs; ++c) {
    T* p = y + c * plane;
    for (std::size_t i = 0; i < plane; ++i) p[i] += bias[c];
  }
}

template <typename T>
void accumulate_channel_sums(std::size_t channels, std::size_t plane, const T* dy, T* dbias) {
  for (std::size_t c = 0; c < channels; ++c) {
    const T* p = dy + c * plane;
    T acc = 0;
    for (std::size_t i = 0; i < plane; ++i) acc += p[i];
    dbias[c] += acc;
  }
}

bool is_pointwise(const ConvGeometry& g) {
  return g.kernel == 1 && g.stride == 1 && g.pad == 0;
}

}  // namespace

template <>
void gemm<float>(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
                 float alpha, const float* a, const float* b, float beta, float* c) {
  cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans, trans_b ? CblasTrans : CblasNoTrans,
              static_cast<int>(m), static_cast<int>(n), static_cast<int>(k), alpha, a,
              static_cast<int>(trans_a ? m : k), b, static_cast<int>(trans_b ? k : n), beta, c,
              static_cast<int>(n));
}

template <>
void gemm<double>(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
                  double alpha, const double* a, const double* b, double beta, double* c) {
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans, trans_b ? CblasTrans : CblasNoTrans,
              static_cast<int>(m), static_cast<int>(n), static_cast<int>(k), alpha, a,
              static_cast<int>(trans_a ? m : k), b, static_cast<int>(trans_b ? k : n), beta, c,
              static_cast<int>(n));
}

template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* x, const T* w, const T* bias, T* y) {
  const ColLayout l{g.in_channels, g.in_height, g.in_width, g.kernel,
                    g.stride,      g.pad,       g.out_height(), g.out_width()};
  const std::size_t rows = g.in_channels * g.kernel * g.kernel;
  const std::size_t cols = l.col_h * l.col_w;
  const std::size_t in_plane = g.in_channels * g.in_height * g.in_width;
  const std::size_t out_plane = g.out_channels * cols;
  std::vector<T> col(is_pointwise(g) ? 0 : rows * cols);
  for (std::size_t n = 0; n < g.batch; ++n) {
    const T* src = x + n * in_plane;
    if (!is_pointwise(g)) {
      im2col(l, src, col.data());
      src = col.data();
    }
    gemm<T>(false, false, g.out_channels, cols, rows, T(1), w, src, T(0), y + n * out_plane);
    if (bias) add_channel_bias(g.out_channels, cols, bias, y + n * out_plane);
  }
}

template <typename T>
void conv2d_backward(const ConvGeometry& g, const T* x, const T* w, const T* dy, T* dx, T* dw,
                     T* dbias) {
  const ColLayout l{g.in_channels, g.in_height, g.in_width, g.kernel,
                    g.stride,      g.pad,       g.out_height(), g.out_width()};
  const std::size_t rows = g.in_channels * g.kernel * g.kernel;
  const std::size_t cols = l.col_h * l.col_w;
  const std::size_t in_plane = g.in_channels * g.in_height * g.in_width;
  const std::size_t out_plane = g.out_channels * cols;
  std::vector<T> col(rows * cols);
  for (std::size_t n = 0; n < g.batch; ++n) {
    const T* grad = dy + n * out_plane;
    if (dbias) accumulate_channel_sums(g.out_channels, cols, grad, dbias);
    if (dw) {
      const T* src = x + n * in_plane;
      if (!is_pointwise(g)) {
        im2col(l, src, col.data());
        src = col.data();
      }
      gemm<T>(false, true, g.out_channels, rows, cols, T(1), grad, src, T(1), dw);
    }
    if (dx) {
      if (is_pointwise(g)) {
        gemm<T>(true, false, rows, cols, g.out_channels, T(1), w, grad, T(1), dx + n * in_plane);
      } else {
        gemm<T>(true, false, rows, cols, g.out_channels, T(1), w, grad, T(0), col.data());
        col2im(l, col.data(), dx + n * in_plane);
      }
    }
  }
}

template <typename T>
void conv_transpose2d_forward(const TransposedConvGeometry& g, const T* x, const T* w,
                              const T* bias, T* y) {
  const ColLayout l{g.out_channels, g.out_height(), g.out_width(), g.kernel,
                    g.stride,       g.pad,          g.in_height,  g.in_width};
  const std::size_t rows = g.out_channels * g.kernel * g.kernel;
  const std::size_t cols = g.in_height * g.in_width;
  const std::size_t in_plane = g.in_channels * cols;
  const std::size_t out_spatial = l.image_h * l.image_w;
  const std::size_t out_plane = g.out_channels * out_spatial;
  std::vector<T> col(rows * cols);
  for (std::size_t n = 0; n < g.batch; ++n) {
    T* out = y + n * out_plane;
    for (std::size_t i = 0; i < out_plane; ++i) out[i] = T(0);
    gemm<T>(true, false, rows, cols, g.in_channels, T(1), w, x + n * in_plane, T(0), col.data());
    col2im(l, col.data(), out);
    if (bias) add_channel_bias(g.out_channels, out_spatial, bias, out);
  }
}

template <typename T>
void conv_transpose2d_backward(const TransposedConvGeometry& g, const T* x, const T* w,
                               const T* dy, T* dx, T* dw, T* dbias) {
  const ColLayout l{g.out_channels, g.out_height(), g.out_width(), g.kernel,
                    g.stride,       g.pad,          g.in_height,  g.in_width};
  const std::size_t rows = g.out_channels * g.kernel * g.kernel;
  const std::size_t cols = g.in_height * g.in_width;
  const std::size_t in_plane = g.in_channels * cols;
  const std::size_t out_spatial = l.image_h * l.image_w;
  const std::size_t out_plane = g.out_channels * out_spatial;
  std::vector<T> col(rows * cols);
  for (std::size_t n = 0; n < g.batch; ++n) {
    const T* grad = dy + n * out_plane;
    if (dbias) accumulate_channel_sums(g.out_channels, out_spatial, grad, dbias);
    if (!dx && !dw) continue;
    im2col(l, grad, col.data());
    if (dx) gemm<T>(false, false, g.in_channels, cols, rows, T(1), w, col.data(), T(1), dx + n * in_plane);
    if (dw) gemm<T>(false, true, g.in_channels, rows, cols, T(1), x + n * in_plane, col.data(), T(1), dw);
  }
}

template <typename T>
void instance_norm_forward(std::size_t planes, std::size_t plane_size, const T* x, T eps, T* x_hat,
                           T* inv_std) {
  const long ps = static_cast<long>(planes);
#pragma omp parallel for schedule(static)
  for (long p = 0; p < ps; ++p) {
    const T* in = x + p * plane_size;
    T* out = x_hat + p * plane_size;
    double sum = 0;
    for (std::size_t i = 0; i < plane_size; ++i) sum += in[i];
    const double mean = sum / static_cast<double>(plane_size);
    double sq = 0;
    for (std::size_t i = 0; i < plane_size; ++i) {
      const double d = in[i] - mean;
      sq += d * d;
    }
    const double s = 1.0 / std::sqrt(sq / static_cast<double>(plane_size) + static_cast<double>(eps));
    inv_std[p] = static_cast<T>(s);
    for (std::size_t i = 0; i < plane_size; ++i) out[i] = static_cast<T>((in[i] - mean) * s);
  }
}

template <typename T>
void instance_norm_backward(std::size_t planes, std::size_t plane_size, const T* x_hat,
                            const T* inv_std, const T* dx_hat, T* dx) {
  const long ps = static_cast<long>(planes);
#pragma omp parallel for schedule(static)
  for (long p = 0; p < ps; ++p) {
    const T* xh = x_hat + p * plane_size;
    const T* g = dx_hat + p * plane_size;
    T* out = dx + p * plane_size;
    double sg = 0, sgx = 0;
    for (std::size_t i = 0; i < plane_size; ++i) {
      sg += g[i];
      sgx += static_cast<double>(g[i]) * xh[i];
    }
    const T mean_g = static_cast<T>(sg / static_cast<double>(plane_size));
    const T mean_gx = static_cast<T>(sgx / static_cast<double>(plane_size));
    const T s = inv_std[p];
    for (std::size_t i = 0; i < plane_size; ++i) out[i] += s * (g[i] - mean_g - xh[i] * mean_gx);
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

}  // namespace singlegan::kernels::parallel
