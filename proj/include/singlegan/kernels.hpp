#pragma once

// Raw NCHW compute kernels.
//
// Two implementations share every signature:
//   kernels::reference  direct nested loops, single-threaded; the test oracle.
//   kernels::parallel   im2col + GEMM with OpenMP-parallel packing and
//                       per-plane loops; what the autograd ops call.
//
// Backward kernels accumulate (+=) into their output buffers. A null output
// pointer skips that gradient.

#include <cstddef>

namespace singlegan::kernels {

// Square-kernel convolution with zero padding. Weights are [out, in, k, k].
struct ConvGeometry {
  std::size_t batch = 1;
  std::size_t in_channels = 0;
  std::size_t in_height = 0;
  std::size_t in_width = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t pad = 0;

  bool valid() const {
    return kernel > 0 && stride > 0 && in_height + 2 * pad >= kernel && in_width + 2 * pad >= kernel;
  }
  std::size_t out_height() const { return (in_height + 2 * pad - kernel) / stride + 1; }
  std::size_t out_width() const { return (in_width + 2 * pad - kernel) / stride + 1; }
};

// Transposed convolution (gradient of ConvGeometry w.r.t. its input).
// Weights are [in, out, k, k]; output size is (in-1)*stride - 2*pad + k + output_pad.
struct TransposedConvGeometry {
  std::size_t batch = 1;
  std::size_t in_channels = 0;
  std::size_t in_height = 0;
  std::size_t in_width = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t pad = 0;
  std::size_t output_pad = 0;

  bool valid() const {
    return kernel > 0 && stride > 0 && output_pad < stride && in_height > 0 && in_width > 0 &&
           (in_height - 1) * stride + kernel + output_pad > 2 * pad &&
           (in_width - 1) * stride + kernel + output_pad > 2 * pad;
  }
  std::size_t out_height() const { return (in_height - 1) * stride + kernel + output_pad - 2 * pad; }
  std::size_t out_width() const { return (in_width - 1) * stride + kernel + output_pad - 2 * pad; }
};

#define SINGLEGAN_KERNEL_DECLS                                                                    \
  template <typename T>                                                                           \
  void conv2d_forward(const ConvGeometry& g, const T* x, const T* w, const T* bias, T* y);        \
  template <typename T>                                                                           \
  void conv2d_backward(const ConvGeometry& g, const T* x, const T* w, const T* dy, T* dx, T* dw, \
                       T* dbias);                                                                 \
  template <typename T>                                                                           \
  void conv_transpose2d_forward(const TransposedConvGeometry& g, const T* x, const T* w,         \
                                const T* bias, T* y);                                             \
  template <typename T>                                                                           \
  void conv_transpose2d_backward(const TransposedConvGeometry& g, const T* x, const T* w,        \
                                 const T* dy, T* dx, T* dw, T* dbias);                            \
  /* Per-plane standardization with population variance; writes x_hat and 1/sqrt(var+eps). */    \
  template <typename T>                                                                           \
  void instance_norm_forward(std::size_t planes, std::size_t plane_size, const T* x, T eps,      \
                             T* x_hat, T* inv_std);                                               \
  template <typename T>                                                                           \
  void instance_norm_backward(std::size_t planes, std::size_t plane_size, const T* x_hat,        \
                              const T* inv_std, const T* dx_hat, T* dx);

namespace reference {
SINGLEGAN_KERNEL_DECLS
}  // namespace reference

namespace parallel {
SINGLEGAN_KERNEL_DECLS

// Row-major C = alpha * op(A) * op(B) + beta * C.
template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, T alpha,
          const T* a, const T* b, T beta, T* c);
}  // namespace parallel

#undef SINGLEGAN_KERNEL_DECLS

}  // namespace singlegan::kernels
