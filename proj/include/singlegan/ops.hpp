#pragma once

// Differentiable ops on NCHW / [batch, features] Vars. All are templated on
// the scalar type and explicitly instantiated for float and double.

#include <cstddef>
#include <span>
#include <vector>

#include "singlegan/autograd.hpp"

namespace singlegan::ops {

// Throws NumericError naming `what` if any entry is NaN or infinite.
template <typename T>
void check_finite(const Tensor<T>& t, const char* what);

// x [N,C,H,W], weight [O,C,k,k], optional bias [O] (pass an undefined Var to omit).
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, std::size_t stride,
              std::size_t pad);

// x [N,Ci,H,W], weight [Ci,Co,k,k].
template <typename T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias,
                        std::size_t stride, std::size_t pad, std::size_t output_pad);

template <typename T>
Var<T> reflection_pad2d(const Var<T>& x, std::size_t pad);

// Per-sample per-channel spatial standardization, population variance.
template <typename T>
Var<T> instance_normalize(const Var<T>& x, double eps);

// y = gamma[c] * x + beta[c]
template <typename T>
Var<T> channel_affine(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta);

// y[n,c,:,:] = x[n,c,:,:] + bias[n,c]
template <typename T>
Var<T> add_channel_bias(const Var<T>& x, const Var<T>& bias);

template <typename T>
Var<T> relu(const Var<T>& x);
template <typename T>
Var<T> leaky_relu(const Var<T>& x, double slope);
template <typename T>
Var<T> tanh(const Var<T>& x);

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> scale(const Var<T>& a, double s);
// Sum of equally-shaped terms.
template <typename T>
Var<T> sum(std::span<const Var<T>> terms);

// Non-overlapping factor x factor average pooling (floor on odd sizes).
template <typename T>
Var<T> avg_pool2d(const Var<T>& x, std::size_t factor);
// [N,C,H,W] -> [N,C]
template <typename T>
Var<T> global_avg_pool(const Var<T>& x);

// x [N,I], weight [O,I], optional bias [O] -> [N,O]
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias);
// [N,m] ++ [N,n] -> [N,m+n]
template <typename T>
Var<T> concat_columns(const Var<T>& a, const Var<T>& b);

// mu + exp(0.5 * logvar) * noise
template <typename T>
Var<T> reparameterize(const Var<T>& mu, const Var<T>& logvar, const Tensor<T>& noise);

// Scalar reductions.
template <typename T>
Var<T> mean(const Var<T>& x);
// mean((x - target)^2)
template <typename T>
Var<T> mean_squared_to(const Var<T>& x, double target);
// mean |a - b|
template <typename T>
Var<T> mean_abs_diff(const Var<T>& a, const Var<T>& b);
// mean over rows of 0.5 * sum_j (mu^2 + exp(logvar) - logvar - 1)
template <typename T>
Var<T> kl_to_standard_normal(const Var<T>& mu, const Var<T>& logvar);
// mean over rows of -log softmax(logits)[label]
template <typename T>
Var<T> softmax_cross_entropy(const Var<T>& logits, std::span<const std::size_t> labels);

}  // namespace singlegan::ops
