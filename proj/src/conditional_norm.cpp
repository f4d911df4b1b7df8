#include "singlegan/conditional_norm.hpp"

#include <cmath>

#include "singlegan/ops.hpp"

namespace singlegan {

DomainCode::DomainCode(std::vector<float> values) : values_(std::move(values)) {
  std::size_t ones = 0;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (values_[i] == 1.0f) {
      ++ones;
      index_ = i;
    } else if (values_[i] != 0.0f) {
      throw ArgumentError("domain code entry " + std::to_string(i) + " is neither 0 nor 1");
    }
  }
  if (ones != 1) throw ArgumentError("domain code must contain exactly one 1.0");
}

LatentCode::LatentCode(std::vector<float> values) : values_(std::move(values)) {
  for (const float v : values_) {
    if (!std::isfinite(v)) throw NumericError("latent code contains a non-finite entry");
  }
}

ConditionCode::ConditionCode(DomainCode domain, std::optional<LatentCode> latent)
    : domain_(std::move(domain)), latent_(std::move(latent)), values_(domain_.values()) {
  if (latent_) values_.insert(values_.end(), latent_->values().begin(), latent_->values().end());
}

DomainCode one_hot_encode(std::size_t index, std::size_t n_domains) {
  if (n_domains == 0) throw ArgumentError("one_hot_encode: n_domains must be positive");
  if (index >= n_domains) {
    throw ArgumentError("one_hot_encode: index " + std::to_string(index) + " out of range for " +
                        std::to_string(n_domains) + " domains");
  }
  std::vector<float> v(n_domains, 0.0f);
  v[index] = 1.0f;
  return DomainCode(std::move(v));
}

template <typename T>
Tensor<T> code_batch(std::span<const ConditionCode> codes) {
  if (codes.empty()) throw ArgumentError("code_batch of zero codes");
  const std::size_t k = codes.front().size();
  Tensor<T> out(Shape{codes.size(), k});
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (codes[i].size() != k) throw ShapeError("code_batch: codes of different lengths");
    for (std::size_t j = 0; j < k; ++j) out[i * k + j] = static_cast<T>(codes[i].values()[j]);
  }
  return out;
}

template <typename T>
Tensor<T> code_batch(const ConditionCode& code, std::size_t batch) {
  const std::size_t k = code.size();
  Tensor<T> out(Shape{batch, k});
  for (std::size_t i = 0; i < batch; ++i) {
    for (std::size_t j = 0; j < k; ++j) out[i * k + j] = static_cast<T>(code.values()[j]);
  }
  return out;
}

namespace norm {

template <typename T>
Var<T> cbin_channel_bias(const Var<T>& code, const Var<T>& weight, const Var<T>& bias) {
  return ops::tanh(ops::linear(code, weight, bias));
}

template <typename T>
Var<T> cbin(const Var<T>& x, const Var<T>& code, const Var<T>& weight, const Var<T>& bias,
            double eps) {
  if (x.shape().size() != 4) throw ShapeError("cbin: features must be [B,C,H,W]");
  if (code.shape().size() != 2 || code.shape()[0] != x.shape()[0]) {
    throw ShapeError("cbin: code " + shape_string(code.shape()) + " for features " +
                     shape_string(x.shape()));
  }
  if (weight.shape() != Shape{x.shape()[1], code.shape()[1]}) {
    throw ShapeError("cbin: weight " + shape_string(weight.shape()) + " expected [" +
                     std::to_string(x.shape()[1]) + "," + std::to_string(code.shape()[1]) + "]");
  }
  if (bias.shape() != Shape{x.shape()[1]}) throw ShapeError("cbin: bias shape");
  ops::check_finite(x.value(), "cbin features");
  ops::check_finite(code.value(), "cbin code");
  return ops::add_channel_bias(ops::instance_normalize(x, eps), cbin_channel_bias(code, weight, bias));
}

template <typename T>
Var<T> instance_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, double eps) {
  return ops::channel_affine(ops::instance_normalize(x, eps), gamma, beta);
}

}  // namespace norm

template <typename T>
Tensor<T> cbin_forward(const Tensor<T>& features, const Tensor<T>& code, const CBINParams<T>& params,
                       double eps) {
  NoGradGuard guard;
  return norm::cbin(Var<T>(features), Var<T>(code), Var<T>(params.weight), Var<T>(params.bias), eps)
      .value();
}

template <typename T>
Tensor<T> instance_norm_forward(const Tensor<T>& features, const Tensor<T>& gamma,
                                const Tensor<T>& beta, double eps) {
  NoGradGuard guard;
  return norm::instance_norm(Var<T>(features), Var<T>(gamma), Var<T>(beta), eps).value();
}

#define SINGLEGAN_INSTANTIATE(T)                                                                 \
  template Tensor<T> code_batch<T>(std::span<const ConditionCode>);                             \
  template Tensor<T> code_batch<T>(const ConditionCode&, std::size_t);                          \
  template Var<T> norm::cbin_channel_bias<T>(const Var<T>&, const Var<T>&, const Var<T>&);      \
  template Var<T> norm::cbin<T>(const Var<T>&, const Var<T>&, const Var<T>&, const Var<T>&,     \
                                double);                                                        \
  template Var<T> norm::instance_norm<T>(const Var<T>&, const Var<T>&, const Var<T>&, double);  \
  template Tensor<T> cbin_forward<T>(const Tensor<T>&, const Tensor<T>&, const CBINParams<T>&,  \
                                     double);                                                   \
  template Tensor<T> instance_norm_forward<T>(const Tensor<T>&, const Tensor<T>&,               \
                                              const Tensor<T>&, double);

SINGLEGAN_INSTANTIATE(float)
SINGLEGAN_INSTANTIATE(double)

}  // namespace singlegan
