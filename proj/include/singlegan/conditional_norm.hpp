#pragma once

// Domain/latent condition codes and the two normalization layers used by the
// networks: plain instance normalization and central biasing instance
// normalization (CBIN),
//
//   CBIN(x)_i = (x_i - E[x_i]) / sqrt(Var[x_i] + eps) + tanh(W_i . code + b_i)
//
// where statistics are per sample and per channel over the spatial extent.
// The normalized part carries no scale; the condition only shifts channels.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "singlegan/autograd.hpp"

namespace singlegan {

inline constexpr double kNormEps = 1e-5;

// One-hot vector selecting a target domain.
class DomainCode {
 public:
  // Throws ArgumentError unless `values` is one-hot.
  explicit DomainCode(std::vector<float> values);

  std::size_t size() const { return values_.size(); }
  std::size_t index() const { return index_; }
  const std::vector<float>& values() const { return values_; }

  friend bool operator==(const DomainCode&, const DomainCode&) = default;

 private:
  std::vector<float> values_;
  std::size_t index_ = 0;
};

// Continuous appearance code, drawn from N(0, I) during training.
class LatentCode {
 public:
  explicit LatentCode(std::vector<float> values);
  std::size_t size() const { return values_.size(); }
  const std::vector<float>& values() const { return values_; }

 private:
  std::vector<float> values_;
};

// DomainCode ++ LatentCode (latent part optional).
class ConditionCode {
 public:
  explicit ConditionCode(DomainCode domain, std::optional<LatentCode> latent = std::nullopt);

  const DomainCode& domain() const { return domain_; }
  const std::optional<LatentCode>& latent() const { return latent_; }
  std::size_t size() const { return values_.size(); }
  const std::vector<float>& values() const { return values_; }

 private:
  DomainCode domain_;
  std::optional<LatentCode> latent_;
  std::vector<float> values_;
};

DomainCode one_hot_encode(std::size_t index, std::size_t n_domains);

// Stacks codes into a [batch, code_dim] tensor.
template <typename T>
Tensor<T> code_batch(std::span<const ConditionCode> codes);
// The same code repeated `batch` times.
template <typename T>
Tensor<T> code_batch(const ConditionCode& code, std::size_t batch);

// Per-layer map from the condition code to per-channel biases.
template <typename T>
struct CBINParams {
  Tensor<T> weight;  // [channels, code_dim]
  Tensor<T> bias;    // [channels]

  // Zero-initialized, so CBIN starts out as plain instance normalization.
  static CBINParams zeros(std::size_t channels, std::size_t code_dim) {
    return {Tensor<T>(Shape{channels, code_dim}), Tensor<T>(Shape{channels})};
  }
};

namespace norm {

// Differentiable CBIN. x [B,C,H,W], code [B,K], weight [C,K], bias [C].
template <typename T>
Var<T> cbin(const Var<T>& x, const Var<T>& code, const Var<T>& weight, const Var<T>& bias,
            double eps = kNormEps);

// tanh(code . weight^T + bias) -> [B,C]
template <typename T>
Var<T> cbin_channel_bias(const Var<T>& code, const Var<T>& weight, const Var<T>& bias);

// Differentiable instance norm with per-channel gamma/beta.
template <typename T>
Var<T> instance_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                     double eps = kNormEps);

}  // namespace norm

// Pure forward evaluations (no graph is built).
template <typename T>
Tensor<T> cbin_forward(const Tensor<T>& features, const Tensor<T>& code, const CBINParams<T>& params,
                       double eps = kNormEps);

template <typename T>
Tensor<T> instance_norm_forward(const Tensor<T>& features, const Tensor<T>& gamma,
                                const Tensor<T>& beta, double eps = kNormEps);

}  // namespace singlegan
