#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "singlegan/parameters.hpp"
#include "singlegan/rng.hpp"

namespace singlegan {

inline constexpr double kInitStddev = 0.02;

struct GeneratorConfig {
  std::size_t in_channels = 3;
  std::size_t base_width = 64;
  std::size_t n_residual_blocks = 6;
  std::size_t n_down = 2;
  std::size_t n_up = 2;
  std::size_t code_dim = 2;
  std::size_t image_size = 128;

  // Throws ConfigError naming the first invalid field.
  void validate() const;
};

struct DiscriminatorConfig {
  std::size_t in_channels = 3;
  std::size_t base_width = 64;
  // Stride-2 4x4 convs per patch stack (widths base, 2*base, 4*base, ...).
  std::size_t n_strided = 3;
  std::size_t n_scales = 2;
  double slope = 0.2;

  void validate() const;
};

struct EncoderConfig {
  std::size_t in_channels = 3;
  std::size_t base_width = 64;
  std::size_t n_down = 4;
  std::size_t max_width = 512;
  std::size_t latent_dim = 8;
  std::size_t code_dim = 2;  // domain code only

  void validate() const;
};

// Indices into a ParameterSet; shared by every scalar type.
namespace layers {
struct Conv {
  std::size_t weight, bias, stride, pad;
  bool reflect;
};
struct TransposedConv {
  std::size_t weight, bias;
};
struct CBIN {
  std::size_t weight, bias;
};
struct InstanceNorm {
  std::size_t gamma, beta;
};
struct Linear {
  std::size_t weight, bias;
};
struct ResidualBlock {
  Conv conv1;
  CBIN norm1;
  Conv conv2;
  CBIN norm2;
};
}  // namespace layers

// Single conditional generator: 7x7 stem, strided downsampling, residual
// blocks, and transposed-conv upsampling. Every normalization before the
// upsampling path is CBIN driven by the same condition code.
template <typename T>
class Generator {
 public:
  static Generator build(const GeneratorConfig& cfg, std::uint64_t seed);

  // x [B,C,S,S] and code [B,code_dim] -> [B,C,S,S] in [-1, 1].
  Var<T> forward(const Var<T>& x, const Var<T>& code) const;
  Tensor<T> operator()(const Tensor<T>& x, const Tensor<T>& code) const;

  const GeneratorConfig& config() const { return cfg_; }
  const ParameterSet<T>& params() const { return params_; }
  ParameterSet<T>& params() { return params_; }

  template <typename U>
  Generator<U> cast() const {
    Generator<U> out;
    out.cfg_ = cfg_;
    out.params_ = params_.template cast<U>();
    out.stem_conv_ = stem_conv_;
    out.stem_norm_ = stem_norm_;
    out.down_ = down_;
    out.res_ = res_;
    out.up_ = up_;
    out.out_conv_ = out_conv_;
    return out;
  }

 private:
  template <typename>
  friend class Generator;

  GeneratorConfig cfg_;
  ParameterSet<T> params_;
  layers::Conv stem_conv_{};
  layers::CBIN stem_norm_{};
  std::vector<std::pair<layers::Conv, layers::CBIN>> down_;
  std::vector<layers::ResidualBlock> res_;
  std::vector<std::pair<layers::TransposedConv, layers::InstanceNorm>> up_;
  layers::Conv out_conv_{};
};

// Group of patch discriminators, one per scale; scale s sees the input
// average-pooled s times by a factor of 2. Outputs are raw (unbounded) maps.
template <typename T>
class MultiScaleDiscriminator {
 public:
  static MultiScaleDiscriminator build(const DiscriminatorConfig& cfg, std::uint64_t seed,
                                       const std::string& name_prefix);

  std::vector<Var<T>> forward(const Var<T>& x) const;

  // Patch map side length per scale for a square input; throws ShapeError
  // if the input does not survive the conv stack.
  std::vector<std::size_t> output_sizes(std::size_t image_size) const;

  const DiscriminatorConfig& config() const { return cfg_; }
  const ParameterSet<T>& params() const { return params_; }
  ParameterSet<T>& params() { return params_; }

 private:
  struct Stage {
    layers::Conv conv;
    bool has_norm;
    layers::InstanceNorm norm;
    bool activation;
  };

  DiscriminatorConfig cfg_;
  ParameterSet<T> params_;
  std::vector<std::vector<Stage>> scales_;
};

template <typename T>
struct LatentDistribution {
  Var<T> mu;      // [B, latent_dim]
  Var<T> logvar;  // [B, latent_dim]
};

// Convolutional encoder conditioned on the domain code through CBIN, with
// two linear heads for the posterior mean and log-variance.
template <typename T>
class LatentEncoder {
 public:
  static LatentEncoder build(const EncoderConfig& cfg, std::uint64_t seed);

  LatentDistribution<T> forward(const Var<T>& x, const Var<T>& domain_code) const;

  const EncoderConfig& config() const { return cfg_; }
  const ParameterSet<T>& params() const { return params_; }
  ParameterSet<T>& params() { return params_; }

 private:
  EncoderConfig cfg_;
  ParameterSet<T> params_;
  std::vector<std::pair<layers::Conv, layers::CBIN>> stages_;
  layers::Linear mu_head_{};
  layers::Linear logvar_head_{};
};

// mu + exp(0.5 * logvar) * n, n ~ N(0, I) drawn from `rng`.
template <typename T>
Var<T> reparameterize(const LatentDistribution<T>& dist, Rng& rng);

// [rows, cols] tensor of independent standard normal draws.
template <typename T>
Tensor<T> gaussian_tensor(Shape shape, Rng& rng);

extern template class Generator<float>;
extern template class Generator<double>;
extern template class MultiScaleDiscriminator<float>;
extern template class MultiScaleDiscriminator<double>;
extern template class LatentEncoder<float>;
extern template class LatentEncoder<double>;

}  // namespace singlegan
