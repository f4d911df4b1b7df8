#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "singlegan/data.hpp"
#include "singlegan/networks.hpp"
#include "singlegan/objectives.hpp"
#include "singlegan/optim.hpp"

namespace singlegan {

enum class RegimeKind { base, one_to_many, many_to_many, multimodal, paired };

std::string to_string(RegimeKind kind);
RegimeKind parse_regime_kind(const std::string& s);

// Architecture sizes. Defaults are the full-size networks; desk-scale runs
// shrink the widths and block counts.
struct NetworkSizes {
  std::size_t generator_base_width = 64;
  std::size_t generator_residual_blocks = 6;
  std::size_t generator_sampling_layers = 2;
  std::size_t discriminator_base_width = 64;
  std::size_t discriminator_strided_layers = 3;
  std::size_t discriminator_scales = 2;
  std::size_t encoder_base_width = 64;
  std::size_t encoder_down_layers = 4;
  std::size_t encoder_max_width = 512;

  friend bool operator==(const NetworkSizes&, const NetworkSizes&) = default;
};

struct RegimeConfig {
  RegimeKind kind = RegimeKind::base;
  std::vector<std::string> domain_names;
  std::string source_domain;  // one_to_many and paired
  std::size_t latent_dim = 8;  // multimodal
  LossWeights weights;
  AdamConfig optimizer;
  std::size_t batch_size = 1;
  std::int64_t total_steps = 0;
  std::uint64_t seed = 0;
  std::size_t image_size = 128;
  NetworkSizes networks;

  // Throws ConfigError naming the offending field.
  void validate() const;

  friend bool operator==(const RegimeConfig&, const RegimeConfig&) = default;

  std::size_t n_domains() const { return domain_names.size(); }
  std::size_t domain_index(const std::string& name) const;
  // Generator condition length: domains (+ latent_dim when multimodal).
  std::size_t code_dim() const;

  GeneratorConfig generator_config() const;
  DiscriminatorConfig discriminator_config() const;
  EncoderConfig encoder_config() const;

  // Domains owning a discriminator, in configured order.
  std::vector<std::string> adversarial_domains() const;
  // (source, target) translations the regime trains, in configured order.
  std::vector<std::pair<std::string, std::string>> translation_pairs() const;
};

// Replaces the generator inside step functions (test seam for identity stubs).
using GeneratorFn = std::function<Var<float>(const Var<float>& x, const Var<float>& code)>;

struct TrainState {
  RegimeConfig config;
  Generator<float> generator;
  std::map<std::string, MultiScaleDiscriminator<float>> discriminators;
  std::optional<LatentEncoder<float>> encoder;
  Adam<float> generator_opt;
  std::optional<Adam<float>> encoder_opt;
  std::map<std::string, Adam<float>> discriminator_opts;
  std::int64_t step = 0;
  Rng rng;
  GeneratorFn generator_override;

  // Fresh networks and optimizers, deterministically seeded from config.seed.
  static TrainState create(const RegimeConfig& config);

  // G(x, code) honoring generator_override.
  Var<float> generate(const Var<float>& x, const Var<float>& code) const;
};

// Inference-mode translation of a [B,3,S,S] batch toward `target`. `latent`
// ([B, latent_dim]) is required for multimodal states and rejected otherwise.
Tensor<float> translate_batch(const TrainState& state, const Tensor<float>& batch, const std::string& target,
                              const Tensor<float>* latent = nullptr);

// Ordered pair (source j, target i), i != j, uniform over the n*(n-1) pairs.
std::pair<std::size_t, std::size_t> sample_ordered_pair(std::size_t n, Rng& rng);

LossReport train_step_base(TrainState& state, const Tensor<float>& batch_a, const Tensor<float>& batch_b);
LossReport train_step_one_to_many(TrainState& state, const std::map<std::string, Tensor<float>>& batches);
LossReport train_step_many_to_many(TrainState& state, const std::map<std::string, Tensor<float>>& batches);
LossReport train_step_multimodal(TrainState& state, const Tensor<float>& batch_a,
                                 const Tensor<float>& batch_b, Rng& rng);
LossReport train_step_paired(TrainState& state, const Tensor<float>& batch_source,
                             const std::map<std::string, Tensor<float>>& targets);

// Dispatches on config.kind; `batches` holds one batch per configured domain.
LossReport train_step(TrainState& state, const std::map<std::string, Tensor<float>>& batches);

// Draws the batches one step of the regime consumes (aligned indices for paired).
std::map<std::string, Tensor<float>> sample_step_batches(const RegimeConfig& config,
                                                         const DatasetMap& datasets, Rng& rng);

// Checks the datasets cover every configured domain at the configured size.
void validate_datasets(const RegimeConfig& config, const DatasetMap& datasets);

struct TrainingSinks {
  std::function<void(const std::string& line)> log;
  std::function<void(const TrainState&)> checkpoint;
  std::int64_t checkpoint_every = 0;
  std::function<void(const TrainState&)> sample;
  std::int64_t sample_every = 0;
};

// Runs steps until state.step == config.total_steps. In deterministic mode
// batches come from state.rng synchronously, so a resumed run reproduces an
// uninterrupted one bit for bit.
void continue_training(TrainState& state, const DatasetMap& datasets, TrainingSinks& sinks,
                       bool deterministic = true);

TrainState run_training(const RegimeConfig& config, const DatasetMap& datasets, TrainingSinks& sinks,
                        bool deterministic = true);

}  // namespace singlegan
