#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "singlegan/optim.hpp"
#include "singlegan/parameters.hpp"
#include "singlegan/rng.hpp"

namespace singlegan {

// Maps an image batch [B,3,S,S] to an ordered list of per-stage feature
// tensors, each with leading batch axis. Must be deterministic.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual std::string id() const = 0;
  virtual std::size_t n_stages() const = 0;
  virtual std::vector<Tensor<float>> extract(const Tensor<float>& batch) const = 0;
};

// Fixed-seed random CNN: five 3x3 conv + ReLU stages, each followed by a 2x2
// average pool. Stage features are the conv activations before pooling.
class RandomConvExtractor final : public FeatureExtractor {
 public:
  static constexpr std::size_t kStages = 5;

  explicit RandomConvExtractor(std::uint64_t seed = 0, std::size_t base_width = 8);

  std::string id() const override;
  std::size_t n_stages() const override { return kStages; }
  std::vector<Tensor<float>> extract(const Tensor<float>& batch) const override;

 private:
  std::uint64_t seed_;
  std::size_t base_width_;
  ParameterSet<float> params_;
};

struct ConsistencyReport {
  double total = 0.0;              // mean over pairs of the summed stage cosines
  std::size_t n_pairs = 0;
  std::vector<double> per_layer;   // mean cosine per stage
  std::size_t zero_norm_pairs = 0; // stage comparisons where a norm fell below 1e-12
  std::uint64_t seed = 0;
  std::string extractor_id;

  std::string to_text() const;
};

struct ConsistencyOptions {
  // Pair real[k] with gen[k] (sets must be the same size), k uniform.
  bool identical_pairing = false;
};

// Cosine similarity in double; 0 when either norm is below 1e-12.
double cosine_similarity(std::span<const float> a, std::span<const float> b);

// Samples n_pairs (real, generated) pairs uniformly with replacement and
// averages the stage-summed cosine similarity of flattened features.
// Throws ArgumentError on empty sets or when the extractor has != 5 stages.
ConsistencyReport domain_consistency(std::span<const Tensor<float>> real_set,
                                     std::span<const Tensor<float>> gen_set,
                                     const FeatureExtractor& extractor, std::size_t n_pairs, Rng& rng,
                                     const ConsistencyOptions& options = {});

struct ClassifierTrainConfig {
  std::size_t steps = 500;
  std::size_t batch_size = 8;  // per class
  std::size_t base_width = 8;
  AdamConfig optimizer{0.002, 0.9, 0.999, 1e-8};
};

// Four stride-2 conv blocks with leaky ReLU, global average pool, linear head.
class DomainClassifier {
 public:
  static DomainClassifier build(std::size_t n_classes, std::size_t base_width, std::uint64_t seed);

  Var<float> forward(const Var<float>& batch) const;
  Tensor<float> logits(const Tensor<float>& batch) const;
  std::vector<std::size_t> predict(const Tensor<float>& batch) const;

  std::size_t n_classes() const { return n_classes_; }
  ParameterSet<float>& params() { return params_; }
  const ParameterSet<float>& params() const { return params_; }

 private:
  std::size_t n_classes_ = 0;
  ParameterSet<float> params_;
};

// Label k is the k-th set. Throws ConfigError when fewer than two non-empty
// classes are supplied.
DomainClassifier train_domain_classifier(std::span<const std::vector<Tensor<float>>> classes,
                                         const ClassifierTrainConfig& cfg, Rng& rng);
DomainClassifier train_domain_classifier(std::span<const Tensor<float>> real_a,
                                         std::span<const Tensor<float>> real_b,
                                         const ClassifierTrainConfig& cfg, Rng& rng);

// Fraction of images whose argmax logit equals expected_label.
double classification_accuracy(const DomainClassifier& classifier, std::span<const Tensor<float>> images,
                               std::size_t expected_label);

}  // namespace singlegan
