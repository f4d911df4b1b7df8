#include "singlegan/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "singlegan/errors.hpp"
#include "singlegan/ops.hpp"

namespace singlegan {

namespace {

Tensor<float> he_normal(Shape shape, std::size_t fan_in, Rng& rng) {
  Tensor<float> t(std::move(shape));
  const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (auto& v : t.values()) v = static_cast<float>(sd * gaussian(rng));
  return t;
}

std::size_t stage_width(std::size_t base, std::size_t k) { return base * (std::size_t{1} << std::min<std::size_t>(k, 3)); }

// Per-image flattened features: features[stage][image] -> vector.
using FeatureTable = std::vector<std::vector<std::vector<float>>>;

FeatureTable extract_all(const FeatureExtractor& fx, std::span<const Tensor<float>> images) {
  constexpr std::size_t kChunk = 16;
  FeatureTable table(fx.n_stages(), std::vector<std::vector<float>>(images.size()));
  for (std::size_t start = 0; start < images.size(); start += kChunk) {
    const std::size_t end = std::min(images.size(), start + kChunk);
    const auto batch = stack<float>(images.subspan(start, end - start));
    const auto stages = fx.extract(batch);
    if (stages.size() != fx.n_stages()) throw ShapeError("extractor returned the wrong number of stages");
    for (std::size_t s = 0; s < stages.size(); ++s) {
      const std::size_t per = stages[s].numel() / (end - start);
      for (std::size_t i = start; i < end; ++i) {
        const float* p = stages[s].data() + (i - start) * per;
        table[s][i].assign(p, p + per);
      }
    }
  }
  return table;
}

bool near_zero(const std::vector<float>& v) {
  double n = 0;
  for (const float x : v) n += static_cast<double>(x) * x;
  return std::sqrt(n) < 1e-12;
}

std::size_t argmax_row(const float* row, std::size_t n) {
  return static_cast<std::size_t>(std::max_element(row, row + n) - row);
}

}  // namespace

RandomConvExtractor::RandomConvExtractor(std::uint64_t seed, std::size_t base_width)
    : seed_(seed), base_width_(base_width) {
  if (base_width == 0) throw ArgumentError("extractor base_width must be positive");
  Rng rng(seed);
  std::size_t in = 3;
  for (std::size_t k = 0; k < kStages; ++k) {
    const std::size_t out = stage_width(base_width, k);
    params_.add("stage" + std::to_string(k) + ".weight", he_normal(Shape{out, in, 3, 3}, in * 9, rng));
    params_.add("stage" + std::to_string(k) + ".bias", Tensor<float>(Shape{out}));
    in = out;
  }
  params_.set_requires_grad(false);
}

std::string RandomConvExtractor::id() const {
  return "random_conv5(seed=" + std::to_string(seed_) + ",width=" + std::to_string(base_width_) + ")";
}

std::vector<Tensor<float>> RandomConvExtractor::extract(const Tensor<float>& batch) const {
  if (batch.rank() != 4 || batch.dim(1) != 3) {
    throw ShapeError("extractor input must be [B,3,H,W], got " + shape_string(batch.shape()));
  }
  if (std::min(batch.dim(2), batch.dim(3)) < 16) throw ShapeError("extractor input must be at least 16x16");
  NoGradGuard guard;
  std::vector<Tensor<float>> out;
  Var<float> h(batch);
  for (std::size_t k = 0; k < kStages; ++k) {
    if (k > 0) h = ops::avg_pool2d(h, 2);
    h = ops::relu(ops::conv2d(h, params_[2 * k], params_[2 * k + 1], 1, 1));
    out.push_back(h.value());
  }
  return out;
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw ShapeError("cosine_similarity: length mismatch");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  na = std::sqrt(na);
  nb = std::sqrt(nb);
  if (na < 1e-12 || nb < 1e-12) return 0.0;
  return dot / (na * nb);
}

ConsistencyReport domain_consistency(std::span<const Tensor<float>> real_set,
                                     std::span<const Tensor<float>> gen_set,
                                     const FeatureExtractor& extractor, std::size_t n_pairs, Rng& rng,
                                     const ConsistencyOptions& options) {
  if (real_set.empty() || gen_set.empty()) throw ArgumentError("domain_consistency needs non-empty sets");
  if (n_pairs == 0) throw ArgumentError("domain_consistency needs n_pairs > 0");
  if (extractor.n_stages() != RandomConvExtractor::kStages) {
    throw ArgumentError("domain_consistency needs a 5-stage extractor, got " +
                        std::to_string(extractor.n_stages()));
  }
  if (options.identical_pairing && real_set.size() != gen_set.size()) {
    throw ArgumentError("identical pairing needs sets of equal size");
  }
  const std::size_t stages = extractor.n_stages();

  std::vector<std::pair<std::size_t, std::size_t>> pairs(n_pairs);
  for (auto& [r, g] : pairs) {
    r = uniform_index(rng, real_set.size());
    g = options.identical_pairing ? r : uniform_index(rng, gen_set.size());
  }

  const FeatureTable real_f = extract_all(extractor, real_set);
  const FeatureTable gen_f = extract_all(extractor, gen_set);

  for (std::size_t s = 0; s < stages; ++s) {
    if (real_f[s][0].size() != gen_f[s][0].size()) {
      throw ShapeError("stage " + std::to_string(s) + " feature sizes differ between the sets");
    }
  }

  // Per-pair, per-stage cosines, filled in parallel and reduced serially so
  // the result does not depend on the thread count.
  std::vector<double> cos(n_pairs * stages);
  std::vector<unsigned char> degenerate(n_pairs * stages);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(n_pairs); ++p) {
    const auto [r, g] = pairs[static_cast<std::size_t>(p)];
    for (std::size_t s = 0; s < stages; ++s) {
      const auto& a = real_f[s][r];
      const auto& b = gen_f[s][g];
      const std::size_t k = static_cast<std::size_t>(p) * stages + s;
      cos[k] = cosine_similarity(a, b);
      degenerate[k] = near_zero(a) || near_zero(b);
    }
  }

  ConsistencyReport report;
  report.n_pairs = n_pairs;
  report.extractor_id = extractor.id();
  report.per_layer.assign(stages, 0.0);
  for (std::size_t p = 0; p < n_pairs; ++p) {
    for (std::size_t s = 0; s < stages; ++s) {
      report.per_layer[s] += cos[p * stages + s];
      report.zero_norm_pairs += degenerate[p * stages + s];
    }
  }
  for (auto& v : report.per_layer) {
    v /= static_cast<double>(n_pairs);
    report.total += v;
  }
  return report;
}

std::string ConsistencyReport::to_text() const {
  std::ostringstream out;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", total);
  out << "metric=consistency value=" << buf << " n_pairs=" << n_pairs << " seed=" << seed
      << " extractor=" << extractor_id;
  for (std::size_t s = 0; s < per_layer.size(); ++s) {
    std::snprintf(buf, sizeof buf, "%.9g", per_layer[s]);
    out << " layer" << s << "=" << buf;
  }
  if (zero_norm_pairs > 0) out << " zero_norm=" << zero_norm_pairs;
  return out.str();
}

DomainClassifier DomainClassifier::build(std::size_t n_classes, std::size_t base_width, std::uint64_t seed) {
  if (n_classes < 2) throw ConfigError("classifier needs at least 2 classes");
  if (base_width == 0) throw ConfigError("classifier base_width must be positive");
  DomainClassifier c;
  c.n_classes_ = n_classes;
  Rng rng(seed);
  std::size_t in = 3;
  for (std::size_t k = 0; k < 4; ++k) {
    const std::size_t out = stage_width(base_width, k);
    c.params_.add("C.block" + std::to_string(k) + ".weight", he_normal(Shape{out, in, 3, 3}, in * 9, rng));
    c.params_.add("C.block" + std::to_string(k) + ".bias", Tensor<float>(Shape{out}));
    in = out;
  }
  c.params_.add("C.head.weight", he_normal(Shape{n_classes, in}, in, rng));
  c.params_.add("C.head.bias", Tensor<float>(Shape{n_classes}));
  return c;
}

Var<float> DomainClassifier::forward(const Var<float>& batch) const {
  Var<float> h = batch;
  for (std::size_t k = 0; k < 4; ++k) {
    h = ops::leaky_relu(ops::conv2d(h, params_[2 * k], params_[2 * k + 1], 2, 1), 0.2);
  }
  return ops::linear(ops::global_avg_pool(h), params_[8], params_[9]);
}

Tensor<float> DomainClassifier::logits(const Tensor<float>& batch) const {
  NoGradGuard guard;
  return forward(Var<float>(batch)).value();
}

std::vector<std::size_t> DomainClassifier::predict(const Tensor<float>& batch) const {
  const auto l = logits(batch);
  std::vector<std::size_t> out(l.dim(0));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = argmax_row(l.data() + i * n_classes_, n_classes_);
  return out;
}

DomainClassifier train_domain_classifier(std::span<const std::vector<Tensor<float>>> classes,
                                         const ClassifierTrainConfig& cfg, Rng& rng) {
  if (classes.size() < 2) throw ConfigError("classifier training needs at least 2 classes");
  for (std::size_t k = 0; k < classes.size(); ++k) {
    if (classes[k].empty()) {
      throw ConfigError("classifier training class " + std::to_string(k) + " has no images");
    }
  }
  if (cfg.batch_size == 0) throw ConfigError("classifier batch_size must be positive");
  auto clf = DomainClassifier::build(classes.size(), cfg.base_width, rng());
  Adam<float> opt(cfg.optimizer, clf.params());
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    std::vector<Tensor<float>> images;
    std::vector<std::size_t> labels;
    for (std::size_t k = 0; k < classes.size(); ++k) {
      for (std::size_t b = 0; b < cfg.batch_size; ++b) {
        images.push_back(classes[k][uniform_index(rng, classes[k].size())]);
        labels.push_back(k);
      }
    }
    clf.params().zero_grad();
    auto loss = ops::softmax_cross_entropy(clf.forward(Var<float>(stack<float>(images))), labels);
    if (!std::isfinite(loss.item())) throw NumericError("classifier loss became non-finite");
    loss.backward();
    opt.step(clf.params());
  }
  clf.params().zero_grad();
  return clf;
}

DomainClassifier train_domain_classifier(std::span<const Tensor<float>> real_a,
                                         std::span<const Tensor<float>> real_b,
                                         const ClassifierTrainConfig& cfg, Rng& rng) {
  const std::vector<std::vector<Tensor<float>>> classes{{real_a.begin(), real_a.end()},
                                                        {real_b.begin(), real_b.end()}};
  return train_domain_classifier(classes, cfg, rng);
}

double classification_accuracy(const DomainClassifier& classifier, std::span<const Tensor<float>> images,
                               std::size_t expected_label) {
  if (images.empty()) throw ArgumentError("classification_accuracy needs a non-empty set");
  constexpr std::size_t kChunk = 32;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < images.size(); start += kChunk) {
    const std::size_t end = std::min(images.size(), start + kChunk);
    for (const auto p : classifier.predict(stack<float>(images.subspan(start, end - start)))) {
      correct += p == expected_label;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(images.size());
}

}  // namespace singlegan
