#include "singlegan/regimes.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "singlegan/conditional_norm.hpp"
#include "singlegan/errors.hpp"
#include "singlegan/ops.hpp"

namespace singlegan {

namespace {

using VarF = Var<float>;
using Batches = std::map<std::string, Tensor<float>>;

void require(bool ok, const std::string& field, const std::string& why) {
  if (!ok) throw ConfigError("regime." + field + " " + why);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream + 1));
}

// Stream ids for derive_seed; discriminators use kDiscriminatorStream + index.
constexpr std::uint64_t kRngStream = 0;
constexpr std::uint64_t kGeneratorStream = 1;
constexpr std::uint64_t kEncoderStream = 2;
constexpr std::uint64_t kDiscriminatorStream = 16;

const Tensor<float>& batch_for(const Batches& batches, const std::string& name) {
  auto it = batches.find(name);
  if (it == batches.end()) throw ArgumentError("missing batch for domain " + name);
  return it->second;
}

std::size_t batch_size_of(const Tensor<float>& batch) {
  if (batch.rank() != 4) throw ShapeError("image batch must be [B,C,H,W], got " + shape_string(batch.shape()));
  return batch.dim(0);
}

Tensor<float> domain_codes(const RegimeConfig& cfg, const std::string& domain, std::size_t batch) {
  return code_batch<float>(ConditionCode(one_hot_encode(cfg.domain_index(domain), cfg.n_domains())), batch);
}

// Domain code, plus a latent block when given.
VarF condition(const RegimeConfig& cfg, const std::string& domain, std::size_t batch,
               const VarF& latent = VarF()) {
  VarF code(domain_codes(cfg, domain, batch));
  if (!latent.defined()) return code;
  return ops::concat_columns(code, latent);
}

void check_loss(const TrainState& state, const std::string& name, const VarF& loss) {
  if (!std::isfinite(loss.item())) throw TrainingError(state.step, name);
}

// One least-squares update of D_domain on (real, fake).
double update_discriminator(TrainState& state, const std::string& domain, const Tensor<float>& real,
                            const Tensor<float>& fake) {
  auto& disc = state.discriminators.at(domain);
  disc.params().zero_grad();
  const auto real_maps = disc.forward(VarF(real));
  const auto fake_maps = disc.forward(VarF(fake));
  VarF loss = objectives::lsgan_d_loss<float>(real_maps, fake_maps);
  check_loss(state, "d_adv." + domain, loss);
  loss.backward();
  state.discriminator_opts.at(domain).step(disc.params());
  disc.params().zero_grad();
  return loss.item();
}

// Freezes every discriminator for the generator phase.
class FrozenDiscriminators {
 public:
  explicit FrozenDiscriminators(TrainState& state) : state_(state) {
    for (auto& [_, d] : state_.discriminators) d.params().set_requires_grad(false);
  }
  ~FrozenDiscriminators() {
    for (auto& [_, d] : state_.discriminators) d.params().set_requires_grad(true);
  }
  FrozenDiscriminators(const FrozenDiscriminators&) = delete;
  FrozenDiscriminators& operator=(const FrozenDiscriminators&) = delete;

 private:
  TrainState& state_;
};

VarF generator_adversarial(const TrainState& state, const std::string& domain, const VarF& fake) {
  const auto maps = state.discriminators.at(domain).forward(fake);
  return objectives::lsgan_g_loss<float>(maps);
}

Tensor<float> generate_detached(const TrainState& state, const Tensor<float>& x, const VarF& code) {
  NoGradGuard guard;
  return state.generate(VarF(x), code).value();
}

// Backprop the generator objective and step G (and E when present).
void apply_generator_update(TrainState& state, const VarF& total) {
  check_loss(state, "total_g", total);
  total.backward();
  state.generator_opt.step(state.generator.params());
  state.generator.params().zero_grad();
  if (state.encoder) {
    state.encoder_opt->step(state.encoder->params());
    state.encoder->params().zero_grad();
  }
}

void prepare_generator_phase(TrainState& state) {
  state.generator.params().zero_grad();
  if (state.encoder) state.encoder->params().zero_grad();
}

void require_kind(const TrainState& state, RegimeKind kind) {
  if (state.config.kind != kind) {
    throw ArgumentError("step function for " + to_string(kind) + " called on a " +
                        to_string(state.config.kind) + " state");
  }
}

void require_same_batch(const Tensor<float>& a, const Tensor<float>& b, const std::string& what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(what + ": batch shapes " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()) + " differ");
  }
}

// Source -> target -> source cycles plus adversarial terms for a set of
// (source, target) translations, used by base, one_to_many and many_to_many.
struct Translation {
  std::string source;
  std::string target;
};

LossReport cycle_regime_step(TrainState& state, const Batches& batches,
                             const std::vector<Translation>& adversarial,
                             const std::vector<Translation>& cycles) {
  const auto& cfg = state.config;
  LossReport report;

  // Discriminator phase.
  double total_d = 0.0;
  for (const auto& t : adversarial) {
    const auto& x_src = batch_for(batches, t.source);
    const auto& x_tgt = batch_for(batches, t.target);
    require_same_batch(x_src, x_tgt, "translation " + t.source + "->" + t.target);
    const auto fake = generate_detached(state, x_src, condition(cfg, t.target, batch_size_of(x_src)));
    const double d = update_discriminator(state, t.target, x_tgt, fake);
    report.set("d_adv." + t.target, d);
    total_d += d;
  }

  // Generator phase.
  prepare_generator_phase(state);
  FrozenDiscriminators frozen(state);
  std::map<std::pair<std::string, std::string>, VarF> fakes;
  auto translated = [&](const std::string& source, const std::string& target) {
    auto key = std::make_pair(source, target);
    auto it = fakes.find(key);
    if (it != fakes.end()) return it->second;
    const auto& x = batch_for(batches, source);
    VarF y = state.generate(VarF(x), condition(cfg, target, batch_size_of(x)));
    fakes.emplace(key, y);
    return y;
  };

  std::vector<VarF> terms;
  for (const auto& t : adversarial) {
    VarF g = generator_adversarial(state, t.target, translated(t.source, t.target));
    check_loss(state, "g_adv." + t.target, g);
    report.set("g_adv." + t.target, g.item());
    terms.push_back(g);
  }
  std::vector<VarF> cyc_terms;
  for (const auto& c : cycles) {
    const auto& x = batch_for(batches, c.source);
    VarF back = state.generate(translated(c.source, c.target), condition(cfg, c.source, batch_size_of(x)));
    cyc_terms.push_back(objectives::cycle_loss<float>(VarF(x), back));
  }
  VarF cyc = ops::sum<float>(cyc_terms);
  check_loss(state, "cyc", cyc);
  report.set("cyc", cyc.item());
  terms.push_back(ops::scale(cyc, cfg.weights.lambda_cyc));
  VarF total = ops::sum<float>(terms);
  apply_generator_update(state, total);
  report.set("total_g", total.item());
  report.set("total_d", total_d);
  return report;
}

void finish_step(TrainState& state, const LossReport& report) {
  if (auto bad = report.first_non_finite()) throw TrainingError(state.step, *bad);
  ++state.step;
}

}  // namespace

std::string to_string(RegimeKind kind) {
  switch (kind) {
    case RegimeKind::base: return "base";
    case RegimeKind::one_to_many: return "one_to_many";
    case RegimeKind::many_to_many: return "many_to_many";
    case RegimeKind::multimodal: return "multimodal";
    case RegimeKind::paired: return "paired";
  }
  return "unknown";
}

RegimeKind parse_regime_kind(const std::string& s) {
  for (auto k : {RegimeKind::base, RegimeKind::one_to_many, RegimeKind::many_to_many,
                 RegimeKind::multimodal, RegimeKind::paired}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("regime.kind '" + s +
                    "' is not one of base, one_to_many, many_to_many, multimodal, paired");
}

void RegimeConfig::validate() const {
  const std::size_t n = domain_names.size();
  switch (kind) {
    case RegimeKind::base:
    case RegimeKind::multimodal:
      require(n == 2, "domain_names", "must list exactly 2 domains for " + to_string(kind));
      break;
    case RegimeKind::one_to_many:
    case RegimeKind::many_to_many:
      require(n == 4, "domain_names", "must list exactly 4 domains for " + to_string(kind));
      break;
    case RegimeKind::paired:
      require(n >= 2, "domain_names", "must list at least 2 domains for paired");
      break;
  }
  std::set<std::string> seen;
  for (const auto& d : domain_names) {
    require(!d.empty(), "domain_names", "contains an empty name");
    require(seen.insert(d).second, "domain_names", "contains duplicate '" + d + "'");
  }
  const bool needs_source = kind == RegimeKind::one_to_many || kind == RegimeKind::paired;
  if (needs_source) {
    require(seen.count(source_domain) == 1, "source_domain",
            "'" + source_domain + "' must be one of the configured domains");
  } else {
    require(source_domain.empty() || seen.count(source_domain) == 1, "source_domain",
            "'" + source_domain + "' is not a configured domain");
  }
  if (kind == RegimeKind::multimodal) require(latent_dim > 0, "latent_dim", "must be positive");
  require(batch_size > 0, "batch_size", "must be positive");
  require(total_steps >= 0, "total_steps", "must be non-negative");
  try {
    weights.validate();
    optimizer.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("regime.") + e.what());
  }
  generator_config().validate();
  const auto dcfg = discriminator_config();
  dcfg.validate();
  try {
    MultiScaleDiscriminator<float>::build(dcfg, 0, "probe").output_sizes(image_size);
  } catch (const ShapeError& e) {
    throw ConfigError(std::string("regime.image_size ") + e.what());
  }
  if (kind == RegimeKind::multimodal) {
    const auto ecfg = encoder_config();
    ecfg.validate();
    const std::size_t min_size = std::max<std::size_t>(std::size_t{1} << ecfg.n_down, 4);
    require(image_size >= min_size, "image_size",
            "must be at least " + std::to_string(min_size) + " for the encoder");
  }
}

std::size_t RegimeConfig::domain_index(const std::string& name) const {
  auto it = std::find(domain_names.begin(), domain_names.end(), name);
  if (it == domain_names.end()) throw ArgumentError("unknown domain '" + name + "'");
  return static_cast<std::size_t>(it - domain_names.begin());
}

std::size_t RegimeConfig::code_dim() const {
  return n_domains() + (kind == RegimeKind::multimodal ? latent_dim : 0);
}

GeneratorConfig RegimeConfig::generator_config() const {
  GeneratorConfig g;
  g.base_width = networks.generator_base_width;
  g.n_residual_blocks = networks.generator_residual_blocks;
  g.n_down = networks.generator_sampling_layers;
  g.n_up = networks.generator_sampling_layers;
  g.code_dim = code_dim();
  g.image_size = image_size;
  return g;
}

DiscriminatorConfig RegimeConfig::discriminator_config() const {
  DiscriminatorConfig d;
  d.base_width = networks.discriminator_base_width;
  d.n_strided = networks.discriminator_strided_layers;
  d.n_scales = networks.discriminator_scales;
  return d;
}

EncoderConfig RegimeConfig::encoder_config() const {
  EncoderConfig e;
  e.base_width = networks.encoder_base_width;
  e.n_down = networks.encoder_down_layers;
  e.max_width = networks.encoder_max_width;
  e.latent_dim = latent_dim;
  e.code_dim = n_domains();
  return e;
}

std::vector<std::string> RegimeConfig::adversarial_domains() const {
  if (kind == RegimeKind::one_to_many || kind == RegimeKind::paired) {
    std::vector<std::string> out;
    for (const auto& d : domain_names) {
      if (d != source_domain) out.push_back(d);
    }
    return out;
  }
  return domain_names;
}

std::vector<std::pair<std::string, std::string>> RegimeConfig::translation_pairs() const {
  std::vector<std::pair<std::string, std::string>> out;
  if (kind == RegimeKind::one_to_many || kind == RegimeKind::paired) {
    for (const auto& d : adversarial_domains()) out.emplace_back(source_domain, d);
    return out;
  }
  for (const auto& s : domain_names) {
    for (const auto& t : domain_names) {
      if (s != t) out.emplace_back(s, t);
    }
  }
  return out;
}

TrainState TrainState::create(const RegimeConfig& config) {
  config.validate();
  TrainState s;
  s.config = config;
  s.generator = Generator<float>::build(config.generator_config(), derive_seed(config.seed, kGeneratorStream));
  s.generator_opt = Adam<float>(config.optimizer, s.generator.params());
  const auto dcfg = config.discriminator_config();
  for (const auto& d : config.adversarial_domains()) {
    const std::uint64_t stream = kDiscriminatorStream + config.domain_index(d);
    auto disc = MultiScaleDiscriminator<float>::build(dcfg, derive_seed(config.seed, stream), "D." + d);
    s.discriminator_opts.emplace(d, Adam<float>(config.optimizer, disc.params()));
    s.discriminators.emplace(d, std::move(disc));
  }
  if (config.kind == RegimeKind::multimodal) {
    s.encoder = LatentEncoder<float>::build(config.encoder_config(), derive_seed(config.seed, kEncoderStream));
    s.encoder_opt = Adam<float>(config.optimizer, s.encoder->params());
  }
  s.rng.seed(derive_seed(config.seed, kRngStream));
  return s;
}

Var<float> TrainState::generate(const Var<float>& x, const Var<float>& code) const {
  if (generator_override) return generator_override(x, code);
  return generator.forward(x, code);
}

Tensor<float> translate_batch(const TrainState& state, const Tensor<float>& batch, const std::string& target,
                              const Tensor<float>* latent) {
  const auto& cfg = state.config;
  const std::size_t b = batch_size_of(batch);
  NoGradGuard guard;
  if (cfg.kind == RegimeKind::multimodal) {
    if (!latent) throw ArgumentError("multimodal translation needs a latent code");
    if (latent->shape() != Shape{b, cfg.latent_dim}) {
      throw ShapeError("latent must be " + shape_string(Shape{b, cfg.latent_dim}) + ", got " +
                       shape_string(latent->shape()));
    }
    return state.generate(VarF(batch), condition(cfg, target, b, VarF(*latent))).value();
  }
  if (latent) throw ArgumentError("regime " + to_string(cfg.kind) + " takes no latent code");
  return state.generate(VarF(batch), condition(cfg, target, b)).value();
}

std::pair<std::size_t, std::size_t> sample_ordered_pair(std::size_t n, Rng& rng) {
  if (n < 2) throw ArgumentError("ordered pair sampling needs at least 2 domains");
  const std::size_t k = uniform_index(rng, n * (n - 1));
  const std::size_t source = k / (n - 1);
  std::size_t target = k % (n - 1);
  if (target >= source) ++target;
  return {source, target};
}

LossReport train_step_base(TrainState& state, const Tensor<float>& batch_a, const Tensor<float>& batch_b) {
  require_kind(state, RegimeKind::base);
  const auto& names = state.config.domain_names;
  const Batches batches{{names[0], batch_a}, {names[1], batch_b}};
  const std::vector<Translation> adv{{names[1], names[0]}, {names[0], names[1]}};
  const std::vector<Translation> cyc{{names[0], names[1]}, {names[1], names[0]}};
  auto report = cycle_regime_step(state, batches, adv, cyc);
  finish_step(state, report);
  return report;
}

LossReport train_step_one_to_many(TrainState& state, const Batches& batches) {
  require_kind(state, RegimeKind::one_to_many);
  const auto& src = state.config.source_domain;
  std::vector<Translation> adv;
  std::vector<Translation> cyc;
  for (const auto& t : state.config.adversarial_domains()) {
    adv.push_back({src, t});
    cyc.push_back({src, t});
    cyc.push_back({t, src});
  }
  auto report = cycle_regime_step(state, batches, adv, cyc);
  finish_step(state, report);
  return report;
}

LossReport train_step_many_to_many(TrainState& state, const Batches& batches) {
  require_kind(state, RegimeKind::many_to_many);
  const auto& names = state.config.domain_names;
  const auto [j, i] = sample_ordered_pair(names.size(), state.rng);
  const std::vector<Translation> adv{{names[j], names[i]}};
  const std::vector<Translation> cyc{{names[j], names[i]}, {names[i], names[j]}};
  auto report = cycle_regime_step(state, batches, adv, cyc);
  finish_step(state, report);
  return report;
}

LossReport train_step_multimodal(TrainState& state, const Tensor<float>& batch_a,
                                 const Tensor<float>& batch_b, Rng& rng) {
  require_kind(state, RegimeKind::multimodal);
  if (!state.encoder) throw ArgumentError("multimodal state has no encoder");
  require_same_batch(batch_a, batch_b, "multimodal");
  const auto& cfg = state.config;
  const auto& names = cfg.domain_names;
  const std::size_t batch = batch_size_of(batch_a);
  const Tensor<float>* xs[2] = {&batch_a, &batch_b};
  LossReport report;

  // Latent codes for the forward translations, drawn before either phase so
  // both phases see the same samples.
  Tensor<float> c_fake[2];
  for (int k = 0; k < 2; ++k) c_fake[k] = gaussian_tensor<float>(Shape{batch, cfg.latent_dim}, rng);

  // Discriminator phase: fakes for domain t come from the other domain.
  double total_d = 0.0;
  for (int t = 0; t < 2; ++t) {
    const int s = 1 - t;
    const auto fake = generate_detached(state, *xs[s], condition(cfg, names[t], batch, VarF(c_fake[t])));
    const double d = update_discriminator(state, names[t], *xs[t], fake);
    report.set("d_adv." + names[t], d);
    total_d += d;
  }

  // Generator and encoder phase.
  prepare_generator_phase(state);
  FrozenDiscriminators frozen(state);
  const auto& enc = *state.encoder;
  std::vector<VarF> adv_terms, cyc_terms, reg_terms, kl_terms;
  for (int t = 0; t < 2; ++t) {
    const int s = 1 - t;
    VarF x_src(*xs[s]);
    VarF fake = state.generate(x_src, condition(cfg, names[t], batch, VarF(c_fake[t])));
    VarF g = generator_adversarial(state, names[t], fake);
    check_loss(state, "g_adv." + names[t], g);
    report.set("g_adv." + names[t], g.item());
    adv_terms.push_back(g);

    // The encoder must recover the injected latent from the translation.
    const auto fake_dist = enc.forward(fake, VarF(domain_codes(cfg, names[t], batch)));
    reg_terms.push_back(objectives::latent_regression_loss<float>(VarF(c_fake[t]), fake_dist.mu));

    // Encode the source, then reconstruct it from the translation.
    const auto src_dist = enc.forward(x_src, VarF(domain_codes(cfg, names[s], batch)));
    VarF c_src = reparameterize(src_dist, rng);
    VarF back = state.generate(fake, condition(cfg, names[s], batch, c_src));
    cyc_terms.push_back(objectives::cycle_loss<float>(x_src, back));
    kl_terms.push_back(objectives::kl_loss<float>(src_dist));
  }
  VarF cyc = ops::sum<float>(cyc_terms);
  VarF reg = ops::sum<float>(reg_terms);
  VarF kl = ops::sum<float>(kl_terms);
  check_loss(state, "cyc", cyc);
  check_loss(state, "reg", reg);
  check_loss(state, "kl", kl);
  report.set("cyc", cyc.item());
  report.set("reg", reg.item());
  report.set("kl", kl.item());
  std::vector<VarF> terms = adv_terms;
  terms.push_back(ops::scale(cyc, cfg.weights.lambda_cyc));
  terms.push_back(ops::scale(reg, cfg.weights.lambda_reg));
  terms.push_back(ops::scale(kl, cfg.weights.lambda_kl));
  VarF total = ops::sum<float>(terms);
  apply_generator_update(state, total);
  report.set("total_g", total.item());
  report.set("total_d", total_d);
  finish_step(state, report);
  return report;
}

LossReport train_step_paired(TrainState& state, const Tensor<float>& batch_source, const Batches& targets) {
  require_kind(state, RegimeKind::paired);
  const auto& cfg = state.config;
  const std::size_t batch = batch_size_of(batch_source);
  const auto target_names = cfg.adversarial_domains();
  for (const auto& t : target_names) {
    require_same_batch(batch_source, batch_for(targets, t), "paired target " + t);
  }
  LossReport report;

  double total_d = 0.0;
  for (const auto& t : target_names) {
    const auto fake = generate_detached(state, batch_source, condition(cfg, t, batch));
    const double d = update_discriminator(state, t, batch_for(targets, t), fake);
    report.set("d_adv." + t, d);
    total_d += d;
  }

  prepare_generator_phase(state);
  FrozenDiscriminators frozen(state);
  VarF x(batch_source);
  std::vector<VarF> terms;
  std::vector<std::pair<VarF, VarF>> pairs;
  for (const auto& t : target_names) {
    VarF fake = state.generate(x, condition(cfg, t, batch));
    VarF g = generator_adversarial(state, t, fake);
    check_loss(state, "g_adv." + t, g);
    report.set("g_adv." + t, g.item());
    terms.push_back(g);
    pairs.emplace_back(VarF(batch_for(targets, t)), fake);
  }
  VarF rec = objectives::paired_recon_loss<float>(pairs);
  check_loss(state, "rec", rec);
  report.set("rec", rec.item());
  terms.push_back(ops::scale(rec, cfg.weights.lambda_cyc));
  VarF total = ops::sum<float>(terms);
  apply_generator_update(state, total);
  report.set("total_g", total.item());
  report.set("total_d", total_d);
  finish_step(state, report);
  return report;
}

LossReport train_step(TrainState& state, const Batches& batches) {
  const auto& cfg = state.config;
  switch (cfg.kind) {
    case RegimeKind::base:
      return train_step_base(state, batch_for(batches, cfg.domain_names[0]),
                             batch_for(batches, cfg.domain_names[1]));
    case RegimeKind::one_to_many:
      return train_step_one_to_many(state, batches);
    case RegimeKind::many_to_many:
      return train_step_many_to_many(state, batches);
    case RegimeKind::multimodal:
      return train_step_multimodal(state, batch_for(batches, cfg.domain_names[0]),
                                   batch_for(batches, cfg.domain_names[1]), state.rng);
    case RegimeKind::paired: {
      Batches targets;
      for (const auto& t : cfg.adversarial_domains()) targets.emplace(t, batch_for(batches, t));
      return train_step_paired(state, batch_for(batches, cfg.source_domain), targets);
    }
  }
  throw ArgumentError("unknown regime");
}

void validate_datasets(const RegimeConfig& config, const DatasetMap& datasets) {
  for (const auto& d : config.domain_names) {
    auto it = datasets.find(d);
    if (it == datasets.end()) throw ConfigError("no dataset for configured domain '" + d + "'");
    if (it->second.size() == 0) throw ConfigError("dataset for domain '" + d + "' is empty");
    if (it->second.image_size() != config.image_size) {
      throw ConfigError("dataset for domain '" + d + "' has image size " +
                        std::to_string(it->second.image_size()) + ", regime expects " +
                        std::to_string(config.image_size));
    }
  }
  if (config.kind == RegimeKind::paired) {
    const std::size_t n = datasets.at(config.source_domain).size();
    for (const auto& d : config.domain_names) {
      if (datasets.at(d).size() != n) {
        throw ConfigError("paired datasets must be index-aligned; domain '" + d + "' has " +
                          std::to_string(datasets.at(d).size()) + " images, source has " +
                          std::to_string(n));
      }
    }
  }
}

Batches sample_step_batches(const RegimeConfig& config, const DatasetMap& datasets, Rng& rng) {
  Batches out;
  if (config.kind == RegimeKind::paired) {
    const std::size_t n = datasets.at(config.source_domain).size();
    std::vector<std::size_t> idx(config.batch_size);
    for (auto& i : idx) i = uniform_index(rng, n);
    for (const auto& d : config.domain_names) out.emplace(d, gather_batch(datasets.at(d), idx));
    return out;
  }
  for (const auto& d : config.domain_names) {
    out.emplace(d, sample_batch(datasets.at(d), config.batch_size, rng));
  }
  return out;
}

void continue_training(TrainState& state, const DatasetMap& datasets, TrainingSinks& sinks,
                       bool deterministic) {
  const auto& cfg = state.config;
  validate_datasets(cfg, datasets);
  std::optional<BatchPrefetcher> prefetch;
  // Paired data needs aligned indices, which the prefetcher does not provide.
  if (!deterministic && state.step < cfg.total_steps && cfg.kind != RegimeKind::paired) {
    prefetch.emplace(datasets, cfg.batch_size, state.rng());
  }
  const std::string regime = to_string(cfg.kind);
  while (state.step < cfg.total_steps) {
    Batches batches;
    if (prefetch) {
      auto all = prefetch->next();
      for (const auto& d : cfg.domain_names) batches.emplace(d, std::move(all.at(d)));
    } else {
      batches = sample_step_batches(cfg, datasets, state.rng);
    }
    const auto report = train_step(state, batches);
    if (sinks.log) sinks.log(report.to_log_line(state.step - 1, regime));
    if (sinks.sample && sinks.sample_every > 0 && state.step % sinks.sample_every == 0) sinks.sample(state);
    if (sinks.checkpoint && sinks.checkpoint_every > 0 && state.step % sinks.checkpoint_every == 0) {
      sinks.checkpoint(state);
    }
  }
}

TrainState run_training(const RegimeConfig& config, const DatasetMap& datasets, TrainingSinks& sinks,
                        bool deterministic) {
  validate_datasets(config, datasets);
  TrainState state = TrainState::create(config);
  continue_training(state, datasets, sinks, deterministic);
  return state;
}

}  // namespace singlegan
