#include <gtest/gtest.h>

#include <map>
#include <set>

#include "singlegan/checkpoint.hpp"
#include "singlegan/errors.hpp"
#include "singlegan/regimes.hpp"
#include "test_support.hpp"

namespace singlegan {
namespace {

using testing::random_tensor;
using Batches = std::map<std::string, Tensor<float>>;

RegimeConfig tiny(RegimeKind kind) {
  RegimeConfig c;
  c.kind = kind;
  const bool four = kind == RegimeKind::one_to_many || kind == RegimeKind::many_to_many;
  c.domain_names = four ? std::vector<std::string>{"A", "B", "C", "D"} : std::vector<std::string>{"A", "B"};
  if (kind == RegimeKind::one_to_many || kind == RegimeKind::paired) c.source_domain = "A";
  c.image_size = 32;
  c.total_steps = 4;
  c.seed = 11;
  c.networks.generator_base_width = 4;
  c.networks.generator_residual_blocks = 1;
  c.networks.discriminator_base_width = 4;
  c.networks.discriminator_strided_layers = 2;
  c.networks.encoder_base_width = 4;
  c.networks.encoder_down_layers = 3;
  c.networks.encoder_max_width = 16;
  return c;
}

Batches random_batches(const RegimeConfig& c, std::uint64_t seed) {
  Rng rng(seed);
  Batches b;
  for (const auto& d : c.domain_names) b.emplace(d, random_tensor<float>(Shape{c.batch_size, 3, 32, 32}, rng));
  return b;
}

DatasetMap tiny_datasets(const RegimeConfig& c, bool aligned = false) {
  SyntheticSpec spec;
  spec.n_images = 4;
  spec.image_size = 32;
  spec.aligned = aligned;
  const std::array<float, 3> colors[4] = {{0.9f, 0.1f, 0.1f}, {0.1f, 0.9f, 0.1f}, {0.1f, 0.1f, 0.9f}, {0.8f, 0.8f, 0.8f}};
  for (std::size_t i = 0; i < c.domain_names.size(); ++i) {
    DomainRecipe r;
    r.name = c.domain_names[i];
    r.color = colors[i];
    spec.domains.push_back(r);
  }
  Rng rng(5);
  return make_synthetic_domains(spec, rng);
}

void expect_same_params(const ParameterSet<float>& a, const ParameterSet<float>& b) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.entry(i).name, b.entry(i).name);
    EXPECT_EQ(a[i].value(), b[i].value()) << a.entry(i).name;
  }
}

void expect_same_state(const TrainState& a, const TrainState& b) {
  EXPECT_EQ(a.step, b.step);
  EXPECT_EQ(rng_state(a.rng), rng_state(b.rng));
  expect_same_params(a.generator.params(), b.generator.params());
  ASSERT_EQ(a.discriminators.size(), b.discriminators.size());
  for (const auto& [name, d] : a.discriminators) expect_same_params(d.params(), b.discriminators.at(name).params());
  ASSERT_EQ(a.encoder.has_value(), b.encoder.has_value());
  if (a.encoder) expect_same_params(a.encoder->params(), b.encoder->params());
}

Var<float> identity(const Var<float>& x, const Var<float>&) { return x; }

TEST(Regimes, IdentityGeneratorGivesZeroCycleLossInBase) {
  auto state = TrainState::create(tiny(RegimeKind::base));
  state.generator_override = identity;
  const auto b = random_batches(state.config, 1);
  const auto report = train_step_base(state, b.at("A"), b.at("B"));
  EXPECT_EQ(report.get("cyc"), 0.0);
  EXPECT_EQ(report.count_prefix("d_adv."), 2u);
  EXPECT_EQ(report.count_prefix("g_adv."), 2u);
  EXPECT_EQ(state.step, 1);
}

TEST(Regimes, OneToManyHasThreeDiscriminatorsAndZeroIdentityCycle) {
  auto state = TrainState::create(tiny(RegimeKind::one_to_many));
  EXPECT_EQ(state.discriminators.size(), 3u);
  std::set<std::string> keys;
  for (const auto& [k, _] : state.discriminators) keys.insert(k);
  EXPECT_EQ(keys, (std::set<std::string>{"B", "C", "D"}));
  state.generator_override = identity;
  const auto report = train_step_one_to_many(state, random_batches(state.config, 2));
  EXPECT_EQ(report.get("cyc"), 0.0);
  EXPECT_EQ(report.count_prefix("d_adv."), 3u);
  EXPECT_FALSE(report.contains("d_adv.A"));
}

TEST(Regimes, DiscriminatorSetsPerRegime) {
  EXPECT_EQ(TrainState::create(tiny(RegimeKind::base)).discriminators.size(), 2u);
  EXPECT_EQ(TrainState::create(tiny(RegimeKind::many_to_many)).discriminators.size(), 4u);
  EXPECT_EQ(TrainState::create(tiny(RegimeKind::multimodal)).discriminators.size(), 2u);
  const auto paired = TrainState::create(tiny(RegimeKind::paired));
  EXPECT_EQ(paired.discriminators.size(), 1u);
  EXPECT_EQ(paired.discriminators.count("B"), 1u);
  EXPECT_FALSE(paired.encoder.has_value());
  EXPECT_TRUE(TrainState::create(tiny(RegimeKind::multimodal)).encoder.has_value());
}

TEST(Regimes, PairedIdentityOnMatchingTargetsGivesZeroReconstruction) {
  auto state = TrainState::create(tiny(RegimeKind::paired));
  state.generator_override = identity;
  const auto b = random_batches(state.config, 3);
  const auto report = train_step_paired(state, b.at("A"), Batches{{"B", b.at("A")}});
  EXPECT_EQ(report.get("rec"), 0.0);
  EXPECT_FALSE(report.contains("cyc"));
}

TEST(Regimes, PairedReportsReconstructionWithoutCycle) {
  auto state = TrainState::create(tiny(RegimeKind::paired));
  const auto b = random_batches(state.config, 4);
  const auto report = train_step_paired(state, b.at("A"), Batches{{"B", b.at("B")}});
  ASSERT_TRUE(report.contains("rec"));
  EXPECT_GT(*report.get("rec"), 0.0);
  EXPECT_FALSE(report.contains("cyc"));
}

TEST(Regimes, PairedRejectsMisalignedBatches) {
  auto state = TrainState::create(tiny(RegimeKind::paired));
  Rng rng(1);
  const auto a = random_tensor<float>(Shape{1, 3, 32, 32}, rng);
  const auto b = random_tensor<float>(Shape{2, 3, 32, 32}, rng);
  EXPECT_THROW(train_step_paired(state, a, Batches{{"B", b}}), ShapeError);

  auto cfg = tiny(RegimeKind::paired);
  auto data = tiny_datasets(cfg, true);
  data.erase("B");
  data.emplace("B", DomainDataset::from_images("B", 32, {Tensor<float>(Shape{3, 32, 32})}));
  EXPECT_THROW(validate_datasets(cfg, data), ConfigError);
}

TEST(Regimes, MultimodalReportsAllTerms) {
  auto state = TrainState::create(tiny(RegimeKind::multimodal));
  const auto b = random_batches(state.config, 5);
  Rng rng(5);
  const auto report = train_step_multimodal(state, b.at("A"), b.at("B"), rng);
  for (const char* key : {"g_adv.A", "g_adv.B", "d_adv.A", "d_adv.B", "cyc", "reg", "kl", "total_g", "total_d"}) {
    EXPECT_TRUE(report.contains(key)) << key;
  }
  // Encoder heads start at zero, so mu = 0 and reg = sum of E|c| over two directions.
  EXPECT_GT(*report.get("reg"), 0.5);
  const Tensor<float> latent(Shape{1, 8});
  EXPECT_EQ(translate_batch(state, b.at("A"), "B", &latent).shape(), (Shape{1, 3, 32, 32}));
  EXPECT_THROW(translate_batch(state, b.at("A"), "B"), ArgumentError);
  const Tensor<float> wrong(Shape{1, 7});
  EXPECT_THROW(translate_batch(state, b.at("A"), "B", &wrong), ShapeError);
}

TEST(Regimes, ManyToManyTrainsOnePairPerStep) {
  auto state = TrainState::create(tiny(RegimeKind::many_to_many));
  for (int i = 0; i < 3; ++i) {
    const auto report = train_step_many_to_many(state, random_batches(state.config, 10 + i));
    EXPECT_EQ(report.count_prefix("d_adv."), 1u);
    EXPECT_EQ(report.count_prefix("g_adv."), 1u);
    EXPECT_TRUE(report.contains("cyc"));
  }
}

TEST(PairSampler, NeverPicksTheSameDomainAndIsUniform) {
  Rng rng(123);
  std::map<std::pair<std::size_t, std::size_t>, int> counts;
  const int draws = 12000;
  for (int i = 0; i < draws; ++i) {
    const auto p = sample_ordered_pair(4, rng);
    ASSERT_NE(p.first, p.second);
    ASSERT_LT(p.first, 4u);
    ASSERT_LT(p.second, 4u);
    ++counts[p];
  }
  ASSERT_EQ(counts.size(), 12u);
  for (const auto& [pair, n] : counts) {
    EXPECT_NEAR(n, draws / 12.0, 0.15 * draws / 12.0);
  }
  EXPECT_THROW(sample_ordered_pair(1, rng), ArgumentError);
}

TEST(PairSampler, IsReproducibleUnderSeed) {
  Rng a(9), b(9);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_ordered_pair(5, a), sample_ordered_pair(5, b));
}

TEST(Regimes, StepsAreBitwiseDeterministic) {
  for (auto kind : {RegimeKind::base, RegimeKind::multimodal, RegimeKind::paired}) {
    auto s1 = TrainState::create(tiny(kind));
    auto s2 = TrainState::create(tiny(kind));
    const auto b = random_batches(s1.config, 6);
    const auto r1 = train_step(s1, b);
    const auto r2 = train_step(s2, b);
    EXPECT_EQ(r1, r2) << to_string(kind);
    expect_same_state(s1, s2);
  }
}

TEST(Regimes, EachDiscriminatorStepsOnceAndIsUnfrozenAfterward) {
  auto state = TrainState::create(tiny(RegimeKind::base));
  const auto before = state.discriminators.at("A").params();
  const auto g_before = state.generator.params();
  train_step(state, random_batches(state.config, 7));
  for (const auto& [name, opt] : state.discriminator_opts) EXPECT_EQ(opt.steps(), 1) << name;
  EXPECT_EQ(state.generator_opt.steps(), 1);
  for (const auto& e : state.discriminators.at("A").params()) EXPECT_TRUE(e.var.requires_grad());
  bool d_changed = false, g_changed = false;
  for (std::size_t i = 0; i < before.size(); ++i) {
    d_changed |= before[i].value() != state.discriminators.at("A").params()[i].value();
  }
  for (std::size_t i = 0; i < g_before.size(); ++i) {
    g_changed |= g_before[i].value() != state.generator.params()[i].value();
  }
  EXPECT_TRUE(d_changed);
  EXPECT_TRUE(g_changed);
}

TEST(Regimes, IdentityStubLeavesGeneratorParametersUntouched) {
  auto state = TrainState::create(tiny(RegimeKind::base));
  const auto g_before = state.generator.params();
  state.generator_override = identity;
  train_step(state, random_batches(state.config, 8));
  expect_same_params(g_before, state.generator.params());
}

TEST(RegimeConfig, ValidationNamesTheField) {
  auto expect_field = [](RegimeConfig c, const std::string& field) {
    try {
      c.validate();
      ADD_FAILURE() << "expected ConfigError for " << field;
    } catch (const ConfigError& e) {
      EXPECT_NE(std::string(e.what()).find(field), std::string::npos) << e.what();
    }
  };
  auto c = tiny(RegimeKind::base);
  EXPECT_NO_THROW(c.validate());
  c.domain_names = {"A", "B", "C"};
  expect_field(c, "domain_names");
  c = tiny(RegimeKind::base);
  c.domain_names = {"A", "A"};
  expect_field(c, "domain_names");
  c = tiny(RegimeKind::one_to_many);
  c.source_domain = "Z";
  expect_field(c, "source_domain");
  c = tiny(RegimeKind::base);
  c.batch_size = 0;
  expect_field(c, "batch_size");
  c = tiny(RegimeKind::base);
  c.total_steps = -1;
  expect_field(c, "total_steps");
  c = tiny(RegimeKind::base);
  c.image_size = 16;
  expect_field(c, "image_size");
  c = tiny(RegimeKind::multimodal);
  c.weights.lambda_kl = -0.1;
  expect_field(c, "lambda_kl");
  EXPECT_THROW(parse_regime_kind("cyclegan"), ConfigError);
  EXPECT_EQ(parse_regime_kind("many_to_many"), RegimeKind::many_to_many);
}

TEST(RegimeConfig, TranslationPairsAndCodeDim) {
  EXPECT_EQ(tiny(RegimeKind::one_to_many).translation_pairs().size(), 3u);
  EXPECT_EQ(tiny(RegimeKind::many_to_many).translation_pairs().size(), 12u);
  EXPECT_EQ(tiny(RegimeKind::base).code_dim(), 2u);
  EXPECT_EQ(tiny(RegimeKind::multimodal).code_dim(), 10u);
}

TEST(Training, ZeroStepsReturnsInitialState) {
  auto cfg = tiny(RegimeKind::base);
  cfg.total_steps = 0;
  TrainingSinks sinks;
  int logged = 0;
  sinks.log = [&](const std::string&) { ++logged; };
  const auto state = run_training(cfg, tiny_datasets(cfg), sinks);
  EXPECT_EQ(state.step, 0);
  EXPECT_EQ(logged, 0);
  expect_same_state(state, TrainState::create(cfg));
}

TEST(Training, LogsOneLinePerStepAndHonorsCadence) {
  auto cfg = tiny(RegimeKind::many_to_many);
  TrainingSinks sinks;
  std::vector<std::string> lines;
  std::vector<std::int64_t> saved;
  sinks.log = [&](const std::string& l) { lines.push_back(l); };
  sinks.checkpoint = [&](const TrainState& s) { saved.push_back(s.step); };
  sinks.checkpoint_every = 2;
  run_training(cfg, tiny_datasets(cfg), sinks);
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_EQ(lines[0].rfind("step=0 regime=many_to_many ", 0), 0u);
  EXPECT_EQ(saved, (std::vector<std::int64_t>{2, 4}));
}

TEST(Training, ResumeMatchesStraightRunBitwise) {
  for (auto kind : {RegimeKind::base, RegimeKind::multimodal, RegimeKind::paired}) {
    auto cfg = tiny(kind);
    cfg.total_steps = 6;
    const auto data = tiny_datasets(cfg, kind == RegimeKind::paired);
    TrainingSinks sinks;
    const auto straight = run_training(cfg, data, sinks);

    auto half_cfg = cfg;
    half_cfg.total_steps = 3;
    const auto half = run_training(half_cfg, data, sinks);
    auto resumed = restore_train_state(deserialize_checkpoint(serialize_checkpoint(make_checkpoint(half))));
    resumed.config.total_steps = 6;
    continue_training(resumed, data, sinks);
    expect_same_state(straight, resumed);
  }
}

TEST(Training, NonDeterministicModeStillTrains) {
  auto cfg = tiny(RegimeKind::base);
  TrainingSinks sinks;
  const auto state = run_training(cfg, tiny_datasets(cfg), sinks, false);
  EXPECT_EQ(state.step, cfg.total_steps);
}

}  // namespace
}  // namespace singlegan
