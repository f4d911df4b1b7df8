// Acceptance runner: one PASS/FAIL line per criterion 1-10.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "singlegan/checkpoint.hpp"
#include "singlegan/cli.hpp"
#include "singlegan/conditional_norm.hpp"
#include "singlegan/config.hpp"
#include "singlegan/evalkit.hpp"
#include "singlegan/objectives.hpp"
#include "singlegan/ops.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace singlegan;
using testing::gradient_errors;
using testing::random_tensor;

namespace {

struct Options {
  fs::path work_dir = "acceptance_work";
  fs::path configs = "configs";
  std::set<int> only;
  bool reuse = false;
};

// Collects sub-checks for one criterion.
class Verdict {
 public:
  void check(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
  }
  void note(const std::string& s) { notes_.push_back(s); }
  bool ok() const { return failures_.empty(); }
  std::string summary() const {
    std::ostringstream o;
    for (std::size_t i = 0; i < notes_.size(); ++i) o << (i ? "; " : "") << notes_[i];
    if (!failures_.empty()) {
      o << " | failed:";
      for (const auto& f : failures_) o << " [" << f << "]";
    }
    return o.str();
  }

 private:
  std::vector<std::string> failures_;
  std::vector<std::string> notes_;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------- training

struct Run {
  RunConfig config;
  TrainState state;
  DatasetMap datasets;
  std::vector<LossReport> reports;  // parsed from the log lines
  double train_seconds = 0;
  bool reused = false;
};

LossReport parse_log_line(const std::string& line) {
  LossReport r;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) continue;
    const auto key = tok.substr(0, eq);
    if (key == "step" || key == "regime") continue;
    r.set(key, std::strtod(tok.c_str() + eq + 1, nullptr));
  }
  return r;
}

Run train_run(const Options& opt, const std::string& name, const std::function<void(RunConfig&)>& adjust = {}) {
  Run run{load_run_config(opt.configs / (name + ".json")), {}, {}, {}, 0, false};
  if (adjust) adjust(run.config);
  run.config.validate();
  std::ostringstream warnings;
  run.datasets = cli::load_run_datasets(run.config, warnings);

  const fs::path dir = opt.work_dir / name;
  const fs::path ckpt_path = dir / "final.ckpt";
  const fs::path log_path = dir / "train.log";
  if (opt.reuse && fs::exists(ckpt_path) && fs::exists(log_path)) {
    auto ckpt = load_checkpoint(ckpt_path);
    if (ckpt.config == run.config.regime && ckpt.step == run.config.regime.total_steps) {
      run.state = restore_train_state(ckpt);
      std::ifstream log(log_path);
      for (std::string line; std::getline(log, line);) run.reports.push_back(parse_log_line(line));
      run.reused = true;
      return run;
    }
  }
  fs::create_directories(dir);
  std::ofstream log(log_path, std::ios::trunc);
  TrainingSinks sinks;
  sinks.log = [&](const std::string& line) {
    log << line << "\n";
    run.reports.push_back(parse_log_line(line));
  };
  const auto t0 = std::chrono::steady_clock::now();
  run.state = run_training(run.config.regime, run.datasets, sinks, true);
  run.train_seconds = seconds_since(t0);
  save_checkpoint(make_checkpoint(run.state), ckpt_path);
  return run;
}

std::vector<Tensor<float>> images_of(const DomainDataset& ds) {
  std::vector<Tensor<float>> out;
  for (std::size_t i = 0; i < ds.size(); ++i) out.push_back(ds.get(i));
  return out;
}

// Translates every image toward `target`, 16 at a time.
std::vector<Tensor<float>> translate_all(const TrainState& state, const std::vector<Tensor<float>>& images,
                                         const std::string& target, const std::vector<Tensor<float>>* latents = nullptr) {
  std::vector<Tensor<float>> out;
  for (std::size_t i = 0; i < images.size(); i += 16) {
    const std::size_t n = std::min<std::size_t>(16, images.size() - i);
    const auto batch = stack<float>(std::span(images).subspan(i, n));
    Tensor<float> y;
    if (latents) {
      const auto lat = stack<float>(std::span(*latents).subspan(i, n));
      y = translate_batch(state, batch, target, &lat);
    } else {
      y = translate_batch(state, batch, target);
    }
    for (std::size_t k = 0; k < n; ++k) out.push_back(sample_of(y, k));
  }
  return out;
}

double mean_l1(const std::vector<Tensor<float>>& a, const std::vector<Tensor<float>>& b) {
  double s = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t k = 0; k < a[i].numel(); ++k) s += std::abs(double(a[i][k]) - b[i][k]);
    n += a[i].numel();
  }
  return s / double(n);
}

// Mean of each channel over a set of [3,S,S] images.
std::array<double, 3> channel_means(const std::vector<Tensor<float>>& images) {
  std::array<double, 3> m{0, 0, 0};
  std::size_t plane = 0;
  for (const auto& img : images) {
    plane = img.numel() / 3;
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t i = 0; i < plane; ++i) m[c] += img[c * plane + i];
    }
  }
  for (auto& v : m) v /= double(images.size() * plane);
  return m;
}

// Per-image L1 between x and G(G(x, target), source).
double cycle_l1(const TrainState& state, const std::vector<Tensor<float>>& xs, const std::string& source,
                const std::string& target) {
  return mean_l1(xs, translate_all(state, translate_all(state, xs, target), source));
}

bool all_finite(const std::vector<LossReport>& reports) {
  for (const auto& r : reports) {
    if (r.first_non_finite()) return false;
  }
  return true;
}

std::string run_note(const Run& run) {
  if (run.reused) return "reused checkpoint at step " + std::to_string(run.state.step);
  return std::to_string(run.state.step) + " steps in " + fmt(run.train_seconds) + "s";
}

// ---------------------------------------------------------------- criteria

Verdict criterion1() {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  {
    const Tensor<float> x(Shape{1, 2, 4, 4}, 5.0f);
    const auto code = code_batch<float>(ConditionCode(one_hot_encode(0, 2)), 1);
    const auto y = cbin_forward(x, code, CBINParams<float>::zeros(2, 2));
    double m = 0;
    for (float f : y.values()) m = std::max(m, double(std::abs(f)));
    v.check(m <= 1e-4, "constant map -> 0 (max " + fmt(m) + ")");
  }
  {
    const Tensor<double> x(Shape{1, 1, 1, 2}, std::vector<double>{1, 3});
    const auto code = code_batch<double>(ConditionCode(one_hot_encode(1, 2)), 1);
    const auto y = cbin_forward(x, code, CBINParams<double>::zeros(1, 2), 1e-5);
    v.check(std::abs(y[0] + 1) <= 1e-4 && std::abs(y[1] - 1) <= 1e-4, "two-point plane -> -1, 1");
  }
  {
    Rng rng(1);
    const auto x = random_tensor<double>(Shape{2, 3, 5, 5}, rng, -2, 2);
    const auto plain = instance_norm_forward(x, Tensor<double>(Shape{3}, 1.0), Tensor<double>(Shape{3}));
    double worst = 0;
    for (std::size_t k = 0; k < 4; ++k) {
      const auto code = code_batch<double>(ConditionCode(one_hot_encode(k, 4)), 2);
      worst = std::max(worst, testing::max_abs_diff(cbin_forward(x, code, CBINParams<double>::zeros(3, 4)), plain));
    }
    v.check(worst <= 1e-5, "zero-init CBIN equals instance norm (max " + fmt(worst) + ")");
  }
  using V = Var<double>;
  double worst = 0;
  auto grad = [&](const std::string& name, const testing::DoubleFn& f, const std::vector<Shape>& shapes,
                  std::uint64_t salt, bool separate = false) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Rng rng(salt * 1000 + seed);
      std::vector<Tensor<double>> in;
      for (const auto& s : shapes) in.push_back(random_tensor<double>(s, rng, -1.5, 1.5));
      if (separate) {
        // Keep |a - b| away from the kink of |.|.
        for (std::size_t i = 0; i < in[0].numel(); ++i) {
          in[1][i] = in[0][i] + (uniform01(rng) < 0.5 ? -1 : 1) * (0.1 + uniform01(rng));
        }
      }
      for (double e : gradient_errors(f, in, rng)) {
        worst = std::max(worst, e);
        if (!(e < 1e-4)) v.check(false, name + " seed " + std::to_string(seed) + " rel err " + fmt(e));
      }
    }
  };
  grad("cbin", [](const std::vector<V>& a) { return norm::cbin(a[0], a[1], a[2], a[3]); },
       {{2, 3, 4, 4}, {2, 4}, {3, 4}, {3}}, 1);
  grad("instance_norm", [](const std::vector<V>& a) { return norm::instance_norm(a[0], a[1], a[2]); },
       {{2, 3, 4, 4}, {3}, {3}}, 2);
  grad("lsgan_d", [](const std::vector<V>& a) {
    return objectives::lsgan_d_loss<double>(std::vector<V>{a[0], a[1]}, std::vector<V>{a[2], a[3]});
  }, {{2, 1, 4, 4}, {2, 1, 2, 2}, {2, 1, 4, 4}, {2, 1, 2, 2}}, 3);
  grad("lsgan_g", [](const std::vector<V>& a) { return objectives::lsgan_g_loss<double>(std::vector<V>{a[0], a[1]}); },
       {{2, 1, 4, 4}, {2, 1, 2, 2}}, 4);
  grad("cycle", [](const std::vector<V>& a) { return objectives::cycle_loss(a[0], a[1]); },
       {{2, 3, 3, 3}, {2, 3, 3, 3}}, 5, true);
  grad("latent_regression", [](const std::vector<V>& a) { return objectives::latent_regression_loss(a[0], a[1]); },
       {{3, 8}, {3, 8}}, 6, true);
  grad("kl", [](const std::vector<V>& a) { return objectives::kl_loss(LatentDistribution<double>{a[0], a[1]}); },
       {{3, 8}, {3, 8}}, 7);
  grad("paired_recon", [](const std::vector<V>& a) {
    std::vector<std::pair<V, V>> p{std::make_pair(a[0], a[1])};
    return objectives::paired_recon_loss<double>(p);
  }, {{2, 3, 3, 3}, {2, 3, 3, 3}}, 8, true);
  const double secs = seconds_since(t0);
  v.note("max gradient rel err " + fmt(worst) + " over 8 functions x 10 seeds");
  v.note("runtime " + fmt(secs) + "s");
  v.check(secs < 60, "runtime < 1 min");
  return v;
}

Verdict criterion2() {
  Verdict v;
  using V = Var<double>;
  auto maps = [](double value) {
    return std::vector<V>{V(Tensor<double>(Shape{1, 1, 14, 14}, value)), V(Tensor<double>(Shape{1, 1, 6, 6}, value))};
  };
  auto expect = [&](double got, double want, const std::string& what) {
    v.check(std::abs(got - want) <= 1e-6, what + " = " + fmt(got) + " (want " + fmt(want) + ")");
  };
  expect(objectives::lsgan_d_loss<double>(maps(1), maps(0)).item(), 0.0, "D loss real 1 fake 0");
  expect(objectives::lsgan_d_loss<double>(maps(0.5), maps(0.5)).item(), 0.5, "D loss 0.5/0.5");
  expect(objectives::lsgan_g_loss<double>(maps(1)).item(), 0.0, "G loss fake 1");
  expect(objectives::lsgan_g_loss<double>(maps(0)).item(), 1.0, "G loss fake 0");
  Rng rng(3);
  const auto x = random_tensor<double>(Shape{2, 3, 8, 8}, rng);
  expect(objectives::cycle_loss(V(x), V(x)).item(), 0.0, "cycle identity");
  auto kl = [](double mu, double logvar) {
    return objectives::kl_loss(LatentDistribution<double>{V(Tensor<double>(Shape{1, 1}, mu)),
                                                          V(Tensor<double>(Shape{1, 1}, logvar))}).item();
  };
  expect(kl(0, 0), 0.0, "KL standard");
  expect(kl(1, 0), 0.5, "KL mu=1");
  expect(kl(0, std::log(4.0)), 0.5 * (4 - std::log(4.0) - 1), "KL var=4");
  v.check(std::abs(kl(0, std::log(4.0)) - 0.8069) < 1e-4, "KL var=4 ~ 0.8069");
  v.note("10 loss identities checked at 1e-6");
  return v;
}

RegimeConfig tiny_base() {
  RegimeConfig c;
  c.domain_names = {"A", "B"};
  c.image_size = 32;
  c.seed = 5;
  c.networks.generator_base_width = 8;
  c.networks.generator_residual_blocks = 2;
  c.networks.discriminator_base_width = 8;
  c.networks.discriminator_strided_layers = 2;
  return c;
}

Verdict criterion3() {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t s : {32, 64, 128}) {
    GeneratorConfig cfg;
    cfg.base_width = 8;
    cfg.n_residual_blocks = 2;
    cfg.image_size = s;
    const auto g = Generator<float>::build(cfg, 1);
    Rng rng(s);
    const auto x = random_tensor<float>(Shape{1, 3, s, s}, rng);
    const auto y = g(x, code_batch<float>(ConditionCode(one_hot_encode(0, 2)), 1));
    v.check(y.shape() == x.shape(), "generator shape at " + std::to_string(s));
  }
  {
    DiscriminatorConfig cfg;
    cfg.base_width = 8;
    const auto d = MultiScaleDiscriminator<float>::build(cfg, 1, "D.X");
    Rng rng(2);
    const auto maps = d.forward(Var<float>(random_tensor<float>(Shape{1, 3, 128, 128}, rng)));
    v.check(maps.size() == 2 && maps[0].shape() == Shape{1, 1, 14, 14} && maps[1].shape() == Shape{1, 1, 6, 6},
            "discriminator maps 14x14 and 6x6 at 128");
    v.check(MultiScaleDiscriminator<float>::build(DiscriminatorConfig{}, 1, "D.X").output_sizes(128) ==
                std::vector<std::size_t>{14, 6},
            "full-width discriminator layout");
  }
  {
    const auto cfg = tiny_base();
    auto a = TrainState::create(cfg), b = TrainState::create(cfg);
    v.check(serialize_checkpoint(make_checkpoint(a)) == serialize_checkpoint(make_checkpoint(b)), "bitwise build");
    Rng rng(4);
    const auto x = random_tensor<float>(Shape{1, 3, 32, 32}, rng);
    v.check(translate_batch(a, x, "B") == translate_batch(b, x, "B"), "bitwise forward");
    std::map<std::string, Tensor<float>> batches{{"A", x}, {"B", random_tensor<float>(Shape{1, 3, 32, 32}, rng)}};
    const auto ra = train_step(a, batches), rb = train_step(b, batches);
    const auto bytes = serialize_checkpoint(make_checkpoint(a));
    v.check(ra == rb && bytes == serialize_checkpoint(make_checkpoint(b)), "bitwise training step");
    v.check(serialize_checkpoint(make_checkpoint(restore_train_state(deserialize_checkpoint(bytes)))) == bytes,
            "bitwise checkpoint round trip");
  }
  const double secs = seconds_since(t0);
  v.note("runtime " + fmt(secs) + "s");
  v.check(secs < 120, "runtime < 2 min");
  return v;
}

Verdict criterion4(const Options& opt, Run* keep) {
  Verdict v;
  Run run = train_run(opt, "base");
  const auto& r = run.config.regime;
  v.check(r.image_size == 32 && r.batch_size == 1 && r.optimizer.lr == 0.001 && r.optimizer.beta1 == 0.5 &&
              r.weights.lambda_cyc == 10 && r.total_steps == 2000 && run.datasets.at("A").size() == 64,
          "config matches the stated setup");
  const auto xa = images_of(run.datasets.at("A")), xb = images_of(run.datasets.at("B"));
  const double cyc_ab = cycle_l1(run.state, xa, "A", "B");
  const double cyc_ba = cycle_l1(run.state, xb, "B", "A");
  const auto m = channel_means(translate_all(run.state, xa, "B"));
  const double green_minus_red = m[1] - m[0];
  v.note(run_note(run));
  v.note("cycle L1 A->B->A " + fmt(cyc_ab) + ", B->A->B " + fmt(cyc_ba));
  v.note("A->B mean(G-R) " + fmt(green_minus_red));
  v.check(cyc_ab < 0.05 && cyc_ba < 0.05, "cycle loss < 0.05");
  v.check(green_minus_red >= 0.2, "A->B green minus red >= 0.2");
  if (!run.reused) v.check(run.train_seconds <= 600, "runtime <= 10 min");
  // Supporting observations, not gating.
  v.note("self-translation L1 A->A " + fmt(mean_l1(xa, translate_all(run.state, xa, "A"))));
  v.note("code sensitivity " + fmt(mean_l1(translate_all(run.state, xa, "A"), translate_all(run.state, xa, "B"))));
  if (keep) *keep = std::move(run);
  return v;
}

std::size_t argmax3(const std::array<float, 3>& c) {
  return static_cast<std::size_t>(std::max_element(c.begin(), c.end()) - c.begin());
}

Verdict criterion5(const Options& opt) {
  Verdict v;
  Run run = train_run(opt, "one_to_many");
  const auto& r = run.config.regime;
  v.note(run_note(run));
  v.check(r.total_steps == 3000, "3000 steps");
  v.check(run.state.discriminators.size() == 3, "exactly 3 discriminators");
  const auto& src = r.source_domain;
  const auto xs = images_of(run.datasets.at(src));
  const auto& recipes = run.config.data.synthetic->spec.domains;
  for (const auto& t : r.adversarial_domains()) {
    const auto xt = images_of(run.datasets.at(t));
    const double fwd = cycle_l1(run.state, xs, src, t);
    const double back = cycle_l1(run.state, xt, t, src);
    const auto m = channel_means(translate_all(run.state, xs, t));
    const auto recipe = std::find_if(recipes.begin(), recipes.end(), [&](const auto& d) { return d.name == t; });
    const std::size_t want = argmax3(recipe->color);
    const std::size_t got = static_cast<std::size_t>(std::max_element(m.begin(), m.end()) - m.begin());
    v.note(src + "->" + t + ": cycle " + fmt(fwd) + "/" + fmt(back) + ", channel means (" + fmt(m[0]) + "," +
           fmt(m[1]) + "," + fmt(m[2]) + ")");
    v.check(fwd < 0.1 && back < 0.1, "cycle < 0.1 for " + t);
    v.check(got == want, "dominant channel for " + t);
  }
  return v;
}

Verdict criterion6(const Options& opt) {
  Verdict v;
  Rng rng(2024);
  std::map<std::pair<std::size_t, std::size_t>, int> counts;
  bool distinct = true;
  const int draws = 12000;
  for (int i = 0; i < draws; ++i) {
    const auto p = sample_ordered_pair(4, rng);
    distinct &= p.first != p.second;
    ++counts[p];
  }
  double worst = 0;
  for (const auto& [_, n] : counts) worst = std::max(worst, std::abs(n / (draws / 12.0) - 1));
  v.note("pair sampler max deviation " + fmt(100 * worst) + "% over 12 pairs");
  v.check(distinct, "i != j always");
  v.check(counts.size() == 12 && worst <= 0.15, "uniform within 15%");

  Run run = train_run(opt, "many_to_many");
  v.note(run_note(run));
  v.check(run.config.regime.total_steps == 3000 && run.reports.size() == 3000, "3000 logged steps");
  v.check(all_finite(run.reports), "all losses finite");
  if (run.reports.size() > 100) {
    const double at10 = *run.reports[10].get("total_g");
    double tail = 0;
    for (std::size_t i = run.reports.size() - 100; i < run.reports.size(); ++i) tail += *run.reports[i].get("total_g");
    tail /= 100;
    v.note("total_g step 10 " + fmt(at10) + ", mean of last 100 steps " + fmt(tail));
    v.check(tail < at10, "generator total below its step-10 value");
  }
  return v;
}

Verdict criterion7(const Options& opt) {
  Verdict v;
  Run run = train_run(opt, "multimodal");
  const auto& r = run.config.regime;
  v.note(run_note(run));
  v.check(r.weights.lambda_kl == 0.1 && r.weights.lambda_reg == 0.5, "lambda_kl 0.1 and lambda_reg 0.5 from config");
  v.check(r.total_steps == 3000, "3000 steps");
  const auto& enc = *run.state.encoder;
  Rng rng(77);
  for (std::size_t t = 0; t < 2; ++t) {
    const auto& target = r.domain_names[t];
    const auto& source = r.domain_names[1 - t];
    const auto xs = images_of(run.datasets.at(source));
    std::vector<Tensor<float>> latents;
    for (std::size_t i = 0; i < xs.size(); ++i) latents.push_back(gaussian_tensor<float>(Shape{r.latent_dim}, rng));
    const auto fakes = translate_all(run.state, xs, target, &latents);
    NoGradGuard guard;
    const auto mu = enc.forward(Var<float>(stack<float>(fakes)),
                                Var<float>(code_batch<float>(ConditionCode(one_hot_encode(t, 2)), fakes.size())))
                        .mu.value();
    const auto c = stack<float>(latents);
    double reg = 0;
    for (std::size_t i = 0; i < c.numel(); ++i) reg += std::abs(double(c[i]) - mu[i]);
    reg /= double(c.numel());
    v.note("latent regression " + source + "->" + target + " " + fmt(reg));
    v.check(reg < 0.5, "latent regression < 0.5 toward " + target);
  }
  // Diversity toward the hue-jittered domain.
  const auto& recipes = run.config.data.synthetic->spec.domains;
  for (std::size_t t = 0; t < 2; ++t) {
    const auto& target = r.domain_names[t];
    const auto recipe = std::find_if(recipes.begin(), recipes.end(), [&](const auto& d) { return d.name == target; });
    if (recipe->hue_jitter_degrees <= 0) continue;
    const auto x = run.datasets.at(r.domain_names[1 - t]).get(0);
    Rng lr(5);
    const auto c1 = gaussian_tensor<float>(Shape{r.latent_dim}, lr);
    const auto c2 = gaussian_tensor<float>(Shape{r.latent_dim}, lr);
    const std::vector<Tensor<float>> in{x};
    const std::vector<Tensor<float>> l1{c1}, l2{c2};
    const double diff = mean_l1(translate_all(run.state, in, target, &l1), translate_all(run.state, in, target, &l2));
    v.note("latent diversity toward " + target + " " + fmt(diff));
    v.check(diff > 0.02, "two latent codes differ by > 0.02 toward " + target);
  }
  if (!run.reused) v.check(run.train_seconds <= 900, "runtime <= 15 min");
  return v;
}

Verdict criterion8(const Options& opt) {
  Verdict v;
  Run run = train_run(opt, "paired");
  const auto& r = run.config.regime;
  v.note(run_note(run));
  v.check(r.total_steps == 2000, "2000 steps");
  v.check(run.config.data.synthetic && run.config.data.synthetic->spec.aligned, "aligned synthetic data");
  const auto xs = images_of(run.datasets.at(r.source_domain));
  for (const auto& t : r.adversarial_domains()) {
    const double rec = mean_l1(images_of(run.datasets.at(t)), translate_all(run.state, xs, t));
    v.note("reconstruction L1 " + r.source_domain + "->" + t + " " + fmt(rec));
    v.check(rec < 0.08, "reconstruction < 0.08 for " + t);
  }
  return v;
}

Verdict criterion9(const Options& opt, Run* base) {
  Verdict v;
  Rng rng(9);
  std::vector<Tensor<float>> set;
  for (int i = 0; i < 8; ++i) set.push_back(random_tensor<float>(Shape{3, 32, 32}, rng));
  const RandomConvExtractor extractor(0);
  {
    Rng pairs(1);
    const auto r = domain_consistency(set, set, extractor, 500, pairs, ConsistencyOptions{true});
    v.note("self-consistency " + fmt(r.total));
    v.check(std::abs(r.total - 5.0) <= 1e-5, "self-consistency 5.0 within 1e-5");
  }
  {
    std::vector<Tensor<float>> gen;
    for (int i = 0; i < 8; ++i) gen.push_back(random_tensor<float>(Shape{3, 32, 32}, rng));
    Rng pairs(2);
    Rng replay = pairs;
    const std::size_t n = 100;
    const auto r = domain_consistency(set, gen, extractor, n, pairs);
    double total = 0;
    for (std::size_t p = 0; p < n; ++p) {
      const std::size_t i = uniform_index(replay, set.size()), j = uniform_index(replay, gen.size());
      const auto fa = extractor.extract(stack<float>(std::vector<Tensor<float>>{set[i]}));
      const auto fb = extractor.extract(stack<float>(std::vector<Tensor<float>>{gen[j]}));
      for (std::size_t s = 0; s < 5; ++s) {
        double ab = 0, aa = 0, bb = 0;
        for (std::size_t k = 0; k < fa[s].numel(); ++k) {
          ab += double(fa[s][k]) * fb[s][k];
          aa += double(fa[s][k]) * fa[s][k];
          bb += double(fb[s][k]) * fb[s][k];
        }
        total += ab / std::sqrt(aa * bb);
      }
    }
    total /= double(n);
    v.note("brute-force gap " + fmt(std::abs(total - r.total)));
    v.check(std::abs(total - r.total) <= 1e-6, "brute-force recomputation within 1e-6");
  }

  // Classifier on the base recipe; held-out images come from a fresh render.
  if (!base->state.generator.params().size()) *base = train_run(opt, "base");
  const auto train_a = images_of(base->datasets.at("A")), train_b = images_of(base->datasets.at("B"));
  auto held_cfg = *base->config.data.synthetic;
  held_cfg.seed += 1000;
  Rng held_rng(held_cfg.seed);
  const auto held = make_synthetic_domains(held_cfg.spec, held_rng);
  const auto test_a = images_of(held.at("A")), test_b = images_of(held.at("B"));
  Rng train_rng(3);
  const auto clf = train_domain_classifier(train_a, train_b, ClassifierTrainConfig{}, train_rng);
  std::vector<Tensor<float>> both = test_a;
  const double acc_a = classification_accuracy(clf, test_a, 0), acc_b = classification_accuracy(clf, test_b, 1);
  const double held_acc = 0.5 * (acc_a + acc_b);
  const double gen_acc = classification_accuracy(clf, translate_all(base->state, test_a, "B"), 1);
  v.note("held-out real accuracy " + fmt(held_acc) + ", generated A->B accuracy " + fmt(gen_acc));
  v.check(held_acc >= 0.95, "held-out real accuracy >= 0.95");
  v.check(gen_acc >= 0.9, "generated images score >= 0.9 toward target");
  return v;
}

Verdict criterion10(const Options& opt) {
  Verdict v;
  auto cfg = load_run_config(opt.configs / "base.json");
  cfg.regime.total_steps = 200;
  std::ostringstream warnings;
  const auto data = cli::load_run_datasets(cfg, warnings);
  TrainingSinks sinks;
  const auto straight = run_training(cfg.regime, data, sinks, true);
  auto half_cfg = cfg.regime;
  half_cfg.total_steps = 100;
  const auto half = run_training(half_cfg, data, sinks, true);
  const fs::path path = opt.work_dir / "resume_step100.ckpt";
  fs::create_directories(opt.work_dir);
  save_checkpoint(make_checkpoint(half), path);
  auto resumed = restore_train_state(load_checkpoint(path));
  resumed.config.total_steps = 200;
  continue_training(resumed, data, sinks, true);
  const auto a = make_checkpoint(straight), b = make_checkpoint(resumed);
  std::size_t mismatched = 0;
  for (std::size_t i = 0; i < a.tensors.size(); ++i) mismatched += a.tensors[i] != b.tensors[i];
  v.note(std::to_string(a.tensors.size()) + " tensors compared, " + std::to_string(mismatched) + " differ");
  v.check(a.tensors.size() == b.tensors.size() && mismatched == 0, "parameters and optimizer state bitwise equal");
  v.check(a.step == b.step && a.rng_state == b.rng_state, "step and rng state equal");
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  Options opt;
  std::vector<int> only;
  CLI::App app{"acceptance criteria runner"};
  app.add_option("--work-dir", opt.work_dir, "scratch directory for runs");
  app.add_option("--configs", opt.configs, "directory holding the committed run configs");
  app.add_option("--only", only, "criterion numbers to run")->delimiter(',');
  app.add_flag("--reuse", opt.reuse, "reuse finished runs from the work directory");
  CLI11_PARSE(app, argc, argv);
  opt.only.insert(only.begin(), only.end());

  Run base;
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"CBIN correctness", criterion1},
      {"loss identities", criterion2},
      {"shapes and determinism", criterion3},
      {"base-regime overfit", [&] { return criterion4(opt, &base); }},
      {"one-to-many regime", [&] { return criterion5(opt); }},
      {"many-to-many regime", [&] { return criterion6(opt); }},
      {"multimodal regime", [&] { return criterion7(opt); }},
      {"paired regime", [&] { return criterion8(opt); }},
      {"evalkit", [&] { return criterion9(opt, &base); }},
      {"resume equivalence", [&] { return criterion10(opt); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!opt.only.empty() && !opt.only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v.check(false, std::string("exception: ") + e.what());
    }
    failed += v.ok() ? 0 : 1;
    std::cout << "criterion " << id << " " << (v.ok() ? "PASS" : "FAIL") << " " << criteria[i].first << " ("
              << fmt(seconds_since(t0)) << "s): " << v.summary() << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
