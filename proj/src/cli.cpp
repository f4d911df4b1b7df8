#include "singlegan/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <ostream>

#include <json.hpp>

#include "singlegan/checkpoint.hpp"
#include "singlegan/errors.hpp"
#include "singlegan/evalkit.hpp"

namespace singlegan::cli {

namespace fs = std::filesystem;

namespace {

std::string step_name(std::int64_t step, const char* ext) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "step_%08lld%s", static_cast<long long>(step), ext);
  return buf;
}

std::string join(const std::vector<std::string>& names) {
  std::string out;
  for (const auto& n : names) out += (out.empty() ? "" : ", ") + n;
  return out;
}

bool is_image_path(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

void blit(RgbImage& dst, const RgbImage& src, std::size_t x0, std::size_t y0) {
  for (std::size_t y = 0; y < src.height; ++y) {
    std::copy_n(src.at(0, y), src.width * 3, dst.at(x0, y0 + y));
  }
}

std::vector<Tensor<float>> all_images(const DomainDataset& ds) {
  std::vector<Tensor<float>> out;
  out.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) out.push_back(ds.get(i));
  return out;
}

std::vector<Tensor<float>> translate_all(const TrainState& state, std::span<const Tensor<float>> images,
                                         const std::string& target, Rng& rng) {
  constexpr std::size_t kChunk = 16;
  std::vector<Tensor<float>> out;
  for (std::size_t start = 0; start < images.size(); start += kChunk) {
    const std::size_t n = std::min(kChunk, images.size() - start);
    const auto batch = stack<float>(images.subspan(start, n));
    Tensor<float> y;
    if (state.config.kind == RegimeKind::multimodal) {
      const auto latent = gaussian_tensor<float>(Shape{n, state.config.latent_dim}, rng);
      y = translate_batch(state, batch, target, &latent);
    } else {
      y = translate_batch(state, batch, target);
    }
    for (std::size_t i = 0; i < n; ++i) out.push_back(sample_of(y, i));
  }
  return out;
}

void write_diagnostic(const fs::path& dir, const TrainState& state, const TrainingError& e,
                      const std::string& last_line) {
  const fs::path ckpt = dir / "diverged.ckpt";
  save_checkpoint(make_checkpoint(state), ckpt);
  const nlohmann::json dump{{"step", e.step()},
                            {"loss", e.loss_name()},
                            {"message", e.what()},
                            {"last_log_line", last_line},
                            {"checkpoint", ckpt.string()}};
  std::ofstream(dir / "diagnostic.json") << dump.dump(2) << "\n";
}

}  // namespace

DatasetMap load_run_datasets(const RunConfig& cfg, std::ostream& warnings) {
  DatasetMap out;
  if (cfg.data.synthetic) {
    Rng rng(cfg.data.synthetic->seed);
    auto all = make_synthetic_domains(cfg.data.synthetic->spec, rng);
    for (const auto& d : cfg.regime.domain_names) out.emplace(d, std::move(all.at(d)));
    return out;
  }
  for (const auto& d : cfg.regime.domain_names) {
    out.emplace(d, load_domain_dataset(*cfg.data.root / d, cfg.regime.image_size, cfg.data.augment, warnings));
  }
  return out;
}

RgbImage sample_grid(const TrainState& state, const DatasetMap& datasets, std::size_t rows, std::uint64_t seed) {
  const auto& cfg = state.config;
  const std::size_t s = cfg.image_size;
  const std::size_t n = cfg.n_domains();
  RgbImage grid(s * (n + 1), s * rows);
  Rng rng(seed);
  Tensor<float> latent;
  if (cfg.kind == RegimeKind::multimodal) latent = gaussian_tensor<float>(Shape{1, cfg.latent_dim}, rng);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& ds = datasets.at(cfg.domain_names[r % n]);
    const auto x = ds.get((r / n) % ds.size());
    const auto batch = x.reshaped(Shape{1, 3, s, s});
    blit(grid, tensor_to_image(x), 0, r * s);
    for (std::size_t k = 0; k < n; ++k) {
      const auto y = translate_batch(state, batch, cfg.domain_names[k],
                                     cfg.kind == RegimeKind::multimodal ? &latent : nullptr);
      blit(grid, tensor_to_image(sample_of(y, 0)), (k + 1) * s, r * s);
    }
  }
  return grid;
}

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  try {
    cfg = load_run_config(args.config);
    if (args.seed) cfg.regime.seed = *args.seed;
    if (args.deterministic) cfg.output.deterministic = *args.deterministic;
    if (args.out) cfg.output.dir = *args.out;
    cfg.validate();
  } catch (const Error& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  }

  std::optional<TrainState> state;
  DatasetMap datasets;
  try {
    if (args.resume) {
      const auto ckpt = load_checkpoint(*args.resume);
      RegimeConfig saved = ckpt.config;
      saved.total_steps = cfg.regime.total_steps;
      if (!(saved == cfg.regime)) {
        err << "config error: regime section differs from the checkpoint being resumed "
               "(only total_steps may change)\n";
        return kExitUsage;
      }
      state = restore_train_state(ckpt);
      state->config.total_steps = cfg.regime.total_steps;
    }
    datasets = load_run_datasets(cfg, err);
    validate_datasets(cfg.regime, datasets);
    if (!state) state = TrainState::create(cfg.regime);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  const auto& output = cfg.output;
  std::ofstream log;
  try {
    fs::create_directories(output.checkpoint_dir());
    fs::create_directories(output.sample_dir());
    log.open(output.log_path(), args.resume ? std::ios::app : std::ios::trunc);
    if (!log) throw DataError("cannot open " + output.log_path().string());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  std::string last_line;
  TrainingSinks sinks;
  sinks.log = [&](const std::string& line) {
    last_line = line;
    log << line << "\n";
    log.flush();
  };
  sinks.checkpoint_every = output.checkpoint_every;
  sinks.checkpoint = [&](const TrainState& s) {
    save_checkpoint(make_checkpoint(s), output.checkpoint_dir() / step_name(s.step, ".ckpt"));
  };
  sinks.sample_every = output.sample_every;
  sinks.sample = [&](const TrainState& s) {
    write_png(sample_grid(s, datasets, output.sample_rows), output.sample_dir() / step_name(s.step, ".png"));
  };

  try {
    continue_training(*state, datasets, sinks, output.deterministic);
  } catch (const TrainingError& e) {
    write_diagnostic(output.dir, *state, e, last_line);
    err << "training diverged: " << e.what() << "; diagnostic dump at "
        << (output.dir / "diagnostic.json").string() << "\n";
    return kExitTraining;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitTraining;
  }

  try {
    const fs::path final_ckpt = output.checkpoint_dir() / "final.ckpt";
    save_checkpoint(make_checkpoint(*state), final_ckpt);
    write_png(sample_grid(*state, datasets, output.sample_rows), output.sample_dir() / "final.png");
    out << "trained " << to_string(state->config.kind) << " to step " << state->step << "; checkpoint "
        << final_ckpt.string() << "\n";
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitTraining;
  }
  return kExitOk;
}

int cmd_translate(const TranslateArgs& args, std::ostream& out, std::ostream& err) {
  try {
    const auto state = restore_train_state(load_checkpoint(args.checkpoint));
    const auto& cfg = state.config;
    if (std::find(cfg.domain_names.begin(), cfg.domain_names.end(), args.domain) == cfg.domain_names.end()) {
      err << "unknown domain '" << args.domain << "'; valid domains: " << join(cfg.domain_names) << "\n";
      return kExitUsage;
    }
    Tensor<float> latent;
    const bool multimodal = cfg.kind == RegimeKind::multimodal;
    if (multimodal) {
      if (args.latent) {
        if (args.latent->size() != cfg.latent_dim) {
          err << "latent has " << args.latent->size() << " values, expected " << cfg.latent_dim << "\n";
          return kExitUsage;
        }
        latent = Tensor<float>(Shape{1, cfg.latent_dim}, *args.latent);
      } else {
        Rng rng(args.seed);
        latent = gaussian_tensor<float>(Shape{1, cfg.latent_dim}, rng);
      }
    } else if (args.latent) {
      err << "regime " << to_string(cfg.kind) << " takes no latent code\n";
      return kExitUsage;
    }

    std::vector<std::pair<fs::path, fs::path>> jobs;
    if (fs::is_directory(args.input)) {
      std::vector<fs::path> inputs;
      for (const auto& e : fs::directory_iterator(args.input)) {
        if (e.is_regular_file() && is_image_path(e.path())) inputs.push_back(e.path());
      }
      std::sort(inputs.begin(), inputs.end());
      fs::create_directories(args.output);
      for (const auto& p : inputs) jobs.emplace_back(p, args.output / (p.stem().string() + ".png"));
    } else {
      jobs.emplace_back(args.input, args.output);
    }

    Rng unused(0);
    for (const auto& [in, dst] : jobs) {
      const auto x = preprocess(read_image(in), cfg.image_size, false, unused);
      const auto y = translate_batch(state, x.reshaped(Shape{1, 3, cfg.image_size, cfg.image_size}), args.domain,
                                     multimodal ? &latent : nullptr);
      write_png(tensor_to_image(sample_of(y, 0)), dst);
    }
    out << "translated " << jobs.size() << " image(s) toward " << args.domain << "\n";
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

int cmd_evaluate(const EvaluateArgs& args, std::ostream& out, std::ostream& err) {
  if (args.metric != "consistency" && args.metric != "accuracy") {
    err << "unknown metric '" << args.metric << "'; expected consistency or accuracy\n";
    return kExitUsage;
  }
  try {
    const auto state = restore_train_state(load_checkpoint(args.checkpoint));
    const auto& cfg = state.config;
    DatasetMap datasets;
    for (const auto& d : cfg.domain_names) {
      const fs::path dir = args.data_root / d;
      if (!fs::is_directory(dir)) {
        err << "data root " << args.data_root.string() << " has no folder for domain '" << d << "'\n";
        return kExitUsage;
      }
      datasets.emplace(d, load_domain_dataset(dir, cfg.image_size, false, err));
    }
    auto pairs = cfg.translation_pairs();
    if (args.source || args.target) {
      std::erase_if(pairs, [&](const auto& p) {
        return (args.source && p.first != *args.source) || (args.target && p.second != *args.target);
      });
      if (pairs.empty()) {
        err << "no trained translation matches the requested source/target\n";
        return kExitUsage;
      }
    }

    const RandomConvExtractor extractor(0);
    for (const auto& [src, tgt] : pairs) {
      const auto real_src = all_images(datasets.at(src));
      const auto real_tgt = all_images(datasets.at(tgt));
      Rng rng(args.seed);
      std::vector<Tensor<float>> gen;
      if (!args.gen_equals_real) gen = translate_all(state, real_src, tgt, rng);
      const auto& scored = args.gen_equals_real ? real_tgt : gen;
      out << "pair=" << src << "->" << tgt << " ";
      if (args.metric == "consistency") {
        ConsistencyOptions opt;
        opt.identical_pairing = args.gen_equals_real;
        auto report = domain_consistency(real_tgt, scored, extractor, args.n_pairs, rng, opt);
        report.seed = args.seed;
        out << report.to_text() << "\n";
      } else {
        ClassifierTrainConfig ccfg;
        ccfg.steps = args.classifier_steps;
        const auto clf = train_domain_classifier(real_src, real_tgt, ccfg, rng);
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.9g", classification_accuracy(clf, scored, 1));
        out << "metric=accuracy value=" << buf << " n_images=" << scored.size() << " seed=" << args.seed
            << " classifier_steps=" << ccfg.steps << "\n";
      }
    }
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

int cmd_synth(const SynthArgs& args, std::ostream& out, std::ostream& err) {
  SynthConfig cfg;
  try {
    cfg = load_synth_config(args.spec);
    if (args.seed) cfg.seed = *args.seed;
  } catch (const Error& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  }
  try {
    Rng rng(cfg.seed);
    const auto images = render_synthetic_images(cfg.spec, rng);
    const int digits = std::max<int>(4, static_cast<int>(std::to_string(cfg.spec.n_images).size()));
    for (std::size_t d = 0; d < images.size(); ++d) {
      const fs::path dir = args.out_root / cfg.spec.domains[d].name;
      fs::create_directories(dir);
      for (std::size_t i = 0; i < images[d].size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "%0*zu.png", digits, i);
        write_png(images[d][i], dir / name);
      }
    }
    out << "wrote " << images.size() << " domains x " << cfg.spec.n_images << " images to "
        << args.out_root.string() << "\n";
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

}  // namespace singlegan::cli
