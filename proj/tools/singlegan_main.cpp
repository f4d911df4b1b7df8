#include <iostream>

#include <CLI11.hpp>

#include "singlegan/cli.hpp"

int main(int argc, char** argv) {
  using namespace singlegan::cli;
  CLI::App app{"singlegan: multi-domain image translation with a single conditional generator"};
  app.require_subcommand(1);

  TrainArgs train;
  std::string resume, out_dir;
  bool deterministic = false, nondeterministic = false;
  std::uint64_t train_seed = 0;
  auto* t = app.add_subcommand("train", "train a regime from a JSON run config");
  t->add_option("--config", train.config, "run config")->required()->check(CLI::ExistingFile);
  t->add_option("--resume", resume, "checkpoint to resume from");
  t->add_option("--out", out_dir, "output directory (overrides output.dir)");
  auto* train_seed_opt = t->add_option("--seed", train_seed, "overrides regime.seed");
  t->add_flag("--deterministic", deterministic, "synchronous data loading (bitwise resumable)");
  t->add_flag("--prefetch", nondeterministic, "background batch prefetching");

  TranslateArgs tr;
  std::vector<float> latent;
  auto* x = app.add_subcommand("translate", "translate image(s) with a checkpoint");
  x->add_option("--checkpoint", tr.checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  x->add_option("--input", tr.input, "image file or directory")->required()->check(CLI::ExistingPath);
  x->add_option("--out,--output", tr.output, "output png (or directory)")->required();
  x->add_option("--domain", tr.domain, "target domain name")->required();
  auto* latent_opt = x->add_option("--latent", latent, "latent code values (multimodal)")->delimiter(',');
  x->add_option("--seed", tr.seed, "seed for the sampled latent code");

  EvaluateArgs ev;
  std::string source, target;
  auto* e = app.add_subcommand("evaluate", "score translations with an evaluation metric");
  e->add_option("--checkpoint", ev.checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  e->add_option("--data", ev.data_root, "data root with one folder per domain")->required();
  e->add_option("--metric", ev.metric, "consistency or accuracy")->check(CLI::IsMember({"consistency", "accuracy"}));
  e->add_option("--n-pairs", ev.n_pairs, "sampled pairs for consistency")->check(CLI::PositiveNumber);
  e->add_option("--seed", ev.seed, "sampling seed");
  e->add_flag("--gen-equals-real", ev.gen_equals_real, "score the real target set against itself");
  auto* source_opt = e->add_option("--source", source, "restrict to this source domain");
  auto* target_opt = e->add_option("--target", target, "restrict to this target domain");
  e->add_option("--classifier-steps", ev.classifier_steps, "training steps for the accuracy classifier");

  SynthArgs sy;
  std::uint64_t synth_seed = 0;
  auto* s = app.add_subcommand("synth", "render synthetic domains to disk");
  s->add_option("--config,--spec", sy.spec, "synthetic spec (JSON)")->required()->check(CLI::ExistingFile);
  s->add_option("--out", sy.out_root, "output root")->required();
  auto* synth_seed_opt = s->add_option("--seed", synth_seed, "overrides the synthetic seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kExitUsage;
  }

  if (t->parsed()) {
    if (!resume.empty()) train.resume = resume;
    if (!out_dir.empty()) train.out = out_dir;
    if (*train_seed_opt) train.seed = train_seed;
    if (deterministic && nondeterministic) {
      std::cerr << "--deterministic and --prefetch are mutually exclusive\n";
      return kExitUsage;
    }
    if (deterministic) train.deterministic = true;
    if (nondeterministic) train.deterministic = false;
    return cmd_train(train, std::cout, std::cerr);
  }
  if (x->parsed()) {
    if (*latent_opt) tr.latent = latent;
    return cmd_translate(tr, std::cout, std::cerr);
  }
  if (e->parsed()) {
    if (*source_opt) ev.source = source;
    if (*target_opt) ev.target = target;
    return cmd_evaluate(ev, std::cout, std::cerr);
  }
  if (*synth_seed_opt) sy.seed = synth_seed;
  return cmd_synth(sy, std::cout, std::cerr);
}
