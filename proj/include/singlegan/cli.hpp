#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "singlegan/config.hpp"
#include "singlegan/image_io.hpp"
#include "singlegan/regimes.hpp"

namespace singlegan::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitTraining = 3;

struct TrainArgs {
  std::filesystem::path config;
  std::optional<std::filesystem::path> resume;
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  std::optional<bool> deterministic;
};

struct TranslateArgs {
  std::filesystem::path checkpoint;
  std::filesystem::path input;  // image file or directory of images
  std::filesystem::path output; // png file, or directory when input is one
  std::string domain;
  std::optional<std::vector<float>> latent;
  std::uint64_t seed = 0;
};

struct EvaluateArgs {
  std::filesystem::path checkpoint;
  std::filesystem::path data_root;
  std::string metric = "consistency";  // or "accuracy"
  std::size_t n_pairs = 2000;
  std::uint64_t seed = 0;
  // Score the real target set against itself with identical pairing.
  bool gen_equals_real = false;
  std::optional<std::string> source;
  std::optional<std::string> target;
  std::size_t classifier_steps = 500;
};

struct SynthArgs {
  std::filesystem::path spec;
  std::filesystem::path out_root;
  std::optional<std::uint64_t> seed;
};

// Each returns a process exit status and reports on `out` / `err`.
int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err);
int cmd_translate(const TranslateArgs& args, std::ostream& out, std::ostream& err);
int cmd_evaluate(const EvaluateArgs& args, std::ostream& out, std::ostream& err);
int cmd_synth(const SynthArgs& args, std::ostream& out, std::ostream& err);

// Datasets for the configured domains, decoded or rendered per the data section.
DatasetMap load_run_datasets(const RunConfig& cfg, std::ostream& warnings);

// Rows are the first `rows` images taken round-robin over the domains; column
// 0 is the input and column k+1 its translation toward domain k. Multimodal
// states use a fixed latent drawn from `seed`.
RgbImage sample_grid(const TrainState& state, const DatasetMap& datasets, std::size_t rows,
                     std::uint64_t seed = 0);

}  // namespace singlegan::cli
