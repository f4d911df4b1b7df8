#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "singlegan/data.hpp"
#include "singlegan/regimes.hpp"

namespace singlegan {

// Synthetic recipe set plus the seed that renders it.
struct SynthConfig {
  SyntheticSpec spec;
  std::uint64_t seed = 0;
};

struct DataSection {
  // Either `root` (one folder per domain) or `synthetic` is set.
  std::optional<std::filesystem::path> root;
  std::optional<SynthConfig> synthetic;
  bool augment = false;
};

struct OutputSection {
  std::filesystem::path dir = "run";
  std::int64_t checkpoint_every = 0;  // 0: final checkpoint only
  std::int64_t sample_every = 0;      // 0: final sample grid only
  std::size_t sample_rows = 4;
  bool deterministic = true;

  std::filesystem::path log_path() const { return dir / "train.log"; }
  std::filesystem::path checkpoint_dir() const { return dir / "checkpoints"; }
  std::filesystem::path sample_dir() const { return dir / "samples"; }
};

struct RunConfig {
  RegimeConfig regime;
  DataSection data;
  OutputSection output;

  // Full validation; never touches the filesystem beyond reading.
  void validate() const;
};

// JSON round trips. Parsing rejects unknown keys and wrong types with a
// ConfigError naming the dotted field path. Relative paths in the data and
// output sections resolve against `base_dir`.
nlohmann::json regime_to_json(const RegimeConfig& cfg);
RegimeConfig regime_from_json(const nlohmann::json& j);

nlohmann::json synth_to_json(const SynthConfig& cfg);
SynthConfig synth_from_json(const nlohmann::json& j);

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);
SynthConfig load_synth_config(const std::filesystem::path& path);

}  // namespace singlegan
