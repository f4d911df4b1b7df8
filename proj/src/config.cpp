#include "singlegan/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>

#include "singlegan/errors.hpp"

namespace singlegan {

namespace {

using nlohmann::json;

// Typed, path-aware view of one JSON object. finish() rejects keys that were
// never read, so typos surface as errors instead of silent defaults.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(label() + " must be an object");
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <typename T>
  T get(const std::string& key, T fallback) {
    if (!j_.contains(key)) {
      seen_.insert(key);
      return fallback;
    }
    return required<T>(key);
  }

  template <typename T>
  T required(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError(field(key) + " is required");
    return convert<T>(j_.at(key), field(key));
  }

  const json& child(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError(field(key) + " is required");
    return j_.at(key);
  }

  void finish() const {
    for (const auto& [k, _] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError(field(k) + " is not a recognized key");
    }
  }

  template <typename T>
  static T convert(const json& v, const std::string& name) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(name + " must be a boolean");
    } else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) {
      if (!v.is_number_unsigned()) throw ConfigError(name + " must be a non-negative integer");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(name + " must be an integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(name + " must be a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(name + " must be a string");
    }
    try {
      return v.get<T>();
    } catch (const json::exception&) {
      throw ConfigError(name + " has the wrong type");
    }
  }

 private:
  std::string label() const { return path_.empty() ? "config" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::array<float, 3> parse_rgb(const json& v, const std::string& name) {
  if (!v.is_array() || v.size() != 3) throw ConfigError(name + " must be an array of 3 numbers");
  std::array<float, 3> out{};
  for (std::size_t i = 0; i < 3; ++i) {
    out[i] = static_cast<float>(Section::convert<double>(v[i], name + "[" + std::to_string(i) + "]"));
  }
  return out;
}

json parse_text(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(what + " is not valid JSON: " + e.what());
  }
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

SynthConfig synth_from_section(const json& j, const std::string& path) {
  Section s(j, path);
  SynthConfig cfg;
  cfg.spec.n_images = s.get<std::size_t>("n_images", cfg.spec.n_images);
  cfg.spec.image_size = s.get<std::size_t>("image_size", cfg.spec.image_size);
  cfg.spec.aligned = s.get<bool>("aligned", cfg.spec.aligned);
  cfg.seed = s.get<std::uint64_t>("seed", cfg.seed);
  const json& domains = s.child("domains");
  if (!domains.is_array()) throw ConfigError(s.field("domains") + " must be an array");
  for (std::size_t i = 0; i < domains.size(); ++i) {
    Section d(domains[i], s.field("domains") + "[" + std::to_string(i) + "]");
    DomainRecipe r;
    r.name = d.required<std::string>("name");
    if (d.has("background")) r.background = parse_rgb(d.child("background"), d.field("background"));
    if (d.has("color")) r.color = parse_rgb(d.child("color"), d.field("color"));
    try {
      r.shape = parse_shape_kind(d.get<std::string>("shape", to_string(r.shape)));
      r.fill = parse_fill_style(d.get<std::string>("fill", to_string(r.fill)));
    } catch (const ConfigError& e) {
      throw ConfigError(d.field("") + e.what());
    }
    r.hue_jitter_degrees = d.get<double>("hue_jitter_degrees", r.hue_jitter_degrees);
    d.finish();
    cfg.spec.domains.push_back(r);
  }
  s.finish();
  cfg.spec.validate();
  return cfg;
}

}  // namespace

json regime_to_json(const RegimeConfig& cfg) {
  const auto& n = cfg.networks;
  return json{
      {"kind", to_string(cfg.kind)},
      {"domains", cfg.domain_names},
      {"source_domain", cfg.source_domain},
      {"latent_dim", cfg.latent_dim},
      {"image_size", cfg.image_size},
      {"batch_size", cfg.batch_size},
      {"total_steps", cfg.total_steps},
      {"seed", cfg.seed},
      {"weights",
       {{"lambda_cyc", cfg.weights.lambda_cyc},
        {"lambda_kl", cfg.weights.lambda_kl},
        {"lambda_reg", cfg.weights.lambda_reg}}},
      {"optimizer",
       {{"lr", cfg.optimizer.lr},
        {"beta1", cfg.optimizer.beta1},
        {"beta2", cfg.optimizer.beta2},
        {"eps", cfg.optimizer.eps}}},
      {"networks",
       {{"generator_base_width", n.generator_base_width},
        {"generator_residual_blocks", n.generator_residual_blocks},
        {"generator_sampling_layers", n.generator_sampling_layers},
        {"discriminator_base_width", n.discriminator_base_width},
        {"discriminator_strided_layers", n.discriminator_strided_layers},
        {"discriminator_scales", n.discriminator_scales},
        {"encoder_base_width", n.encoder_base_width},
        {"encoder_down_layers", n.encoder_down_layers},
        {"encoder_max_width", n.encoder_max_width}}},
  };
}

RegimeConfig regime_from_json(const json& j) {
  Section s(j, "regime");
  RegimeConfig cfg;
  cfg.kind = parse_regime_kind(s.required<std::string>("kind"));
  cfg.domain_names = s.required<std::vector<std::string>>("domains");
  cfg.source_domain = s.get<std::string>("source_domain", "");
  cfg.latent_dim = s.get<std::size_t>("latent_dim", cfg.latent_dim);
  cfg.image_size = s.get<std::size_t>("image_size", cfg.image_size);
  cfg.batch_size = s.get<std::size_t>("batch_size", cfg.batch_size);
  cfg.total_steps = s.get<std::int64_t>("total_steps", cfg.total_steps);
  cfg.seed = s.get<std::uint64_t>("seed", cfg.seed);
  if (s.has("weights")) {
    Section w(s.child("weights"), "regime.weights");
    cfg.weights.lambda_cyc = w.get<double>("lambda_cyc", cfg.weights.lambda_cyc);
    cfg.weights.lambda_kl = w.get<double>("lambda_kl", cfg.weights.lambda_kl);
    cfg.weights.lambda_reg = w.get<double>("lambda_reg", cfg.weights.lambda_reg);
    w.finish();
  }
  if (s.has("optimizer")) {
    Section o(s.child("optimizer"), "regime.optimizer");
    cfg.optimizer.lr = o.get<double>("lr", cfg.optimizer.lr);
    cfg.optimizer.beta1 = o.get<double>("beta1", cfg.optimizer.beta1);
    cfg.optimizer.beta2 = o.get<double>("beta2", cfg.optimizer.beta2);
    cfg.optimizer.eps = o.get<double>("eps", cfg.optimizer.eps);
    o.finish();
  }
  if (s.has("networks")) {
    Section n(s.child("networks"), "regime.networks");
    auto& w = cfg.networks;
    w.generator_base_width = n.get<std::size_t>("generator_base_width", w.generator_base_width);
    w.generator_residual_blocks = n.get<std::size_t>("generator_residual_blocks", w.generator_residual_blocks);
    w.generator_sampling_layers = n.get<std::size_t>("generator_sampling_layers", w.generator_sampling_layers);
    w.discriminator_base_width = n.get<std::size_t>("discriminator_base_width", w.discriminator_base_width);
    w.discriminator_strided_layers =
        n.get<std::size_t>("discriminator_strided_layers", w.discriminator_strided_layers);
    w.discriminator_scales = n.get<std::size_t>("discriminator_scales", w.discriminator_scales);
    w.encoder_base_width = n.get<std::size_t>("encoder_base_width", w.encoder_base_width);
    w.encoder_down_layers = n.get<std::size_t>("encoder_down_layers", w.encoder_down_layers);
    w.encoder_max_width = n.get<std::size_t>("encoder_max_width", w.encoder_max_width);
    n.finish();
  }
  s.finish();
  cfg.validate();
  return cfg;
}

json synth_to_json(const SynthConfig& cfg) {
  json domains = json::array();
  for (const auto& d : cfg.spec.domains) {
    domains.push_back({{"name", d.name},
                       {"background", d.background},
                       {"shape", to_string(d.shape)},
                       {"fill", to_string(d.fill)},
                       {"color", d.color},
                       {"hue_jitter_degrees", d.hue_jitter_degrees}});
  }
  return json{{"n_images", cfg.spec.n_images},
              {"image_size", cfg.spec.image_size},
              {"aligned", cfg.spec.aligned},
              {"seed", cfg.seed},
              {"domains", domains}};
}

SynthConfig synth_from_json(const json& j) { return synth_from_section(j, "synthetic"); }

void RunConfig::validate() const {
  regime.validate();
  if (data.root.has_value() == data.synthetic.has_value()) {
    throw ConfigError("data must set exactly one of root or synthetic");
  }
  if (data.synthetic) {
    data.synthetic->spec.validate();
    if (data.synthetic->spec.image_size != regime.image_size) {
      throw ConfigError("data.synthetic.image_size must equal regime.image_size");
    }
    std::set<std::string> names;
    for (const auto& d : data.synthetic->spec.domains) names.insert(d.name);
    for (const auto& d : regime.domain_names) {
      if (!names.count(d)) throw ConfigError("data.synthetic.domains has no recipe for '" + d + "'");
    }
    if (regime.kind == RegimeKind::paired && !data.synthetic->spec.aligned) {
      throw ConfigError("data.synthetic.aligned must be true for the paired regime");
    }
  }
  if (output.dir.empty()) throw ConfigError("output.dir must be non-empty");
  if (output.checkpoint_every < 0) throw ConfigError("output.checkpoint_every must be >= 0");
  if (output.sample_every < 0) throw ConfigError("output.sample_every must be >= 0");
  if (output.sample_rows == 0) throw ConfigError("output.sample_rows must be positive");
}

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir) {
  const json j = parse_text(text, "config");
  Section top(j, "");
  RunConfig cfg;
  cfg.regime = regime_from_json(top.child("regime"));

  Section data(top.child("data"), "data");
  if (data.has("root")) cfg.data.root = resolve(base_dir, data.required<std::string>("root"));
  if (data.has("synthetic")) cfg.data.synthetic = synth_from_section(data.child("synthetic"), "data.synthetic");
  cfg.data.augment = data.get<bool>("augment", false);
  data.finish();

  if (top.has("output")) {
    Section out(top.child("output"), "output");
    cfg.output.dir = resolve(base_dir, out.get<std::string>("dir", cfg.output.dir.string()));
    cfg.output.checkpoint_every = out.get<std::int64_t>("checkpoint_every", cfg.output.checkpoint_every);
    cfg.output.sample_every = out.get<std::int64_t>("sample_every", cfg.output.sample_every);
    cfg.output.sample_rows = out.get<std::size_t>("sample_rows", cfg.output.sample_rows);
    cfg.output.deterministic = out.get<bool>("deterministic", cfg.output.deterministic);
    out.finish();
  } else {
    cfg.output.dir = base_dir / cfg.output.dir;
  }
  top.finish();
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_text(path), path.parent_path());
}

SynthConfig load_synth_config(const std::filesystem::path& path) {
  return synth_from_json(parse_text(read_text(path), path.string()));
}

}  // namespace singlegan
