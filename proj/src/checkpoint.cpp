#include "singlegan/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "singlegan/config.hpp"
#include "singlegan/errors.hpp"

namespace singlegan {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'S', 'G', 'A', 'N', 'C', 'K', 'P', 'T'};

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename U>
U get_le(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  if (pos + sizeof(U) > bytes.size()) throw DataError("checkpoint is truncated");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(bytes[pos + i]) << (8 * i);
  pos += sizeof(U);
  return v;
}

template <typename T>
void append_params(Checkpoint& c, const ParameterSet<T>& params) {
  for (const auto& e : params) c.tensors.emplace_back(e.name, e.var.value());
}

void append_adam(Checkpoint& c, const std::string& net, const Adam<float>& opt,
                 const ParameterSet<float>& params) {
  c.optimizer_steps[net] = opt.steps();
  for (std::size_t i = 0; i < params.size(); ++i) {
    c.tensors.emplace_back("adam." + net + ".m." + params.entry(i).name, opt.first_moments()[i]);
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    c.tensors.emplace_back("adam." + net + ".v." + params.entry(i).name, opt.second_moments()[i]);
  }
}

const Tensor<float>& need(const Checkpoint& c, const std::string& name) {
  const auto* t = c.find(name);
  if (!t) throw DataError("checkpoint is missing tensor " + name);
  return *t;
}

void load_params(const Checkpoint& c, ParameterSet<float>& params) {
  std::map<std::string, Tensor<float>> values;
  for (const auto& e : params) values.emplace(e.name, need(c, e.name));
  params.load(values);
}

void load_adam(const Checkpoint& c, const std::string& net, Adam<float>& opt,
               const ParameterSet<float>& params) {
  auto it = c.optimizer_steps.find(net);
  if (it == c.optimizer_steps.end()) throw DataError("checkpoint is missing optimizer state for " + net);
  std::vector<Tensor<float>> m, v;
  for (const auto& e : params) {
    m.push_back(need(c, "adam." + net + ".m." + e.name));
    v.push_back(need(c, "adam." + net + ".v." + e.name));
  }
  opt.restore(it->second, std::move(m), std::move(v));
}

}  // namespace

const Tensor<float>* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return &t;
  }
  return nullptr;
}

Checkpoint make_checkpoint(const TrainState& state) {
  Checkpoint c;
  c.config = state.config;
  c.step = state.step;
  c.rng_state = rng_state(state.rng);
  append_params(c, state.generator.params());
  for (const auto& [_, d] : state.discriminators) append_params(c, d.params());
  if (state.encoder) append_params(c, state.encoder->params());
  append_adam(c, "G", state.generator_opt, state.generator.params());
  for (const auto& [name, d] : state.discriminators) {
    append_adam(c, "D." + name, state.discriminator_opts.at(name), d.params());
  }
  if (state.encoder) append_adam(c, "E", *state.encoder_opt, state.encoder->params());
  return c;
}

TrainState restore_train_state(const Checkpoint& ckpt) {
  TrainState s = TrainState::create(ckpt.config);
  load_params(ckpt, s.generator.params());
  load_adam(ckpt, "G", s.generator_opt, s.generator.params());
  for (auto& [name, d] : s.discriminators) {
    load_params(ckpt, d.params());
    load_adam(ckpt, "D." + name, s.discriminator_opts.at(name), d.params());
  }
  if (s.encoder) {
    load_params(ckpt, s.encoder->params());
    load_adam(ckpt, "E", *s.encoder_opt, s.encoder->params());
  }
  s.step = ckpt.step;
  set_rng_state(s.rng, ckpt.rng_state);
  return s;
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  json tensors = json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : ckpt.tensors) {
    tensors.push_back({{"name", name}, {"dtype", "f32"}, {"shape", t.shape()}, {"offset", offset}});
    offset += t.numel() * sizeof(float);
  }
  const json manifest{{"config", regime_to_json(ckpt.config)},
                      {"step", ckpt.step},
                      {"rng_state", ckpt.rng_state},
                      {"optimizer_steps", ckpt.optimizer_steps},
                      {"endianness", "little"},
                      {"tensors", tensors}};
  const std::string text = manifest.dump();

  std::vector<std::uint8_t> out(kMagic, kMagic + 8);
  put_le<std::uint32_t>(out, ckpt.version);
  put_le<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  out.reserve(out.size() + offset);
  for (const auto& [_, t] : ckpt.tensors) {
    for (const float v : t.values()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw DataError("not a checkpoint file (bad magic)");
  }
  std::size_t pos = 8;
  Checkpoint c;
  c.version = get_le<std::uint32_t>(bytes, pos);
  if (c.version != Checkpoint::kFormatVersion) {
    throw DataError("checkpoint format version " + std::to_string(c.version) + " is not supported (expected " +
                    std::to_string(Checkpoint::kFormatVersion) + ")");
  }
  const auto len = get_le<std::uint64_t>(bytes, pos);
  if (pos + len > bytes.size()) throw DataError("checkpoint is truncated");
  json manifest;
  try {
    manifest = json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                           bytes.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
    if (manifest.at("endianness").get<std::string>() != "little") throw DataError("unsupported endianness");
    c.config = regime_from_json(manifest.at("config"));
    c.step = manifest.at("step").get<std::int64_t>();
    c.rng_state = manifest.at("rng_state").get<std::string>();
    c.optimizer_steps = manifest.at("optimizer_steps").get<std::map<std::string, std::int64_t>>();
    const std::size_t base = pos;
    for (const auto& t : manifest.at("tensors")) {
      if (t.at("dtype").get<std::string>() != "f32") throw DataError("unsupported tensor dtype");
      Shape shape = t.at("shape").get<Shape>();
      std::size_t at = base + t.at("offset").get<std::size_t>();
      Tensor<float> value(shape);
      for (auto& v : value.values()) v = std::bit_cast<float>(get_le<std::uint32_t>(bytes, at));
      pos = std::max(pos, at);
      c.tensors.emplace_back(t.at("name").get<std::string>(), std::move(value));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("corrupt checkpoint manifest: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint holds an invalid config: ") + e.what());
  }
  if (pos != bytes.size()) throw DataError("checkpoint has trailing bytes");
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("cannot write " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return deserialize_checkpoint(bytes);
}

}  // namespace singlegan
