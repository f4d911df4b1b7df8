#include "singlegan/networks.hpp"

#include <algorithm>

#include "singlegan/conditional_norm.hpp"
#include "singlegan/ops.hpp"

namespace singlegan {

namespace {

void require(bool ok, const std::string& field, const std::string& why) {
  if (!ok) throw ConfigError(field + " " + why);
}

template <typename T>
class Builder {
 public:
  Builder(ParameterSet<T>& params, Rng& rng) : params_(params), rng_(rng) {}

  layers::Conv conv(const std::string& name, std::size_t in, std::size_t out, std::size_t k,
                    std::size_t stride, std::size_t pad, bool reflect) {
    const std::size_t w = params_.add(name + ".weight", normal(Shape{out, in, k, k}));
    const std::size_t b = params_.add(name + ".bias", Tensor<T>(Shape{out}));
    return {w, b, stride, pad, reflect};
  }

  layers::TransposedConv transposed_conv(const std::string& name, std::size_t in, std::size_t out,
                                         std::size_t k) {
    const std::size_t w = params_.add(name + ".weight", normal(Shape{in, out, k, k}));
    const std::size_t b = params_.add(name + ".bias", Tensor<T>(Shape{out}));
    return {w, b};
  }

  layers::CBIN cbin(const std::string& name, std::size_t channels, std::size_t code_dim) {
    auto init = CBINParams<T>::zeros(channels, code_dim);
    const std::size_t w = params_.add(name + ".weight", std::move(init.weight));
    const std::size_t b = params_.add(name + ".bias", std::move(init.bias));
    return {w, b};
  }

  layers::InstanceNorm instance_norm(const std::string& name, std::size_t channels) {
    const std::size_t g = params_.add(name + ".gamma", Tensor<T>(Shape{channels}, T(1)));
    const std::size_t b = params_.add(name + ".beta", Tensor<T>(Shape{channels}));
    return {g, b};
  }

  // Zero-initialized linear layer.
  layers::Linear linear(const std::string& name, std::size_t in, std::size_t out) {
    const std::size_t w = params_.add(name + ".weight", Tensor<T>(Shape{out, in}));
    const std::size_t b = params_.add(name + ".bias", Tensor<T>(Shape{out}));
    return {w, b};
  }

 private:
  Tensor<T> normal(Shape shape) {
    Tensor<T> t(std::move(shape));
    for (auto& v : t.values()) v = static_cast<T>(kInitStddev * gaussian(rng_));
    return t;
  }

  ParameterSet<T>& params_;
  Rng& rng_;
};

template <typename T>
Var<T> apply(const ParameterSet<T>& p, const layers::Conv& l, const Var<T>& x) {
  if (l.reflect && l.pad > 0) {
    return ops::conv2d(ops::reflection_pad2d(x, l.pad), p[l.weight], p[l.bias], l.stride, 0);
  }
  return ops::conv2d(x, p[l.weight], p[l.bias], l.stride, l.pad);
}

template <typename T>
Var<T> apply(const ParameterSet<T>& p, const layers::CBIN& l, const Var<T>& x, const Var<T>& code) {
  return norm::cbin(x, code, p[l.weight], p[l.bias]);
}

template <typename T>
Var<T> apply(const ParameterSet<T>& p, const layers::InstanceNorm& l, const Var<T>& x) {
  return norm::instance_norm(x, p[l.gamma], p[l.beta]);
}

std::size_t conv_out(std::size_t size, std::size_t k, std::size_t stride, std::size_t pad) {
  if (size + 2 * pad < k) return 0;
  return (size + 2 * pad - k) / stride + 1;
}

}  // namespace

void GeneratorConfig::validate() const {
  require(in_channels > 0, "generator.in_channels", "must be positive");
  require(base_width > 0, "generator.base_width", "must be positive");
  require(n_residual_blocks >= 1, "generator.n_residual_blocks", "must be at least 1");
  require(n_down == n_up, "generator.n_up", "must equal n_down");
  require(code_dim > 0, "generator.code_dim", "must be positive");
  require(image_size > 0 && image_size % (std::size_t{1} << n_down) == 0, "generator.image_size",
          "must be divisible by 2^n_down");
  // Reflection pads need the smallest feature map to exceed the pad width.
  require((image_size >> n_down) >= 2 && image_size > 3, "generator.image_size",
          "is too small for the configured downsampling");
}

void DiscriminatorConfig::validate() const {
  require(in_channels > 0, "discriminator.in_channels", "must be positive");
  require(base_width > 0, "discriminator.base_width", "must be positive");
  require(n_strided >= 1, "discriminator.n_strided", "must be at least 1");
  require(n_scales >= 1, "discriminator.n_scales", "must be at least 1");
  require(slope >= 0 && slope < 1, "discriminator.slope", "must be in [0, 1)");
}

void EncoderConfig::validate() const {
  require(in_channels > 0, "encoder.in_channels", "must be positive");
  require(base_width > 0, "encoder.base_width", "must be positive");
  require(n_down >= 1, "encoder.n_down", "must be at least 1");
  require(max_width >= base_width, "encoder.max_width", "must be at least base_width");
  require(latent_dim > 0, "encoder.latent_dim", "must be positive");
  require(code_dim > 0, "encoder.code_dim", "must be positive");
}

// ---------------------------------------------------------------- Generator

template <typename T>
Generator<T> Generator<T>::build(const GeneratorConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Generator g;
  g.cfg_ = cfg;
  Rng rng(seed);
  Builder<T> b(g.params_, rng);
  const std::size_t base = cfg.base_width;

  g.stem_conv_ = b.conv("G.stem.conv", cfg.in_channels, base, 7, 1, 3, true);
  g.stem_norm_ = b.cbin("G.stem.cbin", base, cfg.code_dim);

  std::size_t width = base;
  for (std::size_t i = 0; i < cfg.n_down; ++i) {
    const std::string p = "G.down." + std::to_string(i);
    auto conv = b.conv(p + ".conv", width, width * 2, 3, 2, 1, true);
    width *= 2;
    g.down_.emplace_back(conv, b.cbin(p + ".cbin", width, cfg.code_dim));
  }
  for (std::size_t i = 0; i < cfg.n_residual_blocks; ++i) {
    const std::string p = "G.res." + std::to_string(i);
    layers::ResidualBlock block;
    block.conv1 = b.conv(p + ".conv1", width, width, 3, 1, 1, true);
    block.norm1 = b.cbin(p + ".cbin1", width, cfg.code_dim);
    block.conv2 = b.conv(p + ".conv2", width, width, 3, 1, 1, true);
    block.norm2 = b.cbin(p + ".cbin2", width, cfg.code_dim);
    g.res_.push_back(block);
  }
  for (std::size_t i = 0; i < cfg.n_up; ++i) {
    const std::string p = "G.up." + std::to_string(i);
    auto conv = b.transposed_conv(p + ".conv", width, width / 2, 3);
    width /= 2;
    g.up_.emplace_back(conv, b.instance_norm(p + ".norm", width));
  }
  g.out_conv_ = b.conv("G.out.conv", width, cfg.in_channels, 7, 1, 3, true);
  return g;
}

template <typename T>
Var<T> Generator<T>::forward(const Var<T>& x, const Var<T>& code) const {
  const Shape& s = x.shape();
  if (s.size() != 4 || s[1] != cfg_.in_channels || s[2] != cfg_.image_size || s[3] != cfg_.image_size) {
    throw ShapeError("generator input " + shape_string(s) + " does not match image_size " +
                     std::to_string(cfg_.image_size));
  }
  if (code.shape() != Shape{s[0], cfg_.code_dim}) {
    throw ShapeError("generator code " + shape_string(code.shape()) + " expected [" +
                     std::to_string(s[0]) + "," + std::to_string(cfg_.code_dim) + "]");
  }
  const auto& p = params_;
  Var<T> h = ops::relu(apply(p, stem_norm_, apply(p, stem_conv_, x), code));
  for (const auto& [conv, norm] : down_) h = ops::relu(apply(p, norm, apply(p, conv, h), code));
  for (const auto& blk : res_) {
    Var<T> r = ops::relu(apply(p, blk.norm1, apply(p, blk.conv1, h), code));
    r = apply(p, blk.norm2, apply(p, blk.conv2, r), code);
    h = ops::add(h, r);
  }
  for (const auto& [conv, norm] : up_) {
    h = ops::conv_transpose2d(h, p[conv.weight], p[conv.bias], 2, 1, 1);
    h = ops::relu(apply(p, norm, h));
  }
  return ops::tanh(apply(p, out_conv_, h));
}

template <typename T>
Tensor<T> Generator<T>::operator()(const Tensor<T>& x, const Tensor<T>& code) const {
  NoGradGuard guard;
  return forward(Var<T>(x), Var<T>(code)).value();
}

// ----------------------------------------------------- MultiScaleDiscriminator

template <typename T>
MultiScaleDiscriminator<T> MultiScaleDiscriminator<T>::build(const DiscriminatorConfig& cfg,
                                                             std::uint64_t seed,
                                                             const std::string& name_prefix) {
  cfg.validate();
  MultiScaleDiscriminator d;
  d.cfg_ = cfg;
  Rng rng(seed);
  Builder<T> b(d.params_, rng);
  const std::size_t cap = cfg.base_width * 8;
  for (std::size_t s = 0; s < cfg.n_scales; ++s) {
    const std::string p = name_prefix + ".scale" + std::to_string(s) + ".layer";
    std::vector<Stage> stages;
    std::size_t in = cfg.in_channels;
    std::size_t width = cfg.base_width;
    std::size_t layer = 0;
    for (; layer < cfg.n_strided; ++layer) {
      const std::string n = p + std::to_string(layer);
      Stage st{b.conv(n + ".conv", in, width, 4, 2, 1, false), layer > 0, {}, true};
      if (st.has_norm) st.norm = b.instance_norm(n + ".norm", width);
      stages.push_back(st);
      in = width;
      width = std::min(width * 2, cap);
    }
    {
      const std::string n = p + std::to_string(layer++);
      Stage st{b.conv(n + ".conv", in, width, 4, 1, 1, false), true, {}, true};
      st.norm = b.instance_norm(n + ".norm", width);
      stages.push_back(st);
      in = width;
    }
    const std::string n = p + std::to_string(layer);
    stages.push_back(Stage{b.conv(n + ".conv", in, 1, 4, 1, 1, false), false, {}, false});
    d.scales_.push_back(std::move(stages));
  }
  return d;
}

template <typename T>
std::vector<std::size_t> MultiScaleDiscriminator<T>::output_sizes(std::size_t image_size) const {
  std::vector<std::size_t> out;
  std::size_t size = image_size;
  for (std::size_t s = 0; s < scales_.size(); ++s) {
    if (s > 0) size /= 2;
    std::size_t cur = size;
    for (const auto& st : scales_[s]) {
      cur = cur == 0 ? 0 : conv_out(cur, 4, st.conv.stride, st.conv.pad);
      if (cur == 0) {
        throw ShapeError("discriminator input of size " + std::to_string(image_size) +
                         " is too small to survive the conv stack at scale " + std::to_string(s));
      }
    }
    out.push_back(cur);
  }
  return out;
}

template <typename T>
std::vector<Var<T>> MultiScaleDiscriminator<T>::forward(const Var<T>& x) const {
  const Shape& s = x.shape();
  if (s.size() != 4 || s[1] != cfg_.in_channels) {
    throw ShapeError("discriminator input " + shape_string(s) + " has wrong channel count");
  }
  output_sizes(std::min(s[2], s[3]));
  std::vector<Var<T>> maps;
  Var<T> input = x;
  for (std::size_t sc = 0; sc < scales_.size(); ++sc) {
    if (sc > 0) input = ops::avg_pool2d(input, 2);
    Var<T> h = input;
    for (const auto& st : scales_[sc]) {
      h = apply(params_, st.conv, h);
      if (st.has_norm) h = apply(params_, st.norm, h);
      if (st.activation) h = ops::leaky_relu(h, cfg_.slope);
    }
    maps.push_back(h);
  }
  return maps;
}

// ------------------------------------------------------------- LatentEncoder

template <typename T>
LatentEncoder<T> LatentEncoder<T>::build(const EncoderConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  LatentEncoder e;
  e.cfg_ = cfg;
  Rng rng(seed);
  Builder<T> b(e.params_, rng);
  std::size_t width = std::min(cfg.base_width, cfg.max_width);
  e.stages_.emplace_back(b.conv("E.stem.conv", cfg.in_channels, width, 7, 1, 3, true),
                         b.cbin("E.stem.cbin", width, cfg.code_dim));
  for (std::size_t i = 0; i < cfg.n_down; ++i) {
    const std::string p = "E.down." + std::to_string(i);
    const std::size_t next = std::min(width * 2, cfg.max_width);
    e.stages_.emplace_back(b.conv(p + ".conv", width, next, 3, 2, 1, true),
                           b.cbin(p + ".cbin", next, cfg.code_dim));
    width = next;
  }
  e.mu_head_ = b.linear("E.mu", width, cfg.latent_dim);
  e.logvar_head_ = b.linear("E.logvar", width, cfg.latent_dim);
  return e;
}

template <typename T>
LatentDistribution<T> LatentEncoder<T>::forward(const Var<T>& x, const Var<T>& domain_code) const {
  const Shape& s = x.shape();
  if (s.size() != 4 || s[1] != cfg_.in_channels) {
    throw ShapeError("encoder input " + shape_string(s) + " has wrong channel count");
  }
  if (domain_code.shape() != Shape{s[0], cfg_.code_dim}) {
    throw ShapeError("encoder code " + shape_string(domain_code.shape()) + " expected [" +
                     std::to_string(s[0]) + "," + std::to_string(cfg_.code_dim) + "]");
  }
  // Every stride-2 stage input must exceed its reflection pad of 1.
  const std::size_t min_size = std::max<std::size_t>(std::size_t{1} << cfg_.n_down, 4);
  if (std::min(s[2], s[3]) < min_size) {
    throw ShapeError("encoder input " + shape_string(s) + " too small for " +
                     std::to_string(cfg_.n_down) + " stride-2 stages");
  }
  Var<T> h = x;
  for (const auto& [conv, norm] : stages_) {
    h = ops::relu(apply(params_, norm, apply(params_, conv, h), domain_code));
  }
  Var<T> pooled = ops::global_avg_pool(h);
  return {ops::linear(pooled, params_[mu_head_.weight], params_[mu_head_.bias]),
          ops::linear(pooled, params_[logvar_head_.weight], params_[logvar_head_.bias])};
}

template <typename T>
Tensor<T> gaussian_tensor(Shape shape, Rng& rng) {
  Tensor<T> t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<T>(gaussian(rng));
  return t;
}

template <typename T>
Var<T> reparameterize(const LatentDistribution<T>& dist, Rng& rng) {
  return ops::reparameterize(dist.mu, dist.logvar, gaussian_tensor<T>(dist.mu.shape(), rng));
}

template class Generator<float>;
template class Generator<double>;
template class MultiScaleDiscriminator<float>;
template class MultiScaleDiscriminator<double>;
template class LatentEncoder<float>;
template class LatentEncoder<double>;
template Tensor<float> gaussian_tensor<float>(Shape, Rng&);
template Tensor<double> gaussian_tensor<double>(Shape, Rng&);
template Var<float> reparameterize<float>(const LatentDistribution<float>&, Rng&);
template Var<double> reparameterize<double>(const LatentDistribution<double>&, Rng&);

}  // namespace singlegan
