#include "singlegan/data.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "singlegan/errors.hpp"

namespace singlegan {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

float to_unit(std::uint8_t v) { return static_cast<float>(v) / 127.5f - 1.0f; }

std::uint8_t to_byte(float v) {
  const float scaled = std::round((v + 1.0f) * 127.5f);
  return static_cast<std::uint8_t>(std::clamp(scaled, 0.0f, 255.0f));
}

// Sample positions and weights for one axis of a half-pixel-center resize.
struct AxisTaps {
  std::vector<std::size_t> lo, hi;
  std::vector<float> frac;
};

AxisTaps axis_taps(std::size_t in, std::size_t out) {
  AxisTaps t;
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t i = 0; i < out; ++i) {
    double src = (static_cast<double>(i) + 0.5) * ratio - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const auto lo = static_cast<std::size_t>(std::floor(src));
    t.lo.push_back(lo);
    t.hi.push_back(std::min(lo + 1, in - 1));
    t.frac.push_back(static_cast<float>(src - static_cast<double>(lo)));
  }
  return t;
}

bool is_image_file(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::array<float, 3> rotate_hue(const std::array<float, 3>& rgb, double degrees) {
  const float r = rgb[0], g = rgb[1], b = rgb[2];
  const float mx = std::max({r, g, b}), mn = std::min({r, g, b});
  const float delta = mx - mn;
  double h = 0;
  if (delta > 0) {
    if (mx == r) h = 60.0 * std::fmod((g - b) / delta, 6.0);
    else if (mx == g) h = 60.0 * ((b - r) / delta + 2.0);
    else h = 60.0 * ((r - g) / delta + 4.0);
  }
  const double s = mx > 0 ? delta / mx : 0.0, v = mx;
  h = std::fmod(h + degrees, 360.0);
  if (h < 0) h += 360.0;
  const double c = v * s;
  const double x = c * (1 - std::abs(std::fmod(h / 60.0, 2.0) - 1));
  const double m = v - c;
  double rp = 0, gp = 0, bp = 0;
  switch (static_cast<int>(h / 60.0) % 6) {
    case 0: rp = c, gp = x; break;
    case 1: rp = x, gp = c; break;
    case 2: gp = c, bp = x; break;
    case 3: gp = x, bp = c; break;
    case 4: rp = x, bp = c; break;
    default: rp = c, bp = x; break;
  }
  return {static_cast<float>(rp + m), static_cast<float>(gp + m), static_cast<float>(bp + m)};
}

bool inside(ShapeKind kind, double dx, double dy, double r) {
  if (r <= 0) return false;
  switch (kind) {
    case ShapeKind::square: return std::abs(dx) <= r && std::abs(dy) <= r;
    case ShapeKind::circle: return dx * dx + dy * dy <= r * r;
    case ShapeKind::diamond: return std::abs(dx) + std::abs(dy) <= r;
    case ShapeKind::triangle: return dy >= -r && dy <= r && std::abs(dx) <= (dy + r) / 2.0;
    case ShapeKind::any: break;
  }
  return false;
}

std::uint8_t unit_to_byte(float v) {
  return static_cast<std::uint8_t>(std::clamp(std::round(v * 255.0f), 0.0f, 255.0f));
}

}  // namespace

// ------------------------------------------------------------ DomainDataset

DomainDataset DomainDataset::from_images(std::string name, std::size_t image_size,
                                         std::vector<Tensor<float>> images) {
  if (images.empty()) throw DataError("domain '" + name + "' has no images");
  for (const auto& img : images) {
    if (img.shape() != Shape{3, image_size, image_size}) {
      throw ShapeError("domain '" + name + "' image has shape " + shape_string(img.shape()));
    }
  }
  DomainDataset ds;
  ds.name_ = std::move(name);
  ds.image_size_ = image_size;
  ds.images_ = std::move(images);
  return ds;
}

DomainDataset DomainDataset::from_paths(std::string name, std::size_t image_size, bool augment,
                                        std::vector<std::filesystem::path> paths) {
  if (paths.empty()) throw DataError("domain '" + name + "' has no images");
  DomainDataset ds;
  ds.name_ = std::move(name);
  ds.image_size_ = image_size;
  ds.augment_ = augment;
  ds.paths_ = std::move(paths);
  return ds;
}

Tensor<float> DomainDataset::get(std::size_t index, Rng& rng) const {
  if (index >= size()) throw ArgumentError("dataset index " + std::to_string(index) + " out of range");
  if (!paths_.empty()) {
    return preprocess(read_file_bytes(paths_[index]), paths_[index].string(), image_size_, augment_, rng);
  }
  if (augment_ && uniform01(rng) < 0.5) return flip_horizontal(images_[index]);
  return images_[index];
}

Tensor<float> DomainDataset::get(std::size_t index) const {
  if (index >= size()) throw ArgumentError("dataset index " + std::to_string(index) + " out of range");
  if (!paths_.empty()) {
    Rng unused(0);
    return preprocess(read_file_bytes(paths_[index]), paths_[index].string(), image_size_, false, unused);
  }
  return images_[index];
}

// ------------------------------------------------------------ preprocessing

Tensor<float> preprocess(const RgbImage& image, std::size_t image_size, bool augment, Rng& rng) {
  if (image.width == 0 || image.height == 0) throw DataError("empty image");
  const std::size_t s = image_size;
  Tensor<float> out(Shape{3, s, s});
  if (image.width == s && image.height == s) {
    for (std::size_t y = 0; y < s; ++y) {
      for (std::size_t x = 0; x < s; ++x) {
        for (std::size_t c = 0; c < 3; ++c) out[(c * s + y) * s + x] = to_unit(image.at(x, y)[c]);
      }
    }
  } else {
    const AxisTaps tx = axis_taps(image.width, s), ty = axis_taps(image.height, s);
    for (std::size_t y = 0; y < s; ++y) {
      for (std::size_t x = 0; x < s; ++x) {
        for (std::size_t c = 0; c < 3; ++c) {
          const float a = image.at(tx.lo[x], ty.lo[y])[c], b = image.at(tx.hi[x], ty.lo[y])[c];
          const float d = image.at(tx.lo[x], ty.hi[y])[c], e = image.at(tx.hi[x], ty.hi[y])[c];
          const float top = a + tx.frac[x] * (b - a);
          const float bottom = d + tx.frac[x] * (e - d);
          const float v = top + ty.frac[y] * (bottom - top);
          out[(c * s + y) * s + x] = v / 127.5f - 1.0f;
        }
      }
    }
  }
  if (augment && uniform01(rng) < 0.5) return flip_horizontal(out);
  return out;
}

Tensor<float> preprocess(std::span<const std::uint8_t> bytes, const std::string& label,
                         std::size_t image_size, bool augment, Rng& rng) {
  return preprocess(decode_image(bytes, label), image_size, augment, rng);
}

Tensor<float> flip_horizontal(const Tensor<float>& chw) {
  const std::size_t c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
  Tensor<float> out(chw.shape());
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) out[(k * h + y) * w + x] = chw[(k * h + y) * w + (w - 1 - x)];
    }
  }
  return out;
}

RgbImage tensor_to_image(const Tensor<float>& chw) {
  if (chw.rank() != 3 || chw.dim(0) != 3) throw ShapeError("tensor_to_image expects [3,H,W]");
  const std::size_t h = chw.dim(1), w = chw.dim(2);
  RgbImage img(w, h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) img.at(x, y)[c] = to_byte(chw[(c * h + y) * w + x]);
    }
  }
  return img;
}

DomainDataset load_domain_dataset(const std::filesystem::path& dir, std::size_t image_size,
                                  bool augment, std::ostream& warnings) {
  if (!std::filesystem::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> candidates;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) candidates.push_back(entry.path());
  }
  std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
    return a.filename().string() < b.filename().string();
  });
  std::vector<std::filesystem::path> readable;
  for (const auto& p : candidates) {
    try {
      read_image(p);
      readable.push_back(p);
    } catch (const DataError& e) {
      warnings << "warning: skipping " << p.string() << ": " << e.what() << "\n";
    }
  }
  if (readable.empty()) throw DataError("no readable images in " + dir.string());
  return DomainDataset::from_paths(dir.filename().string(), image_size, augment, std::move(readable));
}

Tensor<float> sample_batch(const DomainDataset& ds, std::size_t batch_size, Rng& rng) {
  if (batch_size == 0) throw ArgumentError("batch_size must be at least 1");
  std::vector<Tensor<float>> samples;
  samples.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) samples.push_back(ds.get(uniform_index(rng, ds.size()), rng));
  return stack<float>(samples);
}

Tensor<float> gather_batch(const DomainDataset& ds, std::span<const std::size_t> indices) {
  std::vector<Tensor<float>> samples;
  for (const std::size_t i : indices) samples.push_back(ds.get(i));
  return stack<float>(samples);
}

// ------------------------------------------------------------ synthetic data

void SyntheticSpec::validate() const {
  if (image_size < 16) throw ConfigError("synthetic.image_size must be at least 16");
  if (n_images == 0) throw ConfigError("synthetic.n_images must be positive");
  if (domains.size() < 2) throw ConfigError("synthetic.domains needs at least 2 recipes");
  for (std::size_t i = 0; i < domains.size(); ++i) {
    const auto& d = domains[i];
    const std::string field = "synthetic.domains[" + std::to_string(i) + "]";
    if (d.name.empty()) throw ConfigError(field + ".name must be non-empty");
    for (std::size_t j = 0; j < i; ++j) {
      if (domains[j].name == d.name) throw ConfigError(field + ".name duplicates '" + d.name + "'");
    }
    for (const float v : d.background) {
      if (!(v >= 0 && v <= 1)) throw ConfigError(field + ".background must be in [0,1]");
    }
    for (const float v : d.color) {
      if (!(v >= 0 && v <= 1)) throw ConfigError(field + ".color must be in [0,1]");
    }
    if (!(d.hue_jitter_degrees >= 0 && d.hue_jitter_degrees <= 180)) {
      throw ConfigError(field + ".hue_jitter must be in [0,180]");
    }
  }
}

std::vector<std::vector<RgbImage>> render_synthetic_images(const SyntheticSpec& spec, Rng& rng) {
  spec.validate();
  const std::uint64_t geometry_seed = rng();
  const double s = static_cast<double>(spec.image_size);
  std::vector<std::vector<RgbImage>> out;
  for (std::size_t d = 0; d < spec.domains.size(); ++d) {
    const DomainRecipe& recipe = spec.domains[d];
    Rng appearance(splitmix64(rng()));
    std::vector<RgbImage> images;
    for (std::size_t k = 0; k < spec.n_images; ++k) {
      std::uint64_t key = splitmix64(geometry_seed ^ splitmix64(k));
      if (!spec.aligned) key = splitmix64(key ^ (d + 1));
      Rng geom(key);
      const double cx = s * (0.35 + 0.3 * uniform01(geom));
      const double cy = s * (0.35 + 0.3 * uniform01(geom));
      const double radius = s * (0.2 + 0.1 * uniform01(geom));
      ShapeKind kind = recipe.shape;
      if (kind == ShapeKind::any) kind = static_cast<ShapeKind>(uniform_index(geom, 4));
      std::array<float, 3> color = recipe.color;
      if (recipe.hue_jitter_degrees > 0) {
        color = rotate_hue(color, (2.0 * uniform01(appearance) - 1.0) * recipe.hue_jitter_degrees);
      }
      const double thickness = std::max(1.5, s / 16.0);
      RgbImage img(spec.image_size, spec.image_size);
      for (std::size_t y = 0; y < spec.image_size; ++y) {
        for (std::size_t x = 0; x < spec.image_size; ++x) {
          const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
          bool fg = inside(kind, dx, dy, radius);
          if (fg && recipe.fill == FillStyle::outline) fg = !inside(kind, dx, dy, radius - thickness);
          const auto& c = fg ? color : recipe.background;
          for (std::size_t ch = 0; ch < 3; ++ch) img.at(x, y)[ch] = unit_to_byte(c[ch]);
        }
      }
      images.push_back(std::move(img));
    }
    out.push_back(std::move(images));
  }
  return out;
}

DatasetMap make_synthetic_domains(const SyntheticSpec& spec, Rng& rng) {
  auto rendered = render_synthetic_images(spec, rng);
  DatasetMap out;
  Rng unused(0);
  for (std::size_t d = 0; d < spec.domains.size(); ++d) {
    std::vector<Tensor<float>> images;
    for (const auto& img : rendered[d]) images.push_back(preprocess(img, spec.image_size, false, unused));
    out.emplace(spec.domains[d].name,
                DomainDataset::from_images(spec.domains[d].name, spec.image_size, std::move(images)));
  }
  return out;
}

ShapeKind parse_shape_kind(const std::string& s) {
  if (s == "square") return ShapeKind::square;
  if (s == "circle") return ShapeKind::circle;
  if (s == "triangle") return ShapeKind::triangle;
  if (s == "diamond") return ShapeKind::diamond;
  if (s == "any") return ShapeKind::any;
  throw ConfigError("unknown shape '" + s + "' (square|circle|triangle|diamond|any)");
}

FillStyle parse_fill_style(const std::string& s) {
  if (s == "filled") return FillStyle::filled;
  if (s == "outline") return FillStyle::outline;
  throw ConfigError("unknown fill '" + s + "' (filled|outline)");
}

std::string to_string(ShapeKind k) {
  switch (k) {
    case ShapeKind::square: return "square";
    case ShapeKind::circle: return "circle";
    case ShapeKind::triangle: return "triangle";
    case ShapeKind::diamond: return "diamond";
    case ShapeKind::any: return "any";
  }
  return "square";
}

std::string to_string(FillStyle f) { return f == FillStyle::filled ? "filled" : "outline"; }

// ------------------------------------------------------------ prefetch

BatchPrefetcher::BatchPrefetcher(const DatasetMap& datasets, std::size_t batch_size,
                                 std::uint64_t seed, std::size_t capacity)
    : datasets_(datasets), batch_size_(batch_size), rng_(seed), capacity_(std::max<std::size_t>(1, capacity)) {
  worker_ = std::thread([this] { run(); });
}

BatchPrefetcher::~BatchPrefetcher() {
  {
    std::lock_guard lock(mutex_);
    stop_ = true;
  }
  cv_.notify_all();
  worker_.join();
}

void BatchPrefetcher::run() {
  try {
    for (;;) {
      std::map<std::string, Tensor<float>> item;
      for (const auto& [name, ds] : datasets_) item.emplace(name, sample_batch(ds, batch_size_, rng_));
      std::unique_lock lock(mutex_);
      cv_.wait(lock, [this] { return stop_ || queue_.size() < capacity_; });
      if (stop_) return;
      queue_.push_back(std::move(item));
      cv_.notify_all();
    }
  } catch (...) {
    std::lock_guard lock(mutex_);
    error_ = std::current_exception();
    cv_.notify_all();
  }
}

std::map<std::string, Tensor<float>> BatchPrefetcher::next() {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [this] { return !queue_.empty() || error_; });
  if (queue_.empty() && error_) std::rethrow_exception(error_);
  auto item = std::move(queue_.front());
  queue_.pop_front();
  cv_.notify_all();
  return item;
}

}  // namespace singlegan
