#pragma once

#include <array>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "singlegan/image_io.hpp"
#include "singlegan/rng.hpp"
#include "singlegan/tensor.hpp"

namespace singlegan {

// Images of one domain, either decoded in memory or as lazily decoded files.
// Immutable after construction.
class DomainDataset {
 public:
  static DomainDataset from_images(std::string name, std::size_t image_size,
                                   std::vector<Tensor<float>> images);
  static DomainDataset from_paths(std::string name, std::size_t image_size, bool augment,
                                  std::vector<std::filesystem::path> paths);

  const std::string& name() const { return name_; }
  std::size_t image_size() const { return image_size_; }
  bool augment() const { return augment_; }
  std::size_t size() const { return paths_.empty() ? images_.size() : paths_.size(); }
  const std::vector<std::filesystem::path>& paths() const { return paths_; }

  // [3, S, S] in [-1, 1]; `rng` drives augmentation only.
  Tensor<float> get(std::size_t index, Rng& rng) const;
  // Without augmentation.
  Tensor<float> get(std::size_t index) const;

 private:
  std::string name_;
  std::size_t image_size_ = 0;
  bool augment_ = false;
  std::vector<Tensor<float>> images_;
  std::vector<std::filesystem::path> paths_;
};

using DatasetMap = std::map<std::string, DomainDataset>;

// Bilinear resize (half-pixel centers) to size x size, map [0,255] -> [-1,1],
// optional horizontal flip with probability 0.5.
Tensor<float> preprocess(const RgbImage& image, std::size_t image_size, bool augment, Rng& rng);
Tensor<float> preprocess(std::span<const std::uint8_t> bytes, const std::string& label,
                         std::size_t image_size, bool augment, Rng& rng);

Tensor<float> flip_horizontal(const Tensor<float>& chw);

// [3,H,W] in [-1,1] -> 8-bit RGB via round((v + 1) * 127.5), clamped.
RgbImage tensor_to_image(const Tensor<float>& chw);

// Lists *.png / *.jpg / *.jpeg in byte-wise lexicographic order. Files that
// fail to decode are reported on `warnings` and skipped.
DomainDataset load_domain_dataset(const std::filesystem::path& dir, std::size_t image_size,
                                  bool augment, std::ostream& warnings);

// Uniform with-replacement draws -> [batch, 3, S, S].
Tensor<float> sample_batch(const DomainDataset& ds, std::size_t batch_size, Rng& rng);
// Batch of the given indices (no augmentation).
Tensor<float> gather_batch(const DomainDataset& ds, std::span<const std::size_t> indices);

// ------------------------------------------------------------- synthetic data

enum class ShapeKind { square, circle, triangle, diamond, any };
enum class FillStyle { filled, outline };

struct DomainRecipe {
  std::string name;
  std::array<float, 3> background{0.15f, 0.15f, 0.15f};  // RGB in [0,1]
  ShapeKind shape = ShapeKind::square;
  FillStyle fill = FillStyle::filled;
  std::array<float, 3> color{0.9f, 0.1f, 0.1f};
  double hue_jitter_degrees = 0.0;  // +/- range applied per image
};

struct SyntheticSpec {
  std::size_t n_images = 64;
  std::size_t image_size = 32;
  std::vector<DomainRecipe> domains;
  // Same geometry for image k in every domain (paired data).
  bool aligned = false;

  void validate() const;
};

// Rendered 8-bit images per domain, in recipe order.
std::vector<std::vector<RgbImage>> render_synthetic_images(const SyntheticSpec& spec, Rng& rng);
DatasetMap make_synthetic_domains(const SyntheticSpec& spec, Rng& rng);

ShapeKind parse_shape_kind(const std::string& s);
FillStyle parse_fill_style(const std::string& s);
std::string to_string(ShapeKind k);
std::string to_string(FillStyle f);

// Background worker that keeps a bounded queue of pre-sampled batches (one
// per domain). Its sampling stream is separate from the training rng, so
// runs using it are not bitwise resumable.
class BatchPrefetcher {
 public:
  BatchPrefetcher(const DatasetMap& datasets, std::size_t batch_size, std::uint64_t seed,
                  std::size_t capacity = 4);
  ~BatchPrefetcher();
  BatchPrefetcher(const BatchPrefetcher&) = delete;
  BatchPrefetcher& operator=(const BatchPrefetcher&) = delete;

  std::map<std::string, Tensor<float>> next();

 private:
  void run();

  const DatasetMap& datasets_;
  std::size_t batch_size_;
  Rng rng_;
  std::size_t capacity_;
  std::deque<std::map<std::string, Tensor<float>>> queue_;
  std::mutex mutex_;
  std::condition_variable cv_;
  bool stop_ = false;
  std::exception_ptr error_;
  std::thread worker_;
};

}  // namespace singlegan
