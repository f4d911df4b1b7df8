#include "singlegan/objectives.hpp"

#include <cmath>
#include <cstdio>

#include "singlegan/ops.hpp"

namespace singlegan {

void LossWeights::validate() const {
  if (!(lambda_cyc >= 0)) throw ConfigError("weights.lambda_cyc must be >= 0");
  if (!(lambda_kl >= 0)) throw ConfigError("weights.lambda_kl must be >= 0");
  if (!(lambda_reg >= 0)) throw ConfigError("weights.lambda_reg must be >= 0");
}

namespace {

int key_rank(const std::string& name) {
  if (name.rfind("g_adv", 0) == 0) return 0;
  if (name.rfind("d_adv", 0) == 0) return 1;
  static const char* fixed[] = {"cyc", "reg", "kl", "rec", "total_g", "total_d"};
  for (int i = 0; i < 6; ++i) {
    if (name == fixed[i]) return 2 + i;
  }
  return 8;
}

}  // namespace

void LossReport::set(const std::string& name, double value) {
  for (auto& [k, v] : entries_) {
    if (k == name) {
      v = value;
      return;
    }
  }
  // Insert after every key of lower or equal rank to keep canonical order.
  const int rank = key_rank(name);
  auto it = entries_.begin();
  while (it != entries_.end() && key_rank(it->first) <= rank) ++it;
  entries_.insert(it, {name, value});
}

std::optional<double> LossReport::get(const std::string& name) const {
  for (const auto& [k, v] : entries_) {
    if (k == name) return v;
  }
  return std::nullopt;
}

std::size_t LossReport::count_prefix(const std::string& prefix) const {
  std::size_t n = 0;
  for (const auto& [k, v] : entries_) n += k.rfind(prefix, 0) == 0 ? 1 : 0;
  return n;
}

std::optional<std::string> LossReport::first_non_finite() const {
  for (const auto& [k, v] : entries_) {
    if (!std::isfinite(v)) return k;
  }
  return std::nullopt;
}

std::string LossReport::to_log_line(long long step, const std::string& regime) const {
  std::string line = "step=" + std::to_string(step) + " regime=" + regime;
  char buf[64];
  for (const auto& [k, v] : entries_) {
    std::snprintf(buf, sizeof buf, "%.9g", v);
    line += " " + k + "=" + buf;
  }
  return line;
}

namespace objectives {

template <typename T>
Var<T> lsgan_d_loss(std::span<const Var<T>> real_maps, std::span<const Var<T>> fake_maps) {
  if (real_maps.empty() || fake_maps.empty()) throw ArgumentError("lsgan_d_loss: empty map list");
  if (real_maps.size() != fake_maps.size()) {
    throw ArgumentError("lsgan_d_loss: real and fake scale counts differ");
  }
  std::vector<Var<T>> terms;
  for (std::size_t s = 0; s < real_maps.size(); ++s) {
    terms.push_back(ops::add(ops::mean_squared_to(real_maps[s], 1.0),
                             ops::mean_squared_to(fake_maps[s], 0.0)));
  }
  return ops::scale(ops::sum<T>(terms), 1.0 / static_cast<double>(terms.size()));
}

template <typename T>
Var<T> lsgan_g_loss(std::span<const Var<T>> fake_maps) {
  if (fake_maps.empty()) throw ArgumentError("lsgan_g_loss: empty map list");
  std::vector<Var<T>> terms;
  for (const auto& m : fake_maps) terms.push_back(ops::mean_squared_to(m, 1.0));
  return ops::scale(ops::sum<T>(terms), 1.0 / static_cast<double>(terms.size()));
}

template <typename T>
Var<T> cycle_loss(const Var<T>& x, const Var<T>& x_cycled) {
  return ops::mean_abs_diff(x, x_cycled);
}

template <typename T>
Var<T> latent_regression_loss(const Var<T>& c, const Var<T>& c_hat) {
  return ops::mean_abs_diff(c, c_hat);
}

template <typename T>
Var<T> kl_loss(const LatentDistribution<T>& dist) {
  return ops::kl_to_standard_normal(dist.mu, dist.logvar);
}

template <typename T>
Var<T> paired_recon_loss(std::span<const std::pair<Var<T>, Var<T>>> pairs) {
  if (pairs.empty()) throw ArgumentError("paired_recon_loss: no pairs");
  std::vector<Var<T>> terms;
  for (const auto& [target, generated] : pairs) terms.push_back(ops::mean_abs_diff(target, generated));
  return ops::sum<T>(terms);
}

#define SINGLEGAN_INSTANTIATE(T)                                                           \
  template Var<T> lsgan_d_loss<T>(std::span<const Var<T>>, std::span<const Var<T>>);      \
  template Var<T> lsgan_g_loss<T>(std::span<const Var<T>>);                               \
  template Var<T> cycle_loss<T>(const Var<T>&, const Var<T>&);                            \
  template Var<T> latent_regression_loss<T>(const Var<T>&, const Var<T>&);                \
  template Var<T> kl_loss<T>(const LatentDistribution<T>&);                               \
  template Var<T> paired_recon_loss<T>(std::span<const std::pair<Var<T>, Var<T>>>);

SINGLEGAN_INSTANTIATE(float)
SINGLEGAN_INSTANTIATE(double)

}  // namespace objectives
}  // namespace singlegan
