#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "singlegan/networks.hpp"

namespace singlegan {

struct LossWeights {
  double lambda_cyc = 10.0;
  double lambda_kl = 0.1;
  double lambda_reg = 0.5;

  void validate() const;

  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

// Named scalars from one training step. Serialization uses a fixed key
// order: g_adv.*, d_adv.*, cyc, reg, kl, rec, total_g, total_d.
class LossReport {
 public:
  void set(const std::string& name, double value);
  std::optional<double> get(const std::string& name) const;
  bool contains(const std::string& name) const { return get(name).has_value(); }
  // Keys matching `prefix` (e.g. "d_adv.").
  std::size_t count_prefix(const std::string& prefix) const;
  // Name of the first non-finite entry, if any.
  std::optional<std::string> first_non_finite() const;

  const std::vector<std::pair<std::string, double>>& entries() const { return entries_; }

  // "step=12 regime=base g_adv.B=0.25 ... total_d=0.5"
  std::string to_log_line(long long step, const std::string& regime) const;

  friend bool operator==(const LossReport&, const LossReport&) = default;

 private:
  std::vector<std::pair<std::string, double>> entries_;
};

namespace objectives {

// mean over scales of [ mean((real - 1)^2) + mean(fake^2) ].
template <typename T>
Var<T> lsgan_d_loss(std::span<const Var<T>> real_maps, std::span<const Var<T>> fake_maps);

// mean over scales of mean((fake - 1)^2).
template <typename T>
Var<T> lsgan_g_loss(std::span<const Var<T>> fake_maps);

// Mean absolute difference.
template <typename T>
Var<T> cycle_loss(const Var<T>& x, const Var<T>& x_cycled);

// Mean absolute difference between injected and recovered latent codes.
template <typename T>
Var<T> latent_regression_loss(const Var<T>& c, const Var<T>& c_hat);

// KL(N(mu, exp(logvar)) || N(0, I)), summed over dims, averaged over batch.
template <typename T>
Var<T> kl_loss(const LatentDistribution<T>& dist);

// Sum over (target, generated) pairs of the mean absolute difference.
template <typename T>
Var<T> paired_recon_loss(std::span<const std::pair<Var<T>, Var<T>>> pairs);

}  // namespace objectives
}  // namespace singlegan
