#pragma once

#include <cstdint>
#include <vector>

#include "singlegan/parameters.hpp"

namespace singlegan {

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;

  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

// Adam with bias correction. Moment buffers are aligned index-for-index with
// the ParameterSet given at construction; parameters without an accumulated
// gradient are left untouched by step().
template <typename T>
class Adam {
 public:
  Adam() = default;
  Adam(const AdamConfig& cfg, const ParameterSet<T>& params);

  void step(ParameterSet<T>& params);

  const AdamConfig& config() const { return cfg_; }
  std::int64_t steps() const { return steps_; }
  const std::vector<Tensor<T>>& first_moments() const { return m_; }
  const std::vector<Tensor<T>>& second_moments() const { return v_; }

  // Replaces the optimizer state; shapes must match the current buffers.
  void restore(std::int64_t steps, std::vector<Tensor<T>> m, std::vector<Tensor<T>> v);

 private:
  AdamConfig cfg_;
  std::int64_t steps_ = 0;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace singlegan
