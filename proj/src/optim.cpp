#include "singlegan/optim.hpp"

#include <cmath>

namespace singlegan {

void AdamConfig::validate() const {
  if (!(lr > 0)) throw ConfigError("optimizer.lr must be > 0");
  if (!(beta1 >= 0 && beta1 < 1)) throw ConfigError("optimizer.beta1 must be in [0, 1)");
  if (!(beta2 >= 0 && beta2 < 1)) throw ConfigError("optimizer.beta2 must be in [0, 1)");
  if (!(eps > 0)) throw ConfigError("optimizer.eps must be > 0");
}

template <typename T>
Adam<T>::Adam(const AdamConfig& cfg, const ParameterSet<T>& params) : cfg_(cfg) {
  cfg_.validate();
  for (const auto& e : params) {
    m_.emplace_back(e.var.shape());
    v_.emplace_back(e.var.shape());
  }
}

template <typename T>
void Adam<T>::step(ParameterSet<T>& params) {
  if (params.size() != m_.size()) throw ShapeError("Adam: parameter set changed size");
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double bc1 = 1.0 - std::pow(cfg_.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, t);
  const T step_size = static_cast<T>(cfg_.lr / bc1);
  const T inv_sqrt_bc2 = static_cast<T>(1.0 / std::sqrt(bc2));
  const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
  const T eps = static_cast<T>(cfg_.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Var<T>& p = params[i];
    if (!p.requires_grad() || !p.has_grad()) continue;
    const Tensor<T>& g = p.node()->grad;
    Tensor<T>& value = p.mutable_value();
    T* m = m_[i].data();
    T* v = v_[i].data();
    for (std::size_t k = 0; k < value.numel(); ++k) {
      m[k] = b1 * m[k] + (T(1) - b1) * g[k];
      v[k] = b2 * v[k] + (T(1) - b2) * g[k] * g[k];
      value[k] -= step_size * m[k] / (std::sqrt(v[k]) * inv_sqrt_bc2 + eps);
    }
  }
}

template <typename T>
void Adam<T>::restore(std::int64_t steps, std::vector<Tensor<T>> m, std::vector<Tensor<T>> v) {
  if (m.size() != m_.size() || v.size() != v_.size()) throw ShapeError("Adam: state size mismatch");
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i].shape() != m_[i].shape() || v[i].shape() != v_[i].shape()) {
      throw ShapeError("Adam: moment shape mismatch at index " + std::to_string(i));
    }
  }
  steps_ = steps;
  m_ = std::move(m);
  v_ = std::move(v);
}

template class Adam<float>;
template class Adam<double>;

}  // namespace singlegan
