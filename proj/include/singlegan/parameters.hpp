#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "singlegan/autograd.hpp"

namespace singlegan {

// Ordered, named collection of trainable leaves. Copying deep-copies the
// values, so networks holding a ParameterSet have value semantics.
template <typename T>
class ParameterSet {
 public:
  struct Entry {
    std::string name;
    Var<T> var;
  };

  ParameterSet() = default;
  ParameterSet(const ParameterSet& other) { *this = other; }
  ParameterSet& operator=(const ParameterSet& other) {
    if (this == &other) return *this;
    entries_.clear();
    for (const auto& e : other.entries_) {
      entries_.push_back({e.name, Var<T>(e.var.value(), e.var.requires_grad())});
    }
    return *this;
  }
  ParameterSet(ParameterSet&&) noexcept = default;
  ParameterSet& operator=(ParameterSet&&) noexcept = default;

  std::size_t add(std::string name, Tensor<T> init) {
    for (const auto& e : entries_) {
      if (e.name == name) throw ArgumentError("duplicate parameter name " + name);
    }
    entries_.push_back({std::move(name), Var<T>(std::move(init), true)});
    return entries_.size() - 1;
  }

  std::size_t size() const { return entries_.size(); }
  const Var<T>& operator[](std::size_t i) const { return entries_[i].var; }
  Var<T>& operator[](std::size_t i) { return entries_[i].var; }
  const Entry& entry(std::size_t i) const { return entries_[i]; }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  const Var<T>* find(const std::string& name) const {
    for (const auto& e : entries_) {
      if (e.name == name) return &e.var;
    }
    return nullptr;
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.var.numel();
    return n;
  }

  void set_requires_grad(bool on) {
    for (auto& e : entries_) e.var.set_requires_grad(on);
  }
  void zero_grad() {
    for (auto& e : entries_) e.var.zero_grad();
  }

  // Overwrites values by name; every parameter must be present with the
  // stored shape.
  void load(const std::map<std::string, Tensor<T>>& values) {
    for (auto& e : entries_) {
      auto it = values.find(e.name);
      if (it == values.end()) throw DataError("missing parameter " + e.name);
      if (it->second.shape() != e.var.shape()) {
        throw ShapeError("parameter " + e.name + " has shape " + shape_string(it->second.shape()) +
                         ", expected " + shape_string(e.var.shape()));
      }
      e.var.mutable_value() = it->second;
    }
  }

  template <typename U>
  ParameterSet<U> cast() const {
    ParameterSet<U> out;
    for (const auto& e : entries_) out.add(e.name, e.var.value().template cast<U>());
    return out;
  }

 private:
  std::vector<Entry> entries_;
};

}  // namespace singlegan
