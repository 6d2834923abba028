#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dmvc/error.hpp"
#include "dmvc/numgrad/tensor.hpp"

namespace dmvc::ng {

/// One trainable tensor plus its gradient accumulator and Adam moments.
/// All four tensors always share the value's shape.
struct Parameter {
  Tensor value;
  Tensor grad;
  Tensor first_moment;
  Tensor second_moment;
  bool trainable = true;

  explicit Parameter(Tensor init)
      : value(std::move(init)),
        grad(value.shape()),
        first_moment(value.shape()),
        second_moment(value.shape()) {}
};

/// Named parameters, kept in name order so iteration and serialization are stable.
class ParamStore {
 public:
  Parameter& add(const std::string& name, Tensor init) {
    if (entries_.contains(name)) throw UsageError("parameter '" + name + "' already exists");
    return entries_.emplace(name, Parameter(std::move(init))).first->second;
  }

  bool contains(const std::string& name) const { return entries_.contains(name); }

  Parameter& at(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw UsageError("unknown parameter '" + name + "'");
    return it->second;
  }
  const Parameter& at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw UsageError("unknown parameter '" + name + "'");
    return it->second;
  }

  const Tensor& value(const std::string& name) const { return at(name).value; }

  /// Replaces a value in place; the shape must not change.
  void set_value(const std::string& name, Tensor v) {
    auto& p = at(name);
    if (v.shape() != p.value.shape()) {
      throw ConfigError("parameter '" + name + "' has shape " + shape_string(p.value.shape()) +
                        ", got " + shape_string(v.shape()));
    }
    p.value = std::move(v);
  }

  void zero_grads() {
    for (auto& [_, p] : entries_) p.grad.fill(0.0);
  }

  /// Clears both Adam moments and the step counter.
  void reset_optimizer() {
    for (auto& [_, p] : entries_) {
      p.first_moment.fill(0.0);
      p.second_moment.fill(0.0);
    }
    step_ = 0;
  }

  void set_trainable_prefix(const std::string& prefix, bool trainable) {
    for (auto& [name, p] : entries_)
      if (name.starts_with(prefix)) p.trainable = trainable;
  }

  std::uint64_t step() const { return step_; }
  void set_step(std::uint64_t s) { step_ = s; }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [name, _] : entries_) out.push_back(name);
    return out;
  }

  std::size_t size() const { return entries_.size(); }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  /// L2 norm of every parameter value, for diagnostics.
  std::map<std::string, double> value_norms() const {
    std::map<std::string, double> out;
    for (const auto& [name, p] : entries_) out[name] = std::sqrt(p.value.squared_norm());
    return out;
  }

 private:
  std::map<std::string, Parameter> entries_;
  std::uint64_t step_ = 0;
};

}  // namespace dmvc::ng
