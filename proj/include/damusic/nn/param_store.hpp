#pragma once

#include <cstddef>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "damusic/errors.hpp"
#include "damusic/linalg.hpp"

namespace damusic::nn {

using ParamId = std::size_t;

/// Named trainable arrays with their gradient and Adam moment buffers.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    std::vector<std::size_t> shape;
    RealVector value;
    RealVector grad;
    RealVector moment1;
    RealVector moment2;
  };

  ParamId add(std::string name, std::vector<std::size_t> shape, RealVector init) {
    const std::size_t count = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
    if (init.size() != count) throw DimensionError("ParamStore::add(" + name + "): init size does not match shape");
    if (index_.contains(name)) throw InvalidInputError("ParamStore::add: duplicate parameter name " + name);
    const ParamId id = entries_.size();
    index_.emplace(name, id);
    entries_.push_back(Entry{std::move(name), std::move(shape), std::move(init), RealVector(count, 0.0),
                             RealVector(count, 0.0), RealVector(count, 0.0)});
    return id;
  }

  std::size_t size() const noexcept { return entries_.size(); }
  Entry& operator[](ParamId id) { return entries_.at(id); }
  const Entry& operator[](ParamId id) const { return entries_.at(id); }

  ParamId id_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw InvalidInputError("ParamStore: no parameter named " + name);
    return it->second;
  }

  std::size_t scalar_count() const noexcept {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
  }

  void zero_grad() {
    for (auto& e : entries_) std::fill(e.grad.begin(), e.grad.end(), 0.0);
  }

  void reset_moments() {
    for (auto& e : entries_) {
      std::fill(e.moment1.begin(), e.moment1.end(), 0.0);
      std::fill(e.moment2.begin(), e.moment2.end(), 0.0);
    }
  }

  /// Flat (entry, offset) addressing over all scalars, in insertion order.
  double& scalar(std::size_t flat) { return locate(flat, &Entry::value); }
  double& scalar_grad(std::size_t flat) { return locate(flat, &Entry::grad); }

  std::vector<Entry>& entries() noexcept { return entries_; }
  const std::vector<Entry>& entries() const noexcept { return entries_; }

 private:
  double& locate(std::size_t flat, RealVector Entry::*buffer) {
    for (auto& e : entries_) {
      if (flat < e.value.size()) return (e.*buffer)[flat];
      flat -= e.value.size();
    }
    throw InvalidInputError("ParamStore: flat index out of range");
  }

  std::vector<Entry> entries_;
  std::unordered_map<std::string, ParamId> index_;
};

}  // namespace damusic::nn
