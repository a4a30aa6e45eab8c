#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "granorm/tensor.hpp"

namespace granorm {

/// Named parameter tensors kept sorted by name, so iteration order (and the
/// index of every entry) depends only on the set of names.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed = 0) : seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  void add(std::string name, Tensor value);
  /// Adds a tensor drawn uniformly from (-limit, limit) by a generator seeded
  /// from (seed, name). Values are rounded to float precision.
  const Tensor& add_uniform(std::string name, Tensor::Shape shape, double limit = 0.1);

  const std::string& name(std::size_t i) const { return entries_[i].name; }
  const Tensor& value(std::size_t i) const { return entries_[i].value; }
  Tensor& value(std::size_t i) { return entries_[i].value; }
  std::optional<std::size_t> index_of(std::string_view name) const;
  const Tensor& at(std::string_view name) const;
  Tensor& at(std::string_view name);

  std::size_t parameter_count() const noexcept;

  /// Names whose presence or shape differ between the two stores, sorted.
  std::vector<std::string> layout_mismatches(const ParamStore& other) const;

  bool operator==(const ParamStore& other) const;

 private:
  struct Entry {
    std::string name;
    Tensor value;
    bool operator==(const Entry&) const = default;
  };
  std::vector<Entry> entries_;
  std::uint64_t seed_;
};

/// 64-bit FNV-1a; used to derive named sub-generator seeds.
std::uint64_t fnv1a64(std::string_view text) noexcept;

/// Seed for the named sub-generator `stream` of a run seeded with `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream) noexcept;

}  // namespace granorm
