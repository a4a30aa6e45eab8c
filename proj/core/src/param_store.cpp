#include "granorm/param_store.hpp"

#include <algorithm>
#include <random>

#include "granorm/error.hpp"

namespace granorm {

std::uint64_t fnv1a64(std::string_view text) noexcept {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream) noexcept {
  // splitmix64 finalizer over the combined value
  std::uint64_t z = seed ^ fnv1a64(stream);
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

void ParamStore::add(std::string name, Tensor value) {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), name,
                             [](const Entry& e, const std::string& n) { return e.name < n; });
  if (it != entries_.end() && it->name == name) throw Error("duplicate parameter '" + name + "'");
  entries_.insert(it, Entry{std::move(name), std::move(value)});
}

const Tensor& ParamStore::add_uniform(std::string name, Tensor::Shape shape, double limit) {
  std::mt19937_64 rng(derive_seed(seed_, name));
  Tensor t(std::move(shape));
  for (auto& x : t.data()) {
    double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    x = static_cast<double>(static_cast<float>(-limit + 2.0 * limit * u));
  }
  std::string key = name;
  add(std::move(name), std::move(t));
  return at(key);
}

std::optional<std::size_t> ParamStore::index_of(std::string_view name) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), name,
                             [](const Entry& e, std::string_view n) { return e.name < n; });
  if (it == entries_.end() || it->name != name) return std::nullopt;
  return static_cast<std::size_t>(it - entries_.begin());
}

const Tensor& ParamStore::at(std::string_view name) const {
  auto i = index_of(name);
  if (!i) throw Error("unknown parameter '" + std::string(name) + "'");
  return entries_[*i].value;
}

Tensor& ParamStore::at(std::string_view name) {
  auto i = index_of(name);
  if (!i) throw Error("unknown parameter '" + std::string(name) + "'");
  return entries_[*i].value;
}

std::size_t ParamStore::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

std::vector<std::string> ParamStore::layout_mismatches(const ParamStore& other) const {
  std::vector<std::string> out;
  for (const auto& e : entries_) {
    auto j = other.index_of(e.name);
    if (!j || other.value(*j).shape() != e.value.shape()) out.push_back(e.name);
  }
  for (const auto& e : other.entries_) {
    if (!index_of(e.name)) out.push_back(e.name);
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool ParamStore::operator==(const ParamStore& other) const { return entries_ == other.entries_; }

}  // namespace granorm
