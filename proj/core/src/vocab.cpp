#include "granorm/vocab.hpp"

#include <map>

#include "granorm/error.hpp"

namespace granorm {

SourceVocab::SourceVocab() : SourceVocab(std::vector<std::string>{}) {}

SourceVocab::SourceVocab(std::vector<std::string> tokens) {
  tokens_.emplace_back(kUnknown);
  index_.emplace(std::string(kUnknown), 0);
  for (auto& t : tokens) {
    if (t == kUnknown) continue;
    if (!index_.emplace(t, static_cast<int>(tokens_.size())).second) {
      throw Error("duplicate source vocabulary token '" + t + "'");
    }
    tokens_.push_back(std::move(t));
  }
}

int SourceVocab::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? 0 : it->second;
}

bool SourceVocab::contains(std::string_view token) const { return index_.contains(std::string(token)); }

std::vector<std::string> frequent_tokens(std::span<const std::vector<std::string>> streams, int min_count) {
  std::map<std::string, int> counts;
  for (const auto& s : streams) {
    for (const auto& t : s) ++counts[t];
  }
  std::vector<std::string> out;
  for (const auto& [tok, n] : counts) {
    if (n >= min_count) out.push_back(tok);
  }
  return out;
}

}  // namespace granorm
