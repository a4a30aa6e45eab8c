#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace granorm {

inline constexpr std::string_view kUnknown = "<unk>";

/// Encoder-side vocabulary; index 0 is always `<unk>`.
class SourceVocab {
 public:
  SourceVocab();
  explicit SourceVocab(std::vector<std::string> tokens);

  int id(std::string_view token) const;
  bool contains(std::string_view token) const;
  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  bool operator==(const SourceVocab& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

/// Tokens seen at least `min_count` times, sorted lexicographically.
std::vector<std::string> frequent_tokens(std::span<const std::vector<std::string>> streams, int min_count);

}  // namespace granorm
