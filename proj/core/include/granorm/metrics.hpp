#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "granorm/transition.hpp"

namespace granorm {

bool exact_match(const AstNode& pred, const AstNode& gold);

/// Fraction of matching pairs; 0 for an empty list.
double exact_match_accuracy(std::span<const std::pair<AstNode, AstNode>> pairs);

using TokenPair = std::pair<std::vector<std::string>, std::vector<std::string>>;  // (hypothesis, reference)

/// Corpus BLEU-4 with uniform weights, clipped counts and the brevity
/// penalty exp(1 - r/c) when c <= r. No smoothing: any empty n-gram
/// precision yields 0. Throws Error on an empty list.
double corpus_bleu(std::span<const TokenPair> pairs);

struct ExampleRecord {
  std::string gold;
  std::string predicted;  // empty when decoding failed
  bool match = false;
};

struct EvalReport {
  std::size_t n_examples = 0;
  double exact_match = 0.0;
  double bleu = 0.0;
  std::vector<ExampleRecord> examples;

  nlohmann::json to_json(bool per_example) const;
};

/// `predictions[i]` is nullopt when nothing was decoded for example i; it
/// then counts as a miss with an empty BLEU hypothesis.
EvalReport evaluate(std::span<const AstNode> gold, std::span<const std::optional<AstNode>> predictions,
                    const Grammar& grammar);

}  // namespace granorm
