#include "granorm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "granorm/error.hpp"

namespace granorm {

bool exact_match(const AstNode& pred, const AstNode& gold) { return pred == gold; }

double exact_match_accuracy(std::span<const std::pair<AstNode, AstNode>> pairs) {
  if (pairs.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& [p, g] : pairs) hits += exact_match(p, g) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(pairs.size());
}

namespace {

using Ngram = std::vector<std::string>;

std::map<Ngram, int> count_ngrams(const std::vector<std::string>& tokens, std::size_t n) {
  std::map<Ngram, int> counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[Ngram(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                   tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

}  // namespace

double corpus_bleu(std::span<const TokenPair> pairs) {
  if (pairs.empty()) throw Error("corpus_bleu: empty pair list");
  constexpr std::size_t kMaxN = 4;
  std::size_t matched[kMaxN] = {};
  std::size_t total[kMaxN] = {};
  std::size_t hyp_len = 0, ref_len = 0;

  for (const auto& [hyp, ref] : pairs) {
    hyp_len += hyp.size();
    ref_len += ref.size();
    for (std::size_t n = 1; n <= kMaxN; ++n) {
      auto h = count_ngrams(hyp, n);
      auto r = count_ngrams(ref, n);
      for (const auto& [gram, c] : h) {
        auto it = r.find(gram);
        if (it != r.end()) matched[n - 1] += static_cast<std::size_t>(std::min(c, it->second));
        total[n - 1] += static_cast<std::size_t>(c);
      }
    }
  }

  double log_p = 0.0;
  for (std::size_t n = 0; n < kMaxN; ++n) {
    if (matched[n] == 0 || total[n] == 0) return 0.0;
    log_p += std::log(static_cast<double>(matched[n]) / static_cast<double>(total[n])) / kMaxN;
  }
  double bp = 1.0;
  if (hyp_len <= ref_len) bp = std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
  return std::clamp(bp * std::exp(log_p), 0.0, 1.0);
}

nlohmann::json EvalReport::to_json(bool per_example) const {
  nlohmann::json j;
  j["n_examples"] = n_examples;
  j["exact_match"] = exact_match;
  j["bleu"] = bleu;
  if (per_example) {
    auto arr = nlohmann::json::array();
    for (const auto& e : examples) {
      arr.push_back({{"gold", e.gold}, {"predicted", e.predicted}, {"match", e.match}});
    }
    j["examples"] = std::move(arr);
  }
  return j;
}

EvalReport evaluate(std::span<const AstNode> gold, std::span<const std::optional<AstNode>> predictions,
                    const Grammar& grammar) {
  if (gold.size() != predictions.size()) throw Error("evaluate: gold and prediction counts differ");
  EvalReport report;
  report.n_examples = gold.size();
  std::vector<TokenPair> pairs;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    ExampleRecord rec;
    rec.gold = to_sexpr(gold[i], grammar);
    std::vector<std::string> hyp;
    if (predictions[i]) {
      rec.predicted = to_sexpr(*predictions[i], grammar);
      rec.match = exact_match(*predictions[i], gold[i]);
      hyp = linearize(*predictions[i], grammar);
    }
    hits += rec.match ? 1 : 0;
    pairs.emplace_back(std::move(hyp), linearize(gold[i], grammar));
    report.examples.push_back(std::move(rec));
  }
  if (!gold.empty()) {
    report.exact_match = static_cast<double>(hits) / static_cast<double>(gold.size());
    report.bleu = corpus_bleu(pairs);
  }
  return report;
}

}  // namespace granorm
