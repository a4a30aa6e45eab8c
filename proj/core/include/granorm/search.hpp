#pragma once

#include <cstddef>
#include <vector>

#include "granorm/model.hpp"

namespace granorm {

/// A derivation found by search. Both running sums cover every taken action.
struct Hypothesis {
  DerivationState state;
  ActionSequence actions;
  double sum_logits = 0.0;         // raw logits under the search mode
  double sum_local_logprob = 0.0;  // log-softmax of those logits, per step

  std::size_t length() const noexcept { return actions.size(); }
  double mean_logit() const;
  double mean_local_logprob() const;
  /// Ranking key: mean local log-probability (local) or mean raw logit (global).
  double key(ScoreMode mode) const;
};

/// Key descending, then action sequence ascending.
bool ranks_before(const Hypothesis& a, const Hypothesis& b, ScoreMode mode);

struct BeamResult {
  std::vector<Hypothesis> finished;  // sorted best first, at most `width`
  std::vector<Hypothesis> partials;  // live beam when search stopped
  bool completed() const noexcept { return !finished.empty(); }
};

/// 10 x source length + 20.
std::size_t default_max_steps(std::size_t source_length) noexcept;

/// Grammar-constrained beam search. Each step keeps the `width` best
/// expansions; complete ones retire to the finished pool and the rest form
/// the next beam. Stops once `width` hypotheses finished, the beam is empty,
/// or `max_steps` actions were taken (0 selects default_max_steps).
BeamResult beam_search(const Model& model, const ParamStore& params, const Utterance& utterance,
                       std::size_t width, ScoreMode mode, std::size_t max_steps = 0);

/// Like beam_search, but throws SearchError when nothing completes.
std::vector<Hypothesis> decode(const Model& model, const ParamStore& params, const Utterance& utterance,
                               std::size_t width, ScoreMode mode, std::size_t max_steps = 0);

enum class RankKey { sum_logit, mean_logit, sum_local_logprob, mean_local_logprob };

RankKey rank_key_for(ScoreMode mode) noexcept;

struct Derivation {
  ActionSequence actions;
  double sum_logits = 0.0;
  double sum_local_logprob = 0.0;
  double global_prob = 0.0;  // exp(sum_logits) / Z_G

  double value(RankKey key) const;
};

struct OracleReport {
  std::vector<Derivation> derivations;  // sum_logits descending, ties by actions
  double z_global = 0.0;                // sum of exp(sum_logits)
  double log_z_global = 0.0;

  /// Best derivation under `key` (ties by action sequence).
  const Derivation& best(RankKey key) const;
};

/// Depth-first enumeration of every complete derivation of at most
/// `max_steps` actions. Throws SearchError once more than `limit` exist.
OracleReport exhaustive_derivations(const Model& model, const ParamStore& params, const Utterance& utterance,
                                    ScoreMode mode, std::size_t max_steps, std::size_t limit = 100000);

}  // namespace granorm
