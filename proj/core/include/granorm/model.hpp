#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "granorm/autodiff.hpp"
#include "granorm/grammar.hpp"
#include "granorm/param_store.hpp"
#include "granorm/transition.hpp"
#include "granorm/vocab.hpp"

namespace granorm {

/// How step logits are turned into scores.
///
/// `local`: GenToken scores are log of the gated mixture of generation and
/// copy probabilities, and every step is softmax-normalized.
/// `global`: GenToken scores interpolate the raw generation and copy logits;
/// sequences are scored by their (mean) raw logits.
enum class ScoreMode { local, global };

std::string_view to_string(ScoreMode mode) noexcept;
ScoreMode parse_score_mode(std::string_view text);

struct ModelConfig {
  std::size_t dim = 64;  // must be even: the encoder runs dim/2 per direction
};

struct Utterance {
  std::vector<std::string> tokens;
  std::vector<int> ids;
};

/// p_gen * P(v|gen) + (1 - p_gen) * P(v|copy). Arguments must lie in [0, 1].
double copy_merged_probability(double p_gen, double p_v_gen, double p_v_copy);

/// p_gen * o_gen + (1 - p_gen) * o_copy. A token with only one pathway takes
/// that pathway's logit unchanged. p_gen must lie in [0, 1].
double copy_merged_logit(double p_gen, std::optional<double> o_gen, std::optional<double> o_copy);

/// Softmax over candidate logits.
std::vector<double> local_step_distribution(std::span<const double> logits);

/// Architecture: bidirectional LSTM encoder, LSTM decoder with multiplicative
/// attention, a linear action layer for ApplyConstr/Reduce, and a gated
/// generate/copy head for GenToken.
class Model {
 public:
  Model(Grammar grammar, SourceVocab source_vocab, ModelConfig config);

  const Grammar& grammar() const noexcept { return grammar_; }
  const SourceVocab& source_vocab() const noexcept { return source_vocab_; }
  const ModelConfig& config() const noexcept { return config_; }

  /// Fresh parameters, uniform(-0.1, 0.1) per named tensor.
  ParamStore init_params(std::uint64_t seed) const;

  /// Throws ShapeError listing every tensor whose name or shape differs.
  void check_params(const ParamStore& params) const;

  Utterance utterance(std::vector<std::string> tokens) const;

  /// Row of the action embedding table used when `action` is the previous action.
  std::size_t action_row(const Action& action) const;
  std::size_t start_row() const noexcept;

 private:
  Grammar grammar_;
  SourceVocab source_vocab_;
  ModelConfig config_;
};

struct EncoderOutput {
  Var states;   // [length x dim]
  Var summary;  // [dim]
  std::size_t length = 0;
};

struct DecoderState {
  Var h;
  Var c;
  Var context;
  std::size_t prev_action_row = 0;
};

struct StepLogits {
  CandidateSet candidates;
  Var logits;  // aligned with candidates
  ScoreMode mode = ScoreMode::local;
  // Populated at primitive slots only.
  std::optional<Var> p_copy;
  std::optional<Var> copy_attention;  // softmax of pointer scores over source positions

  std::vector<double> values() const;
};

struct StepResult {
  StepLogits logits;
  DecoderState next;  // prev_action_row still unset; see Session::advance
};

/// Per-step scores of a teacher-forced action sequence.
struct SequenceScore {
  std::vector<Var> step_logits;    // raw logit of the taken action
  std::vector<Var> step_logprobs;  // log softmax over the candidates, taken action
  Var sum_logits;
  Var sum_logprobs;
  Var mean_logit;
};

/// Scoring of one utterance against one parameter snapshot on one tape.
/// The encoder runs once at construction.
class Session {
 public:
  Session(const Model& model, const ParamStore& params, Tape& tape, const Utterance& utterance);
  Session(const Model&, const ParamStore&, Tape&, Utterance&&) = delete;  // the utterance is referenced, not copied

  const Model& model() const noexcept { return *model_; }
  Tape& tape() const noexcept { return *tape_; }
  const Utterance& utterance() const noexcept { return *utterance_; }
  const EncoderOutput& encoder() const noexcept { return encoder_; }

  DecoderState initial_decoder_state() const;

  /// Throws TransitionError when `state` is complete.
  StepResult step(const DerivationState& state, const DecoderState& decoder, ScoreMode mode) const;

  DecoderState advance(DecoderState next, const Action& taken) const;

  /// Throws TransitionError when `actions` is illegal or incomplete.
  SequenceScore score(std::span<const Action> actions, ScoreMode mode) const;

  /// score() for several sequences; decoder steps on shared prefixes run once.
  std::vector<SequenceScore> score_all(std::span<const ActionSequence> sequences, ScoreMode mode) const;
  std::vector<SequenceScore> score_all(std::span<const std::span<const Action>> sequences, ScoreMode mode) const;

 private:
  struct Bound {
    Var enc_embedding, enc_fwd_w, enc_fwd_b, enc_bwd_w, enc_bwd_b, enc_init_w, enc_init_b;
    Var action_embedding, dec_w, dec_b, attention_w, combine_w, combine_b;
    Var action_w, action_b, token_w, token_b, pointer_w, gate_w, gate_b;
  };

  Var bind(const char* name) const;
  void encode();
  StepLogits token_logits(Var att, Var action_logits, const CandidateSet& cands, ScoreMode mode) const;

  const Model* model_;
  const ParamStore* params_;
  Tape* tape_;
  const Utterance* utterance_;
  Bound p_;
  EncoderOutput encoder_;

  // Token candidate layout, identical at every primitive slot.
  std::size_t n_token_candidates_ = 0;
  std::vector<int> vocab_index_;   // per token candidate, -1 when out of vocabulary
  std::vector<int> source_group_;  // per source position, its token candidate
  Var in_both_, gen_only_, copy_only_;  // 0/1 masks over token candidates
};

/// Convenience wrappers on a private gradient-free tape.
double sequence_local_logprob(const Model& model, const ParamStore& params, const Utterance& utterance,
                              std::span<const Action> actions);
double sequence_global_logit(const Model& model, const ParamStore& params, const Utterance& utterance,
                             std::span<const Action> actions);

}  // namespace granorm
