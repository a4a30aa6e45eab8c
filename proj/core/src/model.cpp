#include "granorm/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include "granorm/error.hpp"

namespace granorm {

std::string_view to_string(ScoreMode mode) noexcept { return mode == ScoreMode::local ? "local" : "global"; }

ScoreMode parse_score_mode(std::string_view text) {
  if (text == "local") return ScoreMode::local;
  if (text == "global") return ScoreMode::global;
  throw Error("unknown score mode '" + std::string(text) + "'");
}

double copy_merged_probability(double p_gen, double p_v_gen, double p_v_copy) {
  for (double p : {p_gen, p_v_gen, p_v_copy}) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error("copy_merged_probability: argument outside [0, 1]");
  }
  return p_gen * p_v_gen + (1.0 - p_gen) * p_v_copy;
}

double copy_merged_logit(double p_gen, std::optional<double> o_gen, std::optional<double> o_copy) {
  if (!(p_gen >= 0.0 && p_gen <= 1.0)) throw Error("copy_merged_logit: p_gen outside [0, 1]");
  if (o_gen && o_copy) return p_gen * *o_gen + (1.0 - p_gen) * *o_copy;
  if (o_gen) return *o_gen;
  if (o_copy) return *o_copy;
  throw Error("copy_merged_logit: token has neither a generation nor a copy logit");
}

std::vector<double> local_step_distribution(std::span<const double> logits) {
  if (logits.empty()) throw Error("local_step_distribution: empty candidate set");
  double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) z += (out[i] = std::exp(logits[i] - mx));
  for (auto& p : out) p /= z;
  return out;
}

std::vector<double> StepLogits::values() const {
  const Tensor& t = logits.value();
  return {t.data().begin(), t.data().end()};
}

// ---------------------------------------------------------------------------

Model::Model(Grammar grammar, SourceVocab source_vocab, ModelConfig config)
    : grammar_(std::move(grammar)), source_vocab_(std::move(source_vocab)), config_(config) {
  if (config_.dim < 2 || config_.dim % 2 != 0) {
    throw Error("model dimension must be an even number >= 2, got " + std::to_string(config_.dim));
  }
}

namespace {

struct ParamEntry {
  const char* name;
  Tensor::Shape shape;
};

std::vector<ParamEntry> layout(const Model& m) {
  const std::size_t d = m.config().dim;
  const std::size_t half = d / 2;
  const std::size_t n_ctor = m.grammar().constructors().size();
  const std::size_t n_tok = m.grammar().token_vocab().size();
  const std::size_t n_src = m.source_vocab().size();
  const std::size_t n_rows = n_ctor + n_tok + 3;
  return {
      {"enc.embedding", {n_src, d}},
      {"enc.fwd.W", {4 * half, d + half}},
      {"enc.fwd.b", {4 * half}},
      {"enc.bwd.W", {4 * half, d + half}},
      {"enc.bwd.b", {4 * half}},
      {"enc.init.W", {d, d}},
      {"enc.init.b", {d}},
      {"dec.action_embedding", {n_rows, d}},
      {"dec.lstm.W", {4 * d, 3 * d}},
      {"dec.lstm.b", {4 * d}},
      {"dec.attention.W", {d, d}},
      {"dec.combine.W", {d, 2 * d}},
      {"dec.combine.b", {d}},
      {"out.action.W", {n_ctor + 1, d}},
      {"out.action.b", {n_ctor + 1}},
      {"out.token.W", {n_tok, d}},
      {"out.token.b", {n_tok}},
      {"out.pointer.W", {d, d}},
      {"out.gate.w", {d}},
      {"out.gate.b", {1}},
  };
}

}  // namespace

ParamStore Model::init_params(std::uint64_t seed) const {
  ParamStore store(seed);
  for (auto& spec : layout(*this)) store.add_uniform(spec.name, spec.shape);
  return store;
}

void Model::check_params(const ParamStore& params) const {
  ParamStore expected;
  for (auto& spec : layout(*this)) expected.add(spec.name, Tensor(spec.shape));
  auto bad = expected.layout_mismatches(params);
  if (!bad.empty()) {
    std::string msg = "parameter layout mismatch:";
    for (const auto& n : bad) {
      msg += ' ' + n;
      auto i = params.index_of(n);
      auto j = expected.index_of(n);
      msg += " (";
      msg += i ? shape_string(params.value(*i).shape()) : "missing";
      msg += " vs expected ";
      msg += j ? shape_string(expected.value(*j).shape()) : "none";
      msg += ")";
    }
    throw ShapeError(msg);
  }
}

Utterance Model::utterance(std::vector<std::string> tokens) const {
  Utterance u;
  u.ids.reserve(tokens.size());
  for (const auto& t : tokens) u.ids.push_back(source_vocab_.id(t));
  u.tokens = std::move(tokens);
  return u;
}

std::size_t Model::action_row(const Action& action) const {
  const std::size_t n_ctor = grammar_.constructors().size();
  const std::size_t n_tok = grammar_.token_vocab().size();
  switch (action.kind) {
    case Action::Kind::apply_constr:
      return static_cast<std::size_t>(action.constructor);
    case Action::Kind::gen_token: {
      auto idx = grammar_.token_index(action.token);
      return idx ? n_ctor + static_cast<std::size_t>(*idx) : n_ctor + n_tok;
    }
    case Action::Kind::reduce:
      return n_ctor + n_tok + 1;
  }
  return start_row();
}

std::size_t Model::start_row() const noexcept {
  return grammar_.constructors().size() + grammar_.token_vocab().size() + 2;
}

// ---------------------------------------------------------------------------

namespace {

struct LstmOut {
  Var h;
  Var c;
};

LstmOut lstm_cell(Var w, Var b, Var x, Var h, Var c, std::size_t hidden) {
  Var z = add(matvec(w, concat({x, h})), b);
  Var i = sigmoid(slice(z, 0, hidden));
  Var f = sigmoid(slice(z, hidden, hidden));
  Var g = tanh(slice(z, 2 * hidden, hidden));
  Var o = sigmoid(slice(z, 3 * hidden, hidden));
  Var c_next = add(mul(f, c), mul(i, g));
  Var h_next = mul(o, tanh(c_next));
  return {h_next, c_next};
}

}  // namespace

Session::Session(const Model& model, const ParamStore& params, Tape& tape, const Utterance& utterance)
    : model_(&model), params_(&params), tape_(&tape), utterance_(&utterance) {
  if (utterance.tokens.empty()) throw Error("cannot encode an empty utterance");
  if (utterance.ids.size() != utterance.tokens.size()) throw Error("utterance ids not aligned with tokens");

  p_.enc_embedding = bind("enc.embedding");
  p_.enc_fwd_w = bind("enc.fwd.W");
  p_.enc_fwd_b = bind("enc.fwd.b");
  p_.enc_bwd_w = bind("enc.bwd.W");
  p_.enc_bwd_b = bind("enc.bwd.b");
  p_.enc_init_w = bind("enc.init.W");
  p_.enc_init_b = bind("enc.init.b");
  p_.action_embedding = bind("dec.action_embedding");
  p_.dec_w = bind("dec.lstm.W");
  p_.dec_b = bind("dec.lstm.b");
  p_.attention_w = bind("dec.attention.W");
  p_.combine_w = bind("dec.combine.W");
  p_.combine_b = bind("dec.combine.b");
  p_.action_w = bind("out.action.W");
  p_.action_b = bind("out.action.b");
  p_.token_w = bind("out.token.W");
  p_.token_b = bind("out.token.b");
  p_.pointer_w = bind("out.pointer.W");
  p_.gate_w = bind("out.gate.w");
  p_.gate_b = bind("out.gate.b");

  // Token candidates: vocabulary in order, then unseen source tokens by first position.
  const Grammar& g = model.grammar();
  const std::size_t n_vocab = g.token_vocab().size();
  std::unordered_map<std::string, int> extra;
  for (std::size_t v = 0; v < n_vocab; ++v) vocab_index_.push_back(static_cast<int>(v));
  for (const auto& tok : utterance.tokens) {
    if (g.token_index(tok) || extra.contains(tok)) continue;
    extra.emplace(tok, static_cast<int>(vocab_index_.size()));
    vocab_index_.push_back(-1);
  }
  n_token_candidates_ = vocab_index_.size();
  std::vector<double> both(n_token_candidates_, 0.0), gen(n_token_candidates_, 0.0), copy(n_token_candidates_, 0.0);
  std::vector<bool> in_source(n_token_candidates_, false);
  for (const auto& tok : utterance.tokens) {
    auto v = g.token_index(tok);
    int cand = v ? *v : extra.at(tok);
    source_group_.push_back(cand);
    in_source[static_cast<std::size_t>(cand)] = true;
  }
  for (std::size_t j = 0; j < n_token_candidates_; ++j) {
    bool has_gen = vocab_index_[j] >= 0;
    if (has_gen && in_source[j]) {
      both[j] = 1.0;
    } else if (has_gen) {
      gen[j] = 1.0;
    } else {
      copy[j] = 1.0;
    }
  }
  in_both_ = tape.constant(Tensor::vector(std::move(both)));
  gen_only_ = tape.constant(Tensor::vector(std::move(gen)));
  copy_only_ = tape.constant(Tensor::vector(std::move(copy)));

  encode();
}

Var Session::bind(const char* name) const {
  auto idx = params_->index_of(name);
  if (!idx) throw ShapeError(std::string("missing parameter '") + name + "'");
  return tape_->param(*params_, *idx);
}

void Session::encode() {
  const std::size_t d = model_->config().dim;
  const std::size_t half = d / 2;
  const std::size_t n = utterance_->ids.size();
  Tape& t = *tape_;

  std::vector<Var> emb;
  emb.reserve(n);
  for (int id : utterance_->ids) emb.push_back(row(p_.enc_embedding, static_cast<std::size_t>(id)));

  Var zero = t.constant(Tensor(Tensor::Shape{half}));
  std::vector<Var> fwd(n), bwd(n);
  LstmOut s{zero, zero};
  for (std::size_t i = 0; i < n; ++i) {
    s = lstm_cell(p_.enc_fwd_w, p_.enc_fwd_b, emb[i], s.h, s.c, half);
    fwd[i] = s.h;
  }
  s = {zero, zero};
  for (std::size_t i = n; i-- > 0;) {
    s = lstm_cell(p_.enc_bwd_w, p_.enc_bwd_b, emb[i], s.h, s.c, half);
    bwd[i] = s.h;
  }
  std::vector<Var> rows;
  rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) rows.push_back(concat({fwd[i], bwd[i]}));

  encoder_.states = stack_rows(rows);
  encoder_.summary = tanh(add(matvec(p_.enc_init_w, concat({fwd[n - 1], bwd[0]})), p_.enc_init_b));
  encoder_.length = n;
}

DecoderState Session::initial_decoder_state() const {
  const std::size_t d = model_->config().dim;
  Var zero = tape_->constant(Tensor(Tensor::Shape{d}));
  return DecoderState{encoder_.summary, zero, zero, model_->start_row()};
}

DecoderState Session::advance(DecoderState next, const Action& taken) const {
  next.prev_action_row = model_->action_row(taken);
  return next;
}

StepResult Session::step(const DerivationState& state, const DecoderState& decoder, ScoreMode mode) const {
  const Grammar& g = model_->grammar();
  CandidateSet cands = candidate_actions(state, g, utterance_->tokens);
  const std::size_t d = model_->config().dim;

  Var prev = row(p_.action_embedding, decoder.prev_action_row);
  LstmOut s = lstm_cell(p_.dec_w, p_.dec_b, concat({prev, decoder.context}), decoder.h, decoder.c, d);

  Var scores = matvec(encoder_.states, matvec(p_.attention_w, s.h));
  Var alpha = softmax(scores);
  Var context = vecmat(alpha, encoder_.states);
  Var att = tanh(add(matvec(p_.combine_w, concat({s.h, context})), p_.combine_b));

  Var action_logits = add(matvec(p_.action_w, att), p_.action_b);

  StepResult out;
  out.next = DecoderState{s.h, s.c, context, 0};
  if (state.top().primitive) {
    out.logits = token_logits(att, action_logits, cands, mode);
  } else {
    const std::size_t reduce_index = g.constructors().size();
    std::vector<int> idx;
    idx.reserve(cands.size());
    for (const auto& a : cands.actions) idx.push_back(a.is_reduce() ? static_cast<int>(reduce_index) : a.constructor);
    out.logits.candidates = std::move(cands);
    out.logits.logits = gather(action_logits, idx);
    out.logits.mode = mode;
  }
  return out;
}

StepLogits Session::token_logits(Var att, Var action_logits, const CandidateSet& cands, ScoreMode mode) const {
  const std::size_t n_tok = n_token_candidates_;
  bool has_reduce = !cands.empty() && cands.actions.back().is_reduce();
  if (cands.size() != n_tok + (has_reduce ? 1 : 0)) {
    throw Error("internal: token candidate layout does not match candidate set");
  }

  Var gen_logits = add(matvec(p_.token_w, att), p_.token_b);
  Var pointer = matvec(encoder_.states, matvec(p_.pointer_w, att));
  Var p_copy = sigmoid(add(dot(p_.gate_w, att), element(p_.gate_b, 0)));
  Var p_gen = add_scalar(scale(p_copy, -1.0), 1.0);
  Var copy_attention = softmax(pointer);

  Var tok;
  if (mode == ScoreMode::local) {
    Var gen_part = gather(softmax(gen_logits), vocab_index_);
    Var copy_part = segment_sum(copy_attention, source_group_, n_tok);
    tok = log(add(mul_scalar(p_gen, gen_part), mul_scalar(p_copy, copy_part)));
  } else {
    Var o_gen = gather(gen_logits, vocab_index_);
    Var o_copy = segment_sum(pointer, source_group_, n_tok);
    Var mixed = add(mul_scalar(p_gen, o_gen), mul_scalar(p_copy, o_copy));
    tok = add(add(mul(in_both_, mixed), mul(gen_only_, o_gen)), mul(copy_only_, o_copy));
  }

  StepLogits out;
  if (has_reduce) {
    Var reduce = element(action_logits, model_->grammar().constructors().size());
    out.logits = concat({tok, reduce});
  } else {
    out.logits = tok;
  }
  out.candidates = cands;
  out.mode = mode;
  out.p_copy = p_copy;
  out.copy_attention = copy_attention;
  return out;
}

SequenceScore Session::score(std::span<const Action> actions, ScoreMode mode) const {
  std::span<const Action> one[] = {actions};
  return std::move(score_all(std::span<const std::span<const Action>>(one), mode).front());
}

std::vector<SequenceScore> Session::score_all(std::span<const ActionSequence> sequences, ScoreMode mode) const {
  std::vector<std::span<const Action>> views(sequences.begin(), sequences.end());
  return score_all(std::span<const std::span<const Action>>(views), mode);
}

std::vector<SequenceScore> Session::score_all(std::span<const std::span<const Action>> sequences, ScoreMode mode) const {
  const Grammar& g = model_->grammar();
  struct Node {
    DerivationState state;
    DecoderState dec;
    std::optional<StepResult> step;
    Var logprobs;
    std::map<Action, std::size_t> children;
  };
  std::vector<Node> trie;
  trie.push_back({DerivationState::initial(g), initial_decoder_state(), std::nullopt, {}, {}});

  std::vector<SequenceScore> out;
  out.reserve(sequences.size());
  for (auto actions : sequences) {
    if (actions.empty()) throw TransitionError("empty action sequence");
    SequenceScore sc;
    std::size_t at = 0;
    for (std::size_t t = 0; t < actions.size(); ++t) {
      if (trie[at].state.complete()) throw TransitionError("action after derivation completed", t);
      if (!trie[at].step) {
        trie[at].step = step(trie[at].state, trie[at].dec, mode);
        trie[at].logprobs = log_softmax(trie[at].step->logits.logits);
      }
      const StepResult& r = *trie[at].step;
      auto k = r.logits.candidates.find(actions[t]);
      if (!k) throw TransitionError("action " + to_string(actions[t], g) + " is not a candidate", t);
      sc.step_logits.push_back(element(r.logits.logits, *k));
      sc.step_logprobs.push_back(element(trie[at].logprobs, *k));

      auto it = trie[at].children.find(actions[t]);
      if (it != trie[at].children.end()) {
        at = it->second;
        continue;
      }
      Node child{trie[at].state.apply(actions[t], g), advance(r.next, actions[t]), std::nullopt, {}, {}};
      trie[at].children.emplace(actions[t], trie.size());
      trie.push_back(std::move(child));
      at = trie.size() - 1;
    }
    if (!trie[at].state.complete()) throw TransitionError("incomplete action sequence");
    sc.sum_logits = sum(concat(sc.step_logits));
    sc.sum_logprobs = sum(concat(sc.step_logprobs));
    sc.mean_logit = scale(sc.sum_logits, 1.0 / static_cast<double>(actions.size()));
    out.push_back(std::move(sc));
  }
  return out;
}

double sequence_local_logprob(const Model& model, const ParamStore& params, const Utterance& utterance,
                              std::span<const Action> actions) {
  Tape tape(false);
  Session s(model, params, tape, utterance);
  return s.score(actions, ScoreMode::local).sum_logprobs.item();
}

double sequence_global_logit(const Model& model, const ParamStore& params, const Utterance& utterance,
                             std::span<const Action> actions) {
  Tape tape(false);
  Session s(model, params, tape, utterance);
  return s.score(actions, ScoreMode::global).mean_logit.item();
}

}  // namespace granorm
