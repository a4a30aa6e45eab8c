#include "granorm/search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "granorm/error.hpp"

namespace granorm {

double Hypothesis::mean_logit() const {
  return actions.empty() ? 0.0 : sum_logits / static_cast<double>(actions.size());
}

double Hypothesis::mean_local_logprob() const {
  return actions.empty() ? 0.0 : sum_local_logprob / static_cast<double>(actions.size());
}

double Hypothesis::key(ScoreMode mode) const {
  return mode == ScoreMode::local ? mean_local_logprob() : mean_logit();
}

bool ranks_before(const Hypothesis& a, const Hypothesis& b, ScoreMode mode) {
  double ka = a.key(mode), kb = b.key(mode);
  if (ka != kb) return ka > kb;
  return a.actions < b.actions;
}

std::size_t default_max_steps(std::size_t source_length) noexcept { return 10 * source_length + 20; }

namespace {

struct Live {
  Hypothesis hyp;
  DecoderState decoder;
};

struct Expansion {
  std::size_t parent;
  std::size_t candidate;
  double sum_logits;
  double sum_local_logprob;
};

}  // namespace

BeamResult beam_search(const Model& model, const ParamStore& params, const Utterance& utterance,
                       std::size_t width, ScoreMode mode, std::size_t max_steps) {
  if (width == 0) throw SearchError("beam width must be >= 1");
  if (max_steps == 0) max_steps = default_max_steps(utterance.tokens.size());
  const Grammar& g = model.grammar();

  Tape tape(false);
  Session session(model, params, tape, utterance);

  std::vector<Live> beam;
  beam.push_back({Hypothesis{DerivationState::initial(g), {}, 0.0, 0.0}, session.initial_decoder_state()});
  BeamResult result;

  for (std::size_t t = 0; t < max_steps && !beam.empty() && result.finished.size() < width; ++t) {
    std::vector<StepResult> steps;
    std::vector<std::vector<double>> logprobs;
    std::vector<Expansion> expansions;
    steps.reserve(beam.size());
    for (std::size_t h = 0; h < beam.size(); ++h) {
      steps.push_back(session.step(beam[h].hyp.state, beam[h].decoder, mode));
      std::vector<double> logits = steps.back().logits.values();
      std::vector<double> lp = local_step_distribution(logits);
      for (auto& p : lp) p = std::log(p);
      for (std::size_t j = 0; j < logits.size(); ++j) {
        expansions.push_back({h, j, beam[h].hyp.sum_logits + logits[j], beam[h].hyp.sum_local_logprob + lp[j]});
      }
      logprobs.push_back(std::move(lp));
    }

    // All expansions share one length, so the mean key orders like the sum.
    auto better = [&](const Expansion& a, const Expansion& b) {
      double ka = mode == ScoreMode::local ? a.sum_local_logprob : a.sum_logits;
      double kb = mode == ScoreMode::local ? b.sum_local_logprob : b.sum_logits;
      if (ka != kb) return ka > kb;
      if (a.parent != b.parent) {
        const auto& pa = beam[a.parent].hyp.actions;
        const auto& pb = beam[b.parent].hyp.actions;
        if (pa != pb) return pa < pb;
      }
      return steps[a.parent].logits.candidates[a.candidate] < steps[b.parent].logits.candidates[b.candidate];
    };
    std::size_t keep = std::min(width, expansions.size());
    std::partial_sort(expansions.begin(), expansions.begin() + static_cast<std::ptrdiff_t>(keep), expansions.end(),
                      better);

    std::vector<Live> next;
    for (std::size_t e = 0; e < keep; ++e) {
      const Expansion& x = expansions[e];
      const Live& parent = beam[x.parent];
      const Action& a = steps[x.parent].logits.candidates[x.candidate];
      Live child;
      child.hyp.state = parent.hyp.state.apply(a, g);
      child.hyp.actions = parent.hyp.actions;
      child.hyp.actions.push_back(a);
      child.hyp.sum_logits = x.sum_logits;
      child.hyp.sum_local_logprob = x.sum_local_logprob;
      if (child.hyp.state.complete()) {
        result.finished.push_back(std::move(child.hyp));
      } else {
        child.decoder = session.advance(steps[x.parent].next, a);
        next.push_back(std::move(child));
      }
    }
    beam = std::move(next);
  }

  std::sort(result.finished.begin(), result.finished.end(),
            [mode](const Hypothesis& a, const Hypothesis& b) { return ranks_before(a, b, mode); });
  if (result.finished.size() > width) result.finished.resize(width);
  for (auto& live : beam) result.partials.push_back(std::move(live.hyp));
  return result;
}

std::vector<Hypothesis> decode(const Model& model, const ParamStore& params, const Utterance& utterance,
                               std::size_t width, ScoreMode mode, std::size_t max_steps) {
  BeamResult r = beam_search(model, params, utterance, width, mode, max_steps);
  if (!r.completed()) {
    throw SearchError("no hypothesis completed within the step limit (" + std::to_string(r.partials.size()) +
                      " partial hypotheses)");
  }
  return std::move(r.finished);
}

RankKey rank_key_for(ScoreMode mode) noexcept {
  return mode == ScoreMode::local ? RankKey::mean_local_logprob : RankKey::mean_logit;
}

double Derivation::value(RankKey key) const {
  const double n = static_cast<double>(actions.size());
  switch (key) {
    case RankKey::sum_logit: return sum_logits;
    case RankKey::mean_logit: return sum_logits / n;
    case RankKey::sum_local_logprob: return sum_local_logprob;
    case RankKey::mean_local_logprob: return sum_local_logprob / n;
  }
  return 0.0;
}

const Derivation& OracleReport::best(RankKey key) const {
  if (derivations.empty()) throw SearchError("oracle report has no derivations");
  const Derivation* best = &derivations.front();
  for (const auto& d : derivations) {
    double v = d.value(key), b = best->value(key);
    if (v > b || (v == b && d.actions < best->actions)) best = &d;
  }
  return *best;
}

namespace {

class Enumerator {
 public:
  Enumerator(const Session& session, ScoreMode mode, std::size_t max_steps, std::size_t limit)
      : session_(session), mode_(mode), max_steps_(max_steps), limit_(limit) {}

  void run(OracleReport& out) {
    out_ = &out;
    ActionSequence prefix;
    visit(DerivationState::initial(session_.model().grammar()), session_.initial_decoder_state(), prefix, 0.0, 0.0);
  }

 private:
  void visit(const DerivationState& state, const DecoderState& decoder, ActionSequence& prefix, double sum_logits,
             double sum_lp) {
    if (state.complete()) {
      if (out_->derivations.size() >= limit_) {
        throw SearchError("exhaustive enumeration exceeded " + std::to_string(limit_) + " derivations");
      }
      out_->derivations.push_back({prefix, sum_logits, sum_lp, 0.0});
      return;
    }
    if (prefix.size() >= max_steps_) return;

    const Grammar& g = session_.model().grammar();
    Tape& tape = session_.tape();
    StepResult r = session_.step(state, decoder, mode_);
    std::vector<double> logits = r.logits.values();
    std::vector<double> lp = local_step_distribution(logits);
    for (auto& p : lp) p = std::log(p);

    const std::size_t mark = tape.node_count();
    for (std::size_t j = 0; j < logits.size(); ++j) {
      const Action& a = r.logits.candidates[j];
      DerivationState child = state.apply(a, g);
      prefix.push_back(a);
      visit(child, session_.advance(r.next, a), prefix, sum_logits + logits[j], sum_lp + lp[j]);
      prefix.pop_back();
      tape.truncate(mark);
    }
  }

  const Session& session_;
  ScoreMode mode_;
  std::size_t max_steps_;
  std::size_t limit_;
  OracleReport* out_ = nullptr;
};

}  // namespace

OracleReport exhaustive_derivations(const Model& model, const ParamStore& params, const Utterance& utterance,
                                    ScoreMode mode, std::size_t max_steps, std::size_t limit) {
  Tape tape(false);
  Session session(model, params, tape, utterance);
  OracleReport report;
  Enumerator(session, mode, max_steps, limit).run(report);

  double mx = -std::numeric_limits<double>::infinity();
  for (const auto& d : report.derivations) mx = std::max(mx, d.sum_logits);
  double z = 0.0;
  double shifted = 0.0;
  for (const auto& d : report.derivations) {
    z += std::exp(d.sum_logits);
    shifted += std::exp(d.sum_logits - mx);
  }
  report.z_global = z;
  report.log_z_global = report.derivations.empty() ? mx : mx + std::log(shifted);
  for (auto& d : report.derivations) d.global_prob = std::exp(d.sum_logits) / z;

  std::sort(report.derivations.begin(), report.derivations.end(), [](const Derivation& a, const Derivation& b) {
    if (a.sum_logits != b.sum_logits) return a.sum_logits > b.sum_logits;
    return a.actions < b.actions;
  });
  return report;
}

}  // namespace granorm
