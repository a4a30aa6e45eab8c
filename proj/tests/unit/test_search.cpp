#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "granorm/error.hpp"
#include "granorm/search.hpp"
#include "support/generators.hpp"

using namespace granorm;

namespace {

const std::vector<std::string> kWords{"a", "b", "x", "y"};

ParamStore zero_params(const Model& m) {
  ParamStore p = m.init_params(0);
  for (std::size_t i = 0; i < p.size(); ++i) p.value(i).fill(0.0);
  return p;
}

// Argmax of the raw step logits (the local softmax keeps the same order).
ActionSequence greedy(const Model& m, const ParamStore& p, const Utterance& u, ScoreMode mode) {
  Tape tape(false);
  Session s(m, p, tape, u);
  DerivationState st = initial_state(m.grammar());
  DecoderState dec = s.initial_decoder_state();
  ActionSequence out;
  while (!st.complete()) {
    StepResult r = s.step(st, dec, mode);
    auto v = r.logits.values();
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
      if (v[i] > v[best]) best = i;
    }
    const Action& a = r.logits.candidates[best];
    out.push_back(a);
    dec = s.advance(r.next, a);
    st = st.apply(a, m.grammar());
  }
  return out;
}

}  // namespace

TEST_CASE("partition function examples") {
  Grammar g = Grammar::parse("root S\nS = A() | B()");
  Model m(g, SourceVocab({"a"}), ModelConfig{4});
  Utterance u = m.utterance({"a"});

  ParamStore zero = zero_params(m);
  OracleReport r = exhaustive_derivations(m, zero, u, ScoreMode::global, 10);
  REQUIRE(r.derivations.size() == 2);
  CHECK(r.z_global == 2.0);
  CHECK(r.derivations[0].global_prob == 0.5);
  CHECK(r.derivations[1].global_prob == 0.5);

  ParamStore bias = zero;
  bias.at("out.action.b")[0] = std::log(2.0);
  bias.at("out.action.b")[1] = std::log(3.0);
  r = exhaustive_derivations(m, bias, u, ScoreMode::global, 10);
  CHECK(r.z_global == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(r.derivations[0].actions == ActionSequence{Action::apply(1)});
  CHECK(r.derivations[0].global_prob == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(r.derivations[1].global_prob == doctest::Approx(0.4).epsilon(1e-15));

  Grammar forced = Grammar::parse("root S\nS = A()");
  Model fm(forced, SourceVocab({"a"}), ModelConfig{4});
  ParamStore fp = testing::spread_params(fm, 2, 5.0);
  OracleReport one = exhaustive_derivations(fm, fp, u, ScoreMode::global, 10);
  REQUIRE(one.derivations.size() == 1);
  CHECK(one.z_global == std::exp(one.derivations[0].sum_logits));
  CHECK(one.derivations[0].global_prob == 1.0);
}

TEST_CASE("exhaustive enumeration respects the limit") {
  Grammar g = Grammar::parse("root S\nS = L(token* v)").with_token_vocab({"a", "b"});
  Model m(g, SourceVocab({"a"}), ModelConfig{4});
  ParamStore p = m.init_params(1);
  Utterance u = m.utterance({"a"});
  CHECK_THROWS_AS(exhaustive_derivations(m, p, u, ScoreMode::local, 12, 50), SearchError);
  OracleReport r = exhaustive_derivations(m, p, u, ScoreMode::local, 4);
  for (const auto& d : r.derivations) CHECK(d.actions.size() <= 4);
}

TEST_CASE("local probability mass over finite languages is one") {
  testing::Rng rng(17);
  for (int gi = 0; gi < 10; ++gi) {
    Grammar g = testing::random_finite_grammar(rng, 2, 200);
    Model m(g, SourceVocab({"a", "b"}), ModelConfig{6});
    ParamStore p = testing::spread_params(m, gi, 6.0);
    Utterance u = m.utterance(testing::random_source(rng, kWords, 4));
    OracleReport r = exhaustive_derivations(m, p, u, ScoreMode::local, 1000);
    CHECK(static_cast<double>(r.derivations.size()) == testing::count_derivations(g, g.root_type()));
    double mass = 0.0, pg = 0.0;
    for (const auto& d : r.derivations) {
      mass += std::exp(d.sum_local_logprob);
      pg += d.global_prob;
    }
    CHECK(std::abs(mass - 1.0) <= 1e-6);
    CHECK(std::abs(pg - 1.0) <= 1e-9);
  }
}

TEST_CASE("beam equals exhaustive search at saturation") {
  testing::Rng rng(23);
  for (int gi = 0; gi < 12; ++gi) {
    Grammar g = testing::random_finite_grammar(rng, 2, 50);
    Model m(g, SourceVocab({"a", "b"}), ModelConfig{6});
    for (ScoreMode mode : {ScoreMode::local, ScoreMode::global}) {
      ParamStore p = testing::spread_params(m, 50 + gi, 6.0);
      Utterance u = m.utterance(testing::random_source(rng, kWords, 4));
      OracleReport r = exhaustive_derivations(m, p, u, mode, 1000);
      BeamResult beam = beam_search(m, p, u, 64, mode);
      REQUIRE(beam.finished.size() == r.derivations.size());

      // Same set, same order under the beam's ranking key.
      RankKey key = rank_key_for(mode);
      std::vector<const Derivation*> ranked;
      for (const auto& d : r.derivations) ranked.push_back(&d);
      std::stable_sort(ranked.begin(), ranked.end(), [&](const Derivation* a, const Derivation* b) {
        if (a->value(key) != b->value(key)) return a->value(key) > b->value(key);
        return a->actions < b->actions;
      });
      for (std::size_t i = 0; i < ranked.size(); ++i) {
        CHECK(beam.finished[i].actions == ranked[i]->actions);
        CHECK(std::abs(beam.finished[i].sum_logits - ranked[i]->sum_logits) <= 1e-9);
        CHECK(std::abs(beam.finished[i].sum_local_logprob - ranked[i]->sum_local_logprob) <= 1e-9);
      }
      CHECK(beam.finished.front().actions == r.best(key).actions);
    }
  }
}

TEST_CASE("width one is greedy decoding") {
  testing::Rng rng(29);
  std::vector<std::string> vocab{"a", "b"};
  for (int gi = 0; gi < 15; ++gi) {
    Grammar g = testing::random_grammar(rng, {}, vocab);
    Model m(g, SourceVocab({"a", "x"}), ModelConfig{6});
    ParamStore p = testing::spread_params(m, gi, 4.0);
    Utterance u = m.utterance(testing::random_source(rng, kWords, 3));
    for (ScoreMode mode : {ScoreMode::local, ScoreMode::global}) {
      BeamResult b = beam_search(m, p, u, 1, mode, 60);
      if (!b.completed()) continue;
      CHECK(b.finished.front().actions == greedy(m, p, u, mode));
    }
  }
}

TEST_CASE("incremental scores match recomputation") {
  testing::Rng rng(31);
  std::vector<std::string> vocab{"a", "b"};
  for (int gi = 0; gi < 10; ++gi) {
    Grammar g = testing::random_grammar(rng, {}, vocab);
    Model m(g, SourceVocab({"a", "x"}), ModelConfig{6});
    ParamStore p = testing::spread_params(m, gi, 3.0);
    Utterance u = m.utterance(testing::random_source(rng, kWords, 3));
    for (ScoreMode mode : {ScoreMode::local, ScoreMode::global}) {
      BeamResult b = beam_search(m, p, u, 4, mode, 40);
      for (const auto& h : b.finished) {
        Tape tape(false);
        Session s(m, p, tape, u);
        SequenceScore sc = s.score(h.actions, mode);
        CHECK(std::abs(sc.sum_logits.item() - h.sum_logits) <= 1e-9);
        CHECK(std::abs(sc.sum_logprobs.item() - h.sum_local_logprob) <= 1e-9);
        CHECK(h.key(mode) == (mode == ScoreMode::local ? h.mean_local_logprob() : h.mean_logit()));
      }
    }
  }
}

TEST_CASE("global argmax is invariant to positive logit scaling") {
  testing::Rng rng(37);
  for (int i = 0; i < 10; ++i) {
    Grammar g = testing::random_finite_grammar(rng, 3, 50);
    Model m(g, SourceVocab({"a"}), ModelConfig{4});
    ParamStore p = testing::spread_params(m, i, 4.0);
    ParamStore scaled = p;
    // Logits are affine in the output layer, so scaling W and b scales every logit.
    for (const char* name : {"out.action.W", "out.action.b"}) {
      for (double& v : scaled.at(name).data()) v *= 2.5;
    }
    Utterance u = m.utterance({"a", "b"});
    OracleReport a = exhaustive_derivations(m, p, u, ScoreMode::global, 1000);
    OracleReport b = exhaustive_derivations(m, scaled, u, ScoreMode::global, 1000);
    CHECK(a.best(RankKey::sum_logit).actions == b.best(RankKey::sum_logit).actions);
    CHECK(std::abs(b.best(RankKey::sum_logit).sum_logits - 2.5 * a.best(RankKey::sum_logit).sum_logits) <= 1e-9);
  }
}

TEST_CASE("local and global can disagree on a two-branch grammar") {
  // UseId spreads local mass over four token candidates twice; UseKw has one
  // forced child. Zero weights leave only the biases, with p_gen = 0.5.
  Grammar g = Grammar::parse("root S\nS = UseId(token n) | UseKw(K k)\nK = A()").with_token_vocab({"p", "q", "r"});
  Model m(g, SourceVocab({"p"}), ModelConfig{4});
  ParamStore p = zero_params(m);
  p.at("out.action.b")[0] = 0.3;  // UseId
  p.at("out.token.b").fill(2.0);
  Utterance u = m.utterance({"p"});
  OracleReport local = exhaustive_derivations(m, p, u, ScoreMode::local, 3);
  OracleReport global = exhaustive_derivations(m, p, u, ScoreMode::global, 3);
  CHECK(local.best(RankKey::sum_local_logprob).actions == ActionSequence{Action::apply(1), Action::apply(2)});
  // Best UseId path: 0.3 + 2 (gen-only q) + 2 (</f>) against 0 for UseKw.
  const Derivation& best = global.best(RankKey::sum_logit);
  CHECK(best.actions.front() == Action::apply(0));
  CHECK(best.sum_logits == doctest::Approx(4.3).epsilon(1e-12));
}

TEST_CASE("decode throws when nothing completes") {
  Grammar g = Grammar::parse("root S\nS = L(token v)").with_token_vocab({"a"});
  Model m(g, SourceVocab({"a"}), ModelConfig{4});
  ParamStore p = m.init_params(1);
  Utterance u = m.utterance({"a"});
  CHECK_THROWS_AS(decode(m, p, u, 2, ScoreMode::local, 1), SearchError);
  CHECK(default_max_steps(3) == 50);
}
