#include <benchmark/benchmark.h>

#include <map>
#include <sstream>

#include "granorm/search.hpp"
#include "granorm/synth.hpp"
#include "granorm/training.hpp"

using namespace granorm;

namespace {

struct Fixture {
  std::vector<Example> train;
  Model model;
  ParamStore params;

  static std::vector<Example> load(const Grammar& g) {
    SynthSpec spec;
    spec.n_train = 200;
    SynthDataset ds = gen_label_bias_dataset(spec);
    std::string text;
    for (const auto& l : ds.train) text += to_jsonl_line(l.src, l.tgt) + "\n";
    std::istringstream in(text);
    return read_jsonl(in, g);
  }

  explicit Fixture(std::size_t dim)
      : train(load(Grammar::parse(kSynthGrammar))),
        model(build_model(Grammar::parse(kSynthGrammar), train, dim)),
        params(model.init_params(1)) {}
};

const Fixture& fixture(std::size_t dim) {
  static std::map<std::size_t, Fixture> cache;
  auto it = cache.find(dim);
  if (it == cache.end()) it = cache.emplace(dim, Fixture(dim)).first;
  return it->second;
}

void BM_MleForwardBackward(benchmark::State& state) {
  const Fixture& f = fixture(static_cast<std::size_t>(state.range(0)));
  std::size_t i = 0;
  for (auto _ : state) {
    const Example& ex = f.train[i++ % f.train.size()];
    Utterance u = f.model.utterance(ex.src);
    Tape tape(true);
    Session s(f.model, f.params, tape, u);
    Var loss = mle_loss(s, ex.tgt_actions);
    tape.backward(loss);
    benchmark::DoNotOptimize(tape.param_grads(f.params));
  }
}
BENCHMARK(BM_MleForwardBackward)->Arg(16)->Arg(64);

void BM_GlobalTrainStep(benchmark::State& state) {
  const Fixture& f = fixture(64);
  ParamStore p = f.params;
  AdamState adam;
  TrainingConfig cfg;
  cfg.mode = ScoreMode::global;
  cfg.neg_beam_width = static_cast<std::size_t>(state.range(0));
  std::vector<const Example*> batch;
  for (std::size_t k = 0; k < cfg.batch_size; ++k) batch.push_back(&f.train[k]);
  for (auto _ : state) benchmark::DoNotOptimize(train_step(f.model, p, adam, batch, cfg));
}
BENCHMARK(BM_GlobalTrainStep)->Arg(5)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_BeamSearch(benchmark::State& state) {
  const Fixture& f = fixture(64);
  std::size_t i = 0;
  for (auto _ : state) {
    const Example& ex = f.train[i++ % f.train.size()];
    benchmark::DoNotOptimize(beam_search(f.model, f.params, f.model.utterance(ex.src),
                                         static_cast<std::size_t>(state.range(0)), ScoreMode::global));
  }
}
BENCHMARK(BM_BeamSearch)->Arg(1)->Arg(5)->Arg(20);

void BM_Exhaustive(benchmark::State& state) {
  const Fixture& f = fixture(64);
  std::size_t i = 0;
  for (auto _ : state) {
    const Example& ex = f.train[i++ % f.train.size()];
    benchmark::DoNotOptimize(exhaustive_derivations(f.model, f.params, f.model.utterance(ex.src), ScoreMode::global,
                                                    static_cast<std::size_t>(state.range(0))));
  }
}
BENCHMARK(BM_Exhaustive)->Arg(3)->Arg(4);

}  // namespace

BENCHMARK_MAIN();
