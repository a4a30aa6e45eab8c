#include "granorm/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "granorm/checkpoint.hpp"
#include "granorm/error.hpp"
#include "granorm/log.hpp"

namespace granorm {

void TrainingConfig::validate() const {
  if (!(margin > 0.0)) throw Error("margin must be positive");
  if (!(lr > 0.0)) throw Error("learning rate must be positive");
  if (mode == ScoreMode::global && neg_beam_width < 2) throw Error("negative beam width must be >= 2 in global mode");
  if (batch_size == 0) throw Error("batch size must be >= 1");
  if (eval_beam_width == 0) throw Error("evaluation beam width must be >= 1");
  if (dim == 0 || dim % 2 != 0) throw Error("dim must be a positive even number");
  if (jobs == 0) throw Error("jobs must be >= 1");
}

nlohmann::json EpochStats::to_json() const {
  nlohmann::json j;
  j["epoch"] = epoch;
  j["mode"] = std::string(to_string(mode));
  j["loss"] = loss;
  j["active_hinge_frac"] = active_hinge_frac ? nlohmann::json(*active_hinge_frac) : nlohmann::json(nullptr);
  j["dev_em"] = dev_em;
  j["dev_bleu"] = dev_bleu;
  j["skipped"] = skipped;
  return j;
}

// ---------------------------------------------------------------------------

std::filesystem::path meta_path(const std::filesystem::path& checkpoint) {
  return std::filesystem::path(checkpoint.string() + ".meta.json");
}

void save_bundle(const std::filesystem::path& checkpoint, const ModelBundle& bundle) {
  save_checkpoint(checkpoint, bundle.params);
  const Model& m = bundle.model;
  nlohmann::json meta;
  meta["grammar"] = m.grammar().render();
  meta["token_vocab"] = m.grammar().token_vocab();
  meta["source_vocab"] = m.source_vocab().tokens();
  meta["dim"] = m.config().dim;
  meta["mode"] = std::string(to_string(bundle.mode));
  std::ofstream out(meta_path(checkpoint), std::ios::binary);
  if (!out) throw DataError("cannot write " + meta_path(checkpoint).string());
  out << meta.dump(2) << '\n';
}

ModelBundle load_bundle(const std::filesystem::path& checkpoint) {
  std::ifstream in(meta_path(checkpoint));
  if (!in) throw DataError("cannot open " + meta_path(checkpoint).string());
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(in);
    Grammar g = Grammar::parse(meta.at("grammar").get<std::string>())
                    .with_token_vocab(meta.at("token_vocab").get<std::vector<std::string>>());
    std::vector<std::string> src = meta.at("source_vocab").get<std::vector<std::string>>();
    if (!src.empty() && src.front() == kUnknown) src.erase(src.begin());
    ModelConfig cfg{meta.at("dim").get<std::size_t>()};
    ModelBundle b{Model(std::move(g), SourceVocab(std::move(src)), cfg), load_checkpoint(checkpoint),
                  parse_score_mode(meta.at("mode").get<std::string>())};
    b.model.check_params(b.params);
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(meta_path(checkpoint).string() + ": " + e.what());
  }
}

Model build_model(const Grammar& grammar, const std::vector<Example>& train, std::size_t dim) {
  return Model(grammar.with_token_vocab(target_token_vocab(train, 2)), source_vocab(train, 2), ModelConfig{dim});
}

// ---------------------------------------------------------------------------

Var mle_loss(const Session& session, std::span<const Action> gold) {
  return -session.score(gold, ScoreMode::local).sum_logprobs;
}

double max_margin_loss(double o_neg, double o_pos, double margin) { return std::max(0.0, o_neg - o_pos + margin); }

Var max_margin_loss(Var o_neg, Var o_pos, double margin) {
  return max_with_constant(add_scalar(sub(o_neg, o_pos), margin), 0.0);
}

std::vector<ActionSequence> mine_negatives(const Model& model, const ParamStore& params, const Utterance& utterance,
                                           std::span<const Action> gold, std::size_t width) {
  BeamResult r = beam_search(model, params, utterance, width, ScoreMode::global);
  std::vector<ActionSequence> out;
  for (auto& h : r.finished) {
    if (std::equal(h.actions.begin(), h.actions.end(), gold.begin(), gold.end())) continue;
    out.push_back(std::move(h.actions));
  }
  return out;
}

GlobalLoss global_loss(const Session& session, std::span<const Action> gold,
                       std::span<const ActionSequence> negatives, double margin) {
  if (negatives.empty()) throw Error("global_loss needs at least one negative");
  std::vector<std::span<const Action>> seqs{gold};
  seqs.insert(seqs.end(), negatives.begin(), negatives.end());
  std::vector<SequenceScore> scores = session.score_all(std::span<const std::span<const Action>>(seqs), ScoreMode::global);
  Var o_pos = scores.front().mean_logit;
  std::vector<Var> hinges;
  GlobalLoss out;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    Var o_neg = scores[i].mean_logit;
    Var h = max_margin_loss(o_neg, o_pos, margin);
    if (h.item() > 0.0) ++out.active;
    hinges.push_back(h);
  }
  out.loss = mean(concat(hinges));
  return out;
}

namespace {

template <class Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(jobs);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < jobs; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += jobs) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

StepReport train_step(const Model& model, ParamStore& params, AdamState& adam, std::span<const Example* const> batch,
                      const TrainingConfig& config) {
  StepReport report;
  std::vector<Utterance> utts;
  for (const Example* ex : batch) utts.push_back(model.utterance(ex->src));

  std::vector<std::vector<ActionSequence>> negatives(batch.size());
  if (config.mode == ScoreMode::global) {
    parallel_for(batch.size(), config.jobs, [&](std::size_t i) {
      negatives[i] = mine_negatives(model, params, utts[i], batch[i]->tgt_actions, config.neg_beam_width);
    });
  }

  Tape tape(true);
  std::vector<Var> losses;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (config.mode == ScoreMode::global && negatives[i].empty()) {
      ++report.skipped;
      continue;
    }
    Session session(model, params, tape, utts[i]);
    if (config.mode == ScoreMode::local) {
      losses.push_back(mle_loss(session, batch[i]->tgt_actions));
    } else {
      GlobalLoss gl = global_loss(session, batch[i]->tgt_actions, negatives[i], config.margin);
      report.hinges += negatives[i].size();
      report.active_hinges += gl.active;
      losses.push_back(gl.loss);
    }
  }
  report.examples = losses.size();
  if (losses.empty()) return report;

  Var loss = mean(concat(losses));
  report.loss = loss.item();
  if (report.loss == 0.0) return report;

  tape.backward(loss);
  std::vector<Tensor> grads = tape.param_grads(params);
  clip_global_norm(grads, config.clip_norm);
  adam_step(params, grads, adam, AdamConfig{config.lr});
  report.updated = true;
  return report;
}

ParamStore init_global_from_local(const std::filesystem::path& local_checkpoint, const Model& model) {
  ParamStore params = load_checkpoint(local_checkpoint);
  model.check_params(params);
  return params;
}

// ---------------------------------------------------------------------------

std::vector<std::optional<Hypothesis>> decode_all(const Model& model, const ParamStore& params,
                                                  const std::vector<std::vector<std::string>>& sources,
                                                  std::size_t width, ScoreMode mode, std::size_t jobs) {
  std::vector<std::optional<Hypothesis>> out(sources.size());
  parallel_for(sources.size(), jobs, [&](std::size_t i) {
    Utterance u = model.utterance(sources[i]);
    BeamResult r = beam_search(model, params, u, width, mode);
    if (r.completed()) out[i] = std::move(r.finished.front());
  });
  return out;
}

EvalReport evaluate_model(const Model& model, const ParamStore& params, const std::vector<Example>& examples,
                          std::size_t width, ScoreMode mode, std::size_t jobs) {
  std::vector<std::vector<std::string>> sources;
  std::vector<AstNode> gold;
  for (const auto& ex : examples) {
    sources.push_back(ex.src);
    gold.push_back(ex.tgt);
  }
  auto hyps = decode_all(model, params, sources, width, mode, jobs);
  std::vector<std::optional<AstNode>> preds;
  for (const auto& h : hyps) {
    preds.push_back(h ? std::optional<AstNode>(actions_to_ast(h->actions, model.grammar())) : std::nullopt);
  }
  return evaluate(gold, preds, model.grammar());
}

namespace {

// Gold actions are derivable only if every emitted token is a vocabulary
// token or appears in the source.
bool derivable(const Model& model, const Example& ex) {
  for (const auto& a : ex.tgt_actions) {
    if (!a.is_gen()) continue;
    if (model.grammar().token_index(a.token)) continue;
    if (std::find(ex.src.begin(), ex.src.end(), a.token) == ex.src.end()) return false;
  }
  return !ex.src.empty();
}

}  // namespace

TrainResult train(const Model& model, ParamStore params, const std::vector<Example>& train_set,
                  const std::vector<Example>& dev_set, const TrainingConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  model.check_params(params);

  std::vector<const Example*> order;
  for (const auto& ex : train_set) {
    if (derivable(model, ex)) order.push_back(&ex);
  }
  if (order.size() < train_set.size()) {
    log_warn("skipping " + std::to_string(train_set.size() - order.size()) +
             " training examples whose targets cannot be derived");
  }
  if (order.empty()) throw DataError("no usable training examples");

  std::mt19937_64 data_rng(derive_seed(config.seed, "data-order"));
  AdamState adam;
  TrainResult result{params, 0, {}};
  double best_em = -1.0;
  std::size_t since_gain = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      auto j = static_cast<std::size_t>(static_cast<double>(data_rng() >> 11) * 0x1.0p-53 * static_cast<double>(i));
      std::swap(order[i - 1], order[std::min(j, i - 1)]);
    }

    double loss_sum = 0.0;
    std::size_t steps = 0;
    EpochStats st;
    st.epoch = epoch;
    st.mode = config.mode;
    std::size_t hinges = 0, active = 0;
    bool updated = false;
    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      std::size_t e = std::min(order.size(), b + config.batch_size);
      std::span<const Example* const> batch(order.data() + b, e - b);
      StepReport r = train_step(model, params, adam, batch, config);
      st.skipped += r.skipped;
      hinges += r.hinges;
      active += r.active_hinges;
      updated = updated || r.updated;
      if (r.examples > 0) {
        loss_sum += r.loss;
        ++steps;
      }
    }
    st.loss = steps ? loss_sum / static_cast<double>(steps) : 0.0;
    if (config.mode == ScoreMode::global) {
      st.active_hinge_frac = hinges ? static_cast<double>(active) / static_cast<double>(hinges) : 0.0;
    }

    if (!dev_set.empty()) {
      EvalReport dev = evaluate_model(model, params, dev_set, config.eval_beam_width, config.mode, config.jobs);
      st.dev_em = dev.exact_match;
      st.dev_bleu = dev.bleu;
    }
    std::ostringstream msg;
    msg << "epoch " << epoch << " " << to_string(config.mode) << " loss=" << st.loss << " dev_em=" << st.dev_em;
    log_info(msg.str());

    result.stats.push_back(st);
    if (on_epoch) on_epoch(st);

    if (st.dev_em > best_em) since_gain = 0;
    else ++since_gain;
    if (st.dev_em >= best_em) {
      best_em = st.dev_em;
      result.params = params;
      result.best_epoch = epoch;
    }
    if (!updated) {
      // Parameters did not move, so every later epoch would repeat this one.
      log_info("no parameter update in epoch " + std::to_string(epoch) + "; stopping");
      result.converged = true;
      break;
    }
    if (config.patience > 0 && since_gain >= config.patience) break;
  }
  return result;
}

}  // namespace granorm
