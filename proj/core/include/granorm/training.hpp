#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "granorm/corpus.hpp"
#include "granorm/metrics.hpp"
#include "granorm/model.hpp"
#include "granorm/optimizer.hpp"
#include "granorm/search.hpp"

namespace granorm {

struct TrainingConfig {
  ScoreMode mode = ScoreMode::local;
  double lr = 5e-4;
  double margin = 0.1;
  std::size_t neg_beam_width = 20;
  std::size_t epochs = 30;
  std::size_t batch_size = 8;
  std::uint64_t seed = 1;
  std::size_t dim = 64;
  std::size_t eval_beam_width = 5;
  double clip_norm = 5.0;
  std::size_t patience = 0;  // stop after this many epochs without a dev gain; 0 disables
  std::size_t jobs = 1;      // threads for negative mining and dev decoding

  /// Throws Error on margin <= 0, neg_beam_width < 2 (global), or zero sizes.
  void validate() const;
};

struct EpochStats {
  std::size_t epoch = 0;
  ScoreMode mode = ScoreMode::local;
  double loss = 0.0;
  std::optional<double> active_hinge_frac;  // global only
  double dev_em = 0.0;
  double dev_bleu = 0.0;
  std::size_t skipped = 0;  // global examples without a non-gold finished hypothesis

  nlohmann::json to_json() const;
};

struct TrainResult {
  ParamStore params;  // best epoch by dev exact match (later epochs win ties)
  std::size_t best_epoch = 0;
  std::vector<EpochStats> stats;
  bool converged = false;  // an epoch ended without any parameter update
};

/// Parser plus parameters, stored as a checkpoint with a JSON sidecar
/// (`<path>.meta.json`) holding the grammar, both vocabularies and the size.
struct ModelBundle {
  Model model;
  ParamStore params;
  ScoreMode mode = ScoreMode::local;
};

std::filesystem::path meta_path(const std::filesystem::path& checkpoint);
void save_bundle(const std::filesystem::path& checkpoint, const ModelBundle& bundle);
ModelBundle load_bundle(const std::filesystem::path& checkpoint);

/// Model over `grammar` with token vocabulary and source vocabulary built
/// from `train` (count >= 2).
Model build_model(const Grammar& grammar, const std::vector<Example>& train, std::size_t dim);

Var mle_loss(const Session& session, std::span<const Action> gold);

double max_margin_loss(double o_neg, double o_pos, double margin);
Var max_margin_loss(Var o_neg, Var o_pos, double margin);

/// Finished global-mode beam hypotheses with the gold sequence removed.
std::vector<ActionSequence> mine_negatives(const Model& model, const ParamStore& params, const Utterance& utterance,
                                           std::span<const Action> gold, std::size_t width);

struct GlobalLoss {
  Var loss;  // mean hinge over the negatives
  std::size_t active = 0;
};

/// Hinge against every negative on `session`'s tape, averaged. `negatives`
/// must be non-empty.
GlobalLoss global_loss(const Session& session, std::span<const Action> gold,
                       std::span<const ActionSequence> negatives, double margin);

struct StepReport {
  double loss = 0.0;  // mean over contributing examples
  std::size_t examples = 0;
  std::size_t skipped = 0;
  std::size_t hinges = 0;
  std::size_t active_hinges = 0;
  bool updated = false;
};

/// One optimizer step on `batch`. Local: mean NLL. Global: negatives are
/// mined from the current parameters, then mean hinge. A step whose loss is
/// exactly zero leaves `params` and `adam` untouched.
StepReport train_step(const Model& model, ParamStore& params, AdamState& adam, std::span<const Example* const> batch,
                      const TrainingConfig& config);

/// Parameters of a local checkpoint, checked against `model`.
ParamStore init_global_from_local(const std::filesystem::path& local_checkpoint, const Model& model);

/// Top hypothesis per example (nullopt when nothing completed), in input order.
std::vector<std::optional<Hypothesis>> decode_all(const Model& model, const ParamStore& params,
                                                  const std::vector<std::vector<std::string>>& sources,
                                                  std::size_t width, ScoreMode mode, std::size_t jobs = 1);

EvalReport evaluate_model(const Model& model, const ParamStore& params, const std::vector<Example>& examples,
                          std::size_t width, ScoreMode mode, std::size_t jobs = 1);

using EpochCallback = std::function<void(const EpochStats&)>;

TrainResult train(const Model& model, ParamStore params, const std::vector<Example>& train_set,
                  const std::vector<Example>& dev_set, const TrainingConfig& config,
                  const EpochCallback& on_epoch = {});

}  // namespace granorm
