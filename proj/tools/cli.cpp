#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "granorm/checkpoint.hpp"
#include "granorm/corpus.hpp"
#include "granorm/error.hpp"
#include "granorm/log.hpp"
#include "granorm/search.hpp"
#include "granorm/synth.hpp"
#include "granorm/training.hpp"

namespace granorm::cli {

namespace {

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainFlags {
  std::string grammar, train, dev, out, stats, init_from;
  bool cold_start = false;
  TrainingConfig cfg;
};

void add_train_flags(CLI::App& cmd, TrainFlags& f, bool global) {
  cmd.add_option("--grammar", f.grammar, "Grammar file");
  cmd.add_option("--train", f.train, "Training JSONL")->required();
  cmd.add_option("--dev", f.dev, "Development JSONL used for model selection");
  cmd.add_option("--out", f.out, "Output checkpoint path")->required();
  cmd.add_option("--stats", f.stats, "Per-epoch JSONL (default: <out>.stats.jsonl)");
  cmd.add_option("--epochs", f.cfg.epochs, "Maximum number of epochs")->capture_default_str();
  cmd.add_option("--batch-size", f.cfg.batch_size, "Examples per update")->capture_default_str();
  cmd.add_option("--lr", f.cfg.lr, "Adam learning rate")->capture_default_str();
  cmd.add_option("--seed", f.cfg.seed, "Seed for initialization and data order")->capture_default_str();
  cmd.add_option("--dim", f.cfg.dim, "Hidden and embedding size (even)")->capture_default_str();
  cmd.add_option("--eval-beam", f.cfg.eval_beam_width, "Beam width for dev decoding")->capture_default_str();
  cmd.add_option("--clip", f.cfg.clip_norm, "Global gradient norm bound")->capture_default_str();
  cmd.add_option("--patience", f.cfg.patience, "Stop after N epochs without dev gain (0: never)")
      ->capture_default_str();
  cmd.add_option("--jobs", f.cfg.jobs, "Worker threads for mining and dev decoding")->capture_default_str();
  if (global) {
    cmd.add_option("--margin", f.cfg.margin, "Hinge margin")->capture_default_str();
    cmd.add_option("--neg-beam", f.cfg.neg_beam_width, "Beam width for negative mining")->capture_default_str();
    auto* init = cmd.add_option("--init-from", f.init_from, "Local checkpoint to warm-start from");
    auto* cold = cmd.add_flag("--cold-start", f.cold_start, "Start from random parameters");
    init->excludes(cold);
  }
}

std::vector<Example> load_optional(const std::string& path, const Grammar& g) {
  return path.empty() ? std::vector<Example>{} : load_jsonl(path, g);
}

int do_train(TrainFlags& f, ScoreMode mode, std::ostream& out) {
  f.cfg.mode = mode;
  f.cfg.validate();

  std::optional<Model> model;
  std::optional<ParamStore> params;
  if (mode == ScoreMode::global && !f.init_from.empty()) {
    ModelBundle src = load_bundle(f.init_from);
    if (!f.grammar.empty()) {
      Grammar g = load_grammar(f.grammar).with_token_vocab(src.model.grammar().token_vocab());
      if (!(g == src.model.grammar())) throw DataError("--grammar differs from the grammar stored with --init-from");
    }
    model.emplace(src.model.grammar(), src.model.source_vocab(), ModelConfig{f.cfg.dim});
    params = init_global_from_local(f.init_from, *model);
  } else {
    if (f.grammar.empty()) throw UsageError("--grammar is required");
  }

  Grammar base = model ? model->grammar() : load_grammar(f.grammar);
  std::vector<Example> train_set = load_jsonl(f.train, base);
  std::vector<Example> dev_set = load_optional(f.dev, base);
  if (!model) {
    model.emplace(build_model(base, train_set, f.cfg.dim));
    params = model->init_params(derive_seed(f.cfg.seed, "init"));
  }

  std::string stats_path = f.stats.empty() ? f.out + ".stats.jsonl" : f.stats;
  std::ofstream stats(stats_path, std::ios::binary);
  if (!stats) throw DataError("cannot write " + stats_path);
  auto on_epoch = [&](const EpochStats& st) { stats << st.to_json().dump() << '\n' << std::flush; };

  TrainResult r = train(*model, std::move(*params), train_set, dev_set, f.cfg, on_epoch);
  save_bundle(f.out, ModelBundle{*model, std::move(r.params), mode});
  out << "saved " << f.out << " (best epoch " << r.best_epoch << " of " << r.stats.size() << ")\n";
  return ok;
}

std::vector<std::vector<std::string>> read_sources(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<std::vector<std::string>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      out.push_back(j.at("src").get<std::vector<std::string>>());
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<std::string> split_words(const std::string& text) {
  std::istringstream ss(text);
  std::vector<std::string> out;
  for (std::string w; ss >> w;) out.push_back(w);
  return out;
}

ScoreMode mode_or(const std::string& flag, ScoreMode fallback) {
  if (flag.empty()) return fallback;
  try {
    return parse_score_mode(flag);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  init_logging();
  CLI::App app{"Grammar-constrained semantic parser with local and global normalization", "granorm"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  // gen-synth
  SynthSpec synth;
  std::string synth_out;
  auto* gen = app.add_subcommand("gen-synth", "Write the synthetic label-bias benchmark");
  gen->add_option("--out", synth_out, "Output directory")->required();
  gen->add_option("--seed", synth.seed, "Generator seed")->capture_default_str();
  gen->add_option("--n-train", synth.n_train, "Training examples")->capture_default_str();
  gen->add_option("--n-dev", synth.n_dev, "Development examples")->capture_default_str();
  gen->add_option("--n-test", synth.n_test, "Test examples")->capture_default_str();
  gen->add_option("--pool", synth.identifier_pool, "Identifier pool size K")->capture_default_str();
  gen->add_option("--branch-prior", synth.branch_prior, "Fraction of UseId targets")->capture_default_str();
  gen->add_option("--noise", synth.noise, "Distractor probability per slot")->capture_default_str();
  gen->add_option("--held-out", synth.held_out, "Identifier fraction reserved for dev/test")->capture_default_str();
  gen->add_option("--zipf", synth.zipf, "Identifier rank exponent (0: uniform)")->capture_default_str();
  gen->add_option("--rare-cue", synth.rare_cue, "Chance a keyword is cued by a rare synonym")->capture_default_str();

  TrainFlags local_flags, global_flags;
  auto* tl = app.add_subcommand("train-local", "Maximum-likelihood training of the locally normalized model");
  add_train_flags(*tl, local_flags, false);
  auto* tg = app.add_subcommand("train-global",
                                "Max-margin training of the globally normalized model (needs --init-from or --cold-start)");
  global_flags.cfg.epochs = 10;
  add_train_flags(*tg, global_flags, true);

  // decode
  std::string dec_model, dec_input, dec_output, dec_mode;
  std::size_t dec_beam = 5, dec_jobs = 1;
  auto* dec = app.add_subcommand("decode", "Beam-search decode a JSONL file of `src` token lists");
  dec->add_option("--model", dec_model, "Checkpoint")->required();
  dec->add_option("--input", dec_input, "JSONL with a `src` array per line")->required();
  dec->add_option("--output", dec_output, "Output JSONL (default: stdout)");
  dec->add_option("--beam", dec_beam, "Beam width")->capture_default_str()->check(CLI::PositiveNumber);
  dec->add_option("--mode", dec_mode, "local or global (default: the checkpoint's mode)");
  dec->add_option("--jobs", dec_jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);

  // evaluate
  std::string ev_model, ev_data, ev_mode;
  std::size_t ev_beam = 5, ev_jobs = 1;
  bool ev_per_example = false;
  auto* ev = app.add_subcommand("evaluate", "Exact match and corpus BLEU as JSON on stdout");
  ev->add_option("--model", ev_model, "Checkpoint")->required();
  ev->add_option("--data", ev_data, "Labelled JSONL")->required();
  ev->add_option("--beam", ev_beam, "Beam width")->capture_default_str()->check(CLI::PositiveNumber);
  ev->add_option("--mode", ev_mode, "local or global (default: the checkpoint's mode)");
  ev->add_option("--jobs", ev_jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  ev->add_flag("--per-example", ev_per_example, "Include per-example records");

  // oracle-check
  std::string or_model, or_src, or_input, or_mode;
  std::size_t or_index = 0, or_max_steps = 0, or_limit = 100000;
  auto* orc = app.add_subcommand("oracle-check", "Enumerate every derivation and report exact global probabilities");
  orc->add_option("--model", or_model, "Checkpoint")->required();
  auto* src_opt = orc->add_option("--src", or_src, "Whitespace-separated utterance");
  auto* in_opt = orc->add_option("--input", or_input, "JSONL to take the utterance from");
  src_opt->excludes(in_opt);
  orc->add_option("--index", or_index, "Line of --input (0-based, blank lines skipped)")->capture_default_str();
  orc->add_option("--max-steps", or_max_steps, "Derivation length cap (0: 10 x source length + 20)")
      ->capture_default_str();
  orc->add_option("--limit", or_limit, "Abort beyond this many derivations")->capture_default_str();
  orc->add_option("--mode", or_mode, "Logits to score with (default: the checkpoint's mode)");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? ok : usage;
  }

  try {
    if (*gen) {
      write_synth_dataset(synth, synth_out);
      out << "wrote " << synth_out << "\n";
      return ok;
    }
    if (*tl) return do_train(local_flags, ScoreMode::local, out);
    if (*tg) {
      if (global_flags.init_from.empty() && !global_flags.cold_start) {
        err << "train-global: pass --init-from <checkpoint> or --cold-start\n";
        return usage;
      }
      return do_train(global_flags, ScoreMode::global, out);
    }
    if (*dec) {
      ModelBundle b = load_bundle(dec_model);
      ScoreMode mode = mode_or(dec_mode, b.mode);
      auto sources = read_sources(dec_input);
      auto hyps = decode_all(b.model, b.params, sources, dec_beam, mode, dec_jobs);
      std::ofstream file;
      if (!dec_output.empty()) {
        file.open(dec_output, std::ios::binary);
        if (!file) throw DataError("cannot write " + dec_output);
      }
      std::ostream& sink = dec_output.empty() ? out : file;
      for (std::size_t i = 0; i < sources.size(); ++i) {
        nlohmann::json j;
        j["src"] = sources[i];
        if (hyps[i]) {
          j["pred"] = to_sexpr(actions_to_ast(hyps[i]->actions, b.model.grammar()), b.model.grammar());
          j["score"] = hyps[i]->key(mode);
        } else {
          j["pred"] = nullptr;
          j["score"] = nullptr;
        }
        sink << j.dump() << '\n';
      }
      return ok;
    }
    if (*ev) {
      ModelBundle b = load_bundle(ev_model);
      ScoreMode mode = mode_or(ev_mode, b.mode);
      auto examples = load_jsonl(ev_data, b.model.grammar());
      EvalReport r = evaluate_model(b.model, b.params, examples, ev_beam, mode, ev_jobs);
      out << r.to_json(ev_per_example).dump(2) << '\n';
      return ok;
    }
    if (*orc) {
      ModelBundle b = load_bundle(or_model);
      ScoreMode mode = mode_or(or_mode, b.mode);
      std::vector<std::string> tokens;
      if (!or_src.empty()) {
        tokens = split_words(or_src);
      } else if (!or_input.empty()) {
        auto sources = read_sources(or_input);
        if (or_index >= sources.size()) throw UsageError("--index is past the end of --input");
        tokens = sources[or_index];
      } else {
        throw UsageError("oracle-check: pass --src or --input");
      }
      if (tokens.empty()) throw UsageError("oracle-check: empty utterance");
      Utterance u = b.model.utterance(tokens);
      std::size_t cap = or_max_steps ? or_max_steps : default_max_steps(tokens.size());
      OracleReport rep = exhaustive_derivations(b.model, b.params, u, mode, cap, or_limit);
      const Grammar& g = b.model.grammar();
      for (std::size_t i = 0; i < rep.derivations.size(); ++i) {
        const Derivation& d = rep.derivations[i];
        out << (i + 1) << '\t' << num(d.sum_logits) << '\t' << num(d.sum_local_logprob) << '\t'
            << num(d.global_prob) << '\t' << to_sexpr(actions_to_ast(d.actions, g), g) << '\n';
      }
      out << "Z_G=" << num(rep.z_global) << '\n';
      return ok;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return usage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return data;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << '\n';
    return data;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return data;
  }
  return usage;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace granorm::cli
