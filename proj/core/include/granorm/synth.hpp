#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace granorm {

/// Synthetic benchmark with an entropy asymmetry between two branches:
/// `UseId` must emit one of K identifiers while `UseKw` picks one of two
/// zero-field keywords.
struct SynthSpec {
  std::size_t n_train = 500;
  std::size_t n_dev = 100;
  std::size_t n_test = 200;
  std::size_t identifier_pool = 50;  // K
  double branch_prior = 0.8;         // fraction of UseId targets
  double noise = 0.3;                // per-slot distractor probability
  double held_out = 0.2;             // pool fraction reserved for dev/test
  double zipf = 1.5;                 // identifier rank exponent; 0 is uniform
  double rare_cue = 0.5;             // chance a keyword is cued by a rare synonym
  std::uint64_t seed = 1;

  /// Throws Error unless K >= 10, 0 < branch_prior < 1, noise, held_out and rare_cue in [0, 1), zipf >= 0.
  void validate() const;
  nlohmann::json to_json() const;
};

extern const char* const kSynthGrammar;

struct SynthLine {
  std::vector<std::string> src;
  std::string tgt;
};

struct SynthDataset {
  std::vector<SynthLine> train, dev, test;
  std::vector<std::string> train_identifiers;
  std::vector<std::string> held_out_identifiers;
};

SynthDataset gen_label_bias_dataset(const SynthSpec& spec);

/// Writes train.jsonl, dev.jsonl, test.jsonl, grammar.txt and meta.json.
void write_synth_dataset(const SynthSpec& spec, const std::filesystem::path& dir);

}  // namespace granorm
