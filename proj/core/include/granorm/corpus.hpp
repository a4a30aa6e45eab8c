#pragma once

#include <filesystem>
#include <istream>
#include <string>
#include <vector>

#include "granorm/grammar.hpp"
#include "granorm/transition.hpp"
#include "granorm/vocab.hpp"

namespace granorm {

struct Example {
  std::vector<std::string> src;
  std::string tgt_sexpr;
  AstNode tgt;
  ActionSequence tgt_actions;
};

/// One JSON object per line with `src` (string array) and `tgt`
/// (S-expression). Blank lines are skipped. Throws DataError naming the
/// 1-based line on malformed JSON or an invalid target.
std::vector<Example> read_jsonl(std::istream& in, const Grammar& grammar, const std::string& origin = "<stream>");
std::vector<Example> load_jsonl(const std::filesystem::path& path, const Grammar& grammar);

std::string to_jsonl_line(const std::vector<std::string>& src, const std::string& tgt_sexpr);

/// Target tokens (GenToken payloads other than `</f>`) seen at least
/// `min_count` times across `examples`, sorted.
std::vector<std::string> target_token_vocab(const std::vector<Example>& examples, int min_count = 2);

/// Source tokens seen at least `min_count` times, behind `<unk>`.
SourceVocab source_vocab(const std::vector<Example>& examples, int min_count = 2);

Grammar load_grammar(const std::filesystem::path& path);

}  // namespace granorm
