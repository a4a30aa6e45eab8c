#include "granorm/corpus.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "granorm/error.hpp"
#include "granorm/log.hpp"

namespace granorm {

std::vector<Example> read_jsonl(std::istream& in, const Grammar& grammar, const std::string& origin) {
  std::vector<Example> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fail = [&](const std::string& why) {
      return DataError(origin + ":" + std::to_string(lineno) + ": " + why);
    };
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw fail(std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("src") || !j.contains("tgt")) throw fail("expected an object with `src` and `tgt`");
    if (!j["src"].is_array() || !j["tgt"].is_string()) throw fail("`src` must be a string array and `tgt` a string");
    Example ex;
    for (const auto& t : j["src"]) {
      if (!t.is_string()) throw fail("`src` must be a string array");
      ex.src.push_back(t.get<std::string>());
    }
    ex.tgt_sexpr = j["tgt"].get<std::string>();
    try {
      ex.tgt = parse_sexpr(ex.tgt_sexpr, grammar);
      ex.tgt_actions = ast_to_actions(ex.tgt, grammar);
    } catch (const Error& e) {
      throw fail(std::string("invalid target: ") + e.what());
    }
    out.push_back(std::move(ex));
  }
  if (out.empty()) log_warn(origin + ": no examples");
  return out;
}

std::vector<Example> load_jsonl(const std::filesystem::path& path, const Grammar& grammar) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return read_jsonl(in, grammar, path.string());
}

std::string to_jsonl_line(const std::vector<std::string>& src, const std::string& tgt_sexpr) {
  nlohmann::json j;
  j["src"] = src;
  j["tgt"] = tgt_sexpr;
  return j.dump();
}

std::vector<std::string> target_token_vocab(const std::vector<Example>& examples, int min_count) {
  std::vector<std::vector<std::string>> streams;
  for (const auto& ex : examples) {
    std::vector<std::string> toks;
    for (const auto& a : ex.tgt_actions) {
      if (a.is_gen() && !a.is_end_of_field()) toks.push_back(a.token);
    }
    streams.push_back(std::move(toks));
  }
  return frequent_tokens(streams, min_count);
}

SourceVocab source_vocab(const std::vector<Example>& examples, int min_count) {
  std::vector<std::vector<std::string>> streams;
  for (const auto& ex : examples) streams.push_back(ex.src);
  return SourceVocab(frequent_tokens(streams, min_count));
}

Grammar load_grammar(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return Grammar::parse(ss.str());
}

}  // namespace granorm
