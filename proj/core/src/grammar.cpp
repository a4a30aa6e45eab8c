#include "granorm/grammar.hpp"

#include <cctype>
#include <sstream>
#include <utility>

#include "granorm/error.hpp"

namespace granorm {

namespace {

bool is_ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) != 0 || c == '_';
}

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_' || c == '.';
}

// Cursor over a single line; column numbers are 1-based.
class LineScanner {
 public:
  LineScanner(std::string_view line, std::size_t line_no) : line_(line), line_no_(line_no) {}

  void skip_space() {
    while (pos_ < line_.size() && std::isspace(static_cast<unsigned char>(line_[pos_])) != 0) ++pos_;
  }

  bool at_end() {
    skip_space();
    return pos_ >= line_.size();
  }

  bool peek(char c) {
    skip_space();
    return pos_ < line_.size() && line_[pos_] == c;
  }

  void expect(char c) {
    skip_space();
    if (pos_ >= line_.size() || line_[pos_] != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  bool accept(char c) {
    if (!peek(c)) return false;
    ++pos_;
    return true;
  }

  std::string identifier(std::string_view what) {
    skip_space();
    if (pos_ >= line_.size() || !is_ident_start(line_[pos_])) fail("expected " + std::string(what));
    std::size_t start = pos_;
    while (pos_ < line_.size() && is_ident_char(line_[pos_])) ++pos_;
    return std::string(line_.substr(start, pos_ - start));
  }

  std::size_t column() const { return pos_ + 1; }

  [[noreturn]] void fail(const std::string& msg) const {
    throw GrammarError(msg, line_no_, pos_ + 1);
  }

 private:
  std::string_view line_;
  std::size_t line_no_;
  std::size_t pos_ = 0;
};

struct PendingField {
  FieldDecl decl;
  std::size_t line;
  std::size_t column;
};

struct PendingConstructor {
  Constructor ctor;
  std::vector<PendingField> fields;
  std::size_t line;
  std::size_t column;
};

}  // namespace

std::string_view to_string(Cardinality c) noexcept {
  switch (c) {
    case Cardinality::single: return "single";
    case Cardinality::optional: return "optional";
    case Cardinality::multiple: return "multiple";
  }
  return "?";
}

Grammar Grammar::parse(std::string_view text) {
  Grammar g;
  g.primitive_types_.insert(std::string(kTokenType));

  std::vector<PendingConstructor> pending;
  bool seen_declaration = false;
  std::size_t root_line = 0;

  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    start = end + 1;

    LineScanner sc(line, line_no);
    if (sc.at_end() || sc.peek('#')) {
      if (end == text.size()) break;
      continue;
    }

    std::string head = sc.identifier("'root' or a type name");
    if (head == "root" && !sc.peek('=')) {
      if (!g.root_type_.empty()) sc.fail("duplicate root declaration");
      if (seen_declaration) sc.fail("root must be the first declaration");
      g.root_type_ = sc.identifier("root type name");
      root_line = line_no;
      if (!sc.at_end()) sc.fail("unexpected text after root type");
    } else {
      if (g.root_type_.empty()) throw GrammarError("missing root declaration before first rule", line_no, 1);
      seen_declaration = true;
      if (head == kTokenType) sc.fail("cannot declare constructors for the primitive type 'token'");
      sc.expect('=');
      do {
        PendingConstructor pc;
        pc.column = sc.column();
        pc.line = line_no;
        pc.ctor.name = sc.identifier("constructor name");
        pc.ctor.result_type = head;
        sc.expect('(');
        if (!sc.accept(')')) {
          do {
            PendingField pf;
            pf.line = line_no;
            sc.skip_space();
            pf.column = sc.column();
            pf.decl.type = sc.identifier("field type");
            if (sc.accept('?')) {
              pf.decl.cardinality = Cardinality::optional;
            } else if (sc.accept('*')) {
              pf.decl.cardinality = Cardinality::multiple;
            }
            pf.decl.name = sc.identifier("field name");
            for (const auto& other : pc.fields) {
              if (other.decl.name == pf.decl.name) {
                throw GrammarError("duplicate field '" + pf.decl.name + "' in constructor '" +
                                       pc.ctor.name + "'",
                                   line_no, pf.column);
              }
            }
            pc.fields.push_back(std::move(pf));
          } while (sc.accept(','));
          sc.expect(')');
        }
        pending.push_back(std::move(pc));
      } while (sc.accept('|'));
      if (!sc.at_end()) sc.fail("unexpected text after constructor list");
    }
    if (end == text.size()) break;
  }

  if (g.root_type_.empty()) throw GrammarError("missing root declaration");

  for (auto& pc : pending) {
    if (g.constructor_index_.contains(pc.ctor.name)) {
      throw GrammarError("duplicate constructor name '" + pc.ctor.name + "'", pc.line, pc.column);
    }
    pc.ctor.id = static_cast<int>(g.constructors_.size());
    g.constructor_index_.emplace(pc.ctor.name, pc.ctor.id);
    auto [it, inserted] = g.by_type_.try_emplace(pc.ctor.result_type);
    if (inserted) g.composite_order_.push_back(pc.ctor.result_type);
    it->second.push_back(pc.ctor.id);
    g.constructors_.push_back(pc.ctor);
  }

  for (std::size_t i = 0; i < pending.size(); ++i) {
    for (const auto& pf : pending[i].fields) {
      if (!g.is_composite(pf.decl.type) && !g.is_primitive(pf.decl.type)) {
        throw GrammarError("undeclared type '" + pf.decl.type + "'", pf.line, pf.column);
      }
      g.constructors_[i].fields.push_back(pf.decl);
    }
  }

  if (!g.is_composite(g.root_type_)) {
    throw GrammarError("root type '" + g.root_type_ + "' has no constructors", root_line, 1);
  }

  return g.with_token_vocab({});
}

const Constructor& Grammar::constructor(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= constructors_.size()) {
    throw GrammarError("unknown constructor id " + std::to_string(id));
  }
  return constructors_[static_cast<std::size_t>(id)];
}

std::optional<int> Grammar::find_constructor(std::string_view name) const {
  auto it = constructor_index_.find(std::string(name));
  if (it == constructor_index_.end()) return std::nullopt;
  return it->second;
}

bool Grammar::is_composite(std::string_view type) const { return by_type_.find(type) != by_type_.end(); }

bool Grammar::is_primitive(std::string_view type) const {
  return primitive_types_.find(std::string(type)) != primitive_types_.end();
}

std::span<const int> Grammar::constructor_ids_of(std::string_view type) const {
  auto it = by_type_.find(type);
  if (it == by_type_.end()) throw GrammarError("unknown composite type '" + std::string(type) + "'");
  return it->second;
}

std::vector<const Constructor*> Grammar::constructors_of(std::string_view type) const {
  std::vector<const Constructor*> out;
  for (int id : constructor_ids_of(type)) out.push_back(&constructors_[static_cast<std::size_t>(id)]);
  return out;
}

std::optional<int> Grammar::token_index(std::string_view token) const {
  auto it = token_index_.find(std::string(token));
  if (it == token_index_.end()) return std::nullopt;
  return it->second;
}

Grammar Grammar::with_token_vocab(std::vector<std::string> tokens) const {
  Grammar g = *this;
  g.token_vocab_.clear();
  g.token_index_.clear();
  bool has_end = false;
  for (auto& t : tokens) {
    if (t.empty()) throw GrammarError("empty token in vocabulary");
    if (g.token_index_.contains(t)) throw GrammarError("duplicate vocabulary token '" + t + "'");
    if (t == kEndOfField) has_end = true;
    g.token_index_.emplace(t, static_cast<int>(g.token_vocab_.size()));
    g.token_vocab_.push_back(std::move(t));
  }
  if (!has_end) {
    g.token_index_.emplace(std::string(kEndOfField), static_cast<int>(g.token_vocab_.size()));
    g.token_vocab_.emplace_back(kEndOfField);
  }
  g.end_of_field_index_ = g.token_index_.at(std::string(kEndOfField));
  return g;
}

std::string Grammar::render() const {
  std::ostringstream os;
  os << "root " << root_type_ << '\n';
  for (const auto& c : constructors_) {
    os << c.result_type << " = " << c.name << '(';
    for (std::size_t i = 0; i < c.fields.size(); ++i) {
      const auto& f = c.fields[i];
      if (i > 0) os << ", ";
      os << f.type;
      if (f.cardinality == Cardinality::optional) os << '?';
      if (f.cardinality == Cardinality::multiple) os << '*';
      os << ' ' << f.name;
    }
    os << ")\n";
  }
  return os.str();
}

bool Grammar::operator==(const Grammar& other) const {
  return root_type_ == other.root_type_ && constructors_ == other.constructors_ &&
         primitive_types_ == other.primitive_types_ && token_vocab_ == other.token_vocab_;
}

}  // namespace granorm
