#include <cctype>
#include <sstream>

#include "granorm/error.hpp"
#include "granorm/transition.hpp"

namespace granorm {

namespace {

void write_quoted(std::ostream& os, const std::string& tok) {
  os << '"';
  for (char c : tok) {
    if (c == '"' || c == '\\') os << '\\';
    os << c;
  }
  os << '"';
}

void write_token_list(std::ostream& os, const TokenList& list) {
  os << "(tok";
  for (const auto& tok : list) {
    os << ' ';
    write_quoted(os, tok);
  }
  os << ')';
}

void write_node(std::ostream& os, const AstNode& node, const Grammar& grammar) {
  const Constructor& ctor = grammar.constructor(node.constructor);
  os << '(' << ctor.name;
  for (std::size_t i = 0; i < ctor.fields.size(); ++i) {
    const FieldDecl& decl = ctor.fields[i];
    const FieldValue& value = node.fields[i];
    bool primitive = grammar.is_primitive(decl.type);
    std::size_t n = primitive ? value.token_lists.size() : value.nodes.size();
    auto item = [&](std::size_t k) {
      if (primitive) {
        write_token_list(os, value.token_lists[k]);
      } else {
        write_node(os, value.nodes[k], grammar);
      }
    };
    os << ' ';
    if (decl.cardinality == Cardinality::multiple) {
      os << '[';
      for (std::size_t k = 0; k < n; ++k) {
        if (k > 0) os << ' ';
        item(k);
      }
      os << ']';
    } else if (n == 0) {
      os << "none";
    } else {
      item(0);
    }
  }
  os << ')';
}

struct SNode {
  enum class Kind { list, vector, atom, string };
  Kind kind = Kind::atom;
  std::string text;
  std::vector<SNode> children;
  std::size_t offset = 0;
};

class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {}

  SNode read_top() {
    SNode n = read();
    skip();
    if (pos_ < text_.size()) fail("trailing characters after expression");
    return n;
  }

 private:
  void skip() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])) != 0) ++pos_;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw TransitionError("s-expression offset " + std::to_string(pos_) + ": " + msg);
  }

  SNode read() {
    skip();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    SNode n;
    n.offset = pos_;
    char c = text_[pos_];
    if (c == '(' || c == '[') {
      char close = c == '(' ? ')' : ']';
      n.kind = c == '(' ? SNode::Kind::list : SNode::Kind::vector;
      ++pos_;
      for (;;) {
        skip();
        if (pos_ >= text_.size()) fail(std::string("missing '") + close + "'");
        if (text_[pos_] == close) {
          ++pos_;
          break;
        }
        if (text_[pos_] == ')' || text_[pos_] == ']') fail("mismatched bracket");
        n.children.push_back(read());
      }
    } else if (c == '"') {
      n.kind = SNode::Kind::string;
      ++pos_;
      for (;;) {
        if (pos_ >= text_.size()) fail("unterminated string");
        char d = text_[pos_++];
        if (d == '"') break;
        if (d == '\\') {
          if (pos_ >= text_.size()) fail("dangling escape");
          d = text_[pos_++];
        }
        n.text.push_back(d);
      }
    } else if (c == ')' || c == ']') {
      fail("unexpected closing bracket");
    } else {
      n.kind = SNode::Kind::atom;
      while (pos_ < text_.size()) {
        char d = text_[pos_];
        if (std::isspace(static_cast<unsigned char>(d)) != 0 || d == '(' || d == ')' || d == '[' ||
            d == ']' || d == '"') {
          break;
        }
        n.text.push_back(d);
        ++pos_;
      }
    }
    return n;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

[[noreturn]] void convert_fail(const SNode& n, const std::string& msg) {
  throw TransitionError("s-expression offset " + std::to_string(n.offset) + ": " + msg);
}

TokenList convert_tokens(const SNode& n) {
  if (n.kind != SNode::Kind::list || n.children.empty() || n.children[0].kind != SNode::Kind::atom ||
      n.children[0].text != "tok") {
    convert_fail(n, "expected (tok ...)");
  }
  TokenList out;
  for (std::size_t i = 1; i < n.children.size(); ++i) {
    const SNode& c = n.children[i];
    if (c.kind != SNode::Kind::string) convert_fail(c, "tokens must be double-quoted");
    if (c.text.empty()) convert_fail(c, "empty token");
    if (c.text == kEndOfField) convert_fail(c, "reserved token </f>");
    out.push_back(c.text);
  }
  return out;
}

AstNode convert_node(const SNode& n, const Grammar& grammar, const std::string& type) {
  if (n.kind != SNode::Kind::list || n.children.empty() || n.children[0].kind != SNode::Kind::atom) {
    convert_fail(n, "expected (Constructor ...) of type " + type);
  }
  auto id = grammar.find_constructor(n.children[0].text);
  if (!id) convert_fail(n, "unknown constructor '" + n.children[0].text + "'");
  const Constructor& ctor = grammar.constructor(*id);
  if (ctor.result_type != type) {
    convert_fail(n, "constructor '" + ctor.name + "' builds " + ctor.result_type + ", expected " + type);
  }
  if (n.children.size() - 1 != ctor.fields.size()) {
    convert_fail(n, "constructor '" + ctor.name + "' expects " + std::to_string(ctor.fields.size()) +
                        " fields, got " + std::to_string(n.children.size() - 1));
  }
  AstNode node;
  node.constructor = ctor.id;
  node.fields.resize(ctor.fields.size());
  for (std::size_t i = 0; i < ctor.fields.size(); ++i) {
    const FieldDecl& decl = ctor.fields[i];
    const SNode& v = n.children[i + 1];
    FieldValue& out = node.fields[i];
    bool primitive = grammar.is_primitive(decl.type);
    auto item = [&](const SNode& s) {
      if (primitive) {
        out.token_lists.push_back(convert_tokens(s));
      } else {
        out.nodes.push_back(convert_node(s, grammar, decl.type));
      }
    };
    if (decl.cardinality == Cardinality::multiple) {
      if (v.kind != SNode::Kind::vector) convert_fail(v, "field '" + decl.name + "' expects [ ... ]");
      for (const auto& c : v.children) item(c);
    } else if (v.kind == SNode::Kind::atom && v.text == "none") {
      if (decl.cardinality != Cardinality::optional) {
        convert_fail(v, "field '" + decl.name + "' is not optional");
      }
    } else {
      item(v);
    }
  }
  return node;
}

}  // namespace

std::string to_sexpr(const AstNode& ast, const Grammar& grammar) {
  std::ostringstream os;
  write_node(os, ast, grammar);
  return os.str();
}

AstNode parse_sexpr(std::string_view text, const Grammar& grammar) {
  SNode top = Reader(text).read_top();
  return convert_node(top, grammar, grammar.root_type());
}

}  // namespace granorm
