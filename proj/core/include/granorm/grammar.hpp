#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace granorm {

/// Reserved token closing every primitive field.
inline constexpr std::string_view kEndOfField = "</f>";
/// Name of the single built-in primitive type.
inline constexpr std::string_view kTokenType = "token";

enum class Cardinality { single, optional, multiple };

struct FieldDecl {
  std::string name;
  std::string type;
  Cardinality cardinality = Cardinality::single;

  bool operator==(const FieldDecl&) const = default;
};

struct Constructor {
  int id = 0;
  std::string name;
  std::string result_type;
  std::vector<FieldDecl> fields;

  bool operator==(const Constructor&) const = default;
};

/// A validated ASDL-like grammar plus the output token vocabulary.
///
/// Text format, one declaration per line:
///
///     # comment
///     root Expr
///     Expr = Call(Expr fn, Expr* args) | Lit(token value)
///     Expr = Empty()
///
/// A field type suffixed with `?` is optional, with `*` multiple. `token` is
/// the primitive type. Constructor ids follow declaration order from 0.
///
/// Instances are immutable once built.
class Grammar {
 public:
  static Grammar parse(std::string_view text);

  const std::string& root_type() const noexcept { return root_type_; }
  std::span<const Constructor> constructors() const noexcept { return constructors_; }
  const Constructor& constructor(int id) const;
  std::optional<int> find_constructor(std::string_view name) const;

  /// Composite type names in order of first declaration.
  std::span<const std::string> composite_types() const noexcept { return composite_order_; }
  const std::set<std::string>& primitive_types() const noexcept { return primitive_types_; }
  bool is_composite(std::string_view type) const;
  bool is_primitive(std::string_view type) const;

  /// Constructors whose result type is `type`, in declaration order.
  /// Throws GrammarError when `type` is not a declared composite type.
  std::vector<const Constructor*> constructors_of(std::string_view type) const;
  std::span<const int> constructor_ids_of(std::string_view type) const;

  const std::vector<std::string>& token_vocab() const noexcept { return token_vocab_; }
  std::optional<int> token_index(std::string_view token) const;
  int end_of_field_index() const noexcept { return end_of_field_index_; }

  /// Copy of this grammar with the given output vocabulary. `</f>` is appended
  /// when absent; a duplicated token is an error.
  Grammar with_token_vocab(std::vector<std::string> tokens) const;

  /// Inverse of parse() for the declarations (the vocabulary is not rendered).
  std::string render() const;

  bool operator==(const Grammar& other) const;

 private:
  std::string root_type_;
  std::vector<Constructor> constructors_;
  std::vector<std::string> composite_order_;
  std::map<std::string, std::vector<int>, std::less<>> by_type_;
  std::set<std::string> primitive_types_;
  std::unordered_map<std::string, int> constructor_index_;
  std::vector<std::string> token_vocab_;
  std::unordered_map<std::string, int> token_index_;
  int end_of_field_index_ = 0;
};

std::string_view to_string(Cardinality c) noexcept;

}  // namespace granorm
