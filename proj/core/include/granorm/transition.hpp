#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "granorm/grammar.hpp"

namespace granorm {

/// One derivation step: expand a composite slot, emit a primitive token, or
/// close an optional/multiple slot.
struct Action {
  enum class Kind : std::uint8_t { apply_constr = 0, gen_token = 1, reduce = 2 };

  Kind kind = Kind::reduce;
  int constructor = -1;
  std::string token;

  static Action apply(int constructor_id) { return {Kind::apply_constr, constructor_id, {}}; }
  static Action gen(std::string tok) { return {Kind::gen_token, -1, std::move(tok)}; }
  static Action reduce() { return {Kind::reduce, -1, {}}; }

  bool is_apply() const noexcept { return kind == Kind::apply_constr; }
  bool is_gen() const noexcept { return kind == Kind::gen_token; }
  bool is_reduce() const noexcept { return kind == Kind::reduce; }
  bool is_end_of_field() const noexcept { return kind == Kind::gen_token && token == kEndOfField; }

  // Total order used for deterministic tie-breaking: kind, then id, then token.
  auto operator<=>(const Action&) const = default;
  bool operator==(const Action&) const = default;
};

using ActionSequence = std::vector<Action>;
using TokenList = std::vector<std::string>;

std::string to_string(const Action& action, const Grammar& grammar);
std::string to_string(std::span<const Action> actions, const Grammar& grammar);

struct AstNode;

/// Value of one field. Composite fields use `nodes`, primitive fields use
/// `token_lists` (one list per item, without the `</f>` marker).
struct FieldValue {
  std::vector<AstNode> nodes;
  std::vector<TokenList> token_lists;

  bool operator==(const FieldValue& other) const;
};

struct AstNode {
  int constructor = -1;
  std::vector<FieldValue> fields;

  bool operator==(const AstNode&) const = default;
};

/// Throws TransitionError when `ast` does not conform to `grammar` with
/// result type `type` (defaults to the root type).
void validate_ast(const AstNode& ast, const Grammar& grammar, std::string_view type = {});

/// A pending slot on the derivation frontier.
struct FrontierSlot {
  std::vector<std::uint32_t> path;  // (field, item) pairs from the root node to the owner
  int field = -1;                   // -1 is the slot holding the root node itself
  std::string type;
  Cardinality cardinality = Cardinality::single;
  bool primitive = false;
  int items = 0;             // items started in this field
  bool open_tokens = false;  // primitive item currently accepting tokens

  bool operator==(const FrontierSlot&) const = default;
};

/// Partial AST plus the pre-order frontier stack (top = back()). Immutable:
/// apply() returns the successor.
class DerivationState {
 public:
  static DerivationState initial(const Grammar& grammar);

  bool complete() const noexcept { return frontier_.empty(); }
  std::size_t step() const noexcept { return step_; }
  const std::vector<FrontierSlot>& frontier() const noexcept { return frontier_; }
  const FrontierSlot& top() const;
  const std::optional<AstNode>& partial_tree() const noexcept { return tree_; }

  /// Structural legality of `action` at the top slot. Token membership in
  /// the candidate set is not checked here (it depends on the source).
  bool accepts(const Action& action, const Grammar& grammar) const;

  /// Throws TransitionError (carrying the current step) for illegal actions.
  DerivationState apply(const Action& action, const Grammar& grammar) const;

  bool operator==(const DerivationState&) const = default;

 private:
  std::optional<AstNode> tree_;
  std::vector<FrontierSlot> frontier_;
  std::size_t step_ = 0;
};

/// Legal actions at a state, in canonical order: ApplyConstr by constructor
/// id, then GenToken by vocabulary index, then GenToken for source tokens
/// outside the vocabulary by first source position, then Reduce.
struct CandidateSet {
  std::vector<Action> actions;

  std::size_t size() const noexcept { return actions.size(); }
  bool empty() const noexcept { return actions.empty(); }
  const Action& operator[](std::size_t i) const { return actions[i]; }
  /// Index of `action`, or nullopt.
  std::optional<std::size_t> find(const Action& action) const;
};

CandidateSet candidate_actions(const DerivationState& state, const Grammar& grammar,
                               std::span<const std::string> source);

inline DerivationState initial_state(const Grammar& grammar) { return DerivationState::initial(grammar); }

inline DerivationState apply_action(const DerivationState& state, const Action& action,
                                    const Grammar& grammar) {
  return state.apply(action, grammar);
}

/// Pre-order serialization: every primitive item ends in `</f>`; empty
/// optional fields and every multiple field end in Reduce.
ActionSequence ast_to_actions(const AstNode& ast, const Grammar& grammar);

/// Replays `actions` from the initial state. Throws TransitionError naming
/// the offending step, or "incomplete" when the frontier is not exhausted.
AstNode actions_to_ast(std::span<const Action> actions, const Grammar& grammar);

/// S-expression rendering: `(Ctor f1 f2 ...)`, primitive items as
/// `(tok "a" "b")`, empty optional as `none`, multiple as `[e1 e2]`.
std::string to_sexpr(const AstNode& ast, const Grammar& grammar);
AstNode parse_sexpr(std::string_view text, const Grammar& grammar);

/// Constructor names and tokens in pre-order, used as the BLEU token stream.
std::vector<std::string> linearize(const AstNode& ast, const Grammar& grammar);

}  // namespace granorm
