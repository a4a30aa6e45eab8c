#include "granorm/transition.hpp"

#include <algorithm>
#include <unordered_set>

#include "granorm/error.hpp"

namespace granorm {

bool FieldValue::operator==(const FieldValue& other) const = default;

std::string to_string(const Action& action, const Grammar& grammar) {
  switch (action.kind) {
    case Action::Kind::apply_constr:
      return "ApplyConstr(" + grammar.constructor(action.constructor).name + ")";
    case Action::Kind::gen_token:
      return "GenToken(" + action.token + ")";
    case Action::Kind::reduce:
      return "Reduce";
  }
  return "?";
}

std::string to_string(std::span<const Action> actions, const Grammar& grammar) {
  std::string out;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (i > 0) out += ' ';
    out += to_string(actions[i], grammar);
  }
  return out;
}

namespace {

void check_items(std::size_t n, Cardinality c, const std::string& where) {
  bool ok = c == Cardinality::multiple || (c == Cardinality::single && n == 1) ||
            (c == Cardinality::optional && n <= 1);
  if (!ok) {
    throw TransitionError("field " + where + " has " + std::to_string(n) + " items but is " +
                          std::string(to_string(c)));
  }
}

void validate_node(const AstNode& node, const Grammar& grammar, std::string_view type) {
  if (node.constructor < 0 || static_cast<std::size_t>(node.constructor) >= grammar.constructors().size()) {
    throw TransitionError("unknown constructor id " + std::to_string(node.constructor));
  }
  const Constructor& ctor = grammar.constructor(node.constructor);
  if (ctor.result_type != type) {
    throw TransitionError("constructor '" + ctor.name + "' builds " + ctor.result_type + ", expected " +
                          std::string(type));
  }
  if (node.fields.size() != ctor.fields.size()) {
    throw TransitionError("constructor '" + ctor.name + "' expects " + std::to_string(ctor.fields.size()) +
                          " fields, got " + std::to_string(node.fields.size()));
  }
  for (std::size_t i = 0; i < ctor.fields.size(); ++i) {
    const FieldDecl& decl = ctor.fields[i];
    const FieldValue& value = node.fields[i];
    std::string where = ctor.name + "." + decl.name;
    if (grammar.is_primitive(decl.type)) {
      if (!value.nodes.empty()) throw TransitionError("primitive field " + where + " holds AST nodes");
      check_items(value.token_lists.size(), decl.cardinality, where);
      for (const auto& list : value.token_lists) {
        for (const auto& tok : list) {
          if (tok.empty()) throw TransitionError("empty token in field " + where);
          if (tok == kEndOfField) throw TransitionError("reserved token </f> inside field " + where);
        }
      }
    } else {
      if (!value.token_lists.empty()) throw TransitionError("composite field " + where + " holds tokens");
      check_items(value.nodes.size(), decl.cardinality, where);
      for (const auto& child : value.nodes) validate_node(child, grammar, decl.type);
    }
  }
}

AstNode& node_at(AstNode& root, const std::vector<std::uint32_t>& path) {
  AstNode* node = &root;
  for (std::size_t i = 0; i + 1 < path.size(); i += 2) {
    node = &node->fields[path[i]].nodes[path[i + 1]];
  }
  return *node;
}

bool reduce_allowed(const FrontierSlot& slot) {
  if (slot.open_tokens) return false;
  if (slot.cardinality == Cardinality::multiple) return true;
  return slot.cardinality == Cardinality::optional && slot.items == 0;
}

}  // namespace

void validate_ast(const AstNode& ast, const Grammar& grammar, std::string_view type) {
  validate_node(ast, grammar, type.empty() ? std::string_view(grammar.root_type()) : type);
}

DerivationState DerivationState::initial(const Grammar& grammar) {
  DerivationState s;
  FrontierSlot root;
  root.type = grammar.root_type();
  root.cardinality = Cardinality::single;
  root.primitive = false;
  s.frontier_.push_back(std::move(root));
  return s;
}

const FrontierSlot& DerivationState::top() const {
  if (frontier_.empty()) throw TransitionError("derivation is complete", step_);
  return frontier_.back();
}

bool DerivationState::accepts(const Action& action, const Grammar& grammar) const {
  if (frontier_.empty()) return false;
  const FrontierSlot& slot = frontier_.back();
  switch (action.kind) {
    case Action::Kind::apply_constr: {
      if (slot.primitive) return false;
      if (action.constructor < 0 || static_cast<std::size_t>(action.constructor) >= grammar.constructors().size()) {
        return false;
      }
      return grammar.constructor(action.constructor).result_type == slot.type;
    }
    case Action::Kind::gen_token:
      return slot.primitive && !action.token.empty();
    case Action::Kind::reduce:
      return reduce_allowed(slot);
  }
  return false;
}

DerivationState DerivationState::apply(const Action& action, const Grammar& grammar) const {
  if (frontier_.empty()) throw TransitionError("action after derivation completed", step_);
  if (!accepts(action, grammar)) {
    throw TransitionError("illegal action " + to_string(action, grammar) + " at slot of type " + top().type,
                          step_);
  }

  DerivationState next = *this;
  next.step_ = step_ + 1;
  FrontierSlot& slot = next.frontier_.back();

  switch (action.kind) {
    case Action::Kind::apply_constr: {
      const Constructor& ctor = grammar.constructor(action.constructor);
      AstNode node;
      node.constructor = ctor.id;
      node.fields.resize(ctor.fields.size());

      std::vector<std::uint32_t> child_path;
      if (slot.field < 0) {
        next.tree_ = std::move(node);
      } else {
        AstNode& owner = node_at(*next.tree_, slot.path);
        auto& items = owner.fields[static_cast<std::size_t>(slot.field)].nodes;
        items.push_back(std::move(node));
        child_path = slot.path;
        child_path.push_back(static_cast<std::uint32_t>(slot.field));
        child_path.push_back(static_cast<std::uint32_t>(items.size() - 1));
      }

      ++slot.items;
      if (slot.cardinality != Cardinality::multiple) next.frontier_.pop_back();

      for (std::size_t i = ctor.fields.size(); i-- > 0;) {
        const FieldDecl& decl = ctor.fields[i];
        FrontierSlot child;
        child.path = child_path;
        child.field = static_cast<int>(i);
        child.type = decl.type;
        child.cardinality = decl.cardinality;
        child.primitive = grammar.is_primitive(decl.type);
        next.frontier_.push_back(std::move(child));
      }
      break;
    }
    case Action::Kind::gen_token: {
      AstNode& owner = node_at(*next.tree_, slot.path);
      auto& lists = owner.fields[static_cast<std::size_t>(slot.field)].token_lists;
      if (!slot.open_tokens) {
        lists.emplace_back();
        ++slot.items;
        slot.open_tokens = true;
      }
      if (action.is_end_of_field()) {
        slot.open_tokens = false;
        if (slot.cardinality != Cardinality::multiple) next.frontier_.pop_back();
      } else {
        lists.back().push_back(action.token);
      }
      break;
    }
    case Action::Kind::reduce:
      next.frontier_.pop_back();
      break;
  }
  return next;
}

std::optional<std::size_t> CandidateSet::find(const Action& action) const {
  auto it = std::find(actions.begin(), actions.end(), action);
  if (it == actions.end()) return std::nullopt;
  return static_cast<std::size_t>(it - actions.begin());
}

CandidateSet candidate_actions(const DerivationState& state, const Grammar& grammar,
                               std::span<const std::string> source) {
  if (state.complete()) throw TransitionError("candidate_actions on a complete state", state.step());
  const FrontierSlot& slot = state.top();
  CandidateSet out;
  if (slot.primitive) {
    const auto& vocab = grammar.token_vocab();
    out.actions.reserve(vocab.size() + source.size() + 1);
    for (const auto& tok : vocab) out.actions.push_back(Action::gen(tok));
    std::unordered_set<std::string_view> seen;
    for (const auto& tok : source) {
      if (tok.empty() || grammar.token_index(tok) || !seen.insert(tok).second) continue;
      out.actions.push_back(Action::gen(tok));
    }
  } else {
    for (int id : grammar.constructor_ids_of(slot.type)) out.actions.push_back(Action::apply(id));
  }
  if (reduce_allowed(slot)) out.actions.push_back(Action::reduce());
  return out;
}

namespace {

void emit(const AstNode& node, const Grammar& grammar, ActionSequence& out) {
  const Constructor& ctor = grammar.constructor(node.constructor);
  out.push_back(Action::apply(node.constructor));
  for (std::size_t i = 0; i < ctor.fields.size(); ++i) {
    const FieldDecl& decl = ctor.fields[i];
    const FieldValue& value = node.fields[i];
    std::size_t n = 0;
    if (grammar.is_primitive(decl.type)) {
      for (const auto& list : value.token_lists) {
        for (const auto& tok : list) out.push_back(Action::gen(tok));
        out.push_back(Action::gen(std::string(kEndOfField)));
      }
      n = value.token_lists.size();
    } else {
      for (const auto& child : value.nodes) emit(child, grammar, out);
      n = value.nodes.size();
    }
    if (decl.cardinality == Cardinality::multiple ||
        (decl.cardinality == Cardinality::optional && n == 0)) {
      out.push_back(Action::reduce());
    }
  }
}

}  // namespace

ActionSequence ast_to_actions(const AstNode& ast, const Grammar& grammar) {
  validate_ast(ast, grammar);
  ActionSequence out;
  emit(ast, grammar, out);
  return out;
}

AstNode actions_to_ast(std::span<const Action> actions, const Grammar& grammar) {
  DerivationState state = DerivationState::initial(grammar);
  for (std::size_t t = 0; t < actions.size(); ++t) {
    if (state.complete()) throw TransitionError("action after derivation completed", t);
    state = state.apply(actions[t], grammar);
  }
  if (!state.complete()) {
    throw TransitionError("incomplete action sequence: " + std::to_string(state.frontier().size()) +
                          " open slots after " + std::to_string(actions.size()) + " actions");
  }
  return *state.partial_tree();
}

namespace {

void linearize_into(const AstNode& node, const Grammar& grammar, std::vector<std::string>& out) {
  out.push_back(grammar.constructor(node.constructor).name);
  for (const auto& field : node.fields) {
    for (const auto& child : field.nodes) linearize_into(child, grammar, out);
    for (const auto& list : field.token_lists) out.insert(out.end(), list.begin(), list.end());
  }
}

}  // namespace

std::vector<std::string> linearize(const AstNode& ast, const Grammar& grammar) {
  std::vector<std::string> out;
  linearize_into(ast, grammar, out);
  return out;
}

}  // namespace granorm
