#include "varsr/constraints.hpp"

#include <stdexcept>

namespace varsr {

PrefixState::PrefixState(const TokenLibrary& lib) : lib_(&lib) {}

void PrefixState::push(int token_index) {
  if (complete()) throw std::logic_error("push on a complete expression");
  const Token& t = (*lib_)[token_index];
  const int pos = static_cast<int>(seq_.size());
  seq_.push_back(token_index);
  deficit_ += t.arity - 1;
  if (t.arity > 0) {
    const bool parent_trig = !stack_.empty() && stack_.back().trig_on_path;
    stack_.push_back({pos, t.arity, 0, -1, parent_trig || t.trigonometric});
  } else {
    subtree_completed(pos);
  }
}

void PrefixState::subtree_completed(int root_pos) {
  while (!stack_.empty()) {
    Frame& f = stack_.back();
    ++f.filled;
    if (f.filled == 1) f.first_child_root = root_pos;
    if (f.filled < f.arity) return;
    root_pos = f.pos;
    stack_.pop_back();
  }
}

int PrefixState::parent_position() const {
  return stack_.empty() ? -1 : stack_.back().pos;
}

int PrefixState::parent_token() const {
  const int p = parent_position();
  return p < 0 ? -1 : seq_[p];
}

int PrefixState::sibling_position() const {
  if (stack_.empty() || stack_.back().filled == 0) return -1;
  return stack_.back().first_child_root;
}

int PrefixState::sibling_token() const {
  const int p = sibling_position();
  return p < 0 ? -1 : seq_[p];
}

int PrefixState::filled_children_of_parent() const {
  return stack_.empty() ? 0 : stack_.back().filled;
}

bool PrefixState::has_trig_ancestor() const {
  return !stack_.empty() && stack_.back().trig_on_path;
}

std::vector<char> allowed_tokens(const PrefixState& st, const TokenLibrary& lib,
                                 const ConstraintSet& cs) {
  if (st.complete()) throw std::logic_error("allowed_tokens on a complete expression");
  std::vector<char> mask(lib.size(), 0);
  const int parent = st.parent_token();
  const int sibling = st.sibling_token();
  const bool trig_ancestor = st.has_trig_ancestor();
  bool any = false;
  for (int i = 0; i < lib.size(); ++i) {
    const Token& t = lib[i];
    // budget: current length + this token + minimum closers for the slots
    // left open afterwards must fit
    if (st.length() + st.deficit() + t.arity > cs.max_tokens) continue;
    if (cs.forbid_inverse_child && parent >= 0 &&
        (t.inverse_of == parent || lib[parent].inverse_of == i))
      continue;
    if (cs.forbid_nested_trig && t.trigonometric && trig_ancestor) continue;
    if (t.kind == TokenKind::Constant && parent >= 0) {
      const Token& p = lib[parent];
      const int filled = st.filled_children_of_parent();
      if (cs.constant_position == ConstantPositionRule::FirstChildOnly &&
          p.kind == TokenKind::BinaryOp && filled > 0)
        continue;
      if (cs.forbid_all_constant_children) {
        // reject when this slot is the parent's last and every completed
        // child is a bare constant leaf
        const bool last_slot = filled == p.arity - 1;
        const bool prior_all_const =
            filled == 0 ||
            (sibling >= 0 && lib[sibling].kind == TokenKind::Constant);
        if (last_slot && prior_all_const) continue;
      }
    }
    mask[i] = 1;
    any = true;
  }
  if (!any)
    throw std::runtime_error(
        "no token satisfies the constraints at this slot; the library cannot "
        "express a complete tree under this constraint set");
  return mask;
}

std::vector<char> allowed_tokens_size_only(const PrefixState& st,
                                           const TokenLibrary& lib, int max_tokens) {
  if (st.complete()) throw std::logic_error("allowed_tokens on a complete expression");
  std::vector<char> mask(lib.size(), 0);
  bool any = false;
  for (int i = 0; i < lib.size(); ++i) {
    if (st.length() + st.deficit() + lib[i].arity > max_tokens) continue;
    mask[i] = 1;
    any = true;
  }
  if (!any) throw std::runtime_error("no token fits within the size bound");
  return mask;
}

}  // namespace varsr
