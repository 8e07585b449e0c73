#pragma once

#include <vector>

#include "varsr/tokens.hpp"

namespace varsr {

enum class ConstantPositionRule { Off, FirstChildOnly };

struct ConstraintSet {
  int max_tokens = 3;
  bool forbid_inverse_child = true;
  bool forbid_nested_trig = true;
  bool forbid_all_constant_children = false;
  ConstantPositionRule constant_position = ConstantPositionRule::Off;
};

// Incremental preorder construction state. Tracks the stack of open operator
// nodes so the parent/sibling of the pending slot, the arity deficit and the
// trig-ancestor flag are all O(1) per push.
class PrefixState {
 public:
  explicit PrefixState(const TokenLibrary& lib);

  void push(int token_index);
  bool complete() const { return !seq_.empty() && deficit_ == 0; }
  int deficit() const { return deficit_; }
  int length() const { return static_cast<int>(seq_.size()); }
  const std::vector<int>& sequence() const { return seq_; }

  // Context of the pending slot; -1 when absent. Valid only while the
  // expression is incomplete.
  int parent_token() const;
  int sibling_token() const;
  int parent_position() const;
  int sibling_position() const;
  int filled_children_of_parent() const;
  bool has_trig_ancestor() const;

 private:
  struct Frame {
    int pos;               // position of the operator in the sequence
    int arity;
    int filled;            // completed children so far
    int first_child_root;  // position of the first child's root, -1
    bool trig_on_path;     // this node or an ancestor is trigonometric
  };

  void subtree_completed(int root_pos);

  const TokenLibrary* lib_;
  std::vector<int> seq_;
  std::vector<Frame> stack_;
  int deficit_ = 1;
};

// Mask over the library of tokens that may legally fill the pending slot:
// the choice must keep the expression completable within max_tokens and
// respect every enabled structural rule. Throws std::runtime_error when no
// token qualifies (the library cannot satisfy the constraints).
std::vector<char> allowed_tokens(const PrefixState& st, const TokenLibrary& lib,
                                 const ConstraintSet& cs);

// Size-bound-only variant: structural rules skipped, the token budget kept.
std::vector<char> allowed_tokens_size_only(const PrefixState& st,
                                           const TokenLibrary& lib, int max_tokens);

}  // namespace varsr
