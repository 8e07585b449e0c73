#pragma once

#include <optional>
#include <vector>

#include "varsr/constraints.hpp"
#include "varsr/expression.hpp"

namespace varsr {

// All distinct complete preorder sequences with at most max_tokens tokens,
// in depth-first library order. When cs is present the structural rules
// apply; when absent only the size bound does.
std::vector<TreeSkeleton> enumerate_trees(const TokenLibrary& lib, int max_tokens,
                                          const std::optional<ConstraintSet>& cs);

// Tree count of the size-bound-only space, stopping early once `limit` is
// exceeded (returns limit + 1 in that case).
long count_trees_size_only(const TokenLibrary& lib, int max_tokens, long limit);

}  // namespace varsr
