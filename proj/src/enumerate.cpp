#include "varsr/enumerate.hpp"

namespace varsr {

namespace {

void expand(const TokenLibrary& lib, int max_tokens,
            const std::optional<ConstraintSet>& cs, PrefixState& st,
            std::vector<TreeSkeleton>& out) {
  const std::vector<char> mask =
      cs ? allowed_tokens(st, lib, *cs) : allowed_tokens_size_only(st, lib, max_tokens);
  for (int i = 0; i < lib.size(); ++i) {
    if (!mask[i]) continue;
    PrefixState next = st;
    next.push(i);
    if (next.complete())
      out.push_back(next.sequence());
    else
      expand(lib, max_tokens, cs, next, out);
  }
}

}  // namespace

std::vector<TreeSkeleton> enumerate_trees(const TokenLibrary& lib, int max_tokens,
                                          const std::optional<ConstraintSet>& cs) {
  if (max_tokens < 1) throw std::invalid_argument("max_tokens must be >= 1");
  std::optional<ConstraintSet> effective = cs;
  if (effective) effective->max_tokens = max_tokens;
  std::vector<TreeSkeleton> out;
  PrefixState st(lib);
  expand(lib, max_tokens, effective, st, out);
  return out;
}

namespace {

bool count_expand(const TokenLibrary& lib, int max_tokens, PrefixState& st, long limit,
                  long& count) {
  const std::vector<char> mask = allowed_tokens_size_only(st, lib, max_tokens);
  for (int i = 0; i < lib.size(); ++i) {
    if (!mask[i]) continue;
    PrefixState next = st;
    next.push(i);
    if (next.complete()) {
      if (++count > limit) return false;
    } else if (!count_expand(lib, max_tokens, next, limit, count)) {
      return false;
    }
  }
  return true;
}

}  // namespace

long count_trees_size_only(const TokenLibrary& lib, int max_tokens, long limit) {
  long count = 0;
  PrefixState st(lib);
  count_expand(lib, max_tokens, st, limit, count);
  return count;
}

}  // namespace varsr
