#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "varsr/enumerate.hpp"
#include "varsr/policy.hpp"

using namespace varsr;
using nn::Vec;

namespace {

TokenLibrary no_const_lib() {
  return TokenLibrary::from_symbols({"+", "*", "sin", "x_0"});
}

TokenLibrary const_lib() {
  return TokenLibrary::from_symbols({"+", "*", "cos", "c", "x_0"});
}

ConstraintSet base_constraints() {
  ConstraintSet cs;
  cs.max_tokens = 3;
  return cs;
}

ConstraintSet const_constraints() {
  ConstraintSet cs = base_constraints();
  cs.forbid_all_constant_children = true;
  cs.constant_position = ConstantPositionRule::FirstChildOnly;
  return cs;
}

struct Setup {
  TokenLibrary lib;
  ConstraintSet cs;
  nn::ParamLayout layout;
  Vec params;
};

Setup make_setup(const TokenLibrary& lib, const ConstraintSet& cs, int hidden,
                 uint64_t seed) {
  Rng rng(seed);
  const auto layout = nn::ParamLayout::make(hidden, context_width(lib), lib.size());
  return {lib, cs, layout, nn::init_params(layout, rng)};
}

}  // namespace

TEST_CASE("single-token library always yields that token with log q zero") {
  const auto lib = TokenLibrary::from_symbols({"x_0"});
  ConstraintSet cs;
  cs.max_tokens = 3;
  const auto s = make_setup(lib, cs, 8, 1);
  Rng rng(99);
  for (int i = 0; i < 20; ++i) {
    const Rollout r = sample_expression(s.lib, s.cs, s.layout, s.params, rng);
    CHECK(r.expr.tokens == std::vector<int>{0});
    CHECK(r.log_q == 0.0);
  }
}

TEST_CASE("identical seeds reproduce the rollout bit for bit") {
  const auto s = make_setup(const_lib(), const_constraints(), 16, 2);
  for (uint64_t seed : {7ULL, 8ULL, 12345ULL}) {
    Rng a(seed), b(seed);
    const Rollout ra = sample_expression(s.lib, s.cs, s.layout, s.params, a);
    const Rollout rb = sample_expression(s.lib, s.cs, s.layout, s.params, b);
    CHECK(ra.expr.tokens == rb.expr.tokens);
    REQUIRE(ra.expr.constants.size() == rb.expr.constants.size());
    for (size_t i = 0; i < ra.expr.constants.size(); ++i)
      CHECK(ra.expr.constants[i] == rb.expr.constants[i]);
    CHECK(ra.log_q == rb.log_q);
  }
}

TEST_CASE("teacher-forced log prob reproduces the sampler's log q") {
  const auto s = make_setup(const_lib(), const_constraints(), 16, 3);
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const Rollout r = sample_expression(s.lib, s.cs, s.layout, s.params, rng);
    const auto replayed = rollout_log_prob(s.lib, s.cs, s.layout, s.params, r.expr);
    REQUIRE(replayed.has_value());
    CHECK(std::abs(*replayed - r.log_q) < 1e-12);
  }
}

TEST_CASE("expressions violating constraints are unreachable, allowed ones are not") {
  const auto lib = no_const_lib();
  const auto cs = base_constraints();
  const auto s = make_setup(lib, cs, 8, 4);

  // nested trig is masked out
  Expression nested{{lib.index_of("sin"), lib.index_of("sin"), lib.index_of("x_0")}, {}};
  CHECK(rollout_log_prob(s.lib, s.cs, s.layout, s.params, nested) == std::nullopt);

  for (const auto& tree : enumerate_trees(lib, 3, cs)) {
    const auto lp = rollout_log_prob(s.lib, s.cs, s.layout, s.params, {tree, {}});
    REQUIRE(lp.has_value());
    CHECK(std::isfinite(*lp));
  }
}

TEST_CASE("every tree outside the constrained set is unreachable") {
  const auto lib = const_lib();
  const auto cs = const_constraints();
  const auto s = make_setup(lib, cs, 8, 15);
  const auto allowed = enumerate_trees(lib, 3, cs);
  int excluded = 0;
  for (const auto& tree : enumerate_trees(lib, 3, std::nullopt)) {
    if (std::find(allowed.begin(), allowed.end(), tree) != allowed.end()) continue;
    ++excluded;
    Expression e{tree, std::vector<double>(count_constants(lib, tree), 0.5)};
    CHECK(rollout_log_prob(s.lib, s.cs, s.layout, s.params, e) == std::nullopt);
  }
  CHECK(excluded == 7);  // 14 size-bound trees, 7 survive the rules
}

TEST_CASE("rollout probabilities over the enumerable space sum to one") {
  const auto lib = no_const_lib();
  ConstraintSet cs = base_constraints();
  cs.max_tokens = 5;
  for (uint64_t seed : {11ULL, 12ULL, 13ULL}) {
    Rng rng(seed);
    const auto layout = nn::ParamLayout::make(12, context_width(lib), lib.size());
    Vec params(layout.total);
    for (int i = 0; i < layout.total; ++i)
      params[i] = (rng.uniform01() * 2.0 - 1.0) * 1.2;  // arbitrary, not just init
    double total = 0.0;
    for (const auto& tree : enumerate_trees(lib, 5, cs)) {
      const auto lp = rollout_log_prob(lib, cs, layout, params, {tree, {}});
      REQUIRE(lp.has_value());
      total += std::exp(*lp);
    }
    CHECK(std::abs(total - 1.0) < 1e-10);
  }
}

TEST_CASE("sampled tree frequencies match exact rollout probabilities") {
  const auto s = make_setup(no_const_lib(), base_constraints(), 16, 6);
  const auto trees = enumerate_trees(s.lib, 3, s.cs);

  std::map<std::string, double> exact;
  for (const auto& tree : trees) {
    const auto lp = rollout_log_prob(s.lib, s.cs, s.layout, s.params, {tree, {}});
    exact[canonical_display(s.lib, tree)] = std::exp(*lp);
  }

  const int n = 100000;
  std::map<std::string, int> counts;
  for (int i = 0; i < n; ++i) {
    Rng rng(derive_seed(777, 0, static_cast<uint64_t>(i)));
    const Rollout r = sample_expression(s.lib, s.cs, s.layout, s.params, rng);
    counts[canonical_display(s.lib, r.expr.tokens)] += 1;
  }

  for (const auto& [display, p] : exact) {
    const double freq = counts[display] / static_cast<double>(n);
    const double sigma = std::sqrt(p * (1.0 - p) / n);
    CHECK(std::abs(freq - p) <= 3.0 * sigma);
  }
}

TEST_CASE("score function has zero mean over many samples") {
  const auto s = make_setup(no_const_lib(), base_constraints(), 8, 7);
  const int n = 10000;
  Vec mean = Vec::Zero(s.layout.total);
  Vec sumsq = Vec::Zero(s.layout.total);
  Vec g(s.layout.total);
  for (int i = 0; i < n; ++i) {
    Rng rng(derive_seed(31337, 0, static_cast<uint64_t>(i)));
    const Rollout r = sample_expression(s.lib, s.cs, s.layout, s.params, rng);
    g.setZero();
    nn::backward(s.layout, s.params, r.tape, 1.0, g);
    mean += g;
    sumsq.array() += g.array().square();
  }
  mean /= n;
  const Eigen::ArrayXd variance =
      (sumsq.array() / n - mean.array().square()).max(0.0) / n;
  const double se_norm = std::sqrt(variance.sum());
  CHECK(mean.norm() < 5.0 * se_norm);
}

TEST_CASE("tree marginal without constants equals the plain rollout probability") {
  const auto s = make_setup(const_lib(), const_constraints(), 16, 8);
  QuadratureScheme quad;
  for (const auto& tree : enumerate_trees(s.lib, 3, s.cs)) {
    if (count_constants(s.lib, tree) != 0) continue;
    const auto m = tree_marginal_q(s.lib, s.cs, s.layout, s.params, tree, quad);
    const auto lp = rollout_log_prob(s.lib, s.cs, s.layout, s.params, {tree, {}});
    CHECK(m.converged);
    CHECK(m.value == doctest::Approx(std::exp(*lp)).epsilon(1e-12));
  }
}

TEST_CASE("tree marginals over the constant library sum to one") {
  const auto s = make_setup(const_lib(), const_constraints(), 16, 9);
  QuadratureScheme quad;
  double total = 0.0;
  for (const auto& tree : enumerate_trees(s.lib, 3, s.cs)) {
    const auto m = tree_marginal_q(s.lib, s.cs, s.layout, s.params, tree, quad);
    CHECK(m.converged);
    total += m.value;
  }
  CHECK(std::abs(total - 1.0) < 1e-7);
}

TEST_CASE("marginal of the bare constant tree is the constant token probability") {
  const auto s = make_setup(const_lib(), const_constraints(), 16, 10);
  QuadratureScheme quad;
  const TreeSkeleton bare{s.lib.index_of("c")};
  const auto m = tree_marginal_q(s.lib, s.cs, s.layout, s.params, bare, quad);

  // the value integrates out, leaving the first-step token probability
  PrefixState st(s.lib);
  const auto mask = allowed_tokens(st, s.lib, s.cs);
  nn::Vec x = nn::Vec::Zero(s.layout.input);
  // all-empty context: each one-hot block points at its "empty" slot
  const int v = s.lib.size();
  x[v] = 1.0;
  x[(v + 1) + v] = 1.0;
  x[2 * (v + 1) + v] = 1.0;
  const auto rec = nn::forward_step(s.layout, s.params, x,
                                    nn::Vec::Zero(s.layout.hidden), mask);
  CHECK(m.value == doctest::Approx(rec.probs[s.lib.index_of("c")]).epsilon(1e-8));
}

TEST_CASE("a constant-plus-cosine expression is reachable with budget four") {
  // target shape: 0.3 + cos(x_0)
  const auto lib = const_lib();
  ConstraintSet cs = const_constraints();
  cs.max_tokens = 4;
  const auto s = make_setup(lib, cs, 16, 14);
  Expression target{{lib.index_of("+"), lib.index_of("c"), lib.index_of("cos"),
                     lib.index_of("x_0")},
                    {0.3}};
  const auto lp = rollout_log_prob(lib, cs, s.layout, s.params, target);
  REQUIRE(lp.has_value());
  CHECK(std::isfinite(*lp));

  // and the sampler does produce it
  bool seen = false;
  for (int i = 0; i < 20000 && !seen; ++i) {
    Rng rng(derive_seed(616, 0, static_cast<uint64_t>(i)));
    const Rollout r = sample_expression(lib, cs, s.layout, s.params, rng);
    seen = r.expr.tokens == target.tokens;
  }
  CHECK(seen);
}

TEST_CASE("too many constants for the marginalizer is rejected") {
  const auto lib = const_lib();
  ConstraintSet cs;
  cs.max_tokens = 5;
  const auto s = make_setup(lib, cs, 8, 11);
  QuadratureScheme quad;
  quad.max_constants = 1;
  const TreeSkeleton two{lib.index_of("+"), lib.index_of("x_0"), lib.index_of("*"),
                         lib.index_of("c"), lib.index_of("c")};
  CHECK_THROWS(tree_marginal_q(lib, cs, s.layout, s.params, two, quad));
}

TEST_CASE("two-constant marginal agrees with sampled tree frequencies") {
  const auto lib = const_lib();
  ConstraintSet cs;
  cs.max_tokens = 3;
  cs.forbid_all_constant_children = false;
  cs.constant_position = ConstantPositionRule::Off;
  const auto s = make_setup(lib, cs, 12, 12);
  QuadratureScheme quad;
  quad.rel_tol = 1e-10;
  const TreeSkeleton two{lib.index_of("+"), lib.index_of("c"), lib.index_of("c")};
  const auto m = tree_marginal_q(lib, cs, s.layout, s.params, two, quad);
  CHECK(m.converged);

  const int n = 200000;
  int hits = 0;
  for (int i = 0; i < n; ++i) {
    Rng rng(derive_seed(515, 0, static_cast<uint64_t>(i)));
    const Rollout r = sample_expression(lib, cs, s.layout, s.params, rng);
    if (r.expr.tokens == two) ++hits;
  }
  const double freq = hits / static_cast<double>(n);
  const double sigma = std::sqrt(m.value * (1.0 - m.value) / n);
  CHECK(std::abs(freq - m.value) <= 4.0 * sigma);
}
