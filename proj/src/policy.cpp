#include "varsr/policy.hpp"

#include <cmath>
#include <stdexcept>

namespace varsr {

int context_width(const TokenLibrary& lib) { return 3 * (lib.size() + 1) + 3; }

namespace {

// One-hot blocks for previous/parent/sibling with an extra "empty" category,
// then the three constant scalars. "Empty" is a real category rather than an
// all-zero block so the network can tell absence from any token.
nn::Vec encode_context(const TokenLibrary& lib, int prev, double prev_const,
                       int parent, double parent_const, int sibling,
                       double sibling_const) {
  const int V = lib.size();
  nn::Vec x = nn::Vec::Zero(3 * (V + 1) + 3);
  x[prev >= 0 ? prev : V] = 1.0;
  x[(V + 1) + (parent >= 0 ? parent : V)] = 1.0;
  x[2 * (V + 1) + (sibling >= 0 ? sibling : V)] = 1.0;
  x[3 * (V + 1) + 0] = prev_const;
  x[3 * (V + 1) + 1] = parent_const;
  x[3 * (V + 1) + 2] = sibling_const;
  return x;
}

// const_at_pos holds the drawn value for constant positions, 0.0 elsewhere.
nn::Vec context_for_state(const TokenLibrary& lib, const PrefixState& st,
                          const std::vector<double>& const_at_pos) {
  const auto& seq = st.sequence();
  const int prev = seq.empty() ? -1 : seq.back();
  const double prev_const =
      (prev >= 0 && lib[prev].kind == TokenKind::Constant)
          ? const_at_pos[seq.size() - 1]
          : 0.0;
  const int parent = st.parent_token();
  const int parent_pos = st.parent_position();
  const double parent_const =
      (parent >= 0 && lib[parent].kind == TokenKind::Constant)
          ? const_at_pos[parent_pos]
          : 0.0;
  const int sibling = st.sibling_token();
  const int sibling_pos = st.sibling_position();
  const double sibling_const =
      (sibling >= 0 && lib[sibling].kind == TokenKind::Constant)
          ? const_at_pos[sibling_pos]
          : 0.0;
  return encode_context(lib, prev, prev_const, parent, parent_const, sibling,
                        sibling_const);
}

}  // namespace

Rollout sample_expression(const TokenLibrary& lib, const ConstraintSet& cs,
                          const nn::ParamLayout& layout, const nn::Vec& params,
                          Rng& rng) {
  PrefixState st(lib);
  nn::Vec h = nn::Vec::Zero(layout.hidden);
  Rollout rollout;
  std::vector<double> const_at_pos;
  while (!st.complete()) {
    std::vector<char> mask = allowed_tokens(st, lib, cs);
    nn::Vec x = context_for_state(lib, st, const_at_pos);
    nn::StepRecord rec = nn::forward_step(layout, params, x, h, std::move(mask));
    const int token = rng.categorical(
        std::span<const double>(rec.probs.data(), rec.probs.size()));
    nn::choose(rec, token);
    double at_pos = 0.0;
    if (lib[token].kind == TokenKind::Constant) {
      const double value = rec.mu + rec.sigma * rng.normal();
      nn::choose_constant(rec, value);
      rollout.expr.constants.push_back(value);
      at_pos = value;
    }
    const_at_pos.push_back(at_pos);
    st.push(token);
    h = rec.h;
    rollout.expr.tokens.push_back(token);
    rollout.log_q += rec.log_p;
    rollout.tape.steps.push_back(std::move(rec));
  }
  rollout.tape.log_q = rollout.log_q;
  return rollout;
}

std::optional<nn::RolloutSteps> steps_for_expression(const TokenLibrary& lib,
                                                     const ConstraintSet& cs,
                                                     const Expression& expr) {
  if (!is_complete(lib, expr.tokens))
    throw std::invalid_argument("expression must be complete");
  if (static_cast<int>(expr.constants.size()) != count_constants(lib, expr.tokens))
    throw std::invalid_argument("constant count does not match constant tokens");
  PrefixState st(lib);
  nn::RolloutSteps steps;
  std::vector<double> const_at_pos;
  size_t const_index = 0;
  for (int token : expr.tokens) {
    std::vector<char> mask = allowed_tokens(st, lib, cs);
    if (!mask[token]) return std::nullopt;
    nn::RolloutSteps::Step step;
    step.input = context_for_state(lib, st, const_at_pos);
    step.mask = std::move(mask);
    step.chosen = token;
    double at_pos = 0.0;
    if (lib[token].kind == TokenKind::Constant) {
      at_pos = expr.constants[const_index++];
      step.constant = at_pos;
    }
    const_at_pos.push_back(at_pos);
    st.push(token);
    steps.steps.push_back(std::move(step));
  }
  return steps;
}

std::optional<Rollout> replay_expression(const TokenLibrary& lib, const ConstraintSet& cs,
                                         const nn::ParamLayout& layout,
                                         const nn::Vec& params, const Expression& expr) {
  auto steps = steps_for_expression(lib, cs, expr);
  if (!steps) return std::nullopt;
  Rollout rollout;
  rollout.expr = expr;
  rollout.tape = nn::log_prob_and_tape(layout, params, *steps);
  rollout.log_q = rollout.tape.log_q;
  return rollout;
}

std::optional<double> rollout_log_prob(const TokenLibrary& lib, const ConstraintSet& cs,
                                       const nn::ParamLayout& layout,
                                       const nn::Vec& params, const Expression& expr) {
  auto rollout = replay_expression(lib, cs, layout, params, expr);
  if (!rollout) return std::nullopt;
  return rollout->log_q;
}

namespace {

// Normal-head parameters emitted at the step of the given constant
// occurrence; they depend only on what comes before that step, so any
// placeholder values for later constants work.
std::pair<double, double> head_at_constant(const TokenLibrary& lib,
                                           const ConstraintSet& cs,
                                           const nn::ParamLayout& layout,
                                           const nn::Vec& params,
                                           const TreeSkeleton& tree,
                                           const std::vector<double>& constants,
                                           int which) {
  Expression probe{tree, constants};
  auto rollout = replay_expression(lib, cs, layout, params, probe);
  if (!rollout) throw std::runtime_error("tree unreachable under constraints");
  int seen = 0;
  for (const auto& step : rollout->tape.steps) {
    if (!step.has_constant) continue;
    if (seen == which) return {step.mu, step.sigma};
    ++seen;
  }
  throw std::logic_error("constant occurrence not found");
}

}  // namespace

MarginalResult tree_marginal_q(const TokenLibrary& lib, const ConstraintSet& cs,
                               const nn::ParamLayout& layout, const nn::Vec& params,
                               const TreeSkeleton& tree, const QuadratureScheme& quad) {
  const int k = count_constants(lib, tree);
  if (k > quad.max_constants || k > 2)
    throw std::invalid_argument("too many constants for marginalization");
  if (k == 0) {
    Expression expr{tree, {}};
    auto log_q = rollout_log_prob(lib, cs, layout, params, expr);
    if (!log_q) return {0.0, true};
    return {std::exp(*log_q), true};
  }

  auto joint = [&](const std::vector<double>& constants) {
    Expression expr{tree, constants};
    auto log_q = rollout_log_prob(lib, cs, layout, params, expr);
    return log_q ? std::exp(*log_q) : 0.0;
  };

  const auto [mu1, sigma1] =
      head_at_constant(lib, cs, layout, params, tree, std::vector<double>(k, 0.0), 0);
  const double lo1 = mu1 - quad.window_sigmas * sigma1;
  const double hi1 = mu1 + quad.window_sigmas * sigma1;

  if (k == 1) {
    QuadResult r = integrate([&](double c) { return joint({c}); }, lo1, hi1,
                             quad.rel_tol, quad.abs_tol, quad.initial_panels,
                             quad.max_panels);
    return {r.value, r.converged};
  }

  bool inner_ok = true;
  auto outer = [&](double c1) {
    const auto [mu2, sigma2] =
        head_at_constant(lib, cs, layout, params, tree, {c1, 0.0}, 1);
    QuadResult inner = integrate([&](double c2) { return joint({c1, c2}); },
                                 mu2 - quad.window_sigmas * sigma2,
                                 mu2 + quad.window_sigmas * sigma2, quad.rel_tol,
                                 quad.abs_tol, quad.initial_panels, quad.max_panels);
    if (!inner.converged) inner_ok = false;
    return inner.value;
  };
  QuadResult r = integrate(outer, lo1, hi1, quad.rel_tol, quad.abs_tol,
                           quad.initial_panels, quad.max_panels);
  return {r.value, r.converged && inner_ok};
}

}  // namespace varsr
