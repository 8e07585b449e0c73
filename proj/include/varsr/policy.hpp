#pragma once

#include <optional>

#include "varsr/constraints.hpp"
#include "varsr/expression.hpp"
#include "varsr/network.hpp"
#include "varsr/quadrature.hpp"

namespace varsr {

// Width of the encoded step context: three one-hot blocks for the previous,
// parent and sibling tokens (each with an extra "empty" category) plus the
// three accompanying constant-value scalars.
int context_width(const TokenLibrary& lib);

// One sampled expression together with the tape that differentiates its
// log-probability under the policy.
struct Rollout {
  Expression expr;
  nn::GradientTape tape;
  double log_q = 0.0;
};

// Autoregressively samples a complete expression. Token choices follow the
// masked categorical head; a drawn constant value follows the normal head of
// the same step and feeds into later contexts. Masking guarantees completion
// within the token budget.
Rollout sample_expression(const TokenLibrary& lib, const ConstraintSet& cs,
                          const nn::ParamLayout& layout, const nn::Vec& params,
                          Rng& rng);

// Context/mask/action sequence for an externally supplied expression, ready
// for teacher-forced evaluation. nullopt when some step of the expression is
// masked out (unreachable under these constraints).
std::optional<nn::RolloutSteps> steps_for_expression(const TokenLibrary& lib,
                                                     const ConstraintSet& cs,
                                                     const Expression& expr);

// log q of a supplied expression, or nullopt when it is unreachable.
std::optional<double> rollout_log_prob(const TokenLibrary& lib, const ConstraintSet& cs,
                                       const nn::ParamLayout& layout,
                                       const nn::Vec& params, const Expression& expr);

// Teacher-forced variant that also returns the tape.
std::optional<Rollout> replay_expression(const TokenLibrary& lib, const ConstraintSet& cs,
                                         const nn::ParamLayout& layout,
                                         const nn::Vec& params, const Expression& expr);

struct MarginalResult {
  double value = 0.0;
  bool converged = true;
};

// Probability of a tree skeleton under the policy with its constants
// integrated out. Downstream token probabilities are re-evaluated at every
// quadrature node because constant values feed back into later contexts.
// Supports up to quad.max_constants (<= 2) constant occurrences.
MarginalResult tree_marginal_q(const TokenLibrary& lib, const ConstraintSet& cs,
                               const nn::ParamLayout& layout, const nn::Vec& params,
                               const TreeSkeleton& tree, const QuadratureScheme& quad);

}  // namespace varsr
