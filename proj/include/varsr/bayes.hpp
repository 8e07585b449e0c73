#pragma once

#include <optional>

#include "varsr/expression.hpp"

namespace varsr {

struct LikelihoodModel {
  double sigma = 1.0;  // standard deviation of the Gaussian data likelihood
};

// Uniform prior over constructible trees, optionally with independent normal
// densities over each constant value. n_expr counts every complete tree
// within the size bound alone (structural constraints ignored), mirroring
// how the no-constant experiments count the nested-trig tree in the prior.
struct PriorModel {
  enum class Mode { UniformTrees, UniformTreesNormalConstants };
  Mode mode = Mode::UniformTrees;
  long n_expr = 1;
  double mu_c = 0.0;
  double sigma_c = 10.0;

  static PriorModel uniform(const TokenLibrary& lib, int max_tokens);
  static PriorModel with_constants(const TokenLibrary& lib, int max_tokens,
                                   double mu_c, double sigma_c);
};

double log_normal_density(double x, double mu, double sigma);

// Sum over data points of log N(y_i; f(X_i), sigma^2); nullopt when the
// expression evaluates non-finitely somewhere.
std::optional<double> log_likelihood(const TokenLibrary& lib, const Expression& expr,
                                     const Dataset& data, const LikelihoodModel& lm);

double log_prior(const Expression& expr, const PriorModel& pm);

// Reward assigned to expressions whose evaluation failed.
constexpr double kRewardFloor = -1e6;

struct RewardBreakdown {
  double log_likelihood = 0.0;
  double log_prior = 0.0;
  double log_q = 0.0;
  double reward = 0.0;  // log_likelihood + log_prior - log_q
  bool failed = false;
};

RewardBreakdown reward(const TokenLibrary& lib, const Expression& expr,
                       const Dataset& data, const LikelihoodModel& lm,
                       const PriorModel& pm, double log_q);

}  // namespace varsr
