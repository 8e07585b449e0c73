#include "varsr/bayes.hpp"

#include <cmath>
#include <stdexcept>

#include "varsr/enumerate.hpp"

namespace varsr {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

PriorModel PriorModel::uniform(const TokenLibrary& lib, int max_tokens) {
  PriorModel pm;
  pm.mode = Mode::UniformTrees;
  pm.n_expr = static_cast<long>(enumerate_trees(lib, max_tokens, std::nullopt).size());
  return pm;
}

PriorModel PriorModel::with_constants(const TokenLibrary& lib, int max_tokens,
                                      double mu_c, double sigma_c) {
  if (!(sigma_c > 0.0)) throw std::invalid_argument("sigma_c must be positive");
  PriorModel pm = uniform(lib, max_tokens);
  pm.mode = Mode::UniformTreesNormalConstants;
  pm.mu_c = mu_c;
  pm.sigma_c = sigma_c;
  return pm;
}

double log_normal_density(double x, double mu, double sigma) {
  const double zscore = (x - mu) / sigma;
  return -std::log(sigma) - 0.5 * zscore * zscore - 0.5 * kLog2Pi;
}

std::optional<double> log_likelihood(const TokenLibrary& lib, const Expression& expr,
                                     const Dataset& data, const LikelihoodModel& lm) {
  if (!(lm.sigma > 0.0)) throw std::invalid_argument("likelihood sigma must be positive");
  const auto values = evaluate(lib, expr, data.x);
  if (!values) return std::nullopt;
  const Eigen::ArrayXd residual = (data.y - *values).array() / lm.sigma;
  const double m = static_cast<double>(data.num_points());
  return -m * (0.5 * kLog2Pi + std::log(lm.sigma)) - 0.5 * residual.square().sum();
}

double log_prior(const Expression& expr, const PriorModel& pm) {
  double lp = -std::log(static_cast<double>(pm.n_expr));
  if (pm.mode == PriorModel::Mode::UniformTreesNormalConstants)
    for (double c : expr.constants) lp += log_normal_density(c, pm.mu_c, pm.sigma_c);
  return lp;
}

RewardBreakdown reward(const TokenLibrary& lib, const Expression& expr,
                       const Dataset& data, const LikelihoodModel& lm,
                       const PriorModel& pm, double log_q) {
  RewardBreakdown out;
  out.log_q = log_q;
  const auto ll = log_likelihood(lib, expr, data, lm);
  if (!ll) {
    out.failed = true;
    out.reward = kRewardFloor;
    return out;
  }
  out.log_likelihood = *ll;
  out.log_prior = log_prior(expr, pm);
  out.reward = out.log_likelihood + out.log_prior - out.log_q;
  return out;
}

}  // namespace varsr
