#include "varsr/optimizer.hpp"

#include <cmath>
#include <limits>

namespace varsr::nn {

OptimizerState::OptimizerState(const OptimizerConfig& cfg, int n_params)
    : cfg_(cfg),
      square_avg_(Eigen::VectorXd::Zero(n_params)),
      lr_(cfg.learning_rate),
      best_(std::numeric_limits<double>::infinity()) {}

bool OptimizerState::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  if (!grad.allFinite()) {
    ++skipped_;
    return false;
  }
  double clip_scale = 1.0;
  if (cfg_.grad_clip > 0.0) {
    const double norm = grad.norm();
    if (norm > cfg_.grad_clip) clip_scale = cfg_.grad_clip / norm;
  }
  const Eigen::ArrayXd g = grad.array() * clip_scale;
  square_avg_.array() = cfg_.alpha * square_avg_.array() + (1.0 - cfg_.alpha) * g * g;
  params.array() -= lr_ * g / (square_avg_.array().sqrt() + cfg_.epsilon);
  return true;
}

void OptimizerState::plateau_update(double metric) {
  // relative-threshold comparison; metric is assumed finite
  if (metric < best_ * (1.0 - cfg_.plateau_threshold)) {
    best_ = metric;
    bad_epochs_ = 0;
    return;
  }
  if (++bad_epochs_ >= cfg_.plateau_patience) {
    lr_ = std::max(lr_ * cfg_.plateau_factor, cfg_.min_learning_rate);
    bad_epochs_ = 0;
  }
}

}  // namespace varsr::nn
