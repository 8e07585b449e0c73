#pragma once

#include <Eigen/Core>

namespace varsr::nn {

struct OptimizerConfig {
  double learning_rate = 1e-2;
  double alpha = 0.9;    // squared-gradient decay
  double epsilon = 1e-6;
  double grad_clip = 0.0;  // global-norm clip; 0 disables

  // reduce-on-plateau annealer
  double plateau_factor = 0.5;
  int plateau_patience = 15;
  double plateau_threshold = 1e-4;  // relative improvement required to reset
  double min_learning_rate = 1e-6;
};

// RMSprop accumulator plus the reduce-on-plateau learning-rate annealer.
// The learning rate never increases and never drops below the minimum.
class OptimizerState {
 public:
  OptimizerState(const OptimizerConfig& cfg, int n_params);

  // One descent step in place:
  //   acc = alpha * acc + (1 - alpha) * g^2
  //   p  -= lr * g / (sqrt(acc) + epsilon)
  // A non-finite gradient skips the step entirely and returns false.
  bool step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);

  // Halves the learning rate once the metric (smaller is better) has gone
  // `patience` consecutive epochs without improving on the best seen.
  void plateau_update(double metric);

  double learning_rate() const { return lr_; }
  int skipped_steps() const { return skipped_; }

 private:
  OptimizerConfig cfg_;
  Eigen::VectorXd square_avg_;
  double lr_;
  double best_;
  int bad_epochs_ = 0;
  int skipped_ = 0;
};

}  // namespace varsr::nn
