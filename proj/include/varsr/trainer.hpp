#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "varsr/bayes.hpp"
#include "varsr/optimizer.hpp"
#include "varsr/policy.hpp"

namespace varsr {

struct BaselineConfig {
  enum class Kind { BatchMean, Ewma };
  Kind kind = Kind::Ewma;
  double ewma_alpha = 0.25;  // weight on the newest batch mean
};

struct BaselineState {
  bool initialized = false;
  double value = 0.0;
};

// Returns the value subtracted from this batch's rewards and the carried
// state. The moving average starts at the first batch mean.
std::pair<double, BaselineState> baseline_update(const BaselineConfig& cfg,
                                                 BaselineState state,
                                                 const std::vector<double>& rewards);

struct TrainConfig {
  int epochs = 250;
  int batch_size = 100;
  int hidden_size = 32;
  BaselineConfig baseline;
  nn::OptimizerConfig optimizer;
  uint64_t seed = 0;
  int checkpoint_every = 0;  // epochs between checkpoints; 0 disables
  std::string checkpoint_path;
};

struct EpochTrace {
  int epoch = 0;
  double elbo = 0.0;  // batch mean of rewards
  double baseline = 0.0;
  double learning_rate = 0.0;
  std::optional<double> kl;  // log-evidence minus elbo, when the oracle value is known
};

struct TrainResult {
  nn::ParamLayout layout;
  nn::Vec params;
  std::vector<EpochTrace> traces;
  bool aborted = false;
  std::string abort_reason;
  int skipped_steps = 0;
};

// REINFORCE ascent on the expected reward: per epoch, samples a batch,
// subtracts the baseline, averages advantage-weighted score gradients, takes
// an RMSprop step and feeds -mean(reward) to the plateau annealer. Rewards
// are constants with respect to the parameters during differentiation.
TrainResult train(const TrainConfig& cfg, const TokenLibrary& lib,
                  const ConstraintSet& cs, const Dataset& data,
                  const LikelihoodModel& lm, const PriorModel& pm,
                  std::optional<double> oracle_log_evidence = std::nullopt,
                  const std::function<void(const EpochTrace&)>& on_epoch = nullptr);

struct ElboEstimate {
  double value = 0.0;
  double std_error = 0.0;
  int n = 0;
};

// Mean reward over n fresh rollouts from fixed parameters.
ElboEstimate estimate_elbo(const TokenLibrary& lib, const ConstraintSet& cs,
                           const nn::ParamLayout& layout, const nn::Vec& params,
                           const Dataset& data, const LikelihoodModel& lm,
                           const PriorModel& pm, int n_samples, uint64_t seed);

}  // namespace varsr
