#include "varsr/trainer.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace varsr {

namespace {

// seed-stream tags so initialization, sampling and evaluation never collide
constexpr uint64_t kInitStream = 0x1;
constexpr uint64_t kEpochStream = 0x2;

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

std::pair<double, BaselineState> baseline_update(const BaselineConfig& cfg,
                                                 BaselineState state,
                                                 const std::vector<double>& rewards) {
  if (rewards.empty()) throw std::invalid_argument("baseline needs a non-empty batch");
  const double batch_mean = mean_of(rewards);
  if (cfg.kind == BaselineConfig::Kind::BatchMean) return {batch_mean, state};
  if (!state.initialized) {
    state.initialized = true;
    state.value = batch_mean;
  } else {
    state.value = cfg.ewma_alpha * batch_mean + (1.0 - cfg.ewma_alpha) * state.value;
  }
  return {state.value, state};
}

TrainResult train(const TrainConfig& cfg, const TokenLibrary& lib,
                  const ConstraintSet& cs, const Dataset& data,
                  const LikelihoodModel& lm, const PriorModel& pm,
                  std::optional<double> oracle_log_evidence,
                  const std::function<void(const EpochTrace&)>& on_epoch) {
  if (cfg.epochs < 1 || cfg.batch_size < 1 || cfg.hidden_size < 1)
    throw std::invalid_argument("epochs, batch size and hidden size must be positive");
  if (cfg.baseline.kind == BaselineConfig::Kind::BatchMean && cfg.batch_size < 2)
    throw std::invalid_argument(
        "batch-mean baseline needs at least two samples per batch");

  TrainResult result;
  result.layout = nn::ParamLayout::make(cfg.hidden_size, context_width(lib), lib.size());
  Rng init_rng(derive_seed(cfg.seed, kInitStream));
  result.params = nn::init_params(result.layout, init_rng);
  nn::OptimizerState opt(cfg.optimizer, result.layout.total);
  BaselineState baseline_state;
  result.traces.reserve(cfg.epochs);

  const int n = cfg.batch_size;
  std::vector<Rollout> batch(n);
  std::vector<double> rewards(n);
  nn::Vec grad(result.layout.total);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (int i = 0; i < n; ++i) {
      Rng rng(derive_seed(cfg.seed, kEpochStream + static_cast<uint64_t>(epoch),
                          static_cast<uint64_t>(i)));
      batch[i] = sample_expression(lib, cs, result.layout, result.params, rng);
      rewards[i] =
          reward(lib, batch[i].expr, data, lm, pm, batch[i].log_q).reward;
    }
    const double elbo_estimate = mean_of(rewards);
    const auto [baseline_value, next_state] =
        baseline_update(cfg.baseline, baseline_state, rewards);
    baseline_state = next_state;

    grad.setZero();
    for (int i = 0; i < n; ++i) {
      const double advantage = rewards[i] - baseline_value;
      // descent direction: negative of the ascent estimator
      nn::backward(result.layout, result.params, batch[i].tape,
                   -advantage / static_cast<double>(n), grad);
    }
    opt.step(result.params, grad);
    if (!result.params.allFinite()) {
      std::ostringstream reason;
      reason << "non-finite parameters after epoch " << epoch
             << " (grad norm " << grad.norm() << ", lr " << opt.learning_rate()
             << ", elbo " << elbo_estimate << ")";
      result.aborted = true;
      result.abort_reason = reason.str();
      if (!cfg.checkpoint_path.empty())
        nn::save_checkpoint(result.layout, result.params,
                            cfg.checkpoint_path + ".aborted");
      break;
    }
    opt.plateau_update(-elbo_estimate);

    EpochTrace trace;
    trace.epoch = epoch;
    trace.elbo = elbo_estimate;
    trace.baseline = baseline_value;
    trace.learning_rate = opt.learning_rate();
    if (oracle_log_evidence) trace.kl = *oracle_log_evidence - elbo_estimate;
    if (on_epoch) on_epoch(trace);
    result.traces.push_back(trace);

    if (cfg.checkpoint_every > 0 && !cfg.checkpoint_path.empty() &&
        (epoch % cfg.checkpoint_every == 0 || epoch == cfg.epochs))
      nn::save_checkpoint(result.layout, result.params, cfg.checkpoint_path);
  }
  result.skipped_steps = opt.skipped_steps();
  return result;
}

ElboEstimate estimate_elbo(const TokenLibrary& lib, const ConstraintSet& cs,
                           const nn::ParamLayout& layout, const nn::Vec& params,
                           const Dataset& data, const LikelihoodModel& lm,
                           const PriorModel& pm, int n_samples, uint64_t seed) {
  if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n_samples; ++i) {
    Rng rng(derive_seed(seed, 0xE1B0, static_cast<uint64_t>(i)));
    const Rollout rollout = sample_expression(lib, cs, layout, params, rng);
    const double r = reward(lib, rollout.expr, data, lm, pm, rollout.log_q).reward;
    sum += r;
    sum_sq += r * r;
  }
  ElboEstimate est;
  est.n = n_samples;
  est.value = sum / n_samples;
  if (n_samples > 1) {
    const double var =
        std::max(0.0, (sum_sq - sum * sum / n_samples) / (n_samples - 1));
    est.std_error = std::sqrt(var / n_samples);
  }
  return est;
}

}  // namespace varsr
