#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "varsr/rng.hpp"

namespace varsr::nn {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Addressing scheme for the single flat parameter vector holding the GRU and
// both output heads. The optimizer, the gradient accumulator, finite
// differencing and the checkpoint format all share this layout.
struct ParamLayout {
  int hidden = 0;  // H
  int input = 0;   // encoded context width
  int vocab = 0;   // token library size

  int w_xr = 0, w_xz = 0, w_xn = 0;  // H x input each
  int w_hr = 0, w_hz = 0, w_hn = 0;  // H x H each
  int b_r = 0, b_z = 0, b_n = 0;     // H each
  int w_tok = 0, b_tok = 0;          // vocab x H, vocab
  int w_cst = 0, b_cst = 0;          // 2 x H, 2
  int total = 0;

  static ParamLayout make(int hidden, int input, int vocab);
  bool operator==(const ParamLayout&) const = default;
};

inline Eigen::Map<const Mat> cmat(const Vec& v, int off, int rows, int cols) {
  return {v.data() + off, rows, cols};
}
inline Eigen::Map<Mat> mmat(Vec& v, int off, int rows, int cols) {
  return {v.data() + off, rows, cols};
}
inline Eigen::Map<const Vec> cvec(const Vec& v, int off, int n) {
  return {v.data() + off, n};
}
inline Eigen::Map<Vec> mvec(Vec& v, int off, int n) {
  return {v.data() + off, n};
}

// Small uniform weights in [-0.08, 0.08], zero biases: keeps the initial
// token distribution near uniform.
Vec init_params(const ParamLayout& layout, Rng& rng);

// One reset/update-gate recurrence with a tanh candidate:
//   r = sigmoid(Wxr x + Whr h + br)
//   z = sigmoid(Wxz x + Whz h + bz)
//   n = tanh(Wxn x + r .* (Whn h) + bn)
//   h' = (1 - z) .* n + z .* h
Vec gru_step(const ParamLayout& layout, const Vec& params, const Vec& x, const Vec& h);

// Standard-deviation bounds for the constant head; exp(raw) is clamped into
// this range and the raw-scale gradient vanishes at the bounds.
constexpr double kSigmaFloor = 1e-3;
constexpr double kSigmaCeil = 1e3;

// Everything the backward pass needs from one forward step.
struct StepRecord {
  Vec input;
  Vec h_prev, r, z, n, h;
  Vec probs;  // masked softmax over the vocabulary; exactly 0 where masked
  std::vector<char> mask;
  int chosen = -1;
  bool has_constant = false;
  double const_value = 0.0, mu = 0.0, sigma = 1.0, raw_scale = 0.0;
  double log_p = 0.0;  // token log-prob plus the constant log-density if any
};

struct GradientTape {
  std::vector<StepRecord> steps;
  double log_q = 0.0;
};

// Runs the cell and the heads for one step; masked logits are dropped to
// -inf before normalization so forbidden tokens carry exactly zero
// probability. The caller then fixes the action via choose()/choose_constant().
StepRecord forward_step(const ParamLayout& layout, const Vec& params, const Vec& x,
                        const Vec& h_prev, std::vector<char> mask);

// Records the chosen token and accumulates its log-probability. Choosing a
// masked-out token is a sampler bug and throws std::logic_error.
void choose(StepRecord& rec, int token_index);
// Records a drawn constant value and adds its normal log-density.
void choose_constant(StepRecord& rec, double value);

// A teacher-forcing record: per-step contexts, masks and actions of one
// complete rollout, independent of any network state.
struct RolloutSteps {
  struct Step {
    Vec input;
    std::vector<char> mask;
    int chosen = -1;
    std::optional<double> constant;
  };
  std::vector<Step> steps;
};

// Replays the rollout through the network, returning log q and the tape that
// differentiates it.
GradientTape log_prob_and_tape(const ParamLayout& layout, const Vec& params,
                               const RolloutSteps& rollout);

// Accumulates scale * d(log q)/d(params) into grad, backpropagating through
// every step of the tape.
void backward(const ParamLayout& layout, const Vec& params, const GradientTape& tape,
              double scale, Vec& grad);

// Same, with an individual weight per step's log-probability term. The
// all-ones weighting reproduces backward(); the gradient is linear in these
// weights.
void backward_weighted(const ParamLayout& layout, const Vec& params,
                       const GradientTape& tape, const std::vector<double>& step_weights,
                       double scale, Vec& grad);

// Versioned JSON checkpoint carrying the shape manifest and the flat vector.
void save_checkpoint(const ParamLayout& layout, const Vec& params,
                     const std::string& path);
std::pair<ParamLayout, Vec> load_checkpoint(const std::string& path);

}  // namespace varsr::nn
