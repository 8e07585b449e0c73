#include "varsr/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace varsr::nn {

ParamLayout ParamLayout::make(int hidden, int input, int vocab) {
  if (hidden < 1 || input < 1 || vocab < 1)
    throw std::invalid_argument("network dimensions must be positive");
  ParamLayout l;
  l.hidden = hidden;
  l.input = input;
  l.vocab = vocab;
  int off = 0;
  auto claim = [&off](int n) {
    const int at = off;
    off += n;
    return at;
  };
  l.w_xr = claim(hidden * input);
  l.w_xz = claim(hidden * input);
  l.w_xn = claim(hidden * input);
  l.w_hr = claim(hidden * hidden);
  l.w_hz = claim(hidden * hidden);
  l.w_hn = claim(hidden * hidden);
  l.b_r = claim(hidden);
  l.b_z = claim(hidden);
  l.b_n = claim(hidden);
  l.w_tok = claim(vocab * hidden);
  l.b_tok = claim(vocab);
  l.w_cst = claim(2 * hidden);
  l.b_cst = claim(2);
  l.total = off;
  return l;
}

Vec init_params(const ParamLayout& layout, Rng& rng) {
  Vec p = Vec::Zero(layout.total);
  auto fill_uniform = [&](int off, int n) {
    for (int i = 0; i < n; ++i)
      p[off + i] = (rng.uniform01() * 2.0 - 1.0) * 0.08;
  };
  const int h = layout.hidden, in = layout.input, v = layout.vocab;
  fill_uniform(layout.w_xr, h * in);
  fill_uniform(layout.w_xz, h * in);
  fill_uniform(layout.w_xn, h * in);
  fill_uniform(layout.w_hr, h * h);
  fill_uniform(layout.w_hz, h * h);
  fill_uniform(layout.w_hn, h * h);
  fill_uniform(layout.w_tok, v * h);
  fill_uniform(layout.w_cst, 2 * h);
  // biases stay zero
  return p;
}

namespace {

inline double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

}  // namespace

Vec gru_step(const ParamLayout& l, const Vec& params, const Vec& x, const Vec& h) {
  if (x.size() != l.input) throw std::invalid_argument("input width mismatch");
  if (h.size() != l.hidden) throw std::invalid_argument("hidden width mismatch");
  const int H = l.hidden, In = l.input;
  Vec ar = cmat(params, l.w_xr, H, In) * x + cmat(params, l.w_hr, H, H) * h +
           cvec(params, l.b_r, H);
  Vec az = cmat(params, l.w_xz, H, In) * x + cmat(params, l.w_hz, H, H) * h +
           cvec(params, l.b_z, H);
  Vec r = ar.unaryExpr([](double a) { return sigmoid(a); });
  Vec z = az.unaryExpr([](double a) { return sigmoid(a); });
  Vec an = cmat(params, l.w_xn, H, In) * x + cvec(params, l.b_n, H) +
           r.cwiseProduct(cmat(params, l.w_hn, H, H) * h);
  Vec n = an.array().tanh();
  return (Vec::Ones(H) - z).cwiseProduct(n) + z.cwiseProduct(h);
}

StepRecord forward_step(const ParamLayout& l, const Vec& params, const Vec& x,
                        const Vec& h_prev, std::vector<char> mask) {
  if (static_cast<int>(mask.size()) != l.vocab)
    throw std::invalid_argument("mask width mismatch");
  const int H = l.hidden, In = l.input, V = l.vocab;
  StepRecord rec;
  rec.input = x;
  rec.h_prev = h_prev;
  Vec ar = cmat(params, l.w_xr, H, In) * x + cmat(params, l.w_hr, H, H) * h_prev +
           cvec(params, l.b_r, H);
  Vec az = cmat(params, l.w_xz, H, In) * x + cmat(params, l.w_hz, H, H) * h_prev +
           cvec(params, l.b_z, H);
  rec.r = ar.unaryExpr([](double a) { return sigmoid(a); });
  rec.z = az.unaryExpr([](double a) { return sigmoid(a); });
  Vec an = cmat(params, l.w_xn, H, In) * x + cvec(params, l.b_n, H) +
           rec.r.cwiseProduct(cmat(params, l.w_hn, H, H) * h_prev);
  rec.n = an.array().tanh();
  rec.h = (Vec::Ones(H) - rec.z).cwiseProduct(rec.n) + rec.z.cwiseProduct(h_prev);

  Vec logits = cmat(params, l.w_tok, V, H) * rec.h + cvec(params, l.b_tok, V);
  double maxlogit = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < V; ++i)
    if (mask[i] && logits[i] > maxlogit) maxlogit = logits[i];
  rec.probs = Vec::Zero(V);
  double denom = 0.0;
  for (int i = 0; i < V; ++i) {
    if (!mask[i]) continue;
    rec.probs[i] = std::exp(logits[i] - maxlogit);
    denom += rec.probs[i];
  }
  rec.probs /= denom;
  rec.mask = std::move(mask);

  Vec cst = cmat(params, l.w_cst, 2, H) * rec.h + cvec(params, l.b_cst, 2);
  rec.mu = cst[0];
  rec.raw_scale = cst[1];
  rec.sigma = std::clamp(std::exp(rec.raw_scale), kSigmaFloor, kSigmaCeil);
  return rec;
}

void choose(StepRecord& rec, int token_index) {
  if (token_index < 0 || token_index >= static_cast<int>(rec.mask.size()) ||
      !rec.mask[token_index] || rec.probs[token_index] <= 0.0)
    throw std::logic_error("chosen token is masked out");
  rec.chosen = token_index;
  rec.log_p = std::log(rec.probs[token_index]);
}

void choose_constant(StepRecord& rec, double value) {
  rec.has_constant = true;
  rec.const_value = value;
  const double zscore = (value - rec.mu) / rec.sigma;
  rec.log_p += -std::log(rec.sigma) - 0.5 * zscore * zscore -
               0.5 * std::log(2.0 * 3.14159265358979323846);
}

GradientTape log_prob_and_tape(const ParamLayout& layout, const Vec& params,
                               const RolloutSteps& rollout) {
  GradientTape tape;
  Vec h = Vec::Zero(layout.hidden);
  for (const auto& step : rollout.steps) {
    StepRecord rec = forward_step(layout, params, step.input, h, step.mask);
    choose(rec, step.chosen);
    if (step.constant) choose_constant(rec, *step.constant);
    h = rec.h;
    tape.log_q += rec.log_p;
    tape.steps.push_back(std::move(rec));
  }
  return tape;
}

void backward_weighted(const ParamLayout& l, const Vec& params,
                       const GradientTape& tape, const std::vector<double>& step_weights,
                       double scale, Vec& grad) {
  if (grad.size() != l.total) throw std::invalid_argument("gradient buffer size mismatch");
  if (step_weights.size() != tape.steps.size())
    throw std::invalid_argument("one weight per step required");
  const int H = l.hidden, In = l.input, V = l.vocab;
  const auto w_hr = cmat(params, l.w_hr, H, H);
  const auto w_hz = cmat(params, l.w_hz, H, H);
  const auto w_hn = cmat(params, l.w_hn, H, H);
  const auto w_tok = cmat(params, l.w_tok, V, H);
  const auto w_cst = cmat(params, l.w_cst, 2, H);

  Vec dh = Vec::Zero(H);
  for (int t = static_cast<int>(tape.steps.size()) - 1; t >= 0; --t) {
    const StepRecord& rec = tape.steps[t];
    const double w = scale * step_weights[t];

    // token head: d log p(chosen) / d logits = onehot(chosen) - probs
    Vec dlogits = -w * rec.probs;
    dlogits[rec.chosen] += w;
    mmat(grad, l.w_tok, V, H).noalias() += dlogits * rec.h.transpose();
    mvec(grad, l.b_tok, V) += dlogits;
    dh.noalias() += w_tok.transpose() * dlogits;

    if (rec.has_constant) {
      const double zscore = (rec.const_value - rec.mu) / rec.sigma;
      const double dmu = w * zscore / rec.sigma;
      const bool clamped = rec.sigma <= kSigmaFloor || rec.sigma >= kSigmaCeil;
      const double draw = clamped ? 0.0 : w * (zscore * zscore - 1.0);
      Vec dcst(2);
      dcst << dmu, draw;
      mmat(grad, l.w_cst, 2, H).noalias() += dcst * rec.h.transpose();
      mvec(grad, l.b_cst, 2) += dcst;
      dh.noalias() += w_cst.transpose() * dcst;
    }

    // GRU cell
    Vec dn = dh.cwiseProduct(Vec::Ones(H) - rec.z);
    Vec dz = dh.cwiseProduct(rec.h_prev - rec.n);
    Vec dh_prev = dh.cwiseProduct(rec.z);

    Vec dan = dn.cwiseProduct(Vec::Ones(H) - rec.n.cwiseProduct(rec.n));
    mmat(grad, l.w_xn, H, In).noalias() += dan * rec.input.transpose();
    mvec(grad, l.b_n, H) += dan;
    const Vec whn_h = w_hn * rec.h_prev;
    Vec dr = dan.cwiseProduct(whn_h);
    Vec dan_r = dan.cwiseProduct(rec.r);
    mmat(grad, l.w_hn, H, H).noalias() += dan_r * rec.h_prev.transpose();
    dh_prev.noalias() += w_hn.transpose() * dan_r;

    Vec dar = dr.cwiseProduct(rec.r.cwiseProduct(Vec::Ones(H) - rec.r));
    mmat(grad, l.w_xr, H, In).noalias() += dar * rec.input.transpose();
    mvec(grad, l.b_r, H) += dar;
    mmat(grad, l.w_hr, H, H).noalias() += dar * rec.h_prev.transpose();
    dh_prev.noalias() += w_hr.transpose() * dar;

    Vec daz = dz.cwiseProduct(rec.z.cwiseProduct(Vec::Ones(H) - rec.z));
    mmat(grad, l.w_xz, H, In).noalias() += daz * rec.input.transpose();
    mvec(grad, l.b_z, H) += daz;
    mmat(grad, l.w_hz, H, H).noalias() += daz * rec.h_prev.transpose();
    dh_prev.noalias() += w_hz.transpose() * daz;

    dh = std::move(dh_prev);
  }
}

void backward(const ParamLayout& layout, const Vec& params, const GradientTape& tape,
              double scale, Vec& grad) {
  backward_weighted(layout, params, tape, std::vector<double>(tape.steps.size(), 1.0),
                    scale, grad);
}

void save_checkpoint(const ParamLayout& layout, const Vec& params,
                     const std::string& path) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["hidden"] = layout.hidden;
  j["input"] = layout.input;
  j["vocab"] = layout.vocab;
  j["values"] = std::vector<double>(params.data(), params.data() + params.size());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << j.dump();
}

std::pair<ParamLayout, Vec> load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  nlohmann::json j;
  in >> j;
  if (j.at("format_version").get<int>() != 1)
    throw std::runtime_error("unsupported checkpoint version");
  ParamLayout layout = ParamLayout::make(j.at("hidden").get<int>(),
                                         j.at("input").get<int>(),
                                         j.at("vocab").get<int>());
  const auto values = j.at("values").get<std::vector<double>>();
  if (static_cast<int>(values.size()) != layout.total)
    throw std::runtime_error("checkpoint value count does not match the manifest");
  Vec params(layout.total);
  for (int i = 0; i < layout.total; ++i) params[i] = values[i];
  return {layout, std::move(params)};
}

}  // namespace varsr::nn
