#include "varsr/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace varsr {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(const std::vector<double>& values) {
  double mx = kNegInf;
  for (double v : values) mx = std::max(mx, v);
  if (mx == kNegInf) return kNegInf;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - mx);
  return mx + std::log(sum);
}

double log_joint_or_neg_inf(const TokenLibrary& lib, const Expression& expr,
                            const Dataset& data, const LikelihoodModel& lm,
                            const PriorModel& pm) {
  const auto ll = log_likelihood(lib, expr, data, lm);
  if (!ll) return kNegInf;
  return *ll + log_prior(expr, pm);
}

// Integrates exp(log_f) over [lo, hi] in shifted linear space; the window is
// widened when the endpoints still carry mass relative to the tolerance.
LogMarginal integrate_log_integrand(const std::function<double(double)>& log_f,
                                    double lo, double hi,
                                    const QuadratureScheme& quad) {
  for (int attempt = 0; attempt < 6; ++attempt) {
    double shift = kNegInf;
    const int probes = 65;
    for (int i = 0; i < probes; ++i) {
      const double c = lo + (hi - lo) * i / (probes - 1);
      shift = std::max(shift, log_f(c));
    }
    if (shift == kNegInf) return {kNegInf, true};
    auto g = [&](double c) { return std::exp(log_f(c) - shift); };
    const QuadResult r = integrate(g, lo, hi, quad.rel_tol, quad.abs_tol,
                                   quad.initial_panels, quad.max_panels);
    const double boundary = std::max(g(lo), g(hi)) * (hi - lo);
    if (boundary > quad.rel_tol * std::abs(r.value) && attempt + 1 < 6) {
      const double pad = 0.5 * (hi - lo);
      lo -= pad;
      hi += pad;
      continue;
    }
    return {shift + std::log(r.value), r.converged};
  }
  return {kNegInf, false};
}

}  // namespace

double evidence_no_constants(const TokenLibrary& lib,
                             const std::vector<TreeSkeleton>& trees,
                             const Dataset& data, const LikelihoodModel& lm,
                             const PriorModel& pm) {
  if (trees.empty()) throw std::invalid_argument("evidence over an empty tree list");
  std::vector<double> log_joints;
  log_joints.reserve(trees.size());
  for (const auto& tree : trees) {
    if (count_constants(lib, tree) != 0)
      throw std::invalid_argument("evidence_no_constants given a tree with constants");
    log_joints.push_back(log_joint_or_neg_inf(lib, {tree, {}}, data, lm, pm));
  }
  return log_sum_exp(log_joints);
}

LogMarginal tree_log_marginal(const TokenLibrary& lib, const TreeSkeleton& tree,
                              const Dataset& data, const LikelihoodModel& lm,
                              const PriorModel& pm, const QuadratureScheme& quad) {
  const int k = count_constants(lib, tree);
  if (k > quad.max_constants || k > 2)
    throw std::invalid_argument("too many constants for marginalization");
  if (k == 0) return {log_joint_or_neg_inf(lib, {tree, {}}, data, lm, pm), true};

  const double lo = pm.mu_c - quad.window_sigmas * pm.sigma_c;
  const double hi = pm.mu_c + quad.window_sigmas * pm.sigma_c;
  if (k == 1) {
    auto log_f = [&](double c) {
      return log_joint_or_neg_inf(lib, {tree, {c}}, data, lm, pm);
    };
    return integrate_log_integrand(log_f, lo, hi, quad);
  }

  // two constants: nested quadrature over the prior window, inner in shifted
  // linear space with a shared shift from a coarse grid probe
  double shift = kNegInf;
  const int probes = 33;
  for (int i = 0; i < probes; ++i)
    for (int j = 0; j < probes; ++j) {
      const double c1 = lo + (hi - lo) * i / (probes - 1);
      const double c2 = lo + (hi - lo) * j / (probes - 1);
      shift = std::max(shift, log_joint_or_neg_inf(lib, {tree, {c1, c2}}, data, lm, pm));
    }
  if (shift == kNegInf) return {kNegInf, true};
  bool inner_ok = true;
  auto outer = [&](double c1) {
    auto g = [&](double c2) {
      return std::exp(log_joint_or_neg_inf(lib, {tree, {c1, c2}}, data, lm, pm) - shift);
    };
    const QuadResult r = integrate(g, lo, hi, quad.rel_tol, quad.abs_tol,
                                   quad.initial_panels, quad.max_panels);
    if (!r.converged) inner_ok = false;
    return r.value;
  };
  const QuadResult r = integrate(outer, lo, hi, quad.rel_tol, quad.abs_tol,
                                 quad.initial_panels, quad.max_panels);
  return {shift + std::log(r.value), r.converged && inner_ok};
}

EvidenceResult evidence_with_constants(const TokenLibrary& lib,
                                       const std::vector<TreeSkeleton>& trees,
                                       const Dataset& data, const LikelihoodModel& lm,
                                       const PriorModel& pm,
                                       const QuadratureScheme& quad) {
  if (trees.empty()) throw std::invalid_argument("evidence over an empty tree list");
  EvidenceResult result;
  std::vector<double> log_marginals;
  log_marginals.reserve(trees.size());
  for (size_t i = 0; i < trees.size(); ++i) {
    const LogMarginal lm_i = tree_log_marginal(lib, trees[i], data, lm, pm, quad);
    if (!lm_i.converged) {
      result.converged = false;
      result.flagged.push_back(static_cast<int>(i));
    }
    log_marginals.push_back(lm_i.log_value);
  }
  result.log_evidence = log_sum_exp(log_marginals);
  return result;
}

PosteriorTable exact_posterior(const TokenLibrary& lib,
                               const std::vector<TreeSkeleton>& trees,
                               const Dataset& data, const LikelihoodModel& lm,
                               const PriorModel& pm,
                               const std::optional<QuadratureScheme>& quad) {
  if (trees.empty()) throw std::invalid_argument("posterior over an empty tree list");
  std::vector<double> log_marginals;
  log_marginals.reserve(trees.size());
  for (const auto& tree : trees) {
    if (count_constants(lib, tree) == 0) {
      log_marginals.push_back(log_joint_or_neg_inf(lib, {tree, {}}, data, lm, pm));
    } else {
      if (!quad)
        throw std::invalid_argument(
            "trees with constants require a quadrature scheme");
      log_marginals.push_back(
          tree_log_marginal(lib, tree, data, lm, pm, *quad).log_value);
    }
  }
  const double log_evidence = log_sum_exp(log_marginals);

  PosteriorTable table;
  table.source = PosteriorTable::Source::Exact;
  table.log_evidence = log_evidence;
  for (size_t i = 0; i < trees.size(); ++i) {
    PosteriorRow row;
    row.tree = trees[i];
    row.display = canonical_display(lib, trees[i]);
    row.probability = std::exp(log_marginals[i] - log_evidence);
    table.rows.push_back(std::move(row));
  }
  std::stable_sort(table.rows.begin(), table.rows.end(),
                   [](const PosteriorRow& a, const PosteriorRow& b) {
                     if (a.probability != b.probability)
                       return a.probability > b.probability;
                     return a.display < b.display;
                   });
  return table;
}

double kl_divergence(double log_evidence, double elbo) {
  if (!std::isfinite(log_evidence) || !std::isfinite(elbo))
    throw std::invalid_argument("kl_divergence needs finite inputs");
  return log_evidence - elbo;
}

double exact_enumeration_elbo(const TokenLibrary& lib, const ConstraintSet& cs,
                              const nn::ParamLayout& layout, const nn::Vec& params,
                              const std::vector<TreeSkeleton>& trees,
                              const Dataset& data, const LikelihoodModel& lm,
                              const PriorModel& pm) {
  double elbo = 0.0;
  for (const auto& tree : trees) {
    if (count_constants(lib, tree) != 0)
      throw std::invalid_argument(
          "exact_enumeration_elbo requires constant-free trees");
    Expression expr{tree, {}};
    const auto log_q = rollout_log_prob(lib, cs, layout, params, expr);
    if (!log_q) continue;
    const double q = std::exp(*log_q);
    if (q == 0.0) continue;
    elbo += q * (log_joint_or_neg_inf(lib, expr, data, lm, pm) - *log_q);
  }
  return elbo;
}

PosteriorTable variational_table(const TokenLibrary& lib, const ConstraintSet& cs,
                                 const nn::ParamLayout& layout, const nn::Vec& params,
                                 const std::vector<TreeSkeleton>& trees,
                                 const QuadratureScheme& quad) {
  PosteriorTable table;
  table.source = PosteriorTable::Source::Variational;
  for (const auto& tree : trees) {
    PosteriorRow row;
    row.tree = tree;
    row.display = canonical_display(lib, tree);
    row.probability = tree_marginal_q(lib, cs, layout, params, tree, quad).value;
    table.rows.push_back(std::move(row));
  }
  std::stable_sort(table.rows.begin(), table.rows.end(),
                   [](const PosteriorRow& a, const PosteriorRow& b) {
                     if (a.probability != b.probability)
                       return a.probability > b.probability;
                     return a.display < b.display;
                   });
  return table;
}

std::string PosteriorTable::to_csv() const {
  std::ostringstream out;
  out << "display,probability\n";
  out.precision(17);
  for (const auto& row : rows) out << row.display << "," << row.probability << "\n";
  return out.str();
}

std::string PosteriorTable::to_json(const TokenLibrary& lib) const {
  nlohmann::json j;
  j["source"] = source == Source::Exact ? "exact" : "variational";
  if (log_evidence) j["log_evidence"] = *log_evidence;
  j["rows"] = nlohmann::json::array();
  for (const auto& row : rows) {
    nlohmann::json r;
    r["display"] = row.display;
    r["probability"] = row.probability;
    r["tokens"] = nlohmann::json::array();
    for (int t : row.tree) r["tokens"].push_back(lib[t].symbol);
    j["rows"].push_back(std::move(r));
  }
  return j.dump(2);
}

PosteriorTable PosteriorTable::from_csv(const std::string& text) {
  PosteriorTable table;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("display,", 0) != 0)
    throw std::invalid_argument("posterior CSV must start with a display header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find_last_of(',');
    if (comma == std::string::npos)
      throw std::invalid_argument("malformed posterior CSV row: " + line);
    PosteriorRow row;
    row.display = line.substr(0, comma);
    row.probability = std::stod(line.substr(comma + 1));
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace varsr
