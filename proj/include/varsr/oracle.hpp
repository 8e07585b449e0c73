#pragma once

#include <optional>
#include <string>
#include <vector>

#include "varsr/bayes.hpp"
#include "varsr/policy.hpp"
#include "varsr/quadrature.hpp"

namespace varsr {

struct PosteriorRow {
  TreeSkeleton tree;
  std::string display;
  double probability = 0.0;
};

// Per-tree probabilities over an enumerable expression space, either the
// exact posterior or the policy's marginal distribution.
struct PosteriorTable {
  enum class Source { Exact, Variational };
  Source source = Source::Exact;
  std::optional<double> log_evidence;  // absent for variational tables
  std::vector<PosteriorRow> rows;      // descending by probability

  std::string to_csv() const;
  std::string to_json(const TokenLibrary& lib) const;
  // display/probability columns only; trees are not reconstructed
  static PosteriorTable from_csv(const std::string& text);
};

// log p(y|X) over trees without constant tokens: log-sum-exp of
// log-likelihood + log-prior per tree.
double evidence_no_constants(const TokenLibrary& lib,
                             const std::vector<TreeSkeleton>& trees,
                             const Dataset& data, const LikelihoodModel& lm,
                             const PriorModel& pm);

struct LogMarginal {
  double log_value = 0.0;
  bool converged = true;
};

// log of the likelihood-times-prior marginal of one tree, integrating only
// over the constants that appear in it. The integral over a constant absent
// from the tree is taken as the identity, so constant-free trees contribute
// likelihood times prior directly.
LogMarginal tree_log_marginal(const TokenLibrary& lib, const TreeSkeleton& tree,
                              const Dataset& data, const LikelihoodModel& lm,
                              const PriorModel& pm, const QuadratureScheme& quad);

struct EvidenceResult {
  double log_evidence = 0.0;
  bool converged = true;
  std::vector<int> flagged;  // indices of trees whose quadrature did not converge
};

EvidenceResult evidence_with_constants(const TokenLibrary& lib,
                                       const std::vector<TreeSkeleton>& trees,
                                       const Dataset& data, const LikelihoodModel& lm,
                                       const PriorModel& pm,
                                       const QuadratureScheme& quad);

// Per-tree probability = exp(log marginal - log evidence), sorted descending.
PosteriorTable exact_posterior(const TokenLibrary& lib,
                               const std::vector<TreeSkeleton>& trees,
                               const Dataset& data, const LikelihoodModel& lm,
                               const PriorModel& pm,
                               const std::optional<QuadratureScheme>& quad);

// log-evidence minus ELBO; negative values only arise from Monte Carlo noise
// in an estimated ELBO.
double kl_divergence(double log_evidence, double elbo);

// Exact ELBO of the policy over a constant-free enumerable space:
// sum over trees of q(z) * (log-likelihood + log-prior - log q(z)), with
// unreachable trees contributing zero.
double exact_enumeration_elbo(const TokenLibrary& lib, const ConstraintSet& cs,
                              const nn::ParamLayout& layout, const nn::Vec& params,
                              const std::vector<TreeSkeleton>& trees,
                              const Dataset& data, const LikelihoodModel& lm,
                              const PriorModel& pm);

// Marginal tree probabilities under the policy.
PosteriorTable variational_table(const TokenLibrary& lib, const ConstraintSet& cs,
                                 const nn::ParamLayout& layout, const nn::Vec& params,
                                 const std::vector<TreeSkeleton>& trees,
                                 const QuadratureScheme& quad);

}  // namespace varsr
