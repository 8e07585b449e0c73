#pragma once

#include <string>
#include <utility>
#include <vector>

#include "varsr/oracle.hpp"
#include "varsr/trainer.hpp"

namespace varsr {

struct DataSpec {
  enum class Target { Quad, Lin, Const };  // y = x^2, y = x, y = 0.5
  Target target = Target::Quad;
  double grid_start = 0.0;
  double grid_stop = 1.0;
  double grid_step = 0.1;
};

// Noise-free single-variable grid dataset.
Dataset make_dataset(const DataSpec& spec);

struct ExperimentSpec {
  std::string name;
  DataSpec data;
  std::vector<std::string> library;
  ConstraintSet constraints;
  TrainConfig train;
  int runs = 10;
  LikelihoodModel likelihood;
  double c_prior_mean = 0.0;
  double c_prior_std = 10.0;
  QuadratureScheme quadrature;
  double table_tolerance = 1e-4;   // per-row |q - p| gate for the report verdict
  int final_elbo_samples = 20000;  // KL estimation when exact enumeration is out
  std::string output_dir = "out";

  std::string to_json() const;
  static ExperimentSpec from_json(const std::string& text);
};

// Built-in experiment profiles: "no-const-quad", "no-const-lin",
// "no-const-const", "const-quad", "const-lin", "const-const", "scaling".
// The fast variants cut epochs/samples/runs for quick turnaround and loosen
// the report tolerance accordingly.
ExperimentSpec builtin_profile(const std::string& name, bool fast = false);
std::vector<std::string> builtin_profile_names();

struct RunOutcome {
  bool aborted = false;
  std::string abort_reason;
  double final_kl = 0.0;
  bool final_kl_exact = false;  // enumeration value rather than a sample estimate
  PosteriorTable variational;
  std::vector<EpochTrace> traces;
};

struct RowSummary {
  std::string display;
  double p_exact = 0.0;
  double q_median = 0.0;
  double q_iqr_lo = 0.0;
  double q_iqr_hi = 0.0;
  double abs_delta = 0.0;  // |q_median - p_exact|
};

struct RunReport {
  std::string experiment;
  PosteriorTable exact;
  std::vector<RunOutcome> runs;
  std::vector<RowSummary> summary;
  double median_final_kl = 0.0;
  double max_abs_delta = 0.0;
  double tolerance = 0.0;
  bool pass = false;

  std::string to_json() const;
};

// Computes the exact posterior once, trains `runs` policies on derived
// seeds, and writes traces, both posterior tables and the comparison report
// under <output_dir>/<name>/.
RunReport run_experiment(const ExperimentSpec& spec);

struct ScalingRow {
  int max_tokens = 0;
  double kl = 0.0;
  double std_error = 0.0;
  long tree_count = 0;
  bool skipped = false;
};

// Trains one run per maximum expression size and reports the sampled-ELBO KL
// against the enumerated evidence. Sizes whose size-bound-only tree count
// exceeds tree_budget are reported as skipped.
std::vector<ScalingRow> run_scaling_sweep(const ExperimentSpec& base,
                                          const std::vector<int>& sizes,
                                          long tree_budget = 200000);

struct CompareReport {
  bool pass = false;
  double max_abs_delta = 0.0;
  std::vector<std::pair<std::string, double>> deltas;
  std::vector<std::string> only_in_left, only_in_right;

  std::string to_string() const;
};

// Row-wise comparison keyed on the canonical display; a row-set mismatch
// fails with the symmetric difference listed.
CompareReport compare_tables(const PosteriorTable& exact,
                             const PosteriorTable& variational, double tol);

// Rank correlation with average ranks on ties.
double spearman_rank_correlation(const std::vector<double>& a,
                                 const std::vector<double>& b);

// Deterministic per-run seed derivation from the experiment master seed.
uint64_t run_seed(uint64_t master, int run_index);

std::string traces_to_csv(const std::vector<EpochTrace>& traces);

}  // namespace varsr
