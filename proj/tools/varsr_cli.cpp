#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "varsr/enumerate.hpp"
#include "varsr/harness.hpp"

namespace fs = std::filesystem;
using namespace varsr;

namespace {

ExperimentSpec load_spec(const std::string& arg, bool fast) {
  if (fs::exists(arg)) {
    std::ifstream in(arg);
    std::stringstream ss;
    ss << in.rdbuf();
    return ExperimentSpec::from_json(ss.str());
  }
  return builtin_profile(arg, fast);
}

void apply_overrides(ExperimentSpec& spec, uint64_t seed, bool seed_set,
                     const std::string& out_dir) {
  if (seed_set) spec.train.seed = seed;
  if (!out_dir.empty()) {
    spec.output_dir = out_dir;
  } else if (const char* root = std::getenv("VARSR_OUTPUT_ROOT")) {
    spec.output_dir = (fs::path(root) / spec.output_dir).string();
  }
}

void print_report(const RunReport& report) {
  std::printf("experiment %s: %s (max |q - p| = %.3e, tolerance %.1e)\n",
              report.experiment.c_str(), report.pass ? "PASS" : "FAIL",
              report.max_abs_delta, report.tolerance);
  std::printf("%-14s %-14s %-14s %s\n", "expression", "p(exact)", "q(median)", "iqr");
  for (const auto& row : report.summary)
    std::printf("%-14s %.8f     %.8f     [%.8f, %.8f]\n", row.display.c_str(),
                row.p_exact, row.q_median, row.q_iqr_lo, row.q_iqr_hi);
  std::printf("median final KL: %.6e\n", report.median_final_kl);
  for (size_t i = 0; i < report.runs.size(); ++i) {
    const auto& run = report.runs[i];
    if (run.aborted)
      std::printf("  run %zu: ABORTED (%s)\n", i, run.abort_reason.c_str());
    else
      std::printf("  run %zu: final KL %.6e%s\n", i, run.final_kl,
                  run.final_kl_exact ? "" : " (sampled estimate)");
  }
}

std::vector<int> parse_sizes(const std::string& text) {
  std::vector<int> sizes;
  const auto dash = text.find('-');
  if (dash != std::string::npos) {
    const int lo = std::stoi(text.substr(0, dash));
    const int hi = std::stoi(text.substr(dash + 1));
    for (int s = lo; s <= hi; ++s) sizes.push_back(s);
    return sizes;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) sizes.push_back(std::stoi(item));
  return sizes;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"variational symbolic regression experiments"};
  app.require_subcommand(1);

  std::string spec_arg, out_dir, sizes_arg = "1-12", compare_left, compare_right;
  uint64_t seed = 0;
  bool fast = false;
  long budget = 200000;
  double tol = 1e-4;

  auto* run_cmd = app.add_subcommand("run", "train a profile and compare tables");
  run_cmd->add_option("profile", spec_arg, "profile name or config path")->required();
  run_cmd->add_flag("--fast", fast, "reduced-budget variant");
  auto* run_seed_opt = run_cmd->add_option("--seed", seed, "master seed override");
  run_cmd->add_option("--out", out_dir, "output directory override");

  auto* scaling_cmd = app.add_subcommand("scaling", "KL versus maximum expression size");
  scaling_cmd->add_option("profile", spec_arg, "profile name or config path")->required();
  scaling_cmd->add_option("--sizes", sizes_arg, "sizes, e.g. 1-8 or 1,2,3");
  scaling_cmd->add_flag("--fast", fast, "reduced-budget variant");
  auto* scaling_seed_opt = scaling_cmd->add_option("--seed", seed, "master seed override");
  scaling_cmd->add_option("--out", out_dir, "output directory override");
  scaling_cmd->add_option("--budget", budget, "maximum enumerable tree count");

  auto* oracle_cmd = app.add_subcommand("oracle", "exact posterior only");
  oracle_cmd->add_option("profile", spec_arg, "profile name or config path")->required();
  oracle_cmd->add_option("--out", out_dir, "output directory override");

  auto* dump_cmd = app.add_subcommand("dump-profile", "print a built-in profile");
  dump_cmd->add_option("name", spec_arg, "profile name")->required();
  dump_cmd->add_flag("--fast", fast, "reduced-budget variant");

  auto* compare_cmd = app.add_subcommand("compare", "diff two posterior CSV tables");
  compare_cmd->add_option("exact", compare_left, "exact posterior CSV")->required();
  compare_cmd->add_option("variational", compare_right, "variational posterior CSV")
      ->required();
  compare_cmd->add_option("--tol", tol, "maximum per-row |delta|");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      ExperimentSpec spec = load_spec(spec_arg, fast);
      apply_overrides(spec, seed, !run_seed_opt->empty(), out_dir);
      const RunReport report = run_experiment(spec);
      print_report(report);
      return report.pass ? 0 : 1;
    }
    if (scaling_cmd->parsed()) {
      ExperimentSpec spec = load_spec(spec_arg, fast);
      apply_overrides(spec, seed, !scaling_seed_opt->empty(), out_dir);
      const auto rows = run_scaling_sweep(spec, parse_sizes(sizes_arg), budget);
      std::printf("%-10s %-14s %-14s %s\n", "size", "KL", "stderr", "trees");
      for (const auto& row : rows) {
        if (row.skipped)
          std::printf("%-10d skipped (tree count over budget)\n", row.max_tokens);
        else
          std::printf("%-10d %.6e   %.3e      %ld\n", row.max_tokens, row.kl,
                      row.std_error, row.tree_count);
      }
      return 0;
    }
    if (oracle_cmd->parsed()) {
      ExperimentSpec spec = load_spec(spec_arg, false);
      apply_overrides(spec, 0, false, out_dir);
      const TokenLibrary lib = TokenLibrary::from_symbols(spec.library);
      const Dataset data = make_dataset(spec.data);
      const PriorModel pm =
          lib.has_constant()
              ? PriorModel::with_constants(lib, spec.constraints.max_tokens,
                                           spec.c_prior_mean, spec.c_prior_std)
              : PriorModel::uniform(lib, spec.constraints.max_tokens);
      const auto trees =
          enumerate_trees(lib, spec.constraints.max_tokens, spec.constraints);
      const auto table = exact_posterior(
          lib, trees, data, spec.likelihood, pm,
          lib.has_constant() ? std::optional<QuadratureScheme>(spec.quadrature)
                             : std::nullopt);
      const fs::path dir = fs::path(spec.output_dir) / spec.name;
      fs::create_directories(dir);
      std::ofstream(dir / "posterior_exact.csv") << table.to_csv();
      std::ofstream(dir / "posterior_exact.json") << table.to_json(lib);
      std::printf("log evidence: %.12f\n", *table.log_evidence);
      for (const auto& row : table.rows)
        std::printf("%-14s %.8f\n", row.display.c_str(), row.probability);
      return 0;
    }
    if (dump_cmd->parsed()) {
      std::cout << builtin_profile(spec_arg, fast).to_json() << "\n";
      return 0;
    }
    if (compare_cmd->parsed()) {
      auto slurp = [](const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot read " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
      };
      const auto left = PosteriorTable::from_csv(slurp(compare_left));
      const auto right = PosteriorTable::from_csv(slurp(compare_right));
      const auto report = compare_tables(left, right, tol);
      std::cout << report.to_string();
      return report.pass ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
