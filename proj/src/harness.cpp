#include "varsr/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "varsr/enumerate.hpp"

namespace varsr {

namespace fs = std::filesystem;

Dataset make_dataset(const DataSpec& spec) {
  std::vector<double> grid;
  for (double v = spec.grid_start; v <= spec.grid_stop + 1e-12; v += spec.grid_step)
    grid.push_back(v);
  const int m = static_cast<int>(grid.size());
  Dataset data;
  data.x.resize(1, m);
  data.y.resize(m);
  for (int i = 0; i < m; ++i) {
    data.x(0, i) = grid[i];
    switch (spec.target) {
      case DataSpec::Target::Quad: data.y[i] = grid[i] * grid[i]; break;
      case DataSpec::Target::Lin: data.y[i] = grid[i]; break;
      case DataSpec::Target::Const: data.y[i] = 0.5; break;
    }
  }
  return data;
}

namespace {

std::string target_name(DataSpec::Target t) {
  switch (t) {
    case DataSpec::Target::Quad: return "quad";
    case DataSpec::Target::Lin: return "lin";
    case DataSpec::Target::Const: return "const";
  }
  return "quad";
}

DataSpec::Target target_from_name(const std::string& s) {
  if (s == "quad") return DataSpec::Target::Quad;
  if (s == "lin") return DataSpec::Target::Lin;
  if (s == "const") return DataSpec::Target::Const;
  throw std::invalid_argument("unknown data target: " + s);
}

double quantile(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  if (values.size() == 1) return values[0];
  const double idx = p * (values.size() - 1);
  const size_t lo = static_cast<size_t>(idx);
  const size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = idx - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

}  // namespace

uint64_t run_seed(uint64_t master, int run_index) {
  return derive_seed(master, 0x52554e, static_cast<uint64_t>(run_index));
}

std::string traces_to_csv(const std::vector<EpochTrace>& traces) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,elbo,kl,lr,baseline\n";
  for (const auto& t : traces) {
    out << t.epoch << "," << t.elbo << ",";
    if (t.kl) out << *t.kl;
    out << "," << t.learning_rate << "," << t.baseline << "\n";
  }
  return out.str();
}

std::string ExperimentSpec::to_json() const {
  nlohmann::json j;
  j["name"] = name;
  j["data"] = target_name(data.target);
  j["library"] = library;
  j["constraints"] = {
      {"max_tokens", constraints.max_tokens},
      {"forbid_inverse_child", constraints.forbid_inverse_child},
      {"forbid_nested_trig", constraints.forbid_nested_trig},
      {"forbid_all_constant_children", constraints.forbid_all_constant_children},
      {"constant_child_position",
       constraints.constant_position == ConstantPositionRule::FirstChildOnly
           ? "first_child_only"
           : "off"}};
  j["epochs"] = train.epochs;
  j["samples_per_epoch"] = train.batch_size;
  j["runs"] = runs;
  j["rnn_type"] = "gru";
  j["hidden_layers"] = 1;
  j["hidden_layer_size"] = train.hidden_size;
  j["rmsprop_learning_rate"] = train.optimizer.learning_rate;
  j["rmsprop_alpha"] = train.optimizer.alpha;
  j["rmsprop_epsilon"] = train.optimizer.epsilon;
  j["lra_factor"] = train.optimizer.plateau_factor;
  j["lra_patience"] = train.optimizer.plateau_patience;
  j["lra_threshold"] = train.optimizer.plateau_threshold;
  j["lra_min_lr"] = train.optimizer.min_learning_rate;
  j["grad_clip"] = train.optimizer.grad_clip;
  j["baseline"] =
      train.baseline.kind == BaselineConfig::Kind::Ewma ? "ewma" : "mean";
  j["baseline_ewma_alpha"] = train.baseline.ewma_alpha;
  j["likelihood_std"] = likelihood.sigma;
  j["c_prior_mean"] = c_prior_mean;
  j["c_prior_std"] = c_prior_std;
  j["seed"] = train.seed;
  j["quadrature"] = {{"rel_tol", quadrature.rel_tol},
                     {"window_sigmas", quadrature.window_sigmas},
                     {"initial_panels", quadrature.initial_panels},
                     {"max_panels", quadrature.max_panels},
                     {"max_constants", quadrature.max_constants}};
  j["table_tolerance"] = table_tolerance;
  j["final_elbo_samples"] = final_elbo_samples;
  j["output_dir"] = output_dir;
  return j.dump(2);
}

ExperimentSpec ExperimentSpec::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  ExperimentSpec spec;
  spec.name = j.at("name").get<std::string>();
  spec.data.target = target_from_name(j.at("data").get<std::string>());
  spec.library = j.at("library").get<std::vector<std::string>>();
  const auto& c = j.at("constraints");
  spec.constraints.max_tokens = c.at("max_tokens").get<int>();
  spec.constraints.forbid_inverse_child = c.at("forbid_inverse_child").get<bool>();
  spec.constraints.forbid_nested_trig = c.at("forbid_nested_trig").get<bool>();
  spec.constraints.forbid_all_constant_children =
      c.at("forbid_all_constant_children").get<bool>();
  spec.constraints.constant_position =
      c.at("constant_child_position").get<std::string>() == "first_child_only"
          ? ConstantPositionRule::FirstChildOnly
          : ConstantPositionRule::Off;
  spec.train.epochs = j.at("epochs").get<int>();
  spec.train.batch_size = j.at("samples_per_epoch").get<int>();
  spec.runs = j.at("runs").get<int>();
  if (j.value("rnn_type", std::string("gru")) != "gru")
    throw std::invalid_argument("only the gru cell is supported");
  if (j.value("hidden_layers", 1) != 1)
    throw std::invalid_argument("only a single hidden layer is supported");
  spec.train.hidden_size = j.at("hidden_layer_size").get<int>();
  spec.train.optimizer.learning_rate = j.at("rmsprop_learning_rate").get<double>();
  spec.train.optimizer.alpha = j.at("rmsprop_alpha").get<double>();
  spec.train.optimizer.epsilon = j.at("rmsprop_epsilon").get<double>();
  spec.train.optimizer.plateau_factor = j.at("lra_factor").get<double>();
  spec.train.optimizer.plateau_patience = j.at("lra_patience").get<int>();
  spec.train.optimizer.plateau_threshold = j.at("lra_threshold").get<double>();
  spec.train.optimizer.min_learning_rate = j.at("lra_min_lr").get<double>();
  spec.train.optimizer.grad_clip = j.value("grad_clip", 0.0);
  spec.train.baseline.kind = j.at("baseline").get<std::string>() == "mean"
                                 ? BaselineConfig::Kind::BatchMean
                                 : BaselineConfig::Kind::Ewma;
  spec.train.baseline.ewma_alpha = j.at("baseline_ewma_alpha").get<double>();
  spec.likelihood.sigma = j.at("likelihood_std").get<double>();
  spec.c_prior_mean = j.at("c_prior_mean").get<double>();
  spec.c_prior_std = j.at("c_prior_std").get<double>();
  spec.train.seed = j.at("seed").get<uint64_t>();
  const auto& q = j.at("quadrature");
  spec.quadrature.rel_tol = q.at("rel_tol").get<double>();
  spec.quadrature.window_sigmas = q.at("window_sigmas").get<double>();
  spec.quadrature.initial_panels = q.value("initial_panels", 16);
  spec.quadrature.max_panels = q.value("max_panels", 4000);
  spec.quadrature.max_constants = q.value("max_constants", 2);
  spec.table_tolerance = j.at("table_tolerance").get<double>();
  spec.final_elbo_samples = j.value("final_elbo_samples", 20000);
  spec.output_dir = j.value("output_dir", std::string("out"));
  return spec;
}

ExperimentSpec builtin_profile(const std::string& name, bool fast) {
  ExperimentSpec spec;
  spec.name = name;
  spec.train.seed = 42;

  const bool no_const = name.rfind("no-const-", 0) == 0;
  const bool with_const = name.rfind("const-", 0) == 0;
  if (no_const || name == "scaling") {
    spec.library = {"+", "*", "sin", "x_0"};
    spec.constraints.max_tokens = 3;
    spec.constraints.forbid_nested_trig = true;
    spec.constraints.forbid_inverse_child = true;
    spec.constraints.forbid_all_constant_children = false;
    spec.constraints.constant_position = ConstantPositionRule::Off;
  } else if (with_const) {
    spec.library = {"+", "*", "cos", "c", "x_0"};
    spec.constraints.max_tokens = 3;
    spec.constraints.forbid_nested_trig = true;
    spec.constraints.forbid_inverse_child = true;
    spec.constraints.forbid_all_constant_children = true;
    spec.constraints.constant_position = ConstantPositionRule::FirstChildOnly;
  } else {
    throw std::invalid_argument("unknown profile: " + name);
  }

  auto target_of = [&]() {
    if (name.ends_with("-quad") || name == "scaling") return DataSpec::Target::Quad;
    if (name.ends_with("-lin")) return DataSpec::Target::Lin;
    if (name.ends_with("-const")) return DataSpec::Target::Const;
    throw std::invalid_argument("unknown profile: " + name);
  };
  spec.data.target = target_of();

  if (no_const) {
    spec.train.epochs = 250;
    spec.train.batch_size = 100;
    spec.runs = 10;
    spec.train.hidden_size = 32;
    spec.train.optimizer.learning_rate = 1e-2;
    spec.train.optimizer.plateau_patience = 15;
    spec.train.optimizer.min_learning_rate = 1e-6;
    spec.train.baseline.kind = BaselineConfig::Kind::Ewma;
    spec.train.baseline.ewma_alpha = 0.25;
    spec.table_tolerance = 1e-4;
  } else if (name == "scaling") {
    spec.train.epochs = 2000;
    spec.train.batch_size = 1000;
    spec.runs = 1;
    spec.train.hidden_size = 64;
    spec.train.optimizer.learning_rate = 5e-3;
    spec.train.optimizer.plateau_patience = 50;
    spec.train.optimizer.min_learning_rate = 5e-6;
    spec.train.baseline.kind = BaselineConfig::Kind::Ewma;
    spec.train.baseline.ewma_alpha = 0.25;
    spec.table_tolerance = 1e-3;
    spec.final_elbo_samples = 50000;
  } else {
    spec.train.epochs = 1000;
    spec.train.batch_size = 500;
    spec.runs = 10;
    spec.train.hidden_size = 64;
    spec.train.optimizer.learning_rate = 5e-3;
    spec.train.optimizer.plateau_patience = 25;
    spec.train.optimizer.min_learning_rate = 1e-6;
    spec.train.baseline.kind = BaselineConfig::Kind::BatchMean;
    spec.c_prior_mean = 0.0;
    spec.c_prior_std = 10.0;
    spec.table_tolerance = 1e-3;
  }
  spec.train.optimizer.alpha = 0.9;
  spec.train.optimizer.epsilon = 1e-6;
  spec.train.optimizer.plateau_factor = 0.5;
  spec.likelihood.sigma = 1.0;

  if (fast) {
    spec.name += "-fast";
    if (name == "scaling") {
      spec.train.epochs = 200;
      spec.train.batch_size = 200;
    } else {
      spec.train.epochs = 60;
      spec.train.batch_size = 100;
      spec.runs = 3;
      spec.table_tolerance = 0.05;
    }
  }
  return spec;
}

std::vector<std::string> builtin_profile_names() {
  return {"no-const-quad", "no-const-lin", "no-const-const",
          "const-quad",    "const-lin",    "const-const",
          "scaling"};
}

CompareReport compare_tables(const PosteriorTable& exact,
                             const PosteriorTable& variational, double tol) {
  CompareReport report;
  auto find_in = [](const PosteriorTable& t, const std::string& display) {
    for (const auto& row : t.rows)
      if (row.display == display) return std::optional<double>(row.probability);
    return std::optional<double>();
  };
  for (const auto& row : exact.rows) {
    const auto q = find_in(variational, row.display);
    if (!q) {
      report.only_in_left.push_back(row.display);
      continue;
    }
    const double delta = std::abs(row.probability - *q);
    report.deltas.emplace_back(row.display, delta);
    report.max_abs_delta = std::max(report.max_abs_delta, delta);
  }
  for (const auto& row : variational.rows)
    if (!find_in(exact, row.display)) report.only_in_right.push_back(row.display);
  report.pass = report.only_in_left.empty() && report.only_in_right.empty() &&
                report.max_abs_delta <= tol;
  return report;
}

std::string CompareReport::to_string() const {
  std::ostringstream out;
  out.precision(12);
  if (!only_in_left.empty() || !only_in_right.empty()) {
    out << "row-set mismatch\n";
    for (const auto& d : only_in_left) out << "  only in exact: " << d << "\n";
    for (const auto& d : only_in_right) out << "  only in variational: " << d << "\n";
    return out.str();
  }
  for (const auto& [display, delta] : deltas)
    out << "  " << display << "  |delta| = " << delta << "\n";
  out << (pass ? "PASS" : "FAIL") << "  max |delta| = " << max_abs_delta << "\n";
  return out.str();
}

double spearman_rank_correlation(const std::vector<double>& a,
                                 const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw std::invalid_argument("rank correlation needs two equal-length series");
  auto ranks = [](const std::vector<double>& v) {
    const size_t n = v.size();
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](size_t x, size_t y) { return v[x] < v[y]; });
    std::vector<double> r(n);
    size_t i = 0;
    while (i < n) {
      size_t j = i;
      while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
      const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
      for (size_t k = i; k <= j; ++k) r[order[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0, va = 0, vb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (va == 0.0 || vb == 0.0) return 0.0;
  return cov / std::sqrt(va * vb);
}

namespace {

PriorModel prior_for(const ExperimentSpec& spec, const TokenLibrary& lib) {
  if (lib.has_constant())
    return PriorModel::with_constants(lib, spec.constraints.max_tokens,
                                      spec.c_prior_mean, spec.c_prior_std);
  return PriorModel::uniform(lib, spec.constraints.max_tokens);
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

}  // namespace

std::string RunReport::to_json() const {
  nlohmann::json j;
  j["experiment"] = experiment;
  j["log_evidence"] = exact.log_evidence ? nlohmann::json(*exact.log_evidence)
                                         : nlohmann::json();
  j["tolerance"] = tolerance;
  j["median_final_kl"] = median_final_kl;
  j["max_abs_delta"] = max_abs_delta;
  j["pass"] = pass;
  j["rows"] = nlohmann::json::array();
  for (const auto& row : summary) {
    j["rows"].push_back({{"display", row.display},
                         {"p_exact", row.p_exact},
                         {"q_median", row.q_median},
                         {"q_iqr_lo", row.q_iqr_lo},
                         {"q_iqr_hi", row.q_iqr_hi},
                         {"abs_delta", row.abs_delta}});
  }
  j["final_kl_per_run"] = nlohmann::json::array();
  for (const auto& run : runs) {
    j["final_kl_per_run"].push_back(
        {{"final_kl", run.final_kl},
         {"exact", run.final_kl_exact},
         {"aborted", run.aborted},
         {"abort_reason", run.abort_reason}});
  }
  return j.dump(2);
}

RunReport run_experiment(const ExperimentSpec& spec) {
  const TokenLibrary lib = TokenLibrary::from_symbols(spec.library);
  const Dataset data = make_dataset(spec.data);
  const PriorModel pm = prior_for(spec, lib);
  const auto trees = enumerate_trees(lib, spec.constraints.max_tokens, spec.constraints);

  RunReport report;
  report.experiment = spec.name;
  report.tolerance = spec.table_tolerance;
  report.exact = exact_posterior(lib, trees, data, spec.likelihood, pm,
                                 lib.has_constant()
                                     ? std::optional<QuadratureScheme>(spec.quadrature)
                                     : std::nullopt);
  const double log_evidence = *report.exact.log_evidence;

  const fs::path out_dir = fs::path(spec.output_dir) / spec.name;
  fs::create_directories(out_dir);
  write_file(out_dir / "experiment.json", spec.to_json());
  write_file(out_dir / "posterior_exact.csv", report.exact.to_csv());
  write_file(out_dir / "posterior_exact.json", report.exact.to_json(lib));

  for (int r = 0; r < spec.runs; ++r) {
    TrainConfig cfg = spec.train;
    cfg.seed = run_seed(spec.train.seed, r);
    if (cfg.checkpoint_every > 0)
      cfg.checkpoint_path =
          (out_dir / ("checkpoint_run" + std::to_string(r) + ".json")).string();
    RunOutcome outcome;
    const TrainResult trained = train(cfg, lib, spec.constraints, data,
                                      spec.likelihood, pm, log_evidence);
    outcome.aborted = trained.aborted;
    outcome.abort_reason = trained.abort_reason;
    outcome.traces = trained.traces;
    write_file(out_dir / ("traces_run" + std::to_string(r) + ".csv"),
               traces_to_csv(trained.traces));
    if (!trained.aborted) {
      outcome.variational = variational_table(lib, spec.constraints, trained.layout,
                                              trained.params, trees, spec.quadrature);
      if (!lib.has_constant()) {
        const double elbo =
            exact_enumeration_elbo(lib, spec.constraints, trained.layout,
                                   trained.params, trees, data, spec.likelihood, pm);
        outcome.final_kl = kl_divergence(log_evidence, elbo);
        outcome.final_kl_exact = true;
      } else {
        const ElboEstimate est = estimate_elbo(
            lib, spec.constraints, trained.layout, trained.params, data,
            spec.likelihood, pm, spec.final_elbo_samples, derive_seed(cfg.seed, 0xE));
        outcome.final_kl = kl_divergence(log_evidence, est.value);
        outcome.final_kl_exact = false;
      }
    }
    report.runs.push_back(std::move(outcome));
  }

  // per-row median/IQR across completed runs
  std::vector<double> final_kls;
  for (const auto& run : report.runs)
    if (!run.aborted) final_kls.push_back(run.final_kl);
  report.median_final_kl = final_kls.empty() ? 0.0 : quantile(final_kls, 0.5);

  PosteriorTable median_table;
  median_table.source = PosteriorTable::Source::Variational;
  for (const auto& row : report.exact.rows) {
    std::vector<double> qs;
    for (const auto& run : report.runs) {
      if (run.aborted) continue;
      for (const auto& vrow : run.variational.rows)
        if (vrow.display == row.display) qs.push_back(vrow.probability);
    }
    RowSummary s;
    s.display = row.display;
    s.p_exact = row.probability;
    if (!qs.empty()) {
      s.q_median = quantile(qs, 0.5);
      s.q_iqr_lo = quantile(qs, 0.25);
      s.q_iqr_hi = quantile(qs, 0.75);
      s.abs_delta = std::abs(s.q_median - s.p_exact);
    }
    report.max_abs_delta = std::max(report.max_abs_delta, s.abs_delta);
    median_table.rows.push_back({row.tree, s.display, s.q_median});
    report.summary.push_back(std::move(s));
  }
  report.pass = report.max_abs_delta <= spec.table_tolerance;

  write_file(out_dir / "posterior_variational.csv", median_table.to_csv());
  write_file(out_dir / "posterior_variational.json", median_table.to_json(lib));
  write_file(out_dir / "report.json", report.to_json());
  return report;
}

std::vector<ScalingRow> run_scaling_sweep(const ExperimentSpec& base,
                                          const std::vector<int>& sizes,
                                          long tree_budget) {
  const TokenLibrary lib = TokenLibrary::from_symbols(base.library);
  const Dataset data = make_dataset(base.data);
  const fs::path out_dir = fs::path(base.output_dir) / base.name;
  fs::create_directories(out_dir);

  std::vector<ScalingRow> rows;
  for (int size : sizes) {
    ScalingRow row;
    row.max_tokens = size;
    row.tree_count = count_trees_size_only(lib, size, tree_budget);
    if (row.tree_count > tree_budget) {
      row.skipped = true;
      rows.push_back(row);
      continue;
    }
    ConstraintSet cs = base.constraints;
    cs.max_tokens = size;
    const PriorModel pm =
        lib.has_constant()
            ? PriorModel::with_constants(lib, size, base.c_prior_mean, base.c_prior_std)
            : PriorModel::uniform(lib, size);
    const auto trees = enumerate_trees(lib, size, cs);
    double log_evidence = 0.0;
    if (lib.has_constant()) {
      log_evidence =
          evidence_with_constants(lib, trees, data, base.likelihood, pm, base.quadrature)
              .log_evidence;
    } else {
      log_evidence = evidence_no_constants(lib, trees, data, base.likelihood, pm);
    }
    TrainConfig cfg = base.train;
    cfg.seed = run_seed(base.train.seed, size);
    const TrainResult trained =
        train(cfg, lib, cs, data, base.likelihood, pm, log_evidence);
    const ElboEstimate est =
        estimate_elbo(lib, cs, trained.layout, trained.params, data, base.likelihood,
                      pm, base.final_elbo_samples, derive_seed(cfg.seed, 0xE));
    row.kl = kl_divergence(log_evidence, est.value);
    row.std_error = est.std_error;
    rows.push_back(row);
  }

  std::ostringstream csv;
  csv.precision(17);
  csv << "max_tokens,kl,std_error,tree_count,skipped\n";
  for (const auto& row : rows)
    csv << row.max_tokens << "," << row.kl << "," << row.std_error << ","
        << row.tree_count << "," << (row.skipped ? 1 : 0) << "\n";
  write_file(out_dir / "scaling.csv", csv.str());
  return rows;
}

}  // namespace varsr
