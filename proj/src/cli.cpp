#include "adaspider/cli.hpp"

#include "adaspider/harness.hpp"
#include "adaspider/problems.hpp"
#include "adaspider/verify.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

namespace adaspider {

namespace {

AlgorithmSpec named_algorithm(const std::string& name) {
  AlgorithmSpec a;
  a.name = name;
  return a;
}

ExperimentConfig bundled_default_config() {
  ExperimentConfig c;
  c.problem.loss = "logistic";
  c.problem.synthetic.kind = SyntheticKind::SeparableLogistic;
  c.problem.synthetic.n = 200;
  c.problem.synthetic.d = 20;
  c.problem.synthetic.seed = 1;
  c.problem.lambda = 0.1;
  c.algorithms = {named_algorithm("adaspider")};
  c.steps = 1000;
  c.repeats = 5;
  return c;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) parts.push_back(item);
  return parts;
}

struct RunFlags {
  std::string config_path;
  std::string algo;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> repeats, steps;
  std::optional<double> beta0, g0, eta, smoothness, eps;
  std::string out_path;
  std::string format;
};

void add_run_flags(CLI::App& cmd, RunFlags& f) {
  cmd.add_option("--config", f.config_path, "Experiment config (JSON)");
  cmd.add_option("--algo", f.algo, "Comma-separated optimizers, replacing the config list");
  cmd.add_option("--seed", f.seed, "Master seed");
  cmd.add_option("--repeats", f.repeats, "Seeds per optimizer");
  cmd.add_option("--steps", f.steps, "Step budget T");
  cmd.add_option("--beta0", f.beta0, "AdaSpider beta0");
  cmd.add_option("--g0", f.g0, "AdaSpider G0");
  cmd.add_option("--eta", f.eta, "Step size for sgd, adagrad_norm, svrg, spiderboost");
  cmd.add_option("--smoothness", f.smoothness, "Smoothness L for spider, spiderboost, svrg");
  cmd.add_option("--eps", f.eps, "Target accuracy for spider");
  cmd.add_option("--out", f.out_path, "Output file, '-' for standard output");
  cmd.add_option("--format", f.format, "csv or json");
}

ExperimentConfig resolve_config(const RunFlags& f, bool check = true) {
  ExperimentConfig c = f.config_path.empty() ? bundled_default_config() : load_config(f.config_path);
  if (!f.algo.empty()) {
    c.algorithms.clear();
    for (const auto& name : split_list(f.algo)) c.algorithms.push_back(named_algorithm(name));
  }
  if (f.seed) c.seed = *f.seed;
  if (f.repeats) c.repeats = *f.repeats;
  if (f.steps) {
    c.steps = *f.steps;
    c.epochs.reset();
  }
  for (auto& a : c.algorithms) {
    if (f.beta0 && a.name == "adaspider") a.beta0 = f.beta0;
    if (f.g0 && a.name == "adaspider") a.g0 = f.g0;
    if (f.eta && (a.name == "sgd" || a.name == "adagrad_norm" || a.name == "svrg" || a.name == "spiderboost"))
      a.eta = f.eta;
    if (f.smoothness && (a.name == "spider" || a.name == "spiderboost" || a.name == "svrg"))
      a.smoothness = f.smoothness;
    if (f.eps && a.name == "spider") a.epsilon = f.eps;
  }
  if (!f.format.empty()) c.format = f.format;
  if (!f.out_path.empty()) c.output_path = f.out_path;
  if (check) validate(c);
  return c;
}

std::string output_target(const ExperimentConfig& c, const std::string& stem) {
  if (c.output_path) return *c.output_path;
  if (const char* dir = std::getenv(kOutputDirEnv); dir != nullptr && *dir != '\0')
    return (std::filesystem::path(dir) / (stem + "." + c.format)).string();
  return "-";
}

void emit(const std::vector<RunRecord>& records, const ExperimentConfig& config, const std::string& target,
          std::ostream& out, std::ostream& err) {
  const RecordFormat format = parse_record_format(config.format);
  if (target == "-") {
    if (format == RecordFormat::Csv) {
      write_csv(records, out);
    } else {
      write_json(records, out);
    }
    return;
  }
  emit_records(records, format, target);
  err << "wrote " << records.size() << " records to " << target << '\n';
}

int cmd_run(const RunFlags& flags, std::ostream& out, std::ostream& err) {
  const ExperimentConfig config = resolve_config(flags);
  emit(run_experiment(config), config, output_target(config, "records"), out, err);
  return kExitOk;
}

int cmd_sweep(const RunFlags& flags, const std::string& grid_text, std::ostream& out, std::ostream& err) {
  // Validation waits for the grid value, which supplies the step the check asks for.
  ExperimentConfig config = resolve_config(flags, false);
  if (config.algorithms.size() != 1)
    throw ConfigError("sweep needs exactly one algorithm (use --algo)");
  std::vector<double> grid;
  if (grid_text.empty()) {
    grid = default_step_grid();
  } else {
    for (const auto& item : split_list(grid_text)) {
      try {
        grid.push_back(std::stod(item));
      } catch (const std::exception&) {
        throw ConfigError("bad grid value '" + item + "'");
      }
    }
  }
  const SweepResult result = sweep_step_size(config, 0, grid);

  nlohmann::json summary;
  summary["algo"] = config.algorithms.front().name;
  summary["best"] = result.best_value;
  summary["grid"] = nlohmann::json::array();
  for (std::size_t k = 0; k < result.grid.size(); ++k) {
    nlohmann::json entry{{"value", result.grid[k]}};
    if (std::isfinite(result.scores[k])) {
      entry["score"] = result.scores[k];
    } else {
      entry["score"] = "inf";
    }
    summary["grid"].push_back(entry);
  }
  if (config.output_path || std::getenv(kOutputDirEnv) != nullptr) {
    std::vector<RunRecord> all;
    for (const auto& block : result.records) all.insert(all.end(), block.begin(), block.end());
    const std::string target = output_target(config, "sweep");
    if (target != "-") emit(all, config, target, out, err);
  }
  out << summary.dump(2) << '\n';
  return kExitOk;
}

int cmd_verify(const std::string& suite, std::uint64_t seed, std::ostream& out, std::ostream& err,
               const CliFixture& fixture) {
  const auto names = suite_names();
  if (suite != "all" && std::find(names.begin(), names.end(), suite) == names.end()) {
    err << "unknown suite '" << suite << "'\n";
    return kExitUsage;
  }
  CheckOptions options;
  options.negate_rhs = fixture.mutate_verify;
  const auto reports = run_suite(suite, seed, options);
  out << to_json(reports) << '\n';
  bool ok = true;
  for (const auto& r : reports) {
    if (!r.pass) {
      err << "FAILED " << r.lemma << ": " << r.detail << '\n';
      ok = false;
    }
  }
  return ok ? kExitOk : kExitCheckFailed;
}

int cmd_gradcheck(std::size_t points, std::uint64_t seed, std::ostream& out, std::ostream& err,
                  const CliFixture& fixture) {
  constexpr double kTolerance = 1e-5;
  const auto results = gradcheck_all(points, seed, fixture);
  nlohmann::json report = nlohmann::json::array();
  bool ok = true;
  for (const auto& r : results) {
    const bool pass = r.max_relative_error <= kTolerance;
    report.push_back({{"gradient", r.name},
                      {"points", r.points},
                      {"max_relative_error", r.max_relative_error},
                      {"pass", pass}});
    if (!pass) {
      err << "gradient " << r.name << " exceeds tolerance: " << r.max_relative_error << '\n';
      ok = false;
    }
  }
  out << report.dump(2) << '\n';
  return ok ? kExitOk : kExitCheckFailed;
}

}  // namespace

std::vector<GradcheckResult> gradcheck_all(std::size_t points, std::uint64_t seed, const CliFixture& fixture) {
  constexpr double kStep = 1e-5;
  Rng rng = derive_rng(seed, 0, 81);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<GradcheckResult> results;

  auto check_problem = [&](const std::string& name, const FiniteSumProblem& problem, double spread) {
    std::uniform_int_distribution<std::size_t> pick(1, problem.num_components());
    double worst = 0.0;
    for (std::size_t k = 0; k < points; ++k) {
      const ParamVector x = ParamVector::NullaryExpr(problem.dim(), [&] { return spread * normal(rng); });
      const std::size_t i = pick(rng);
      const ParamVector numeric = finite_difference_gradient(
          [&](const ParamVector& p) { return problem.component_value(i, p); }, x, kStep);
      worst = std::max(worst, relative_error(problem.component_gradient(i, x), numeric));
    }
    results.push_back({name, points, worst});
  };

  SyntheticSpec spec;
  spec.n = 20;
  spec.d = 6;
  spec.seed = seed;
  spec.kind = SyntheticKind::SeparableLogistic;
  check_problem("logistic", RegularizedErm(generate_synthetic(spec).data, LossKind::Logistic, 0.1), 1.0);
  spec.kind = SyntheticKind::Quadratic;
  check_problem("squared", RegularizedErm(generate_synthetic(spec).data, LossKind::Squared, 0.1), 1.0);

  {
    double worst = 0.0;
    for (std::size_t k = 0; k < points; ++k) {
      const ParamVector x = ParamVector::NullaryExpr(6, [&] { return normal(rng); });
      const ParamVector analytic =
          fixture.regularizer_gradient ? fixture.regularizer_gradient(x) : nonconvex_regularizer_grad(x);
      const ParamVector numeric = finite_difference_gradient(
          [](const ParamVector& p) { return nonconvex_regularizer(p); }, x, kStep);
      worst = std::max(worst, relative_error(analytic, numeric));
    }
    results.push_back({"regularizer", points, worst});
  }

  spec.kind = SyntheticKind::TwoCluster;
  spec.d = 5;
  spec.classes = 3;
  check_problem("mlp", MlpProblem(generate_synthetic(spec).data, {5, 6, 6, 3}), 0.5);
  return results;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const CliFixture& fixture) {
  CLI::App app{"Adaptive variance-reduced finite-sum optimization benchmarks", "adaspider"};
  app.require_subcommand(1);

  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "Run an experiment and emit convergence records");
  add_run_flags(*run, run_flags);

  RunFlags sweep_flags;
  std::string grid_text;
  auto* sweep = app.add_subcommand("sweep", "Sweep one optimizer's step scale over a grid");
  add_run_flags(*sweep, sweep_flags);
  sweep->add_option("--grid", grid_text, "Comma-separated scales (default 1e-3..1e3)");

  std::string suite = "all";
  std::uint64_t verify_seed = 0;
  auto* verify = app.add_subcommand("verify", "Check the analysis inequalities numerically");
  verify->add_option("--suite", suite, "all or one of: " + [] {
    std::string s;
    for (const auto& n : suite_names()) s += (s.empty() ? "" : ", ") + n;
    return s;
  }());
  verify->add_option("--seed", verify_seed, "Seed for the randomized checks");

  std::size_t points = 20;
  std::uint64_t grad_seed = 0;
  auto* gradcheck = app.add_subcommand("gradcheck", "Compare analytic gradients with central differences");
  gradcheck->add_option("--points", points, "Random points per gradient");
  gradcheck->add_option("--seed", grad_seed, "Seed for the random points");

  std::vector<std::string> argv_storage{"adaspider"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_storage) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (run->parsed()) return cmd_run(run_flags, out, err);
    if (sweep->parsed()) return cmd_sweep(sweep_flags, grid_text, out, err);
    if (verify->parsed()) return cmd_verify(suite, verify_seed, out, err, fixture);
    if (gradcheck->parsed()) return cmd_gradcheck(points, grad_seed, out, err, fixture);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace adaspider
