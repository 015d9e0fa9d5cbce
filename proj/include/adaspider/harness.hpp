#pragma once

#include "adaspider/core.hpp"
#include "adaspider/data.hpp"
#include "adaspider/optimizers.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace adaspider {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ProblemSpec {
  std::string loss = "logistic";  // logistic | squared | mlp
  std::optional<std::string> dataset_path;
  SyntheticSpec synthetic;
  double lambda = 0.1;
  bool scale_features = false;
  std::optional<std::size_t> dimension;  // upward override only
  std::vector<std::size_t> mlp_dims{20, 16, 16, 4};
  double c_init = 0.01;
};

/// One optimizer and its parameters. Unset values take the optimizer
/// defaults where one exists.
struct AlgorithmSpec {
  std::string name;  // adaspider | spider | spiderboost | svrg | sgd | adagrad_norm
  std::optional<double> beta0, g0, eta, b0, smoothness, epsilon;
  std::optional<std::size_t> period, batch, epoch_length;
};

struct ExperimentConfig {
  ProblemSpec problem;
  std::vector<AlgorithmSpec> algorithms;
  std::optional<std::size_t> steps;
  std::optional<double> epochs;  // oracle budget in full passes
  std::size_t repeats = 5;
  std::uint64_t seed = 0;
  std::optional<std::string> output_path;
  std::string format = "csv";
};

struct RecordRow {
  double epoch;
  std::uint64_t oracle_calls;
  double loss;
  double grad_norm;
  double step_size;
  bool operator==(const RecordRow&) const;
};

struct RunRecord {
  std::string algo;
  std::uint64_t seed;
  std::vector<RecordRow> rows;  // ordered by oracle calls

  /// A diverged run ends with a row whose gradient norm is not finite.
  bool diverged() const;
  double final_grad_norm() const;
  bool operator==(const RunRecord&) const = default;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
/// Throws ConfigError naming the offending field.
void validate(const ExperimentConfig& config);

std::unique_ptr<FiniteSumProblem> build_problem(const ProblemSpec& spec);
/// Zero for ERM problems, scaled Kaiming draw for the MLP.
ParamVector initial_point(const ProblemSpec& spec, const FiniteSumProblem& problem, std::uint64_t seed);

RunTrace run_algorithm(const AlgorithmSpec& algorithm, const FiniteSumProblem& problem,
                       const ParamVector& x0, std::size_t steps, Rng& rng, const RunOptions& options);

RunRecord to_record(const RunTrace& trace, const std::string& algo, std::uint64_t seed);

/// One record per (algorithm, repeat), ordered by algorithm then seed. Every
/// algorithm starts from the same x0 for a given seed.
std::vector<RunRecord> run_experiment(const ExperimentConfig& config);

/// {1e-3, 1e-2, ..., 1e3}.
std::vector<double> default_step_grid();

struct SweepResult {
  double best_value;
  std::vector<double> grid;
  std::vector<double> scores;  // mean final gradient norm per grid value
  std::vector<std::vector<RunRecord>> records;
};

/// Runs `algorithm` (an index into config.algorithms) at every grid value of
/// its tunable scale and picks the lowest mean final gradient norm; diverged
/// runs score +inf, ties keep the earlier value. The scale is eta for sgd,
/// adagrad_norm and svrg, the step for spiderboost, 1/L for spider and
/// 1/beta0 for adaspider.
SweepResult sweep_step_size(const ExperimentConfig& config, std::size_t algorithm,
                            const std::vector<double>& grid);

void apply_scale(AlgorithmSpec& algorithm, double value);

enum class RecordFormat { Csv, Json };
RecordFormat parse_record_format(const std::string& name);

void write_csv(const std::vector<RunRecord>& records, std::ostream& out);
void write_json(const std::vector<RunRecord>& records, std::ostream& out);
std::vector<RunRecord> read_csv(std::istream& in);
std::vector<RunRecord> read_json(std::istream& in);

/// Writes to `path`, or standard output when path is "-".
void emit_records(const std::vector<RunRecord>& records, RecordFormat format, const std::string& path);

}  // namespace adaspider
