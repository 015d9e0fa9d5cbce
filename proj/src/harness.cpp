#include "adaspider/harness.hpp"

#include "adaspider/problems.hpp"

#include "json.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

namespace adaspider {

namespace {

using nlohmann::json;

constexpr const char* kCsvHeader = "algo,seed,epoch,oracle_calls,loss,grad_norm,step_size";

const std::vector<std::string>& known_algorithms() {
  static const std::vector<std::string> names{"adaspider", "spider", "spiderboost",
                                              "svrg", "sgd", "adagrad_norm"};
  return names;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw std::runtime_error("bad number '" + s + "'");
  return v;
}

bool same_double(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

json number_json(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

double number_from_json(const json& j) {
  if (j.is_string()) return parse_double(j.get<std::string>());
  return j.get<double>();
}

template <typename T>
std::optional<T> optional_field(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

void reject_unknown(const json& j, const std::vector<std::string>& allowed, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("unknown field '" + key + "' in " + where);
  }
}

}  // namespace

bool RecordRow::operator==(const RecordRow& o) const {
  return same_double(epoch, o.epoch) && oracle_calls == o.oracle_calls && same_double(loss, o.loss) &&
         same_double(grad_norm, o.grad_norm) && same_double(step_size, o.step_size);
}

bool RunRecord::diverged() const { return !rows.empty() && !std::isfinite(rows.back().grad_norm); }

double RunRecord::final_grad_norm() const {
  if (rows.empty() || diverged()) return std::numeric_limits<double>::infinity();
  return rows.back().grad_norm;
}

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig c;
  try {
    reject_unknown(j, {"problem", "algorithms", "steps", "epochs", "repeats", "seed", "output"}, "config");
    if (j.contains("problem")) {
      const json& p = j.at("problem");
      reject_unknown(p, {"loss", "dataset", "synthetic", "lambda", "scale_features", "dimension", "mlp"},
                     "problem");
      c.problem.loss = p.value("loss", c.problem.loss);
      c.problem.dataset_path = optional_field<std::string>(p, "dataset");
      c.problem.lambda = p.value("lambda", c.problem.lambda);
      c.problem.scale_features = p.value("scale_features", c.problem.scale_features);
      c.problem.dimension = optional_field<std::size_t>(p, "dimension");
      if (p.contains("synthetic")) {
        const json& s = p.at("synthetic");
        reject_unknown(s, {"kind", "n", "d", "seed", "classes", "noise"}, "problem.synthetic");
        if (s.contains("kind")) c.problem.synthetic.kind = parse_synthetic_kind(s.at("kind").get<std::string>());
        c.problem.synthetic.n = s.value("n", c.problem.synthetic.n);
        c.problem.synthetic.d = s.value("d", c.problem.synthetic.d);
        c.problem.synthetic.seed = s.value("seed", c.problem.synthetic.seed);
        c.problem.synthetic.classes = s.value("classes", c.problem.synthetic.classes);
        c.problem.synthetic.noise = s.value("noise", c.problem.synthetic.noise);
      }
      if (p.contains("mlp")) {
        const json& m = p.at("mlp");
        reject_unknown(m, {"dims", "c_init"}, "problem.mlp");
        c.problem.mlp_dims = m.value("dims", c.problem.mlp_dims);
        c.problem.c_init = m.value("c_init", c.problem.c_init);
      }
    }
    if (j.contains("algorithms")) {
      for (const json& a : j.at("algorithms")) {
        reject_unknown(a, {"name", "beta0", "g0", "eta", "b0", "smoothness", "epsilon", "period", "batch",
                           "epoch_length"},
                       "algorithm");
        AlgorithmSpec spec;
        spec.name = a.at("name").get<std::string>();
        spec.beta0 = optional_field<double>(a, "beta0");
        spec.g0 = optional_field<double>(a, "g0");
        spec.eta = optional_field<double>(a, "eta");
        spec.b0 = optional_field<double>(a, "b0");
        spec.smoothness = optional_field<double>(a, "smoothness");
        spec.epsilon = optional_field<double>(a, "epsilon");
        spec.period = optional_field<std::size_t>(a, "period");
        spec.batch = optional_field<std::size_t>(a, "batch");
        spec.epoch_length = optional_field<std::size_t>(a, "epoch_length");
        c.algorithms.push_back(std::move(spec));
      }
    }
    c.steps = optional_field<std::size_t>(j, "steps");
    c.epochs = optional_field<double>(j, "epochs");
    c.repeats = j.value("repeats", c.repeats);
    c.seed = j.value("seed", c.seed);
    if (j.contains("output")) {
      const json& o = j.at("output");
      reject_unknown(o, {"path", "format"}, "output");
      c.output_path = optional_field<std::string>(o, "path");
      c.format = o.value("format", c.format);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config field: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

void validate(const ExperimentConfig& c) {
  if (c.repeats < 1) throw ConfigError("repeats must be at least 1");
  if (c.algorithms.empty()) throw ConfigError("algorithms must name at least one optimizer");
  if (!c.steps && !c.epochs) throw ConfigError("either steps or epochs must be set");
  if (c.steps && *c.steps == 0) throw ConfigError("steps must be at least 1");
  if (c.epochs && !(*c.epochs > 0.0)) throw ConfigError("epochs must be positive");
  if (c.problem.loss != "logistic" && c.problem.loss != "squared" && c.problem.loss != "mlp")
    throw ConfigError("problem.loss must be logistic, squared or mlp");
  if (!(c.problem.lambda >= 0.0)) throw ConfigError("problem.lambda must be non-negative");
  if (c.problem.loss == "mlp" && !(c.problem.c_init > 0.0)) throw ConfigError("problem.mlp.c_init must be positive");
  parse_record_format(c.format);

  auto positive = [](const std::optional<double>& v, const std::string& what) {
    if (v && !(*v > 0.0)) throw ConfigError(what + " must be positive");
  };
  for (const auto& a : c.algorithms) {
    const auto& names = known_algorithms();
    if (std::find(names.begin(), names.end(), a.name) == names.end())
      throw ConfigError("unknown algorithm '" + a.name + "'");
    const std::string where = "algorithm " + a.name + ": ";
    positive(a.beta0, where + "beta0");
    positive(a.g0, where + "g0");
    positive(a.eta, where + "eta");
    positive(a.b0, where + "b0");
    positive(a.smoothness, where + "smoothness");
    positive(a.epsilon, where + "epsilon");
    if (a.name == "spider" && (!a.epsilon || !a.smoothness))
      throw ConfigError(where + "spider needs epsilon and smoothness");
    if (a.name == "spiderboost" && !a.smoothness && !a.eta)
      throw ConfigError(where + "spiderboost needs smoothness or eta");
    if (a.name == "svrg" && !a.smoothness && !a.eta) throw ConfigError(where + "svrg needs smoothness or eta");
  }
}

std::unique_ptr<FiniteSumProblem> build_problem(const ProblemSpec& spec) {
  Dataset data;
  if (spec.dataset_path) {
    data = load_libsvm_file(*spec.dataset_path);
  } else {
    SyntheticSpec synthetic = spec.synthetic;
    if (spec.loss == "mlp") synthetic.kind = SyntheticKind::TwoCluster;
    data = generate_synthetic(synthetic).data;
  }
  if (spec.dimension) data = with_dimension(std::move(data), *spec.dimension);
  if (spec.scale_features) data = scale_features(std::move(data));
  if (spec.loss == "mlp") return std::make_unique<MlpProblem>(data, spec.mlp_dims);
  const LossKind loss = parse_loss_kind(spec.loss);
  if (loss == LossKind::Logistic) data = to_binary_labels(std::move(data));
  return std::make_unique<RegularizedErm>(std::move(data), loss, spec.lambda);
}

ParamVector initial_point(const ProblemSpec& spec, const FiniteSumProblem& problem, std::uint64_t seed) {
  if (spec.loss == "mlp") {
    Rng rng = derive_rng(seed, 0, 101);
    return kaiming_uniform_scaled_init(spec.mlp_dims, spec.c_init, rng).params;
  }
  return ParamVector::Zero(static_cast<Eigen::Index>(problem.dim()));
}

RunTrace run_algorithm(const AlgorithmSpec& a, const FiniteSumProblem& problem, const ParamVector& x0,
                       std::size_t steps, Rng& rng, const RunOptions& options) {
  if (a.name == "adaspider") {
    AdaSpiderConfig c;
    c.beta0 = a.beta0.value_or(c.beta0);
    c.g0 = a.g0.value_or(c.g0);
    c.period = a.period.value_or(0);
    c.batch = a.batch.value_or(1);
    c.steps = steps;
    return adaspider_run(problem, x0, c, rng, options);
  }
  if (a.name == "spider") {
    SpiderConfig c;
    c.epsilon = a.epsilon.value_or(c.epsilon);
    c.smoothness = a.smoothness.value_or(c.smoothness);
    c.period = a.period.value_or(0);
    c.batch = a.batch.value_or(1);
    c.steps = steps;
    return spider_run(problem, x0, c, rng, options);
  }
  if (a.name == "spiderboost") {
    SpiderBoostConfig c;
    c.smoothness = a.smoothness.value_or(a.eta ? 1.0 / *a.eta : c.smoothness);
    c.step_size = a.eta;
    c.period = a.period.value_or(0);
    c.batch = a.batch.value_or(0);
    c.steps = steps;
    return spiderboost_run(problem, x0, c, rng, options);
  }
  if (a.name == "svrg") {
    SvrgConfig c;
    // Given only L, use the same 1/L step as spiderboost.
    c.eta = a.eta.value_or(a.smoothness ? 1.0 / *a.smoothness : c.eta);
    c.epoch_length = a.epoch_length.value_or(0);
    c.steps = steps;
    return svrg_run(problem, x0, c, rng, options);
  }
  if (a.name == "sgd") {
    SgdConfig c;
    c.eta = a.eta.value_or(c.eta);
    c.steps = steps;
    return sgd_run(problem, x0, c, rng, options);
  }
  if (a.name == "adagrad_norm") {
    AdaGradNormConfig c;
    c.eta = a.eta.value_or(c.eta);
    c.b0 = a.b0.value_or(c.b0);
    c.steps = steps;
    return adagrad_norm_run(problem, x0, c, rng, options);
  }
  throw ConfigError("unknown algorithm '" + a.name + "'");
}

RunRecord to_record(const RunTrace& trace, const std::string& algo, std::uint64_t seed) {
  RunRecord record{algo, seed, {}};
  for (const auto& p : trace.passes)
    record.rows.push_back({p.epoch, p.oracle_calls, p.loss, p.grad_norm, p.step_size});
  if (trace.diverged) {
    const std::uint64_t calls = trace.oracle_calls();
    const double step = trace.steps.empty() ? 0.0 : trace.steps.back().step_size;
    record.rows.push_back({static_cast<double>(calls) / static_cast<double>(trace.num_components), calls,
                           std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::infinity(),
                           step});
  }
  return record;
}

std::vector<RunRecord> run_experiment(const ExperimentConfig& config) {
  validate(config);
  const auto problem = build_problem(config.problem);
  const std::size_t n = problem->num_components();

  RunOptions options;
  options.keep_iterates = false;
  std::size_t steps = config.steps.value_or(0);
  if (config.epochs) {
    const auto budget = static_cast<std::uint64_t>(std::ceil(*config.epochs * static_cast<double>(n)));
    options.oracle_budget = budget;
    steps = config.steps ? std::min<std::size_t>(*config.steps, budget) : budget;
  }

  std::vector<ParamVector> starts;
  for (std::size_t r = 0; r < config.repeats; ++r)
    starts.push_back(initial_point(config.problem, *problem, config.seed + r));

  std::vector<RunRecord> records;
  for (std::size_t a = 0; a < config.algorithms.size(); ++a) {
    for (std::size_t r = 0; r < config.repeats; ++r) {
      const std::uint64_t seed = config.seed + r;
      Rng rng = derive_rng(seed, a + 1, 102);
      const RunTrace trace = run_algorithm(config.algorithms[a], *problem, starts[r], steps, rng, options);
      records.push_back(to_record(trace, config.algorithms[a].name, seed));
    }
  }
  return records;
}

std::vector<double> default_step_grid() { return {1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3}; }

void apply_scale(AlgorithmSpec& a, double value) {
  if (!(value > 0.0)) throw ConfigError("sweep values must be positive");
  if (a.name == "sgd" || a.name == "adagrad_norm" || a.name == "svrg" || a.name == "spiderboost") {
    a.eta = value;
  } else if (a.name == "spider") {
    a.smoothness = 1.0 / value;
  } else if (a.name == "adaspider") {
    a.beta0 = 1.0 / value;
  } else {
    throw ConfigError("algorithm '" + a.name + "' has no tunable scale");
  }
}

SweepResult sweep_step_size(const ExperimentConfig& config, std::size_t algorithm,
                            const std::vector<double>& grid) {
  if (grid.empty()) throw ConfigError("sweep grid is empty");
  if (algorithm >= config.algorithms.size()) throw ConfigError("sweep algorithm index out of range");
  SweepResult result{grid.front(), grid, {}, {}};
  double best = std::numeric_limits<double>::infinity();
  bool have_best = false;
  for (double value : grid) {
    ExperimentConfig c = config;
    c.algorithms = {config.algorithms[algorithm]};
    apply_scale(c.algorithms.front(), value);
    auto records = run_experiment(c);
    double score = 0.0;
    for (const auto& r : records) score += r.final_grad_norm();
    score /= static_cast<double>(records.size());
    if (std::isnan(score)) score = std::numeric_limits<double>::infinity();
    if (!have_best || score < best) {
      best = score;
      result.best_value = value;
      have_best = true;
    }
    result.scores.push_back(score);
    result.records.push_back(std::move(records));
  }
  return result;
}

RecordFormat parse_record_format(const std::string& name) {
  if (name == "csv") return RecordFormat::Csv;
  if (name == "json") return RecordFormat::Json;
  throw ConfigError("output format must be csv or json, got '" + name + "'");
}

void write_csv(const std::vector<RunRecord>& records, std::ostream& out) {
  out << kCsvHeader << '\n';
  for (const auto& r : records)
    for (const auto& row : r.rows)
      out << r.algo << ',' << r.seed << ',' << format_double(row.epoch) << ',' << row.oracle_calls << ','
          << format_double(row.loss) << ',' << format_double(row.grad_norm) << ','
          << format_double(row.step_size) << '\n';
}

void write_json(const std::vector<RunRecord>& records, std::ostream& out) {
  json arr = json::array();
  for (const auto& r : records) {
    for (const auto& row : r.rows) {
      arr.push_back({{"algo", r.algo},
                     {"seed", r.seed},
                     {"epoch", number_json(row.epoch)},
                     {"oracle_calls", row.oracle_calls},
                     {"loss", number_json(row.loss)},
                     {"grad_norm", number_json(row.grad_norm)},
                     {"step_size", number_json(row.step_size)}});
    }
  }
  out << arr.dump(1) << '\n';
}

namespace {

void append_row(std::vector<RunRecord>& records, const std::string& algo, std::uint64_t seed,
                const RecordRow& row) {
  if (records.empty() || records.back().algo != algo || records.back().seed != seed)
    records.push_back({algo, seed, {}});
  records.back().rows.push_back(row);
}

}  // namespace

std::vector<RunRecord> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty record file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) throw std::runtime_error("unexpected CSV header '" + line + "'");
  std::vector<RunRecord> records;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 7) throw std::runtime_error("CSV row needs 7 columns: '" + line + "'");
    const RecordRow row{parse_double(cells[2]), std::stoull(cells[3]), parse_double(cells[4]),
                        parse_double(cells[5]), parse_double(cells[6])};
    append_row(records, cells[0], std::stoull(cells[1]), row);
  }
  return records;
}

std::vector<RunRecord> read_json(std::istream& in) {
  const json arr = json::parse(in);
  std::vector<RunRecord> records;
  for (const json& j : arr) {
    const RecordRow row{number_from_json(j.at("epoch")), j.at("oracle_calls").get<std::uint64_t>(),
                        number_from_json(j.at("loss")), number_from_json(j.at("grad_norm")),
                        number_from_json(j.at("step_size"))};
    append_row(records, j.at("algo").get<std::string>(), j.at("seed").get<std::uint64_t>(), row);
  }
  return records;
}

void emit_records(const std::vector<RunRecord>& records, RecordFormat format, const std::string& path) {
  if (records.empty()) throw std::invalid_argument("no records to emit");
  auto write = [&](std::ostream& out) {
    if (format == RecordFormat::Csv) {
      write_csv(records, out);
    } else {
      write_json(records, out);
    }
  };
  if (path == "-") {
    write(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write records to '" + path + "'");
  write(out);
  if (!out) throw std::runtime_error("failed while writing records to '" + path + "'");
}

}  // namespace adaspider
