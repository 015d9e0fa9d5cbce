#include "adaspider/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

namespace adaspider {

namespace {

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

double parse_real(std::string_view token, std::size_t line) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size() || token.empty())
    throw ParseError(line, "unparseable number '" + std::string(token) + "'");
  return v;
}

std::size_t parse_index(std::string_view token, std::size_t line) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size() || token.empty())
    throw ParseError(line, "unparseable feature index '" + std::string(token) + "'");
  if (v == 0) throw ParseError(line, "feature indices are 1-based");
  return v;
}

}  // namespace

ParseError::ParseError(std::size_t line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

double Dataset::dot(std::size_t row, const ParamVector& x) const {
  double s = 0.0;
  for (const auto& f : rows[row]) {
    if (f.index <= static_cast<std::size_t>(x.size())) s += f.value * x[f.index - 1];
  }
  return s;
}

void Dataset::axpy(std::size_t row, double scale, ParamVector& out) const {
  for (const auto& f : rows[row]) {
    if (f.index <= static_cast<std::size_t>(out.size())) out[f.index - 1] += scale * f.value;
  }
}

ParamVector Dataset::dense_row(std::size_t row) const {
  ParamVector v = ParamVector::Zero(dim);
  axpy(row, 1.0, v);
  return v;
}

double Dataset::row_squared_norm(std::size_t row) const {
  double s = 0.0;
  for (const auto& f : rows[row]) s += f.value * f.value;
  return s;
}

void Dataset::validate() const {
  if (labels.size() != rows.size())
    throw std::invalid_argument("label count does not match row count");
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::size_t prev = 0;
    for (const auto& f : rows[r]) {
      if (f.index <= prev)
        throw std::invalid_argument("row " + std::to_string(r + 1) +
                                    ": feature indices must be strictly increasing and 1-based");
      if (f.index > dim)
        throw std::invalid_argument("row " + std::to_string(r + 1) + ": index exceeds dimension");
      prev = f.index;
    }
  }
}

Dataset parse_libsvm(std::istream& in) {
  Dataset data;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;

    std::vector<std::string_view> tokens;
    std::size_t pos = 0;
    while (pos < line.size()) {
      const auto start = line.find_first_not_of(" \t", pos);
      if (start == std::string_view::npos) break;
      auto stop = line.find_first_of(" \t", start);
      if (stop == std::string_view::npos) stop = line.size();
      tokens.push_back(line.substr(start, stop - start));
      pos = stop;
    }

    const double label = parse_real(tokens.front(), line_no);
    SparseRow row;
    row.reserve(tokens.size() - 1);
    for (std::size_t k = 1; k < tokens.size(); ++k) {
      const auto colon = tokens[k].find(':');
      if (colon == std::string_view::npos)
        throw ParseError(line_no, "malformed pair '" + std::string(tokens[k]) + "'");
      const std::size_t index = parse_index(tokens[k].substr(0, colon), line_no);
      const double value = parse_real(tokens[k].substr(colon + 1), line_no);
      if (!row.empty() && index <= row.back().index)
        throw ParseError(line_no, "feature indices must be strictly increasing");
      row.push_back({index, value});
      data.dim = std::max(data.dim, index);
    }
    data.rows.push_back(std::move(row));
    data.labels.push_back(label);
  }
  return data;
}

Dataset parse_libsvm_text(const std::string& text) {
  std::istringstream in(text);
  return parse_libsvm(in);
}

Dataset load_libsvm_file(const std::string& path) {
  if (path == "-") return parse_libsvm(std::cin);
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset '" + path + "'");
  return parse_libsvm(in);
}

void write_libsvm(const Dataset& data, std::ostream& out) {
  for (std::size_t r = 0; r < data.size(); ++r) {
    out << format_double(data.labels[r]);
    for (const auto& f : data.rows[r]) out << ' ' << f.index << ':' << format_double(f.value);
    out << '\n';
  }
}

Dataset to_binary_labels(Dataset data) {
  for (std::size_t r = 0; r < data.labels.size(); ++r) {
    double& b = data.labels[r];
    if (b == 0.0 || b == -1.0) {
      b = -1.0;
    } else if (b == 1.0) {
      b = 1.0;
    } else {
      throw ParseError(r + 1, "label " + format_double(b) + " is not a binary class label");
    }
  }
  return data;
}

Dataset with_dimension(Dataset data, std::size_t dim) {
  if (dim < data.dim)
    throw std::invalid_argument("dimension override " + std::to_string(dim) +
                                " is below the data dimension " + std::to_string(data.dim));
  data.dim = dim;
  return data;
}

Dataset scale_features(Dataset data) {
  std::vector<double> peak(data.dim + 1, 0.0);
  for (const auto& row : data.rows)
    for (const auto& f : row) peak[f.index] = std::max(peak[f.index], std::abs(f.value));
  for (auto& row : data.rows)
    for (auto& f : row)
      if (peak[f.index] > 0.0) f.value /= peak[f.index];
  return data;
}

SyntheticKind parse_synthetic_kind(const std::string& name) {
  if (name == "separable-logistic") return SyntheticKind::SeparableLogistic;
  if (name == "quadratic") return SyntheticKind::Quadratic;
  if (name == "two-cluster" || name == "two-cluster-classification") return SyntheticKind::TwoCluster;
  throw std::invalid_argument("unknown synthetic dataset kind '" + name + "'");
}

std::string to_string(SyntheticKind kind) {
  switch (kind) {
    case SyntheticKind::SeparableLogistic: return "separable-logistic";
    case SyntheticKind::Quadratic: return "quadratic";
    case SyntheticKind::TwoCluster: return "two-cluster";
  }
  return "?";
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n < 1 || spec.d < 1) throw std::invalid_argument("synthetic n and d must be >= 1");
  Rng rng = derive_rng(spec.seed, 0, static_cast<std::uint64_t>(spec.kind) + 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double feature_scale = 1.0 / std::sqrt(static_cast<double>(spec.d));

  SyntheticData out;
  Dataset& data = out.data;
  data.dim = spec.d;
  data.rows.reserve(spec.n);
  data.labels.reserve(spec.n);

  auto dense_to_row = [](const ParamVector& v) {
    SparseRow row;
    row.reserve(v.size());
    for (Eigen::Index j = 0; j < v.size(); ++j) row.push_back({static_cast<std::size_t>(j) + 1, v[j]});
    return row;
  };

  switch (spec.kind) {
    case SyntheticKind::SeparableLogistic:
    case SyntheticKind::Quadratic: {
      out.hidden = ParamVector::NullaryExpr(spec.d, [&] { return normal(rng); });
      for (std::size_t i = 0; i < spec.n; ++i) {
        ParamVector a = ParamVector::NullaryExpr(spec.d, [&] { return feature_scale * normal(rng); });
        const double margin = a.dot(out.hidden);
        double label;
        if (spec.kind == SyntheticKind::SeparableLogistic) {
          label = margin >= 0.0 ? 1.0 : -1.0;
        } else {
          label = margin + spec.noise * normal(rng);
        }
        data.rows.push_back(dense_to_row(a));
        data.labels.push_back(label);
      }
      break;
    }
    case SyntheticKind::TwoCluster: {
      if (spec.classes < 2) throw std::invalid_argument("cluster data needs at least two classes");
      std::vector<ParamVector> centers;
      for (std::size_t c = 0; c < spec.classes; ++c)
        centers.push_back(ParamVector::NullaryExpr(spec.d, [&] { return normal(rng); }));
      std::uniform_int_distribution<std::size_t> pick(0, spec.classes - 1);
      const double spread = 5.0 * spec.noise;
      for (std::size_t i = 0; i < spec.n; ++i) {
        const std::size_t c = pick(rng);
        ParamVector a = centers[c] + ParamVector::NullaryExpr(spec.d, [&] { return spread * normal(rng); });
        data.rows.push_back(dense_to_row(a));
        data.labels.push_back(static_cast<double>(c));
      }
      break;
    }
  }
  return out;
}

}  // namespace adaspider
