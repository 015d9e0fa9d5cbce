#pragma once

#include "adaspider/core.hpp"

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace adaspider {

struct Feature {
  std::size_t index;  // 1-based
  double value;
  bool operator==(const Feature&) const = default;
};

using SparseRow = std::vector<Feature>;

/// Sparse rows (a_i) with real labels (b_i). Immutable once built.
struct Dataset {
  std::vector<SparseRow> rows;
  std::vector<double> labels;
  std::size_t dim = 0;

  std::size_t size() const { return rows.size(); }

  /// a_i^T x for a 0-based row; features beyond x.size() are ignored.
  double dot(std::size_t row, const ParamVector& x) const;
  /// out += scale * a_i.
  void axpy(std::size_t row, double scale, ParamVector& out) const;
  ParamVector dense_row(std::size_t row) const;
  double row_squared_norm(std::size_t row) const;

  /// Throws std::invalid_argument if an invariant is broken.
  void validate() const;

  bool operator==(const Dataset&) const = default;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Reads "label idx:val idx:val ..." lines. Blank lines and lines starting
/// with '#' are skipped; CR before LF is ignored. Labels are kept as parsed.
Dataset parse_libsvm(std::istream& in);
Dataset parse_libsvm_text(const std::string& text);
Dataset load_libsvm_file(const std::string& path);

/// Writes rows back in LibSVM form with round-trip number formatting.
void write_libsvm(const Dataset& data, std::ostream& out);

/// Maps {0, -1} -> -1 and {1, +1} -> +1; any other label is a ParseError
/// naming its (1-based) row.
Dataset to_binary_labels(Dataset data);

/// Raises the feature dimension; lowering it is an error.
Dataset with_dimension(Dataset data, std::size_t dim);

/// Divides every feature by its largest magnitude so values land in [-1, 1].
Dataset scale_features(Dataset data);

enum class SyntheticKind { SeparableLogistic, Quadratic, TwoCluster };

SyntheticKind parse_synthetic_kind(const std::string& name);
std::string to_string(SyntheticKind kind);

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::SeparableLogistic;
  std::size_t n = 500;
  std::size_t d = 20;
  std::uint64_t seed = 1;
  std::size_t classes = 4;     // TwoCluster only
  double noise = 0.1;          // Quadratic label noise / cluster spread scale
};

struct SyntheticData {
  Dataset data;
  ParamVector hidden;  // generating weights; empty for TwoCluster
};

/// Deterministic in the seed. Features are dense N(0, 1/d) draws for the
/// regression kinds and Gaussian blobs around per-class centers otherwise.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

}  // namespace adaspider
