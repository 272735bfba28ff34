#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace smpca {

/// Discrete samples of one curve X_ij.
struct Curve {
  std::vector<double> times;
  std::vector<double> values;

  std::size_t size() const { return times.size(); }
  bool empty() const { return times.empty(); }
};

/// Ragged panel of noisy discrete observations: p subjects, J curves each.
class ObservationSet {
 public:
  ObservationSet() = default;
  ObservationSet(std::size_t p, std::size_t J);

  std::size_t subjects() const { return p_; }
  std::size_t curves() const { return J_; }

  Curve& curve(std::size_t i, std::size_t j) { return data_.at(i * J_ + j); }
  const Curve& curve(std::size_t i, std::size_t j) const { return data_.at(i * J_ + j); }

  /// Appends one observation to curve (i, j) (zero-based indices).
  void add(std::size_t i, std::size_t j, double t, double y);

  std::size_t count(std::size_t i, std::size_t j) const { return curve(i, j).size(); }
  std::size_t total_count() const;
  /// (sum N_ij) / (pJ).
  double mean_count() const;

  /// Restriction to curves [0, length) of every subject.
  ObservationSet prefix(std::size_t length) const;
  /// Panel holding only the listed subjects, in the given order.
  ObservationSet select_subjects(const std::vector<std::size_t>& subjects) const;

  const std::optional<std::vector<double>>& noise_variances() const { return noise_; }
  void set_noise_variances(std::vector<double> variances);

  bool operator==(const ObservationSet& other) const;

 private:
  std::size_t p_ = 0;
  std::size_t J_ = 0;
  std::vector<Curve> data_;
  std::optional<std::vector<double>> noise_;
};

struct ObservationIssue {
  enum class Kind { OutOfRange, NonFinite, EmptyCurve };
  Kind kind;
  std::size_t subject;
  std::size_t curve;
  std::string message;
};

struct ValidationReport {
  std::vector<ObservationIssue> issues;
  std::vector<double> subject_mean_count;
  double mean_count = 0.0;

  bool has_errors() const;
};

/// Diagnostics only; never throws.
ValidationReport validate_observations(const ObservationSet& obs);

/// Long-format CSV with header `subject,curve,time,value`; indices are 1-based.
ObservationSet read_observations_csv(std::istream& in);
ObservationSet read_observations_csv(const std::string& path);
void write_observations_csv(std::ostream& out, const ObservationSet& obs);
void write_observations_csv(const std::string& path, const ObservationSet& obs);

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);

}  // namespace smpca
