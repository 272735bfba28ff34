#include "smpca/observations.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <utility>

#include "smpca/error.hpp"

namespace smpca {

ObservationSet::ObservationSet(std::size_t p, std::size_t J) : p_(p), J_(J), data_(p * J) {}

void ObservationSet::add(std::size_t i, std::size_t j, double t, double y) {
  auto& c = curve(i, j);
  c.times.push_back(t);
  c.values.push_back(y);
}

std::size_t ObservationSet::total_count() const {
  std::size_t n = 0;
  for (const auto& c : data_) n += c.size();
  return n;
}

double ObservationSet::mean_count() const {
  if (p_ == 0 || J_ == 0) return 0.0;
  return static_cast<double>(total_count()) / static_cast<double>(p_ * J_);
}

ObservationSet ObservationSet::prefix(std::size_t length) const {
  if (length > J_) throw ArgumentError("prefix longer than the panel");
  ObservationSet out(p_, length);
  for (std::size_t i = 0; i < p_; ++i)
    for (std::size_t j = 0; j < length; ++j) out.curve(i, j) = curve(i, j);
  out.noise_ = noise_;
  return out;
}

ObservationSet ObservationSet::select_subjects(const std::vector<std::size_t>& subjects) const {
  ObservationSet out(subjects.size(), J_);
  for (std::size_t a = 0; a < subjects.size(); ++a)
    for (std::size_t j = 0; j < J_; ++j) out.curve(a, j) = curve(subjects[a], j);
  if (noise_) {
    std::vector<double> v;
    for (auto i : subjects) v.push_back((*noise_).at(i));
    out.noise_ = std::move(v);
  }
  return out;
}

void ObservationSet::set_noise_variances(std::vector<double> variances) {
  if (variances.size() != p_) throw DimensionError("one noise variance per subject required");
  for (double v : variances)
    if (!(v > 0.0)) throw ArgumentError("noise variances must be positive");
  noise_ = std::move(variances);
}

bool ObservationSet::operator==(const ObservationSet& other) const {
  if (p_ != other.p_ || J_ != other.J_) return false;
  for (std::size_t n = 0; n < data_.size(); ++n)
    if (data_[n].times != other.data_[n].times || data_[n].values != other.data_[n].values) return false;
  return true;
}

bool ValidationReport::has_errors() const {
  for (const auto& issue : issues)
    if (issue.kind != ObservationIssue::Kind::EmptyCurve) return true;
  return false;
}

ValidationReport validate_observations(const ObservationSet& obs) {
  ValidationReport report;
  const std::size_t p = obs.subjects();
  const std::size_t J = obs.curves();
  report.subject_mean_count.assign(p, 0.0);
  for (std::size_t i = 0; i < p; ++i) {
    std::size_t n = 0;
    for (std::size_t j = 0; j < J; ++j) {
      const auto& c = obs.curve(i, j);
      n += c.size();
      if (c.empty()) {
        report.issues.push_back({ObservationIssue::Kind::EmptyCurve, i, j,
                                 "subject " + std::to_string(i + 1) + " curve " + std::to_string(j + 1) +
                                     " has no observations"});
      }
      for (std::size_t z = 0; z < c.size(); ++z) {
        if (!std::isfinite(c.times[z]) || !std::isfinite(c.values[z])) {
          report.issues.push_back({ObservationIssue::Kind::NonFinite, i, j,
                                   "non-finite entry at subject " + std::to_string(i + 1) + " curve " +
                                       std::to_string(j + 1)});
        } else if (c.times[z] < 0.0 || c.times[z] > 1.0) {
          report.issues.push_back({ObservationIssue::Kind::OutOfRange, i, j,
                                   "time " + format_double(c.times[z]) + " outside [0,1] at subject " +
                                       std::to_string(i + 1) + " curve " + std::to_string(j + 1)});
        }
      }
    }
    report.subject_mean_count[i] = J ? static_cast<double>(n) / static_cast<double>(J) : 0.0;
  }
  report.mean_count = obs.mean_count();
  return report;
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    while (!field.empty() && (field.back() == ' ' || field.back() == '\r')) field.pop_back();
    std::size_t b = 0;
    while (b < field.size() && field[b] == ' ') ++b;
    out.push_back(field.substr(b));
  }
  return out;
}

double parse_double(const std::string& s, std::size_t line_no) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end)
    throw InsufficientDataError("line " + std::to_string(line_no) + ": cannot parse number '" + s + "'");
  return v;
}

std::size_t parse_index(const std::string& s, std::size_t line_no) {
  long long v = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || v < 1)
    throw InsufficientDataError("line " + std::to_string(line_no) + ": invalid 1-based index '" + s + "'");
  return static_cast<std::size_t>(v);
}

}  // namespace

ObservationSet read_observations_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InsufficientDataError("observation CSV is empty");
  const auto header = split_fields(line);
  if (header.size() != 4 || header[0] != "subject" || header[1] != "curve" || header[2] != "time" ||
      header[3] != "value")
    throw InsufficientDataError("observation CSV header must be 'subject,curve,time,value'");

  struct Row {
    std::size_t i, j;
    double t, y;
  };
  std::vector<Row> rows;
  std::size_t p = 0, J = 0, line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split_fields(line);
    if (f.size() != 4)
      throw InsufficientDataError("line " + std::to_string(line_no) + ": expected 4 fields");
    Row r{parse_index(f[0], line_no), parse_index(f[1], line_no), parse_double(f[2], line_no),
          parse_double(f[3], line_no)};
    p = std::max(p, r.i);
    J = std::max(J, r.j);
    rows.push_back(r);
  }
  if (rows.empty()) throw InsufficientDataError("observation CSV has no data rows");
  ObservationSet obs(p, J);
  for (const auto& r : rows) obs.add(r.i - 1, r.j - 1, r.t, r.y);
  return obs;
}

ObservationSet read_observations_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InsufficientDataError("cannot open observation file " + path);
  return read_observations_csv(in);
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) return std::to_string(value);
  return std::string(buf, ptr);
}

void write_observations_csv(std::ostream& out, const ObservationSet& obs) {
  out << "subject,curve,time,value\n";
  for (std::size_t i = 0; i < obs.subjects(); ++i)
    for (std::size_t j = 0; j < obs.curves(); ++j) {
      const auto& c = obs.curve(i, j);
      for (std::size_t z = 0; z < c.size(); ++z)
        out << (i + 1) << ',' << (j + 1) << ',' << format_double(c.times[z]) << ','
            << format_double(c.values[z]) << '\n';
    }
}

void write_observations_csv(const std::string& path, const ObservationSet& obs) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot write " + path);
  write_observations_csv(out, obs);
}

}  // namespace smpca
