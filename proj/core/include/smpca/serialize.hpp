#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "smpca/pipeline.hpp"
#include "smpca/simgen.hpp"
#include "smpca/spectral.hpp"

namespace smpca {

inline constexpr const char* kModelFormat = "smpca-model/1.0";
inline constexpr const char* kTruthFormat = "smpca-truth/1.0";

/// Single-file container: a format line, a little-endian uint64 manifest length, a JSON
/// manifest, then raw little-endian arrays (f64, or c128 as interleaved re/im), row-major.
class ArtifactWriter {
 public:
  explicit ArtifactWriter(std::string format);

  nlohmann::json& manifest() { return manifest_; }
  void add(const std::string& name, const Eigen::MatrixXd& values);
  void add(const std::string& name, const Eigen::MatrixXcd& values);
  void add(const std::string& name, const std::vector<double>& values);
  void write(const std::string& path) const;
  std::string bytes() const;

 private:
  std::string format_;
  nlohmann::json manifest_;
  nlohmann::json arrays_ = nlohmann::json::array();
  std::string payload_;
};

class ArtifactReader {
 public:
  /// Throws ModelError if the file is missing, truncated, of another kind or of an incompatible major version.
  ArtifactReader(const std::string& path, const std::string& expected_format);
  static ArtifactReader from_bytes(const std::string& bytes, const std::string& expected_format);

  const nlohmann::json& manifest() const { return manifest_; }
  bool has(const std::string& name) const;
  Eigen::MatrixXd real(const std::string& name) const;
  Eigen::MatrixXcd complex(const std::string& name) const;
  std::vector<double> vector(const std::string& name) const;

 private:
  ArtifactReader() = default;
  void parse(const std::string& bytes, const std::string& expected_format);
  const nlohmann::json& entry(const std::string& name, const std::string& dtype) const;

  nlohmann::json manifest_;
  std::string payload_;
};

/// Checks "name/major.minor" against the expected format: same name and major version.
bool compatible_format(const std::string& found, const std::string& expected);

void save_model(const std::string& path, const FittedModel& model, const nlohmann::json& config = {},
                const SpectralField* marginal = nullptr);
std::string model_bytes(const FittedModel& model, const nlohmann::json& config = {},
                        const SpectralField* marginal = nullptr);
FittedModel load_model(const std::string& path);
FittedModel model_from_bytes(const std::string& bytes);
/// Stored marginal spectral field, if the artifact carries one.
std::optional<SpectralField> load_spectral(const std::string& path);

void save_truth(const std::string& path, const TruthPanel& truth);
/// Restores config, precision, scores, energies and noise variances (observations are left empty).
TruthPanel load_truth(const std::string& path);

nlohmann::json sim_config_to_json(const SimConfig& config);
SimConfig sim_config_from_json(const nlohmann::json& j);

}  // namespace smpca
