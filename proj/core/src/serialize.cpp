#include "smpca/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "smpca/error.hpp"

namespace smpca {

namespace {

static_assert(std::endian::native == std::endian::little, "artifact I/O assumes a little-endian host");

void append_doubles(std::string& out, const double* data, std::size_t count) {
  const std::size_t before = out.size();
  out.resize(before + count * sizeof(double));
  std::memcpy(out.data() + before, data, count * sizeof(double));
}

std::pair<std::string, int> split_format(const std::string& format) {
  const auto slash = format.find('/');
  if (slash == std::string::npos) return {format, -1};
  try {
    return {format.substr(0, slash), std::stoi(format.substr(slash + 1))};
  } catch (const std::exception&) {
    return {format.substr(0, slash), -1};
  }
}

Eigen::MatrixXd row(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::MatrixXd>(v.data(), 1, static_cast<Eigen::Index>(v.size()));
}

std::string group_key(std::size_t g, const std::string& what) { return "group" + std::to_string(g) + "/" + what; }

}  // namespace

bool compatible_format(const std::string& found, const std::string& expected) {
  const auto [fname, fmajor] = split_format(found);
  const auto [ename, emajor] = split_format(expected);
  return fname == ename && fmajor == emajor && fmajor >= 0;
}

ArtifactWriter::ArtifactWriter(std::string format) : format_(std::move(format)), manifest_(nlohmann::json::object()) {}

void ArtifactWriter::add(const std::string& name, const Eigen::MatrixXd& values) {
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = values;
  arrays_.push_back({{"name", name}, {"dtype", "f64"}, {"shape", {values.rows(), values.cols()}},
                     {"offset", payload_.size()}});
  append_doubles(payload_, rm.data(), static_cast<std::size_t>(rm.size()));
}

void ArtifactWriter::add(const std::string& name, const Eigen::MatrixXcd& values) {
  const Eigen::Matrix<cdouble, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = values;
  arrays_.push_back({{"name", name}, {"dtype", "c128"}, {"shape", {values.rows(), values.cols()}},
                     {"offset", payload_.size()}});
  append_doubles(payload_, reinterpret_cast<const double*>(rm.data()), 2 * static_cast<std::size_t>(rm.size()));
}

void ArtifactWriter::add(const std::string& name, const std::vector<double>& values) {
  arrays_.push_back({{"name", name}, {"dtype", "f64"}, {"shape", {values.size()}}, {"offset", payload_.size()}});
  append_doubles(payload_, values.data(), values.size());
}

std::string ArtifactWriter::bytes() const {
  nlohmann::json full = manifest_;
  full["format"] = format_;
  full["arrays"] = arrays_;
  full["payload_bytes"] = payload_.size();
  const std::string text = full.dump();
  std::string out = format_ + "\n";
  const std::uint64_t length = text.size();
  out.append(reinterpret_cast<const char*>(&length), sizeof(length));
  out += text;
  out += payload_;
  return out;
}

void ArtifactWriter::write(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ModelError("cannot open '" + path + "' for writing");
  const std::string data = bytes();
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw ModelError("failed writing '" + path + "'");
}

ArtifactReader::ArtifactReader(const std::string& path, const std::string& expected_format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError("cannot open artifact '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  parse(buffer.str(), expected_format);
}

ArtifactReader ArtifactReader::from_bytes(const std::string& bytes, const std::string& expected_format) {
  ArtifactReader r;
  r.parse(bytes, expected_format);
  return r;
}

void ArtifactReader::parse(const std::string& bytes, const std::string& expected_format) {
  const auto newline = bytes.find('\n');
  if (newline == std::string::npos) throw ModelError("artifact has no format line");
  const std::string format = bytes.substr(0, newline);
  if (!compatible_format(format, expected_format))
    throw ModelError("artifact format '" + format + "' is not compatible with '" + expected_format + "'");
  std::size_t pos = newline + 1;
  std::uint64_t length = 0;
  if (bytes.size() < pos + sizeof(length)) throw ModelError("artifact truncated before the manifest");
  std::memcpy(&length, bytes.data() + pos, sizeof(length));
  pos += sizeof(length);
  if (bytes.size() < pos + length) throw ModelError("artifact truncated inside the manifest");
  try {
    manifest_ = nlohmann::json::parse(bytes.substr(pos, length));
  } catch (const nlohmann::json::exception& e) {
    throw ModelError(std::string("artifact manifest is not valid JSON: ") + e.what());
  }
  pos += length;
  payload_ = bytes.substr(pos);
  if (payload_.size() != manifest_.value("payload_bytes", std::size_t{0})) throw ModelError("artifact payload truncated");
}

bool ArtifactReader::has(const std::string& name) const {
  for (const auto& a : manifest_.at("arrays"))
    if (a.at("name") == name) return true;
  return false;
}

const nlohmann::json& ArtifactReader::entry(const std::string& name, const std::string& dtype) const {
  for (const auto& a : manifest_.at("arrays"))
    if (a.at("name") == name) {
      if (a.at("dtype") != dtype) throw ModelError("array '" + name + "' has dtype " + a.at("dtype").get<std::string>());
      return a;
    }
  throw ModelError("artifact has no array '" + name + "'");
}

Eigen::MatrixXd ArtifactReader::real(const std::string& name) const {
  const auto& e = entry(name, "f64");
  const auto& shape = e.at("shape");
  const Eigen::Index rows = shape.size() == 1 ? 1 : shape[0].get<Eigen::Index>();
  const Eigen::Index cols = shape.size() == 1 ? shape[0].get<Eigen::Index>() : shape[1].get<Eigen::Index>();
  const auto offset = e.at("offset").get<std::size_t>();
  if (offset + static_cast<std::size_t>(rows * cols) * sizeof(double) > payload_.size()) throw ModelError("array '" + name + "' truncated");
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
  std::memcpy(rm.data(), payload_.data() + offset, static_cast<std::size_t>(rows * cols) * sizeof(double));
  return rm;
}

Eigen::MatrixXcd ArtifactReader::complex(const std::string& name) const {
  const auto& e = entry(name, "c128");
  const auto rows = e.at("shape")[0].get<Eigen::Index>(), cols = e.at("shape")[1].get<Eigen::Index>();
  const auto offset = e.at("offset").get<std::size_t>();
  if (offset + static_cast<std::size_t>(rows * cols) * 2 * sizeof(double) > payload_.size()) throw ModelError("array '" + name + "' truncated");
  Eigen::Matrix<cdouble, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
  std::memcpy(reinterpret_cast<double*>(rm.data()), payload_.data() + offset,
              static_cast<std::size_t>(rows * cols) * 2 * sizeof(double));
  return rm;
}

std::vector<double> ArtifactReader::vector(const std::string& name) const {
  const Eigen::MatrixXd m = real(name);
  return {m.data(), m.data() + m.size()};
}

std::string model_bytes(const FittedModel& model, const nlohmann::json& config, const SpectralField* marginal) {
  ArtifactWriter w(kModelFormat);
  auto& m = w.manifest();
  m["method"] = method_name(model.method);
  m["p"] = model.p;
  m["J"] = model.J;
  m["time_points"] = model.time_points;
  m["freq_points"] = model.freq_points;
  m["h_max"] = model.h_max;
  m["config_hash"] = model.config_hash;
  m["warnings"] = model.warnings;
  if (!config.is_null()) m["config"] = config;
  w.add("time_grid", row(std::vector<double>(model.time.points().data(), model.time.points().data() + model.time.size())));
  Eigen::MatrixXd means(static_cast<Eigen::Index>(model.p), static_cast<Eigen::Index>(model.time.size()));
  for (std::size_t i = 0; i < model.p; ++i) means.row(static_cast<Eigen::Index>(i)) = model.means.subject[i].transpose();
  w.add("means", means);
  w.add("noise", model.noise);

  nlohmann::json groups = nlohmann::json::array();
  for (std::size_t g = 0; g < model.groups.size(); ++g) {
    const ModelGroup& grp = model.groups[g];
    groups.push_back({{"subjects", grp.subjects},
                      {"K", grp.K},
                      {"L", grp.bank.L_list()},
                      {"integrated_eigenvalues", grp.integrated_eigenvalues},
                      {"min_eigenvalue", grp.min_eigenvalue},
                      {"max_eigenvalue", grp.max_eigenvalue},
                      {"solver_iterations", grp.solver_iterations},
                      {"phase_objectives", grp.bank.phase_objectives},
                      {"lag_squared_norms", grp.bank.lag_squared_norms}});
    for (std::size_t k = 0; k < grp.K; ++k) {
      w.add(group_key(g, "filters" + std::to_string(k)), grp.bank.filters(k));
      if (k < grp.bank.phases.size()) w.add(group_key(g, "phase" + std::to_string(k)), Eigen::MatrixXcd(grp.bank.phases[k].transpose()));
    }
    for (std::size_t pos = 0; pos < grp.eta.size(); ++pos) w.add(group_key(g, "eta" + std::to_string(pos)), grp.eta[pos]);
    w.add(group_key(g, "scores"), row(std::vector<double>(grp.scores.values.data(), grp.scores.values.data() + grp.scores.values.size())));
  }
  m["groups"] = groups;
  if (marginal) {
    m["spectral"] = {{"nodes", marginal->size()}, {"scope", marginal->scope()}};
    const auto Mt = static_cast<Eigen::Index>(marginal->time_points());
    Eigen::MatrixXcd stacked(static_cast<Eigen::Index>(marginal->size()) * Mt, Mt);
    for (std::size_t a = 0; a < marginal->size(); ++a) stacked.middleRows(static_cast<Eigen::Index>(a) * Mt, Mt) = marginal->at(a);
    w.add("spectral", stacked);
  }
  return w.bytes();
}

void save_model(const std::string& path, const FittedModel& model, const nlohmann::json& config,
                const SpectralField* marginal) {
  const std::string data = model_bytes(model, config, marginal);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ModelError("cannot open '" + path + "' for writing");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw ModelError("failed writing '" + path + "'");
}

namespace {

FittedModel model_from_reader(const ArtifactReader& r) {
  try {
    const auto& m = r.manifest();
    FittedModel model;
    model.method = parse_method(m.at("method").get<std::string>());
    model.p = m.at("p");
    model.J = m.at("J");
    model.time_points = m.at("time_points");
    model.freq_points = m.at("freq_points");
    model.h_max = m.at("h_max");
    model.config_hash = m.at("config_hash");
    model.warnings = m.at("warnings").get<std::vector<std::string>>();
    const Eigen::MatrixXd grid = r.real("time_grid");
    model.time = TimeGrid(Eigen::VectorXd(grid.row(0).transpose()));
    const Eigen::MatrixXd means = r.real("means");
    for (Eigen::Index i = 0; i < means.rows(); ++i) model.means.subject.push_back(means.row(i).transpose());
    model.noise = r.vector("noise");
    const auto& groups = m.at("groups");
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const auto& gj = groups[g];
      ModelGroup grp;
      grp.subjects = gj.at("subjects").get<std::vector<std::size_t>>();
      grp.K = gj.at("K");
      grp.integrated_eigenvalues = gj.at("integrated_eigenvalues").get<std::vector<double>>();
      grp.min_eigenvalue = gj.at("min_eigenvalue");
      grp.max_eigenvalue = gj.at("max_eigenvalue");
      grp.solver_iterations = gj.at("solver_iterations");
      std::vector<Eigen::MatrixXd> filters;
      for (std::size_t k = 0; k < grp.K; ++k) filters.push_back(r.real(group_key(g, "filters" + std::to_string(k))));
      grp.bank = FilterBank(model.time, std::move(filters));
      for (std::size_t k = 0; k < grp.K; ++k) {
        const std::string key = group_key(g, "phase" + std::to_string(k));
        if (r.has(key)) grp.bank.phases.push_back(r.complex(key).row(0).transpose());
      }
      grp.bank.phase_objectives = gj.at("phase_objectives").get<std::vector<double>>();
      grp.bank.lag_squared_norms = gj.at("lag_squared_norms").get<std::vector<std::vector<double>>>();
      for (std::size_t pos = 0; pos < grp.subjects.size(); ++pos) grp.eta.push_back(r.real(group_key(g, "eta" + std::to_string(pos))));
      const ScoreLayout layout(grp.subjects.size(), model.J, grp.bank.L_list());
      const Eigen::MatrixXd scores = r.real(group_key(g, "scores"));
      grp.scores = ScoreArray(layout, Eigen::VectorXd(scores.row(0).transpose()));
      model.groups.push_back(std::move(grp));
    }
    if (model.means.subjects() != model.p || model.noise.size() != model.p) throw ModelError("model arrays disagree with p");
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ModelError(std::string("malformed model manifest: ") + e.what());
  } catch (const DimensionError& e) {
    throw ModelError(std::string("inconsistent model arrays: ") + e.what());
  }
}

}  // namespace

FittedModel load_model(const std::string& path) { return model_from_reader(ArtifactReader(path, kModelFormat)); }

FittedModel model_from_bytes(const std::string& bytes) {
  return model_from_reader(ArtifactReader::from_bytes(bytes, kModelFormat));
}

std::optional<SpectralField> load_spectral(const std::string& path) {
  const ArtifactReader r(path, kModelFormat);
  if (!r.has("spectral")) return std::nullopt;
  const Eigen::MatrixXcd stacked = r.complex("spectral");
  const auto n = r.manifest().at("spectral").at("nodes").get<Eigen::Index>();
  const Eigen::Index Mt = stacked.cols();
  std::vector<Eigen::MatrixXcd> kernels;
  for (Eigen::Index a = 0; a < n; ++a) kernels.push_back(stacked.middleRows(a * Mt, Mt));
  return SpectralField(std::move(kernels), r.manifest().at("spectral").at("scope").get<long>());
}

nlohmann::json sim_config_to_json(const SimConfig& c) {
  return {{"p", c.p},
          {"J", c.J},
          {"holdout", c.holdout},
          {"K", c.K},
          {"L", c.L},
          {"rho", c.rho},
          {"case", c.case_id},
          {"nrange", {c.n_min, c.n_max}},
          {"grid_points", c.grid_points},
          {"kappa", c.kappa},
          {"r1", c.r1},
          {"r2", c.r2},
          {"t_df", c.t_df},
          {"noise_ratio", c.noise_ratio},
          {"burn_in", c.burn_in},
          {"calibration_curves", c.calibration_curves},
          {"seed", c.seed}};
}

SimConfig sim_config_from_json(const nlohmann::json& j) {
  SimConfig c;
  c.p = j.at("p");
  c.J = j.at("J");
  c.holdout = j.at("holdout");
  c.K = j.at("K");
  c.L = j.at("L");
  c.rho = j.at("rho");
  c.case_id = j.at("case");
  c.n_min = j.at("nrange").at(0);
  c.n_max = j.at("nrange").at(1);
  c.grid_points = j.at("grid_points");
  c.kappa = j.at("kappa");
  c.r1 = j.at("r1");
  c.r2 = j.at("r2");
  c.t_df = j.at("t_df");
  c.noise_ratio = j.at("noise_ratio");
  c.burn_in = j.at("burn_in");
  c.calibration_curves = j.at("calibration_curves");
  c.seed = j.at("seed");
  return c;
}

void save_truth(const std::string& path, const TruthPanel& truth) {
  ArtifactWriter w(kTruthFormat);
  w.manifest()["config"] = sim_config_to_json(truth.config);
  for (std::size_t k = 0; k < truth.scores.size(); ++k) {
    w.add("precision" + std::to_string(k), truth.precision[k]);
    w.add("scores" + std::to_string(k), truth.scores[k]);
  }
  w.add("energy", truth.energy);
  w.add("noise_variance", truth.noise_variance);
  w.write(path);
}

TruthPanel load_truth(const std::string& path) {
  const ArtifactReader r(path, kTruthFormat);
  TruthPanel truth;
  try {
    truth.config = sim_config_from_json(r.manifest().at("config"));
  } catch (const nlohmann::json::exception& e) {
    throw ModelError(std::string("malformed truth manifest: ") + e.what());
  }
  for (std::size_t k = 0; k < truth.config.K; ++k) {
    truth.precision.push_back(r.real("precision" + std::to_string(k)));
    truth.scores.push_back(r.real("scores" + std::to_string(k)));
  }
  truth.energy = r.vector("energy");
  truth.noise_variance = r.vector("noise_variance");
  return truth;
}

}  // namespace smpca
