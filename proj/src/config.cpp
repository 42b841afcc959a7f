#include "fmala/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "fmala/chain_io.hpp"

namespace fmala {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

}  // namespace

Ini Ini::parse(const std::string& text) {
  Ini ini;
  ini.text_ = text;
  std::istringstream stream(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(stream, line)) {
    ++lineno;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line.erase(comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("config line " + std::to_string(lineno) + ": unterminated section");
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    }
    const std::string full = section.empty() ? key : section + "." + key;
    if (ini.values_.count(full)) {
      throw ConfigError("config: duplicate key '" + full + "'");
    }
    ini.values_[full] = value;
  }
  return ini;
}

Ini Ini::parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

bool Ini::has(const std::string& key) const { return values_.count(key) > 0; }

std::string Ini::lookup(const std::string& key) const {
  read_.insert(key);
  const auto it = values_.find(key);
  return it == values_.end() ? std::string() : it->second;
}

std::string Ini::get_string(const std::string& key, const std::string& fallback) const {
  const std::string v = lookup(key);
  return has(key) ? v : fallback;
}

std::string Ini::require_string(const std::string& key) const {
  if (!has(key)) throw ConfigError("config: missing required key '" + key + "'");
  return lookup(key);
}

double Ini::get_double(const std::string& key, double fallback) const {
  if (!has(key)) return fallback;
  const std::string v = lookup(key);
  try {
    std::size_t used = 0;
    const double parsed = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return parsed;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' is not a number: '" + v + "'");
  }
}

long Ini::get_long(const std::string& key, long fallback) const {
  if (!has(key)) return fallback;
  const std::string v = lookup(key);
  try {
    std::size_t used = 0;
    const long parsed = std::stol(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return parsed;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' is not an integer: '" + v + "'");
  }
}

bool Ini::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string v = lower(lookup(key));
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config: key '" + key + "' is not a boolean: '" + v + "'");
}

std::vector<std::string> Ini::get_list(const std::string& key,
                                       const std::vector<std::string>& fallback) const {
  if (!has(key)) return fallback;
  const std::string v = lookup(key);
  std::vector<std::string> out;
  std::istringstream stream(v);
  std::string item;
  while (std::getline(stream, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  if (out.empty()) throw ConfigError("config: key '" + key + "' is an empty list");
  return out;
}

std::vector<double> Ini::get_double_list(const std::string& key) const {
  std::vector<double> out;
  for (const std::string& item : get_list(key, {})) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("config: key '" + key + "' has a non-numeric entry '" + item + "'");
    }
  }
  return out;
}

std::vector<std::string> Ini::unread_keys() const {
  std::vector<std::string> out;
  for (const auto& [key, value] : values_) {
    if (!read_.count(key)) out.push_back(key);
  }
  return out;
}

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::HeatSource:
      return "heat-source";
    case ExperimentKind::NeumannId:
      return "neumann-id";
    case ExperimentKind::GaussianSanity:
      return "gaussian-sanity";
    case ExperimentKind::GaussianRate:
      return "gaussian-rate";
  }
  return "?";
}

Matrix GaussianTargetSpec::covariance() const {
  if (dim < 1) throw ConfigError("config: target.dim must be positive");
  if (cov_kind == "iso") {
    return scale * Matrix::Identity(dim, dim);
  }
  if (cov_kind == "diag") {
    if (static_cast<Eigen::Index>(diag.size()) != dim) {
      throw ConfigError("config: target.cov_diag must list target.dim entries");
    }
    Matrix m = Matrix::Zero(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
      if (!(diag[i] > 0.0)) throw ConfigError("config: target.cov_diag entries must be positive");
      m(i, i) = diag[i];
    }
    return m;
  }
  if (cov_kind == "ar1") {
    if (!(rho > -1.0 && rho < 1.0)) throw ConfigError("config: target.cov_rho must lie in (-1, 1)");
    Matrix m(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
      for (Eigen::Index j = 0; j < dim; ++j) {
        m(i, j) = scale * std::pow(rho, std::abs(static_cast<double>(i - j)));
      }
    }
    return m;
  }
  throw ConfigError("config: unknown target.cov kind '" + cov_kind + "'");
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_text(buffer.str());
}

ExperimentConfig ExperimentConfig::from_text(const std::string& text) {
  const Ini ini = Ini::parse(text);
  ExperimentConfig cfg;
  cfg.raw_text = text;
  cfg.hash = fnv1a64(text);

  const std::string experiment = lower(ini.require_string("experiment"));
  if (experiment == "heat-source") {
    cfg.experiment = ExperimentKind::HeatSource;
  } else if (experiment == "neumann-id") {
    cfg.experiment = ExperimentKind::NeumannId;
  } else if (experiment == "gaussian-sanity") {
    cfg.experiment = ExperimentKind::GaussianSanity;
  } else if (experiment == "gaussian-rate") {
    cfg.experiment = ExperimentKind::GaussianRate;
  } else {
    throw ConfigError("config: unknown experiment '" + experiment + "'");
  }
  cfg.name = ini.get_string("name", experiment);
  cfg.seed = static_cast<std::uint64_t>(ini.get_long("seed", 1));
  cfg.output = ini.get_string("output", "");

  const bool chains = cfg.experiment != ExperimentKind::GaussianRate;
  if (chains) {
    std::vector<std::string> kinds = ini.get_list("run.samplers", {"fishermala"});
    for (const std::string& kind : kinds) {
      try {
        cfg.samplers.push_back(sampler_kind_from_string(lower(kind)));
      } catch (const std::invalid_argument& err) {
        throw ConfigError(std::string("config: run.samplers: ") + err.what());
      }
    }
    cfg.burn_in = ini.get_long("run.burn_in", 20000);
    cfg.collection = ini.get_long("run.collection", 20000);
    cfg.replicates = static_cast<int>(ini.get_long("run.replicates", 1));
    cfg.workers = static_cast<int>(ini.get_long("run.workers", 1));
    if (cfg.burn_in < 1 || cfg.collection < 1) {
      throw ConfigError("config: run.burn_in and run.collection must be positive");
    }
    if (cfg.replicates < 1) throw ConfigError("config: run.replicates must be positive");
    if (cfg.workers < 1) throw ConfigError("config: run.workers must be positive");

    cfg.lambda = ini.get_double("adapt.lambda", 10.0);
    cfg.rho = ini.get_double("adapt.rho", 0.015);
    cfg.alpha_star = ini.get_double("adapt.alpha_star", 0.574);
    // The steep small-noise likelihood of the parameter-identification
    // problem needs a much longer plain-MALA descent before adaptation.
    const long default_init = cfg.experiment == ExperimentKind::NeumannId ? 5000 : 500;
    cfg.init_phase = ini.get_long("adapt.init_phase", default_init);
    cfg.sigma2_init = ini.get_double("adapt.sigma2_init", 0.0);
    cfg.freeze_preconditioner = ini.get_bool("adapt.freeze_preconditioner", true);
    cfg.precond_snapshots = static_cast<int>(ini.get_long("adapt.precond_snapshots", 0));
    if (!(cfg.lambda > 0.0)) throw ConfigError("config: adapt.lambda must be positive");
    if (cfg.init_phase < 1) throw ConfigError("config: adapt.init_phase must be positive");

    cfg.beta = ini.get_double("pcn.beta", cfg.experiment == ExperimentKind::NeumannId ? 0.055 : 0.02);
    if (!(cfg.beta > 0.0 && cfg.beta < 1.0)) throw ConfigError("config: pcn.beta must lie in (0, 1)");

    cfg.lag = static_cast<int>(ini.get_long("diagnostics.lag", 500));
    if (cfg.lag < 1) throw ConfigError("config: diagnostics.lag must be positive");
    if (cfg.lag >= cfg.collection) {
      throw ConfigError("config: diagnostics.lag must be smaller than run.collection");
    }
  }

  switch (cfg.experiment) {
    case ExperimentKind::HeatSource: {
      cfg.nx = static_cast<int>(ini.get_long("forward.nx", 100));
      cfg.nt = static_cast<int>(ini.get_long("forward.nt", 100));
      cfg.final_time = ini.get_double("forward.final_time", 1.0);
      cfg.fine_factor = static_cast<int>(ini.get_long("forward.fine_factor", 2));
      cfg.noise_eps = ini.get_double("forward.noise_eps", 0.01);
      cfg.prior_variance = ini.get_double("prior.variance", 1.5);
      cfg.pcn_prior_correlated = ini.get_bool("prior.pcn_correlated", true);
      cfg.pcn_prior_gamma = ini.get_double("prior.pcn_gamma", 0.2);
      cfg.pcn_prior_length = ini.get_double("prior.pcn_length", 0.03);
      if (cfg.nx < 2 || cfg.nt < 2) throw ConfigError("config: forward.nx and forward.nt must be >= 2");
      if (cfg.fine_factor < 2) {
        throw ConfigError("config: forward.fine_factor must be >= 2 (data and inversion grids must differ)");
      }
      if (!(cfg.noise_eps > 0.0)) throw ConfigError("config: forward.noise_eps must be positive");
      if (!(cfg.prior_variance > 0.0)) throw ConfigError("config: prior.variance must be positive");
      if (!(cfg.pcn_prior_gamma > 0.0) || !(cfg.pcn_prior_length > 0.0)) {
        throw ConfigError("config: pCN prior parameters must be positive");
      }
      break;
    }
    case ExperimentKind::NeumannId: {
      cfg.nx = static_cast<int>(ini.get_long("forward.nx", 100));
      cfg.fine_factor = static_cast<int>(ini.get_long("forward.fine_factor", 2));
      cfg.noise_eps = ini.get_double("forward.noise_eps", 0.01);
      cfg.fd_step = ini.get_double("forward.fd_step", 1e-6);
      std::vector<double> truth = {2.0, 1.0, 1.0};
      if (ini.has("forward.theta_truth")) truth = ini.get_double_list("forward.theta_truth");
      cfg.theta_truth = Eigen::Map<const Vector>(truth.data(), static_cast<Eigen::Index>(truth.size()));
      cfg.prior_variance = ini.get_double("prior.variance", 0.1);
      if (cfg.nx < 4) throw ConfigError("config: forward.nx must be >= 4");
      if (cfg.fine_factor < 2) {
        throw ConfigError("config: forward.fine_factor must be >= 2 (data and inversion grids must differ)");
      }
      if (!(cfg.noise_eps > 0.0)) throw ConfigError("config: forward.noise_eps must be positive");
      if (!(cfg.fd_step > 0.0)) throw ConfigError("config: forward.fd_step must be positive");
      if (cfg.theta_truth.size() % 2 == 0) {
        throw ConfigError("config: forward.theta_truth must have odd length (1 + sin/cos pairs)");
      }
      if (!(cfg.prior_variance > 0.0)) throw ConfigError("config: prior.variance must be positive");
      break;
    }
    case ExperimentKind::GaussianSanity:
    case ExperimentKind::GaussianRate: {
      cfg.target.dim = ini.get_long("target.dim", cfg.experiment == ExperimentKind::GaussianRate ? 5 : 10);
      cfg.target.cov_kind = lower(ini.get_string("target.cov", "ar1"));
      cfg.target.scale = ini.get_double("target.cov_scale", 1.0);
      cfg.target.rho = ini.get_double("target.cov_rho", 0.5);
      if (ini.has("target.cov_diag")) cfg.target.diag = ini.get_double_list("target.cov_diag");
      cfg.target.as_posterior = ini.get_bool("target.as_posterior", true);
      if (!(cfg.target.scale > 0.0)) throw ConfigError("config: target.cov_scale must be positive");
      (void)cfg.target.covariance();  // validates kind/diag/rho
      if (cfg.experiment == ExperimentKind::GaussianRate) {
        cfg.rate.n_max = ini.get_long("rate.n_max", 10000);
        cfg.rate.n_min = ini.get_long("rate.n_min", 100);
        cfg.rate.replicates = static_cast<int>(ini.get_long("rate.replicates", 100));
        cfg.rate.checkpoints = static_cast<int>(ini.get_long("rate.checkpoints", 15));
        try {
          cfg.rate.schedule = LearningRateSchedule::parse(ini.get_string("rate.schedule", "1/n"));
        } catch (const std::invalid_argument& err) {
          throw ConfigError(std::string("config: rate.schedule: ") + err.what());
        }
        cfg.lambda = ini.get_double("adapt.lambda", 10.0);
        if (cfg.rate.n_min < 1 || cfg.rate.n_max <= cfg.rate.n_min) {
          throw ConfigError("config: rate.n_max must exceed rate.n_min >= 1");
        }
        if (cfg.rate.replicates < 1) throw ConfigError("config: rate.replicates must be positive");
      }
      break;
    }
  }

  const std::vector<std::string> unknown = ini.unread_keys();
  if (!unknown.empty()) {
    std::string msg = "config: unknown key(s):";
    for (const std::string& key : unknown) msg += " '" + key + "'";
    throw ConfigError(msg);
  }
  return cfg;
}

ChainSettings ExperimentConfig::chain_settings(SamplerKind kind) const {
  ChainSettings s;
  s.kind = kind;
  s.burn_in = burn_in;
  s.collection = collection;
  s.init_phase = init_phase;
  s.damping = lambda;
  s.step_adapt_rate = rho;
  s.target_accept = alpha_star;
  s.sigma2_init = sigma2_init;
  s.beta = beta;
  s.freeze_preconditioner = freeze_preconditioner;
  s.precond_snapshots = precond_snapshots;
  return s;
}

}  // namespace fmala
