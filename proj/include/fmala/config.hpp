#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "fmala/adapt.hpp"
#include "fmala/samplers.hpp"

namespace fmala {

/// Invalid or inconsistent configuration; the CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Minimal INI-style document: `[section]` headers, `key = value` lines,
/// `#`/`;` comments. Keys are addressed as "section.key". Reads are tracked
/// so validation can reject unknown keys.
class Ini {
 public:
  static Ini parse(const std::string& text);
  static Ini parse_file(const std::filesystem::path& path);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::string require_string(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long get_long(const std::string& key, long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::string> get_list(const std::string& key,
                                    const std::vector<std::string>& fallback) const;
  std::vector<double> get_double_list(const std::string& key) const;

  std::vector<std::string> unread_keys() const;
  const std::string& text() const { return text_; }

 private:
  std::string lookup(const std::string& key) const;
  std::string text_;
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> read_;
};

enum class ExperimentKind { HeatSource, NeumannId, GaussianSanity, GaussianRate };

std::string to_string(ExperimentKind kind);

struct GaussianTargetSpec {
  Eigen::Index dim = 10;
  std::string cov_kind = "ar1";  // iso | diag | ar1
  double scale = 1.0;
  double rho = 0.5;
  std::vector<double> diag;
  bool as_posterior = true;  // wrap as a linear-model posterior so pCN applies

  Matrix covariance() const;
};

struct RateSpec {
  long n_max = 10000;
  long n_min = 100;
  int replicates = 100;
  int checkpoints = 15;
  LearningRateSchedule schedule = LearningRateSchedule::inverse_n();
};

/// One experiment run, parsed and validated from a config file.
struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::GaussianSanity;
  std::string name;
  std::uint64_t seed = 1;
  std::string output;  // optional output root override

  std::vector<SamplerKind> samplers;
  long burn_in = 20000;
  long collection = 20000;
  int replicates = 1;
  int workers = 1;

  // adapt
  double lambda = 10.0;
  double rho = 0.015;
  double alpha_star = 0.574;
  long init_phase = 500;
  double sigma2_init = 0.0;
  bool freeze_preconditioner = true;
  int precond_snapshots = 0;

  double beta = 0.02;  // pCN
  int lag = 500;       // diagnostics

  // forward problems
  int nx = 100;
  int nt = 100;
  double final_time = 1.0;
  int fine_factor = 2;
  double noise_eps = 0.01;
  double fd_step = 1e-6;
  Vector theta_truth;

  // priors
  double prior_variance = 1.5;        // isotropic prior of the MALA-family samplers
  double pcn_prior_gamma = 0.2;       // squared-exponential amplitude (heat pCN)
  double pcn_prior_length = 0.03;     // squared-exponential length scale
  bool pcn_prior_correlated = true;   // heat only; neumann shares the isotropic prior

  GaussianTargetSpec target;
  RateSpec rate;

  std::string raw_text;
  std::uint64_t hash = 0;

  static ExperimentConfig load(const std::filesystem::path& path);
  static ExperimentConfig from_text(const std::string& text);

  ChainSettings chain_settings(SamplerKind kind) const;
};

}  // namespace fmala
