#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fmala/config.hpp"
#include "fmala/diagnostics.hpp"
#include "fmala/forward.hpp"

namespace fmala {

/// Squared-exponential covariance gamma exp(-(xi-xj)^2 / (2 l^2)) on the
/// given nodes, with a small diagonal jitter guarding the factorization.
Matrix squared_exponential_covariance(const Vector& nodes, double gamma, double length);

/// Heat-source inversion: linear operator on the inversion grid, data from a
/// finer grid, and one posterior per prior choice (the pCN sampler keeps the
/// correlated prior, the MALA family an isotropic one).
struct HeatProblem {
  std::shared_ptr<HeatSourceOperator> op;
  SyntheticDataset data;
  std::shared_ptr<Posterior> posterior_iso;
  std::shared_ptr<Posterior> posterior_pcn;

  const Target& target_for(SamplerKind kind) const {
    return kind == SamplerKind::Pcn && posterior_pcn ? *posterior_pcn : *posterior_iso;
  }
  /// The correlated prior is far too stiff for the gradient moves of the
  /// state-initialization phase, so pCN chains relocate on the isotropic
  /// posterior instead.
  const Target* init_target_for(SamplerKind kind) const {
    return kind == SamplerKind::Pcn ? posterior_iso.get() : nullptr;
  }
  /// Analytic posterior moments under the isotropic prior.
  LinearGaussianPosterior analytic_posterior() const;
};

HeatProblem build_heat_problem(const ExperimentConfig& cfg);

struct NeumannProblem {
  std::shared_ptr<NeumannBvpModel> model;
  SyntheticDataset data;
  std::shared_ptr<Posterior> posterior;
  const Target& target_for(SamplerKind) const { return *posterior; }
};

NeumannProblem build_neumann_problem(const ExperimentConfig& cfg,
                                     std::optional<double> eps_override = std::nullopt);

/// Gaussian sanity target N(0, Sigma). With as_posterior the target is the
/// exact posterior of a linear model (prior 2 Sigma, noise 2 Sigma, F = I,
/// y = 0), which every sampler kind can run against.
struct GaussianProblem {
  Matrix sigma;
  std::shared_ptr<Target> target;
  const Target& target_for(SamplerKind) const { return *target; }
};

GaussianProblem build_gaussian_problem(const ExperimentConfig& cfg);

struct SamplerSummary {
  SamplerKind kind = SamplerKind::FisherMala;
  int replicate = 0;
  std::uint64_t seed = 0;
  double err_pct = 0.0;
  double ess_monolithic = 0.0;
  double accept_rate = 0.0;
  double esjd_value = 0.0;
  double wall_seconds = 0.0;
  long nan_rejections = 0;
  std::uint64_t digest = 0;
  Vector posterior_mean;
  Vector ess_per_dim;
  Vector iat_per_dim;
  Vector ci_low;   // empirical 2.5% quantile, small-dimension runs only
  Vector ci_high;  // empirical 97.5% quantile
  std::string chain_file;
};

/// References the summary compares against: a truth vector for inverse
/// problems, a true covariance for synthetic Gaussian targets.
struct SummaryRefs {
  const Vector* truth = nullptr;
  const Matrix* covariance = nullptr;
};

SamplerSummary summarize_chain(const ChainRecord& record, int lag, const SummaryRefs& refs);

Vector empirical_quantile(const Eigen::Ref<const Matrix>& samples, double p);

struct RunResult {
  std::filesystem::path dir;
  std::vector<SamplerSummary> summaries;
  std::optional<RateCurve> rate;
};

/// Execute a configured experiment and write its artifacts (config snapshot,
/// chain files with JSON sidecars, diagnostics, summary.json/csv, optional
/// preconditioner-convergence curve or rate curve).
RunResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_root);

/// Recompute chain diagnostics from a stored chain file; writes
/// <stem>.diag.json, <stem>.acf.csv and <stem>.ess_time.csv next to it
/// (or under out_dir when given).
void diagnose_chain_file(const std::filesystem::path& chain_path, int lag,
                         std::optional<std::filesystem::path> out_dir = std::nullopt,
                         std::optional<int> acf_dim = std::nullopt);

/// Aggregate summary.json files of one experiment into a CSV (mean and
/// spread per sampler). Mixed experiments raise ConfigError.
std::string aggregate_table(const std::vector<std::filesystem::path>& summary_files);

/// Output root: FMALA_OUT environment variable, else ./runs.
std::filesystem::path default_output_root();

}  // namespace fmala
