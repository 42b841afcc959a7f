#pragma once

#include <cstdint>
#include <vector>

#include "fmala/adapt.hpp"
#include "fmala/samplers.hpp"
#include "fmala/targets.hpp"

namespace fmala {

/// Autocorrelations rho_0..rho_L; rho_0 is exactly one.
struct AcfResult {
  Vector rho;
  int lag = 0;
};

/// Biased autocovariance estimator with sample-mean centering, normalized by
/// rho_0. Throws on a zero-variance series.
AcfResult acf(const Eigen::Ref<const Vector>& series, int max_lag);

/// Per-dimension integrated autocorrelation time tau_i = 1 + 2 sum rho_k
/// (floored at one) and effective sample sizes ESS_i = N / tau_i; the
/// monolithic value uses the slowest dimension.
struct EssReport {
  Vector iat;
  Vector ess;
  double ess_monolithic = 0.0;
  long n_samples = 0;
  int lag = 0;
};

EssReport ess(const Eigen::Ref<const Matrix>& chain, int max_lag);

/// ||estimate - truth||_2 / ||truth||_2 * 100.
double relative_error(const Vector& estimate, const Vector& truth);

/// Frobenius distance of trace-normalized snapshots to a trace-normalized
/// reference, one entry per snapshot; scale-invariant in both arguments.
Vector precond_convergence(const std::vector<Matrix>& snapshots, const Matrix& reference);
Vector precond_convergence(const std::vector<PrecondSnapshot>& snapshots,
                           const Matrix& reference);

/// Mean squared displacement over the collection phase.
double esjd(const ChainRecord& record);

/// Stochastic-approximation error curve: feeds i.i.d. exact scores of the
/// Gaussian target (Fisher matrix = precision) into the online estimate and
/// records E||I_hat_n - I||_F^2 over replicates at geometric checkpoints,
/// together with the fitted log-log slope.
struct RateCurve {
  std::vector<long> n;
  Vector mse;
  double slope = 0.0;
};

RateCurve rate_experiment(const GaussianScoreTarget& target, const LearningRateSchedule& schedule,
                          long n_max, int replicates, std::uint64_t seed, int checkpoints = 15,
                          long n_min = 100, double damping = 10.0);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<long>& x, const Vector& y);

}  // namespace fmala
