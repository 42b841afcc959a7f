#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "fmala/adapt.hpp"
#include "fmala/targets.hpp"

namespace fmala {

enum class SamplerKind { Mala, FisherMala, AdaMala, Pcn };

std::string to_string(SamplerKind kind);
SamplerKind sampler_kind_from_string(const std::string& name);

/// Per-chain run settings. burn_in counts every pre-collection iteration,
/// including the identity-preconditioner initialization phase (and, for the
/// covariance sampler, its additional warm-up block).
struct ChainSettings {
  SamplerKind kind = SamplerKind::FisherMala;
  long burn_in = 20000;
  long collection = 20000;
  long init_phase = 500;
  double damping = 10.0;
  double step_adapt_rate = 0.015;
  double target_accept = 0.574;
  double sigma2_init = 0.0;  // <= 0 selects 0.1 d^(-1/3)
  double sigma2_floor = 1e-8;
  double beta = 0.02;  // pCN only
  bool freeze_preconditioner = true;
  int precond_snapshots = 0;  // 0 disables preconditioner snapshots
};

struct PrecondSnapshot {
  long update_count = 0;
  Matrix m;
};

/// Full sample path with per-iteration flags, step-size trace and wall-clock
/// marks. Row i of samples is the state after iteration i; columns are
/// contiguous per dimension.
struct ChainRecord {
  SamplerKind kind = SamplerKind::FisherMala;
  Matrix samples;
  std::vector<std::uint8_t> accepted;
  std::vector<double> step_trace;  // sigma^2 (beta for pCN)
  std::vector<double> seconds;     // cumulative wall clock, not reproducible
  long init_phase = 0;
  long warmup = 0;
  long burn_in = 0;
  long collection = 0;
  std::uint64_t seed = 0;
  long nan_rejections = 0;
  std::vector<PrecondSnapshot> precond_trace;  // not persisted to chain files

  Eigen::Index dim() const { return samples.cols(); }
  long total() const { return samples.rows(); }
  Eigen::Block<const Matrix> collection_samples() const {
    return samples.bottomRows(collection);
  }
  double collection_acceptance() const;
  Vector posterior_mean() const;  // mean over the collection phase
  double total_seconds() const { return seconds.empty() ? 0.0 : seconds.back(); }
};

/// h(u, v) = 1/2 (u - v - sigma^2/4 M score_v)^T score_v; the proposal
/// density ratio is exp(h(x, y) - h(y, x)).
double mala_h(const Vector& u, const Vector& v, const Vector& score_v,
              const Vector& precond_score_v, double sigma2);

/// Langevin proposal y = x + sigma^2/2 M s(x) + sigma S eta with M = S S^T;
/// deterministic in eta.
Vector mala_propose(const Vector& x, const Vector& precond_score,
                    const Vector& factor_noise, double sigma2);

/// min(1, exp{log pi(y) + h(x,y) - log pi(x) - h(y,x)}); NaN-safe callers
/// should check the evaluations first.
double mala_accept_prob(const TargetEval& current, const TargetEval& proposal,
                        const Vector& precond_score_cur, const Vector& precond_score_prop,
                        double sigma2);

struct PcnParams {
  double beta = 0.02;
};

struct PcnStepResult {
  Vector x;
  double potential = 0.0;
  bool accepted = false;
};

/// Prior-reversible autoregressive step y = sqrt(1 - beta^2) x + beta L eta,
/// accepted with min(1, exp(Phi(x) - Phi(y))). The prior must be zero-mean.
/// Gradient-free: only potential differences enter the decision.
template <typename PotentialFn>
PcnStepResult pcn_step(const Vector& x, double potential_x, const PcnParams& params,
                       const GaussianPrior& prior, PotentialFn&& potential,
                       RandomStream& rng) {
  const Vector y = std::sqrt(1.0 - params.beta * params.beta) * x +
                   params.beta * prior.factor_apply(rng.normal_vector(x.size()));
  const double phi_y = potential(y);
  const double log_alpha = potential_x - phi_y;
  const bool accept = rng.uniform01() < std::exp(std::min(0.0, log_alpha));
  if (accept) return {y, phi_y, true};
  return {x, potential_x, false};
}

/// Run one chain: initialization phase (identity-preconditioner MALA,
/// step-size tuning only), covariance warm-up when applicable, adaptive
/// burn-in, then a frozen collection phase. Reproducible from
/// (seed, settings). Every kind gets the initialization phase; for pCN it
/// only relocates the state before the prior-reversible dynamics take over.
/// init_target, when given, supplies the density for those initialization
/// steps (used when the chain's own prior is too stiff for gradient moves).
ChainRecord run_chain(const Target& target, const ChainSettings& settings,
                      std::uint64_t seed, const Target* init_target = nullptr);

}  // namespace fmala
