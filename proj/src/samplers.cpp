#include "fmala/samplers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>

namespace fmala {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Applied view of the active preconditioner M = S S^T.
struct PrecondView {
  const Matrix* factor = nullptr;  // null means identity

  Vector apply(const Vector& v) const {
    if (!factor) return v;
    return (*factor) * (factor->transpose() * v);
  }
  Vector apply_factor(const Vector& eta) const {
    if (!factor) return eta;
    return (*factor) * eta;
  }
  double trace(Eigen::Index d) const {
    if (!factor) return static_cast<double>(d);
    return factor->squaredNorm();
  }
};

enum class Phase { Init, Warmup, Adapt, Collect };

/// Geometric grid of snapshot counts over [10, max_count], always containing
/// 100 (when reachable) and max_count.
std::set<long> snapshot_counts(int requested, long max_count) {
  std::set<long> out;
  if (requested <= 0 || max_count < 1) return out;
  const double lo = std::log(10.0);
  const double hi = std::log(static_cast<double>(std::max<long>(max_count, 10)));
  const int points = std::max(requested, 2);
  for (int i = 0; i < points; ++i) {
    const double t = lo + (hi - lo) * static_cast<double>(i) / (points - 1);
    long n = std::lround(std::exp(t));
    n = std::clamp<long>(n, 1, max_count);
    out.insert(n);
  }
  if (max_count >= 100) out.insert(100);
  out.insert(max_count);
  return out;
}

TargetEval safe_evaluate(const Target& target, const Vector& x, long iteration) {
  try {
    return target.evaluate(x);
  } catch (const std::domain_error&) {
    return {x, -kInf, Vector::Zero(x.size())};
  } catch (const std::exception& err) {
    throw std::runtime_error("chain iteration " + std::to_string(iteration) +
                             ": target evaluation failed: " + err.what());
  }
}

Vector draw_initial_point(const Target& target, RandomStream& rng) {
  constexpr int kMaxAttempts = 10000;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Vector x = target.prior().sample(rng);
    const TargetEval ev = safe_evaluate(target, x, -1);
    if (std::isfinite(ev.log_density)) return x;
  }
  throw std::runtime_error("run_chain: no admissible starting point after 10000 prior draws");
}

void validate(const Target& target, const ChainSettings& s) {
  if (target.dim() < 1) throw std::invalid_argument("run_chain: empty target");
  if (s.collection < 0 || s.burn_in < 0) {
    throw std::invalid_argument("run_chain: negative phase length");
  }
  if (s.init_phase < 0) throw std::invalid_argument("run_chain: negative init phase");
  if (s.kind == SamplerKind::Pcn) {
    if (!(s.beta > 0.0 && s.beta < 1.0)) {
      throw std::invalid_argument("run_chain: pCN beta must lie in (0, 1)");
    }
    if (target.prior().mean().norm() > 0.0) {
      throw std::invalid_argument("run_chain: pCN requires a zero-mean prior");
    }
    if (s.init_phase > 0 && s.burn_in <= s.init_phase) {
      throw std::invalid_argument("run_chain: burn-in must exceed the initialization phase");
    }
    return;
  }
  if (s.kind == SamplerKind::AdaMala && s.init_phase < 2) {
    throw std::invalid_argument(
        "run_chain: the covariance sampler needs at least two warm-up states");
  }
  const long warmup = s.kind == SamplerKind::AdaMala ? s.init_phase : 0;
  if (s.kind != SamplerKind::Mala && s.burn_in <= s.init_phase + warmup) {
    throw std::invalid_argument("run_chain: burn-in must exceed the initialization phase");
  }
}

ChainRecord run_pcn(const Target& target, const Target& init_target, const ChainSettings& s,
                    std::uint64_t seed) {
  const Eigen::Index d = target.dim();
  const long total = s.burn_in + s.collection;
  ChainRecord rec;
  rec.kind = SamplerKind::Pcn;
  rec.samples.resize(total, d);
  rec.accepted.assign(total, 0);
  rec.step_trace.assign(total, s.beta);
  rec.seconds.assign(total, 0.0);
  rec.init_phase = s.init_phase;
  rec.burn_in = s.burn_in;
  rec.collection = s.collection;
  rec.seed = seed;

  RandomStream rng(seed);
  Vector x = draw_initial_point(init_target, rng);
  const auto t0 = std::chrono::steady_clock::now();
  const auto elapsed = [&]() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  // State relocation: plain MALA with step-size tuning moves the prior draw
  // into the high-probability region before the prior-reversible dynamics
  // start. The tuned step size is discarded afterwards.
  if (s.init_phase > 0) {
    TargetEval cur = safe_evaluate(init_target, x, 0);
    const double sigma2_start =
        s.sigma2_init > 0.0 ? s.sigma2_init : 0.1 * std::pow(static_cast<double>(d), -1.0 / 3.0);
    StepSizeController ctrl(sigma2_start, s.step_adapt_rate, s.target_accept);
    for (long it = 0; it < s.init_phase; ++it) {
      const double sigma2 = std::max(s.sigma2_floor, ctrl.sigma2());
      const Vector y = mala_propose(x, cur.score, rng.normal_vector(d), sigma2);
      TargetEval prop = safe_evaluate(init_target, y, it);
      if (std::isnan(prop.log_density) || !prop.score.allFinite()) {
        prop.log_density = -kInf;
        prop.score.setZero();
        ++rec.nan_rejections;
      }
      const double alpha = mala_accept_prob(cur, prop, cur.score, prop.score, sigma2);
      ctrl.observe(alpha);
      if (rng.uniform01() < alpha) {
        x = y;
        cur = std::move(prop);
        rec.accepted[it] = 1;
      }
      rec.samples.row(it) = x;
      rec.step_trace[it] = ctrl.sigma2();
      rec.seconds[it] = elapsed();
    }
  }

  long nan_rejections = 0;
  auto potential = [&](const Vector& p) -> double {
    try {
      const double phi = target.potential(p);
      if (std::isnan(phi)) {
        ++nan_rejections;
        return kInf;
      }
      return phi;
    } catch (const std::domain_error&) {
      return kInf;
    }
  };
  double phi = potential(x);
  const PcnParams params{s.beta};
  for (long it = s.init_phase; it < total; ++it) {
    const PcnStepResult step = pcn_step(x, phi, params, target.prior(), potential, rng);
    x = step.x;
    phi = step.potential;
    rec.samples.row(it) = x;
    rec.accepted[it] = step.accepted ? 1 : 0;
    rec.seconds[it] = elapsed();
  }
  rec.nan_rejections += nan_rejections;
  return rec;
}

}  // namespace

std::string to_string(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::Mala:
      return "mala";
    case SamplerKind::FisherMala:
      return "fishermala";
    case SamplerKind::AdaMala:
      return "adamala";
    case SamplerKind::Pcn:
      return "pcn";
  }
  return "?";
}

SamplerKind sampler_kind_from_string(const std::string& name) {
  if (name == "mala") return SamplerKind::Mala;
  if (name == "fishermala" || name == "fisher") return SamplerKind::FisherMala;
  if (name == "adamala" || name == "ada") return SamplerKind::AdaMala;
  if (name == "pcn") return SamplerKind::Pcn;
  throw std::invalid_argument("unknown sampler kind '" + name + "'");
}

double ChainRecord::collection_acceptance() const {
  if (collection < 1) return 0.0;
  long hits = 0;
  for (long i = burn_in; i < total(); ++i) hits += accepted[i];
  return static_cast<double>(hits) / static_cast<double>(collection);
}

Vector ChainRecord::posterior_mean() const {
  if (collection < 1) throw std::logic_error("posterior_mean: empty collection phase");
  return collection_samples().colwise().mean();
}

double mala_h(const Vector& u, const Vector& v, const Vector& score_v,
              const Vector& precond_score_v, double sigma2) {
  return 0.5 * (u - v - 0.25 * sigma2 * precond_score_v).dot(score_v);
}

Vector mala_propose(const Vector& x, const Vector& precond_score,
                    const Vector& factor_noise, double sigma2) {
  return x + 0.5 * sigma2 * precond_score + std::sqrt(sigma2) * factor_noise;
}

double mala_accept_prob(const TargetEval& current, const TargetEval& proposal,
                        const Vector& precond_score_cur, const Vector& precond_score_prop,
                        double sigma2) {
  if (!std::isfinite(proposal.log_density)) return 0.0;
  const double log_ratio =
      proposal.log_density + mala_h(current.x, proposal.x, proposal.score, precond_score_prop, sigma2) -
      current.log_density - mala_h(proposal.x, current.x, current.score, precond_score_cur, sigma2);
  if (std::isnan(log_ratio)) return 0.0;
  return std::min(1.0, std::exp(log_ratio));
}

ChainRecord run_chain(const Target& target, const ChainSettings& s, std::uint64_t seed,
                      const Target* init_target) {
  validate(target, s);
  if (s.kind == SamplerKind::Pcn) {
    return run_pcn(target, init_target ? *init_target : target, s, seed);
  }

  const Eigen::Index d = target.dim();
  const long warmup = s.kind == SamplerKind::AdaMala ? s.init_phase : 0;
  const long total = s.burn_in + s.collection;

  ChainRecord rec;
  rec.kind = s.kind;
  rec.samples.resize(total, d);
  rec.accepted.assign(total, 0);
  rec.step_trace.assign(total, 0.0);
  rec.seconds.assign(total, 0.0);
  rec.init_phase = s.kind == SamplerKind::Mala ? 0 : s.init_phase;
  rec.warmup = warmup;
  rec.burn_in = s.burn_in;
  rec.collection = s.collection;
  rec.seed = seed;

  RandomStream rng(seed);
  Vector x = draw_initial_point(target, rng);
  TargetEval cur = safe_evaluate(target, x, 0);

  const double sigma2_start =
      s.sigma2_init > 0.0 ? s.sigma2_init : 0.1 * std::pow(static_cast<double>(d), -1.0 / 3.0);
  StepSizeController ctrl(sigma2_start, s.step_adapt_rate, s.target_accept);

  FisherAdapter fisher(d, s.damping);
  CovarianceAdapter covariance(d, s.damping);

  // Preconditioner update count by the end of burn-in, for both kinds.
  const std::set<long> snapshots =
      s.kind == SamplerKind::Mala
          ? std::set<long>{}
          : snapshot_counts(s.precond_snapshots, s.burn_in - rec.init_phase);

  bool floor_warned = false;
  const auto t0 = std::chrono::steady_clock::now();

  for (long it = 0; it < total; ++it) {
    Phase phase = Phase::Adapt;
    if (it >= s.burn_in) {
      phase = Phase::Collect;
    } else if (s.kind != SamplerKind::Mala && it < rec.init_phase) {
      phase = Phase::Init;
    } else if (s.kind == SamplerKind::AdaMala && it < rec.init_phase + warmup) {
      phase = Phase::Warmup;
    }
    if (phase == Phase::Collect && !ctrl.frozen()) ctrl.freeze();

    // Active preconditioner: identity through the initialization phases.
    PrecondView precond;
    if (phase == Phase::Adapt || phase == Phase::Collect) {
      if (s.kind == SamplerKind::FisherMala) {
        precond.factor = &fisher.sqrt_factor();
      } else if (s.kind == SamplerKind::AdaMala) {
        precond.factor = &covariance.sampling_factor();
      }
    }

    double sigma2_r = normalized_step(ctrl.sigma2(), precond.trace(d), d);
    if (sigma2_r < s.sigma2_floor) {
      sigma2_r = s.sigma2_floor;
      if (!floor_warned) {
        fprintf(stderr, "fmala: warning: normalized step size clamped to %g\n", s.sigma2_floor);
        floor_warned = true;
      }
    }

    const Vector eta = rng.normal_vector(d);
    const Vector precond_score_cur = precond.apply(cur.score);
    const Vector y = mala_propose(x, precond_score_cur, precond.apply_factor(eta), sigma2_r);
    TargetEval prop = safe_evaluate(target, y, it);
    if (std::isnan(prop.log_density) || !prop.score.allFinite()) {
      prop.log_density = -kInf;
      prop.score.setZero();
      ++rec.nan_rejections;
    }

    double alpha = 0.0;
    if (std::isfinite(prop.log_density)) {
      alpha = mala_accept_prob(cur, prop, precond_score_cur, precond.apply(prop.score), sigma2_r);
    }

    // Adaptation, ordered as: preconditioner signal, then step size; the
    // normalized step for the next iteration picks up both.
    const bool adapt_precond =
        (phase == Phase::Adapt) || (phase == Phase::Collect && !s.freeze_preconditioner);
    if (s.kind == SamplerKind::FisherMala && adapt_precond) {
      fisher.update(fisher_signal(alpha, cur.score, prop.score));
      if (!snapshots.empty() && snapshots.count(fisher.count())) {
        rec.precond_trace.push_back({fisher.count(), fisher.matrix()});
      }
    }
    if (phase != Phase::Collect) ctrl.observe(alpha);

    if (rng.uniform01() < alpha) {
      x = y;
      cur = std::move(prop);
      rec.accepted[it] = 1;
    }

    if (s.kind == SamplerKind::AdaMala &&
        (phase == Phase::Warmup || phase == Phase::Adapt ||
         (phase == Phase::Collect && !s.freeze_preconditioner))) {
      covariance.update(x);
      if (!snapshots.empty() && covariance.count() >= 2 && snapshots.count(covariance.count())) {
        rec.precond_trace.push_back({covariance.count(), covariance.covariance()});
      }
    }

    rec.samples.row(it) = x;
    rec.step_trace[it] = ctrl.sigma2();
    rec.seconds[it] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  return rec;
}

}  // namespace fmala
