#pragma once

#include <limits>
#include <memory>
#include <stdexcept>

#include "fmala/linalg.hpp"
#include "fmala/random.hpp"

namespace fmala {

/// A state-space point with its (unnormalized) log density and score.
struct TargetEval {
  Vector x;
  double log_density = 0.0;
  Vector score;
};

/// Zero-or-nonzero-mean Gaussian prior N(m, C) with a cached factorization.
/// An isotropic fast path avoids dense solves when C = v I.
class GaussianPrior {
 public:
  GaussianPrior(Vector mean, Matrix covariance);
  static GaussianPrior isotropic(Eigen::Index dim, double variance);

  Eigen::Index dim() const { return mean_.size(); }
  const Vector& mean() const { return mean_; }
  const Matrix& covariance() const { return cov_; }

  /// C^-1 v
  Vector precision_apply(const Vector& v) const;
  Matrix precision_matrix() const;
  /// -1/2 (x-m)^T C^-1 (x-m), up to an additive constant
  double log_density(const Vector& x) const;
  /// -C^-1 (x-m)
  Vector score(const Vector& x) const;
  /// L eta with L L^T = C
  Vector factor_apply(const Vector& eta) const;
  Vector sample(RandomStream& rng) const;

 private:
  GaussianPrior() = default;
  Vector mean_;
  Matrix cov_;
  Eigen::LLT<Matrix> llt_;
  bool isotropic_ = false;
  double variance_ = 0.0;
};

/// Observation noise N(0, Sigma); Sigma = eps^2 I in all shipped experiments.
class GaussianNoiseModel {
 public:
  explicit GaussianNoiseModel(Matrix covariance);
  static GaussianNoiseModel isotropic(Eigen::Index dim, double variance);

  Eigen::Index dim() const { return cov_.rows(); }
  const Matrix& covariance() const { return cov_; }
  Vector precision_apply(const Vector& r) const;
  Matrix precision_matrix() const;
  /// r^T Sigma^-1 r
  double quad(const Vector& r) const;

 private:
  GaussianNoiseModel() = default;
  Matrix cov_;
  Eigen::LLT<Matrix> llt_;
  bool isotropic_ = false;
  double variance_ = 0.0;
};

/// Map from parameters to predicted observations, with a Jacobian facility.
/// Points outside the admissible domain signal std::domain_error.
class ForwardModel {
 public:
  virtual ~ForwardModel() = default;
  virtual Eigen::Index input_dim() const = 0;
  virtual Eigen::Index output_dim() const = 0;
  virtual Vector apply(const Vector& x) const = 0;
  virtual Matrix jacobian(const Vector& x) const = 0;
  virtual bool is_linear() const { return false; }
};

/// F x + offset; the Jacobian is F itself.
class LinearForwardModel final : public ForwardModel {
 public:
  explicit LinearForwardModel(Matrix f, Vector offset = Vector());
  Eigen::Index input_dim() const override { return f_.cols(); }
  Eigen::Index output_dim() const override { return f_.rows(); }
  Vector apply(const Vector& x) const override;
  Matrix jacobian(const Vector&) const override { return f_; }
  bool is_linear() const override { return true; }
  const Matrix& matrix() const { return f_; }
  const Vector& offset() const { return offset_; }

 private:
  Matrix f_;
  Vector offset_;
};

/// Samplers only need the log density, its gradient, the data-misfit
/// potential, and a Gaussian prior to draw starting points from.
class Target {
 public:
  virtual ~Target() = default;
  virtual Eigen::Index dim() const = 0;
  virtual TargetEval evaluate(const Vector& x) const = 0;
  /// Data-fidelity term Phi(x); zero for targets without data.
  virtual double potential(const Vector&) const { return 0.0; }
  virtual const GaussianPrior& prior() const = 0;
};

/// Bayesian posterior  pi(x) ~ exp(-Phi(x)) * prior(x)  with
///   Phi(x)  = 1/2 (F(x)-y)^T Sigma^-1 (F(x)-y)
///   score   = -C^-1 (x-m) - J(x)^T Sigma^-1 (F(x)-y).
/// Out-of-domain points evaluate to log density -inf with a zero score.
class Posterior final : public Target {
 public:
  Posterior(std::shared_ptr<const ForwardModel> forward, GaussianPrior prior,
            GaussianNoiseModel noise, Vector data);

  Eigen::Index dim() const override { return prior_.dim(); }
  TargetEval evaluate(const Vector& x) const override;
  double potential(const Vector& x) const override;
  const GaussianPrior& prior() const override { return prior_; }
  const GaussianNoiseModel& noise() const { return noise_; }
  const ForwardModel& forward() const { return *forward_; }
  const Vector& data() const { return data_; }

 private:
  std::shared_ptr<const ForwardModel> forward_;
  GaussianPrior prior_;
  GaussianNoiseModel noise_;
  Vector data_;
};

/// Analytic Gaussian posterior of a linear model.
class LinearGaussianPosterior {
 public:
  LinearGaussianPosterior(Vector mean, Matrix covariance);
  const Vector& mean() const { return mean_; }
  const Matrix& covariance() const { return cov_; }
  double log_density(const Vector& x) const;  // up to a constant

 private:
  Vector mean_;
  Matrix cov_;
  Eigen::LLT<Matrix> llt_;
};

/// Closed-form moments of the posterior for y = F x + noise:
///   C_post = (C^-1 + F^T Sigma^-1 F)^-1,   mu_post = C_post F^T Sigma^-1 y.
LinearGaussianPosterior linear_posterior_moments(const Matrix& f,
                                                 const GaussianPrior& prior,
                                                 const GaussianNoiseModel& noise,
                                                 const Vector& y);

/// Synthetic Gaussian target N(mean, Sigma) with exact sampling; its score
/// outer-product expectation equals the precision matrix.
class GaussianScoreTarget final : public Target {
 public:
  GaussianScoreTarget(Vector mean, Matrix covariance);

  Eigen::Index dim() const override { return prior_.dim(); }
  TargetEval evaluate(const Vector& x) const override;
  const GaussianPrior& prior() const override { return prior_; }

  Vector sample_exact(RandomStream& rng) const { return prior_.sample(rng); }
  /// Sigma^-1
  Matrix precision() const { return prior_.precision_matrix(); }

 private:
  GaussianPrior prior_;
};

inline GaussianScoreTarget gaussian_score_target(Vector mean, Matrix covariance) {
  return GaussianScoreTarget(std::move(mean), std::move(covariance));
}

}  // namespace fmala
