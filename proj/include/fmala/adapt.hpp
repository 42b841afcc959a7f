#pragma once

#include <functional>
#include <stdexcept>
#include <string>

#include "fmala/linalg.hpp"

namespace fmala {

/// Rao-Blackwellized adaptation signal sqrt(alpha) * (score_y - score_x).
/// A zero acceptance probability yields an exact zero vector, so rejected
/// proposals with unusable scores contribute nothing.
Vector fisher_signal(double alpha, const Vector& score_x, const Vector& score_y);

/// Recursive inverse-Fisher square-root estimate. After n updates with
/// signals s_1..s_n the factor satisfies
///   R R^T = (lambda I + sum_i s_i s_i^T)^-1.
/// The factor is the identity until the first update, which switches to the
/// damped initialization; later updates apply the rank-one recursion.
class FisherAdapter {
 public:
  explicit FisherAdapter(Eigen::Index dim, double damping = 10.0);

  void update(const Vector& signal);

  long count() const { return n_; }
  double damping() const { return damping_; }
  const Matrix& sqrt_factor() const { return precond_.factor(); }
  const SqrtPreconditioner& preconditioner() const { return precond_; }
  Matrix matrix() const { return precond_.matrix(); }

 private:
  SqrtPreconditioner precond_;
  double damping_;
  long n_ = 0;
};

/// Running mean / covariance recursion over visited states:
///   mu_n = (n-1)/n mu_{n-1} + x_n / n
///   C_n  = (n-2)/(n-1) C_{n-1} + (x_n - mu_{n-1})(x_n - mu_{n-1})^T / n
/// started with mu_1 = x_1 and C_2 = (x_2 - mu_1)(x_2 - mu_1)^T / 2 + lambda I.
/// A lower-triangular factor with L L^T = C is maintained alongside by
/// scaled rank-one Cholesky updates so proposals never refactorize.
class CovarianceAdapter {
 public:
  explicit CovarianceAdapter(Eigen::Index dim, double damping = 10.0);

  void update(const Vector& x);

  long count() const { return n_; }
  const Vector& mean() const;
  const Matrix& covariance() const;       // defined from the second update on
  const Matrix& sampling_factor() const;  // L, lower triangular
  double trace() const;                   // tr(L L^T)

 private:
  void require_covariance() const;
  Eigen::Index dim_;
  double damping_;
  long n_ = 0;
  Vector mu_;
  Matrix cov_;
  Matrix factor_;
};

/// Multiplicative step-size controller targeting a fixed acceptance rate:
/// sigma^2 <- sigma^2 [1 + rho (alpha - alpha_star)]. Frozen controllers
/// ignore observations; positivity is automatic since rho (alpha - alpha_star)
/// stays far above -1.
class StepSizeController {
 public:
  StepSizeController(double sigma2, double rho = 0.015, double target_accept = 0.574);

  void observe(double alpha);
  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }
  double sigma2() const { return sigma2_; }
  double rho() const { return rho_; }
  double target_accept() const { return target_; }

 private:
  double sigma2_;
  double rho_;
  double target_;
  bool frozen_ = false;
};

/// Step size divided by the average eigenvalue of M = R R^T:
/// sigma_R^2 = sigma^2 / (trace(M) / d).
double normalized_step(double sigma2, double trace_m, Eigen::Index dim);
double normalized_step(const StepSizeController& ctrl, const SqrtPreconditioner& r);

/// Learning-rate schedule gamma_n for the stochastic-approximation update.
struct LearningRateSchedule {
  enum class Kind { InverseN, Power, Constant };
  Kind kind = Kind::InverseN;
  double param = 1.0;  // exponent for Power, value for Constant

  double operator()(long n) const;
  static LearningRateSchedule inverse_n() { return {Kind::InverseN, 1.0}; }
  static LearningRateSchedule power(double kappa) { return {Kind::Power, kappa}; }
  static LearningRateSchedule constant(double value) { return {Kind::Constant, value}; }
  static LearningRateSchedule parse(const std::string& text);
  std::string to_string() const;
};

/// Dense stochastic-approximation estimate of the Fisher matrix:
///   I_1 = s_1 s_1^T + lambda I,
///   I_n = (1 - gamma_n) I_{n-1} + gamma_n s_n s_n^T.
/// With gamma_n = 1/n this reproduces the batch average
/// (sum_i s_i s_i^T + lambda I) / n.
class StochasticFisherEstimate {
 public:
  StochasticFisherEstimate(Eigen::Index dim, double damping,
                           LearningRateSchedule schedule = LearningRateSchedule::inverse_n());

  void update(const Vector& s);

  long count() const { return n_; }
  const Matrix& estimate() const { return ihat_; }

 private:
  double damping_;
  LearningRateSchedule schedule_;
  long n_ = 0;
  Matrix ihat_;
};

}  // namespace fmala
