#include "fmala/adapt.hpp"

#include <cmath>

namespace fmala {

Vector fisher_signal(double alpha, const Vector& score_x, const Vector& score_y) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("fisher_signal: alpha must lie in [0, 1]");
  }
  if (alpha <= 0.0) return Vector::Zero(score_x.size());
  return std::sqrt(alpha) * (score_y - score_x);
}

FisherAdapter::FisherAdapter(Eigen::Index dim, double damping)
    : precond_(dim), damping_(damping) {
  if (!(damping > 0.0)) throw std::invalid_argument("FisherAdapter: damping must be positive");
}

void FisherAdapter::update(const Vector& signal) {
  if (signal.size() != precond_.dim()) {
    throw std::invalid_argument("FisherAdapter: signal dimension mismatch");
  }
  if (n_ == 0) {
    precond_ = SqrtPreconditioner::init(signal, damping_);
  } else {
    precond_.rank_one_update(signal);
  }
  ++n_;
}

CovarianceAdapter::CovarianceAdapter(Eigen::Index dim, double damping)
    : dim_(dim), damping_(damping) {
  if (!(damping > 0.0)) throw std::invalid_argument("CovarianceAdapter: damping must be positive");
}

void CovarianceAdapter::update(const Vector& x) {
  if (x.size() != dim_) throw std::invalid_argument("CovarianceAdapter: dimension mismatch");
  if (n_ == 0) {
    mu_ = x;
    n_ = 1;
    return;
  }
  if (n_ == 1) {
    const Vector v = x - mu_;
    cov_ = 0.5 * (v * v.transpose()) + damping_ * Matrix::Identity(dim_, dim_);
    Eigen::LLT<Matrix> llt(cov_);
    factor_ = llt.matrixL();
    mu_ = 0.5 * (mu_ + x);
    n_ = 2;
    return;
  }
  const long n = n_ + 1;
  const double a = static_cast<double>(n - 2) / static_cast<double>(n - 1);
  const double b = 1.0 / static_cast<double>(n);
  const Vector v = x - mu_;
  cov_ *= a;
  cov_.noalias() += b * (v * v.transpose());
  factor_ *= std::sqrt(a);
  cholesky_rank_one_update(factor_, Vector(std::sqrt(b) * v));
  mu_ = (static_cast<double>(n - 1) * mu_ + x) / static_cast<double>(n);
  n_ = n;
}

const Vector& CovarianceAdapter::mean() const {
  if (n_ < 1) throw std::logic_error("CovarianceAdapter: mean undefined before first update");
  return mu_;
}

void CovarianceAdapter::require_covariance() const {
  if (n_ < 2) {
    throw std::logic_error("CovarianceAdapter: covariance undefined before two updates");
  }
}

const Matrix& CovarianceAdapter::covariance() const {
  require_covariance();
  return cov_;
}

const Matrix& CovarianceAdapter::sampling_factor() const {
  require_covariance();
  return factor_;
}

double CovarianceAdapter::trace() const {
  require_covariance();
  return factor_.squaredNorm();
}

StepSizeController::StepSizeController(double sigma2, double rho, double target_accept)
    : sigma2_(sigma2), rho_(rho), target_(target_accept) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("StepSizeController: sigma2 must be positive");
  if (!(rho > 0.0 && rho < 1.0)) {
    throw std::invalid_argument("StepSizeController: rho must lie in (0, 1)");
  }
  if (!(target_accept > 0.0 && target_accept < 1.0)) {
    throw std::invalid_argument("StepSizeController: target acceptance must lie in (0, 1)");
  }
}

void StepSizeController::observe(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("StepSizeController: alpha must lie in [0, 1]");
  }
  if (frozen_) return;
  sigma2_ *= 1.0 + rho_ * (alpha - target_);
}

double normalized_step(double sigma2, double trace_m, Eigen::Index dim) {
  if (!(trace_m > 0.0)) throw std::invalid_argument("normalized_step: trace must be positive");
  return sigma2 / (trace_m / static_cast<double>(dim));
}

double normalized_step(const StepSizeController& ctrl, const SqrtPreconditioner& r) {
  return normalized_step(ctrl.sigma2(), r.trace(), r.dim());
}

double LearningRateSchedule::operator()(long n) const {
  double g = 0.0;
  switch (kind) {
    case Kind::InverseN:
      g = 1.0 / static_cast<double>(n);
      break;
    case Kind::Power:
      g = std::pow(static_cast<double>(n), -param);
      break;
    case Kind::Constant:
      g = param;
      break;
  }
  if (!(g > 0.0 && g <= 1.0)) {
    throw std::invalid_argument("LearningRateSchedule: gamma_n must lie in (0, 1]");
  }
  return g;
}

LearningRateSchedule LearningRateSchedule::parse(const std::string& text) {
  if (text == "1/n" || text == "inverse" || text == "inverse_n") return inverse_n();
  const auto colon = text.find(':');
  if (colon != std::string::npos) {
    const std::string head = text.substr(0, colon);
    const double value = std::stod(text.substr(colon + 1));
    if (head == "power") return power(value);
    if (head == "const" || head == "constant") return constant(value);
  }
  throw std::invalid_argument("LearningRateSchedule: cannot parse '" + text + "'");
}

std::string LearningRateSchedule::to_string() const {
  switch (kind) {
    case Kind::InverseN:
      return "1/n";
    case Kind::Power:
      return "power:" + std::to_string(param);
    case Kind::Constant:
      return "const:" + std::to_string(param);
  }
  return "?";
}

StochasticFisherEstimate::StochasticFisherEstimate(Eigen::Index dim, double damping,
                                                   LearningRateSchedule schedule)
    : damping_(damping), schedule_(schedule), ihat_(Matrix::Zero(dim, dim)) {
  if (!(damping >= 0.0)) {
    throw std::invalid_argument("StochasticFisherEstimate: damping must be nonnegative");
  }
}

void StochasticFisherEstimate::update(const Vector& s) {
  if (s.size() != ihat_.rows()) {
    throw std::invalid_argument("StochasticFisherEstimate: dimension mismatch");
  }
  ++n_;
  if (n_ == 1) {
    ihat_ = s * s.transpose() + damping_ * Matrix::Identity(s.size(), s.size());
    return;
  }
  const double gamma = schedule_(n_);
  ihat_ *= 1.0 - gamma;
  ihat_.noalias() += gamma * (s * s.transpose());
}

}  // namespace fmala
