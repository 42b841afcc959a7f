#include "fmala/targets.hpp"

#include <cmath>
#include <utility>

namespace fmala {

namespace {

Eigen::LLT<Matrix> factorize(const Matrix& m, const char* what) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error(std::string(what) + ": matrix is not positive definite");
  }
  return llt;
}

bool looks_isotropic(const Matrix& m, double* variance) {
  const double v = m(0, 0);
  if (!(v > 0.0)) return false;
  if (!m.isApprox(v * Matrix::Identity(m.rows(), m.cols()), 1e-14)) return false;
  *variance = v;
  return true;
}

}  // namespace

GaussianPrior::GaussianPrior(Vector mean, Matrix covariance) {
  if (covariance.rows() != covariance.cols() || covariance.rows() != mean.size()) {
    throw std::invalid_argument("GaussianPrior: dimension mismatch");
  }
  mean_ = std::move(mean);
  cov_ = std::move(covariance);
  llt_ = factorize(cov_, "GaussianPrior");
  isotropic_ = looks_isotropic(cov_, &variance_);
}

GaussianPrior GaussianPrior::isotropic(Eigen::Index dim, double variance) {
  if (!(variance > 0.0)) throw std::invalid_argument("GaussianPrior: variance must be positive");
  return GaussianPrior(Vector::Zero(dim), variance * Matrix::Identity(dim, dim));
}

Vector GaussianPrior::precision_apply(const Vector& v) const {
  if (isotropic_) return v / variance_;
  return llt_.solve(v);
}

Matrix GaussianPrior::precision_matrix() const {
  if (isotropic_) return Matrix::Identity(dim(), dim()) / variance_;
  return llt_.solve(Matrix::Identity(dim(), dim()));
}

double GaussianPrior::log_density(const Vector& x) const {
  const Vector c = x - mean_;
  return -0.5 * c.dot(precision_apply(c));
}

Vector GaussianPrior::score(const Vector& x) const { return -precision_apply(x - mean_); }

Vector GaussianPrior::factor_apply(const Vector& eta) const {
  if (isotropic_) return std::sqrt(variance_) * eta;
  return llt_.matrixL() * eta;
}

Vector GaussianPrior::sample(RandomStream& rng) const {
  return mean_ + factor_apply(rng.normal_vector(dim()));
}

GaussianNoiseModel::GaussianNoiseModel(Matrix covariance) {
  if (covariance.rows() != covariance.cols()) {
    throw std::invalid_argument("GaussianNoiseModel: covariance must be square");
  }
  cov_ = std::move(covariance);
  llt_ = factorize(cov_, "GaussianNoiseModel");
  isotropic_ = looks_isotropic(cov_, &variance_);
}

GaussianNoiseModel GaussianNoiseModel::isotropic(Eigen::Index dim, double variance) {
  if (!(variance > 0.0)) {
    throw std::invalid_argument("GaussianNoiseModel: variance must be positive");
  }
  return GaussianNoiseModel(variance * Matrix::Identity(dim, dim));
}

Vector GaussianNoiseModel::precision_apply(const Vector& r) const {
  if (isotropic_) return r / variance_;
  return llt_.solve(r);
}

Matrix GaussianNoiseModel::precision_matrix() const {
  if (isotropic_) return Matrix::Identity(dim(), dim()) / variance_;
  return llt_.solve(Matrix::Identity(dim(), dim()));
}

double GaussianNoiseModel::quad(const Vector& r) const { return r.dot(precision_apply(r)); }

LinearForwardModel::LinearForwardModel(Matrix f, Vector offset) : f_(std::move(f)) {
  offset_ = offset.size() == 0 ? Vector::Zero(f_.rows()) : std::move(offset);
  if (offset_.size() != f_.rows()) {
    throw std::invalid_argument("LinearForwardModel: offset/row mismatch");
  }
}

Vector LinearForwardModel::apply(const Vector& x) const {
  if (x.size() != f_.cols()) throw std::invalid_argument("LinearForwardModel: bad input size");
  return f_ * x + offset_;
}

Posterior::Posterior(std::shared_ptr<const ForwardModel> forward, GaussianPrior prior,
                     GaussianNoiseModel noise, Vector data)
    : forward_(std::move(forward)),
      prior_(std::move(prior)),
      noise_(std::move(noise)),
      data_(std::move(data)) {
  if (forward_->input_dim() != prior_.dim() || forward_->output_dim() != data_.size() ||
      noise_.dim() != data_.size()) {
    throw std::invalid_argument("Posterior: forward/prior/noise/data dimensions disagree");
  }
}

double Posterior::potential(const Vector& x) const {
  const Vector r = forward_->apply(x) - data_;
  return 0.5 * noise_.quad(r);
}

TargetEval Posterior::evaluate(const Vector& x) const {
  TargetEval ev;
  ev.x = x;
  try {
    const Vector r = forward_->apply(x) - data_;
    const Vector weighted = noise_.precision_apply(r);
    const double phi = 0.5 * r.dot(weighted);
    const Vector grad_phi = forward_->jacobian(x).transpose() * weighted;
    ev.log_density = -phi + prior_.log_density(x);
    ev.score = prior_.score(x) - grad_phi;
  } catch (const std::domain_error&) {
    ev.log_density = -std::numeric_limits<double>::infinity();
    ev.score = Vector::Zero(x.size());
  }
  return ev;
}

LinearGaussianPosterior::LinearGaussianPosterior(Vector mean, Matrix covariance)
    : mean_(std::move(mean)), cov_(std::move(covariance)) {
  llt_ = factorize(cov_, "LinearGaussianPosterior");
}

double LinearGaussianPosterior::log_density(const Vector& x) const {
  const Vector c = x - mean_;
  return -0.5 * c.dot(llt_.solve(c));
}

LinearGaussianPosterior linear_posterior_moments(const Matrix& f, const GaussianPrior& prior,
                                                 const GaussianNoiseModel& noise,
                                                 const Vector& y) {
  if (f.cols() != prior.dim() || f.rows() != noise.dim() || f.rows() != y.size()) {
    throw std::invalid_argument("linear_posterior_moments: dimension mismatch");
  }
  Matrix precision = prior.precision_matrix();
  precision.noalias() += f.transpose() * noise.precision_matrix() * f;
  Eigen::LLT<Matrix> llt(precision);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("linear_posterior_moments: assembled precision is singular");
  }
  Matrix cov = llt.solve(Matrix::Identity(precision.rows(), precision.cols()));
  cov = ((cov + cov.transpose()) / 2.0).eval();
  const Vector mu = cov * (f.transpose() * noise.precision_apply(y));
  return LinearGaussianPosterior(mu, cov);
}

GaussianScoreTarget::GaussianScoreTarget(Vector mean, Matrix covariance)
    : prior_(std::move(mean), std::move(covariance)) {}

TargetEval GaussianScoreTarget::evaluate(const Vector& x) const {
  TargetEval ev;
  ev.x = x;
  ev.log_density = prior_.log_density(x);
  ev.score = prior_.score(x);
  return ev;
}

}  // namespace fmala
