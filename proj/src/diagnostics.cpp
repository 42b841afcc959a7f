#include "fmala/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace fmala {

AcfResult acf(const Eigen::Ref<const Vector>& series, int max_lag) {
  const Eigen::Index n = series.size();
  if (max_lag < 1) throw std::invalid_argument("acf: lag limit must be at least 1");
  if (n <= max_lag) throw std::invalid_argument("acf: series shorter than lag limit");
  const Vector centered = series.array() - series.mean();
  const double gamma0 = centered.squaredNorm();
  if (!(gamma0 > 0.0)) throw std::invalid_argument("acf: zero-variance series");
  AcfResult out;
  out.lag = max_lag;
  out.rho.resize(max_lag + 1);
  out.rho[0] = 1.0;
  for (int k = 1; k <= max_lag; ++k) {
    out.rho[k] = centered.head(n - k).dot(centered.tail(n - k)) / gamma0;
  }
  return out;
}

EssReport ess(const Eigen::Ref<const Matrix>& chain, int max_lag) {
  const Eigen::Index n = chain.rows();
  const Eigen::Index d = chain.cols();
  if (d < 1) throw std::invalid_argument("ess: empty chain");
  EssReport report;
  report.n_samples = n;
  report.lag = max_lag;
  report.iat.resize(d);
  report.ess.resize(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const AcfResult a = acf(chain.col(j), max_lag);
    const double tau = std::max(1.0, 1.0 + 2.0 * a.rho.tail(max_lag).sum());
    report.iat[j] = tau;
    report.ess[j] = static_cast<double>(n) / tau;
  }
  report.ess_monolithic = static_cast<double>(n) / report.iat.maxCoeff();
  return report;
}

double relative_error(const Vector& estimate, const Vector& truth) {
  if (estimate.size() != truth.size()) throw std::invalid_argument("relative_error: size mismatch");
  const double denom = truth.norm();
  if (!(denom > 0.0)) throw std::invalid_argument("relative_error: zero truth norm");
  return (estimate - truth).norm() / denom * 100.0;
}

Vector precond_convergence(const std::vector<Matrix>& snapshots, const Matrix& reference) {
  const Matrix ref = trace_normalize(reference);
  Vector curve(static_cast<Eigen::Index>(snapshots.size()));
  for (std::size_t i = 0; i < snapshots.size(); ++i) {
    if (snapshots[i].rows() != ref.rows()) {
      throw std::invalid_argument("precond_convergence: snapshot dimension mismatch");
    }
    curve[static_cast<Eigen::Index>(i)] = (trace_normalize(snapshots[i]) - ref).norm();
  }
  return curve;
}

Vector precond_convergence(const std::vector<PrecondSnapshot>& snapshots,
                           const Matrix& reference) {
  std::vector<Matrix> ms;
  ms.reserve(snapshots.size());
  for (const auto& snap : snapshots) ms.push_back(snap.m);
  return precond_convergence(ms, reference);
}

double esjd(const ChainRecord& record) {
  if (record.collection < 2) throw std::invalid_argument("esjd: need at least two samples");
  const auto block = record.collection_samples();
  double total = 0.0;
  for (Eigen::Index i = 0; i + 1 < block.rows(); ++i) {
    total += (block.row(i + 1) - block.row(i)).squaredNorm();
  }
  return total / static_cast<double>(block.rows() - 1);
}

double loglog_slope(const std::vector<long>& x, const Vector& y) {
  if (x.size() < 2 || static_cast<Eigen::Index>(x.size()) != y.size()) {
    throw std::invalid_argument("loglog_slope: need matching arrays of length >= 2");
  }
  const Eigen::Index n = y.size();
  Vector lx(n), ly(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    lx[i] = std::log(static_cast<double>(x[static_cast<std::size_t>(i)]));
    ly[i] = std::log(y[i]);
  }
  const double mx = lx.mean();
  const double my = ly.mean();
  const double sxx = (lx.array() - mx).square().sum();
  const double sxy = ((lx.array() - mx) * (ly.array() - my)).sum();
  return sxy / sxx;
}

RateCurve rate_experiment(const GaussianScoreTarget& target, const LearningRateSchedule& schedule,
                          long n_max, int replicates, std::uint64_t seed, int checkpoints,
                          long n_min, double damping) {
  if (replicates < 1) throw std::invalid_argument("rate_experiment: need at least one replicate");
  if (n_max <= n_min || n_min < 1) throw std::invalid_argument("rate_experiment: bad n range");
  const Matrix fisher = target.precision();
  const Eigen::Index d = target.dim();

  std::set<long> marks;
  const int points = std::max(checkpoints, 2);
  for (int i = 0; i < points; ++i) {
    const double t = std::log(static_cast<double>(n_min)) +
                     (std::log(static_cast<double>(n_max)) - std::log(static_cast<double>(n_min))) *
                         static_cast<double>(i) / (points - 1);
    marks.insert(std::clamp<long>(std::lround(std::exp(t)), n_min, n_max));
  }

  RateCurve curve;
  curve.n.assign(marks.begin(), marks.end());
  curve.mse = Vector::Zero(static_cast<Eigen::Index>(curve.n.size()));

  for (int rep = 0; rep < replicates; ++rep) {
    RandomStream rng(derive_seed(seed, static_cast<std::uint64_t>(rep)));
    StochasticFisherEstimate estimate(d, damping, schedule);
    std::size_t next = 0;
    for (long n = 1; n <= n_max && next < curve.n.size(); ++n) {
      const Vector x = target.sample_exact(rng);
      estimate.update(target.evaluate(x).score);
      if (n == curve.n[next]) {
        curve.mse[static_cast<Eigen::Index>(next)] += (estimate.estimate() - fisher).squaredNorm();
        ++next;
      }
    }
  }
  curve.mse /= static_cast<double>(replicates);
  curve.slope = loglog_slope(curve.n, curve.mse);
  return curve;
}

}  // namespace fmala
