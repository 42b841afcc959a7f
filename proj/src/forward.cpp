#include "fmala/forward.hpp"

#include <cmath>
#include <numbers>

namespace fmala {

namespace {
constexpr double kPi = std::numbers::pi;
}

TridiagonalSolver::TridiagonalSolver(Vector lower, Vector diag, Vector upper)
    : lower_(std::move(lower)) {
  const Eigen::Index n = diag.size();
  if (lower_.size() != n - 1 || upper.size() != n - 1) {
    throw std::invalid_argument("TridiagonalSolver: band sizes must be n-1");
  }
  denom_.resize(n);
  cprime_.resize(n - 1);
  denom_[0] = diag[0];
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    if (denom_[i] == 0.0) throw std::runtime_error("TridiagonalSolver: zero pivot");
    cprime_[i] = upper[i] / denom_[i];
    denom_[i + 1] = diag[i + 1] - lower_[i] * cprime_[i];
  }
  if (denom_[n - 1] == 0.0) throw std::runtime_error("TridiagonalSolver: zero pivot");
}

Vector TridiagonalSolver::solve(Vector rhs) const {
  const Eigen::Index n = denom_.size();
  if (rhs.size() != n) throw std::invalid_argument("TridiagonalSolver: rhs size mismatch");
  rhs[0] /= denom_[0];
  for (Eigen::Index i = 1; i < n; ++i) {
    rhs[i] = (rhs[i] - lower_[i - 1] * rhs[i - 1]) / denom_[i];
  }
  for (Eigen::Index i = n - 2; i >= 0; --i) {
    rhs[i] -= cprime_[i] * rhs[i + 1];
  }
  return rhs;
}

namespace {

TridiagonalSolver heat_step_solver(int nx, double r) {
  // (1 + 2r) on the diagonal, -r off-diagonal, r = dt / (2 h^2)
  Vector diag = Vector::Constant(nx, 1.0 + 2.0 * r);
  Vector off = Vector::Constant(nx - 1, -r);
  return TridiagonalSolver(off, diag, off);
}

}  // namespace

HeatSourceOperator::HeatSourceOperator(int nx, int nt, double final_time)
    : nx_(nx),
      nt_(nt),
      time_(final_time),
      dt_(final_time / nt),
      h_(1.0 / (nx + 1)),
      step_solver_(heat_step_solver(nx, (final_time / nt) / (2.0 * (1.0 / (nx + 1)) * (1.0 / (nx + 1))))) {
  if (nx < 2 || nt < 2) throw std::invalid_argument("HeatSourceOperator: nx, nt must be >= 2");
  if (!(final_time > 0.0)) throw std::invalid_argument("HeatSourceOperator: final time must be positive");

  const Vector x = grid();
  Vector u0(nx_);
  for (int i = 0; i < nx_; ++i) u0[i] = std::sin(kPi * x[i]);
  init_contrib_ = solve(Vector::Zero(nx_), u0);

  source_map_.resize(nx_, nx_);
  Vector basis = Vector::Zero(nx_);
  for (int j = 0; j < nx_; ++j) {
    basis[j] = 1.0;
    source_map_.col(j) = solve(basis, Vector::Zero(nx_));
    basis[j] = 0.0;
  }
}

Vector HeatSourceOperator::grid() const {
  Vector x(nx_);
  for (int i = 0; i < nx_; ++i) x[i] = (i + 1) * h_;
  return x;
}

Vector HeatSourceOperator::solve(const Vector& f, const Vector& u0) const {
  if (f.size() != nx_ || u0.size() != nx_) {
    throw std::invalid_argument("HeatSourceOperator: nodal vector size mismatch");
  }
  const double r = dt_ / (2.0 * h_ * h_);
  Vector u = u0;
  Vector rhs(nx_);
  for (int step = 0; step < nt_; ++step) {
    // rhs = (I + dt/2 Lap) u + dt f
    for (int i = 0; i < nx_; ++i) {
      const double left = i > 0 ? u[i - 1] : 0.0;
      const double right = i + 1 < nx_ ? u[i + 1] : 0.0;
      rhs[i] = (1.0 - 2.0 * r) * u[i] + r * (left + right) + dt_ * f[i];
    }
    u = step_solver_.solve(rhs);
  }
  return u;
}

SyntheticDataset heat_synthesize(const HeatSourceOperator& fine, int inverse_nx,
                                 const std::function<double(double)>& truth_source,
                                 double eps, std::uint64_t seed) {
  if ((fine.nx() + 1) % (inverse_nx + 1) != 0 || fine.nx() <= inverse_nx) {
    throw std::invalid_argument(
        "heat_synthesize: data grid must strictly refine the inversion grid");
  }
  if (eps < 0.0) throw std::invalid_argument("heat_synthesize: negative noise level");
  const int stride = (fine.nx() + 1) / (inverse_nx + 1);

  const Vector xf = fine.grid();
  Vector f_fine(fine.nx());
  for (int j = 0; j < fine.nx(); ++j) f_fine[j] = truth_source(xf[j]);
  const Vector u_fine = fine.apply(f_fine);

  SyntheticDataset out;
  out.noise_level = eps;
  out.seed = seed;
  out.nx_data = fine.nx();
  out.nx_inverse = inverse_nx;
  out.y.resize(inverse_nx);
  out.truth.resize(inverse_nx);
  const double h_inv = 1.0 / (inverse_nx + 1);
  for (int i = 0; i < inverse_nx; ++i) {
    out.y[i] = u_fine[stride * (i + 1) - 1];
    out.truth[i] = truth_source((i + 1) * h_inv);
  }
  if (eps > 0.0) {
    RandomStream rng(seed);
    out.y += eps * rng.normal_vector(inverse_nx);
  }
  return out;
}

Vector trig_coefficient(const Vector& theta, const Vector& nodes) {
  if (theta.size() % 2 == 0 || theta.size() < 1) {
    throw std::invalid_argument("trig_coefficient: basis size must be odd");
  }
  Vector q = Vector::Constant(nodes.size(), theta[0]);
  const Eigen::Index pairs = (theta.size() - 1) / 2;
  for (Eigen::Index k = 1; k <= pairs; ++k) {
    for (Eigen::Index i = 0; i < nodes.size(); ++i) {
      const double w = 2.0 * kPi * static_cast<double>(k) * nodes[i];
      q[i] += theta[2 * k - 1] * std::sin(w) + theta[2 * k] * std::cos(w);
    }
  }
  return q;
}

Vector neumann_solve(const Vector& q, const Vector& f, double h) {
  const Eigen::Index n = q.size();
  if (f.size() != n || n < 3) throw std::invalid_argument("neumann_solve: bad node count");
  if (!(q.minCoeff() > 0.0)) {
    throw std::domain_error("neumann_solve: coefficient must be positive on the grid");
  }
  const double w = 1.0 / (h * h);
  Vector diag(n);
  Vector lower(n - 1);
  Vector upper(n - 1);
  Vector rhs = f;
  // Boundary rows carry the ghost-point elimination, halved for symmetry.
  diag[0] = w + 0.5 * q[0];
  upper[0] = -w;
  rhs[0] = 0.5 * f[0];
  for (Eigen::Index i = 1; i + 1 < n; ++i) {
    diag[i] = 2.0 * w + q[i];
    lower[i - 1] = -w;
    upper[i] = -w;
  }
  diag[n - 1] = w + 0.5 * q[n - 1];
  lower[n - 2] = -w;
  rhs[n - 1] = 0.5 * f[n - 1];
  return TridiagonalSolver(lower, diag, upper).solve(rhs);
}

Matrix frechet_fd(const ForwardModel& model, const Vector& theta, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("frechet_fd: step must be positive");
  const Vector base = model.apply(theta);
  Matrix jac(model.output_dim(), theta.size());
  Vector perturbed = theta;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double hi = step * std::max(1.0, std::abs(theta[i]));
    perturbed[i] = theta[i] + hi;
    try {
      jac.col(i) = (model.apply(perturbed) - base) / hi;
    } catch (const std::domain_error& err) {
      throw std::domain_error("frechet_fd: column " + std::to_string(i) +
                              " left the admissible domain: " + err.what());
    }
    perturbed[i] = theta[i];
  }
  return jac;
}

NeumannBvpModel::NeumannBvpModel(int basis_dim, int nx, std::function<double(double)> source,
                                 double fd_step)
    : basis_dim_(basis_dim), nx_(nx), h_(1.0 / nx), fd_step_(fd_step) {
  if (basis_dim < 1 || basis_dim % 2 == 0) {
    throw std::invalid_argument("NeumannBvpModel: basis size must be odd and positive");
  }
  if (nx < 4) throw std::invalid_argument("NeumannBvpModel: nx too small");
  nodes_.resize(nx_ + 1);
  source_.resize(nx_ + 1);
  for (int j = 0; j <= nx_; ++j) {
    nodes_[j] = j * h_;
    source_[j] = source(nodes_[j]);
  }
}

Vector NeumannBvpModel::solve_full(const Vector& theta) const {
  if (theta.size() != basis_dim_) throw std::invalid_argument("NeumannBvpModel: theta size mismatch");
  return neumann_solve(coefficient(theta), source_, h_);
}

Vector NeumannBvpModel::apply(const Vector& theta) const {
  return solve_full(theta).segment(1, nx_ - 1);
}

Matrix NeumannBvpModel::jacobian(const Vector& theta) const {
  return frechet_fd(*this, theta, fd_step_);
}

SyntheticDataset neumann_synthesize(const NeumannBvpModel& fine, const NeumannBvpModel& coarse,
                                    const Vector& theta_truth, double eps, std::uint64_t seed) {
  if (fine.nx() % coarse.nx() != 0 || fine.nx() <= coarse.nx()) {
    throw std::invalid_argument(
        "neumann_synthesize: data grid must strictly refine the inversion grid");
  }
  const int stride = fine.nx() / coarse.nx();
  const Vector u_fine = fine.solve_full(theta_truth);

  SyntheticDataset out;
  out.noise_level = eps;
  out.seed = seed;
  out.nx_data = fine.nx();
  out.nx_inverse = coarse.nx();
  out.truth = theta_truth;
  out.y.resize(coarse.output_dim());
  for (Eigen::Index i = 0; i < out.y.size(); ++i) {
    out.y[i] = u_fine[stride * (i + 1)];
  }
  if (eps > 0.0) {
    RandomStream rng(seed);
    out.y += eps * rng.normal_vector(out.y.size());
  }
  return out;
}

}  // namespace fmala
