#pragma once

#include <cstdint>
#include <functional>

#include "fmala/targets.hpp"

namespace fmala {

/// Tridiagonal solve with a stored Thomas factorization; no pivoting, meant
/// for the diagonally dominant systems assembled here.
class TridiagonalSolver {
 public:
  TridiagonalSolver(Vector lower, Vector diag, Vector upper);
  Vector solve(Vector rhs) const;
  Eigen::Index size() const { return denom_.size(); }

 private:
  Vector lower_;
  Vector denom_;   // pivots of the forward sweep
  Vector cprime_;  // normalized upper coefficients
};

/// Final-time observation operator of u_t - u_xx = f(x) on (0,1) with
/// homogeneous Dirichlet walls and u(x,0) = sin(pi x), discretized on nx
/// interior nodes with Crank-Nicolson stepping. apply(f) = F f + g, where
/// the columns of F are unit nodal sources propagated with a zero initial
/// state and g carries the initial condition alone.
class HeatSourceOperator {
 public:
  HeatSourceOperator(int nx, int nt, double final_time);

  int nx() const { return nx_; }
  int nt() const { return nt_; }
  double final_time() const { return time_; }
  Vector grid() const;  // interior nodes i/(nx+1)

  /// Final state from nodal source f and nodal initial state u0.
  Vector solve(const Vector& f, const Vector& u0) const;
  Vector apply(const Vector& f) const { return source_map_ * f + init_contrib_; }
  const Matrix& source_map() const { return source_map_; }
  const Vector& initial_contribution() const { return init_contrib_; }

 private:
  int nx_;
  int nt_;
  double time_;
  double dt_;
  double h_;
  TridiagonalSolver step_solver_;
  Matrix source_map_;
  Vector init_contrib_;
};

inline HeatSourceOperator heat_assemble(int nx, int nt, double final_time) {
  return HeatSourceOperator(nx, nt, final_time);
}

/// Observations generated on a strictly finer grid than the inversion grid,
/// then restricted by index subsampling.
struct SyntheticDataset {
  Vector y;
  double noise_level = 0.0;
  Vector truth;  // exact parameter on the inversion grid
  std::uint64_t seed = 0;
  int nx_data = 0;
  int nx_inverse = 0;
};

SyntheticDataset heat_synthesize(const HeatSourceOperator& fine, int inverse_nx,
                                 const std::function<double(double)>& truth_source,
                                 double eps, std::uint64_t seed);

/// q(x; theta) = theta_0 + sum_k [theta_{2k-1} sin(2 pi k x) + theta_{2k} cos(2 pi k x)]
/// evaluated at the given nodes; theta must have odd length.
Vector trig_coefficient(const Vector& theta, const Vector& nodes);

/// Second-order centered scheme for -u'' + q u = f on (0,1) with zero-flux
/// boundaries (ghost-point elimination, boundary rows halved so the system
/// stays symmetric). q and f live on the full node set 0..nx; requires
/// q > 0 everywhere, otherwise throws std::domain_error.
Vector neumann_solve(const Vector& q, const Vector& f, double h);

/// Jacobian by one-sided perturbation differences, column i using
/// step * max(1, |theta_i|).
Matrix frechet_fd(const ForwardModel& model, const Vector& theta, double step);

/// Parameter-to-state map of the Neumann problem; the observation is the
/// state at the strictly interior nodes.
class NeumannBvpModel final : public ForwardModel {
 public:
  NeumannBvpModel(int basis_dim, int nx, std::function<double(double)> source,
                  double fd_step = 1e-6);

  Eigen::Index input_dim() const override { return basis_dim_; }
  Eigen::Index output_dim() const override { return nx_ - 1; }
  Vector apply(const Vector& theta) const override;
  Matrix jacobian(const Vector& theta) const override;

  int nx() const { return nx_; }
  const Vector& nodes() const { return nodes_; }
  Vector coefficient(const Vector& theta) const { return trig_coefficient(theta, nodes_); }
  Vector solve_full(const Vector& theta) const;  // state on all nodes 0..nx

 private:
  int basis_dim_;
  int nx_;
  double h_;
  double fd_step_;
  Vector nodes_;
  Vector source_;
};

SyntheticDataset neumann_synthesize(const NeumannBvpModel& fine, const NeumannBvpModel& coarse,
                                    const Vector& theta_truth, double eps, std::uint64_t seed);

}  // namespace fmala
