#pragma once

#include <Eigen/Dense>
#include <vector>

#include "iwave/spectral.hpp"

namespace iwave {

// W_{t,lambda}(z) = int_0^t sin(s sqrt z) / sqrt z e^{-i lambda s} ds for z >= 0,
// from the two-term closed form with Taylor branches at the removable
// singularities sqrt z = lambda and z = 0.
cplx W_function(double t, double lambda, double z);

// Forced problem w'' + M w = F cos(lambda t), w(0) = w'(0) = 0, in H^-1
// coordinates, solved through the eigendecomposition of M.
class ForcedEvolution {
 public:
  // Throws DomainError unless 0 < lambda < 1.
  ForcedEvolution(const EigenBasis& basis, const PoincareMatrix& matrix, Eigen::VectorXd F, double lambda);

  double lambda() const { return lambda_; }
  const Eigen::VectorXd& forcing() const { return F_; }

  // w(t) = Re(e^{i lambda t} Q W_t(d) Q^T F)
  Eigen::VectorXd w_coefficients(double t) const;
  // u = Delta^-1 w against {e_a}: u_a = -w_a / mu_a.
  Eigen::VectorXd u_coefficients(double t) const;
  // Second time derivative of w(t) from the closed form.
  Eigen::VectorXd w_acceleration(double t) const;

  // (2/T) sum_k u(t_k) e^{-i lambda t_k} dt over t_k in [T, 2T), with
  // samples_per_period >= 64 samples per forcing period.
  Eigen::VectorXcd profile_coefficients(double T, int samples_per_period = 64) const;

 private:
  const EigenBasis* basis_;
  const PoincareMatrix* matrix_;
  Eigen::VectorXd F_, G_;  // G = Q^T F
  double lambda_;
};

// u-coefficients of Delta^-1 (P - z)^-1 f, i.e. the solution of
// (d_x2^2 - z Delta) u = f in the basis.
Eigen::VectorXcd resolvent_u_coefficients(const EigenBasis& basis, const PoincareMatrix& matrix,
                                          const Eigen::VectorXd& F, cplx z);

// Classical RK4 for the same system; returns w at each requested time.
std::vector<Eigen::VectorXd> integrate_forced_rk4(const Eigen::MatrixXd& M, const Eigen::VectorXd& F,
                                                  double lambda, const std::vector<double>& times,
                                                  double dt);

// (2/T) sum u(t_k) e^{-i lambda t_k} dt over equispaced snapshots covering a
// window of length T. Throws PreconditionError when the sampling is uneven or
// coarser than 64 samples per forcing period.
GridField extract_profile(const std::vector<GridField>& snapshots, const std::vector<double>& times,
                          double lambda);

}  // namespace iwave
