#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "iwave/geometry.hpp"
#include "iwave/grid_field.hpp"

namespace iwave {

// sqrt(1 - omega^2) on the principal branch (positive on (0, 1)).
cplx sqrt_one_minus_sq(cplx omega);

// c_omega = i sgn(Im omega) / (4 pi omega sqrt(1 - omega^2)).
cplx layer_constant(cplx omega);

// A(x, omega) = ell+ ell- = -x1^2 / omega^2 + x2^2 / (1 - omega^2).
cplx quadratic_form(const Vec2& x, cplx omega);

// E_omega(x) = c_omega log A(x, omega) with the principal logarithm.
// Throws DomainError when Im omega = 0, Re omega is outside (0, 1) or x = 0.
cplx fundamental_solution(const Vec2& x, cplx omega);

// Central-difference L+- g = (1/2)(+-omega d1 g + sqrt(1 - omega^2) d2 g) at x.
cplx apply_L(const std::function<cplx(const Vec2&)>& g, const Vec2& x, cplx omega, Sign s, double h);

// Five-point (1 - omega^2) D22 g - omega^2 D11 g at x.
cplx apply_P(const std::function<cplx(const Vec2&)>& g, const Vec2& x, cplx omega, double h);

// R_omega f at the targets: sum_k E(x - y_k) f(y_k) h^2 over the masked nodes
// of f, with each node cell treated as a constant. Cells next to a target are
// split into 4 x 4 subcells to resolve the log singularity.
std::vector<cplx> volume_potential(const GridField& f, cplx omega, const std::vector<Vec2>& targets);

// Nystrom discretization of the restricted single layer operator
// v -> int E(x - y) v(y) on the boundary. Nodes are uniform in an auxiliary
// parameter s in [0, 2 pi); for polygons each side gets M / corners nodes,
// graded toward the corners with a power-3 map and shifted by half a step so
// that no node sits on a corner. The unknown is the density against ds,
// v_s(s_j) = v(theta_j) dtheta/ds, which keeps the matrix symmetric.
struct LayerKernel {
  LayerKernel(cplx w, Domain d) : omega(w), domain(std::move(d)) {}

  cplx omega;
  Domain domain;
  int M = 0;
  std::vector<double> s, theta, dtheta;  // dtheta = d theta / ds
  std::vector<Vec2> x, dx;               // boundary points and d x / ds
  Eigen::MatrixXcd C;                    // log part by the Kress weights
  Eigen::MatrixXcd E;                    // E(x_i - x_j) off the diagonal, 0 on it

  double step() const { return 2 * kPi / M; }
  double max_spacing() const;
};

// Throws DomainError unless Im omega != 0 and 0 < Re omega < 1, M is even and
// at least 64, and M is divisible by the corner count of a polygon.
LayerKernel boundary_system(const Domain& domain, cplx omega, int M);

// log(4 sin^2((t - s)/2)) quadrature weights R_k for node offset k.
std::vector<double> kress_weights(int M);

struct BoundaryDensity {
  std::vector<double> theta;
  std::vector<cplx> v;    // coefficient against d theta
  std::vector<cplx> v_s;  // coefficient against ds (the Nystrom unknown)
};

struct BieSolution {
  explicit BieSolution(LayerKernel k) : kernel(std::move(k)) {}

  LayerKernel kernel;
  BoundaryDensity density;
  Eigen::VectorXcd rhs;   // (R_omega f) at the boundary nodes
  double condition = 0;   // 1-norm estimate from the LU factorization
  double residual = 0;    // |C v - rhs|_inf / |rhs|_inf
};

// Solves C_omega v = (R_omega f)|boundary. Throws ConditioningError when the
// condition estimate exceeds 1e12.
BieSolution solve_bie(const Domain& domain, cplx omega, const GridField& f, int M = 256);

// Same with a prescribed right-hand side on the boundary nodes.
BieSolution solve_bie(LayerKernel kernel, const Eigen::VectorXcd& rhs);

double condition_estimate(const Eigen::MatrixXcd& C);

struct Reconstruction {
  GridField u;
  std::vector<unsigned char> low_accuracy;  // per grid node, within 2 node spacings
};

// u = (R_omega f) - S_omega v on the masked nodes of grid.
Reconstruction reconstruct(const BieSolution& sol, const GridField& f, const GridField& grid);

// u at arbitrary interior points.
std::vector<cplx> reconstruct_at(const BieSolution& sol, const GridField& f, const std::vector<Vec2>& points);

// Bilinear interpolation of a grid field; nodes outside the mask count as 0.
cplx interpolate(const GridField& u, const Vec2& p);

struct NeumannSamples {
  std::vector<cplx> v;                      // coefficient against d theta
  std::vector<unsigned char> low_accuracy;  // stencil touched an exterior node
};

// -2 omega sqrt(1 - omega^2) (L+ u) d_theta ell+ for s = plus and
// +2 omega sqrt(1 - omega^2) (L- u) d_theta ell- for s = minus. The gradient
// is the inward normal derivative: the slope at the boundary of the
// least-squares quadratic through samples 2h, 3h, ..., 14h inside. The value
// u = 0 on the
// boundary is not used: the five-point grid imposes it on a staircase up to h
// outside the true boundary, which shifts u but not its slope.
NeumannSamples neumann_data(const GridField& u, const Domain& domain, cplx omega,
                            const std::vector<double>& thetas, Sign s = Sign::plus);

// CSV rows theta,Re v,Im v (temp file then rename).
void write_density_csv(const BoundaryDensity& d, const std::string& path);

}  // namespace iwave
