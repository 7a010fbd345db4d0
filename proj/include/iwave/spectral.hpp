#pragma once

#include <Eigen/Dense>
#include <functional>
#include <utility>
#include <vector>

#include "iwave/billiard.hpp"
#include "iwave/grid_field.hpp"

namespace iwave {

enum class BasisMode { analytic_square, finite_difference };

struct BasisOptions {
  BasisMode mode = BasisMode::analytic_square;
  int K = 400;
  double h = 0.01;  // finite-difference spacing; ignored by the analytic path
};

// Dirichlet eigenfunctions e_a of the domain, L2-normalized, with -Delta e_a =
// mu_a^2 e_a and mu_a^2 ascending.
class EigenBasis {
 public:
  BasisMode mode = BasisMode::analytic_square;
  Domain domain = Domain::ellipse(1, 1);
  int K = 0;
  std::vector<double> mu2;

  // Analytic path: the domain is R_alpha [0,1]^2 and e_a = 2 sin(m pi y1)
  // sin(n pi y2) with y = R_alpha^-1 x.
  double alpha = 0;
  std::vector<std::pair<int, int>> index;

  // Finite-difference path: unknowns are the masked nodes of grid, in
  // row-major order; vectors has one column per mode, h^2-weighted orthonormal.
  GridField grid;
  std::vector<long> node;  // unknown -> grid index
  Eigen::MatrixXd vectors;

  double mu(int a) const { return std::sqrt(mu2[a]); }
  // Analytic modes only.
  double value(int a, const Vec2& x) const;
  Vec2 gradient(int a, const Vec2& x) const;
};

// Throws PreconditionError when the analytic path is asked for a domain that
// is not a tilted unit square, or when K exceeds the number of unknowns.
EigenBasis build_eigenbasis(const Domain& domain, const BasisOptions& opts);

// Orthonormality defect max |<e_a, e_b> - delta_ab| (quadrature for analytic,
// weighted dot products for finite differences).
double orthonormality_defect(const EigenBasis& basis, int max_modes = 0);

// M_ba = mu_a^-1 mu_b^-1 <d_x2 e_a, d_x2 e_b>, the matrix of P in the H^-1
// basis {mu_a e_a}, with its eigendecomposition M = Q diag(d) Q^T.
struct PoincareMatrix {
  Eigen::MatrixXd M, Q;
  Eigen::VectorXd d;
};

PoincareMatrix poincare_matrix(const EigenBasis& basis);

// Gauss-Legendre quadrature of <d_x2 e_a, d_x2 e_b> over the unit square in the
// rotated frame, for checking the closed-form assembly.
double poincare_entry_quadrature(const EigenBasis& basis, int a, int b, int points = 64);

using ScalarField = std::function<double(const Vec2&)>;

// Gaussian exp(-width |x - center|^2).
ScalarField gaussian(const Vec2& center, double width);

// H^-1 coordinates F_a = <f, e_a> / mu_a.
Eigen::VectorXd forcing_coefficients(const EigenBasis& basis, const ScalarField& f);

// Samples sum_a c_a e_a on the grid. Throws DomainError when the grid does
// not belong to the basis domain.
GridField reconstruct_field(const Eigen::VectorXcd& coefficients, const EigenBasis& basis,
                            const GridField& grid, bool complex);
GridField reconstruct_field(const Eigen::VectorXd& coefficients, const EigenBasis& basis,
                            const GridField& grid);

// Nodes whose four neighbors are all inside carry the energy density
// |grad u|^2 from centered differences; tube nodes lie within delta of a chord.
struct Concentration {
  double ratio = 0;          // tube energy / total energy
  double area_fraction = 0;  // tube nodes / energy nodes
  double enhancement() const { return area_fraction > 0 ? ratio / area_fraction : 0; }
};

// Throws PreconditionError for an empty skeleton.
Concentration concentration_metric(const GridField& field, const std::vector<SkeletonSegment>& skeleton,
                                   double delta);

double segment_distance(const Vec2& p, const Vec2& a, const Vec2& b);

}  // namespace iwave
