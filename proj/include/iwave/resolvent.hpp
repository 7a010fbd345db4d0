#pragma once

#include <Eigen/Sparse>
#include <vector>

#include "iwave/spectral.hpp"

namespace iwave {

// The figure convention z = omega^2: (d_x2^2 - z Delta) u = f, i.e.
// (1 - z) u_22 - z u_11 = f.
inline cplx omega_to_z(cplx omega) { return omega * omega; }

// Five-point discretization on the masked nodes of a grid with zero Dirichlet
// values outside. The stencil is symmetric, so the matrix is complex symmetric.
struct ShiftedOperator {
  GridField grid;
  std::vector<long> node;       // unknown -> grid index
  std::vector<long> unknown_of; // grid index -> unknown or -1
  Eigen::SparseMatrix<cplx> A;
  cplx z;
};

ShiftedOperator assemble_shifted(const GridField& grid, cplx z);

struct ShiftedSolve {
  cplx z;
  GridField u;
  double residual = 0;  // |A u - f| / |f| on the unknowns
  long unknowns = 0;
};

// Throws PreconditionError for real z in [0, 1] (hyperbolic) and
// ConditioningError when 0 < |Im z| < 1e-8 or the factorization breaks down.
ShiftedSolve solve_resolvent(const Domain& domain, double h, cplx z, const GridField& f);
ShiftedSolve solve_resolvent(const Domain& domain, double h, cplx z, const ScalarField& f);

// Samples f on the masked nodes of the grid.
GridField sample_field(const GridField& grid, const ScalarField& f);

// Discrete pairing h^2 sum u phi.
cplx pairing(const GridField& u, const ScalarField& phi);

struct LadderRow {
  double eps = 0;
  std::vector<cplx> pairings;
  GridField u;
};

struct Ladder {
  double lambda = 0;
  std::vector<Vec2> test_centers;
  std::vector<LadderRow> rows;
  // max_j |<u_{k+1}, phi_j> - <u_k, phi_j>| for consecutive rows.
  std::vector<double> gaps() const;
};

// Fixed Gaussian test functions exp(-40 |x - c_j|^2): five Halton points at
// distance > 0.2 from the boundary.
std::vector<Vec2> ladder_test_centers(const Domain& domain);

// Solves at z_k = lambda^2 + i eps_k for each eps (descending).
Ladder epsilon_ladder(const Domain& domain, double lambda, double h, const ScalarField& f,
                      const std::vector<double>& eps_list);

}  // namespace iwave
