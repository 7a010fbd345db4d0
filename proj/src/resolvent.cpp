#include "iwave/resolvent.hpp"

#include <Eigen/SparseLU>
#include <cmath>

#include "iwave/errors.hpp"

namespace iwave {

ShiftedOperator assemble_shifted(const GridField& grid, cplx z) {
  ShiftedOperator op;
  op.grid = grid;
  op.z = z;
  op.unknown_of.assign(grid.size(), -1);
  for (size_t k = 0; k < grid.size(); ++k)
    if (grid.mask[k]) {
      op.unknown_of[k] = static_cast<long>(op.node.size());
      op.node.push_back(static_cast<long>(k));
    }
  const double ih2 = 1.0 / (grid.h * grid.h);
  const cplx c22 = (1.0 - z) * ih2, c11 = -z * ih2;
  std::vector<Eigen::Triplet<cplx>> trip;
  trip.reserve(op.node.size() * 5);
  for (size_t u = 0; u < op.node.size(); ++u) {
    int i = static_cast<int>(op.node[u] % grid.nx), j = static_cast<int>(op.node[u] / grid.nx);
    trip.emplace_back(u, u, -2.0 * (c11 + c22));
    auto link = [&](int ii, int jj, cplx c) {
      if (grid.inside(ii, jj)) trip.emplace_back(u, op.unknown_of[grid.index(ii, jj)], c);
    };
    link(i + 1, j, c11);
    link(i - 1, j, c11);
    link(i, j + 1, c22);
    link(i, j - 1, c22);
  }
  op.A.resize(op.node.size(), op.node.size());
  op.A.setFromTriplets(trip.begin(), trip.end());
  op.A.makeCompressed();
  return op;
}

GridField sample_field(const GridField& grid, const ScalarField& f) {
  GridField out = grid;
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) {
      size_t k = grid.index(i, j);
      out.values[k] = grid.mask[k] ? cplx(f(grid.point(i, j))) : cplx(0);
    }
  return out;
}

ShiftedSolve solve_resolvent(const Domain& domain, double h, cplx z, const GridField& f) {
  // Real shifts outside [0, 1] give an elliptic operator and are allowed.
  if (z.imag() == 0 && z.real() >= 0 && z.real() <= 1)
    throw PreconditionError("shifted solve needs Im z != 0 or a real z outside [0, 1]");
  if (z.imag() != 0 && std::abs(z.imag()) < 1e-8)
    throw ConditioningError("|Im z| below 1e-8: increase the imaginary part of the shift");
  GridField grid = make_grid(domain, h, true);
  if (!f.same_grid(grid)) throw DomainError("forcing is not sampled on the solver grid");
  ShiftedOperator op = assemble_shifted(grid, z);
  const long n = static_cast<long>(op.node.size());
  Eigen::VectorXcd rhs(n);
  for (long u = 0; u < n; ++u) rhs[u] = f.values[op.node[u]];

  Eigen::SparseLU<Eigen::SparseMatrix<cplx>, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(op.A);
  if (lu.info() != Eigen::Success) throw ConditioningError("sparse factorization of the shifted operator failed");
  Eigen::VectorXcd x = lu.solve(rhs);
  if (lu.info() != Eigen::Success || !x.allFinite()) throw ConditioningError("shifted solve produced no finite solution");

  ShiftedSolve out;
  out.z = z;
  out.unknowns = n;
  double fn = rhs.norm();
  out.residual = fn > 0 ? (op.A * x - rhs).norm() / fn : (op.A * x).norm();
  out.u = grid;
  for (long u = 0; u < n; ++u) out.u.values[op.node[u]] = x[u];
  return out;
}

ShiftedSolve solve_resolvent(const Domain& domain, double h, cplx z, const ScalarField& f) {
  return solve_resolvent(domain, h, z, sample_field(make_grid(domain, h, true), f));
}

cplx pairing(const GridField& u, const ScalarField& phi) {
  cplx s = 0;
  for (int j = 0; j < u.ny; ++j)
    for (int i = 0; i < u.nx; ++i)
      if (u.inside(i, j)) s += u.values[u.index(i, j)] * phi(u.point(i, j));
  return s * (u.h * u.h);
}

std::vector<double> Ladder::gaps() const {
  std::vector<double> g;
  for (size_t k = 1; k < rows.size(); ++k) {
    double m = 0;
    for (size_t j = 0; j < rows[k].pairings.size(); ++j)
      m = std::max(m, std::abs(rows[k].pairings[j] - rows[k - 1].pairings[j]));
    g.push_back(m);
  }
  return g;
}

std::vector<Vec2> ladder_test_centers(const Domain& domain) {
  BoundingBox box = domain.bounding_box();
  Halton h;
  std::vector<Vec2> out;
  for (int tries = 0; out.size() < 5 && tries < 100000; ++tries) {
    Vec2 u = h.next2();
    Vec2 p(box.lo.x() + u.x() * (box.hi.x() - box.lo.x()), box.lo.y() + u.y() * (box.hi.y() - box.lo.y()));
    if (domain.contains(p) && domain.distance_to_boundary(p) > 0.2) out.push_back(p);
  }
  if (out.size() < 5) throw GeometryError("domain too thin for ladder test functions");
  return out;
}

Ladder epsilon_ladder(const Domain& domain, double lambda, double h, const ScalarField& f,
                      const std::vector<double>& eps_list) {
  Ladder L;
  L.lambda = lambda;
  L.test_centers = ladder_test_centers(domain);
  GridField rhs = sample_field(make_grid(domain, h, true), f);
  for (double eps : eps_list) {
    ShiftedSolve s = solve_resolvent(domain, h, cplx(lambda * lambda, eps), rhs);
    LadderRow row;
    row.eps = eps;
    for (const Vec2& c : L.test_centers) row.pairings.push_back(pairing(s.u, gaussian(c, 40)));
    row.u = std::move(s.u);
    L.rows.push_back(std::move(row));
  }
  return L;
}

}  // namespace iwave
