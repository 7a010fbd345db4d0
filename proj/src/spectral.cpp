#include "iwave/spectral.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <limits>

#include "iwave/errors.hpp"
#include "iwave/quadrature.hpp"

namespace iwave {

namespace {

// y = R_alpha^-1 x
Vec2 unrotate(double alpha, const Vec2& x) {
  double c = std::cos(alpha), s = std::sin(alpha);
  return Vec2(c * x.x() + s * x.y(), -s * x.x() + c * x.y());
}

bool is_tilted_unit_square(const Domain& domain, double& alpha) {
  if (domain.kind() != DomainKind::polygon || domain.vertices().size() != 4) return false;
  const auto& v = domain.vertices();
  alpha = std::atan2(v[1].y(), v[1].x());
  Domain ref = tilted_square(alpha);
  for (int k = 0; k < 4; ++k)
    if ((v[k] - ref.vertices()[k]).norm() > 1e-12) return false;
  return true;
}

// sin(k pi y) and cos(k pi y) for k = 0..kmax.
void trig_table(double y, int kmax, std::vector<double>& s, std::vector<double>& c) {
  s.resize(kmax + 1);
  c.resize(kmax + 1);
  for (int k = 0; k <= kmax; ++k) {
    s[k] = std::sin(k * kPi * y);
    c[k] = std::cos(k * kPi * y);
  }
}

// Integral over [0,1] of cos(a pi y) sin(b pi y) for a, b >= 1.
double cos_sin(int a, int b) {
  if ((a + b) % 2 == 0) return 0;
  return 2.0 * b / (kPi * (static_cast<double>(b) * b - static_cast<double>(a) * a));
}

EigenBasis analytic_basis(const Domain& domain, double alpha, int K) {
  EigenBasis B;
  B.mode = BasisMode::analytic_square;
  B.domain = domain;
  B.alpha = alpha;
  B.K = K;
  int r = static_cast<int>(std::ceil(std::sqrt(4.0 * K / kPi))) + 4;
  std::vector<std::pair<int, int>> all;
  for (int m = 1; m <= r; ++m)
    for (int n = 1; n <= r; ++n) all.emplace_back(m, n);
  std::sort(all.begin(), all.end(), [](auto p, auto q) {
    int a = p.first * p.first + p.second * p.second, b = q.first * q.first + q.second * q.second;
    return a != b ? a < b : p < q;
  });
  all.resize(K);
  B.index = all;
  for (auto [m, n] : all) B.mu2.push_back(kPi * kPi * (m * m + n * n));
  return B;
}

using SpMat = Eigen::SparseMatrix<double>;

// -Delta_h on the masked nodes with zero Dirichlet values outside.
SpMat fd_laplacian(const GridField& g, const std::vector<long>& node, const std::vector<long>& unknown_of) {
  std::vector<Eigen::Triplet<double>> trip;
  const double ih2 = 1.0 / (g.h * g.h);
  for (size_t u = 0; u < node.size(); ++u) {
    int i = static_cast<int>(node[u] % g.nx), j = static_cast<int>(node[u] / g.nx);
    trip.emplace_back(u, u, 4 * ih2);
    const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
    for (int e = 0; e < 4; ++e)
      if (g.inside(i + di[e], j + dj[e]))
        trip.emplace_back(u, unknown_of[g.index(i + di[e], j + dj[e])], -ih2);
  }
  SpMat A(node.size(), node.size());
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

// Lowest K eigenpairs of the SPD matrix A by Lanczos on A^-1 with full
// reorthogonalization. Returns eigenvalues ascending and unit-norm vectors.
void lowest_eigenpairs(const SpMat& A, int K, Eigen::VectorXd& values, Eigen::MatrixXd& vectors) {
  const long n = A.rows();
  Eigen::SimplicialLDLT<SpMat> solver(A);
  if (solver.info() != Eigen::Success) throw ConditioningError("Laplacian factorization failed");

  long cap = std::min<long>(n, 2L * K + 200);
  Eigen::MatrixXd V(n, cap + 1);
  std::vector<double> a, b;
  Halton hal;
  Eigen::VectorXd v(n);
  for (long i = 0; i < n; ++i) v[i] = hal.next1() - 0.5;
  V.col(0) = v / v.norm();

  long m = 0, next_check = std::min<long>(cap, K + K / 2 + 40);
  Eigen::MatrixXd S;
  Eigen::VectorXd theta;
  while (true) {
    Eigen::VectorXd w = solver.solve(V.col(m));
    double am = V.col(m).dot(w);
    w -= am * V.col(m);
    if (m > 0) w -= b.back() * V.col(m - 1);
    for (int pass = 0; pass < 2; ++pass) w -= V.leftCols(m + 1) * (V.leftCols(m + 1).transpose() * w);
    double bm = w.norm();
    a.push_back(am);
    b.push_back(bm);
    ++m;
    bool exhausted = bm < 1e-14 * std::abs(a.front()) || m == n;
    if (!exhausted) V.col(m) = w / bm;

    if (m >= next_check || exhausted) {
      Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
      for (long i = 0; i < m; ++i) {
        T(i, i) = a[i];
        if (i + 1 < m) T(i, i + 1) = T(i + 1, i) = b[i];
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
      theta = es.eigenvalues();  // ascending; wanted are the K largest
      S = es.eigenvectors();
      bool ok = m >= K;
      for (int k = 0; ok && k < K; ++k) {
        long c = m - 1 - k;
        if (std::abs(bm * S(m - 1, c)) > 1e-11 * theta[m - 1]) ok = false;
      }
      if (ok || exhausted) {
        if (m < K) throw PreconditionError("fewer unknowns than requested modes");
        break;
      }
      if (m >= cap) {
        cap = std::min<long>(n, cap + cap / 2);
        V.conservativeResize(n, cap + 1);
      }
      next_check = std::min<long>(cap, m + std::max<long>(40, m / 4));
    }
  }
  values.resize(K);
  vectors.resize(n, K);
  for (int k = 0; k < K; ++k) {
    long c = m - 1 - k;
    values[k] = 1.0 / theta[c];
    Eigen::VectorXd y = V.leftCols(m) * S.col(c);
    y /= y.norm();
    Eigen::Index imax;
    y.cwiseAbs().maxCoeff(&imax);
    if (y[imax] < 0) y = -y;
    vectors.col(k) = y;
  }
}

EigenBasis fd_basis(const Domain& domain, double h, int K) {
  EigenBasis B;
  B.mode = BasisMode::finite_difference;
  B.domain = domain;
  B.K = K;
  B.grid = make_grid(domain, h);
  std::vector<long> unknown_of(B.grid.size(), -1);
  for (size_t k = 0; k < B.grid.size(); ++k)
    if (B.grid.mask[k]) {
      unknown_of[k] = static_cast<long>(B.node.size());
      B.node.push_back(static_cast<long>(k));
    }
  if (K > static_cast<long>(B.node.size())) throw PreconditionError("K exceeds the number of interior nodes");
  SpMat A = fd_laplacian(B.grid, B.node, unknown_of);
  Eigen::VectorXd vals;
  lowest_eigenpairs(A, K, vals, B.vectors);
  B.vectors /= h;  // h^2-weighted normalization
  B.mu2.assign(vals.data(), vals.data() + K);
  return B;
}

// Centered difference in x2 of a nodal vector, zero outside the mask.
Eigen::VectorXd dx2_fd(const EigenBasis& B, const Eigen::VectorXd& v) {
  const GridField& g = B.grid;
  std::vector<double> full(g.size(), 0.0);
  for (size_t u = 0; u < B.node.size(); ++u) full[B.node[u]] = v[u];
  Eigen::VectorXd out(B.node.size());
  for (size_t u = 0; u < B.node.size(); ++u) {
    int i = static_cast<int>(B.node[u] % g.nx), j = static_cast<int>(B.node[u] / g.nx);
    double up = j + 1 < g.ny ? full[g.index(i, j + 1)] : 0.0;
    double dn = j > 0 ? full[g.index(i, j - 1)] : 0.0;
    out[u] = (up - dn) / (2 * g.h);
  }
  return out;
}

}  // namespace

double EigenBasis::value(int a, const Vec2& x) const {
  Vec2 y = unrotate(alpha, x);
  auto [m, n] = index[a];
  return 2 * std::sin(m * kPi * y.x()) * std::sin(n * kPi * y.y());
}

Vec2 EigenBasis::gradient(int a, const Vec2& x) const {
  Vec2 y = unrotate(alpha, x);
  auto [m, n] = index[a];
  double g1 = 2 * m * kPi * std::cos(m * kPi * y.x()) * std::sin(n * kPi * y.y());
  double g2 = 2 * n * kPi * std::sin(m * kPi * y.x()) * std::cos(n * kPi * y.y());
  double c = std::cos(alpha), s = std::sin(alpha);
  return Vec2(c * g1 - s * g2, s * g1 + c * g2);
}

EigenBasis build_eigenbasis(const Domain& domain, const BasisOptions& opts) {
  if (opts.K < 1) throw PreconditionError("K must be positive");
  if (opts.mode == BasisMode::analytic_square) {
    double alpha = 0;
    if (!is_tilted_unit_square(domain, alpha))
      throw PreconditionError("analytic basis needs a tilted unit square");
    return analytic_basis(domain, alpha, opts.K);
  }
  return fd_basis(domain, opts.h, opts.K);
}

double orthonormality_defect(const EigenBasis& B, int max_modes) {
  int K = max_modes > 0 ? std::min(max_modes, B.K) : B.K;
  double worst = 0;
  if (B.mode == BasisMode::finite_difference) {
    Eigen::MatrixXd G = B.vectors.leftCols(K).transpose() * B.vectors.leftCols(K) * (B.grid.h * B.grid.h);
    return (G - Eigen::MatrixXd::Identity(K, K)).cwiseAbs().maxCoeff();
  }
  int kmax = 0;
  for (int a = 0; a < K; ++a) kmax = std::max({kmax, B.index[a].first, B.index[a].second});
  QuadratureRule q = gauss_legendre(kmax + 16, 0, 1);
  const size_t nq = q.nodes.size();
  // Separable: <e_a, e_b> = 4 (int sin sin)(int sin sin).
  Eigen::MatrixXd I1(kmax + 1, kmax + 1);
  for (int p = 0; p <= kmax; ++p)
    for (int r = 0; r <= kmax; ++r) {
      double s = 0;
      for (size_t i = 0; i < nq; ++i)
        s += q.weights[i] * std::sin(p * kPi * q.nodes[i]) * std::sin(r * kPi * q.nodes[i]);
      I1(p, r) = s;
    }
  for (int a = 0; a < K; ++a)
    for (int b = 0; b < K; ++b) {
      double g = 4 * I1(B.index[a].first, B.index[b].first) * I1(B.index[a].second, B.index[b].second);
      worst = std::max(worst, std::abs(g - (a == b ? 1.0 : 0.0)));
    }
  return worst;
}

PoincareMatrix poincare_matrix(const EigenBasis& B) {
  const int K = B.K;
  PoincareMatrix P;
  P.M.resize(K, K);
  if (B.mode == BasisMode::analytic_square) {
    const double s = std::sin(B.alpha), c = std::cos(B.alpha), pi2 = kPi * kPi;
    for (int a = 0; a < K; ++a) {
      auto [m, n] = B.index[a];
      for (int b = a; b < K; ++b) {
        auto [mp, np] = B.index[b];
        // d_x2 e = 2 (s m pi cos sin + c n pi sin cos); separable 1D integrals.
        double v = 0;
        if (m == mp && n == np) v += s * s * m * m * pi2 * 0.25 + c * c * n * n * pi2 * 0.25;
        v += s * c * m * np * pi2 * cos_sin(m, mp) * cos_sin(np, n);
        v += s * c * n * mp * pi2 * cos_sin(mp, m) * cos_sin(n, np);
        v *= 4 / std::sqrt(B.mu2[a] * B.mu2[b]);
        P.M(a, b) = P.M(b, a) = v;
      }
    }
  } else {
    Eigen::MatrixXd D(B.node.size(), K);
    for (int a = 0; a < K; ++a) D.col(a) = dx2_fd(B, B.vectors.col(a)) / B.mu(a);
    P.M = D.transpose() * D * (B.grid.h * B.grid.h);
    P.M = 0.5 * (P.M + P.M.transpose()).eval();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P.M);
  P.Q = es.eigenvectors();
  P.d = es.eigenvalues();
  return P;
}

double poincare_entry_quadrature(const EigenBasis& B, int a, int b, int points) {
  if (B.mode != BasisMode::analytic_square) throw PreconditionError("quadrature check needs the analytic basis");
  QuadratureRule q = gauss_legendre(points, 0, 1);
  double c = std::cos(B.alpha), s = std::sin(B.alpha), sum = 0;
  for (size_t i = 0; i < q.nodes.size(); ++i)
    for (size_t j = 0; j < q.nodes.size(); ++j) {
      Vec2 x(c * q.nodes[i] - s * q.nodes[j], s * q.nodes[i] + c * q.nodes[j]);
      sum += q.weights[i] * q.weights[j] * B.gradient(a, x).y() * B.gradient(b, x).y();
    }
  return sum / std::sqrt(B.mu2[a] * B.mu2[b]);
}

ScalarField gaussian(const Vec2& center, double width) {
  return [center, width](const Vec2& x) { return std::exp(-width * (x - center).squaredNorm()); };
}

Eigen::VectorXd forcing_coefficients(const EigenBasis& B, const ScalarField& f) {
  Eigen::VectorXd F = Eigen::VectorXd::Zero(B.K);
  if (B.mode == BasisMode::finite_difference) {
    for (size_t u = 0; u < B.node.size(); ++u) {
      const GridField& g = B.grid;
      double fv = f(g.point(static_cast<int>(B.node[u] % g.nx), static_cast<int>(B.node[u] / g.nx)));
      if (fv != 0) F += fv * B.vectors.row(u).transpose();
    }
    F *= B.grid.h * B.grid.h;
  } else {
    int kmax = 0;
    for (auto [m, n] : B.index) kmax = std::max({kmax, m, n});
    QuadratureRule q = gauss_legendre(std::max(128, 4 * kmax), 0, 1);
    const double c = std::cos(B.alpha), s = std::sin(B.alpha);
    const size_t nq = q.nodes.size();
    // Sample f on the tensor grid, then contract one direction at a time.
    Eigen::MatrixXd fv(nq, nq), S(kmax + 1, nq);
    for (size_t i = 0; i < nq; ++i)
      for (size_t j = 0; j < nq; ++j) {
        Vec2 x(c * q.nodes[i] - s * q.nodes[j], s * q.nodes[i] + c * q.nodes[j]);
        fv(i, j) = q.weights[i] * q.weights[j] * f(x);
      }
    for (int k = 0; k <= kmax; ++k)
      for (size_t i = 0; i < nq; ++i) S(k, i) = std::sin(k * kPi * q.nodes[i]);
    Eigen::MatrixXd C = S * fv * S.transpose();  // C(m, n) = sum f sin(m pi y1) sin(n pi y2)
    for (int a = 0; a < B.K; ++a) F[a] = 2 * C(B.index[a].first, B.index[a].second);
  }
  for (int a = 0; a < B.K; ++a) F[a] /= B.mu(a);
  return F;
}

GridField reconstruct_field(const Eigen::VectorXcd& coef, const EigenBasis& B, const GridField& grid,
                            bool complex) {
  if (coef.size() != B.K) throw DomainError("coefficient count does not match the basis");
  GridField out = grid;
  out.complex = complex;
  std::fill(out.values.begin(), out.values.end(), cplx(0));
  if (B.mode == BasisMode::finite_difference) {
    if (!grid.same_grid(B.grid)) throw DomainError("grid does not match the finite-difference basis");
    Eigen::VectorXcd v = B.vectors.cast<cplx>() * coef;
    for (size_t u = 0; u < B.node.size(); ++u) out.values[B.node[u]] = v[u];
  } else {
    int kmax = 0;
    for (auto [m, n] : B.index) kmax = std::max({kmax, m, n});
    std::vector<double> s1, c1, s2, c2;
    for (int j = 0; j < grid.ny; ++j)
      for (int i = 0; i < grid.nx; ++i) {
        size_t k = grid.index(i, j);
        if (!grid.mask[k]) continue;
        Vec2 x = grid.point(i, j);
        if (!B.domain.contains(x)) throw DomainError("grid node marked inside lies outside the basis domain");
        Vec2 y = unrotate(B.alpha, x);
        trig_table(y.x(), kmax, s1, c1);
        trig_table(y.y(), kmax, s2, c2);
        cplx sum = 0;
        for (int a = 0; a < B.K; ++a) sum += coef[a] * (2 * s1[B.index[a].first] * s2[B.index[a].second]);
        out.values[k] = sum;
      }
  }
  out.normalize();
  return out;
}

GridField reconstruct_field(const Eigen::VectorXd& coef, const EigenBasis& B, const GridField& grid) {
  return reconstruct_field(Eigen::VectorXcd(coef.cast<cplx>()), B, grid, false);
}

double segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  Vec2 d = b - a;
  double t = d.squaredNorm() > 0 ? std::clamp((p - a).dot(d) / d.squaredNorm(), 0.0, 1.0) : 0.0;
  return (p - (a + t * d)).norm();
}

Concentration concentration_metric(const GridField& f, const std::vector<SkeletonSegment>& skeleton,
                                   double delta) {
  if (skeleton.empty()) throw PreconditionError("concentration metric needs a nonempty skeleton");
  double tube = 0, total = 0;
  long nodes = 0, tube_nodes = 0;
  for (int j = 0; j < f.ny; ++j)
    for (int i = 0; i < f.nx; ++i) {
      if (!f.inside(i, j) || !f.inside(i + 1, j) || !f.inside(i - 1, j) || !f.inside(i, j + 1) ||
          !f.inside(i, j - 1))
        continue;
      cplx g1 = (f.at(i + 1, j) - f.at(i - 1, j)) / (2 * f.h);
      cplx g2 = (f.at(i, j + 1) - f.at(i, j - 1)) / (2 * f.h);
      double e = std::norm(g1) + std::norm(g2);
      Vec2 x = f.point(i, j);
      double dist = std::numeric_limits<double>::infinity();
      for (const auto& s : skeleton) dist = std::min(dist, segment_distance(x, s.a, s.b));
      ++nodes;
      total += e;
      if (dist <= delta) {
        tube += e;
        ++tube_nodes;
      }
    }
  Concentration c;
  c.ratio = total > 0 ? tube / total : 0;
  c.area_fraction = nodes > 0 ? static_cast<double>(tube_nodes) / nodes : 0;
  return c;
}

}  // namespace iwave
