#include "iwave/layers.hpp"

#include <Eigen/LU>
#include <cmath>
#include <cstdio>

#include "iwave/errors.hpp"

namespace iwave {

namespace {

void check_omega(cplx omega) {
  if (omega.imag() == 0) throw DomainError("layer potentials need Im omega != 0");
  if (!(omega.real() > 0 && omega.real() < 1)) throw DomainError("layer potentials need 0 < Re omega < 1");
}

// Coefficients of A(x) = a1 x1^2 + a2 x2^2.
struct Form {
  cplx a1, a2, c;
  explicit Form(cplx omega)
      : a1(-1.0 / (omega * omega)), a2(1.0 / (1.0 - omega * omega)), c(layer_constant(omega)) {}
  cplx A(const Vec2& d) const { return a1 * (d.x() * d.x()) + a2 * (d.y() * d.y()); }
  cplx E(const Vec2& d) const { return c * std::log(A(d)); }
};

// Power-3 grading of [0, 1] onto itself with w' = 0 at both ends.
constexpr double kGradePower = 3;

double grade_v(double t) {
  const double p = kGradePower, u = 1 - 2 * t;
  return (1 / p - 0.5) * u * u * u + (2 * t - 1) / p + 0.5;
}

double grade_dv(double t) {
  const double p = kGradePower, u = 1 - 2 * t;
  return -6 * (1 / p - 0.5) * u * u + 2 / p;
}

void grade(double t, double& w, double& dw) {
  const double p = kGradePower;
  double a = std::pow(grade_v(t), p), b = std::pow(grade_v(1 - t), p);
  double da = p * std::pow(grade_v(t), p - 1) * grade_dv(t);
  double db = -p * std::pow(grade_v(1 - t), p - 1) * grade_dv(1 - t);
  w = a / (a + b);
  dw = (da * b - a * db) / ((a + b) * (a + b));
}

// Inward samples of the Neumann fit, in grid steps: first + k * stride.
constexpr int kNeumannSamples = 13;
constexpr double kNeumannFirst = 2, kNeumannStride = 1;

}  // namespace

cplx sqrt_one_minus_sq(cplx omega) { return std::sqrt(1.0 - omega * omega); }

cplx layer_constant(cplx omega) {
  return cplx(0, sgn(omega.imag())) / (4 * kPi * omega * sqrt_one_minus_sq(omega));
}

cplx quadratic_form(const Vec2& x, cplx omega) {
  return -x.x() * x.x() / (omega * omega) + x.y() * x.y() / (1.0 - omega * omega);
}

cplx fundamental_solution(const Vec2& x, cplx omega) {
  check_omega(omega);
  if (x.x() == 0 && x.y() == 0) throw DomainError("fundamental solution is singular at the origin");
  return layer_constant(omega) * std::log(quadratic_form(x, omega));
}

cplx apply_L(const std::function<cplx(const Vec2&)>& g, const Vec2& x, cplx omega, Sign s, double h) {
  Vec2 e1(h, 0), e2(0, h);
  cplx d1 = (g(x + e1) - g(x - e1)) / (2 * h), d2 = (g(x + e2) - g(x - e2)) / (2 * h);
  return 0.5 * (double(sign_value(s)) * omega * d1 + sqrt_one_minus_sq(omega) * d2);
}

cplx apply_P(const std::function<cplx(const Vec2&)>& g, const Vec2& x, cplx omega, double h) {
  Vec2 e1(h, 0), e2(0, h);
  cplx g0 = g(x);
  cplx d11 = (g(x + e1) - 2.0 * g0 + g(x - e1)) / (h * h), d22 = (g(x + e2) - 2.0 * g0 + g(x - e2)) / (h * h);
  return (1.0 - omega * omega) * d22 - omega * omega * d11;
}

std::vector<cplx> volume_potential(const GridField& f, cplx omega, const std::vector<Vec2>& targets) {
  check_omega(omega);
  Form form(omega);
  std::vector<Vec2> y;
  std::vector<cplx> fy;
  for (int j = 0; j < f.ny; ++j)
    for (int i = 0; i < f.nx; ++i) {
      cplx v = f.at(i, j);
      if (v != cplx(0)) {
        y.push_back(f.point(i, j));
        fy.push_back(v);
      }
    }
  const double h = f.h, w = h * h;
  std::vector<cplx> out(targets.size(), cplx(0));
  for (size_t t = 0; t < targets.size(); ++t) {
    const Vec2& x = targets[t];
    cplx acc = 0;
    for (size_t k = 0; k < y.size(); ++k) {
      Vec2 d = x - y[k];
      if (std::abs(d.x()) < 1.5 * h && std::abs(d.y()) < 1.5 * h) {
        cplx sub = 0;
        for (int a = 0; a < 4; ++a)
          for (int b = 0; b < 4; ++b) {
            Vec2 e = d - h * Vec2((a + 0.5) / 4 - 0.5, (b + 0.5) / 4 - 0.5);
            if (e.norm() > 1e-14 * h) sub += form.E(e);
          }
        acc += fy[k] * sub * (w / 16);
      } else {
        acc += fy[k] * form.E(d) * w;
      }
    }
    out[t] = acc;
  }
  return out;
}

std::vector<double> kress_weights(int M) {
  const int n = M / 2;
  std::vector<double> R(M);
  for (int k = 0; k < M; ++k) {
    double s = 0;
    for (int m = 1; m < n; ++m) s += std::cos(m * k * kPi / n) / m;
    R[k] = -2 * kPi / n * s - kPi / (double(n) * n) * (k % 2 == 0 ? 1.0 : -1.0);
  }
  return R;
}

double LayerKernel::max_spacing() const {
  double m = 0;
  for (int i = 0; i < M; ++i) m = std::max(m, (x[(i + 1) % M] - x[i]).norm());
  return m;
}

LayerKernel boundary_system(const Domain& domain, cplx omega, int M) {
  check_omega(omega);
  if (M < 64 || M % 2 != 0) throw DomainError("boundary system needs an even node count M >= 64");
  const std::vector<double>& corners = domain.corners();
  if (!corners.empty() && M % static_cast<int>(corners.size()) != 0)
    throw DomainError("node count must be a multiple of the corner count");

  LayerKernel K(omega, domain);
  K.M = M;
  K.s.resize(M);
  K.theta.resize(M);
  K.dtheta.resize(M);
  K.x.resize(M);
  K.dx.resize(M);
  if (corners.empty()) {
    for (int i = 0; i < M; ++i) {
      K.s[i] = 2 * kPi * i / M;
      K.theta[i] = domain.period() * i / M;
      K.dtheta[i] = domain.period() / (2 * kPi);
    }
  } else {
    const int sides = static_cast<int>(corners.size()), m = M / sides;
    for (int i = 0; i < M; ++i) {
      int k = i / m;
      double sigma = (i % m + 0.5) / m, w, dw;
      grade(sigma, w, dw);
      double a = corners[k], b = k + 1 < sides ? corners[k + 1] : corners[0] + domain.period();
      K.s[i] = 2 * kPi * (i + 0.5) / M;
      K.theta[i] = a + (b - a) * w;
      K.dtheta[i] = (b - a) * dw * sides / (2 * kPi);
    }
  }
  for (int i = 0; i < M; ++i) {
    K.x[i] = domain.point(K.theta[i]);
    K.dx[i] = domain.tangent(K.theta[i]) * K.dtheta[i];
  }

  Form form(omega);
  std::vector<double> R = kress_weights(M);
  const double step = K.step();
  K.C.resize(M, M);
  K.E.resize(M, M);
  for (int i = 0; i < M; ++i) {
    K.E(i, i) = 0;
    K.C(i, i) = form.c * (R[0] + step * std::log(form.A(K.dx[i])));
    for (int j = 0; j < i; ++j) {
      cplx logA = std::log(form.A(K.x[i] - K.x[j]));
      double sn = std::sin(0.5 * (K.s[i] - K.s[j]));
      cplx smooth = logA - std::log(4 * sn * sn);
      K.E(i, j) = K.E(j, i) = form.c * logA;
      K.C(i, j) = K.C(j, i) = form.c * (R[i - j] + step * smooth);
    }
  }
  return K;
}

double condition_estimate(const Eigen::MatrixXcd& C) {
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(C);
  double r = lu.rcond();
  return r > 0 ? 1 / r : INFINITY;
}

BieSolution solve_bie(LayerKernel kernel, const Eigen::VectorXcd& rhs) {
  if (rhs.size() != kernel.M) throw DomainError("right-hand side does not match the node count");
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(kernel.C);
  BieSolution sol(std::move(kernel));
  double r = lu.rcond();
  sol.condition = r > 0 ? 1 / r : INFINITY;
  if (!(sol.condition <= 1e12))
    throw ConditioningError("boundary system is ill-conditioned (estimate " + std::to_string(sol.condition) +
                            "); increase Im omega or the node count");
  Eigen::VectorXcd vs = lu.solve(rhs);
  double rn = rhs.lpNorm<Eigen::Infinity>();
  sol.residual = (sol.kernel.C * vs - rhs).lpNorm<Eigen::Infinity>() / (rn > 0 ? rn : 1);
  sol.rhs = rhs;
  sol.density.theta = sol.kernel.theta;
  for (int i = 0; i < sol.kernel.M; ++i) {
    sol.density.v_s.push_back(vs[i]);
    sol.density.v.push_back(vs[i] / sol.kernel.dtheta[i]);
  }
  return sol;
}

BieSolution solve_bie(const Domain& domain, cplx omega, const GridField& f, int M) {
  LayerKernel K = boundary_system(domain, omega, M);
  std::vector<cplx> r = volume_potential(f, omega, K.x);
  Eigen::VectorXcd rhs = Eigen::Map<Eigen::VectorXcd>(r.data(), M);
  return solve_bie(std::move(K), rhs);
}

std::vector<cplx> reconstruct_at(const BieSolution& sol, const GridField& f, const std::vector<Vec2>& points) {
  const LayerKernel& K = sol.kernel;
  Form form(K.omega);
  std::vector<cplx> u = volume_potential(f, K.omega, points);
  const double step = K.step();
  for (size_t t = 0; t < points.size(); ++t) {
    cplx s = 0;
    for (int j = 0; j < K.M; ++j) s += form.E(points[t] - K.x[j]) * sol.density.v_s[j];
    u[t] -= s * step;
  }
  return u;
}

Reconstruction reconstruct(const BieSolution& sol, const GridField& f, const GridField& grid) {
  std::vector<Vec2> pts;
  std::vector<size_t> idx;
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i)
      if (grid.inside(i, j)) {
        pts.push_back(grid.point(i, j));
        idx.push_back(grid.index(i, j));
      }
  std::vector<cplx> u = reconstruct_at(sol, f, pts);
  Reconstruction out;
  out.u = grid;
  out.u.complex = true;
  out.u.values.assign(grid.size(), cplx(0));
  out.low_accuracy.assign(grid.size(), 0);
  const double near = 2 * sol.kernel.max_spacing();
  for (size_t k = 0; k < pts.size(); ++k) {
    out.u.values[idx[k]] = u[k];
    out.low_accuracy[idx[k]] = sol.kernel.domain.distance_to_boundary(pts[k]) < near ? 1 : 0;
  }
  return out;
}

cplx interpolate(const GridField& u, const Vec2& p) {
  double fx = (p.x() - u.x0) / u.h, fy = (p.y() - u.y0) / u.h;
  int i = static_cast<int>(std::floor(fx)), j = static_cast<int>(std::floor(fy));
  double tx = fx - i, ty = fy - j;
  return (1 - tx) * (1 - ty) * u.at(i, j) + tx * (1 - ty) * u.at(i + 1, j) + (1 - tx) * ty * u.at(i, j + 1) +
         tx * ty * u.at(i + 1, j + 1);
}

NeumannSamples neumann_data(const GridField& u, const Domain& domain, cplx omega,
                            const std::vector<double>& thetas, Sign s) {
  check_omega(omega);
  const cplx root = sqrt_one_minus_sq(omega), sg = double(sign_value(s));
  auto stencil_inside = [&](const Vec2& p) {
    int i = static_cast<int>(std::floor((p.x() - u.x0) / u.h)), j = static_cast<int>(std::floor((p.y() - u.y0) / u.h));
    return u.inside(i, j) && u.inside(i + 1, j) && u.inside(i, j + 1) && u.inside(i + 1, j + 1);
  };
  // Least-squares quadratic in the inward distance d over the samples.
  Eigen::MatrixXd V(kNeumannSamples, 3);
  for (int k = 0; k < kNeumannSamples; ++k) {
    double d = (kNeumannFirst + k * kNeumannStride) * u.h;
    V.row(k) << 1, d, d * d;
  }
  Eigen::MatrixXd fit = V.colPivHouseholderQr().solve(Eigen::MatrixXd::Identity(kNeumannSamples, kNeumannSamples));
  NeumannSamples out;
  for (double th : thetas) {
    Vec2 x = domain.point(th), T = domain.tangent(th);
    Vec2 n = Vec2(-T.y(), T.x()) / T.norm();
    cplx dn = 0;
    bool low = false;
    for (int k = 0; k < kNeumannSamples; ++k) {
      Vec2 p = x + (kNeumannFirst + k * kNeumannStride) * u.h * n;
      dn += fit(1, k) * interpolate(u, p);
      low = low || !stencil_inside(p);
    }
    cplx g1 = dn * n.x(), g2 = dn * n.y();
    cplx L = 0.5 * (sg * omega * g1 + root * g2);
    cplx dell = sg * T.x() / omega + T.y() / root;
    out.v.push_back(-sg * 2.0 * omega * root * L * dell);
    out.low_accuracy.push_back(low ? 1 : 0);
  }
  return out;
}

void write_density_csv(const BoundaryDensity& d, const std::string& path) {
  std::string tmp = path + ".tmp";
  std::FILE* out = std::fopen(tmp.c_str(), "w");
  if (!out) throw Error("cannot open " + tmp + " for writing");
  std::fprintf(out, "theta,re,im\n");
  for (size_t i = 0; i < d.theta.size(); ++i)
    std::fprintf(out, "%.17g,%.17g,%.17g\n", d.theta[i], d.v[i].real(), d.v[i].imag());
  if (std::fclose(out) != 0) throw Error("failed writing " + tmp);
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw Error("cannot rename " + tmp + " to " + path);
}

}  // namespace iwave
