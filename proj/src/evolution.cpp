#include "iwave/evolution.hpp"

#include <cmath>

#include "iwave/errors.hpp"

namespace iwave {

namespace {

const cplx I(0, 1);

// phi(zeta) = int_0^t e^{-i s zeta} ds, by series when |t zeta| is small.
cplx phi(double t, double zeta) {
  double x = t * zeta;
  if (std::abs(x) < 1e-3) {
    // sum_k (-i x)^k t / (k+1)!
    cplx term = t, sum = 0;
    for (int k = 0; k < 6; ++k) {
      sum += term;
      term *= -I * x / static_cast<double>(k + 2);
    }
    return sum;
  }
  return (1.0 - std::exp(-I * x)) / (I * zeta);
}

// int_0^t s^m e^{-i lambda s} ds for m = 0..mmax by upward recursion.
std::vector<cplx> moments(double t, double lambda, int mmax) {
  std::vector<cplx> I_m(mmax + 1);
  cplx e = std::exp(-I * lambda * t);
  I_m[0] = phi(t, lambda);
  double tm = 1;
  for (int m = 1; m <= mmax; ++m) {
    tm *= t;
    I_m[m] = (tm * e - static_cast<double>(m) * I_m[m - 1]) / (-I * lambda);
  }
  return I_m;
}

}  // namespace

cplx W_function(double t, double lambda, double z) {
  if (t == 0) return 0;
  if (z < 0) throw DomainError("W is evaluated on the nonnegative spectrum only");
  if (z < 1e-10) {
    // sin(s r)/r = sum_k (-z)^k s^{2k+1} / (2k+1)!
    std::vector<cplx> mo = moments(t, lambda, 7);
    cplx sum = 0;
    double coef = 1;
    for (int k = 0; k < 4; ++k) {
      sum += coef * mo[2 * k + 1];
      coef *= -z / ((2.0 * k + 2) * (2.0 * k + 3));
    }
    return sum;
  }
  double r = std::sqrt(z);
  // W = (phi(lambda - r) - phi(lambda + r)) / (2 i r); phi handles r near lambda.
  return (phi(t, lambda - r) - phi(t, lambda + r)) / (2.0 * I * r);
}

ForcedEvolution::ForcedEvolution(const EigenBasis& basis, const PoincareMatrix& matrix, Eigen::VectorXd F,
                                 double lambda)
    : basis_(&basis), matrix_(&matrix), F_(std::move(F)), lambda_(lambda) {
  if (!(lambda > 0 && lambda < 1)) throw DomainError("forcing frequency must lie in (0, 1)");
  if (F_.size() != basis.K) throw DomainError("forcing coefficients do not match the basis");
  G_ = matrix.Q.transpose() * F_;
}

Eigen::VectorXd ForcedEvolution::w_coefficients(double t) const {
  const Eigen::VectorXd& d = matrix_->d;
  Eigen::VectorXcd y(d.size());
  cplx e = std::exp(I * lambda_ * t);
  for (Eigen::Index k = 0; k < d.size(); ++k) y[k] = e * W_function(t, lambda_, std::max(d[k], 0.0)) * G_[k];
  return matrix_->Q * y.real();
}

Eigen::VectorXd ForcedEvolution::u_coefficients(double t) const {
  Eigen::VectorXd w = w_coefficients(t);
  for (int a = 0; a < basis_->K; ++a) w[a] = -w[a] / basis_->mu(a);
  return w;
}

Eigen::VectorXd ForcedEvolution::w_acceleration(double t) const {
  // d^2/dt^2 of Re(e^{i lambda t} W_t(z)) = cos(lambda t) - z Re(e^{i lambda t} W_t(z))
  const Eigen::VectorXd& d = matrix_->d;
  Eigen::VectorXd y(d.size());
  cplx e = std::exp(I * lambda_ * t);
  for (Eigen::Index k = 0; k < d.size(); ++k) {
    double z = std::max(d[k], 0.0);
    y[k] = (std::cos(lambda_ * t) - z * (e * W_function(t, lambda_, z)).real()) * G_[k];
  }
  return matrix_->Q * y;
}

Eigen::VectorXcd ForcedEvolution::profile_coefficients(double T, int samples_per_period) const {
  if (samples_per_period < 64) throw PreconditionError("profile needs at least 64 samples per period");
  const double period = 2 * kPi / lambda_;
  const long n = std::lround(T / period * samples_per_period);
  if (n < 1) throw PreconditionError("profile window is shorter than one sample");
  const double dt = T / static_cast<double>(n);
  Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(basis_->K);
  for (long k = 0; k < n; ++k) {
    double t = T + k * dt;
    acc += u_coefficients(t).cast<cplx>() * std::exp(-I * lambda_ * t);
  }
  return acc * (2.0 * dt / T);
}

Eigen::VectorXcd resolvent_u_coefficients(const EigenBasis& basis, const PoincareMatrix& matrix,
                                          const Eigen::VectorXd& F, cplx z) {
  Eigen::VectorXcd G = (matrix.Q.transpose() * F).cast<cplx>();
  for (Eigen::Index k = 0; k < G.size(); ++k) G[k] /= matrix.d[k] - z;
  Eigen::VectorXcd w = matrix.Q.cast<cplx>() * G;
  for (int a = 0; a < basis.K; ++a) w[a] = -w[a] / basis.mu(a);
  return w;
}

std::vector<Eigen::VectorXd> integrate_forced_rk4(const Eigen::MatrixXd& M, const Eigen::VectorXd& F,
                                                  double lambda, const std::vector<double>& times,
                                                  double dt) {
  const Eigen::Index K = F.size();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(K), v = Eigen::VectorXd::Zero(K);
  auto acc = [&](double t, const Eigen::VectorXd& x) -> Eigen::VectorXd { return F * std::cos(lambda * t) - M * x; };
  std::vector<Eigen::VectorXd> out;
  double t = 0;
  for (double target : times) {
    if (target < t) throw PreconditionError("output times must be nondecreasing");
    long steps = static_cast<long>(std::ceil((target - t) / dt - 1e-12));
    double h = steps > 0 ? (target - t) / steps : 0;
    for (long s = 0; s < steps; ++s) {
      Eigen::VectorXd k1w = v, k1v = acc(t, w);
      Eigen::VectorXd k2w = v + 0.5 * h * k1v, k2v = acc(t + 0.5 * h, w + 0.5 * h * k1w);
      Eigen::VectorXd k3w = v + 0.5 * h * k2v, k3v = acc(t + 0.5 * h, w + 0.5 * h * k2w);
      Eigen::VectorXd k4w = v + h * k3v, k4v = acc(t + h, w + h * k3w);
      w += h / 6 * (k1w + 2 * k2w + 2 * k3w + k4w);
      v += h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v);
      t += h;
    }
    t = target;
    out.push_back(w);
  }
  return out;
}

GridField extract_profile(const std::vector<GridField>& snaps, const std::vector<double>& times, double lambda) {
  if (snaps.size() != times.size() || snaps.size() < 2) throw PreconditionError("profile needs matching snapshots");
  const double dt = times[1] - times[0];
  for (size_t k = 1; k < times.size(); ++k)
    if (std::abs(times[k] - times[k - 1] - dt) > 1e-9 * std::max(1.0, std::abs(times[k])))
      throw PreconditionError("profile snapshots must be equispaced");
  if (dt > 2 * kPi / lambda / 64 * (1 + 1e-12))
    throw PreconditionError("profile needs at least 64 samples per forcing period");
  const double T = dt * static_cast<double>(times.size());
  GridField out = snaps.front();
  out.complex = true;
  std::fill(out.values.begin(), out.values.end(), cplx(0));
  for (size_t k = 0; k < snaps.size(); ++k) {
    if (!snaps[k].same_grid(out)) throw DomainError("profile snapshots live on different grids");
    cplx e = std::exp(-I * lambda * times[k]) * (2.0 * dt / T);
    for (size_t n = 0; n < out.size(); ++n) out.values[n] += snaps[k].values[n] * e;
  }
  out.normalize();
  return out;
}

}  // namespace iwave
