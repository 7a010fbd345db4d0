#include "iwave/escape.hpp"

#include <algorithm>
#include <limits>

namespace iwave {

namespace {

double nearest(const std::vector<double>& set, double t, double L) {
  double best = std::numeric_limits<double>::infinity();
  for (double s : set) best = std::min(best, circle_distance(s, t, L));
  return best;
}

// C2 quintic ramp from 0 at t = 0 to 1 at t = 1.
double smoothstep5(double t) {
  t = std::clamp(t, 0.0, 1.0);
  return t * t * t * (10 + t * (-15 + 6 * t));
}

}  // namespace

AdaptedCoordinate::AdaptedCoordinate(double period, std::vector<double> weight)
    : L_(period), w_(std::move(weight)) {
  const size_t M = w_.size();
  Theta_.assign(M + 1, 0.0);
  double h = L_ / M;
  for (size_t k = 0; k < M; ++k) Theta_[k + 1] = Theta_[k] + 0.5 * h * (w_[k] + w_[(k + 1) % M]);
  double total = Theta_[M];
  for (double& v : Theta_) v *= L_ / total;
  Theta_[M] = L_;
}

double AdaptedCoordinate::to_adapted(double theta) const {
  const size_t M = w_.size();
  double m = std::floor(theta / L_);
  double r = theta - m * L_;
  double u = r / L_ * M;
  size_t k = std::min(static_cast<size_t>(u), M - 1);
  double f = u - static_cast<double>(k);
  return Theta_[k] + f * (Theta_[k + 1] - Theta_[k]) + m * L_;
}

double AdaptedCoordinate::from_adapted(double Theta) const {
  const size_t M = w_.size();
  double m = std::floor(Theta / L_);
  double r = Theta - m * L_;
  size_t k = std::upper_bound(Theta_.begin(), Theta_.end(), r) - Theta_.begin();
  k = std::clamp<size_t>(k, 1, M) - 1;
  double f = (r - Theta_[k]) / (Theta_[k + 1] - Theta_[k]);
  return (static_cast<double>(k) + f) * L_ / M + m * L_;
}

double AdaptedCoordinate::weight(double theta) const {
  const size_t M = w_.size();
  double r = theta - L_ * std::floor(theta / L_);
  double u = r / L_ * M;
  size_t k = std::min(static_cast<size_t>(u), M - 1);
  double f = u - static_cast<double>(k);
  return (1 - f) * w_[k] + f * w_[(k + 1) % M];
}

AdaptedCoordinate adapted_coordinate(const BilliardMap& bmap, const MorseSmaleReport& report, int samples) {
  if (!report.certified()) throw PreconditionError("adapted coordinate needs a certified report");
  const double L = bmap.period();
  std::vector<double> w(samples);
  for (int k = 0; k < samples; ++k) {
    double t = L * k / samples, d = 1, sum = 0;
    for (long j = 0; j < report.n; ++j) {
      sum += std::abs(d);
      d *= bmap.map_derivative(t);
      t = bmap.map(t);
    }
    w[k] = sum;
  }
  return AdaptedCoordinate(L, std::move(w));
}

double adapted_map_derivative(const AdaptedCoordinate& coord, const BilliardMap& bmap, double theta) {
  return coord.weight(bmap.map(theta)) * bmap.map_derivative(theta) / coord.weight(theta);
}

double EscapeFunction::forward(double Theta) const {
  return coord_.to_adapted(bmap_->map(coord_.from_adapted(Theta)));
}

double EscapeFunction::step(double Theta) const {
  return coord_.to_adapted(bmap_->map(coord_.from_adapted(Theta), direction));
}

double EscapeFunction::dist_attracting(double Theta) const { return nearest(attract_, Theta, coord_.period()); }

double EscapeFunction::dist_repelling(double Theta) const { return nearest(repel_, Theta, coord_.period()); }

double EscapeFunction::chi(double Theta) const {
  return smoothstep5((delta - dist_attracting(Theta)) / (delta - delta1));
}

double EscapeFunction::operator()(double Theta) const {
  double avg = 0, x = Theta;
  for (long j = 0; j < N; ++j) {
    avg += chi(x);
    x = step(x);
  }
  avg /= static_cast<double>(N);
  // In the construction's labels the attracting-side level is a_att and the other a_rep.
  double a_att = direction == Direction::forward ? alpha_plus : alpha_minus;
  double a_rep = direction == Direction::forward ? alpha_minus : alpha_plus;
  return static_cast<double>(N) * a_rep - static_cast<double>(N - 1) * a_att -
         static_cast<double>(N) * (a_rep - a_att) * avg;
}

EscapeFunction build_escape_function(const BilliardMap& bmap, const MorseSmaleReport& report,
                                     double alpha_minus, double alpha_plus, double delta,
                                     Direction direction, int propagation_grid) {
  if (!report.certified()) throw PreconditionError("escape function needs a certified report");
  if (alpha_minus == alpha_plus) throw PreconditionError("escape function needs alpha_- != alpha_+");
  if (!(delta > 0)) throw PreconditionError("escape function needs delta > 0");

  EscapeFunction g;
  g.bmap_ = &bmap;
  g.alpha_minus = alpha_minus;
  g.alpha_plus = alpha_plus;
  g.delta = delta;
  g.direction = direction;
  g.coord_ = adapted_coordinate(bmap, report);
  const double L = bmap.period();
  const auto& att = direction == Direction::forward ? report.sigma_plus : report.sigma_minus;
  const auto& rep = direction == Direction::forward ? report.sigma_minus : report.sigma_plus;
  for (double t : att) g.attract_.push_back(g.coord_.to_adapted(t));
  for (double t : rep) g.repel_.push_back(g.coord_.to_adapted(t));

  const int P = propagation_grid;
  const double cell = L / P;
  const double margin = 2 * cell;

  // Closures of the two neighborhoods must be disjoint.
  for (double a : g.attract_)
    for (double r : g.repel_)
      if (circle_distance(a, r, L) <= 2 * delta + margin)
        throw ShrinkDelta("delta-neighborhoods of the periodic sets overlap");

  // Samples of the closed neighborhoods: grid points plus the exact endpoints.
  auto closure = [&](const std::vector<double>& set) {
    std::vector<double> pts;
    for (double c : set) {
      for (int k = -P; k <= P; ++k) {
        double off = delta * k / P;
        pts.push_back(c + off);
      }
    }
    return pts;
  };
  auto inverse_step = [&](double Theta) {
    Direction inv = direction == Direction::forward ? Direction::backward : Direction::forward;
    return g.coord_.to_adapted(bmap.map(g.coord_.from_adapted(Theta), inv));
  };

  // The map must send the closed attracting neighborhood into the open one,
  // and its inverse must do the same for the repelling one.
  double sup_att = 0;
  std::vector<double> att_closure = closure(g.attract_);
  for (double x : att_closure) sup_att = std::max(sup_att, g.dist_attracting(g.step(x)));
  if (!(sup_att < delta - margin)) throw ShrinkDelta("attracting neighborhood is not mapped into itself");
  for (double x : closure(g.repel_))
    if (!(g.dist_repelling(inverse_step(x)) < delta - margin))
      throw ShrinkDelta("repelling neighborhood is not mapped into itself by the inverse");

  // Largest dyadic delta1 = delta / 2^k (k >= 1) still containing the image.
  double d1 = 0;
  for (int k = 1; k < 60; ++k) {
    double cand = delta / std::ldexp(1.0, k);
    if (sup_att < cand - margin) d1 = cand;
    else break;
  }
  if (!(d1 > 0)) throw ShrinkDelta("no dyadic delta1 contains the image of the attracting neighborhood");
  g.delta1 = d1;

  // N: maximal first-entry time into the delta1-neighborhood from outside the
  // repelling delta-neighborhood. The neighborhood is forward invariant, so
  // the first entry time is also the time after which the point stays.
  long N = 0;
  for (int k = 0; k < P; ++k) {
    double x = L * k / P;
    if (g.dist_repelling(x) < delta) continue;
    long t = 0;
    while (!(g.dist_attracting(x) < d1 - margin)) {
      x = g.step(x);
      if (++t > 100000) throw ShrinkDelta("orbit failed to enter the attracting neighborhood");
    }
    N = std::max(N, t);
  }
  g.N = std::max<long>(N, 1);

  const int S = 8192;
  for (int k = 0; k < S; ++k) {
    double x = L * k / S;
    g.grid.push_back(x);
    g.values.push_back(g(x));
  }
  return g;
}

EscapeFunction build_escape_function_auto(const BilliardMap& bmap, const MorseSmaleReport& report,
                                          double alpha_minus, double alpha_plus, double delta,
                                          Direction direction) {
  for (int i = 0; i < 40; ++i, delta *= 0.5) {
    try {
      return build_escape_function(bmap, report, alpha_minus, alpha_plus, delta, direction);
    } catch (const ShrinkDelta&) {
    }
  }
  throw ShrinkDelta("escape construction failed for every delta tried");
}

namespace {

void record(EscapeCheck& c, double excess) {
  if (excess > 0) {
    c.passed = false;
    ++c.violations;
    c.worst = std::max(c.worst, excess);
  }
}

}  // namespace

EscapeVerification verify_escape_properties(const EscapeFunction& g, long M, int grid) {
  EscapeVerification v;
  v.M = M > 0 ? M : std::max<long>(g.N, 10);
  v.grid = grid;
  const double L = g.coordinate().period();
  const double s = g.alpha_minus > g.alpha_plus ? 1.0 : -1.0;
  // Attracting- and repelling-side levels for the direction the function was built in.
  const bool fwd = g.direction == Direction::forward;
  const double a_att = fwd ? g.alpha_plus : g.alpha_minus;
  const double a_rep = fwd ? g.alpha_minus : g.alpha_plus;
  const double sd = fwd ? s : -s;
  const double gap = std::abs(g.alpha_plus - g.alpha_minus);
  const double tol = 1e-9 * (1 + std::abs(a_att) + std::abs(a_rep)) * static_cast<double>(g.N);

  for (int k = 0; k < grid; ++k) {
    double x = L * k / grid;
    double gx = g(x), gb = g(g.step(x));
    double da = g.dist_attracting(x), dr = g.dist_repelling(x);
    double inc = sd * (gb - gx);
    record(v.monotone, inc - 1e-6);
    if (da >= g.delta && dr >= g.delta) record(v.strict, inc + gap / 2);
    record(v.floor_all, sd * (a_att - gx) - tol);
    if (da >= g.delta) record(v.floor_off_attractor, sd * (a_rep - gx) - tol);
    if (da < g.delta1) record(v.plateau, std::abs(gx - a_att) - tol);
    if (dr >= g.delta) record(v.weighted, static_cast<double>(v.M) * inc + sd * gx - sd * a_att - tol);
  }
  return v;
}

}  // namespace iwave
