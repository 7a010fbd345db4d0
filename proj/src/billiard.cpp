#include "iwave/billiard.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <numeric>

namespace iwave {

BilliardMap::BilliardMap(Domain domain, double lambda)
    : domain_(std::move(domain)), lambda_(lambda), crit_(critical_points(domain_, lambda)) {
  coef_plus_ = ell_coefficients(lambda, Sign::plus);
  coef_minus_ = ell_coefficients(lambda, Sign::minus);
  if (domain_.kind() == DomainKind::polygon) {
    for (const Vec2& v : domain_.vertices()) {
      vertex_ell_plus_.push_back(coef_plus_.dot(v));
      vertex_ell_minus_.push_back(coef_minus_.dot(v));
    }
  }
  lift0_ = domain_.reduce(map(0.0));
}

double BilliardMap::ell_at(double theta, Sign s) const {
  return (s == Sign::plus ? coef_plus_ : coef_minus_).dot(domain_.point(theta));
}

double BilliardMap::ell_derivative(double theta, Sign s, Side side) const {
  return (s == Sign::plus ? coef_plus_ : coef_minus_).dot(domain_.tangent(theta, side));
}

int BilliardMap::nu(double theta, Sign s) const { return sgn(ell_derivative(theta, s)); }

bool BilliardMap::on_increasing_arc(double theta, Sign s) const {
  const CriticalPair& cp = crit_.of(s);
  return domain_.reduce(theta - cp.min.theta) <= domain_.reduce(cp.max.theta - cp.min.theta);
}

double BilliardMap::solve_on_arc(double value, Sign s, double t_from, double t_to) const {
  const Vec2& c = s == Sign::plus ? coef_plus_ : coef_minus_;
  if (domain_.kind() == DomainKind::polygon) {
    const auto& ev = s == Sign::plus ? vertex_ell_plus_ : vertex_ell_minus_;
    const long m = static_cast<long>(ev.size());
    long k0 = std::lround(t_from), k1 = std::lround(t_to);
    double best_t = t_from, best_miss = std::numeric_limits<double>::infinity();
    for (long k = k0; k < k1; ++k) {
      double e0 = ev[((k % m) + m) % m], e1 = ev[(((k + 1) % m) + m) % m];
      double u = (value - e0) / (e1 - e0);
      if (u >= 0 && u <= 1) return static_cast<double>(k) + u;
      double uc = std::clamp(u, 0.0, 1.0);
      double miss = std::abs(e0 + uc * (e1 - e0) - value);
      if (miss < best_miss) {
        best_miss = miss;
        best_t = static_cast<double>(k) + uc;
      }
    }
    return best_t;  // value sits outside the arc range by roundoff only
  }
  double a = t_from, b = t_to;
  double fa = c.dot(domain_.point(a)) - value;
  for (int it = 0; it < 200 && b - a > 1e-14 * domain_.period(); ++it) {
    double mid = 0.5 * (a + b);
    if (mid <= a || mid >= b) break;
    double fm = c.dot(domain_.point(mid)) - value;
    if (fm == 0) return mid;
    if ((fm > 0) == (fa > 0)) {
      a = mid;
      fa = fm;
    } else {
      b = mid;
    }
  }
  return 0.5 * (a + b);
}

double BilliardMap::preimage(double value, Sign s, bool increasing_arc) const {
  const CriticalPair& cp = crit_.of(s);
  const double L = period();
  double tm = cp.min.theta;
  double tM = tm + domain_.reduce(cp.max.theta - tm);
  if (increasing_arc) return domain_.reduce(solve_on_arc(value, s, tm, tM));
  return domain_.reduce(solve_on_arc(value, s, tM, tm + L));
}

double BilliardMap::gamma(double theta, Sign s) const {
  double value = ell_at(theta, s);
  return preimage(value, s, !on_increasing_arc(theta, s));
}

double BilliardMap::gamma_derivative(double theta, Sign s) const {
  double g = gamma(theta, s);
  double num = ell_derivative(theta, s, Side::right);
  double den = ell_derivative(g, s, Side::left);
  if (std::abs(den) < 1e-14) return -1.0;  // smooth critical point
  return num / den;
}

double BilliardMap::map(double theta, Direction dir) const {
  if (dir == Direction::forward) return gamma(gamma(theta, Sign::minus), Sign::plus);
  return gamma(gamma(theta, Sign::plus), Sign::minus);
}

double BilliardMap::map_derivative(double theta, Direction dir) const {
  Sign first = dir == Direction::forward ? Sign::minus : Sign::plus;
  double t1 = gamma(theta, first);
  return gamma_derivative(t1, opposite(first)) * gamma_derivative(theta, first);
}

double BilliardMap::lift(double theta) const {
  const double L = period();
  double m = std::floor(theta / L);
  double r = theta - m * L;
  if (r >= L) {
    r -= L;
    m += 1;
  }
  double v = domain_.reduce(map(r));
  if (v < lift0_) v += L;
  // Roundoff near the ends of the fundamental interval can land on the wrong
  // sheet; resolve it by which end of [0, L) r is closer to.
  if (std::abs(v - lift0_) < 1e-12 * L && r > 0.5 * L) v = lift0_ + L;
  if (std::abs(v - (lift0_ + L)) < 1e-12 * L && r < 0.5 * L) v = lift0_;
  return v + m * L;
}

double gamma(const BilliardMap& bmap, double theta, Sign s) { return bmap.gamma(theta, s); }

double chess_map(const BilliardMap& bmap, double theta, Direction dir) { return bmap.map(theta, dir); }

double lift_value(const BilliardMap& bmap, double theta) { return bmap.lift(theta); }

double circle_distance(double a, double b, double L) {
  double d = std::fmod(std::abs(a - b), L);
  return std::min(d, L - d);
}

OrbitResult orbit(const BilliardMap& bmap, double theta0, const OrbitOptions& opts) {
  const double L = bmap.period();
  OrbitResult res;
  res.samples.reserve(static_cast<size_t>(std::min<long>(opts.max_iter, 1 << 20)) + 1);
  res.samples.push_back(bmap.domain().reduce(theta0));
  const auto& s = res.samples;

  auto detect = [&](long k) -> long {
    for (long n = 1; n <= opts.max_period; ++n) {
      long span = opts.confirm_periods * n;
      if (k - span - n + 1 < 0) break;
      if (circle_distance(s[k], s[k - n], L) >= opts.tol) continue;
      bool ok = true;
      for (long j = k - span + 1; j <= k && ok; ++j) ok = circle_distance(s[j], s[j - n], L) < opts.tol;
      if (ok) return n;
    }
    return 0;
  };

  long next_check = 32;
  for (long k = 1; k <= opts.max_iter; ++k) {
    res.samples.push_back(bmap.map(s.back()));
    if (k != next_check && k != opts.max_iter) continue;
    next_check *= 2;
    long n = detect(k);
    if (n == 0) continue;
    res.converged = true;
    res.cycle.assign(s.begin() + (k - n + 1), s.begin() + k + 1);
    for (long j = 0; j <= k; ++j) {
      double best = L;
      for (double c : res.cycle) best = std::min(best, circle_distance(s[j], c, L));
      if (best < opts.tol) {
        res.entry_index = j;
        break;
      }
    }
    break;
  }
  return res;
}

std::string RotationNumber::to_string() const {
  if (exact) return std::to_string(q) + "/" + std::to_string(n);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12f", value);
  return buf;
}

RotationNumber rotation_number(const BilliardMap& bmap, const OrbitOptions& opts) {
  const double L = bmap.period();
  RotationNumber rot;
  OrbitResult orb = orbit(bmap, 0.0, opts);

  if (orb.converged && !orb.cycle.empty()) {
    long n = static_cast<long>(orb.cycle.size());
    std::vector<double> sorted = orb.cycle;
    std::sort(sorted.begin(), sorted.end());
    auto index_of = [&](double t) {
      return std::min_element(sorted.begin(), sorted.end(),
                              [&](double a, double b) {
                                return circle_distance(a, t, L) < circle_distance(b, t, L);
                              }) -
             sorted.begin();
    };
    // The shift must agree with the lifted displacement of the cycle. A fixed
    // point has no cyclic order, so its q (0 or 1) comes from the lift alone.
    double x = orb.cycle[0];
    for (long i = 0; i < n; ++i) x = bmap.lift(x);
    double turns = (x - orb.cycle[0]) / L;
    long q = n == 1 ? std::lround(turns) : ((index_of(orb.cycle[1]) - index_of(orb.cycle[0])) % n + n) % n;
    if (std::gcd(q, n) == 1 && std::abs(turns - static_cast<double>(q)) < 1e-6) {
      rot.exact = true;
      rot.q = q;
      rot.n = n;
      rot.value = static_cast<double>(q) / static_cast<double>(n);
      rot.cycle = orb.cycle;
      rot.detected_at = orb.entry_index;
      return rot;
    }
  }

  double x = 0.0;
  for (long k = 0; k < opts.max_iter; ++k) x = bmap.lift(x);
  rot.value = x / (static_cast<double>(opts.max_iter) * L);
  rot.error_bound = 1.0 / static_cast<double>(opts.max_iter);
  return rot;
}

namespace {

double lift_power(const BilliardMap& bmap, double theta, long n) {
  for (long i = 0; i < n; ++i) theta = bmap.lift(theta);
  return theta;
}

}  // namespace

MorseSmaleReport find_periodic_points(const BilliardMap& bmap, const RotationNumber& rot,
                                      const PeriodicOptions& opts) {
  if (!rot.exact) throw NoPeriodicOrbit("rotation number not detected as rational");
  const double L = bmap.period();
  const long n = rot.n, q = rot.q;
  MorseSmaleReport rep;
  rep.lambda = bmap.lambda();
  rep.n = n;
  rep.q = q;
  rep.rotation = rot;
  rep.flags.lambda_simple = true;

  auto disp = [&](double t) { return lift_power(bmap, t, n) - t - static_cast<double>(q) * L; };
  const int G = opts.grid;
  std::vector<double> vals(G);
  int flat = 0;
  for (int k = 0; k < G; ++k) {
    vals[k] = disp(L * k / G);
    if (std::abs(vals[k]) < 1e-9) ++flat;
  }
  if (flat > G / 10) {
    rep.degenerate_continuum = true;
    rep.flags.periodic_nonempty = true;
    rep.message = "displacement vanishes on an interval: periodic points are not isolated";
    return rep;
  }

  std::vector<double> roots;
  for (int k = 0; k < G; ++k) {
    double f0 = vals[k], f1 = vals[(k + 1) % G];
    if (f0 == 0) {
      roots.push_back(L * k / G);
      continue;
    }
    if (f1 == 0 || (f0 > 0) == (f1 > 0)) continue;
    double a = L * k / G, b = L * (k + 1) / G, fa = f0;
    while (b - a > opts.root_tol) {
      double mid = 0.5 * (a + b);
      if (mid <= a || mid >= b) break;
      double fm = disp(mid);
      if (fm == 0) {
        a = b = mid;
        break;
      }
      if ((fm > 0) == (fa > 0)) {
        a = mid;
        fa = fm;
      } else {
        b = mid;
      }
    }
    roots.push_back(bmap.domain().reduce(0.5 * (a + b)));
  }
  std::sort(roots.begin(), roots.end());
  std::vector<double> unique;
  for (double r : roots)
    if (unique.empty() || r - unique.back() > opts.dedup) unique.push_back(r);
  if (unique.size() > 1 && circle_distance(unique.front(), unique.back(), L) <= opts.dedup)
    unique.pop_back();

  rep.flags.periodic_nonempty = !unique.empty();
  bool hyperbolic = !unique.empty();
  std::vector<int> orbit_of(unique.size(), -1);
  int orbits = 0;
  for (size_t i = 0; i < unique.size(); ++i) {
    PeriodicPoint p;
    p.theta = unique[i];
    double mult = 1, t = p.theta;
    for (long j = 0; j < n; ++j) {
      mult *= bmap.map_derivative(t);
      t = bmap.map(t);
    }
    p.multiplier = mult;
    p.attracting = mult < 1;
    if (std::abs(mult - 1) <= opts.hyperbolic_margin) hyperbolic = false;
    p.nu_plus = bmap.nu(p.theta, Sign::plus);
    p.nu_minus = bmap.nu(p.theta, Sign::minus);
    if (orbit_of[i] < 0) {
      double s = p.theta;
      for (long j = 0; j < n; ++j) {
        for (size_t k = 0; k < unique.size(); ++k)
          if (orbit_of[k] < 0 && circle_distance(unique[k], s, L) < 1e-7) orbit_of[k] = orbits;
        s = bmap.map(s);
      }
      if (orbit_of[i] < 0) orbit_of[i] = orbits;
      ++orbits;
    }
    p.orbit = orbit_of[i];
    rep.points.push_back(p);
    (p.attracting ? rep.sigma_plus : rep.sigma_minus).push_back(p.theta);
  }
  rep.flags.hyperbolic = hyperbolic;
  if (rep.sigma_plus.size() != rep.sigma_minus.size()) {
    rep.flags.hyperbolic = false;
    rep.message = "attracting and repelling sets differ in size";
  }

  rep.min_corner_distance = std::numeric_limits<double>::infinity();
  for (double c : bmap.domain().corners())
    for (double t : unique) rep.min_corner_distance = std::min(rep.min_corner_distance, circle_distance(c, t, L));
  rep.flags.corner_free = rep.min_corner_distance > 10 * opts.corner_tol;
  if (rep.message.empty() && !rep.flags.periodic_nonempty) rep.message = "no periodic points found";
  if (rep.message.empty() && !rep.flags.hyperbolic) rep.message = "a periodic point is not hyperbolic";
  if (rep.message.empty() && !rep.flags.corner_free) rep.message = "a periodic point sits at a corner";
  return rep;
}

MorseSmaleReport find_periodic_points(const BilliardMap& bmap) {
  return find_periodic_points(bmap, rotation_number(bmap));
}

MorseSmaleReport certify_morse_smale(const Domain& domain, double lambda,
                                     const OrbitOptions& orbit_opts,
                                     const PeriodicOptions& periodic_opts) {
  MorseSmaleReport rep;
  rep.lambda = lambda;
  rep.min_corner_distance = std::numeric_limits<double>::infinity();
  try {
    BilliardMap bmap(domain, lambda);
    RotationNumber rot = rotation_number(bmap, orbit_opts);
    if (!rot.exact) {
      rep.flags.lambda_simple = true;
      rep.rotation = rot;
      rep.message = "rotation number not detected as rational";
      return rep;
    }
    return find_periodic_points(bmap, rot, periodic_opts);
  } catch (const NotLambdaSimple& e) {
    rep.message = std::string("not lambda-simple: ") + e.what();
    return rep;
  }
}

AttractorSkeleton attractor_skeleton(const BilliardMap& bmap, const MorseSmaleReport& report,
                                     Attractor which) {
  if (!report.certified()) throw PreconditionError("attractor skeleton needs a certified report");
  AttractorSkeleton sk;
  sk.which = which;
  const auto& pos = which == Attractor::lambda_plus ? report.sigma_plus : report.sigma_minus;
  const auto& neg = which == Attractor::lambda_plus ? report.sigma_minus : report.sigma_plus;
  auto add = [&](double y, Sign s, int tag) {
    SkeletonSegment seg;
    seg.sign = s;
    seg.tag = tag;
    seg.source = y;
    seg.theta_a = y;
    seg.theta_b = bmap.gamma(y, s);
    seg.a = bmap.domain().point(seg.theta_a);
    seg.b = bmap.domain().point(seg.theta_b);
    seg.source_nu = bmap.nu(y, s);
    seg.tau_sign = tag * seg.source_nu;
    sk.segments.push_back(seg);
  };
  // Positive conormal half over the minus-chords of the first set, negative
  // half over the plus-chords of the second.
  for (double y : pos) add(y, Sign::minus, +1);
  for (double y : neg) add(y, Sign::plus, -1);
  return sk;
}

Pushforward pushforward_density(const BilliardMap& bmap, Sign s, const std::function<double(double)>& f,
                                const std::vector<double>& s_grid) {
  const CriticalPair& cp = bmap.critical().of(s);
  Pushforward out;
  for (double v : s_grid) {
    if (!(v > cp.ell_min && v < cp.ell_max))
      throw DomainError("pushforward: level outside the open range of ell");
    double t_up = bmap.preimage(v, s, true), t_dn = bmap.preimage(v, s, false);
    double pi = f(t_up) / std::abs(bmap.ell_derivative(t_up, s)) +
                f(t_dn) / std::abs(bmap.ell_derivative(t_dn, s));
    out.s.push_back(v);
    out.pi.push_back(pi);
    out.upsilon.push_back(f(t_up) + f(t_dn));
  }
  return out;
}

namespace {

struct Linearizer {
  const BilliardMap& bmap;
  long n, q;
  double star, a, c2, small;

  double F(double t) const {
    return lift_power(bmap, t, n) - static_cast<double>(q) * bmap.period();
  }

  double h(double theta) const {
    // Stop once the neglected cubic term of the quadratic chart, estimated as
    // c2^2 z^3 and rescaled by a^-k, is below roundoff, or z is tiny anyway.
    double x = theta, scale = 1.0;
    long k = 0;
    while (k < 100000) {
      double z = x - star;
      if (std::abs(z) <= small || scale * c2 * c2 * std::abs(z * z * z) < 1e-15) break;
      x = F(x);
      scale /= a;
      ++k;
    }
    double z = x - star;
    return scale * (z + c2 * z * z);
  }
};

Linearizer make_linearizer(const BilliardMap& bmap, const MorseSmaleReport& report, double theta_star) {
  if (!report.flags.periodic_nonempty || report.n <= 0)
    throw PreconditionError("schroder chart needs periodic points");
  const double L = bmap.period();
  const PeriodicPoint* p = nullptr;
  for (const auto& pt : report.points)
    if (circle_distance(pt.theta, theta_star, L) < 1e-8) p = &pt;
  if (!p || !(p->multiplier > 0 && p->multiplier < 1))
    throw PreconditionError("schroder chart needs an attracting periodic point");
  Linearizer lin{bmap, report.n, report.q, p->theta, p->multiplier, 0, 1e-5 * L};
  for (int it = 0; it < 3; ++it) lin.star -= (lin.F(lin.star) - lin.star) / (lin.a - 1);
  // Quadratic term of h from the second derivative of F at the fixed point.
  // A second difference at rounding level means F is affine there.
  double eta = 1e-4 * L;
  double g2 = 0.5 * (lin.F(lin.star + eta) - 2 * lin.F(lin.star) + lin.F(lin.star - eta)) / (eta * eta);
  double noise = 64 * std::numeric_limits<double>::epsilon() * L / (eta * eta);
  if (std::abs(g2) < noise) g2 = 0;
  lin.c2 = g2 / (lin.a - lin.a * lin.a);
  return lin;
}

}  // namespace

double schroder_value(const BilliardMap& bmap, const MorseSmaleReport& report, double theta_star,
                      double theta) {
  Linearizer lin = make_linearizer(bmap, report, theta_star);
  // Put theta on the sheet of the lift closest to the fixed point.
  const double L = bmap.period();
  theta -= L * std::round((theta - lin.star) / L);
  return lin.h(theta);
}

SchroderChart schroder_chart(const BilliardMap& bmap, const MorseSmaleReport& report, double theta_star,
                             double radius, int samples) {
  Linearizer lin = make_linearizer(bmap, report, theta_star);
  SchroderChart ch;
  ch.theta_star = lin.star;
  ch.multiplier = lin.a;
  for (int i = 0; i < samples; ++i) {
    double t = lin.star - radius + 2 * radius * i / std::max(1, samples - 1);
    ch.theta.push_back(t);
    ch.h.push_back(lin.h(t));
  }
  return ch;
}

RotationPlateau find_rotation_plateau(const Domain& domain, long q, long n, double lo, double hi,
                                      double tol) {
  const double target = static_cast<double>(q) / static_cast<double>(n);
  // -1 below the plateau, 0 on it, +1 above; non-lambda-simple points count as
  // unknown and are nudged.
  auto side = [&](double lam) -> int {
    for (int attempt = 0; attempt < 4; ++attempt) {
      try {
        BilliardMap bmap(domain, lam);
        RotationNumber r = rotation_number(bmap);
        if (r.exact && r.q == q && r.n == n) return 0;
        return r.value < target ? -1 : 1;
      } catch (const NotLambdaSimple&) {
        lam += 1e-9;
      }
    }
    return 2;
  };
  RotationPlateau out;
  double a = lo, b = hi, mid = 0;
  int sm = 0;
  for (int it = 0; it < 200; ++it) {
    mid = 0.5 * (a + b);
    sm = side(mid);
    if (sm == 0 || sm == 2) break;
    if (sm < 0) a = mid;
    else b = mid;
    if (b - a < tol) break;
  }
  if (sm != 0) return out;
  double l0 = a, l1 = mid;  // plateau's left end lies in (l0, l1]
  while (l1 - l0 > tol) {
    double m = 0.5 * (l0 + l1);
    if (side(m) == 0) l1 = m;
    else l0 = m;
  }
  double r0 = mid, r1 = b;  // right end in [r0, r1)
  while (r1 - r0 > tol) {
    double m = 0.5 * (r0 + r1);
    if (side(m) == 0) r0 = m;
    else r1 = m;
  }
  out.found = true;
  out.lo = l1;
  out.hi = r0;
  out.center = 0.5 * (l1 + r0);
  return out;
}

double monotonicity_probe(const Domain& domain, double theta, double lambda, double h) {
  BilliardMap b0(domain, lambda), b1(domain, lambda + h);
  return (b1.lift(theta) - b0.lift(theta)) / h;
}

}  // namespace iwave
