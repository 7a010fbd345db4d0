#include "doctest.h"

#include <algorithm>

#include "iwave/geometry.hpp"

using namespace iwave;

namespace {

const double kAlpha = kPi / 10;

double polygon_distance(const std::vector<Vec2>& v, const Vec2& p) {
  double best = 1e300;
  for (size_t i = 0; i < v.size(); ++i) {
    Vec2 a = v[i], b = v[(i + 1) % v.size()];
    double t = std::clamp((p - a).dot(b - a) / (b - a).squaredNorm(), 0.0, 1.0);
    best = std::min(best, (p - (a + t * (b - a))).norm());
  }
  return best;
}

}  // namespace

TEST_CASE("ell trivial values and branch") {
  CHECK(ell(Vec2(0.8, 0), 0.8, Sign::plus) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(ell(Vec2(0, 0), 0.8, Sign::minus) == 0.0);
  cplx w(0.8, 0.0);
  CHECK(std::abs(ell(Vec2(0.3, 0.7), w, Sign::plus) - ell(Vec2(0.3, 0.7), 0.8, Sign::plus)) < 1e-15);
  CHECK_THROWS_AS(ell(Vec2(1, 1), cplx(1.2, 0.1), Sign::plus), DomainError);
  CHECK_THROWS_AS(ell(Vec2(1, 1), 0.0, Sign::plus), DomainError);
}

TEST_CASE("ell factorizes the dual quadratic form") {
  Halton h;
  const double lam = 0.8;
  for (int i = 0; i < 100; ++i) {
    Vec2 x = 4.0 * h.next2() - Vec2(2, 2);
    double q = -x.x() * x.x() / (lam * lam) + x.y() * x.y() / (1 - lam * lam);
    CHECK(std::abs(ell(x, lam, Sign::plus) * ell(x, lam, Sign::minus) - q) < 1e-14 * (1 + std::abs(q)) * 10);
  }
}

TEST_CASE("lambda derivative identity of ell") {
  Halton h;
  const double lam = 0.7, d = 1e-6;
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    Vec2 x = 2.0 * h.next2() - Vec2(1, 1);
    for (Sign s : {Sign::plus, Sign::minus}) {
      double fd = (ell(x, lam + d, s) - ell(x, lam - d, s)) / (2 * d);
      double id = (2 * lam * lam - 1) / (2 * lam * (1 - lam * lam)) * ell(x, lam, s) +
                  1 / (2 * lam * (1 - lam * lam)) * ell(x, lam, opposite(s));
      worst = std::max(worst, std::abs(fd - id));
    }
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("mirror swaps ell_plus and ell_minus") {
  Halton h;
  for (int i = 0; i < 200; ++i) {
    Vec2 x = h.next2();
    CHECK(ell(Vec2(-x.x(), x.y()), 0.6, Sign::plus) == doctest::Approx(ell(x, 0.6, Sign::minus)).epsilon(1e-15));
  }
}

TEST_CASE("make_domain builds the example polygons") {
  Domain sq = make_domain(parse_domain_spec("tilted-square:0.3141592653589793"));
  REQUIRE(sq.vertices().size() == 4);
  CHECK((sq.vertices()[1] - Vec2(std::cos(kAlpha), std::sin(kAlpha))).norm() < 1e-15);
  CHECK((sq.vertices()[2] - std::sqrt(2.0) * Vec2(std::cos(kAlpha + kPi / 4), std::sin(kAlpha + kPi / 4))).norm() <
        1e-15);
  CHECK(sq.period() == 4.0);

  Domain tr = make_domain(parse_domain_spec("trapezium:0.5"));
  CHECK((tr.vertices()[1] - Vec2(1.5, 0)).norm() == 0.0);
  CHECK((tr.vertices()[2] - Vec2(1, 1)).norm() == 0.0);

  CHECK_THROWS_AS(make_domain(parse_domain_spec("polygon:0,0;0,1;1,1;1,0")), ConfigError);
  CHECK_THROWS_AS(make_domain(parse_domain_spec("polygon:0,0;1,1;1,0;0,1")), ConfigError);
  CHECK_THROWS_AS(parse_domain_spec("hexagon:1"), ConfigError);
  CHECK_THROWS_AS(parse_domain_spec("trapezium:abc"), ConfigError);

  DomainSpec r = parse_domain_spec("rounded:0.02:trapezium:0.5");
  CHECK(make_domain(r).kind() == DomainKind::rounded_polygon);
  CHECK(parse_domain_spec(r.to_string()).to_string() == r.to_string());
}

TEST_CASE("parametrization is periodic and regular") {
  std::vector<Domain> ds = {tilted_square(kAlpha), trapezium(0.5), Domain::ellipse(1, 0.6),
                            round_polygon(trapezium(0.5), 0.02)};
  for (const Domain& d : ds) {
    Halton h;
    for (int i = 0; i < 1000; ++i) {
      double t = d.period() * h.next1();
      CHECK((d.point(t + d.period()) - d.point(t)).norm() == 0.0);
      CHECK(d.tangent(t + 0.5e-3).norm() > 0);
    }
  }
}

TEST_CASE("boundary derivative of ell") {
  // Axis-aligned square: on the vertical edge from (1,0) to (1,1) only x2 moves.
  Domain sq = tilted_square(0.0);
  OneSided d = boundary_ell_derivative(sq, 1.5, 0.8, Sign::plus);
  CHECK(d.right == doctest::Approx(1.0 / std::sqrt(1 - 0.64)).epsilon(1e-14));

  Domain om = tilted_square(kAlpha);
  for (int c = 0; c < 4; ++c) {
    OneSided o = boundary_ell_derivative(om, c, 0.8, Sign::plus);
    CHECK(o.corner);
    bool flips = o.left * o.right < 0;
    CHECK(flips == (c == 0 || c == 2));
  }

  Domain el = Domain::ellipse(1, 0.6);
  for (Sign s : {Sign::plus, Sign::minus}) {
    const int n = 10000;
    int zeros = 0;
    double prev = boundary_ell_derivative(el, 0, 0.7, s).right;
    for (int k = 1; k <= n; ++k) {
      double cur = boundary_ell_derivative(el, double(k) / n, 0.7, s).right;
      if ((cur > 0) != (prev > 0)) ++zeros;
      prev = cur;
    }
    CHECK(zeros == 2);
  }
}

TEST_CASE("critical points of the example domains") {
  CharacteristicPoints cp = critical_points(tilted_square(kAlpha), 0.8);
  std::vector<double> plus = {cp.plus.min.theta, cp.plus.max.theta};
  std::vector<double> minus = {cp.minus.min.theta, cp.minus.max.theta};
  std::sort(plus.begin(), plus.end());
  std::sort(minus.begin(), minus.end());
  CHECK(plus == std::vector<double>{0, 2});
  CHECK(minus == std::vector<double>{1, 3});

  double c = 1.25, lam = c / std::sqrt(1 + c * c);
  CharacteristicPoints ct = critical_points(trapezium(0.5), lam);
  CHECK(std::min(ct.plus.min.theta, ct.plus.max.theta) == 0);
  CHECK(std::max(ct.plus.min.theta, ct.plus.max.theta) == 2);
  CHECK(std::min(ct.minus.min.theta, ct.minus.max.theta) == 1);
  CHECK(std::max(ct.minus.min.theta, ct.minus.max.theta) == 3);

  CharacteristicPoints cd = critical_points(Domain::ellipse(1, 1), 0.5);
  for (Sign s : {Sign::plus, Sign::minus}) {
    double gap = std::fmod(cd.of(s).max.theta - cd.of(s).min.theta + 1.0, 1.0);
    CHECK(std::abs(gap - 0.5) < 1e-10);
  }
}

TEST_CASE("critical point extremality and stability") {
  Domain el = Domain::fourier(Vec2::Zero(), {Vec2(1, 0), Vec2(0.05, 0.02)}, {Vec2(0, 0.7), Vec2(0.03, -0.04)});
  const double lam = 0.63;
  CharacteristicPoints cp = critical_points(el, lam);
  for (Sign s : {Sign::plus, Sign::minus}) {
    const CriticalPair& p = cp.of(s);
    for (int k = 0; k < 4096; ++k) {
      double v = ell(el.point(k / 4096.0), lam, s);
      CHECK(v >= p.ell_min - 1e-14);
      CHECK(v <= p.ell_max + 1e-14);
    }
  }
  CharacteristicPoints cq = critical_points(el, lam + 1e-9);
  CHECK(std::abs(cq.plus.min.theta - cp.plus.min.theta) < 1e-6);
  CHECK(std::abs(cq.plus.max.theta - cp.plus.max.theta) < 1e-6);
  CHECK(std::abs(cq.minus.min.theta - cp.minus.min.theta) < 1e-6);
  CHECK(std::abs(cq.minus.max.theta - cp.minus.max.theta) < 1e-6);
}

TEST_CASE("degenerate critical sets are rejected") {
  // At lambda = cos(alpha) the first edge of the tilted square is a level line of ell_-.
  double lam = std::cos(kAlpha);
  CHECK_THROWS_AS(critical_points(tilted_square(kAlpha), lam), NotLambdaSimple);
  try {
    critical_points(tilted_square(kAlpha), lam);
  } catch (const NotLambdaSimple& e) {
    CHECK(!e.thetas().empty());
  }
}

TEST_CASE("rounding") {
  Domain sq = tilted_square(0.0);
  double prev = 0;
  for (double eps : {0.2, 0.1, 0.05, 0.01, 0.001}) {
    double len = round_polygon(sq, eps).boundary_length();
    CHECK(len < 4.0);
    CHECK(len > prev);
    // Each right-angle corner trades 2 eps of edge for a quarter circle of radius eps.
    CHECK(4.0 - len == doctest::Approx(4 * eps * (2 - kPi / 2)).epsilon(1e-12));
    prev = len;
  }

  Domain tr = trapezium(0.5);
  const double eps = 0.02;
  Domain r = round_polygon(tr, eps);
  CHECK(r.period() == tr.period());
  for (int k = 0; k < 8000; ++k) {
    double t = 4.0 * k / 8000;
    Vec2 p = r.point(t);
    double dv = 1e300;
    for (const Vec2& v : tr.vertices()) dv = std::min(dv, (p - v).norm());
    if (dv >= eps) CHECK(polygon_distance(tr.vertices(), p) < 1e-12);
    // C1: tangent direction continuous across arc junctions.
    Vec2 a = r.tangent(t - 1e-9).normalized(), b = r.tangent(t + 1e-9).normalized();
    CHECK((a - b).norm() < 1e-6);
  }
  CHECK_THROWS_AS(round_polygon(tr, 0.6), GeometryError);
  CHECK_THROWS_AS(round_polygon(tr, -0.1), GeometryError);
}

TEST_CASE("inclusion and distance") {
  Domain tr = trapezium(0.5);
  CHECK(tr.contains(Vec2(0.5, 0.5)));
  CHECK(!tr.contains(Vec2(1.4, 0.9)));
  CHECK(tr.distance_to_boundary(Vec2(0.5, 0.5)) == doctest::Approx(0.5));
  Domain el = Domain::ellipse(1, 0.6);
  CHECK(el.contains(Vec2(0.9, 0)));
  CHECK(!el.contains(Vec2(0.9, 0.5)));
  CHECK(el.area() == doctest::Approx(kPi * 0.6).epsilon(1e-5));
}
