#include "iwave/geometry.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <sstream>

namespace iwave {

namespace {

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

double signed_area(const std::vector<Vec2>& pts) {
  double s = 0;
  for (size_t i = 0; i < pts.size(); ++i) s += cross(pts[i], pts[(i + 1) % pts.size()]);
  return 0.5 * s;
}

bool segments_intersect(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2) {
  double d1 = cross(p2 - p1, q1 - p1), d2 = cross(p2 - p1, q2 - p1);
  double d3 = cross(q2 - q1, p1 - q1), d4 = cross(q2 - q1, p2 - q1);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
    return true;
  auto on_segment = [](const Vec2& a, const Vec2& b, const Vec2& p, double d) {
    return d == 0 && std::min(a.x(), b.x()) <= p.x() && p.x() <= std::max(a.x(), b.x()) &&
           std::min(a.y(), b.y()) <= p.y() && p.y() <= std::max(a.y(), b.y());
  };
  return on_segment(p1, p2, q1, d1) || on_segment(p1, p2, q2, d2) || on_segment(q1, q2, p1, d3) ||
         on_segment(q1, q2, p2, d4);
}

bool closed_polyline_is_simple(const std::vector<Vec2>& pts) {
  size_t n = pts.size();
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;  // adjacent through the wrap
      if (segments_intersect(pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n])) return false;
    }
  }
  return true;
}

double segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  Vec2 ab = b - a;
  double len2 = ab.squaredNorm();
  double t = len2 > 0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (p - (a + t * ab)).norm();
}

double parse_number(const std::string& s, const std::string& context) {
  try {
    size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("domain spec: cannot parse number '" + s + "' in " + context);
  }
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

const char* kind_name(DomainKind k) {
  switch (k) {
    case DomainKind::smooth:
      return "smooth";
    case DomainKind::polygon:
      return "polygon";
    case DomainKind::rounded_polygon:
      return "rounded-polygon";
  }
  return "unknown";
}

Domain Domain::polygon(std::vector<Vec2> vertices) {
  if (vertices.size() < 3) throw ConfigError("polygon needs at least 3 vertices");
  for (size_t i = 0; i < vertices.size(); ++i) {
    if (!vertices[i].allFinite()) throw ConfigError("polygon vertex is not finite");
    if ((vertices[(i + 1) % vertices.size()] - vertices[i]).norm() == 0)
      throw ConfigError("polygon has a zero-length edge at vertex " + std::to_string(i));
  }
  if (!closed_polyline_is_simple(vertices)) throw ConfigError("polygon is not simple");
  if (signed_area(vertices) <= 0) throw ConfigError("polygon vertices are not counterclockwise");

  Domain d;
  d.kind_ = DomainKind::polygon;
  d.period_ = static_cast<double>(vertices.size());
  d.vertices_ = std::move(vertices);
  for (size_t i = 0; i < d.vertices_.size(); ++i) d.corners_.push_back(static_cast<double>(i));
  d.outline_ = std::make_shared<const std::vector<Vec2>>(d.vertices_);
  return d;
}

Domain Domain::ellipse(double a, double b, Vec2 center) {
  if (!(a > 0 && b > 0)) throw ConfigError("ellipse semi-axes must be positive");
  return fourier(center, {Vec2(a, 0)}, {Vec2(0, b)});
}

Domain Domain::fourier(Vec2 center, std::vector<Vec2> cos_k, std::vector<Vec2> sin_k) {
  if (cos_k.size() != sin_k.size() || cos_k.empty())
    throw ConfigError("fourier curve needs matching, nonempty coefficient lists");
  Domain d;
  d.kind_ = DomainKind::smooth;
  d.period_ = 1.0;
  d.center_ = center;
  d.cos_k_ = std::move(cos_k);
  d.sin_k_ = std::move(sin_k);
  d.build_outline(2048);
  if (signed_area(d.outline()) <= 0) throw ConfigError("smooth curve is not positively oriented");
  if (!closed_polyline_is_simple(d.outline())) throw ConfigError("smooth curve is not simple");
  for (int k = 0; k < 2048; ++k)
    if (!(d.tangent(k / 2048.0).norm() > 0)) throw ConfigError("smooth curve is singular");
  return d;
}

void Domain::build_outline(int samples) {
  auto pts = std::make_shared<std::vector<Vec2>>();
  pts->reserve(samples);
  for (int k = 0; k < samples; ++k) pts->push_back(point(period_ * k / samples));
  outline_ = pts;
}

double Domain::reduce(double theta) const {
  double r = std::fmod(theta, period_);
  if (r < 0) r += period_;
  if (r >= period_) r = 0;
  return r;
}

const Domain::Arc* Domain::arc_at(double t) const {
  for (const Arc& a : arcs_) {
    if (a.sweep == 0) continue;
    double s = t - a.t0;
    s -= period_ * std::floor(s / period_);
    if (s <= a.t1 - a.t0) return &a;
  }
  return nullptr;
}

Vec2 Domain::point(double theta) const {
  double t = reduce(theta);
  switch (kind_) {
    case DomainKind::smooth: {
      Vec2 x = center_;
      for (size_t k = 0; k < cos_k_.size(); ++k) {
        double w = 2 * kPi * (k + 1) * t;
        x += cos_k_[k] * std::cos(w) + sin_k_[k] * std::sin(w);
      }
      return x;
    }
    case DomainKind::rounded_polygon:
      if (const Arc* a = arc_at(t)) {
        double s = t - a->t0;
        s -= period_ * std::floor(s / period_);
        double phi = a->phi0 + a->sweep * s / (a->t1 - a->t0);
        return a->center + a->radius * Vec2(std::cos(phi), std::sin(phi));
      }
      [[fallthrough]];
    case DomainKind::polygon: {
      size_t m = vertices_.size();
      size_t k = std::min(static_cast<size_t>(t), m - 1);
      double u = t - static_cast<double>(k);
      return vertices_[k] + u * (vertices_[(k + 1) % m] - vertices_[k]);
    }
  }
  return Vec2::Zero();
}

Vec2 Domain::tangent(double theta, Side side) const {
  double t = reduce(theta);
  switch (kind_) {
    case DomainKind::smooth: {
      Vec2 v = Vec2::Zero();
      for (size_t k = 0; k < cos_k_.size(); ++k) {
        double f = 2 * kPi * (k + 1), w = f * t;
        v += f * (-cos_k_[k] * std::sin(w) + sin_k_[k] * std::cos(w));
      }
      return v;
    }
    case DomainKind::rounded_polygon:
      if (const Arc* a = arc_at(t)) {
        double s = t - a->t0;
        s -= period_ * std::floor(s / period_);
        double rate = a->sweep / (a->t1 - a->t0);
        double phi = a->phi0 + rate * s;
        return a->radius * rate * Vec2(-std::sin(phi), std::cos(phi));
      }
      [[fallthrough]];
    case DomainKind::polygon: {
      size_t m = vertices_.size();
      size_t k = std::min(static_cast<size_t>(t), m - 1);
      if (side == Side::left && t == static_cast<double>(k)) k = (k + m - 1) % m;
      return vertices_[(k + 1) % m] - vertices_[k];
    }
  }
  return Vec2::Zero();
}

Vec2 Domain::acceleration(double theta) const {
  double t = reduce(theta);
  switch (kind_) {
    case DomainKind::smooth: {
      Vec2 v = Vec2::Zero();
      for (size_t k = 0; k < cos_k_.size(); ++k) {
        double f = 2 * kPi * (k + 1), w = f * t;
        v -= f * f * (cos_k_[k] * std::cos(w) + sin_k_[k] * std::sin(w));
      }
      return v;
    }
    case DomainKind::rounded_polygon:
      if (const Arc* a = arc_at(t)) {
        double s = t - a->t0;
        s -= period_ * std::floor(s / period_);
        double rate = a->sweep / (a->t1 - a->t0);
        double phi = a->phi0 + rate * s;
        return -a->radius * rate * rate * Vec2(std::cos(phi), std::sin(phi));
      }
      return Vec2::Zero();
    case DomainKind::polygon:
      return Vec2::Zero();
  }
  return Vec2::Zero();
}

bool Domain::contains(const Vec2& p) const {
  const auto& pts = outline();
  bool inside = false;
  for (size_t i = 0, j = pts.size() - 1; i < pts.size(); j = i++) {
    const Vec2& a = pts[i];
    const Vec2& b = pts[j];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      double x = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (p.x() < x) inside = !inside;
    }
  }
  return inside;
}

double Domain::distance_to_boundary(const Vec2& p) const {
  const auto& pts = outline();
  double best = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < pts.size(); ++i)
    best = std::min(best, segment_distance(p, pts[i], pts[(i + 1) % pts.size()]));
  return best;
}

BoundingBox Domain::bounding_box() const {
  BoundingBox box{outline().front(), outline().front()};
  for (const Vec2& p : outline()) {
    box.lo = box.lo.cwiseMin(p);
    box.hi = box.hi.cwiseMax(p);
  }
  if (kind_ == DomainKind::smooth) {
    // The sampled outline can sit slightly inside the true curve.
    double pad = 1e-3 * (box.hi - box.lo).norm();
    box.lo.array() -= pad;
    box.hi.array() += pad;
  }
  return box;
}

double Domain::boundary_length() const {
  double len = 0;
  if (kind_ == DomainKind::smooth) {
    const int n = 4096;
    for (int k = 0; k < n; ++k) len += tangent(period_ * k / n).norm();
    return len * period_ / n;
  }
  size_t m = vertices_.size();
  for (size_t i = 0; i < m; ++i) len += (vertices_[(i + 1) % m] - vertices_[i]).norm();
  for (const Arc& a : arcs_)
    if (a.sweep != 0) len += a.radius * std::abs(a.sweep) - 2 * eps_;
  return len;
}

double Domain::area() const { return signed_area(outline()); }

Domain round_polygon(const Domain& polygon, double eps) {
  if (polygon.kind() != DomainKind::polygon) throw GeometryError("only polygons can be rounded");
  const auto& v = polygon.vertices();
  size_t m = v.size();
  double shortest = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < m; ++i) shortest = std::min(shortest, (v[(i + 1) % m] - v[i]).norm());
  if (!(eps > 0) || !(2 * eps < shortest))
    throw GeometryError("rounding radius must be positive and below half the shortest edge");

  Domain d;
  d.kind_ = DomainKind::rounded_polygon;
  d.period_ = static_cast<double>(m);
  d.vertices_ = v;
  d.eps_ = eps;
  for (size_t j = 0; j < m; ++j) {
    Vec2 prev = v[(j + m - 1) % m], next = v[(j + 1) % m];
    double len_in = (v[j] - prev).norm(), len_out = (next - v[j]).norm();
    Vec2 d_in = (v[j] - prev) / len_in, d_out = (next - v[j]) / len_out;
    double turn = std::atan2(cross(d_in, d_out), d_in.dot(d_out));
    Domain::Arc a;
    a.t0 = static_cast<double>(j) - eps / len_in;
    a.t1 = static_cast<double>(j) + eps / len_out;
    if (std::abs(turn) > 1e-12) {
      a.radius = eps / std::tan(0.5 * std::abs(turn));
      Vec2 p1 = v[j] - eps * d_in;
      Vec2 left_normal(-d_in.y(), d_in.x());
      a.center = p1 + (turn > 0 ? 1.0 : -1.0) * a.radius * left_normal;
      a.phi0 = std::atan2(p1.y() - a.center.y(), p1.x() - a.center.x());
      a.sweep = turn;
    }
    d.arcs_.push_back(a);
  }
  d.build_outline(4096);
  return d;
}

Domain tilted_square(double alpha) {
  double r2 = std::sqrt(2.0);
  return Domain::polygon({Vec2(0, 0), Vec2(std::cos(alpha), std::sin(alpha)),
                          r2 * Vec2(std::cos(alpha + kPi / 4), std::sin(alpha + kPi / 4)),
                          Vec2(std::cos(alpha + kPi / 2), std::sin(alpha + kPi / 2))});
}

Domain trapezium(double d) {
  return Domain::polygon({Vec2(0, 0), Vec2(1 + d, 0), Vec2(1, 1), Vec2(0, 1)});
}

std::string DomainSpec::to_string() const {
  std::string out = kind + ":";
  if (kind == "polygon") {
    for (size_t i = 0; i < vertices.size(); ++i) {
      if (i) out += ";";
      out += fmt17(vertices[i].x()) + "," + fmt17(vertices[i].y());
    }
    return out;
  }
  for (size_t i = 0; i < params.size(); ++i) out += (i ? "," : "") + fmt17(params[i]);
  if (kind == "rounded" && !base.empty()) out += ":" + base.front().to_string();
  return out;
}

DomainSpec parse_domain_spec(const std::string& text) {
  auto colon = text.find(':');
  if (colon == std::string::npos) throw ConfigError("domain spec '" + text + "' lacks ':'");
  DomainSpec spec;
  spec.kind = text.substr(0, colon);
  std::string rest = text.substr(colon + 1);

  auto numbers = [&](const std::string& s, size_t expected) {
    std::vector<double> out;
    for (const auto& tok : split(s, ',')) out.push_back(parse_number(tok, text));
    if (out.size() != expected)
      throw ConfigError("domain spec '" + text + "' expects " + std::to_string(expected) +
                        " parameter(s)");
    return out;
  };

  if (spec.kind == "tilted-square" || spec.kind == "trapezium") {
    spec.params = numbers(rest, 1);
  } else if (spec.kind == "ellipse") {
    spec.params = numbers(rest, 2);
  } else if (spec.kind == "polygon") {
    for (const auto& pair : split(rest, ';')) {
      auto xy = numbers(pair, 2);
      spec.vertices.emplace_back(xy[0], xy[1]);
    }
  } else if (spec.kind == "rounded") {
    auto sep = rest.find(':');
    if (sep == std::string::npos) throw ConfigError("rounded spec needs rounded:<eps>:<base>");
    spec.params = numbers(rest.substr(0, sep), 1);
    spec.base.push_back(parse_domain_spec(rest.substr(sep + 1)));
  } else {
    throw ConfigError("unknown domain kind '" + spec.kind + "'");
  }
  return spec;
}

Domain make_domain(const DomainSpec& spec) {
  if (spec.kind == "tilted-square") return tilted_square(spec.params.at(0));
  if (spec.kind == "trapezium") {
    if (!(spec.params.at(0) > -1)) throw ConfigError("trapezium parameter must exceed -1");
    return trapezium(spec.params.at(0));
  }
  if (spec.kind == "ellipse") return Domain::ellipse(spec.params.at(0), spec.params.at(1));
  if (spec.kind == "polygon") return Domain::polygon(spec.vertices);
  if (spec.kind == "rounded") {
    if (spec.base.size() != 1) throw ConfigError("rounded spec needs exactly one base domain");
    Domain base = make_domain(spec.base.front());
    try {
      return round_polygon(base, spec.params.at(0));
    } catch (const GeometryError& e) {
      throw ConfigError(e.what());
    }
  }
  throw ConfigError("unknown domain kind '" + spec.kind + "'");
}

cplx ell(const Vec2& x, cplx omega, Sign s) {
  if (!(omega.real() > 0 && omega.real() < 1))
    throw DomainError("ell: need 0 < Re(omega) < 1");
  return double(sign_value(s)) * x.x() / omega + x.y() / std::sqrt(1.0 - omega * omega);
}

Vec2 ell_coefficients(double lambda, Sign s) {
  if (!(lambda > 0 && lambda < 1)) throw DomainError("ell: need 0 < lambda < 1");
  return Vec2(sign_value(s) / lambda, 1.0 / std::sqrt(1.0 - lambda * lambda));
}

double ell(const Vec2& x, double lambda, Sign s) { return ell_coefficients(lambda, s).dot(x); }

OneSided boundary_ell_derivative(const Domain& domain, double theta, double lambda, Sign s) {
  Vec2 c = ell_coefficients(lambda, s);
  OneSided out;
  out.left = c.dot(domain.tangent(theta, Side::left));
  out.right = c.dot(domain.tangent(theta, Side::right));
  if (domain.kind() == DomainKind::polygon) {
    double t = domain.reduce(theta);
    out.corner = t == std::floor(t);
  }
  return out;
}

namespace {

CriticalPair classify(const Domain& domain, double lambda, Sign s, int grid) {
  Vec2 c = ell_coefficients(lambda, s);
  const double L = domain.period();
  std::vector<CriticalPoint> found;
  std::vector<double> degenerate;

  if (domain.kind() == DomainKind::polygon) {
    for (double t : domain.corners()) {
      CriticalPoint p;
      p.theta = t;
      p.corner = true;
      p.d_left = c.dot(domain.tangent(t, Side::left));
      p.d_right = c.dot(domain.tangent(t, Side::right));
      if (std::abs(p.d_left) < kDegenerateDerivative || std::abs(p.d_right) < kDegenerateDerivative)
        degenerate.push_back(t);
      else if (p.d_left * p.d_right < 0)
        found.push_back(p);
    }
  } else {
    auto deriv = [&](double t) { return c.dot(domain.tangent(t)); };
    auto sgn_of = [&](double v) { return std::abs(v) < kDegenerateDerivative ? 0 : sgn(v); };
    std::vector<double> vals(grid);
    for (int k = 0; k < grid; ++k) vals[k] = deriv(L * k / grid);
    auto add_root = [&](double t) {
      CriticalPoint p;
      p.theta = domain.reduce(t);
      p.second = c.dot(domain.acceleration(p.theta));
      p.d_left = deriv(p.theta - 1e-7 * L);
      p.d_right = deriv(p.theta + 1e-7 * L);
      if (std::abs(p.second) < kDegenerateDerivative)
        degenerate.push_back(p.theta);
      else
        found.push_back(p);
    };
    for (int k = 0; k < grid; ++k) {
      int s0 = sgn_of(vals[k]), s1 = sgn_of(vals[(k + 1) % grid]);
      if (s0 == 0) {
        int prev = sgn_of(vals[(k + grid - 1) % grid]);
        if (prev == 0) degenerate.push_back(L * k / grid);
        else add_root(L * k / grid);
        continue;
      }
      if (s1 == 0 || s0 == s1) continue;
      double a = L * k / grid, b = L * (k + 1) / grid;
      double fa = vals[k];
      while (b - a > 1e-13) {
        double m = 0.5 * (a + b);
        if (m <= a || m >= b) break;
        double fm = deriv(m);
        if ((fm > 0) == (fa > 0)) {
          a = m;
          fa = fm;
        } else {
          b = m;
        }
      }
      add_root(0.5 * (a + b));
    }
  }

  std::vector<double> thetas;
  for (const auto& p : found) thetas.push_back(p.theta);
  if (!degenerate.empty()) {
    thetas.insert(thetas.end(), degenerate.begin(), degenerate.end());
    throw NotLambdaSimple(std::string("degenerate critical point of ell") + sign_name(s), thetas);
  }
  if (found.size() != 2)
    throw NotLambdaSimple(std::string("ell") + sign_name(s) + " has " +
                              std::to_string(found.size()) + " critical points, expected 2",
                          thetas);

  CriticalPair pair;
  const CriticalPoint& a = found[0];
  bool a_is_min = a.corner ? a.d_left < 0 : a.second > 0;
  pair.min = a_is_min ? found[0] : found[1];
  pair.max = a_is_min ? found[1] : found[0];
  pair.ell_min = c.dot(domain.point(pair.min.theta));
  pair.ell_max = c.dot(domain.point(pair.max.theta));
  if (!(pair.ell_min < pair.ell_max))
    throw NotLambdaSimple(std::string("critical points of ell") + sign_name(s) + " are not a min/max pair",
                          thetas);
  return pair;
}

}  // namespace

CharacteristicPoints critical_points(const Domain& domain, double lambda, int grid) {
  if (!(lambda > 0 && lambda < 1)) throw DomainError("critical_points: need 0 < lambda < 1");
  CharacteristicPoints cp;
  cp.lambda = lambda;
  cp.plus = classify(domain, lambda, Sign::plus, grid);
  cp.minus = classify(domain, lambda, Sign::minus, grid);
  return cp;
}

}  // namespace iwave
