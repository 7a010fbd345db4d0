#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "iwave/common.hpp"
#include "iwave/errors.hpp"

namespace iwave {

enum class DomainKind { smooth, polygon, rounded_polygon };

const char* kind_name(DomainKind k);

// Which one-sided limit to take at a corner of the boundary parametrization.
enum class Side { left, right };

struct BoundingBox {
  Vec2 lo, hi;
};

// Closed, positively oriented, simple boundary curve with period-L parameter.
// Polygons are affine on each edge with vertex j at parameter j, so L is the
// vertex count. Smooth curves use L = 1. Rounded polygons keep the period of
// the source polygon and map each corner interval linearly onto its arc.
class Domain {
 public:
  static Domain polygon(std::vector<Vec2> vertices);
  static Domain ellipse(double a, double b, Vec2 center = Vec2::Zero());
  // x(t) = center + sum_k cos_k[k] cos(2 pi (k+1) t) + sin_k[k] sin(2 pi (k+1) t).
  static Domain fourier(Vec2 center, std::vector<Vec2> cos_k, std::vector<Vec2> sin_k);

  DomainKind kind() const { return kind_; }
  double period() const { return period_; }

  // Representative of theta in [0, L).
  double reduce(double theta) const;

  Vec2 point(double theta) const;
  // One-sided derivative dx/dtheta; the sides differ only at polygon corners.
  Vec2 tangent(double theta, Side side = Side::right) const;
  // d^2x/dtheta^2 (zero on straight pieces).
  Vec2 acceleration(double theta) const;

  // Corner parameters in increasing order; empty unless kind is polygon.
  const std::vector<double>& corners() const { return corners_; }
  // Vertices of the polygon, or of the source polygon for a rounded domain.
  const std::vector<Vec2>& vertices() const { return vertices_; }
  double rounding_radius() const { return eps_; }

  bool contains(const Vec2& p) const;
  double distance_to_boundary(const Vec2& p) const;
  BoundingBox bounding_box() const;
  double boundary_length() const;
  double area() const;

  // Dense closed polyline through boundary samples (exact vertices for
  // polygons); used for inclusion and distance queries.
  const std::vector<Vec2>& outline() const { return *outline_; }

 private:
  friend Domain round_polygon(const Domain& polygon, double eps);

  struct Arc {
    double t0 = 0, t1 = 0;  // parameter interval covered by the arc
    Vec2 center = Vec2::Zero();
    double radius = 0, phi0 = 0, sweep = 0;
  };

  Domain() = default;
  void build_outline(int samples);
  const Arc* arc_at(double t) const;

  DomainKind kind_ = DomainKind::polygon;
  double period_ = 0;
  std::vector<Vec2> vertices_;
  std::vector<double> corners_;
  Vec2 center_ = Vec2::Zero();
  std::vector<Vec2> cos_k_, sin_k_;
  double eps_ = 0;
  std::vector<Arc> arcs_;  // rounded polygons: one per source vertex
  std::shared_ptr<const std::vector<Vec2>> outline_;
};

// Replaces each polygon corner by the circular arc tangent to both incident
// edges at distance eps from the vertex.
Domain round_polygon(const Domain& polygon, double eps);

Domain tilted_square(double alpha);
Domain trapezium(double d);

// Textual domain description shared by the CLI and the JSON configuration.
//   tilted-square:<alpha>   trapezium:<d>   ellipse:<a>,<b>
//   polygon:<x>,<y>;<x>,<y>;...   rounded:<eps>:<base spec>
struct DomainSpec {
  std::string kind;
  std::vector<double> params;
  std::vector<Vec2> vertices;
  std::vector<DomainSpec> base;  // rounded only, exactly one element

  std::string to_string() const;
};

DomainSpec parse_domain_spec(const std::string& text);
Domain make_domain(const DomainSpec& spec);

// ell_s(x, omega) = s x1 / omega + x2 / sqrt(1 - omega^2), principal sqrt.
cplx ell(const Vec2& x, cplx omega, Sign s);
double ell(const Vec2& x, double lambda, Sign s);
// Coefficient vector c with ell_s(x, lambda) = c . x.
Vec2 ell_coefficients(double lambda, Sign s);

struct OneSided {
  double left = 0, right = 0;
  bool corner = false;
};

// d/dtheta ell_s(x(theta), lambda); both one-sided values at a corner.
OneSided boundary_ell_derivative(const Domain& domain, double theta, double lambda, Sign s);

struct CriticalPoint {
  double theta = 0;
  bool corner = false;
  double d_left = 0, d_right = 0;  // one-sided first derivatives
  double second = 0;               // second derivative, smooth points only
};

struct CriticalPair {
  CriticalPoint min, max;
  double ell_min = 0, ell_max = 0;
};

struct CharacteristicPoints {
  double lambda = 0;
  CriticalPair plus, minus;

  const CriticalPair& of(Sign s) const { return s == Sign::plus ? plus : minus; }
};

// Derivatives with magnitude below this are treated as vanishing.
inline constexpr double kDegenerateDerivative = 1e-10;

// Global extrema of ell_+ and ell_- along the boundary. Throws NotLambdaSimple
// unless each form has exactly two critical points and both are nondegenerate.
CharacteristicPoints critical_points(const Domain& domain, double lambda, int grid = 4096);

}  // namespace iwave
