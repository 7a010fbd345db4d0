#pragma once

#include <functional>
#include <string>
#include <vector>

#include "iwave/geometry.hpp"

namespace iwave {

enum class Direction { forward, backward };

// The chess billiard of a lambda-simple domain. gamma_s reflects a boundary
// point to the other boundary point on the same level set of ell_s, and the
// map is b = gamma_+ o gamma_-.
class BilliardMap {
 public:
  // Throws NotLambdaSimple when the domain is not lambda-simple.
  BilliardMap(Domain domain, double lambda);

  const Domain& domain() const { return domain_; }
  double lambda() const { return lambda_; }
  double period() const { return domain_.period(); }
  const CharacteristicPoints& critical() const { return crit_; }

  double ell_at(double theta, Sign s) const;
  double ell_derivative(double theta, Sign s, Side side = Side::right) const;
  // nu_s = sign of d/dtheta ell_s (right-sided at corners).
  int nu(double theta, Sign s) const;

  double gamma(double theta, Sign s) const;
  double gamma_derivative(double theta, Sign s) const;

  // Reduced to [0, L).
  double map(double theta, Direction dir = Direction::forward) const;
  double map_derivative(double theta, Direction dir = Direction::forward) const;

  // Degree-one lift with 0 < lift(0) < L, increasing, lift(t + L) = lift(t) + L.
  double lift(double theta) const;

  // The boundary parameter with ell_s = value on the increasing arc (from the
  // minimum to the maximum) or on the decreasing arc.
  double preimage(double value, Sign s, bool increasing_arc) const;

  // Is theta on the arc where ell_s increases (closed at both critical ends)?
  bool on_increasing_arc(double theta, Sign s) const;

 private:
  double solve_on_arc(double value, Sign s, double t_from, double t_to) const;

  Domain domain_;
  double lambda_;
  CharacteristicPoints crit_;
  Vec2 coef_plus_, coef_minus_;
  std::vector<double> vertex_ell_plus_, vertex_ell_minus_;  // polygons only
  double lift0_ = 0;
};

double gamma(const BilliardMap& bmap, double theta, Sign s);
double chess_map(const BilliardMap& bmap, double theta, Direction dir = Direction::forward);
double lift_value(const BilliardMap& bmap, double theta);

// Distance on the circle R / L Z.
double circle_distance(double a, double b, double L);

struct OrbitOptions {
  long max_iter = 100000;
  double tol = 1e-10;
  int confirm_periods = 3;
  int max_period = 64;
};

struct OrbitResult {
  std::vector<double> samples;  // theta_k = b^k(theta_0), reduced
  bool converged = false;
  std::vector<double> cycle;  // n consecutive orbit points, in orbit order
  long entry_index = -1;      // first k with theta_k within tol of the cycle
};

OrbitResult orbit(const BilliardMap& bmap, double theta0, const OrbitOptions& opts = {});

struct RotationNumber {
  bool exact = false;
  long q = 0, n = 0;           // exact variant: q/n in lowest terms
  double value = 0;            // fraction of a full turn
  double error_bound = 0;      // zero for the exact variant
  std::vector<double> cycle;   // detected cycle, orbit order
  long detected_at = -1;

  std::string to_string() const;
};

RotationNumber rotation_number(const BilliardMap& bmap, const OrbitOptions& opts = {});

struct PeriodicPoint {
  double theta = 0;
  double multiplier = 0;  // derivative of b^n at theta
  bool attracting = false;
  int orbit = 0;          // index of the cycle this point belongs to
  int nu_plus = 0, nu_minus = 0;
};

struct MorseSmaleFlags {
  bool lambda_simple = false;
  bool periodic_nonempty = false;
  bool hyperbolic = false;
  bool corner_free = false;
};

struct MorseSmaleReport {
  double lambda = 0;
  std::vector<double> sigma_plus, sigma_minus;  // sorted
  std::vector<PeriodicPoint> points;            // sorted by theta
  long n = 0, q = 0;
  RotationNumber rotation;
  MorseSmaleFlags flags;
  double min_corner_distance = 0;  // +inf when the domain has no corners
  bool degenerate_continuum = false;
  std::string message;

  bool certified() const {
    return flags.lambda_simple && flags.periodic_nonempty && flags.hyperbolic && flags.corner_free;
  }
};

struct PeriodicOptions {
  int grid = 4096;
  double root_tol = 1e-12;
  double dedup = 1e-8;
  double hyperbolic_margin = 1e-8;
  double corner_tol = 1e-10;  // corner_free needs distance > 10 * corner_tol
};

// Throws NoPeriodicOrbit when the rotation number is not detected as rational.
MorseSmaleReport find_periodic_points(const BilliardMap& bmap, const RotationNumber& rot,
                                      const PeriodicOptions& opts = {});
MorseSmaleReport find_periodic_points(const BilliardMap& bmap);

// Never throws for mathematical failure; the flags say what went wrong.
MorseSmaleReport certify_morse_smale(const Domain& domain, double lambda,
                                     const OrbitOptions& orbit_opts = {},
                                     const PeriodicOptions& periodic_opts = {});

enum class Attractor { lambda_plus, lambda_minus };

struct SkeletonSegment {
  Vec2 a, b;                   // endpoints x(y) and x(gamma_s(y))
  double theta_a = 0, theta_b = 0;
  Sign sign = Sign::plus;      // the chord lies on a level line of ell_sign
  int tag = 1;                 // +1 for the positive conormal half, -1 for the negative
  double source = 0;           // periodic point y the chord is attached to
  int source_nu = 0;           // nu_sign(y)
  int tau_sign = 0;            // sign of tau in (x, tau d ell_sign)
};

struct AttractorSkeleton {
  Attractor which = Attractor::lambda_plus;
  std::vector<SkeletonSegment> segments;
};

// Throws PreconditionError for an uncertified report.
AttractorSkeleton attractor_skeleton(const BilliardMap& bmap, const MorseSmaleReport& report,
                                     Attractor which);

struct Pushforward {
  std::vector<double> s, pi, upsilon;
};

// Pi f(s): sum over the two preimages of f / |d ell / d theta|; Upsilon: plain sum.
Pushforward pushforward_density(const BilliardMap& bmap, Sign s,
                                const std::function<double(double)>& f,
                                const std::vector<double>& s_grid);

struct SchroderChart {
  double theta_star = 0;
  double multiplier = 0;
  std::vector<double> theta, h;
};

// Linearizing coordinate of F = b^n (shifted by qL) near an attracting point.
SchroderChart schroder_chart(const BilliardMap& bmap, const MorseSmaleReport& report,
                             double theta_star, double radius, int samples = 201);
// Evaluates the chart at a single parameter.
double schroder_value(const BilliardMap& bmap, const MorseSmaleReport& report, double theta_star,
                      double theta);

struct RotationPlateau {
  bool found = false;
  double lo = 0, hi = 0;  // bracketing estimates of the plateau ends
  double center = 0;
};

// Locates the lambda interval inside (lo, hi) on which the rotation number is
// exactly q/n, by bisection on the monotone staircase.
RotationPlateau find_rotation_plateau(const Domain& domain, long q, long n, double lo, double hi,
                                      double tol = 1e-7);

// Finite-difference estimate of the lambda-derivative of the lifted map.
double monotonicity_probe(const Domain& domain, double theta, double lambda, double h);

}  // namespace iwave
