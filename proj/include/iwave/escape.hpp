#pragma once

#include <vector>

#include "iwave/billiard.hpp"

namespace iwave {

// Reparametrization Theta of the boundary built from the weight
// w(theta) = sum_{j<n} |d b^j / d theta|, normalized so Theta(L) = L. Stored as
// the piecewise-linear interpolant through uniform samples, which is itself an
// exact increasing homeomorphism of the circle.
class AdaptedCoordinate {
 public:
  AdaptedCoordinate() = default;
  AdaptedCoordinate(double period, std::vector<double> weight);

  double period() const { return L_; }
  double to_adapted(double theta) const;
  double from_adapted(double Theta) const;
  // Linear interpolation of the sampled weight.
  double weight(double theta) const;
  const std::vector<double>& weights() const { return w_; }
  const std::vector<double>& samples() const { return Theta_; }

 private:
  double L_ = 0;
  std::vector<double> w_;      // w at theta_k = k L / M
  std::vector<double> Theta_;  // Theta at theta_k, k = 0..M
};

// Throws PreconditionError for an uncertified report.
AdaptedCoordinate adapted_coordinate(const BilliardMap& bmap, const MorseSmaleReport& report,
                                     int samples = 8192);

// Derivative of Theta o b o Theta^-1 at Theta(theta), from the sampled weight.
double adapted_map_derivative(const AdaptedCoordinate& coord, const BilliardMap& bmap, double theta);

// Discrete escape function. Everything lives in the adapted coordinate. With
// Direction::backward the construction runs on b^-1 with the roles of the
// attracting and repelling sets exchanged.
class EscapeFunction {
 public:
  double alpha_minus = 0, alpha_plus = 0;
  double delta = 0, delta1 = 0;
  long N = 0;
  Direction direction = Direction::forward;
  std::vector<double> grid, values;  // g sampled on a uniform adapted grid

  double operator()(double Theta) const;
  // Cutoff: 1 within delta1 of the attracting set, 0 beyond delta.
  double chi(double Theta) const;
  // The map the construction is built for, in the adapted coordinate.
  double step(double Theta) const;
  // Circle distance from Theta to the attracting / repelling set.
  double dist_attracting(double Theta) const;
  double dist_repelling(double Theta) const;
  // Forward b in the adapted coordinate regardless of direction.
  double forward(double Theta) const;

  const AdaptedCoordinate& coordinate() const { return coord_; }
  const std::vector<double>& attracting() const { return attract_; }
  const std::vector<double>& repelling() const { return repel_; }

 private:
  friend EscapeFunction build_escape_function(const BilliardMap&, const MorseSmaleReport&, double,
                                              double, double, Direction, int);
  const BilliardMap* bmap_ = nullptr;
  AdaptedCoordinate coord_;
  std::vector<double> attract_, repel_;  // adapted coordinates
};

// Throws ShrinkDelta when the delta-neighborhoods overlap or fail to be
// invariant. alpha_minus and alpha_plus must differ. The returned object keeps
// a pointer to bmap, which must outlive it.
EscapeFunction build_escape_function(const BilliardMap& bmap, const MorseSmaleReport& report,
                                     double alpha_minus, double alpha_plus, double delta,
                                     Direction direction = Direction::forward, int propagation_grid = 16384);

// Halves delta until the builder succeeds (at most 40 times).
EscapeFunction build_escape_function_auto(const BilliardMap& bmap, const MorseSmaleReport& report,
                                          double alpha_minus, double alpha_plus, double delta,
                                          Direction direction = Direction::forward);

struct EscapeCheck {
  bool passed = true;
  long violations = 0;
  double worst = 0;  // largest violation amount (0 when passed)
};

struct EscapeVerification {
  EscapeCheck monotone, strict, floor_all, floor_off_attractor, plateau, weighted;
  long M = 0;
  int grid = 0;

  bool all_passed() const {
    return monotone.passed && strict.passed && floor_all.passed && floor_off_attractor.passed &&
           plateau.passed && weighted.passed;
  }
};

// Evaluates the six properties on a uniform adapted grid. Inequalities are
// stated for alpha_plus < alpha_minus and multiplied by sgn(alpha_minus -
// alpha_plus) so either ordering of the parameters is checked consistently.
EscapeVerification verify_escape_properties(const EscapeFunction& g, long M = 0, int grid = 8192);

}  // namespace iwave
