#pragma once

#include <Eigen/Core>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>

namespace iwave {

using Vec2 = Eigen::Vector2d;
using cplx = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;

enum class Sign { plus, minus };

inline int sign_value(Sign s) { return s == Sign::plus ? 1 : -1; }
inline Sign opposite(Sign s) { return s == Sign::plus ? Sign::minus : Sign::plus; }
inline const char* sign_name(Sign s) { return s == Sign::plus ? "+" : "-"; }

inline int sgn(double x) { return (x > 0) - (x < 0); }

// Radical inverse in the given base; index 0 maps to 0.
inline double radical_inverse(std::uint64_t index, unsigned base) {
  double inv = 1.0 / base, f = inv, r = 0.0;
  while (index > 0) {
    r += f * static_cast<double>(index % base);
    index /= base;
    f *= inv;
  }
  return r;
}

// Deterministic stand-in for random sampling everywhere in the project: the
// Halton sequence shifted by a fixed offset so that sample 0 is not the origin.
class Halton {
 public:
  static constexpr std::uint64_t kOffset = 409;

  explicit Halton(std::uint64_t start = 0) : next_(start + kOffset) {}

  double next1() { return radical_inverse(next_++, 2); }

  Vec2 next2() {
    Vec2 p(radical_inverse(next_, 2), radical_inverse(next_, 3));
    ++next_;
    return p;
  }

 private:
  std::uint64_t next_;
};

}  // namespace iwave
