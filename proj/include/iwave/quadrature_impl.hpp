#pragma once

#include <cmath>

namespace iwave {

namespace detail {

inline constexpr double kKronrodNodes[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                                            0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                                            0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                                            0.207784955007898467600689403773245, 0.0};
inline constexpr double kKronrodWeights[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                                              0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                                              0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                                              0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double kGaussWeights[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                                            0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

}  // namespace detail

template <class F>
auto integrate_adaptive(const F& f, double a, double b, double tol, int depth) -> decltype(f(a)) {
  using T = decltype(f(a));
  const double c = 0.5 * (a + b), r = 0.5 * (b - a);
  T kron = detail::kKronrodWeights[7] * f(c);
  T gauss = detail::kGaussWeights[3] * f(c);
  for (int i = 0; i < 7; ++i) {
    T s = f(c - r * detail::kKronrodNodes[i]) + f(c + r * detail::kKronrodNodes[i]);
    kron += detail::kKronrodWeights[i] * s;
    if (i % 2 == 1) gauss += detail::kGaussWeights[i / 2] * s;
  }
  kron *= r;
  gauss *= r;
  // The relative floor stops refinement once the gap is pure roundoff.
  const double gap = std::abs(kron - gauss);
  if (gap <= tol || gap <= 1e-14 * std::abs(kron) || depth > 30) return kron;
  return integrate_adaptive(f, a, c, 0.5 * tol, depth + 1) + integrate_adaptive(f, c, b, 0.5 * tol, depth + 1);
}

}  // namespace iwave
