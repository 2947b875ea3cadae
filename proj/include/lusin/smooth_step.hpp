#pragma once

#include <cmath>

namespace lusin::profile {

/// exp(-1/s) for s > 0, else 0. Flat to all orders at 0.
inline double flat(double s) { return s > 0.0 ? std::exp(-1.0 / s) : 0.0; }
inline double flat_prime(double s) { return s > 0.0 ? std::exp(-1.0 / s) / (s * s) : 0.0; }

/// Exp-bump ramp on [0, 1]: 0 below, 1 above, C-infinity, ramp(s) + ramp(1-s) = 1.
inline double ramp(double s) {
  if (s <= 0.0) return 0.0;
  if (s >= 1.0) return 1.0;
  const double a = flat(s), b = flat(1.0 - s);
  return a / (a + b);
}

inline double ramp_prime(double s) {
  if (s <= 0.0 || s >= 1.0) return 0.0;
  const double a = flat(s), b = flat(1.0 - s);
  const double da = flat_prime(s), db = flat_prime(1.0 - s);
  const double den = a + b;
  return (da * b + a * db) / (den * den);
}

/// Symmetric smooth step on [-1, 1]: step(t) + step(-t) = 1.
inline double step(double t) { return ramp(0.5 * (t + 1.0)); }
inline double step_prime(double t) { return 0.5 * ramp_prime(0.5 * (t + 1.0)); }

/// Standard mollifier profile exp(-1/(1 - q)) in q = |x/a|^2, zero for q >= 1.
inline double mollifier(double q) { return q < 1.0 ? std::exp(-1.0 / (1.0 - q)) : 0.0; }

}  // namespace lusin::profile
