#pragma once

// Named analytic test fields sampled on grid nodes.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "lusin/error.hpp"
#include "lusin/field_core.hpp"

namespace lusin::gen {

struct GeneratorSpec {
  std::string name = "zero";
  double amplitude = 1.0;
  double radius = 0.35;        ///< bump radius
  std::vector<double> center;  ///< bump centre; empty = box centre
  std::vector<double> value;   ///< constant generator components
  std::uint64_t seed = 0;
  bool has_seed = false;
  int modes = 4;  ///< random_trig: Fourier modes per component
};

/// Uniform double in [0, 1) from the top 53 bits of a 64-bit Mersenne twister draw.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1p-53; }

namespace detail {

inline Point bump_center(const GridDomain& d, const GeneratorSpec& s) {
  Point c{};
  for (int k = 0; k < d.dim(); ++k)
    c[k] = s.center.empty() ? d.origin(k) + 0.5 * d.h() * d.cells(k) : s.center[static_cast<std::size_t>(k)];
  return c;
}

/// exp(-1 / (1 - |x - c|^2 / R^2)) and its gradient.
inline double bump(const Point& x, const Point& c, double R, int n, Point* grad) {
  double s = 0.0;
  for (int k = 0; k < n; ++k) s += (x[k] - c[k]) * (x[k] - c[k]);
  s /= R * R;
  if (grad) *grad = Point{};
  if (s >= 1.0) return 0.0;
  const double b = std::exp(-1.0 / (1.0 - s));
  if (grad) {
    const double ds = -b / ((1.0 - s) * (1.0 - s));  // d b / d s
    for (int k = 0; k < n; ++k) (*grad)[k] = ds * 2.0 * (x[k] - c[k]) / (R * R);
  }
  return b;
}

}  // namespace detail

/// Potential g = A sin(2 pi x1) sin(2 pi x2) * bump and its gradient (first two axes).
inline double sine_bump_potential(const Point& x, const Point& c, double A, double R, int n, Point* grad) {
  Point db{};
  const double b = detail::bump(x, c, R, n, &db);
  const double s1 = std::sin(2 * M_PI * x[0]), s2 = std::sin(2 * M_PI * x[1]);
  const double c1 = std::cos(2 * M_PI * x[0]), c2 = std::cos(2 * M_PI * x[1]);
  if (grad) {
    for (int k = 0; k < n; ++k) (*grad)[k] = A * s1 * s2 * db[k];
    (*grad)[0] += A * 2 * M_PI * c1 * s2 * b;
    (*grad)[1] += A * 2 * M_PI * s1 * c2 * b;
  }
  return A * s1 * s2 * b;
}

inline SampledField generate(const GridDomain& d, const GeneratorSpec& s) {
  const int n = d.dim();
  const auto nn = static_cast<std::size_t>(n);
  std::vector<double> vals(d.node_count() * nn, 0.0);
  const Point c = detail::bump_center(d, s);
  if (s.name == "zero") {
  } else if (s.name == "constant") {
    if (s.value.size() != nn) fail(ErrorKind::config_error, "constant generator needs N components");
    for (std::size_t i = 0; i < d.node_count(); ++i)
      for (std::size_t k = 0; k < nn; ++k) vals[i * nn + k] = s.value[k];
  } else if (s.name == "gradient_sine_bump") {
    for (std::size_t i = 0; i < d.node_count(); ++i) {
      Point g{};
      sine_bump_potential(d.node_position(i), c, s.amplitude, s.radius, n, &g);
      for (std::size_t k = 0; k < nn; ++k) vals[i * nn + k] = g[k];
    }
  } else if (s.name == "rotational_bump") {
    // bump * (-(x2 - c2), x1 - c1, 0, ...): curl 2 bump + radial terms, not a gradient.
    for (std::size_t i = 0; i < d.node_count(); ++i) {
      const Point x = d.node_position(i);
      const double b = s.amplitude * detail::bump(x, c, s.radius, n, nullptr);
      vals[i * nn + 0] = -b * (x[1] - c[1]);
      vals[i * nn + 1] = b * (x[0] - c[0]);
    }
  } else if (s.name == "random_trig") {
    if (!s.has_seed) fail(ErrorKind::config_error, "random_trig needs a seed");
    std::mt19937_64 rng(s.seed);
    struct Mode {
      Point freq;
      double phase, amp;
    };
    std::vector<std::vector<Mode>> modes(nn);
    for (auto& comp : modes)
      for (int m = 0; m < s.modes; ++m) {
        Mode md{};
        for (int k = 0; k < n; ++k) md.freq[k] = std::floor(uniform01(rng) * 7.0) - 3.0;
        md.phase = 2 * M_PI * uniform01(rng);
        md.amp = s.amplitude * (2.0 * uniform01(rng) - 1.0) / s.modes;
        comp.push_back(md);
      }
    for (std::size_t i = 0; i < d.node_count(); ++i) {
      const Point x = d.node_position(i);
      const double b = detail::bump(x, c, s.radius, n, nullptr);
      for (std::size_t k = 0; k < nn; ++k) {
        double acc = 0.0;
        for (const auto& md : modes[k]) {
          double arg = md.phase;
          for (int j = 0; j < n; ++j) arg += 2 * M_PI * md.freq[j] * x[j];
          acc += md.amp * std::sin(arg);
        }
        vals[i * nn + k] = acc * b;
      }
    }
  } else {
    fail(ErrorKind::config_error, "unknown generator '" + s.name + "'");
  }
  return SampledField(d, n, std::move(vals));
}

}  // namespace lusin::gen
