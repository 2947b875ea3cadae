#pragma once

// Luzin truncation and mollification of sampled vector fields.

#include <algorithm>
#include <cmath>
#include <vector>

#include "lusin/error.hpp"
#include "lusin/field_core.hpp"
#include "lusin/smooth_step.hpp"

namespace lusin {

struct TruncationResult {
  SampledField v1;
  double lambda = 0.0;
  CellMask B;         ///< cells with a corner of magnitude > lambda
  CellMask B_prime;   ///< cells touched by the optional repair pass
  double kappa = 0.0;
  double measure_B = 0.0;
  double measure_B_prime = 0.0;
};

struct TruncationOptions {
  /// Cells whose corner values differ by more than this (Euclidean) are
  /// median-repaired; 0 disables the repair and leaves B' empty.
  double repair_jump = 0.0;
};

namespace detail {

inline double cell_max_magnitude(const SampledField& v, std::size_t cell) {
  double m = 0.0;
  for (auto node : v.domain().corner_nodes(cell)) m = std::max(m, v.magnitude(node));
  return m;
}

inline void radial_clamp(std::span<double> x, double bound) {
  double s = 0.0;
  for (double c : x) s += c * c;
  const double len = std::sqrt(s);
  if (len > bound) {
    const double f = len > 0.0 ? bound / len : 0.0;
    for (double& c : x) c *= f;
    // Round-off may leave the length a few ulps above the bound; shave until
    // it is not, so a second clamp is the identity.
    for (int guard = 0; guard < 8; ++guard) {
      s = 0.0;
      for (double c : x) s += c * c;
      if (std::sqrt(s) <= bound) break;
      for (double& c : x) c *= 1.0 - 0x1p-52;
    }
  }
}

inline double corner_spread(const SampledField& v, std::size_t cell) {
  const auto nodes = v.domain().corner_nodes(cell);
  double worst = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    for (std::size_t j = i + 1; j < nodes.size(); ++j) {
      double s = 0.0;
      for (int c = 0; c < v.components(); ++c) {
        const double d = v.at(nodes[i], c) - v.at(nodes[j], c);
        s += d * d;
      }
      worst = std::max(worst, std::sqrt(s));
    }
  return worst;
}

}  // namespace detail

/// v with every node radially clamped to length <= lambda. Idempotent bitwise.
inline SampledField clamp_magnitude(const SampledField& v, double lambda) {
  std::vector<double> vals(v.values().begin(), v.values().end());
  const auto nc = static_cast<std::size_t>(v.components());
  for (std::size_t node = 0; node < v.domain().node_count(); ++node)
    detail::radial_clamp(std::span<double>(vals.data() + node * nc, nc), lambda);
  return SampledField(v.domain(), v.components(), std::move(vals));
}

/// Smallest Lambda with measure{cells : max corner |v| > Lambda} < kappa, and
/// v clamped radially to Lambda on the nodes exceeding it.
inline TruncationResult luzin_truncate(const SampledField& v, double kappa, const TruncationOptions& opt = {}) {
  if (!(kappa > 0.0)) fail(ErrorKind::invalid_argument, "kappa must be positive");
  const GridDomain& d = v.domain();
  const double vol = d.cell_volume();
  // At most `allowed` cells may exceed Lambda (strict budget).
  const double ratio = kappa / vol;
  const auto allowed = static_cast<std::size_t>(std::ceil(ratio) - 1.0);

  std::vector<double> mags;
  mags.reserve(d.included_count());
  for (std::size_t c = 0; c < d.cell_count(); ++c)
    if (d.included(c)) mags.push_back(detail::cell_max_magnitude(v, c));
  double lambda = 0.0;
  if (allowed < mags.size()) {
    std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(allowed), mags.end(),
                     std::greater<double>());
    lambda = mags[allowed];
  }

  TruncationResult out{v, lambda, CellMask(d.cell_count(), 0), CellMask(d.cell_count(), 0), kappa, 0.0, 0.0};
  for (std::size_t c = 0; c < d.cell_count(); ++c)
    if (d.included(c) && detail::cell_max_magnitude(v, c) > lambda) out.B[c] = 1;

  const SampledField clamped_field = clamp_magnitude(v, lambda);
  std::vector<double> vals(clamped_field.values().begin(), clamped_field.values().end());
  const auto nc = static_cast<std::size_t>(v.components());

  if (opt.repair_jump > 0.0) {
    // Repair the most discontinuous cells outside B, within the B' budget.
    SampledField clamped(d, v.components(), vals);
    std::vector<std::pair<double, std::size_t>> flagged;
    for (std::size_t c = 0; c < d.cell_count(); ++c) {
      if (!d.included(c) || out.B[c]) continue;
      const double s = detail::corner_spread(clamped, c);
      if (s > opt.repair_jump) flagged.emplace_back(s, c);
    }
    std::sort(flagged.begin(), flagged.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    if (flagged.size() > allowed) flagged.resize(allowed);
    std::vector<double> repaired = vals;
    const int n = d.dim();
    for (const auto& [s, c] : flagged) {
      out.B_prime[c] = 1;
      for (auto node : d.corner_nodes(c)) {
        const Index ni = d.node_coords(node);
        for (std::size_t comp = 0; comp < nc; ++comp) {
          std::vector<double> window;
          Index off{};
          for (int k = 0; k < n; ++k) off[k] = -1;
          while (true) {
            Index q{};
            for (int k = 0; k < n; ++k) q[k] = ni[k] + off[k];
            if (d.node_in_range(q)) window.push_back(clamped.at(d.node_index(q), static_cast<int>(comp)));
            int k = n - 1;
            while (k >= 0 && ++off[k] > 1) {
              off[k] = -1;
              --k;
            }
            if (k < 0) break;
          }
          std::nth_element(window.begin(), window.begin() + static_cast<std::ptrdiff_t>(window.size() / 2),
                           window.end());
          repaired[node * nc + comp] = window[window.size() / 2];
        }
        detail::radial_clamp(std::span<double>(repaired.data() + node * nc, nc), lambda);
      }
    }
    vals = std::move(repaired);
  }
  out.v1 = SampledField(d, v.components(), std::move(vals));
  out.measure_B = measure(d, out.B);
  out.measure_B_prime = measure(d, out.B_prime);
  return out;
}

struct MollifierKernel {
  int dim = 2;
  double a = 0.0;
  double h = 0.0;
  std::vector<Index> offsets;
  std::vector<double> weights;

  /// Discrete mass sum(w) * h^N.
  double mass() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s * std::pow(h, dim);
  }
  /// Bound on max |K * f(x + h e_k) - K * f(x)| / h per unit sup |f|.
  double lipschitz() const {
    double worst = 0.0;
    const double vol = std::pow(h, dim);
    for (int k = 0; k < dim; ++k) {
      // sum over y of |w(y) - w(y - e_k)|, each weight seen at both ends.
      double s = 0.0;
      for (std::size_t i = 0; i < offsets.size(); ++i) {
        Index back = offsets[i];
        back[k] -= 1;
        const auto it = std::find(offsets.begin(), offsets.end(), back);
        const double wb = it == offsets.end() ? 0.0 : weights[static_cast<std::size_t>(it - offsets.begin())];
        s += std::abs(weights[i] - wb);
        Index fwd = offsets[i];
        fwd[k] += 1;
        if (std::find(offsets.begin(), offsets.end(), fwd) == offsets.end()) s += weights[i];
      }
      worst = std::max(worst, s * vol / h);
    }
    return worst;
  }
};

/// Discrete standard mollifier of radius a on the node lattice of spacing h.
inline MollifierKernel mollifier_kernel(double a, double h, int dim = 2) {
  if (!(h > 0.0) || dim < 1 || dim > kMaxDim) fail(ErrorKind::invalid_argument, "bad kernel grid");
  if (a < 2.0 * h * (1.0 - 1e-12)) fail(ErrorKind::kernel_under_resolved, "kernel under-resolved");
  MollifierKernel k;
  k.dim = dim;
  k.a = a;
  k.h = h;
  const int R = static_cast<int>(std::floor(a / h));
  Index off{};
  for (int i = 0; i < dim; ++i) off[i] = -R;
  std::vector<Index> offs;
  std::vector<double> raw;
  while (true) {
    double q = 0.0;
    for (int i = 0; i < dim; ++i) q += (off[i] * h) * (off[i] * h);
    q /= a * a;
    const double w = profile::mollifier(q);
    if (w > 0.0) {
      offs.push_back(off);
      raw.push_back(w);
    }
    int i = dim - 1;
    while (i >= 0 && ++off[i] > R) {
      off[i] = -R;
      --i;
    }
    if (i < 0) break;
  }
  const double wmax = *std::max_element(raw.begin(), raw.end());
  double total = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i)
    if (raw[i] >= 1e-14 * wmax) {
      k.offsets.push_back(offs[i]);
      k.weights.push_back(raw[i]);
      total += raw[i];
    }
  const double norm = 1.0 / (total * std::pow(h, dim));
  for (double& w : k.weights) w *= norm;
  return k;
}

/// (v1 restricted to the closure of shrink(domain, sigma)) convolved with the
/// mollifier of radius sigma/10, then zeroed off the closure of shrink(domain, 4 sigma/5).
inline SampledField mollify(const SampledField& v1, const GridDomain& domain, double sigma) {
  if (!(sigma > 0.0)) fail(ErrorKind::invalid_argument, "sigma must be positive");
  if (!v1.domain().same_grid(domain)) fail(ErrorKind::invalid_argument, "field and domain grids differ");
  const GridDomain inner = shrink(domain, sigma);
  const GridDomain support = shrink(domain, 0.8 * sigma);
  if (inner.empty() || support.empty()) fail(ErrorKind::sigma_too_large, "sigma too large");
  const auto kernel = mollifier_kernel(sigma / 10.0, domain.h(), domain.dim());
  const auto src_nodes = inner.node_mask();
  const auto dst_nodes = support.node_mask();
  const int n = domain.dim();
  const auto nc = static_cast<std::size_t>(v1.components());
  const double vol = domain.cell_volume();
  std::vector<double> out(domain.node_count() * nc, 0.0);
  for (std::size_t node = 0; node < domain.node_count(); ++node) {
    if (!dst_nodes[node]) continue;
    const Index ni = domain.node_coords(node);
    double* o = out.data() + node * nc;
    for (std::size_t i = 0; i < kernel.offsets.size(); ++i) {
      Index q{};
      for (int k = 0; k < n; ++k) q[k] = ni[k] + kernel.offsets[i][k];
      if (!domain.node_in_range(q)) continue;
      const std::size_t src = domain.node_index(q);
      if (!src_nodes[src]) continue;
      const double w = kernel.weights[i] * vol;
      for (std::size_t c = 0; c < nc; ++c) o[c] += w * v1.at(src, static_cast<int>(c));
    }
  }
  return SampledField(domain.with_mask(domain.mask()), v1.components(), std::move(out));
}

/// Largest sigma of the halving sequence starting at half the largest box
/// extent with measure(shrink(domain, 4 sigma / 5)) >= (1 - slack) measure(domain).
inline double choose_sigma(const GridDomain& domain, double slack) {
  if (!(slack > 0.0 && slack < 1.0)) fail(ErrorKind::invalid_argument, "slack must lie in (0, 1)");
  if (domain.empty()) fail(ErrorKind::empty_domain, "empty domain");
  double sigma = 0.0;
  for (int k = 0; k < domain.dim(); ++k) sigma = std::max(sigma, 0.5 * domain.h() * domain.cells(k));
  const double target = (1.0 - slack) * domain.measure();
  while (sigma >= 2.0 * domain.h()) {
    if (shrink(domain, 0.8 * sigma).measure() >= target) return sigma;
    sigma *= 0.5;
  }
  fail(ErrorKind::grid_too_coarse, "grid too coarse");
}

/// Largest forward difference |f(x + h e_k) - f(x)| / h over all node pairs.
inline double discrete_lipschitz(const SampledField& f) {
  const GridDomain& d = f.domain();
  const int n = d.dim();
  double worst = 0.0;
  for (std::size_t node = 0; node < d.node_count(); ++node) {
    const Index ni = d.node_coords(node);
    for (int k = 0; k < n; ++k) {
      Index q = ni;
      q[k] += 1;
      if (!d.node_in_range(q)) continue;
      const std::size_t other = d.node_index(q);
      double s = 0.0;
      for (int c = 0; c < f.components(); ++c) {
        const double diff = f.at(other, c) - f.at(node, c);
        s += diff * diff;
      }
      worst = std::max(worst, std::sqrt(s) / d.h());
    }
  }
  return worst;
}

}  // namespace lusin
