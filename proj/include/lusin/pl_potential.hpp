#pragma once

// Piecewise-affine potentials on Kuhn meshes, the skeleton tube, the C1
// blend, and the end-to-end rough approximation of a field by a gradient.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "lusin/error.hpp"
#include "lusin/field_core.hpp"
#include "lusin/kuhn.hpp"
#include "lusin/potential.hpp"
#include "lusin/preprocess.hpp"

namespace lusin {

using kuhn::SimplicialMesh;
using kuhn::triangulate;

namespace detail {

/// Field value at x; exact node value when x sits on a node (to 1e-9 h).
inline Point sample(const SampledField& f, const Point& x) {
  const GridDomain& d = f.domain();
  const int n = d.dim();
  Index q{};
  bool on_node = true;
  for (int k = 0; k < n && on_node; ++k) {
    const double u = (x[k] - d.origin(k)) / d.h();
    const double r = std::round(u);
    on_node = std::abs(u - r) <= 1e-9;
    q[k] = static_cast<int>(r);
  }
  Point out{};
  if (on_node && d.node_in_range(q)) {
    const auto vals = f.at(d.node_index(q));
    for (int c = 0; c < f.components(); ++c) out[c] = vals[static_cast<std::size_t>(c)];
    return out;
  }
  interpolate(f, x, std::span<double>(out.data(), static_cast<std::size_t>(f.components())));
  return out;
}

inline double distance(const Point& a, const Point& b, int n) {
  double s = 0.0;
  for (int k = 0; k < n; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

}  // namespace detail

/// max over simplices of the largest distance between field values at two vertices.
inline double oscillation(const SampledField& v2, const SimplicialMesh& mesh) {
  const int n = mesh.dim;
  double worst = 0.0;
  for (std::size_t cell : mesh.cells) {
    // Vertices of all simplices of a cube are its corners; per simplex we
    // only compare the n+1 vertices of that simplex.
    const Point lo = mesh.cell_lo(mesh.cell_coords(cell));
    std::vector<Point> corner_vals(std::size_t{1} << n);
    for (std::size_t b = 0; b < corner_vals.size(); ++b) {
      Point x = lo;
      for (int k = 0; k < n; ++k)
        if ((b >> k) & 1u) x[k] += mesh.H;
      corner_vals[b] = detail::sample(v2, x);
    }
    for (const auto& p : kuhn::permutations(n)) {
      std::size_t bits[kMaxDim + 1];
      bits[0] = 0;
      for (int j = 1; j <= n; ++j) bits[j] = bits[j - 1] | (std::size_t{1} << p[j - 1]);
      for (int i = 0; i <= n; ++i)
        for (int j = i + 1; j <= n; ++j)
          worst = std::max(worst, detail::distance(corner_vals[bits[i]], corner_vals[bits[j]], v2.components()));
    }
  }
  return worst;
}

/// Affine pieces psi_tau(x) = v2(b_tau) . (x - b_tau) on every simplex of the mesh.
/// With an oscillation budget, fails when the mesh is too coarse for it.
inline std::vector<AffinePiece> build_pl_potential(const SampledField& v2, const SimplicialMesh& mesh,
                                                    std::optional<double> oscillation_budget = std::nullopt) {
  if (!v2.is_vector_field()) fail(ErrorKind::invalid_argument, "PL potential needs a vector field");
  if (oscillation_budget && oscillation(v2, mesh) > *oscillation_budget)
    fail(ErrorKind::oscillation_unmet, "oscillation budget unmet; refine");
  const int nperm = kuhn::factorial(mesh.dim);
  std::vector<AffinePiece> pieces;
  pieces.reserve(mesh.cells.size() * static_cast<std::size_t>(nperm));
  for (std::size_t cell : mesh.cells)
    for (int p = 0; p < nperm; ++p) {
      AffinePiece a;
      a.cell = cell;
      a.perm = p;
      a.anchor = mesh.barycenter(cell, p);
      a.grad = detail::sample(v2, a.anchor);
      pieces.push_back(a);
    }
  return pieces;
}

/// max over pieces of |psi_tau| on tau.
inline double piece_sup(const std::vector<AffinePiece>& pieces, const SimplicialMesh& mesh) {
  double worst = 0.0;
  for (const auto& a : pieces)
    for (const auto& v : mesh.vertices(a.cell, a.perm)) {
      double s = 0.0;
      for (int k = 0; k < mesh.dim; ++k) s += a.grad[k] * (v[k] - a.anchor[k]);
      worst = std::max(worst, std::abs(s));
    }
  return worst;
}

inline std::size_t active_count(const std::vector<AffinePiece>& pieces, int dim) {
  return static_cast<std::size_t>(std::count_if(pieces.begin(), pieces.end(), [dim](const AffinePiece& a) {
    for (int k = 0; k < dim; ++k)
      if (a.grad[k] != 0.0) return true;
    return false;
  }));
}

struct TubeResult {
  double r = 0.0;              ///< tube radius
  double measure_bound = 0.0;  ///< certified upper bound on the tube measure
  std::size_t active = 0;      ///< simplices whose facets the tube surrounds
};

/// Largest r in the halving sequence from half the node clearance with
/// (tube measure bound) <= eps * measure(omega).
inline TubeResult skeleton_tube(const std::vector<AffinePiece>& pieces, const SimplicialMesh& mesh, double eps,
                                const GridDomain& omega) {
  if (!(eps > 0.0)) fail(ErrorKind::invalid_argument, "tube budget must be positive");
  TubeResult out;
  out.active = active_count(pieces, mesh.dim);
  const double clearance = kuhn::reference(mesh.dim).barycenter_clearance * mesh.H;
  out.r = 0.5 * clearance;
  const double budget = eps * omega.measure();
  auto bound = [&](double r) {
    return static_cast<double>(out.active) * EvaluablePotential::facet_tube_measure(mesh.dim, mesh.H, r);
  };
  while (bound(out.r) > budget) {
    out.r *= 0.5;
    if (out.r < 1e-9 * mesh.H) fail(ErrorKind::refine_ambient_grid, "refine ambient grid");
  }
  out.measure_bound = bound(out.r);
  return out;
}

/// Smooth partition-of-unity blend of the pieces with tube radius r.
inline EvaluablePotential blend(const std::vector<AffinePiece>& pieces, const SimplicialMesh& mesh, double r) {
  return EvaluablePotential(mesh, pieces, r);
}

struct RoughOptions {
  int max_level = 6;
  int norm_oversample = 2;
  TruncationOptions truncation{};
  /// Fixed mollification scale; 0 picks it from the budget.
  double sigma = 0.0;
  /// Allow the sampled-limit retry when the mollified field misses the budget.
  bool sampled_limit = true;
  /// Skip the mollified attempt entirely.
  bool sampled_only = false;
};

struct RoughCertificate {
  CellMask K;  ///< closed cells where the node check holds (the tube is removed geometrically)
  EvaluablePotential phi;
  double eps = 0.0, eta = 0.0, theta = 0.0;  ///< requested budgets
  double eps_achieved = 0.0;                 ///< (measure(Omega \ K cells) + tube bound) / measure(Omega)
  double eta_achieved = 0.0;                 ///< max over K nodes of |v - grad phi|
  double theta_achieved = 0.0;               ///< certified sup |phi|
  double theta_sampled = 0.0;                ///< sampled sup |phi| over Omega
  double grad_sampled = 0.0;                 ///< sampled sup |grad phi| over Omega
  double excluded_measure = 0.0;             ///< measure(Omega \ K cells)
  double tube_measure = 0.0;
  double truncation_measure = 0.0;  ///< measure(B) + measure(B')
  double lambda = 0.0;
  double sigma = 0.0;
  double oscillation = 0.0;
  double r = 0.0;
  int level = 0;
  std::string path;  ///< "mollified" or "sampled_limit"

  bool valid() const { return eps_achieved <= eps && eta_achieved <= eta && theta_achieved <= theta; }
};

/// Nodes of the closure of the included cells, with |v - grad phi| per node
/// (NaN off the closure).
template <class Potential>
std::vector<double> node_mismatch(const SampledField& v, const GridDomain& omega, const Potential& phi) {
  const auto nodes = omega.node_mask();
  const int n = omega.dim();
  std::vector<double> out(omega.node_count(), std::nan(""));
  for (std::size_t i = 0; i < omega.node_count(); ++i) {
    if (!nodes[i]) continue;
    double val = 0.0;
    Point g{};
    phi.evaluate(omega.node_position(i), val, g);
    double s = 0.0;
    for (int k = 0; k < n; ++k) {
      const double d = v.at(i, k) - g[k];
      s += d * d;
    }
    out[i] = std::sqrt(s);
  }
  return out;
}

namespace detail {

inline SampledField sampled_limit(const SampledField& v1, const GridDomain& omega) {
  const double margin = (2.0 * std::sqrt(static_cast<double>(omega.dim())) + 1.0) * omega.h();
  const auto inner = shrink(omega, margin).node_mask();
  std::vector<double> vals(v1.values().begin(), v1.values().end());
  const auto nc = static_cast<std::size_t>(v1.components());
  for (std::size_t i = 0; i < omega.node_count(); ++i)
    if (!inner[i]) std::fill_n(vals.begin() + static_cast<std::ptrdiff_t>(i * nc), nc, 0.0);
  return SampledField(omega, v1.components(), std::move(vals));
}

inline CellMask support_cells(const SampledField& f) {
  const GridDomain& d = f.domain();
  CellMask out(d.cell_count(), 0);
  for (std::size_t c = 0; c < d.cell_count(); ++c)
    for (auto node : d.corner_nodes(c))
      if (f.magnitude(node) != 0.0) {
        out[c] = 1;
        break;
      }
  return out;
}

inline RoughCertificate certify(const SampledField& v, const GridDomain& omega, const TruncationResult& trunc,
                                const SampledField& v2, double eps, double eta, double theta, const RoughOptions& opt) {
  RoughCertificate cert;
  cert.eps = eps;
  cert.eta = eta;
  cert.theta = theta;
  cert.lambda = trunc.lambda;
  cert.truncation_measure = trunc.measure_B + trunc.measure_B_prime;

  const CellMask active = support_cells(v2);
  SimplicialMesh mesh;
  std::vector<AffinePiece> pieces;
  for (int level = 0;; ++level) {
    if (level > opt.max_level) fail(ErrorKind::refine_ambient_grid, "refine ambient grid");
    mesh = kuhn::shifted_mesh(omega, level, active);
    pieces = build_pl_potential(v2, mesh);
    if (piece_sup(pieces, mesh) <= 0.5 * theta) {
      cert.level = level;
      break;
    }
  }
  cert.oscillation = oscillation(v2, mesh);
  const TubeResult tube = skeleton_tube(pieces, mesh, 0.25 * eps, omega);
  cert.r = tube.r;
  cert.tube_measure = tube.measure_bound;
  cert.phi = blend(pieces, mesh, tube.r);
  cert.theta_achieved = cert.phi.sup_bound();

  const auto mismatch = node_mismatch(v, omega, cert.phi);
  cert.K.assign(omega.cell_count(), 0);
  double eta_seen = 0.0;
  for (std::size_t c = 0; c < omega.cell_count(); ++c) {
    if (!omega.included(c) || trunc.B[c] || trunc.B_prime[c]) continue;
    double worst = 0.0;
    for (auto node : omega.corner_nodes(c)) worst = std::max(worst, mismatch[node]);
    if (worst <= eta) {
      cert.K[c] = 1;
      eta_seen = std::max(eta_seen, worst);
    }
  }
  cert.eta_achieved = eta_seen;
  cert.excluded_measure = omega.measure() - measure(omega, cert.K);
  cert.eps_achieved = (cert.excluded_measure + cert.tube_measure) / omega.measure();
  const auto nr = norms(cert.phi, omega, opt.norm_oversample);
  cert.theta_sampled = nr.sup_norm;
  cert.grad_sampled = nr.grad_sup_norm;
  return cert;
}

}  // namespace detail

/// Rough approximation: a C1 potential phi and a compact cell set K with
/// measure(Omega \ K) <= eps measure(Omega) (tube included), |v - grad phi| <= eta
/// at the nodes of K, and sup |phi| <= theta.
inline RoughCertificate rough_approximate(const SampledField& v, const GridDomain& omega, double eps, double eta,
                                          double theta, const RoughOptions& opt = {}) {
  if (!(eps > 0.0 && eta > 0.0 && theta > 0.0)) fail(ErrorKind::invalid_argument, "budgets must be positive");
  if (omega.empty()) fail(ErrorKind::empty_domain, "empty domain");
  if (!v.is_vector_field()) fail(ErrorKind::invalid_argument, "rough_approximate needs a vector field");
  if (!v.domain().same_grid(omega)) fail(ErrorKind::invalid_argument, "field and domain grids differ");
  const SampledField vin = v.on(omega);
  const TruncationResult trunc = luzin_truncate(vin, 0.25 * eps * omega.measure(), opt.truncation);

  double sigma = opt.sigma;
  if (sigma <= 0.0) {
    try {
      sigma = choose_sigma(omega, 0.25 * eps);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::grid_too_coarse) throw;
    }
    sigma = std::max(sigma, 20.0 * omega.h());
  }

  std::optional<RoughCertificate> best;
  if (!opt.sampled_only) {
    try {
      const SampledField v2 = mollify(trunc.v1, omega, sigma);
      auto cert = detail::certify(vin, omega, trunc, v2, eps, eta, theta, opt);
      cert.sigma = sigma;
      cert.path = "mollified";
      if (cert.valid() || !opt.sampled_limit) return cert;
      best = std::move(cert);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::sigma_too_large && e.kind() != ErrorKind::kernel_under_resolved &&
          e.kind() != ErrorKind::refine_ambient_grid)
        throw;
      if (!opt.sampled_limit) throw;
    }
  }
  const SampledField v2 = detail::sampled_limit(trunc.v1, omega);
  auto cert = detail::certify(vin, omega, trunc, v2, eps, eta, theta, opt);
  cert.sigma = 0.0;
  cert.path = "sampled_limit";
  if (cert.valid()) return cert;
  fail(ErrorKind::refine_ambient_grid, "refine ambient grid");
}

/// Trapezoid circulation of v along a closed node path (consecutive nodes are
/// grid neighbours; the last connects back to the first).
inline double circulation(const SampledField& v, const std::vector<std::size_t>& loop) {
  const GridDomain& d = v.domain();
  double total = 0.0;
  for (std::size_t i = 0; i < loop.size(); ++i) {
    const std::size_t a = loop[i], b = loop[(i + 1) % loop.size()];
    const Point xa = d.node_position(a), xb = d.node_position(b);
    for (int k = 0; k < d.dim(); ++k) total += 0.5 * (v.at(a, k) + v.at(b, k)) * (xb[k] - xa[k]);
  }
  return total;
}

/// Boundary node loop of the axis-(0,1) rectangle [i0, i1] x [j0, j1] of nodes
/// (other coordinates fixed by `base`), counter-clockwise.
inline std::vector<std::size_t> rectangle_loop(const GridDomain& d, const Index& base, int i0, int j0, int i1, int j1) {
  std::vector<std::size_t> out;
  auto at = [&](int i, int j) {
    Index q = base;
    q[0] = i;
    q[1] = j;
    return d.node_index(q);
  };
  for (int i = i0; i < i1; ++i) out.push_back(at(i, j0));
  for (int j = j0; j < j1; ++j) out.push_back(at(i1, j));
  for (int i = i1; i > i0; --i) out.push_back(at(i, j1));
  for (int j = j1; j > j0; --j) out.push_back(at(i0, j));
  return out;
}

/// Whether the segment [a, b] meets the exceptional set of a rough certificate
/// style pair (K cells, blended potentials): it runs through the interior of
/// the union of non-K cells, or crosses a facet of an active simplex (every
/// such facet point lies in the open tube).
template <class Potentials>
bool segment_meets_exceptional(const GridDomain& omega, const CellMask& K, const Potentials& phis, const Point& a,
                               const Point& b) {
  const int n = omega.dim();
  // Cells containing the open segment: those around its midpoint that contain
  // both endpoints in their closure.
  Point mid{};
  for (int k = 0; k < n; ++k) mid[k] = 0.5 * (a[k] + b[k]);
  bool all_out = true, any_cell = false;
  Index lo{};
  for (int k = 0; k < n; ++k) lo[k] = static_cast<int>(std::floor((mid[k] - omega.origin(k)) / omega.h() - 0.5));
  Index off{};
  while (true) {
    Index c{};
    bool ok = true;
    for (int k = 0; k < n; ++k) {
      c[k] = lo[k] + off[k];
      const double c0 = omega.origin(k) + c[k] * omega.h(), c1 = c0 + omega.h();
      const double e = 1e-9 * omega.h();
      ok = ok && std::min(a[k], b[k]) >= c0 - e && std::max(a[k], b[k]) <= c1 + e;
    }
    if (ok && omega.cell_in_range(c)) {
      any_cell = true;
      const std::size_t ci = omega.cell_index(c);
      if (!omega.included(ci) || K[ci]) all_out = false;
    }
    int k = n - 1;
    while (k >= 0 && ++off[k] > 1) {
      off[k] = 0;
      --k;
    }
    if (k < 0) break;
  }
  if (any_cell && all_out) return true;
  for (const auto& phi : phis)
    if (phi.crosses_active_facet(a, b)) return true;
  return false;
}

}  // namespace lusin
