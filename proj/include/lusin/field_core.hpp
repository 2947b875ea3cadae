#pragma once

// Uniform-grid domains, node-sampled fields and the measure/norm bookkeeping
// shared by every stage of the construction.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lusin/error.hpp"

namespace lusin {

inline constexpr int kMaxDim = 6;
using Point = std::array<double, kMaxDim>;
using Index = std::array<int, kMaxDim>;
using CellMask = std::vector<std::uint8_t>;

/// Open set Omega as a cell mask on a uniform grid.
///
/// Cells and nodes are stored row-major with the last axis fastest. A grid of
/// `cells[k]` cells along axis k has `cells[k] + 1` nodes along that axis.
class GridDomain {
 public:
  GridDomain() = default;

  GridDomain(std::vector<int> cells, double h, std::vector<double> origin, CellMask mask = {})
      : cells_(std::move(cells)), h_(h), origin_(std::move(origin)), mask_(std::move(mask)) {
    const int n = static_cast<int>(cells_.size());
    if (n < 2 || n > kMaxDim) fail(ErrorKind::invalid_argument, "dimension must be in [2, 6]");
    if (static_cast<int>(origin_.size()) != n) fail(ErrorKind::invalid_argument, "origin/dims mismatch");
    if (!(h_ > 0.0) || !std::isfinite(h_)) fail(ErrorKind::invalid_argument, "grid spacing must be positive");
    for (int c : cells_)
      if (c < 1) fail(ErrorKind::invalid_argument, "every axis needs at least one cell");
    cell_count_ = 1;
    node_count_ = 1;
    for (int c : cells_) {
      cell_count_ *= static_cast<std::size_t>(c);
      node_count_ *= static_cast<std::size_t>(c + 1);
    }
    if (mask_.empty()) mask_.assign(cell_count_, 1);
    if (mask_.size() != cell_count_) fail(ErrorKind::invalid_argument, "mask size does not match grid");
    for (auto& m : mask_) m = m ? 1 : 0;
    included_ = static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), std::uint8_t{1}));
  }

  /// The box [origin, origin + extent]^dim split into n cells per axis.
  static GridDomain box(int dim, int n, double extent = 1.0, double origin = 0.0) {
    return GridDomain(std::vector<int>(static_cast<std::size_t>(dim), n), extent / n,
                      std::vector<double>(static_cast<std::size_t>(dim), origin));
  }

  int dim() const { return static_cast<int>(cells_.size()); }
  double h() const { return h_; }
  int cells(int axis) const { return cells_[static_cast<std::size_t>(axis)]; }
  int nodes(int axis) const { return cells(axis) + 1; }
  const std::vector<int>& cell_dims() const { return cells_; }
  std::vector<int> node_dims() const {
    std::vector<int> d(cells_);
    for (int& x : d) ++x;
    return d;
  }
  double origin(int axis) const { return origin_[static_cast<std::size_t>(axis)]; }
  const std::vector<double>& origin() const { return origin_; }
  std::size_t cell_count() const { return cell_count_; }
  std::size_t node_count() const { return node_count_; }
  const CellMask& mask() const { return mask_; }
  bool included(std::size_t cell) const { return mask_[cell] != 0; }
  std::size_t included_count() const { return included_; }
  bool empty() const { return included_ == 0; }
  double cell_volume() const { return std::pow(h_, dim()); }
  double measure() const { return static_cast<double>(included_) * cell_volume(); }

  GridDomain with_mask(CellMask mask) const { return GridDomain(cells_, h_, origin_, std::move(mask)); }

  Index cell_coords(std::size_t cell) const { return unravel(cell, cells_, 0); }
  Index node_coords(std::size_t node) const { return unravel(node, cells_, 1); }

  std::size_t cell_index(const Index& c) const { return ravel(c, 0); }
  std::size_t node_index(const Index& c) const { return ravel(c, 1); }

  bool cell_in_range(const Index& c) const {
    for (int k = 0; k < dim(); ++k)
      if (c[k] < 0 || c[k] >= cells(k)) return false;
    return true;
  }
  bool node_in_range(const Index& c) const {
    for (int k = 0; k < dim(); ++k)
      if (c[k] < 0 || c[k] > cells(k)) return false;
    return true;
  }

  Point node_position(std::size_t node) const {
    const Index c = node_coords(node);
    Point p{};
    for (int k = 0; k < dim(); ++k) p[k] = origin(k) + h_ * c[k];
    return p;
  }

  /// Node indices of the 2^N corners of a cell, corner bit k selects +1 on axis k.
  std::vector<std::size_t> corner_nodes(std::size_t cell) const {
    const Index c = cell_coords(cell);
    const int n = dim();
    std::vector<std::size_t> out(std::size_t{1} << n);
    for (std::size_t b = 0; b < out.size(); ++b) {
      Index q = c;
      for (int k = 0; k < n; ++k) q[k] += static_cast<int>((b >> k) & 1u);
      out[b] = node_index(q);
    }
    return out;
  }

  /// Nodes that are a corner of at least one included cell (closure of Omega).
  std::vector<std::uint8_t> node_mask() const { return closure_nodes(mask_); }

  std::vector<std::uint8_t> closure_nodes(const CellMask& cells_mask) const {
    std::vector<std::uint8_t> out(node_count_, 0);
    for (std::size_t c = 0; c < cell_count_; ++c) {
      if (!cells_mask[c]) continue;
      for (std::size_t v : corner_nodes(c)) out[v] = 1;
    }
    return out;
  }

  bool same_grid(const GridDomain& o) const {
    return cells_ == o.cells_ && h_ == o.h_ && origin_ == o.origin_;
  }

 private:
  Index unravel(std::size_t idx, const std::vector<int>& dims, int extra) const {
    Index c{};
    for (int k = dim() - 1; k >= 0; --k) {
      const auto ext = static_cast<std::size_t>(dims[static_cast<std::size_t>(k)] + extra);
      c[k] = static_cast<int>(idx % ext);
      idx /= ext;
    }
    return c;
  }
  std::size_t ravel(const Index& c, int extra) const {
    std::size_t idx = 0;
    for (int k = 0; k < dim(); ++k)
      idx = idx * static_cast<std::size_t>(cells_[static_cast<std::size_t>(k)] + extra) +
            static_cast<std::size_t>(c[k]);
    return idx;
  }

  std::vector<int> cells_;
  double h_ = 1.0;
  std::vector<double> origin_;
  CellMask mask_;
  std::size_t cell_count_ = 0;
  std::size_t node_count_ = 0;
  std::size_t included_ = 0;
};

/// Node-sampled field with `components` values per node of the domain grid.
class SampledField {
 public:
  SampledField() = default;
  SampledField(GridDomain domain, int components, std::vector<double> values)
      : domain_(std::move(domain)), components_(components), values_(std::move(values)) {
    if (components_ < 1) fail(ErrorKind::invalid_argument, "field needs at least one component");
    if (values_.size() != domain_.node_count() * static_cast<std::size_t>(components_))
      fail(ErrorKind::invalid_argument, "field size does not match domain nodes");
    for (double x : values_)
      if (!std::isfinite(x)) fail(ErrorKind::invalid_argument, "non-finite sample in field");
  }

  static SampledField zeros(const GridDomain& domain, int components) {
    return SampledField(domain, components,
                        std::vector<double>(domain.node_count() * static_cast<std::size_t>(components), 0.0));
  }

  const GridDomain& domain() const { return domain_; }
  int components() const { return components_; }
  std::span<const double> values() const { return values_; }
  std::span<const double> at(std::size_t node) const {
    return std::span<const double>(values_).subspan(node * static_cast<std::size_t>(components_),
                                                    static_cast<std::size_t>(components_));
  }
  double at(std::size_t node, int c) const { return values_[node * static_cast<std::size_t>(components_) + static_cast<std::size_t>(c)]; }
  double magnitude(std::size_t node) const {
    double s = 0.0;
    for (double x : at(node)) s += x * x;
    return std::sqrt(s);
  }
  bool is_vector_field() const { return components_ == domain_.dim(); }

  /// Same samples on a domain with the same grid but a different mask.
  SampledField on(const GridDomain& domain) const {
    if (!domain.same_grid(domain_)) fail(ErrorKind::invalid_argument, "grids differ");
    return SampledField(domain, components_, values_);
  }

 private:
  GridDomain domain_;
  int components_ = 1;
  std::vector<double> values_;
};

using SampledVectorField = SampledField;
using SampledScalarField = SampledField;

/// Norms under the convention ||phi||_Y = ||phi||_Z + ||grad phi||_X (so C0 = 1).
struct NormReport {
  double sup_norm = 0.0;
  double grad_sup_norm = 0.0;
  double c1_norm = 0.0;
};

inline NormReport make_norm_report(double sup_norm, double grad_sup_norm) {
  return NormReport{sup_norm, grad_sup_norm, sup_norm + grad_sup_norm};
}

/// Lebesgue measure of a cell mask: included cell count times h^N.
inline double measure(const GridDomain& domain, const CellMask& mask) {
  if (mask.size() != domain.cell_count()) fail(ErrorKind::invalid_argument, "mask size does not match grid");
  std::size_t count = 0;
  for (std::size_t c = 0; c < mask.size(); ++c) {
    if (!mask[c]) continue;
    if (!domain.included(c)) fail(ErrorKind::invalid_argument, "mask is not contained in the domain");
    ++count;
  }
  return static_cast<double>(count) * domain.cell_volume();
}

inline CellMask mask_union(const CellMask& a, const CellMask& b) {
  CellMask out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = (a[i] || b[i]) ? 1 : 0;
  return out;
}

inline CellMask mask_intersection(const CellMask& a, const CellMask& b) {
  CellMask out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = (a[i] && b[i]) ? 1 : 0;
  return out;
}

/// Domain cells not in `mask`.
inline CellMask mask_complement(const GridDomain& domain, const CellMask& mask) {
  CellMask out(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] = (domain.included(i) && !mask[i]) ? 1 : 0;
  return out;
}

/// Omega_a: the cells whose (open) box lies at distance > a from the complement
/// of Omega. Cells outside the bounding box count as complement.
inline GridDomain shrink(const GridDomain& domain, double a) {
  if (!(a >= 0.0)) fail(ErrorKind::invalid_argument, "shrink distance must be non-negative");
  const int n = domain.dim();
  const double h = domain.h();
  const double tol = 1e-12 * h;
  CellMask out(domain.cell_count(), 0);

  std::vector<std::size_t> excluded;
  for (std::size_t c = 0; c < domain.cell_count(); ++c)
    if (!domain.included(c)) excluded.push_back(c);
  const int reach = static_cast<int>(std::ceil(a / h)) + 1;

  for (std::size_t c = 0; c < domain.cell_count(); ++c) {
    if (!domain.included(c)) continue;
    const Index ci = domain.cell_coords(c);
    bool keep = true;
    for (int k = 0; k < n && keep; ++k) {
      const double lo = h * ci[k];
      const double hi = h * (domain.cells(k) - 1 - ci[k]);
      if (std::min(lo, hi) < a - tol) keep = false;
    }
    if (keep && !excluded.empty() && a > 0.0) {
      // Window scan over nearby excluded cells; box-to-box distance.
      Index lo{}, hi{};
      for (int k = 0; k < n; ++k) {
        lo[k] = std::max(0, ci[k] - reach);
        hi[k] = std::min(domain.cells(k) - 1, ci[k] + reach);
      }
      Index q = lo;
      while (keep) {
        const std::size_t qc = domain.cell_index(q);
        if (!domain.included(qc)) {
          double d2 = 0.0;
          for (int k = 0; k < n; ++k) {
            const double gap = std::max(0, std::abs(q[k] - ci[k]) - 1) * h;
            d2 += gap * gap;
          }
          if (std::sqrt(d2) < a - tol) keep = false;
        }
        int k = n - 1;
        while (k >= 0 && ++q[k] > hi[k]) {
          q[k] = lo[k];
          --k;
        }
        if (k < 0) break;
      }
    }
    out[c] = keep ? 1 : 0;
  }
  return domain.with_mask(std::move(out));
}

/// Sup norms of a sampled field over the closure nodes of `domain`.
///
/// For a vector field, sup_norm is the X-norm (sup of Euclidean lengths) and
/// grad_sup_norm is the sup of the Frobenius norm of the cell-centred Jacobian.
inline NormReport norms(const SampledField& f, const GridDomain& domain) {
  if (domain.empty()) fail(ErrorKind::empty_domain, "empty domain");
  if (!domain.same_grid(f.domain())) fail(ErrorKind::invalid_argument, "field and domain grids differ");
  const auto nodes = domain.node_mask();
  double sup = 0.0;
  for (std::size_t v = 0; v < nodes.size(); ++v)
    if (nodes[v]) sup = std::max(sup, f.magnitude(v));

  const int n = domain.dim();
  const double h = domain.h();
  const double scale = 1.0 / static_cast<double>(std::size_t{1} << (n - 1));
  double grad = 0.0;
  for (std::size_t c = 0; c < domain.cell_count(); ++c) {
    if (!domain.included(c)) continue;
    const auto corners = domain.corner_nodes(c);
    double fro = 0.0;
    for (int comp = 0; comp < f.components(); ++comp) {
      for (int k = 0; k < n; ++k) {
        double d = 0.0;
        for (std::size_t b = 0; b < corners.size(); ++b) {
          const double s = ((b >> k) & 1u) ? 1.0 : -1.0;
          d += s * f.at(corners[b], comp);
        }
        d *= scale / h;
        fro += d * d;
      }
    }
    grad = std::max(grad, std::sqrt(fro));
  }
  return make_norm_report(sup, grad);
}

/// Multilinear interpolation of a node field at an arbitrary point; zero
/// outside the grid box.
inline void interpolate(const SampledField& f, const Point& x, std::span<double> out) {
  const GridDomain& d = f.domain();
  const int n = d.dim();
  std::fill(out.begin(), out.end(), 0.0);
  Index base{};
  Point t{};
  for (int k = 0; k < n; ++k) {
    const double u = (x[k] - d.origin(k)) / d.h();
    if (u < 0.0 || u > d.cells(k)) return;
    int i = static_cast<int>(std::floor(u));
    if (i >= d.cells(k)) i = d.cells(k) - 1;
    base[k] = i;
    t[k] = u - i;
  }
  for (std::size_t b = 0; b < (std::size_t{1} << n); ++b) {
    double w = 1.0;
    Index q = base;
    for (int k = 0; k < n; ++k) {
      const bool up = (b >> k) & 1u;
      w *= up ? t[k] : 1.0 - t[k];
      q[k] += up ? 1 : 0;
    }
    if (w == 0.0) continue;
    const auto vals = f.at(d.node_index(q));
    for (int c = 0; c < f.components(); ++c) out[static_cast<std::size_t>(c)] += w * vals[static_cast<std::size_t>(c)];
  }
}

/// 64-bit FNV-1a over the grid header and the raw bytes of the samples.
inline std::uint64_t fingerprint(const SampledField& f) {
  std::uint64_t hash = 1469598103934665603ull;
  auto mix = [&](const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      hash ^= p[i];
      hash *= 1099511628211ull;
    }
  };
  for (int c : f.domain().cell_dims()) mix(&c, sizeof c);
  const double h = f.domain().h();
  mix(&h, sizeof h);
  for (double o : f.domain().origin()) mix(&o, sizeof o);
  mix(f.domain().mask().data(), f.domain().mask().size());
  const int comps = f.components();
  mix(&comps, sizeof comps);
  mix(f.values().data(), f.values().size() * sizeof(double));
  return hash;
}

}  // namespace lusin
