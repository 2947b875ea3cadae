#pragma once

// Kuhn (Freudenthal) triangulation of cube grids.
//
// The simplex of a cell with permutation p is
//   { lo + H u : 1 >= u[p0] >= u[p1] >= ... >= u[p(N-1)] >= 0 },
// with vertices lo, lo + H e[p0], lo + H (e[p0] + e[p1]), ..., lo + H (1,...,1).
// Its N+1 facets lie on the planes u[p0] = 1, u[p(k-1)] = u[pk], u[p(N-1)] = 0,
// all of which belong to the hyperplane arrangement x_i = const, x_i - x_j = const.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "lusin/field_core.hpp"

namespace lusin::kuhn {

using Perm = std::array<int, kMaxDim>;

inline int factorial(int n) { return n <= 1 ? 1 : n * factorial(n - 1); }

/// All permutations of 0..n-1 in lexicographic order; the index is the perm id.
inline const std::vector<Perm>& permutations(int n) {
  static std::vector<std::vector<Perm>> cache(kMaxDim + 1);
  auto& out = cache[static_cast<std::size_t>(n)];
  if (out.empty()) {
    std::array<int, kMaxDim> p{};
    std::iota(p.begin(), p.begin() + n, 0);
    do out.push_back(p);
    while (std::next_permutation(p.begin(), p.begin() + n));
  }
  return out;
}

inline int perm_id(const Perm& p, int n) {
  const auto& all = permutations(n);
  const auto it = std::lower_bound(all.begin(), all.end(), p, [n](const Perm& a, const Perm& b) {
    return std::lexicographical_compare(a.begin(), a.begin() + n, b.begin(), b.begin() + n);
  });
  return static_cast<int>(it - all.begin());
}

/// Permutation whose simplex contains the local point u in [0,1]^n (sort descending, stable).
inline Perm locate(const Point& u, int n) {
  Perm p{};
  std::iota(p.begin(), p.begin() + n, 0);
  std::stable_sort(p.begin(), p.begin() + n, [&u](int a, int b) { return u[a] > u[b]; });
  return p;
}

/// Vertices in local (unit cube) coordinates.
inline std::vector<Point> unit_vertices(const Perm& p, int n) {
  std::vector<Point> v(static_cast<std::size_t>(n + 1), Point{});
  for (int k = 1; k <= n; ++k) {
    v[static_cast<std::size_t>(k)] = v[static_cast<std::size_t>(k - 1)];
    v[static_cast<std::size_t>(k)][p[k - 1]] = 1.0;
  }
  return v;
}

/// Barycenter in local coordinates: axis p[k] gets (n - k)/(n + 1).
inline Point unit_barycenter(const Perm& p, int n) {
  Point b{};
  for (int k = 0; k < n; ++k) b[p[k]] = static_cast<double>(n - k) / (n + 1);
  return b;
}

/// Signed distances (positive inside, world units) from a point with local
/// coordinates u to the n+1 facet planes, plus the inward unit normals.
inline void facet_distances(const Point& u, const Perm& p, int n, double H, double* dist, Point* normals) {
  static const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  dist[0] = H * (1.0 - u[p[0]]);
  if (normals) {
    normals[0] = Point{};
    normals[0][p[0]] = -1.0;
  }
  for (int k = 1; k < n; ++k) {
    dist[k] = H * (u[p[k - 1]] - u[p[k]]) * inv_sqrt2;
    if (normals) {
      normals[k] = Point{};
      normals[k][p[k - 1]] = inv_sqrt2;
      normals[k][p[k]] = -inv_sqrt2;
    }
  }
  dist[n] = H * u[p[n - 1]];
  if (normals) {
    normals[n] = Point{};
    normals[n][p[n - 1]] = 1.0;
  }
}

/// k-volume of the simplex spanned by k+1 points in R^n (Gram determinant).
inline double simplex_volume(const std::vector<Point>& pts, int n) {
  const int k = static_cast<int>(pts.size()) - 1;
  if (k == 0) return 1.0;
  Eigen::MatrixXd E(n, k);
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < n; ++i) E(i, j) = pts[static_cast<std::size_t>(j + 1)][i] - pts[0][i];
  const double det = (E.transpose() * E).determinant();
  return std::sqrt(std::max(0.0, det)) / factorial(k);
}

/// Inradius of a k-simplex within its own affine hull: k * volume / boundary area.
inline double simplex_inradius(const std::vector<Point>& pts, int n) {
  const int k = static_cast<int>(pts.size()) - 1;
  double boundary = 0.0;
  for (int drop = 0; drop <= k; ++drop) {
    std::vector<Point> face;
    for (int j = 0; j <= k; ++j)
      if (j != drop) face.push_back(pts[static_cast<std::size_t>(j)]);
    boundary += simplex_volume(face, n);
  }
  return k * simplex_volume(pts, n) / boundary;
}

/// Shape constants of the Kuhn simplex with unit cube edge (all Kuhn simplices
/// of a grid are congruent).
struct ReferenceSimplex {
  int dim = 0;
  double volume = 0.0;
  double diameter = 0.0;
  double inradius = 0.0;
  /// A point of the w-dilation {d_f >= -w} lies within reach * w of the simplex.
  double reach = 0.0;
  /// Distance from the barycenter to the nearest facet plane.
  double barycenter_clearance = 0.0;
  std::vector<double> facet_areas;
  std::vector<double> facet_inradii;
  /// Incenter-homothety: dilated vertex = c + (1 + w/rho)(v - c); stored unit vertices and incenter.
  std::vector<Point> vertices;
  Point incenter{};
  Point barycenter{};

  explicit ReferenceSimplex(int n) : dim(n) {
    Perm id{};
    std::iota(id.begin(), id.begin() + n, 0);
    vertices = unit_vertices(id, n);
    barycenter = unit_barycenter(id, n);
    volume = 1.0 / factorial(n);
    diameter = std::sqrt(static_cast<double>(n));
    inradius = simplex_inradius(vertices, n);
    for (int drop = 0; drop <= n; ++drop) {
      std::vector<Point> face;
      for (int j = 0; j <= n; ++j)
        if (j != drop) face.push_back(vertices[static_cast<std::size_t>(j)]);
      facet_areas.push_back(simplex_volume(face, n));
      facet_inradii.push_back(simplex_inradius(face, n));
    }
    // Incenter: equal distance inradius to every facet plane.
    std::vector<double> d(static_cast<std::size_t>(n + 1));
    std::vector<Point> nrm(static_cast<std::size_t>(n + 1));
    Point zero{};
    facet_distances(zero, id, n, 1.0, d.data(), nrm.data());
    Eigen::MatrixXd A(n + 1, n);
    Eigen::VectorXd rhs(n + 1);
    for (int f = 0; f <= n; ++f) {
      for (int i = 0; i < n; ++i) A(f, i) = nrm[static_cast<std::size_t>(f)][i];
      rhs(f) = inradius - d[static_cast<std::size_t>(f)];
    }
    const Eigen::VectorXd c = A.colPivHouseholderQr().solve(rhs);
    for (int i = 0; i < n; ++i) incenter[i] = c(i);
    reach = 0.0;
    for (const auto& v : vertices) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += (v[i] - incenter[i]) * (v[i] - incenter[i]);
      reach = std::max(reach, std::sqrt(s) / inradius);
    }
    facet_distances(barycenter, id, n, 1.0, d.data(), nullptr);
    barycenter_clearance = *std::min_element(d.begin(), d.end());
  }
};

inline const ReferenceSimplex& reference(int n) {
  static std::vector<ReferenceSimplex> cache = [] {
    std::vector<ReferenceSimplex> out;
    for (int k = 0; k <= kMaxDim; ++k) out.emplace_back(k < 2 ? 2 : k);
    return out;
  }();
  return cache[static_cast<std::size_t>(n)];
}

/// Kuhn triangulation of a set of cells of a (possibly shifted) cube grid.
struct SimplicialMesh {
  int dim = 2;
  int level = 0;
  double H = 1.0;
  Point origin{};
  std::vector<int> dims;           ///< mesh-grid cells per axis
  std::vector<std::size_t> cells;  ///< included mesh cells, ascending linear index

  std::size_t simplex_count() const { return cells.size() * static_cast<std::size_t>(factorial(dim)); }
  double simplex_volume() const { return std::pow(H, dim) / factorial(dim); }
  double total_volume() const { return static_cast<double>(simplex_count()) * simplex_volume(); }
  double max_diameter() const { return H * std::sqrt(static_cast<double>(dim)); }

  Index cell_coords(std::size_t cell) const {
    Index c{};
    for (int k = dim - 1; k >= 0; --k) {
      const auto ext = static_cast<std::size_t>(dims[static_cast<std::size_t>(k)]);
      c[k] = static_cast<int>(cell % ext);
      cell /= ext;
    }
    return c;
  }
  std::size_t cell_index(const Index& c) const {
    std::size_t idx = 0;
    for (int k = 0; k < dim; ++k)
      idx = idx * static_cast<std::size_t>(dims[static_cast<std::size_t>(k)]) + static_cast<std::size_t>(c[k]);
    return idx;
  }
  bool in_range(const Index& c) const {
    for (int k = 0; k < dim; ++k)
      if (c[k] < 0 || c[k] >= dims[static_cast<std::size_t>(k)]) return false;
    return true;
  }
  Point cell_lo(const Index& c) const {
    Point p{};
    for (int k = 0; k < dim; ++k) p[k] = origin[k] + H * c[k];
    return p;
  }
  Point barycenter(std::size_t cell, int perm) const {
    const Point lo = cell_lo(cell_coords(cell));
    const Point b = unit_barycenter(permutations(dim)[static_cast<std::size_t>(perm)], dim);
    Point out{};
    for (int k = 0; k < dim; ++k) out[k] = lo[k] + H * b[k];
    return out;
  }
  std::vector<Point> vertices(std::size_t cell, int perm) const {
    const Point lo = cell_lo(cell_coords(cell));
    auto v = unit_vertices(permutations(dim)[static_cast<std::size_t>(perm)], dim);
    for (auto& x : v)
      for (int k = 0; k < dim; ++k) x[k] = lo[k] + H * x[k];
    return v;
  }
};

/// Kuhn triangulation of the included cells of `region`, each split into
/// 2^(N*level) subcells and N! simplices per subcell. Aligned with the grid.
inline SimplicialMesh triangulate(const GridDomain& region, int level) {
  if (region.empty()) fail(ErrorKind::empty_domain, "empty domain");
  if (level < 0) fail(ErrorKind::invalid_argument, "refinement level must be non-negative");
  const int n = region.dim();
  const int sub = 1 << level;
  SimplicialMesh mesh;
  mesh.dim = n;
  mesh.level = level;
  mesh.H = region.h() / sub;
  for (int k = 0; k < n; ++k) {
    mesh.origin[k] = region.origin(k);
    mesh.dims.push_back(region.cells(k) * sub);
  }
  for (std::size_t c = 0; c < region.cell_count(); ++c) {
    if (!region.included(c)) continue;
    const Index ci = region.cell_coords(c);
    Index q{};
    for (int k = 0; k < n; ++k) q[k] = ci[k] * sub;
    Index off{};
    while (true) {
      Index m{};
      for (int k = 0; k < n; ++k) m[k] = q[k] + off[k];
      mesh.cells.push_back(mesh.cell_index(m));
      int k = n - 1;
      while (k >= 0 && ++off[k] >= sub) {
        off[k] = 0;
        --k;
      }
      if (k < 0) break;
    }
  }
  std::sort(mesh.cells.begin(), mesh.cells.end());
  return mesh;
}

/// Mesh of spacing H = h / 2^level shifted so that every node of `domain` is
/// the barycenter of the identity-permutation simplex of its mesh cell. Covers
/// the domain box plus one layer; `cells` lists mesh cells meeting `active`
/// ambient cells (level may be negative for meshes coarser than the grid).
inline SimplicialMesh shifted_mesh(const GridDomain& domain, int level, const CellMask& active) {
  const int n = domain.dim();
  SimplicialMesh mesh;
  mesh.dim = n;
  mesh.level = level;
  mesh.H = std::ldexp(domain.h(), -level);
  for (int k = 0; k < n; ++k) {
    const double frac = static_cast<double>(n - k) / (n + 1);
    mesh.origin[k] = domain.origin(k) - mesh.H * (frac + 1.0);
    const double extent = domain.h() * domain.cells(k);
    mesh.dims.push_back(static_cast<int>(std::ceil(extent / mesh.H - 1e-9)) + 3);
  }
  std::vector<std::uint8_t> hit;
  std::size_t total = 1;
  for (int d : mesh.dims) total *= static_cast<std::size_t>(d);
  hit.assign(total, 0);
  for (std::size_t c = 0; c < domain.cell_count(); ++c) {
    if (!active[c]) continue;
    const Index ci = domain.cell_coords(c);
    Index lo{}, hi{};
    for (int k = 0; k < n; ++k) {
      const double a = domain.origin(k) + domain.h() * ci[k];
      const double b = a + domain.h();
      lo[k] = std::max(0, static_cast<int>(std::floor((a - mesh.origin[k]) / mesh.H)));
      hi[k] = std::min(mesh.dims[static_cast<std::size_t>(k)] - 1,
                       static_cast<int>(std::floor((b - mesh.origin[k]) / mesh.H)));
    }
    Index q = lo;
    while (true) {
      hit[mesh.cell_index(q)] = 1;
      int k = n - 1;
      while (k >= 0 && ++q[k] > hi[k]) {
        q[k] = lo[k];
        --k;
      }
      if (k < 0) break;
    }
  }
  for (std::size_t i = 0; i < total; ++i)
    if (hit[i]) mesh.cells.push_back(i);
  return mesh;
}

}  // namespace lusin::kuhn
