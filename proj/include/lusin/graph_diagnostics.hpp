#pragma once

// Geometry of the graph of a sampled field v : Omega -> R^N inside R^2N:
// area, distance of tangent planes from the vertical, and measures of
// projections onto N-planes near the horizontal.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

#include "lusin/error.hpp"
#include "lusin/field_core.hpp"
#include "lusin/kuhn.hpp"

namespace lusin {

/// An N-plane of R^D stored as its orthogonal projection.
class PlaneSpec {
 public:
  PlaneSpec() = default;

  /// Plane spanned by the columns of `basis` (D x N, full column rank).
  static PlaneSpec from_basis(const Eigen::MatrixXd& basis) {
    const Eigen::MatrixXd gram = basis.transpose() * basis;
    PlaneSpec p;
    p.P_ = basis * gram.ldlt().solve(basis.transpose());
    p.P_ = 0.5 * (p.P_ + p.P_.transpose());
    p.rank_ = static_cast<int>(basis.cols());
    return p;
  }

  /// R^N x {0} in R^2N.
  static PlaneSpec horizontal(int n) {
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(2 * n, n);
    b.topRows(n).setIdentity();
    return from_basis(b);
  }
  /// {0} x R^N in R^2N.
  static PlaneSpec vertical(int n) {
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(2 * n, n);
    b.bottomRows(n).setIdentity();
    return from_basis(b);
  }
  /// Horizontal plane rotated by `angle` in the (x_axis, y_axis) coordinate pair.
  static PlaneSpec tilted(int n, int axis, double angle) {
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(2 * n, n);
    b.topRows(n).setIdentity();
    b(axis, axis) = std::cos(angle);
    b(n + axis, axis) = std::sin(angle);
    return from_basis(b);
  }
  /// Tangent plane of a graph with Jacobian J: span of the columns of [I; J].
  static PlaneSpec graph_tangent(const Eigen::MatrixXd& J) {
    const auto n = J.rows();
    Eigen::MatrixXd b(2 * n, n);
    b.topRows(n).setIdentity();
    b.bottomRows(n) = J;
    return from_basis(b);
  }

  const Eigen::MatrixXd& projection() const { return P_; }
  int plane_dim() const { return rank_; }
  int ambient_dim() const { return static_cast<int>(P_.rows()); }

  /// Symmetric, idempotent within 1e-10 and trace N within 1e-8.
  bool valid() const {
    if (P_.size() == 0) return false;
    if ((P_ - P_.transpose()).cwiseAbs().maxCoeff() > 1e-10) return false;
    if ((P_ * P_ - P_).cwiseAbs().maxCoeff() > 1e-10) return false;
    return std::abs(P_.trace() - rank_) <= 1e-8;
  }

 private:
  Eigen::MatrixXd P_;
  int rank_ = 0;
};

/// Operator norm of P1 - P2 by power iteration on (P1 - P2)^T (P1 - P2),
/// started from every coordinate vector and a fixed dense vector.
inline double plane_distance(const PlaneSpec& a, const PlaneSpec& b, double tol = 1e-10) {
  if (a.ambient_dim() != b.ambient_dim()) fail(ErrorKind::invalid_argument, "planes live in different spaces");
  const Eigen::MatrixXd D = a.projection() - b.projection();
  const Eigen::MatrixXd M = D.transpose() * D;
  const auto dim = M.rows();
  double best = 0.0;
  for (Eigen::Index s = 0; s <= dim; ++s) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(dim);
    if (s < dim) {
      x(s) = 1.0;
    } else {
      for (Eigen::Index i = 0; i < dim; ++i) x(i) = 1.0 + 0.1 * static_cast<double>(i);
    }
    x.normalize();
    double lam = x.dot(M * x);
    for (int it = 0; it < 10000; ++it) {
      Eigen::VectorXd y = M * x;
      const double ny = y.norm();
      if (ny == 0.0) {
        lam = 0.0;
        break;
      }
      x = y / ny;
      const double next = x.dot(M * x);
      const bool done = std::abs(next - lam) <= tol * std::max(next, 1e-300) || std::abs(next - lam) < 1e-300;
      lam = next;
      if (done) break;
    }
    best = std::max(best, lam);
  }
  return std::clamp(std::sqrt(std::max(best, 0.0)), 0.0, 1.0);
}

namespace detail {

/// Jacobian of v at a node: central differences where both neighbours are
/// in the grid and inside the support closure, one-sided otherwise.
inline Eigen::MatrixXd node_jacobian(const SampledField& v, std::size_t node, const std::vector<std::uint8_t>& inside) {
  const GridDomain& d = v.domain();
  const int n = d.dim();
  const Index ni = d.node_coords(node);
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(v.components(), n);
  for (int k = 0; k < n; ++k) {
    Index lo = ni, hi = ni;
    lo[k] -= 1;
    hi[k] += 1;
    const bool has_lo = d.node_in_range(lo) && inside[d.node_index(lo)];
    const bool has_hi = d.node_in_range(hi) && inside[d.node_index(hi)];
    std::size_t a = node, b = node;
    double span = 0.0;
    if (has_lo) {
      a = d.node_index(lo);
      span += d.h();
    }
    if (has_hi) {
      b = d.node_index(hi);
      span += d.h();
    }
    if (span == 0.0) continue;
    for (int c = 0; c < v.components(); ++c) J(c, k) = (v.at(b, c) - v.at(a, c)) / span;
  }
  return J;
}

/// Jacobian at a cell centre from its corner values (mean of edge differences).
inline Eigen::MatrixXd cell_jacobian(const SampledField& v, std::size_t cell) {
  const GridDomain& d = v.domain();
  const int n = d.dim();
  const auto corners = d.corner_nodes(cell);
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(v.components(), n);
  const double scale = 1.0 / (static_cast<double>(corners.size() / 2) * d.h());
  for (std::size_t m = 0; m < corners.size(); ++m)
    for (int k = 0; k < n; ++k) {
      if (m & (std::size_t{1} << k)) continue;
      const std::size_t hi = corners[m | (std::size_t{1} << k)];
      for (int c = 0; c < v.components(); ++c) J(c, k) += (v.at(hi, c) - v.at(corners[m], c)) * scale;
    }
  return J;
}

}  // namespace detail

/// Midpoint-rule area of the graph over the included cells.
inline double graph_area(const SampledField& v) {
  const GridDomain& d = v.domain();
  double area = 0.0;
  for (std::size_t c = 0; c < d.cell_count(); ++c) {
    if (!d.included(c)) continue;
    const double f2 = detail::cell_jacobian(v, c).squaredNorm();
    area += std::sqrt(1.0 + f2);
  }
  return area * d.cell_volume();
}

/// max over included cells of the Frobenius norm of the cell Jacobian.
inline double jacobian_sup(const SampledField& v) {
  const GridDomain& d = v.domain();
  double worst = 0.0;
  for (std::size_t c = 0; c < d.cell_count(); ++c)
    if (d.included(c)) worst = std::max(worst, detail::cell_jacobian(v, c).norm());
  return worst;
}

/// min over nodes of the domain closure of the distance between the graph
/// tangent plane and the vertical plane.
inline double transversality_gap(const SampledField& v) {
  const GridDomain& d = v.domain();
  if (!v.is_vector_field()) fail(ErrorKind::invalid_argument, "transversality needs a vector field");
  const auto inside = d.node_mask();
  const auto vert = PlaneSpec::vertical(d.dim());
  double gap = 1.0;
  for (std::size_t node = 0; node < d.node_count(); ++node) {
    if (!inside[node]) continue;
    const auto T = PlaneSpec::graph_tangent(detail::node_jacobian(v, node, inside));
    gap = std::min(gap, plane_distance(T, vert));
  }
  return gap;
}

/// Measure of the projection of the sampled graph (cells split into Kuhn
/// simplices, mapped affinely) onto plane `pi`, rasterized with `resolution`
/// raster cells per domain-box axis. The raster frame is fixed by the domain
/// box (padded by whole raster cells), so it is aligned with the grid.
inline double projected_measure(const SampledField& v, const PlaneSpec& pi, int resolution, double eps0 = -1.0) {
  const GridDomain& d = v.domain();
  const int n = d.dim();
  if (!v.is_vector_field()) fail(ErrorKind::invalid_argument, "projection needs a vector field");
  if (pi.ambient_dim() != 2 * n || pi.plane_dim() != n) fail(ErrorKind::invalid_argument, "plane dimension mismatch");
  if (resolution < 1) fail(ErrorKind::invalid_argument, "resolution must be positive");
  if (eps0 < 0.0) eps0 = transversality_gap(v);
  if (plane_distance(pi, PlaneSpec::horizontal(n)) >= eps0) fail(ErrorKind::not_a_graph, "not a graph over plane");

  // Orthonormal frame of pi continuous in pi: orthonormalised P [I; 0].
  Eigen::MatrixXd seed = pi.projection().leftCols(n);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(seed);
  Eigen::MatrixXd U = qr.householderQ() * Eigen::MatrixXd::Identity(2 * n, n);
  const Eigen::MatrixXd R = U.transpose() * seed;
  for (int k = 0; k < n; ++k)
    if (R(k, k) < 0) U.col(k) *= -1.0;

  double vmax = 0.0;
  for (std::size_t node = 0; node < d.node_count(); ++node) vmax = std::max(vmax, v.magnitude(node));
  std::vector<double> step(static_cast<std::size_t>(n)), lo(static_cast<std::size_t>(n));
  std::vector<int> res(static_cast<std::size_t>(n));
  std::size_t total = 1;
  for (int k = 0; k < n; ++k) {
    const double extent = d.h() * d.cells(k);
    step[static_cast<std::size_t>(k)] = extent / resolution;
    const int pad = static_cast<int>(std::ceil((vmax + extent * 1e-3) / step[static_cast<std::size_t>(k)])) + 1;
    lo[static_cast<std::size_t>(k)] = d.origin(k) - pad * step[static_cast<std::size_t>(k)];
    res[static_cast<std::size_t>(k)] = resolution + 2 * pad;
    total *= static_cast<std::size_t>(res[static_cast<std::size_t>(k)]);
  }
  std::vector<std::uint8_t> hit(total, 0);

  const auto& perms = kuhn::permutations(n);
  Eigen::VectorXd X(2 * n);
  for (std::size_t c = 0; c < d.cell_count(); ++c) {
    if (!d.included(c)) continue;
    const auto corners = d.corner_nodes(c);
    for (const auto& p : perms) {
      // Mapped vertices.
      std::vector<Eigen::VectorXd> Y;
      std::size_t mbits = 0;
      for (int j = 0; j <= n; ++j) {
        if (j > 0) mbits |= std::size_t{1} << p[j - 1];
        const std::size_t node = corners[mbits];
        const Point x = d.node_position(node);
        for (int k = 0; k < n; ++k) {
          X(k) = x[k];
          X(n + k) = v.at(node, k);
        }
        Y.push_back(U.transpose() * X);
      }
      Eigen::MatrixXd E(n, n);
      for (int j = 0; j < n; ++j) E.col(j) = Y[static_cast<std::size_t>(j + 1)] - Y[0];
      Eigen::FullPivLU<Eigen::MatrixXd> lu(E);
      if (!lu.isInvertible()) continue;
      const Eigen::MatrixXd Einv = lu.inverse();
      Index ilo{}, ihi{};
      for (int k = 0; k < n; ++k) {
        double a = Y[0](k), b = Y[0](k);
        for (const auto& y : Y) {
          a = std::min(a, y(k));
          b = std::max(b, y(k));
        }
        const double s = step[static_cast<std::size_t>(k)], o = lo[static_cast<std::size_t>(k)];
        ilo[k] = std::max(0, static_cast<int>(std::floor((a - o) / s - 0.5)));
        ihi[k] = std::min(res[static_cast<std::size_t>(k)] - 1, static_cast<int>(std::ceil((b - o) / s - 0.5)));
        if (ilo[k] > ihi[k]) goto next_simplex;
      }
      {
        Index q = ilo;
        Eigen::VectorXd z(n);
        while (true) {
          for (int k = 0; k < n; ++k)
            z(k) = lo[static_cast<std::size_t>(k)] + (q[k] + 0.5) * step[static_cast<std::size_t>(k)];
          const Eigen::VectorXd lam = Einv * (z - Y[0]);
          const double tol = 1e-12;
          bool in = lam.sum() <= 1.0 + tol;
          for (int k = 0; in && k < n; ++k) in = lam(k) >= -tol;
          if (in) {
            std::size_t idx = 0;
            for (int k = 0; k < n; ++k)
              idx = idx * static_cast<std::size_t>(res[static_cast<std::size_t>(k)]) + static_cast<std::size_t>(q[k]);
            hit[idx] = 1;
          }
          int k = n - 1;
          while (k >= 0 && ++q[k] > ihi[k]) {
            q[k] = ilo[k];
            --k;
          }
          if (k < 0) break;
        }
      }
    next_simplex:;
    }
  }
  double cell = 1.0;
  for (double s : step) cell *= s;
  return static_cast<double>(std::count(hit.begin(), hit.end(), std::uint8_t{1})) * cell;
}

}  // namespace lusin
