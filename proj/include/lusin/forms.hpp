#pragma once

// Nearly exact 1-forms on the flat 2-torus: localize with a partition of
// unity over translated square charts, run the gradient iteration per chart
// and coefficient, and reassemble the primitive.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "lusin/error.hpp"
#include "lusin/field_core.hpp"
#include "lusin/scheme.hpp"
#include "lusin/smooth_step.hpp"

namespace lusin::forms {

/// Strictly increasing multi-indices 1 <= l1 < ... < lk <= m, lexicographic.
inline std::vector<std::vector<int>> multi_indices(int m, int k) {
  std::vector<std::vector<int>> out;
  if (k < 0 || k > m) return out;
  std::vector<int> cur(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) cur[static_cast<std::size_t>(i)] = i + 1;
  while (true) {
    out.push_back(cur);
    int i = k - 1;
    while (i >= 0 && cur[static_cast<std::size_t>(i)] == m - k + i + 1) --i;
    if (i < 0) break;
    ++cur[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < k; ++j) cur[static_cast<std::size_t>(j)] = cur[static_cast<std::size_t>(j - 1)] + 1;
  }
  return out;
}

/// The flat torus [0,1)^2 sampled on an M x M periodic node lattice.
struct TorusGrid {
  int M = 64;
  double h() const { return 1.0 / M; }
  std::size_t node_count() const { return static_cast<std::size_t>(M) * static_cast<std::size_t>(M); }
  std::size_t node(int i, int j) const {
    const int a = ((i % M) + M) % M, b = ((j % M) + M) % M;
    return static_cast<std::size_t>(a) * static_cast<std::size_t>(M) + static_cast<std::size_t>(b);
  }
  Point position(std::size_t n) const {
    Point x{};
    x[0] = static_cast<double>(n / static_cast<std::size_t>(M)) * h();
    x[1] = static_cast<double>(n % static_cast<std::size_t>(M)) * h();
    return x;
  }
  /// Cells share the node numbering of their lower corner.
  std::size_t cell_count() const { return node_count(); }
};

/// A degree-k form on the torus: one coefficient per multi-index per node.
struct SampledForm {
  TorusGrid grid;
  int m = 2;
  int k = 1;
  std::vector<std::vector<int>> indices;
  std::vector<double> coeff;  ///< node-major, |indices| values per node

  std::size_t width() const { return indices.size(); }
  double at(std::size_t node, std::size_t lambda) const { return coeff[node * width() + lambda]; }

  static SampledForm zeros(const TorusGrid& g, int k) {
    SampledForm f;
    f.grid = g;
    f.k = k;
    f.indices = multi_indices(2, k);
    f.coeff.assign(g.node_count() * f.indices.size(), 0.0);
    return f;
  }
};

/// Square chart U = lo + (0, side)^2 (mod 1) with translation coordinates
/// psi(x) = (x - lo) mod 1, and cut-off chi~ = prod_k beta(|x_k - c_k|),
/// beta = 1 up to `core`, 0 from `support` (both half-widths, support < side / 2).
struct Chart {
  Index lo{};  ///< lower corner in torus nodes
  int side = 0;  ///< in torus cells
  double core = 0.0, support = 0.0;
  bool full = false;  ///< chi~ = 1 on the whole chart (single-chart atlas)
};

struct ChartAtlas {
  TorusGrid grid;
  std::vector<Chart> charts;

  /// Four translated squares of side 3/4 centred at (1/4 | 3/4)^2, cut-offs
  /// flat out to 1/4 and vanishing from 0.34.
  static ChartAtlas torus4(int M) {
    if (M % 8 != 0 || M < 16) fail(ErrorKind::invalid_argument, "torus atlas needs M a multiple of 8");
    ChartAtlas a;
    a.grid.M = M;
    for (int cx : {0, 1})
      for (int cy : {0, 1}) {
        Chart c;
        c.side = 3 * M / 4;
        c.lo[0] = (2 * cx + 1) * M / 4 - 3 * M / 8;
        c.lo[1] = (2 * cy + 1) * M / 4 - 3 * M / 8;
        c.core = 0.25;
        c.support = 0.34;
        a.charts.push_back(c);
      }
    return a;
  }

  /// One chart of side 1 with chi = 1: localizing is the identity.
  static ChartAtlas single(int M) {
    ChartAtlas a;
    a.grid.M = M;
    Chart c;
    c.side = M;
    c.full = true;
    a.charts.push_back(c);
    return a;
  }

  GridDomain chart_domain(std::size_t i) const {
    const Chart& c = charts[i];
    return GridDomain::box(2, c.side, c.side * grid.h());
  }

  /// Chart coordinates of a torus point; may fall outside [0, side h].
  Point to_chart(std::size_t i, const Point& x) const {
    const Chart& c = charts[i];
    Point y{};
    for (int k = 0; k < 2; ++k) {
      const double t = x[k] - c.lo[k] * grid.h();
      y[k] = t - std::floor(t);
    }
    return y;
  }

  /// Torus node of chart node (a, b).
  std::size_t torus_node(std::size_t i, int a, int b) const {
    return grid.node(charts[i].lo[0] + a, charts[i].lo[1] + b);
  }

  double cutoff(std::size_t i, const Point& x) const {
    const Chart& c = charts[i];
    const Point y = to_chart(i, x);
    const double half = 0.5 * c.side * grid.h();
    if (c.full) return (y[0] <= 2 * half && y[1] <= 2 * half) ? 1.0 : 0.0;
    double out = 1.0;
    for (int k = 0; k < 2; ++k) {
      const double t = std::abs(y[k] - half);
      out *= profile::ramp((c.support - t) / (c.support - c.core));
    }
    return out;
  }

  /// chi_i = chi~_i / sum_j chi~_j at x; fails where nothing covers x.
  std::vector<double> partition(const Point& x) const {
    std::vector<double> w(charts.size());
    double total = 0.0;
    for (std::size_t i = 0; i < charts.size(); ++i) total += (w[i] = cutoff(i, x));
    if (!(total > 0.0)) fail(ErrorKind::atlas_coverage, "atlas does not cover manifold");
    for (double& v : w) v /= total;
    return w;
  }
};

/// pi^(i) = (psi_i)_# (chi_i omega): per chart, a chart-grid field with one
/// component per multi-index.
struct LocalForm {
  std::size_t chart = 0;
  GridDomain domain;
  SampledField coeff;  ///< components = |indices|
};

inline std::vector<LocalForm> localize(const SampledForm& omega, const ChartAtlas& atlas) {
  if (omega.grid.M != atlas.grid.M) fail(ErrorKind::invalid_argument, "form and atlas grids differ");
  const TorusGrid& g = atlas.grid;
  // Coverage first, so a gap is an error rather than a silent zero.
  for (std::size_t n = 0; n < g.node_count(); ++n) (void)atlas.partition(g.position(n));
  std::vector<LocalForm> out;
  const auto w = static_cast<std::size_t>(omega.width());
  for (std::size_t i = 0; i < atlas.charts.size(); ++i) {
    LocalForm lf;
    lf.chart = i;
    lf.domain = atlas.chart_domain(i);
    std::vector<double> vals(lf.domain.node_count() * w, 0.0);
    const int side = atlas.charts[i].side;
    for (int a = 0; a <= side; ++a)
      for (int b = 0; b <= side; ++b) {
        const std::size_t tn = atlas.torus_node(i, a, b);
        // Chart boundary nodes sit outside the open chart; chi vanishes there
        // except for the single full chart.
        if (!atlas.charts[i].full && (a == 0 || b == 0 || a == side || b == side)) continue;
        const double chi = atlas.partition(g.position(tn))[i];
        const std::size_t cn = lf.domain.node_index(Index{a, b});
        for (std::size_t l = 0; l < w; ++l) vals[cn * w + l] = chi * omega.at(tn, l);
      }
    lf.coeff = SampledField(lf.domain, static_cast<int>(w), std::move(vals));
    out.push_back(std::move(lf));
  }
  return out;
}

/// Sum of pullbacks of local forms at each torus node.
inline SampledForm reassemble(const std::vector<LocalForm>& locals, const ChartAtlas& atlas, int k) {
  SampledForm out = SampledForm::zeros(atlas.grid, k);
  const auto w = out.width();
  for (const auto& lf : locals) {
    const int side = atlas.charts[lf.chart].side;
    // With a full chart, nodes 0 and side coincide on the torus; count once.
    const int last = atlas.charts[lf.chart].full ? side - 1 : side;
    for (int a = 0; a <= last; ++a)
      for (int b = 0; b <= last; ++b) {
        const std::size_t tn = atlas.torus_node(lf.chart, a, b);
        const std::size_t cn = lf.domain.node_index(Index{a, b});
        for (std::size_t l = 0; l < w; ++l) out.coeff[tn * w + l] += lf.coeff.at(cn, static_cast<int>(l));
      }
  }
  return out;
}

/// A 0-form gamma = sum over charts and multi-indices of pulled-back potentials.
struct TorusPotential {
  const ChartAtlas* atlas = nullptr;
  struct Term {
    std::size_t chart;
    int lambda;  ///< 1-based coordinate
    PotentialSum phi;
  };
  std::vector<Term> terms;

  void evaluate(const Point& x, double& value, Point& grad) const {
    value = 0.0;
    grad = Point{};
    for (const auto& t : terms) {
      const Point y = atlas->to_chart(t.chart, x);
      double v = 0.0;
      Point g{};
      t.phi.evaluate(y, v, g);
      value += v;
      grad[0] += g[0];
      grad[1] += g[1];
    }
  }
  double value(const Point& x) const {
    double v;
    Point g;
    evaluate(x, v, g);
    return v;
  }
};

/// d gamma for a 0-form, analytic.
inline SampledForm exterior_derivative(const TorusPotential& gamma) {
  SampledForm out = SampledForm::zeros(gamma.atlas->grid, 1);
  for (std::size_t n = 0; n < out.grid.node_count(); ++n) {
    double v;
    Point g;
    gamma.evaluate(out.grid.position(n), v, g);
    out.coeff[2 * n] = g[0];
    out.coeff[2 * n + 1] = g[1];
  }
  return out;
}

/// d gamma by central differences with step hfd (cross-check).
inline SampledForm exterior_derivative_fd(const TorusPotential& gamma, double hfd) {
  SampledForm out = SampledForm::zeros(gamma.atlas->grid, 1);
  for (std::size_t n = 0; n < out.grid.node_count(); ++n) {
    const Point x = out.grid.position(n);
    for (int k = 0; k < 2; ++k) {
      Point a = x, b = x;
      a[k] -= hfd;
      b[k] += hfd;
      out.coeff[2 * n + static_cast<std::size_t>(k)] = (gamma.value(b) - gamma.value(a)) / (2 * hfd);
    }
  }
  return out;
}

struct NearlyExactOptions {
  Schedule schedule;  ///< delta is overwritten by the per-chart budget
  RoughOptions rough;
  int max_halvings = 8;
};

struct NearlyExactResult {
  std::vector<std::uint8_t> A;  ///< torus cells (indexed by lower-corner node)
  TorusPotential gamma;
  double volume_A = 0.0;     ///< cells of A plus the certified tube bounds
  double eps_chart = 0.0;    ///< per-run budget that met the global one
  double tolerance = 0.0;    ///< composed residual bound: sum of per-run bounds
  double residual_sup = 0.0;  ///< max over nodes off A of |omega - d gamma|
  std::vector<FinalCertificate> runs;  ///< chart-major, then multi-index

  bool valid(double eps) const { return volume_A <= eps && residual_sup <= tolerance; }
};

/// omega = d gamma off A with Vol(A) <= eps Vol(T^2) (k = 1, m = 2).
inline NearlyExactResult nearly_exact(const SampledForm& omega, const ChartAtlas& atlas, double eps,
                                      const NearlyExactOptions& opt = {}) {
  if (omega.k != 1 || omega.m != 2) fail(ErrorKind::invalid_argument, "only 1-forms on the 2-torus are implemented");
  if (!(eps > 0.0)) fail(ErrorKind::invalid_argument, "eps must be positive");
  const auto locals = localize(omega, atlas);
  const TorusGrid& g = atlas.grid;
  const std::size_t runs_per_try = locals.size() * omega.width();

  double eps_chart = eps / static_cast<double>(runs_per_try);
  for (int attempt = 0;; ++attempt) {
    if (attempt > opt.max_halvings) fail(ErrorKind::budget_failure, "nearly exact budget unreachable");
    NearlyExactResult res;
    res.eps_chart = eps_chart;
    res.gamma.atlas = &atlas;
    res.A.assign(g.cell_count(), 0);
    double tubes = 0.0;
    for (const auto& lf : locals) {
      for (std::size_t l = 0; l < omega.width(); ++l) {
        const int lambda = omega.indices[l][0];
        // b_lambda dx^lambda as the vector field b_lambda e_lambda.
        std::vector<double> vals(lf.domain.node_count() * 2, 0.0);
        for (std::size_t n = 0; n < lf.domain.node_count(); ++n)
          vals[2 * n + static_cast<std::size_t>(lambda - 1)] = lf.coeff.at(n, static_cast<int>(l));
        Schedule sc = opt.schedule;
        sc.delta = eps_chart;
        FinalCertificate fc;
        try {
          fc = run(SampledField(lf.domain, 2, std::move(vals)), lf.domain, sc, opt.rough);
        } catch (const Error& e) {
          throw Error(e.kind(), "chart " + std::to_string(lf.chart) + ": " + e.what());
        }
        tubes += fc.tube_measure;
        res.tolerance += fc.residual_bound;
        for (std::size_t c = 0; c < lf.domain.cell_count(); ++c)
          if (fc.A[c]) {
            const Index ci = lf.domain.cell_coords(c);
            res.A[atlas.torus_node(lf.chart, ci[0], ci[1])] = 1;
          }
        res.gamma.terms.push_back({lf.chart, lambda, fc.phi});
        res.runs.push_back(std::move(fc));
      }
    }
    const double cell = g.h() * g.h();
    res.volume_A = static_cast<double>(std::count(res.A.begin(), res.A.end(), 1)) * cell + tubes;
    if (res.volume_A > eps) {
      eps_chart *= 0.5;
      continue;
    }
    // Residual at nodes not touching an A cell.
    const auto dg = exterior_derivative(res.gamma);
    for (int i = 0; i < g.M; ++i)
      for (int j = 0; j < g.M; ++j) {
        bool off_a = true;
        for (int di : {-1, 0})
          for (int dj : {-1, 0}) off_a = off_a && !res.A[g.node(i + di, j + dj)];
        if (!off_a) continue;
        const std::size_t n = g.node(i, j);
        double s = 0.0;
        for (std::size_t l = 0; l < 2; ++l) s += std::pow(omega.at(n, l) - dg.at(n, l), 2);
        res.residual_sup = std::max(res.residual_sup, std::sqrt(s));
      }
    return res;
  }
}

/// Whether the torus segment between neighbouring nodes n0 -> n1 meets A:
/// both adjacent cells in A, or it crosses an active facet in some chart.
inline bool edge_meets_exceptional(const NearlyExactResult& res, const ChartAtlas& atlas, int i, int j, int axis) {
  const TorusGrid& g = atlas.grid;
  // Cells sharing the edge from node (i, j) along `axis`.
  const std::size_t c0 = g.node(i, j);
  const std::size_t c1 = axis == 0 ? g.node(i, j - 1) : g.node(i - 1, j);
  if (res.A[c0] && res.A[c1]) return true;
  Point a = g.position(g.node(i, j)), b = a;
  b[axis] += g.h();
  for (const auto& t : res.gamma.terms) {
    const Point ya = atlas.to_chart(t.chart, a);
    Point yb = ya;
    yb[axis] += g.h();
    for (const auto& phi : t.phi.terms)
      if (phi.crosses_active_facet(ya, yb)) return true;
  }
  return false;
}

/// Loop integral of omega along the horizontal (axis 0) or vertical loop
/// through node row/column `j`, trapezoid rule.
inline double loop_integral(const SampledForm& omega, int axis, int j) {
  const TorusGrid& g = omega.grid;
  double s = 0.0;
  for (int i = 0; i < g.M; ++i) {
    const std::size_t a = axis == 0 ? g.node(i, j) : g.node(j, i);
    const std::size_t b = axis == 0 ? g.node(i + 1, j) : g.node(j, i + 1);
    s += 0.5 * (omega.at(a, static_cast<std::size_t>(axis)) + omega.at(b, static_cast<std::size_t>(axis))) * g.h();
  }
  return s;
}

}  // namespace lusin::forms
