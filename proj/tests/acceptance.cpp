// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "lusin/config.hpp"
#include "lusin/driver.hpp"
#include "lusin/forms.hpp"
#include "lusin/generators.hpp"
#include "lusin/graph_diagnostics.hpp"
#include "lusin/pl_potential.hpp"
#include "lusin/preprocess.hpp"
#include "lusin/scheme.hpp"

using namespace lusin;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + std::string("violated: ") + what;
    }
  }
  void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// The shared iterate configuration (criteria 2 to 6 and 9).
const char* kIterateConfig =
    "mode = iterate\n"
    "[field]\n"
    "generator = rotational_bump\n"
    "seed = 1\n"
    "[grid]\n"
    "cells = 256\n"
    "[schedule]\n"
    "delta = 0.1\n"
    "kappa = 0.01\n"
    "eta = 0.05\n"
    "n_max = 6\n"
    "s = 0\n";

driver::RunConfig iterate_config() {
  std::istringstream is(kIterateConfig);
  return driver::make_run_config(config::Config::parse(is));
}

struct Shared {
  driver::RunConfig rc;
  SampledField v;
  FinalCertificate fc;
};

Shared& shared() {
  static Shared s = [] {
    Shared x;
    x.rc = iterate_config();
    x.v = driver::load_field(x.rc);
    x.fc = run(x.v, x.rc.grid, x.rc.schedule, x.rc.rough);
    return x;
  }();
  return s;
}

Outcome ac1() {
  Outcome o;
  const auto d = GridDomain::box(2, 256, 1.0);
  gen::GeneratorSpec spec;
  spec.name = "rotational_bump";
  const auto v = gen::generate(d, spec);
  const auto t0 = std::chrono::steady_clock::now();
  const auto cert = rough_approximate(v, d, 0.1, 0.05, 0.01);
  const double secs = seconds_since(t0);

  // Recheck the node bound independently from the returned K and phi.
  const auto mism = node_mismatch(v, d, cert.phi);
  const auto k_nodes = d.closure_nodes(cert.K);
  double worst = 0.0;
  for (std::size_t i = 0; i < d.node_count(); ++i)
    if (k_nodes[i]) worst = std::max(worst, mism[i]);
  std::size_t out = 0;
  for (std::size_t c = 0; c < d.cell_count(); ++c) out += cert.K[c] ? 0 : 1;
  const double excluded = (static_cast<double>(out) * d.cell_volume() + cert.phi.tube_measure_bound()) / d.measure();

  o.check(excluded <= 0.1, "measure(Omega\\K) " + fmt(excluded) + " <= 0.1");
  o.check(worst <= 0.05, "max K-node |v - grad phi| " + fmt(worst) + " <= 0.05");
  o.check(cert.theta_achieved <= 0.01 && cert.theta_sampled <= cert.theta_achieved,
          "sup|phi| " + fmt(cert.theta_achieved) + " <= 0.01");
  o.check(secs < 60.0, "runtime " + fmt(secs) + " s < 60 s");
  o.note("measure(Omega\\K) " + fmt(excluded) + ", K-node mismatch " + fmt(worst) + ", sup|phi| bound " +
         fmt(cert.theta_achieved) + ", path " + cert.path + ", " + fmt(secs) + " s");
  return o;
}

Outcome ac2() {
  Outcome o;
  const auto& fc = shared().fc;
  const Schedule& sc = fc.schedule;
  o.check(!fc.manifest.empty(), "manifest non-empty");
  for (const auto& r : fc.manifest) {
    const int n = r.budget.n;
    const std::string tag = "step " + std::to_string(n) + " ";
    // Oracles with plain powers; all are exact in binary.
    o.check(r.budget.eps == sc.delta / std::pow(2.0, n + 1), tag + "eps budget");
    o.check(r.budget.eta == sc.eta / std::pow(16.0, n), tag + "eta budget");
    o.check(r.budget.theta == sc.kappa / std::pow(2.0, n + 1), tag + "theta budget");
    o.check(r.excluded_ratio <= r.budget.eps, tag + "excluded " + fmt(r.excluded_ratio) + " <= " + fmt(r.budget.eps));
  }
  double worst = 0.0;
  for (const auto& r : fc.manifest) worst = std::max(worst, r.excluded_ratio / r.budget.eps);
  o.note(std::to_string(fc.manifest.size()) + " steps, budgets exact, max excluded/budget " + fmt(worst));
  return o;
}

Outcome ac3() {
  Outcome o;
  const auto& fc = shared().fc;
  const double s = fc.schedule.s, eta = fc.schedule.eta;
  o.check(fc.manifest.size() == 6, "6 iterations ran (got " + std::to_string(fc.manifest.size()) + ")");
  std::string log = "pre/post/intersection:";
  for (const auto& r : fc.manifest) {
    const int j = r.budget.n + 1;
    const std::string tag = "j=" + std::to_string(j) + " ";
    const double decay = (1.0 + s) * std::pow(4.0, -j) * eta;
    const double clamp = (1.0 + s) * std::pow(8.0, -(j - 1)) * eta;
    o.check(r.intersection_sup <= decay, tag + "|v_j| on intersection " + fmt(r.intersection_sup) + " <= " + fmt(decay));
    o.check(r.post_clamp_sup <= clamp, tag + "|v_j|_X " + fmt(r.post_clamp_sup) + " <= " + fmt(clamp));
    log += " " + fmt(r.pre_clamp_sup) + "/" + fmt(r.post_clamp_sup) + "/" + fmt(r.intersection_sup);
  }
  o.note(log);
  return o;
}

Outcome ac4() {
  Outcome o;
  const auto& fc = shared().fc;
  const double eta = fc.schedule.eta;
  const double res_target = std::pow(4.0, -6) * eta;
  const double y_target = fc.v_norm + eta / 2 + fc.schedule.kappa;
  o.check(fc.measure_ratio <= 0.1, "measure(A)/measure(Omega) " + fmt(fc.measure_ratio) + " <= 0.1");
  o.check(fc.residual_sup <= res_target, "residual off A " + fmt(fc.residual_sup) + " <= 4^-6 eta");
  o.check(fc.z_bound <= 0.01 && fc.z_sampled <= fc.z_bound, "|phi|_Z " + fmt(fc.z_bound) + " <= 0.01");
  o.check(fc.y_sampled <= y_target && fc.y_partial_max <= y_target,
          "|phi|_Y " + fmt(fc.y_sampled) + " <= " + fmt(y_target));
  o.check(fc.valid(), "certificate valid");
  o.note("ratio " + fmt(fc.measure_ratio) + ", residual " + fmt(fc.residual_sup) + " (target " + fmt(res_target) +
         "), Z " + fmt(fc.z_bound) + ", Y " + fmt(fc.y_sampled) + " (partial max " + fmt(fc.y_partial_max) +
         ", bound " + fmt(y_target) + "), steps " + std::to_string(fc.steps));
  return o;
}

// Central difference of phi along axis k.
Point central(const PotentialSum& phi, const Point& x, double h) {
  Point g{};
  for (int k = 0; k < 2; ++k) {
    Point a = x, b = x;
    a[k] -= h;
    b[k] += h;
    g[k] = (phi.value(b) - phi.value(a)) / (2 * h);
  }
  return g;
}

double dist(const Point& a, const Point& b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }

// x and its stencil lie in one simplex of every term, away from every tube.
bool affine_stencil(const PotentialSum& phi, const Point& x, double h) {
  for (const auto& t : phi.terms) {
    const AffinePiece* p0 = t.piece_at(x);
    if (t.in_tube(x)) return false;
    for (int k = 0; k < 2; ++k) {
      Point a = x, b = x;
      a[k] -= h;
      b[k] += h;
      if (t.in_tube(a) || t.in_tube(b) || t.piece_at(a) != p0 || t.piece_at(b) != p0) return false;
      if (t.crosses_active_facet(a, b)) return false;
    }
  }
  return true;
}

Outcome ac5() {
  Outcome o;
  const auto& phi = shared().fc.phi;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Point> pts(10000);
  for (auto& p : pts) {
    p[0] = u(rng);
    p[1] = u(rng);
  }
  std::vector<Point> grads(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) grads[i] = phi.gradient(pts[i]);

  // Halving from the narrowest blend radius: above it the stencil straddles
  // tubes and sees no smooth scale to converge on.
  double r_min = 1e300;
  for (const auto& t : phi.terms)
    if (!t.is_zero()) r_min = std::min(r_min, t.blend_radius());
  std::vector<double> errs;
  for (int k = 0; k <= 6; ++k) {
    const double h = r_min * std::pow(0.5, k);
    double e = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) e += dist(central(phi, pts[i], h), grads[i]);
    errs.push_back(e / static_cast<double>(pts.size()));
  }
  double min_order = 1e300;
  std::string orders;
  for (std::size_t k = 0; k + 1 < errs.size(); ++k) {
    const double ord = std::log2(errs[k] / errs[k + 1]);
    orders += (orders.empty() ? "" : ",") + fmt(ord);
    min_order = std::min(min_order, ord);
  }
  o.check(min_order >= 1.0, "observed order " + fmt(min_order) + " >= 1");

  // Relative error at h = 1e-5 where the stencil stays in one affine piece.
  // Gradients below the rounding resolution of the quotient (a few ulps of
  // sup|phi| over h) are measured against that resolution instead.
  const double hfd = 1e-5;
  const double resolution = 4.0 * std::numeric_limits<double>::epsilon() * phi.sup_bound() / hfd * 1e6;
  double worst_rel = 0.0;
  std::size_t used = 0, unresolved = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (!affine_stencil(phi, pts[i], hfd)) continue;
    ++used;
    const double e = dist(central(phi, pts[i], hfd), grads[i]);
    const double g = std::hypot(grads[i][0], grads[i][1]);
    if (g < resolution) ++unresolved;
    worst_rel = std::max(worst_rel, e / std::max(g, resolution));
  }
  o.check(used > pts.size() / 2, "most points interior (" + std::to_string(used) + ")");
  o.check(worst_rel <= 1e-6, "relative error " + fmt(worst_rel) + " <= 1e-6");
  o.note("h from " + fmt(r_min) + ": mean error " + fmt(errs.front()) + " -> " + fmt(errs.back()) + ", orders " +
         orders + "; at h 1e-5: " + std::to_string(used) + " interior points, max rel " + fmt(worst_rel) + " (" +
         std::to_string(unresolved) + " with |grad| below " + fmt(resolution) + ")");
  return o;
}

struct LoopCount {
  std::size_t loops = 0, obstructed = 0, missed = 0;
  double max_ratio = 0.0;
};

// Every axis rectangle with corners on the even-node lattice: circulation of
// v against eta * perimeter, and whether some edge meets A.
LoopCount obstructed_loops(const SampledField& v, const FinalCertificate& fc) {
  const GridDomain& d = v.domain();
  const int M = d.cells(0);
  const double eta = fc.schedule.eta;
  CellMask K(fc.A.size());
  for (std::size_t c = 0; c < K.size(); ++c) K[c] = fc.A[c] ? 0 : 1;

  // Prefix sums of edge circulation and A contact along grid lines make
  // every rectangle O(1).
  const int N = M + 1;
  auto node = [&](int i, int j) { return d.node_index(Index{i, j}); };
  std::vector<double> cx(static_cast<std::size_t>(N) * N, 0.0), cy(cx.size(), 0.0);
  std::vector<int> mx(cx.size(), 0), my(cx.size(), 0);
  for (int line = 0; line < N; ++line)
    for (int t = 0; t < M; ++t) {
      const std::size_t q = static_cast<std::size_t>(line) * N + t + 1;
      for (int axis = 0; axis < 2; ++axis) {
        const auto a = axis == 0 ? node(t, line) : node(line, t);
        const auto b = axis == 0 ? node(t + 1, line) : node(line, t + 1);
        auto& c = axis == 0 ? cx : cy;
        auto& m = axis == 0 ? mx : my;
        c[q] = c[q - 1] + 0.5 * (v.at(a, axis) + v.at(b, axis)) * d.h();
        m[q] = m[q - 1] +
               (segment_meets_exceptional(d, K, fc.phi.terms, d.node_position(a), d.node_position(b)) ? 1 : 0);
      }
    }
  auto span = [N](const auto& p, int line, int lo, int hi) {
    return p[static_cast<std::size_t>(line) * N + hi] - p[static_cast<std::size_t>(line) * N + lo];
  };
  LoopCount out;
  const int stride = 2;
  for (int i0 = 0; i0 < N; i0 += stride)
    for (int i1 = i0 + stride; i1 < N; i1 += stride)
      for (int j0 = 0; j0 < N; j0 += stride)
        for (int j1 = j0 + stride; j1 < N; j1 += stride) {
          ++out.loops;
          const double circ = span(cx, j0, i0, i1) + span(cy, i1, j0, j1) - span(cx, j1, i0, i1) - span(cy, i0, j0, j1);
          const double length = 2.0 * ((i1 - i0) + (j1 - j0)) * d.h();
          out.max_ratio = std::max(out.max_ratio, std::abs(circ) / length);
          if (std::abs(circ) <= eta * length) continue;
          ++out.obstructed;
          if (span(mx, j0, i0, i1) + span(my, i1, j0, j1) + span(mx, j1, i0, i1) + span(my, i0, j0, j1) == 0)
            ++out.missed;
        }
  return out;
}

Outcome ac6() {
  Outcome o;
  // At amplitude 1 no rectangle reaches eta * length, so the check is also
  // run on a 4x stronger bump where it has content.
  const auto& sh = shared();
  const auto base = obstructed_loops(sh.v, sh.fc);
  o.check(base.missed == 0, std::to_string(base.missed) + " obstructed loops avoid A (amplitude 1)");
  auto rc = sh.rc;
  rc.generator.amplitude = 4.0;
  const auto v4 = driver::load_field(rc);
  const auto fc4 = run(v4, rc.grid, rc.schedule, rc.rough);
  o.check(fc4.valid(), "amplitude 4 certificate valid");
  const auto strong = obstructed_loops(v4, fc4);
  o.check(strong.missed == 0, std::to_string(strong.missed) + " obstructed loops avoid A (amplitude 4)");
  o.check(strong.obstructed > 0, "some loop has |circulation| > eta length");
  o.note("amplitude 1: " + std::to_string(base.obstructed) + " obstructed (max |circ|/length " + fmt(base.max_ratio) +
         "); amplitude 4: " + std::to_string(strong.obstructed) + "/" + std::to_string(strong.loops) +
         " rectangles obstructed, all meet A");

  // Torus: omega = dx1.
  const int T = 128;
  const auto atlas = forms::ChartAtlas::torus4(T);
  auto omega = forms::SampledForm::zeros(atlas.grid, 1);
  for (std::size_t n = 0; n < atlas.grid.node_count(); ++n) omega.coeff[2 * n] = 1.0;
  const double eps = 0.1;
  const auto res = forms::nearly_exact(omega, atlas, eps);
  o.check(res.residual_sup <= res.tolerance, "torus residual " + fmt(res.residual_sup) + " <= " + fmt(res.tolerance));
  o.check(res.volume_A <= eps, "Vol(A) " + fmt(res.volume_A) + " <= " + fmt(eps));
  // Independent residual: analytic d gamma against omega on nodes off A.
  const auto dg = forms::exterior_derivative(res.gamma);
  double indep = 0.0;
  for (int j = 0; j < T; ++j)
    for (int i = 0; i < T; ++i) {
      const auto n = atlas.grid.node(i, j);
      bool off = true;
      for (int a = -1; a <= 0 && off; ++a)
        for (int b = -1; b <= 0 && off; ++b) off = !res.A[atlas.grid.node(i + a, j + b)];
      if (!off) continue;
      indep = std::max(indep, std::hypot(dg.coeff[2 * n] - omega.coeff[2 * n], dg.coeff[2 * n + 1] - omega.coeff[2 * n + 1]));
    }
  o.check(indep <= res.tolerance, "recomputed torus residual " + fmt(indep));
  int met = 0;
  for (int j = 0; j < T; ++j) {
    bool meets = false;
    for (int i = 0; i < T && !meets; ++i) meets = forms::edge_meets_exceptional(res, atlas, i, j, 0);
    met += meets ? 1 : 0;
  }
  o.check(met == T, "every x1-loop (period 1) meets A: " + std::to_string(met) + "/" + std::to_string(T));
  o.note("torus dx1: Vol(A) " + fmt(res.volume_A) + ", residual " + fmt(res.residual_sup) + " (tolerance " +
         fmt(res.tolerance) + "), " + std::to_string(met) + "/" + std::to_string(T) + " x1-loops meet A");
  return o;
}

SampledField field2(const GridDomain& d, const std::function<std::pair<double, double>(const Point&)>& fn) {
  std::vector<double> vals(d.node_count() * 2);
  for (std::size_t i = 0; i < d.node_count(); ++i) {
    const auto [a, b] = fn(d.node_position(i));
    vals[2 * i] = a;
    vals[2 * i + 1] = b;
  }
  return SampledField(d, 2, std::move(vals));
}

Outcome ac7() {
  Outcome o;
  const auto d = GridDomain::box(2, 64, 1.0);
  const auto zero = SampledField::zeros(d, 2);
  const double area = graph_area(zero);
  o.check(area == d.measure(), "graph_area(0) " + fmt(area) + " == measure(Omega)");
  const double gap0 = transversality_gap(zero);
  o.check(gap0 == 1.0, "transversality_gap(0) " + fmt(gap0) + " == 1");

  double prev = 2.0;
  std::string gaps;
  for (double t : {1.0, 2.0, 4.0}) {
    const auto v = field2(d, [t](const Point& x) {
      return std::pair{t * 0.3 * std::sin(4 * x[0] + x[1]), t * 0.2 * std::cos(3 * x[0] * x[1])};
    });
    const double g = transversality_gap(v);
    o.check(g <= prev, "gap non-increasing at t = " + fmt(t));
    gaps += (gaps.empty() ? "" : ",") + fmt(g);
    prev = g;
  }

  const auto v = field2(d, [](const Point& x) { return std::pair{0.05 * x[0] * x[0], 0.03 * std::sin(3 * x[1])}; });
  const int res = 128;
  const double cell = 1.0 / (res * res);
  double last = projected_measure(v, PlaneSpec::tilted(2, 0, 0.0), res), worst = 0.0;
  for (int i = 1; i < 10; ++i) {
    const double m = projected_measure(v, PlaneSpec::tilted(2, 0, 1e-5 * i), res);
    worst = std::max(worst, std::abs(m - last));
    last = m;
  }
  o.check(worst <= 2 * cell, "projected measure jump " + fmt(worst) + " <= 2 raster cells");
  o.note("gaps t=1,2,4: " + gaps + "; max projected-measure jump " + fmt(worst / cell) + " raster cells");
  return o;
}

Outcome ac8() {
  Outcome o;
  double worst_mass = 0.0;
  for (double ratio : {2.0, 2.5, 3.7, 6.0, 12.0}) {
    const auto k = mollifier_kernel(ratio / 256, 1.0 / 256, 2);
    worst_mass = std::max(worst_mass, std::abs(k.mass() - 1.0));
  }
  const auto k3 = mollifier_kernel(0.05, 0.01, 3);
  worst_mass = std::max(worst_mass, std::abs(k3.mass() - 1.0));
  o.check(worst_mass <= 1e-10, "kernel mass error " + fmt(worst_mass));

  const auto d = GridDomain::box(2, 256, 1.0);
  const auto v = field2(d, [](const Point& x) {
    const double r2 = (x[0] - 0.5) * (x[0] - 0.5) + (x[1] - 0.5) * (x[1] - 0.5);
    const double b = r2 < 0.09 ? std::exp(-1.0 / (1.0 - r2 / 0.09)) : 0.0;
    return std::pair{b * (1.0 + x[0]), -b * x[1]};
  });
  double worst_rel = 0.0;
  for (double sigma : {0.08, 0.1, 0.15}) {
    const auto v2 = mollify(v, d, sigma);
    for (int k = 0; k < 2; ++k) {
      double in = 0, out = 0;
      for (std::size_t i = 0; i < d.node_count(); ++i) {
        in += v.at(i, k);
        out += v2.at(i, k);
      }
      worst_rel = std::max(worst_rel, std::abs(out - in) / std::abs(in));
    }
  }
  o.check(worst_rel <= 1e-8, "integral preservation " + fmt(worst_rel));
  o.note("max |mass - 1| " + fmt(worst_mass) + ", max relative integral change " + fmt(worst_rel));
  return o;
}

Outcome ac9() {
  Outcome o;
  const auto rc = iterate_config();
  const auto a = driver::execute(rc);
  const auto b = driver::execute(rc);
  const auto& ca = a.files.at("certificate.txt");
  const auto& cb = b.files.at("certificate.txt");
  o.check(ca == cb, "certificates bit-identical");
  o.check(a.passed && b.passed, "both runs passed");
  std::size_t same = 0;
  for (const auto& [name, content] : a.files)
    if (b.files.count(name) && b.files.at(name) == content) ++same;
  o.note("certificate " + std::to_string(ca.size()) + " bytes identical; " + std::to_string(same) + "/" +
         std::to_string(a.files.size()) + " artifacts identical (metrics.txt carries wall clock)");
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"AC1 rough certificate", ac1},      {"AC2 schedule fidelity", ac2}, {"AC3 geometric decay", ac3},
      {"AC4 final certificate", ac4},      {"AC5 C1 validity", ac5},       {"AC6 circulation obstruction", ac6},
      {"AC7 diagnostics", ac7},            {"AC8 mollifier conservation", ac8},
      {"AC9 determinism", ac9},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    if (!o.pass) ++failed;
    std::printf("%s %s (%.1f s): %s\n", o.pass ? "PASS" : "FAIL", name, seconds_since(t0), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
