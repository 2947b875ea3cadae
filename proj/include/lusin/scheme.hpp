#pragma once

// Residual-correction iteration: repeated rough approximation of the current
// residual with geometrically shrinking budgets, accumulating the potential
// and the exceptional set.

#include <cmath>
#include <string>
#include <vector>

#include "lusin/error.hpp"
#include "lusin/field_core.hpp"
#include "lusin/pl_potential.hpp"
#include "lusin/potential.hpp"
#include "lusin/preprocess.hpp"

namespace lusin {

struct Schedule {
  double delta = 0.1;   ///< final measure budget (ratio of measure(Omega))
  double kappa = 0.01;  ///< final sup budget of the accumulated potential
  double eta = 0.05;    ///< initial accuracy
  int n_max = 6;
  double s = 0.0;                ///< extension slack
  double residual_floor = -1.0;  ///< stop once the residual on the intersection is below; < 0 means 1e-12 eta

  void validate() const {
    if (!(delta > 0.0 && kappa > 0.0 && eta > 0.0)) fail(ErrorKind::invalid_argument, "schedule budgets must be positive");
    if (!(s >= 0.0)) fail(ErrorKind::invalid_argument, "extension slack must be non-negative");
    if (n_max < 1) fail(ErrorKind::invalid_argument, "n_max must be >= 1");
  }
  double floor() const { return residual_floor < 0.0 ? 1e-12 * eta : residual_floor; }
};

/// Budgets handed to step n (0-based; the step produces K_{n+1}, phi_{n+1}, v_{n+1}).
struct StepBudget {
  int n = 0;
  double eps = 0.0;    ///< 2^-(n+1) delta
  double eta = 0.0;    ///< 16^-n eta
  double theta = 0.0;  ///< 2^-(n+1) kappa
  double beta = 0.0;   ///< (1+s) 8^-n eta, the clamp radius for v_{n+1}
};

inline StepBudget step_budget(const Schedule& sc, int n) {
  StepBudget b;
  b.n = n;
  b.eps = std::ldexp(sc.delta, -(n + 1));
  b.eta = std::ldexp(sc.eta, -4 * n);
  b.theta = std::ldexp(sc.kappa, -(n + 1));
  b.beta = (1.0 + sc.s) * std::ldexp(sc.eta, -3 * n);
  return b;
}

/// One manifest row.
struct StepRecord {
  StepBudget budget;
  double excluded_ratio = 0.0;     ///< measure(Omega \ K_{n+1}) / measure(Omega), tube included
  double tube_measure = 0.0;
  double eta_achieved = 0.0;       ///< max over K_{n+1} nodes of |v_n - grad phi_{n+1}|
  double phi_sup_bound = 0.0;      ///< certified ||phi_{n+1}||_Z
  double phi_sup_sampled = 0.0;    ///< sampled ||phi_{n+1}||_Z
  double phi_grad_sampled = 0.0;   ///< sampled ||grad phi_{n+1}||_X
  double phi_grad_bound = 0.0;     ///< analytic gradient bound (tube included)
  double pre_clamp_sup = 0.0;      ///< ||v_n - grad phi_{n+1}||_X before clamping
  double post_clamp_sup = 0.0;     ///< ||v_{n+1}||_X
  double intersection_sup = 0.0;   ///< ||v_{n+1}|| on the running intersection of K_1..K_{n+1}
  double intersection_measure = 0.0;
  int level = 0;
  double r = 0.0;
  double sigma = 0.0;
  std::string path;
};

struct IterationState {
  int n = 0;
  SampledField v;                     ///< current residual v_n, defined on every node
  std::vector<CellMask> K;            ///< K_1 .. K_n
  std::vector<EvaluablePotential> phis;
  CellMask intersection;              ///< running intersection of the K_j (all of Omega initially)
  std::vector<StepRecord> manifest;
};

struct FinalCertificate {
  CellMask A;  ///< open exceptional set: Omega minus the closed cells of the intersection
  PotentialSum phi;
  double measure_A = 0.0;     ///< cells of A
  double tube_measure = 0.0;  ///< sum of the tube bounds
  double measure_ratio = 0.0; ///< (measure_A + tube_measure) / measure(Omega)
  double residual_sup = 0.0;    ///< max over nodes of Omega \ A of |v - grad phi~|
  double residual_bound = 0.0;  ///< (1+s) 4^-n eta at the final n
  double z_bound = 0.0;         ///< sum of certified sup bounds
  double z_sampled = 0.0;
  double y_sampled = 0.0;       ///< sampled sup + grad sup of phi~
  double y_partial_max = 0.0;   ///< max over n of sum_{j<=n} ||phi_j||_Y (sampled)
  double y_bound = 0.0;         ///< C0 (||v||_X + eta/2 + kappa), C0 = 1
  double v_norm = 0.0;
  int steps = 0;
  std::vector<StepRecord> manifest;
  Schedule schedule;

  bool valid() const {
    return measure_ratio <= schedule.delta && residual_sup <= residual_bound && z_bound <= schedule.kappa &&
           y_partial_max <= y_bound;
  }
};

/// Identity on the closure nodes of K, radial clamp to beta elsewhere.
inline SampledField clamp_extend(const SampledField& raw, double beta, const CellMask& K, double s = 0.0) {
  const GridDomain& d = raw.domain();
  if (K.size() != d.cell_count()) fail(ErrorKind::invalid_argument, "mask size does not match grid");
  if (!(beta > 0.0) || !(s >= 0.0)) fail(ErrorKind::invalid_argument, "clamp radius must be positive");
  const auto on_k = d.closure_nodes(K);
  const double limit = beta / (1.0 + s);
  std::vector<double> vals(raw.values().begin(), raw.values().end());
  const auto nc = static_cast<std::size_t>(raw.components());
  for (std::size_t i = 0; i < d.node_count(); ++i) {
    if (on_k[i]) {
      if (raw.magnitude(i) > limit) fail(ErrorKind::inner_accuracy_not_met, "inner accuracy not met");
      continue;
    }
    detail::radial_clamp(std::span<double>(vals.data() + i * nc, nc), beta);
  }
  return SampledField(d, raw.components(), std::move(vals));
}

namespace detail {

inline double sup_on_nodes(const SampledField& f, const std::vector<std::uint8_t>& nodes) {
  double s = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i]) s = std::max(s, f.magnitude(i));
  return s;
}

}  // namespace detail

inline IterationState initial_state(const SampledField& v, const GridDomain& omega) {
  IterationState st;
  st.v = v.on(omega);
  st.intersection.assign(omega.cell_count(), 0);
  for (std::size_t c = 0; c < omega.cell_count(); ++c) st.intersection[c] = omega.included(c) ? 1 : 0;
  return st;
}

/// Step n -> n + 1.
inline IterationState step(const IterationState& state, const GridDomain& omega, const Schedule& sc,
                           const RoughOptions& opt = {}) {
  const StepBudget b = step_budget(sc, state.n);
  RoughCertificate cert;
  try {
    cert = rough_approximate(state.v, omega, b.eps, b.eta, b.theta, opt);
  } catch (const Error& e) {
    throw Error(e.kind(), "step " + std::to_string(state.n) + ": " + e.what());
  }
  const int n = omega.dim();
  const auto nodes = omega.node_mask();
  std::vector<double> raw(state.v.values().begin(), state.v.values().end());
  const auto nc = static_cast<std::size_t>(n);
  for (std::size_t i = 0; i < omega.node_count(); ++i) {
    if (!nodes[i]) continue;
    const Point g = cert.phi.gradient(omega.node_position(i));
    for (std::size_t k = 0; k < nc; ++k) raw[i * nc + k] -= g[k];
  }
  const SampledField raw_field(omega, n, std::move(raw));

  IterationState next;
  next.n = state.n + 1;
  StepRecord rec;
  rec.budget = b;
  rec.pre_clamp_sup = detail::sup_on_nodes(raw_field, nodes);
  try {
    next.v = clamp_extend(raw_field, b.beta, cert.K, sc.s);
  } catch (const Error& e) {
    throw Error(e.kind(), "step " + std::to_string(state.n) + ": " + e.what());
  }
  next.K = state.K;
  next.K.push_back(cert.K);
  next.phis = state.phis;
  next.phis.push_back(cert.phi);
  next.intersection = mask_intersection(state.intersection, cert.K);

  rec.excluded_ratio = cert.eps_achieved;
  rec.tube_measure = cert.tube_measure;
  rec.eta_achieved = cert.eta_achieved;
  rec.phi_sup_bound = cert.theta_achieved;
  rec.phi_sup_sampled = cert.theta_sampled;
  rec.phi_grad_sampled = cert.grad_sampled;
  rec.phi_grad_bound = cert.phi.gradient_bound();
  rec.post_clamp_sup = detail::sup_on_nodes(next.v, nodes);
  rec.intersection_sup = detail::sup_on_nodes(next.v, omega.closure_nodes(next.intersection));
  rec.intersection_measure = measure(omega, next.intersection);
  rec.level = cert.level;
  rec.r = cert.r;
  rec.sigma = cert.sigma;
  rec.path = cert.path;
  next.manifest = state.manifest;
  next.manifest.push_back(rec);
  return next;
}

/// The full iteration with the final certificate.
inline FinalCertificate run(const SampledField& v, const GridDomain& omega, const Schedule& sc,
                            const RoughOptions& opt = {}) {
  sc.validate();
  if (omega.empty()) fail(ErrorKind::empty_domain, "empty domain");
  IterationState st = initial_state(v, omega);
  const auto nodes = omega.node_mask();
  const SampledField vin = v.on(omega);
  FinalCertificate fc;
  fc.schedule = sc;
  fc.v_norm = detail::sup_on_nodes(vin, nodes);
  fc.y_bound = fc.v_norm + 0.5 * sc.eta + sc.kappa;

  double y_partial = 0.0;
  while (st.n < sc.n_max) {
    st = step(st, omega, sc, opt);
    const auto& rec = st.manifest.back();
    y_partial += rec.phi_sup_sampled + rec.phi_grad_sampled;
    fc.y_partial_max = std::max(fc.y_partial_max, y_partial);
    if (rec.intersection_sup < sc.floor()) break;
  }

  fc.steps = st.n;
  fc.manifest = st.manifest;
  fc.phi.terms = st.phis;
  fc.A = mask_complement(omega, st.intersection);
  fc.measure_A = measure(omega, fc.A);
  // The tubes are not cells; their certified bounds count against A too.
  fc.tube_measure = 0.0;
  for (const auto& rec : fc.manifest) fc.tube_measure += rec.tube_measure;
  fc.measure_ratio = (fc.measure_A + fc.tube_measure) / omega.measure();
  fc.residual_bound = (1.0 + sc.s) * std::ldexp(sc.eta, -2 * fc.steps);

  const auto good = omega.closure_nodes(st.intersection);
  for (std::size_t i = 0; i < omega.node_count(); ++i) {
    if (!good[i]) continue;
    const Point g = fc.phi.gradient(omega.node_position(i));
    double s = 0.0;
    for (int k = 0; k < omega.dim(); ++k) s += (vin.at(i, k) - g[k]) * (vin.at(i, k) - g[k]);
    fc.residual_sup = std::max(fc.residual_sup, std::sqrt(s));
  }
  fc.z_bound = fc.phi.sup_bound();
  const auto nr = norms(fc.phi, omega, opt.norm_oversample);
  fc.z_sampled = nr.sup_norm;
  fc.y_sampled = nr.c1_norm;
  return fc;
}

}  // namespace lusin
