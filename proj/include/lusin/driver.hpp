#pragma once

// Batch driver: validated run configuration, mode execution, and artifacts
// (dumps, certificate, metrics) collected in memory before anything is written.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "lusin/config.hpp"
#include "lusin/error.hpp"
#include "lusin/field_core.hpp"
#include "lusin/field_io.hpp"
#include "lusin/forms.hpp"
#include "lusin/generators.hpp"
#include "lusin/graph_diagnostics.hpp"
#include "lusin/pl_potential.hpp"
#include "lusin/report.hpp"
#include "lusin/scheme.hpp"

namespace lusin::driver {

enum class Mode { rough, iterate, forms, diagnose };

inline Mode parse_mode(const std::string& s) {
  if (s == "rough") return Mode::rough;
  if (s == "iterate") return Mode::iterate;
  if (s == "forms") return Mode::forms;
  if (s == "diagnose") return Mode::diagnose;
  fail(ErrorKind::config_error, "unknown mode '" + s + "'");
}

inline const char* mode_name(Mode m) {
  switch (m) {
    case Mode::rough: return "rough";
    case Mode::iterate: return "iterate";
    case Mode::forms: return "forms";
    case Mode::diagnose: return "diagnose";
  }
  return "?";
}

struct RunConfig {
  Mode mode = Mode::rough;
  std::string out_dir = "out";
  bool from_file = false;
  std::string path;
  gen::GeneratorSpec generator;
  GridDomain grid;
  double eps = 0.1, eta = 0.05, theta = 0.01;
  Schedule schedule;
  RoughOptions rough;
  std::string form = "dx1";
  double form_amplitude = 1.0;
  int form_cells = 128;
  double form_eps = 0.1;
  int resolution = 128;
  int tilt_axis = 0;
  double tilt_angle = 0.1;
};

namespace detail {

inline GridDomain grid_from(const config::Config& c) {
  const int n = c.integer("grid.dim");
  if (n < 2 || n > kMaxDim) fail(ErrorKind::config_error, "grid.dim must be in [2, 6]");
  std::vector<double> lo(static_cast<std::size_t>(n), 0.0), ext(static_cast<std::size_t>(n), 1.0);
  if (c.has("grid.bbox")) {
    const auto b = c.reals("grid.bbox");
    if (b.size() != 2 * static_cast<std::size_t>(n)) fail(ErrorKind::config_error, "grid.bbox needs lo,hi per axis");
    for (std::size_t k = 0; k < lo.size(); ++k) {
      lo[k] = b[2 * k];
      ext[k] = b[2 * k + 1] - b[2 * k];
      if (!(ext[k] > 0.0)) fail(ErrorKind::config_error, "grid.bbox has an empty axis");
    }
  }
  std::vector<int> cells(static_cast<std::size_t>(n));
  double h = 0.0;
  if (c.has("grid.h")) {
    h = c.real("grid.h");
    if (!(h > 0.0)) fail(ErrorKind::config_error, "grid.h must be positive");
    for (std::size_t k = 0; k < cells.size(); ++k) {
      const double m = ext[k] / h;
      cells[k] = static_cast<int>(std::lround(m));
      if (cells[k] < 1 || std::abs(m - cells[k]) > 1e-9 * m)
        fail(ErrorKind::config_error, "grid.h does not divide the bounding box");
    }
  } else {
    const auto list = c.reals("grid.cells");
    if (list.size() != 1 && list.size() != cells.size()) fail(ErrorKind::config_error, "grid.cells needs 1 or N entries");
    for (std::size_t k = 0; k < cells.size(); ++k) {
      const double m = list.size() == 1 ? list[0] : list[k];
      if (m < 1 || m != std::floor(m)) fail(ErrorKind::config_error, "grid.cells must be positive integers");
      cells[k] = static_cast<int>(m);
    }
    h = ext[0] / cells[0];
    for (std::size_t k = 1; k < cells.size(); ++k)
      if (std::abs(ext[k] / cells[k] - h) > 1e-12 * h) fail(ErrorKind::config_error, "grid spacing must be uniform");
  }
  return GridDomain(cells, h, lo);
}

inline void positive(double x, const char* key) {
  if (!(x > 0.0) || !std::isfinite(x)) fail(ErrorKind::config_error, std::string(key) + " must be positive");
}

}  // namespace detail

/// Validates every mode-relevant key; throws config_error on any problem.
inline RunConfig make_run_config(const config::Config& c) {
  RunConfig rc;
  if (!c.has("mode")) fail(ErrorKind::config_error, "mode is required");
  rc.mode = parse_mode(c.str("mode"));
  rc.out_dir = c.str("output.dir");
  if (rc.out_dir.empty()) fail(ErrorKind::config_error, "output.dir is empty");

  if (rc.mode != Mode::forms) {
    const std::string src = c.str("field.source");
    if (src == "file") {
      rc.from_file = true;
      rc.path = c.str("field.path");
      if (rc.path.empty()) fail(ErrorKind::config_error, "field.path is required for field.source = file");
    } else if (src == "generator") {
      auto& g = rc.generator;
      g.name = c.str("field.generator");
      const std::vector<std::string> known{"zero", "constant", "gradient_sine_bump", "rotational_bump", "random_trig"};
      if (std::find(known.begin(), known.end(), g.name) == known.end())
        fail(ErrorKind::config_error, "unknown generator '" + g.name + "'");
      if (!c.has("field.seed")) fail(ErrorKind::config_error, "field.seed is required for generated fields");
      g.seed = c.unsigned64("field.seed");
      g.has_seed = true;
      g.amplitude = c.real("field.amplitude");
      g.radius = c.real("field.radius");
      detail::positive(g.radius, "field.radius");
      g.modes = c.integer("field.modes");
      if (g.modes < 1) fail(ErrorKind::config_error, "field.modes must be >= 1");
      if (c.has("field.center")) g.center = c.reals("field.center");
      if (c.has("field.value")) g.value = c.reals("field.value");
      rc.grid = detail::grid_from(c);
      if (!g.center.empty() && g.center.size() != static_cast<std::size_t>(rc.grid.dim()))
        fail(ErrorKind::config_error, "field.center needs N entries");
      if (g.name == "constant" && g.value.size() != static_cast<std::size_t>(rc.grid.dim()))
        fail(ErrorKind::config_error, "field.value needs N entries");
    } else {
      fail(ErrorKind::config_error, "field.source must be generator or file");
    }
  }

  rc.eps = c.real("budget.eps");
  rc.eta = c.real("budget.eta");
  rc.theta = c.real("budget.theta");
  if (rc.mode == Mode::rough) {
    detail::positive(rc.eps, "budget.eps");
    detail::positive(rc.eta, "budget.eta");
    detail::positive(rc.theta, "budget.theta");
  }
  rc.schedule.delta = c.real("schedule.delta");
  rc.schedule.kappa = c.real("schedule.kappa");
  rc.schedule.eta = c.real("schedule.eta");
  rc.schedule.n_max = c.integer("schedule.n_max");
  rc.schedule.s = c.real("schedule.s");
  if (c.has("schedule.floor")) rc.schedule.residual_floor = c.real("schedule.floor");
  if (rc.mode == Mode::iterate || rc.mode == Mode::forms) {
    detail::positive(rc.schedule.delta, "schedule.delta");
    detail::positive(rc.schedule.kappa, "schedule.kappa");
    detail::positive(rc.schedule.eta, "schedule.eta");
    if (rc.schedule.n_max < 1) fail(ErrorKind::config_error, "schedule.n_max must be >= 1");
    if (!(rc.schedule.s >= 0.0)) fail(ErrorKind::config_error, "schedule.s must be >= 0");
  }
  rc.rough.max_level = c.integer("rough.max_level");
  rc.rough.norm_oversample = c.integer("rough.oversample");
  rc.rough.sigma = c.real("rough.sigma");
  rc.rough.sampled_limit = c.boolean("rough.sampled_limit");
  rc.rough.sampled_only = c.boolean("rough.sampled_only");
  rc.rough.truncation.repair_jump = c.real("rough.repair");
  if (rc.rough.max_level < 0 || rc.rough.norm_oversample < 1) fail(ErrorKind::config_error, "bad rough options");

  rc.form = c.str("forms.form");
  if (rc.form != "zero" && rc.form != "dx1" && rc.form != "dx2" && rc.form != "exact")
    fail(ErrorKind::config_error, "forms.form must be zero, dx1, dx2 or exact");
  rc.form_amplitude = c.real("forms.amplitude");
  rc.form_cells = c.integer("forms.cells");
  rc.form_eps = c.real("forms.eps");
  if (rc.mode == Mode::forms) {
    if (rc.form_cells < 16 || rc.form_cells % 8 != 0) fail(ErrorKind::config_error, "forms.cells must be a multiple of 8, >= 16");
    detail::positive(rc.form_eps, "forms.eps");
  }
  rc.resolution = c.integer("diagnose.resolution");
  rc.tilt_axis = c.integer("diagnose.axis");
  rc.tilt_angle = c.real("diagnose.angle");
  if (rc.mode == Mode::diagnose && rc.resolution < 1) fail(ErrorKind::config_error, "diagnose.resolution must be >= 1");
  return rc;
}

/// Output of one run, written only once complete.
struct Artifacts {
  std::map<std::string, std::string> files;  ///< name -> content
  report::MetricsReport metrics;
  bool passed = true;
};

namespace detail {

inline std::string dump_field(const SampledField& f, std::map<std::string, std::string> extra = {}) {
  std::ostringstream os;
  io::write_field(os, f, std::move(extra));
  return os.str();
}

inline std::string dump_mask(const GridDomain& d, const CellMask& m) {
  std::ostringstream os;
  io::write_mask(os, d, m);
  return os.str();
}

inline std::string dump_potential(const EvaluablePotential& p) {
  std::ostringstream os;
  p.write(os);
  return os.str();
}

/// Certificate text: the deterministic metrics in order.
inline std::string certificate(const report::MetricsReport& m) {
  std::ostringstream os;
  os << "LUSIN-CERTIFICATE 1\n";
  for (const auto& [k, v] : m.entries())
    if (!report::volatile_key(k)) os << k << " = " << v << '\n';
  return os.str();
}

inline std::uint64_t fingerprint_form(const forms::SampledForm& f) {
  std::uint64_t hash = 1469598103934665603ull;
  auto mix = [&](const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      hash ^= p[i];
      hash *= 1099511628211ull;
    }
  };
  mix(&f.grid.M, sizeof f.grid.M);
  mix(&f.k, sizeof f.k);
  mix(f.coeff.data(), f.coeff.size() * sizeof(double));
  return hash;
}

inline void header(report::MetricsReport& m, Mode mode, std::uint64_t fp) {
  m.add("mode", mode_name(mode));
  m.add("status", "PASSED");
  m.add("version", report::kVersion);
  m.add("input_fingerprint", report::hex64(fp));
}

inline void grid_metrics(report::MetricsReport& m, const GridDomain& d) {
  m.add("grid.dim", d.dim());
  m.add("grid.h", d.h());
  m.add("grid.cells", d.cell_count());
  m.add("grid.measure", d.measure());
}

}  // namespace detail

inline SampledField load_field(const RunConfig& rc) {
  if (!rc.from_file) return gen::generate(rc.grid, rc.generator);
  std::ifstream in(rc.path);
  if (!in) fail(ErrorKind::config_error, "cannot read field '" + rc.path + "'");
  auto f = io::read_field(in);
  if (!f.is_vector_field()) fail(ErrorKind::config_error, "input field must have N components");
  return f;
}

inline Artifacts run_rough(const RunConfig& rc, const SampledField& v) {
  Artifacts a;
  const GridDomain& d = v.domain();
  const auto cert = rough_approximate(v, d, rc.eps, rc.eta, rc.theta, rc.rough);
  auto& m = a.metrics;
  detail::header(m, rc.mode, fingerprint(v));
  detail::grid_metrics(m, d);
  m.add("budget.eps", rc.eps);
  m.add("budget.eta", rc.eta);
  m.add("budget.theta", rc.theta);
  m.add("achieved.eps", cert.eps_achieved);
  m.add("achieved.eta", cert.eta_achieved);
  m.add("achieved.theta", cert.theta_achieved);
  m.add("excluded_measure", cert.excluded_measure);
  m.add("tube_measure", cert.tube_measure);
  m.add("truncation_measure", cert.truncation_measure);
  m.add("lambda", cert.lambda);
  m.add("sigma", cert.sigma);
  m.add("oscillation", cert.oscillation);
  m.add("mesh_level", cert.level);
  m.add("tube_radius", cert.r);
  m.add("active_simplices", cert.phi.active_count());
  m.add("path", cert.path);
  m.add("norm.phi_sup_sampled", cert.theta_sampled);
  m.add("norm.grad_phi_sup_sampled", cert.grad_sampled);
  m.add("norm.v_sup", norms(v, d).sup_norm);
  a.passed = cert.valid();
  a.files["input.lgf"] = detail::dump_field(v);
  a.files["K.mask"] = detail::dump_mask(d, cert.K);
  a.files["phi.pot"] = detail::dump_potential(cert.phi);
  return a;
}

inline Artifacts run_iterate(const RunConfig& rc, const SampledField& v) {
  Artifacts a;
  const GridDomain& d = v.domain();
  const auto fc = run(v, d, rc.schedule, rc.rough);
  auto& m = a.metrics;
  detail::header(m, rc.mode, fingerprint(v));
  detail::grid_metrics(m, d);
  m.add("schedule.delta", rc.schedule.delta);
  m.add("schedule.kappa", rc.schedule.kappa);
  m.add("schedule.eta", rc.schedule.eta);
  m.add("schedule.n_max", rc.schedule.n_max);
  m.add("schedule.s", rc.schedule.s);
  m.add("steps", fc.steps);
  std::ostringstream table;
  table << "# n eps_n eta_n theta_n beta_n excluded_ratio tube_measure eta_achieved phi_Z_bound phi_Z_sampled "
           "phi_grad_sampled pre_clamp_sup post_clamp_sup intersection_sup level r path\n";
  for (const auto& r : fc.manifest) {
    const std::string p = "step." + std::to_string(r.budget.n) + ".";
    m.add(p + "eps_budget", r.budget.eps);
    m.add(p + "eta_budget", r.budget.eta);
    m.add(p + "theta_budget", r.budget.theta);
    m.add(p + "clamp_radius", r.budget.beta);
    m.add(p + "excluded_ratio", r.excluded_ratio);
    m.add(p + "tube_measure", r.tube_measure);
    m.add(p + "eta_achieved", r.eta_achieved);
    m.add(p + "phi_Z_bound", r.phi_sup_bound);
    m.add(p + "phi_Z_sampled", r.phi_sup_sampled);
    m.add(p + "phi_grad_sampled", r.phi_grad_sampled);
    m.add(p + "phi_grad_bound", r.phi_grad_bound);
    m.add(p + "v_pre_clamp", r.pre_clamp_sup);
    m.add(p + "v_X", r.post_clamp_sup);
    m.add(p + "v_on_intersection", r.intersection_sup);
    m.add(p + "intersection_measure", r.intersection_measure);
    m.add(p + "level", r.level);
    m.add(p + "path", r.path);
    table << r.budget.n << ' ' << io::format_double(r.budget.eps) << ' ' << io::format_double(r.budget.eta) << ' '
          << io::format_double(r.budget.theta) << ' ' << io::format_double(r.budget.beta) << ' '
          << io::format_double(r.excluded_ratio) << ' ' << io::format_double(r.tube_measure) << ' '
          << io::format_double(r.eta_achieved) << ' ' << io::format_double(r.phi_sup_bound) << ' '
          << io::format_double(r.phi_sup_sampled) << ' ' << io::format_double(r.phi_grad_sampled) << ' '
          << io::format_double(r.pre_clamp_sup) << ' ' << io::format_double(r.post_clamp_sup) << ' '
          << io::format_double(r.intersection_sup) << ' ' << r.level << ' ' << io::format_double(r.r) << ' '
          << r.path << '\n';
  }
  m.add("final.measure_A", fc.measure_A);
  m.add("final.tube_measure", fc.tube_measure);
  m.add("final.measure_ratio", fc.measure_ratio);
  m.add("final.residual_sup", fc.residual_sup);
  m.add("final.residual_bound", fc.residual_bound);
  m.add("final.phi_Z_bound", fc.z_bound);
  m.add("final.phi_Z_sampled", fc.z_sampled);
  m.add("final.phi_Y_sampled", fc.y_sampled);
  m.add("final.phi_Y_partial_max", fc.y_partial_max);
  m.add("final.phi_Y_bound", fc.y_bound);
  m.add("final.v_X", fc.v_norm);
  a.passed = fc.valid();
  a.files["input.lgf"] = detail::dump_field(v);
  a.files["A.mask"] = detail::dump_mask(d, fc.A);
  a.files["manifest.txt"] = table.str();
  for (std::size_t j = 0; j < fc.phi.terms.size(); ++j)
    a.files["phi_" + std::to_string(j + 1) + ".pot"] = detail::dump_potential(fc.phi.terms[j]);
  return a;
}

inline forms::SampledForm make_form(const RunConfig& rc) {
  const forms::TorusGrid g{rc.form_cells};
  auto f = forms::SampledForm::zeros(g, 1);
  for (std::size_t n = 0; n < g.node_count(); ++n) {
    const Point x = g.position(n);
    const double A = rc.form_amplitude;
    if (rc.form == "dx1") f.coeff[2 * n] = A;
    if (rc.form == "dx2") f.coeff[2 * n + 1] = A;
    if (rc.form == "exact") {
      // d of A / (2 pi) sin(2 pi x1) sin(2 pi x2)
      f.coeff[2 * n] = A * std::cos(2 * M_PI * x[0]) * std::sin(2 * M_PI * x[1]);
      f.coeff[2 * n + 1] = A * std::sin(2 * M_PI * x[0]) * std::cos(2 * M_PI * x[1]);
    }
  }
  return f;
}

inline Artifacts run_forms(const RunConfig& rc) {
  Artifacts a;
  const auto atlas = forms::ChartAtlas::torus4(rc.form_cells);
  const auto omega = make_form(rc);
  forms::NearlyExactOptions opt;
  opt.schedule = rc.schedule;
  opt.rough = rc.rough;
  const auto res = forms::nearly_exact(omega, atlas, rc.form_eps, opt);
  auto& m = a.metrics;
  detail::header(m, rc.mode, detail::fingerprint_form(omega));
  const int M = rc.form_cells;
  m.add("torus.cells", M);
  m.add("form", rc.form);
  m.add("forms.eps", rc.form_eps);
  m.add("eps_chart", res.eps_chart);
  m.add("volume_A", res.volume_A);
  m.add("residual_sup", res.residual_sup);
  m.add("residual_tolerance", res.tolerance);
  // Fundamental loops: rows (axis 0) and columns (axis 1) of nodes.
  int nonzero = 0, meeting = 0;
  for (int axis : {0, 1})
    for (int j = 0; j < M; ++j) {
      if (std::abs(forms::loop_integral(omega, axis, j)) <= 1e-9) continue;
      ++nonzero;
      bool meets = false;
      for (int i = 0; i < M && !meets; ++i)
        meets = axis == 0 ? forms::edge_meets_exceptional(res, atlas, i, j, 0)
                          : forms::edge_meets_exceptional(res, atlas, j, i, 1);
      meeting += meets;
    }
  m.add("loops.nonzero_period", nonzero);
  m.add("loops.meeting_A", meeting);
  for (std::size_t r = 0; r < res.runs.size(); ++r) {
    const std::string p = "run." + std::to_string(r) + ".";
    m.add(p + "measure_ratio", res.runs[r].measure_ratio);
    m.add(p + "residual_sup", res.runs[r].residual_sup);
    m.add(p + "steps", res.runs[r].steps);
  }
  a.passed = res.valid(rc.form_eps) && meeting == nonzero;

  // Torus dumps: nodes 0..M-1 per axis with spacing 1/M.
  const GridDomain nodes_dom(std::vector<int>{M - 1, M - 1}, 1.0 / M, std::vector<double>{0.0, 0.0});
  a.files["form.lgf"] =
      detail::dump_field(SampledField(nodes_dom, 2, omega.coeff), {{"indices", "1;2"}, {"periodic", "1"}});
  const GridDomain cells_dom(std::vector<int>{M, M}, 1.0 / M, std::vector<double>{0.0, 0.0});
  a.files["A.mask"] = detail::dump_mask(cells_dom, CellMask(res.A.begin(), res.A.end()));
  std::ostringstream manifest;
  manifest << "atlas torus4 M=" << M << '\n';
  const auto locals = forms::localize(omega, atlas);
  for (std::size_t i = 0; i < atlas.charts.size(); ++i) {
    const auto& c = atlas.charts[i];
    manifest << "chart " << i << " lo=" << c.lo[0] << ',' << c.lo[1] << " side=" << c.side
             << " core=" << io::format_double(c.core) << " support=" << io::format_double(c.support) << '\n';
    a.files["chart_" + std::to_string(i) + ".lgf"] =
        detail::dump_field(locals[i].coeff, {{"indices", "1;2"}, {"chart", std::to_string(i)}});
  }
  a.files["atlas.txt"] = manifest.str();
  for (std::size_t t = 0; t < res.gamma.terms.size(); ++t) {
    const auto& term = res.gamma.terms[t];
    for (std::size_t j = 0; j < term.phi.terms.size(); ++j)
      a.files["gamma_c" + std::to_string(term.chart) + "_l" + std::to_string(term.lambda) + "_" +
              std::to_string(j + 1) + ".pot"] = detail::dump_potential(term.phi.terms[j]);
  }
  return a;
}

inline Artifacts run_diagnose(const RunConfig& rc, const SampledField& v) {
  Artifacts a;
  auto& m = a.metrics;
  detail::header(m, rc.mode, fingerprint(v));
  detail::grid_metrics(m, v.domain());
  const int n = v.domain().dim();
  m.add("graph_area", graph_area(v));
  m.add("jacobian_sup", jacobian_sup(v));
  m.add("transversality_gap", transversality_gap(v));
  const auto horiz = PlaneSpec::horizontal(n);
  const auto tilt = PlaneSpec::tilted(n, rc.tilt_axis, rc.tilt_angle);
  m.add("plane_distance.tilted_horizontal", plane_distance(tilt, horiz));
  m.add("projected_measure.horizontal", projected_measure(v, horiz, rc.resolution));
  m.add("projected_measure.tilted", projected_measure(v, tilt, rc.resolution));
  return a;
}

inline Artifacts execute(const RunConfig& rc) {
  const auto t0 = std::chrono::steady_clock::now();
  Artifacts a;
  if (rc.mode == Mode::forms) {
    a = run_forms(rc);
  } else {
    const SampledField v = load_field(rc);
    if (rc.mode == Mode::rough) a = run_rough(rc, v);
    if (rc.mode == Mode::iterate) a = run_iterate(rc, v);
    if (rc.mode == Mode::diagnose) a = run_diagnose(rc, v);
  }
  if (!a.passed) a.metrics.set("status", "FAILED");
  a.files["certificate.txt"] = detail::certificate(a.metrics);
  a.metrics.add("wall_clock_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  std::ostringstream os;
  a.metrics.write(os);
  a.files["metrics.txt"] = os.str();
  return a;
}

inline void write_artifacts(const Artifacts& a, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::io_error, "cannot create '" + dir + "': " + ec.message());
  for (const auto& [name, content] : a.files) {
    std::ofstream out(std::filesystem::path(dir) / name, std::ios::binary);
    out << content;
    if (!out) fail(ErrorKind::io_error, "cannot write '" + name + "'");
  }
}

}  // namespace lusin::driver
