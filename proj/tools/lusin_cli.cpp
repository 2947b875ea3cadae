// lusin: batch driver for rough certificates, the gradient iteration,
// nearly exact forms on the torus, graph diagnostics, and report comparison.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "lusin/config.hpp"
#include "lusin/driver.hpp"
#include "lusin/report.hpp"

namespace {

enum Exit { ok = 0, other = 1, config_error = 2, budget_failure = 3, grid_too_coarse = 4, mismatch = 5, diff = 6 };

int exit_code(lusin::ErrorKind k) {
  using lusin::ErrorKind;
  switch (k) {
    case ErrorKind::config_error:
      return config_error;
    case ErrorKind::budget_failure:
    case ErrorKind::inner_accuracy_not_met:
    case ErrorKind::oscillation_unmet:
      return budget_failure;
    case ErrorKind::grid_too_coarse:
    case ErrorKind::refine_ambient_grid:
    case ErrorKind::kernel_under_resolved:
    case ErrorKind::sigma_too_large:
      return grid_too_coarse;
    case ErrorKind::fingerprint_mismatch:
      return mismatch;
    default:
      return other;
  }
}

struct RunFlags {
  std::string config;
  std::vector<std::string> sets;
  std::string out, generator, seed, cells, eps, eta, theta, delta, kappa, n_max, slack;
};

void add_run_flags(CLI::App* app, RunFlags& f) {
  app->add_option("--config", f.config, "configuration file (key = value)");
  app->add_option("--set", f.sets, "override, key=value (repeatable)");
  app->add_option("--out", f.out, "output directory (output.dir)");
  app->add_option("--generator", f.generator, "field.generator");
  app->add_option("--seed", f.seed, "field.seed");
  app->add_option("--cells", f.cells, "grid.cells");
  app->add_option("--eps", f.eps, "budget.eps");
  app->add_option("--eta", f.eta, "budget.eta");
  app->add_option("--theta", f.theta, "budget.theta");
  app->add_option("--delta", f.delta, "schedule.delta");
  app->add_option("--kappa", f.kappa, "schedule.kappa");
  app->add_option("--n-max", f.n_max, "schedule.n_max");
  app->add_option("--slack", f.slack, "schedule.s");
}

int run_mode(const std::string& mode, const RunFlags& f) {
  lusin::config::Config cfg;
  if (!f.config.empty()) cfg = lusin::config::Config::load(f.config);
  cfg.set("mode", mode);
  const std::pair<const char*, const std::string*> mirrors[] = {
      {"output.dir", &f.out},        {"field.generator", &f.generator}, {"field.seed", &f.seed},
      {"grid.cells", &f.cells},      {"budget.eps", &f.eps},            {"budget.eta", &f.eta},
      {"budget.theta", &f.theta},    {"schedule.delta", &f.delta},      {"schedule.kappa", &f.kappa},
      {"schedule.n_max", &f.n_max},  {"schedule.s", &f.slack}};
  for (const auto& [key, val] : mirrors)
    if (!val->empty()) cfg.set(key, *val);
  for (const auto& s : f.sets) cfg.apply(s);
  const auto rc = lusin::driver::make_run_config(cfg);
  const auto art = lusin::driver::execute(rc);
  lusin::driver::write_artifacts(art, rc.out_dir);
  const std::string status = art.metrics.get("status");
  std::cout << mode << ": " << status << " (" << art.files.size() << " files in " << rc.out_dir << ")\n";
  return art.passed ? ok : budget_failure;
}

int run_compare(const std::string& a, const std::string& b, double tol, const std::vector<std::string>& per_key) {
  auto load = [](const std::string& p) {
    std::ifstream in(p);
    if (!in) lusin::fail(lusin::ErrorKind::config_error, "cannot read report '" + p + "'");
    return lusin::report::MetricsReport::read(in);
  };
  lusin::report::Tolerances t;
  t.default_tol = tol;
  for (const auto& kv : per_key) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) lusin::fail(lusin::ErrorKind::config_error, "--tol-key needs key=value");
    try {
      t.per_key[kv.substr(0, eq)] = lusin::io::parse_double(kv.substr(eq + 1));
    } catch (const lusin::Error&) {
      lusin::fail(lusin::ErrorKind::config_error, "--tol-key needs a number");
    }
  }
  const auto diffs = lusin::report::compare(load(a), load(b), t);
  for (const auto& d : diffs) std::cout << d.key << ": " << d.a << " vs " << d.b << " (" << d.reason << ")\n";
  std::cout << (diffs.empty() ? "no differences\n" : std::to_string(diffs.size()) + " differences\n");
  return diffs.empty() ? ok : diff;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constructive Lusin-type approximation of vector fields by gradients"};
  app.require_subcommand(1);
  RunFlags flags[4];
  const char* modes[4] = {"rough", "iterate", "forms", "diagnose"};
  const char* about[4] = {"one rough certificate (phi, K) for a field", "the residual-correction iteration",
                          "nearly exact 1-form on the flat torus", "graph and projection diagnostics"};
  CLI::App* subs[4];
  for (int i = 0; i < 4; ++i) {
    subs[i] = app.add_subcommand(modes[i], about[i]);
    add_run_flags(subs[i], flags[i]);
  }
  std::string rep_a, rep_b;
  double tol = 1e-12;
  std::vector<std::string> tol_keys;
  auto* cmp = app.add_subcommand("compare", "compare two metrics reports");
  cmp->add_option("first", rep_a, "metrics report")->required();
  cmp->add_option("second", rep_b, "metrics report")->required();
  cmp->add_option("--tol", tol, "default relative tolerance");
  cmp->add_option("--tol-key", tol_keys, "per-key tolerance, key=value (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : config_error;
  }
  try {
    for (int i = 0; i < 4; ++i)
      if (subs[i]->parsed()) return run_mode(modes[i], flags[i]);
    return run_compare(rep_a, rep_b, tol, tol_keys);
  } catch (const lusin::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return other;
  }
}
