#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "lusin/config.hpp"
#include "lusin/driver.hpp"
#include "lusin/generators.hpp"
#include "lusin/report.hpp"

using namespace lusin;

namespace {

config::Config parse(const std::string& text) {
  std::istringstream is(text);
  return config::Config::parse(is);
}

}  // namespace

TEST(Config, SectionsCommentsAndOverrides) {
  const auto c = parse(
      "mode = rough   # trailing comment\n"
      "[field]\n"
      "generator = rotational_bump\n"
      "seed = 7\n"
      "[budget]\n"
      "eps = 0.2\n");
  EXPECT_EQ(c.str("mode"), "rough");
  EXPECT_EQ(c.str("field.generator"), "rotational_bump");
  EXPECT_EQ(c.unsigned64("field.seed"), 7u);
  EXPECT_EQ(c.real("budget.eps"), 0.2);
  EXPECT_EQ(c.real("budget.eta"), 0.05);  // default
  auto d = c;
  d.apply("budget.eps=0.3");
  EXPECT_EQ(d.real("budget.eps"), 0.3);
}

TEST(Config, MalformedInputIsAConfigError) {
  auto expect_config_error = [](const std::string& text) {
    try {
      parse(text);
      ADD_FAILURE() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::config_error) << text;
    }
  };
  expect_config_error("bogus = 1\n");
  expect_config_error("mode rough\n");
  expect_config_error("[field\n");
  EXPECT_THROW(parse("budget.eps = abc\n").real("budget.eps"), Error);
  EXPECT_THROW(parse("rough.sampled_limit = maybe\n").boolean("rough.sampled_limit"), Error);
}

TEST(RunConfigValidation, RequiredFieldsAndPositivity) {
  auto kind = [](const std::string& text) {
    try {
      driver::make_run_config(parse(text));
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::io_error;  // sentinel: no error
  };
  EXPECT_EQ(kind("field.seed = 1\n"), ErrorKind::config_error);                         // no mode
  EXPECT_EQ(kind("mode = rough\n"), ErrorKind::config_error);                           // no seed
  EXPECT_EQ(kind("mode = rough\nfield.seed = 1\nbudget.eps = 0\n"), ErrorKind::config_error);
  EXPECT_EQ(kind("mode = iterate\nfield.seed = 1\nschedule.kappa = -1\n"), ErrorKind::config_error);
  EXPECT_EQ(kind("mode = rough\nfield.seed = 1\nfield.generator = nope\n"), ErrorKind::config_error);
  EXPECT_EQ(kind("mode = rough\nfield.seed = 1\ngrid.h = 0.3\n"), ErrorKind::config_error);
  EXPECT_EQ(kind("mode = forms\nforms.cells = 20\n"), ErrorKind::config_error);
  EXPECT_EQ(kind("mode = rough\nfield.seed = 1\ngrid.cells = 32\n"), ErrorKind::io_error);
  const auto rc = driver::make_run_config(parse("mode = rough\nfield.seed = 1\ngrid.bbox = -1,1,0,2\ngrid.h = 0.25\n"));
  EXPECT_EQ(rc.grid.cells(0), 8);
  EXPECT_EQ(rc.grid.origin(0), -1.0);
}

TEST(Generators, GradientSineBumpMatchesPotential) {
  const auto d = GridDomain::box(2, 32, 1.0);
  gen::GeneratorSpec s;
  s.name = "gradient_sine_bump";
  s.amplitude = 1e-3;
  const auto v = gen::generate(d, s);
  Point c{};
  c[0] = c[1] = 0.5;
  const double step = 1e-6;
  for (std::size_t i = 0; i < d.node_count(); i += 37) {
    const Point x = d.node_position(i);
    for (int k = 0; k < 2; ++k) {
      Point a = x, b = x;
      a[k] -= step;
      b[k] += step;
      const double fd = (gen::sine_bump_potential(b, c, 1e-3, 0.35, 2, nullptr) -
                         gen::sine_bump_potential(a, c, 1e-3, 0.35, 2, nullptr)) /
                        (2 * step);
      EXPECT_NEAR(v.at(i, k), fd, 1e-9);
    }
  }
}

TEST(Generators, RandomTrigNeedsSeedAndIsDeterministic) {
  const auto d = GridDomain::box(2, 16, 1.0);
  gen::GeneratorSpec s;
  s.name = "random_trig";
  EXPECT_THROW(gen::generate(d, s), Error);
  s.has_seed = true;
  s.seed = 42;
  const auto a = gen::generate(d, s), b = gen::generate(d, s);
  EXPECT_EQ(fingerprint(a), fingerprint(b));
  s.seed = 43;
  EXPECT_NE(fingerprint(a), fingerprint(gen::generate(d, s)));
  s.name = "unknown";
  EXPECT_THROW(gen::generate(d, s), Error);
}

TEST(Report, RoundTripAndCompare) {
  report::MetricsReport m;
  m.add("mode", "rough");
  m.add("input_fingerprint", "00ff");
  m.add("achieved.eta", 0.1 + 0.2);
  m.add("wall_clock_seconds", 1.5);
  std::stringstream ss;
  m.write(ss);
  const auto back = report::MetricsReport::read(ss);
  EXPECT_EQ(back.entries(), m.entries());
  EXPECT_TRUE(report::compare(m, back).empty());

  auto perturbed = back;
  perturbed.set("achieved.eta", "0.31");
  perturbed.set("wall_clock_seconds", "99");
  const auto diffs = report::compare(m, perturbed);
  ASSERT_EQ(diffs.size(), 1u);
  EXPECT_EQ(diffs[0].key, "achieved.eta");
  report::Tolerances loose;
  loose.per_key["achieved.eta"] = 0.1;
  EXPECT_TRUE(report::compare(m, perturbed, loose).empty());

  auto other = back;
  other.set("input_fingerprint", "1234");
  EXPECT_THROW(report::compare(m, other), Error);
}

TEST(Driver, RoughZeroFieldWritesZeroPotential) {
  const auto rc = driver::make_run_config(parse("mode = rough\nfield.seed = 0\ngrid.cells = 32\n"));
  const auto a = driver::execute(rc);
  EXPECT_TRUE(a.passed);
  EXPECT_EQ(a.metrics.get("status"), "PASSED");
  EXPECT_EQ(a.metrics.get("active_simplices"), "0");
  std::istringstream pot(a.files.at("phi.pot"));
  EXPECT_TRUE(EvaluablePotential::read(pot).is_zero());
  for (const char* f : {"input.lgf", "K.mask", "phi.pot", "certificate.txt", "metrics.txt"}) EXPECT_TRUE(a.files.count(f));
}

TEST(Driver, IterateIsDeterministic) {
  const auto rc = driver::make_run_config(
      parse("mode = iterate\nfield.generator = random_trig\nfield.seed = 5\nfield.amplitude = 0.1\n"
            "grid.cells = 48\nschedule.n_max = 3\n"));
  const auto a = driver::execute(rc), b = driver::execute(rc);
  ASSERT_EQ(a.files.size(), b.files.size());
  for (const auto& [name, content] : a.files)
    if (name != "metrics.txt") {
      EXPECT_EQ(content, b.files.at(name)) << name;
    }
  EXPECT_TRUE(report::compare(a.metrics, b.metrics).empty());
}

TEST(Driver, DiagnoseZeroField) {
  const auto rc = driver::make_run_config(parse("mode = diagnose\nfield.seed = 0\ngrid.cells = 16\n"));
  const auto a = driver::execute(rc);
  EXPECT_EQ(a.metrics.get("graph_area"), "1");
  EXPECT_EQ(a.metrics.get("transversality_gap"), "1");
}
