#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lusin/generators.hpp"
#include "lusin/scheme.hpp"

using namespace lusin;

namespace {

SampledField rotational(const GridDomain& d) {
  gen::GeneratorSpec s;
  s.name = "rotational_bump";
  return gen::generate(d, s);
}

}  // namespace

TEST(Schedule, StepBudgetsAreExactPowers) {
  Schedule sc;
  sc.delta = 0.1;
  sc.kappa = 0.01;
  sc.eta = 0.05;
  const auto b0 = step_budget(sc, 0);
  EXPECT_EQ(b0.eps, 0.05);
  EXPECT_EQ(b0.eta, 0.05);
  EXPECT_EQ(b0.theta, 0.005);
  EXPECT_EQ(b0.beta, 0.05);
  const auto b3 = step_budget(sc, 3);
  EXPECT_EQ(b3.eps, 0.1 / 16);
  EXPECT_EQ(b3.eta, 0.05 / 4096);
  EXPECT_EQ(b3.theta, 0.01 / 16);
  EXPECT_EQ(b3.beta, 0.05 / 512);
  sc.s = 0.5;
  EXPECT_EQ(step_budget(sc, 1).beta, 1.5 * 0.05 / 8);
  sc.kappa = 0.0;
  EXPECT_THROW(sc.validate(), Error);
}

TEST(ClampExtend, Examples) {
  const auto d = GridDomain::box(2, 4, 1.0);
  CellMask K(d.cell_count(), 0);
  K[0] = 1;
  const double beta = 0.1;
  std::vector<double> small(d.node_count() * 2, 0.01);
  const SampledField a(d, 2, small);
  const auto ca = clamp_extend(a, beta, K);
  EXPECT_TRUE(std::equal(ca.values().begin(), ca.values().end(), a.values().begin()));

  std::vector<double> big(d.node_count() * 2, 0.0);
  const std::size_t far = d.node_index({4, 4});
  big[2 * far] = 10 * beta;
  const auto cb = clamp_extend(SampledField(d, 2, big), beta, K);
  EXPECT_DOUBLE_EQ(cb.at(far, 0), beta);
  EXPECT_EQ(cb.at(far, 1), 0.0);

  // Violating the on-K precondition.
  std::vector<double> bad(d.node_count() * 2, 0.0);
  bad[0] = 2 * beta;
  EXPECT_THROW(clamp_extend(SampledField(d, 2, bad), beta, K), Error);
  // With slack s the on-K limit is beta / (1 + s).
  bad[0] = 0.9 * beta;
  EXPECT_THROW(clamp_extend(SampledField(d, 2, bad), beta, K, 0.5), Error);
  EXPECT_NO_THROW(clamp_extend(SampledField(d, 2, bad), beta, K, 0.0));
}

TEST(ClampExtend, OnKBitwisePreservedOffKBounded) {
  const auto d = GridDomain::box(2, 16, 1.0);
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-1, 1);
  CellMask K(d.cell_count(), 0);
  for (std::size_t c = 0; c < d.cell_count(); ++c) K[c] = (rng() % 3) == 0;
  const auto onK = d.closure_nodes(K);
  const double beta = 0.5;
  std::vector<double> vals(d.node_count() * 2);
  for (std::size_t i = 0; i < d.node_count(); ++i) {
    const double scale = onK[i] ? 0.3 : 5.0;
    vals[2 * i] = scale * u(rng);
    vals[2 * i + 1] = scale * u(rng);
  }
  const SampledField raw(d, 2, vals);
  const auto out = clamp_extend(raw, beta, K);
  for (std::size_t i = 0; i < d.node_count(); ++i) {
    if (onK[i]) {
      EXPECT_EQ(out.at(i, 0), raw.at(i, 0));
      EXPECT_EQ(out.at(i, 1), raw.at(i, 1));
    } else {
      EXPECT_LE(out.magnitude(i), beta);
    }
  }
}

TEST(Run, ZeroFieldGivesEmptyExceptionalSet) {
  const auto d = GridDomain::box(2, 32, 1.0);
  const auto fc = run(SampledField::zeros(d, 2), d, Schedule{});
  EXPECT_TRUE(fc.valid());
  EXPECT_EQ(fc.measure_A, 0.0);
  EXPECT_EQ(fc.residual_sup, 0.0);
  EXPECT_EQ(fc.z_sampled, 0.0);
  for (const auto& phi : fc.phi.terms) EXPECT_TRUE(phi.is_zero());
  // The residual is zero after the first step, below the floor.
  EXPECT_EQ(fc.steps, 1);
}

TEST(Run, RotationalBumpCertificateAndTelescoping) {
  const auto d = GridDomain::box(2, 128, 1.0);
  const auto v = rotational(d);
  Schedule sc;
  sc.n_max = 4;
  const auto fc = run(v, d, sc);
  ASSERT_TRUE(fc.valid()) << fc.measure_ratio << " " << fc.residual_sup << " " << fc.y_partial_max;
  EXPECT_EQ(fc.steps, 4);
  double eps_sum = 0.0, z_sum = 0.0;
  CellMask inter(d.cell_count(), 1);
  for (std::size_t j = 0; j < fc.manifest.size(); ++j) {
    const auto& rec = fc.manifest[j];
    EXPECT_EQ(rec.budget.n, static_cast<int>(j));
    EXPECT_LE(rec.excluded_ratio, rec.budget.eps);
    EXPECT_LE(rec.eta_achieved, rec.budget.eta);
    EXPECT_LE(rec.phi_sup_bound, rec.budget.theta);
    EXPECT_LE(rec.post_clamp_sup, rec.budget.beta);
    // Restriction decay with j = n + 1 steps taken.
    EXPECT_LE(rec.intersection_sup, std::ldexp(sc.eta, -2 * static_cast<int>(j + 1)));
    eps_sum += rec.excluded_ratio;
    z_sum += rec.phi_sup_bound;
  }
  EXPECT_LE(eps_sum, sc.delta);
  EXPECT_LE(z_sum, sc.kappa);
  EXPECT_LE(fc.z_sampled, fc.z_bound);
  EXPECT_LE(fc.measure_ratio, eps_sum + 1e-15);
  // A is exactly the complement of the closed cell intersection.
  EXPECT_NEAR(fc.measure_A + fc.manifest.back().intersection_measure, d.measure(), 1e-12);
  // The rotational field is not a gradient, so A must be nonempty.
  EXPECT_GT(fc.measure_A + fc.tube_measure, 0.0);
}

TEST(Run, ResidualBoundMonotoneInSteps) {
  const auto d = GridDomain::box(2, 64, 1.0);
  const auto v = rotational(d);
  double prev_bound = 1e9, prev_sup = 1e9;
  for (int n_max : {2, 3, 4}) {
    Schedule sc;
    sc.n_max = n_max;
    const auto fc = run(v, d, sc);
    EXPECT_LE(fc.residual_sup, fc.residual_bound) << n_max;
    EXPECT_LE(fc.residual_bound, prev_bound);
    EXPECT_LE(fc.residual_sup, prev_sup);
    prev_bound = fc.residual_bound;
    prev_sup = fc.residual_sup;
  }
}

TEST(Run, SingleStepOnlyGuaranteesEta) {
  // One step certifies |v - grad phi| <= eta on K_1; the quarter bound is
  // not implied, and the certificate says so instead of hiding it.
  const auto d = GridDomain::box(2, 64, 1.0);
  Schedule sc;
  sc.n_max = 1;
  const auto fc = run(rotational(d), d, sc);
  EXPECT_LE(fc.residual_sup, sc.eta);
  EXPECT_EQ(fc.valid(), fc.residual_sup <= fc.residual_bound);
}
