#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

#include "lusin/graph_diagnostics.hpp"

using namespace lusin;

namespace {

SampledField make_field(const GridDomain& d, auto&& fn) {
  std::vector<double> vals(d.node_count() * 2);
  for (std::size_t i = 0; i < d.node_count(); ++i) {
    const auto [a, b] = fn(d.node_position(i));
    vals[2 * i] = a;
    vals[2 * i + 1] = b;
  }
  return SampledField(d, 2, std::move(vals));
}

// Dense oracle: largest singular value of P1 - P2.
double oracle_distance(const PlaneSpec& a, const PlaneSpec& b) {
  const Eigen::MatrixXd D = a.projection() - b.projection();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(D.transpose() * D);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

PlaneSpec random_plane(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> g(0, 1);
  Eigen::MatrixXd b(2 * n, n);
  for (int i = 0; i < 2 * n; ++i)
    for (int j = 0; j < n; ++j) b(i, j) = g(rng);
  return PlaneSpec::from_basis(b);
}

}  // namespace

TEST(PlaneSpec, ProjectionInvariants) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 20; ++t) EXPECT_TRUE(random_plane(rng, 2).valid());
  EXPECT_TRUE(PlaneSpec::horizontal(3).valid());
  EXPECT_TRUE(PlaneSpec::tilted(2, 1, 0.3).valid());
}

TEST(PlaneDistance, Basics) {
  const auto h = PlaneSpec::horizontal(2), v = PlaneSpec::vertical(2);
  EXPECT_NEAR(plane_distance(h, h), 0.0, 1e-12);
  EXPECT_NEAR(plane_distance(h, v), 1.0, 1e-10);
  // Lines in R^2 at angle theta.
  for (double theta : {0.1, 0.7, 1.3}) {
    Eigen::MatrixXd a(2, 1), b(2, 1);
    a << 1, 0;
    b << std::cos(theta), std::sin(theta);
    EXPECT_NEAR(plane_distance(PlaneSpec::from_basis(a), PlaneSpec::from_basis(b)), std::sin(theta), 1e-10);
  }
}

TEST(PlaneDistance, MatchesDenseOracleAndIsAMetric) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 50; ++t) {
    const auto a = random_plane(rng, 2), b = random_plane(rng, 2), c = random_plane(rng, 2);
    const double ab = plane_distance(a, b), ba = plane_distance(b, a);
    EXPECT_NEAR(ab, oracle_distance(a, b), 1e-8);
    EXPECT_NEAR(ab, ba, 1e-9);
    EXPECT_LE(plane_distance(a, c), ab + plane_distance(b, c) + 1e-9);
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
  }
}

TEST(Transversality, ZeroFieldIsHorizontal) {
  auto d = GridDomain::box(2, 16, 1.0);
  EXPECT_DOUBLE_EQ(transversality_gap(SampledField::zeros(d, 2)), 1.0);
}

TEST(Transversality, LinearFieldAgainstDenseOracle) {
  // Jacobian L Id with L = 1: the gap is the distance from the tangent plane
  // span[I; L I] to the vertical, frozen here from the dense eigen-solver.
  const double L = 1.0;
  Eigen::MatrixXd J = L * Eigen::MatrixXd::Identity(2, 2);
  const double oracle = oracle_distance(PlaneSpec::graph_tangent(J), PlaneSpec::vertical(2));
  EXPECT_NEAR(oracle, 1.0 / std::sqrt(1.0 + L * L), 1e-12);
  auto d = GridDomain::box(2, 16, 1.0);
  auto v = make_field(d, [L](const Point& x) { return std::pair{L * x[0], L * x[1]}; });
  EXPECT_NEAR(transversality_gap(v), oracle, 1e-9);
}

TEST(Transversality, NonIncreasingUnderScaling) {
  auto d = GridDomain::box(2, 24, 1.0);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int trial = 0; trial < 5; ++trial) {
    const double a = u(rng), b = u(rng), c = u(rng), e = u(rng);
    double prev = 2.0;
    for (double t : {1.0, 2.0, 4.0}) {
      auto v = make_field(d, [&](const Point& x) {
        return std::pair{t * std::sin(a * x[0] + b * x[1]), t * std::cos(c * x[0] * x[1] + e)};
      });
      const double gap = transversality_gap(v);
      EXPECT_GT(gap, 0.0);
      EXPECT_LE(gap, prev + 1e-12);
      prev = gap;
    }
  }
}

TEST(GraphArea, ZeroLinearAndBounds) {
  auto d = GridDomain::box(2, 64, 1.0);
  EXPECT_EQ(graph_area(SampledField::zeros(d, 2)), d.measure());
  const double a = 0.8;
  auto v = make_field(d, [a](const Point& x) { return std::pair{a * x[0], 0.0}; });
  EXPECT_NEAR(graph_area(v), std::sqrt(1 + a * a) * d.measure(), 1e-12);
  auto w = make_field(d, [](const Point& x) { return std::pair{std::sin(5 * x[0]), x[0] * x[1]}; });
  const double area = graph_area(w);
  EXPECT_GE(area, d.measure());
  const double J = jacobian_sup(w);
  EXPECT_LE(area, std::sqrt(1 + J * J) * d.measure() + 1e-12);
}

TEST(ProjectedMeasure, HorizontalRecoversBase) {
  auto d = GridDomain::box(2, 32, 1.0);
  auto v = make_field(d, [](const Point& x) { return std::pair{0.2 * std::sin(6 * x[1]), 0.1 * x[0]}; });
  const double m = projected_measure(v, PlaneSpec::horizontal(2), 128);
  EXPECT_NEAR(m, 1.0, 1e-12);
  CellMask half(d.cell_count(), 0);
  for (std::size_t c = 0; c < d.cell_count(); ++c) half[c] = d.cell_coords(c)[1] < 16;
  SampledField vh(d.with_mask(half), 2, std::vector<double>(v.values().begin(), v.values().end()));
  EXPECT_NEAR(projected_measure(vh, PlaneSpec::horizontal(2), 128), 0.5, 1e-12);
}

TEST(ProjectedMeasure, TiltedZeroFieldGivesCosine) {
  auto d = GridDomain::box(2, 32, 1.0);
  const auto zero = SampledField::zeros(d, 2);
  const double cell = 1.0 / (256.0 * 256.0);
  for (double theta : {0.05, 0.2, 0.5}) {
    const double m = projected_measure(zero, PlaneSpec::tilted(2, 0, theta), 256);
    // One column of raster cells of slack along the shrunken axis.
    EXPECT_NEAR(m, std::cos(theta), 256 * cell + 1e-12) << theta;
  }
}

TEST(ProjectedMeasure, ContinuousAlongPlanePath) {
  auto d = GridDomain::box(2, 32, 1.0);
  auto v = make_field(d, [](const Point& x) { return std::pair{0.05 * x[0] * x[0], 0.03 * std::sin(3 * x[1])}; });
  const int res = 128;
  const double cell = 1.0 / (res * res);
  double prev = projected_measure(v, PlaneSpec::tilted(2, 0, 0.0), res);
  double worst = 0.0;
  for (int i = 1; i < 10; ++i) {
    const double m = projected_measure(v, PlaneSpec::tilted(2, 0, 1e-5 * i), res);
    worst = std::max(worst, std::abs(m - prev));
    prev = m;
  }
  EXPECT_LE(worst, 2 * cell);
}

TEST(ProjectedMeasure, RejectsPlaneTooFarFromHorizontal) {
  auto d = GridDomain::box(2, 8, 1.0);
  auto v = make_field(d, [](const Point& x) { return std::pair{x[0], x[1]}; });
  EXPECT_THROW(projected_measure(v, PlaneSpec::vertical(2), 32), Error);
}
