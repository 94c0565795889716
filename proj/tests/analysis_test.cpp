#include "paracon/analysis.hpp"
#include "paracon/problems.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace paracon {
namespace {

Point vec(std::initializer_list<double> values) {
  Point x(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double v : values) x(i++) = v;
  return x;
}

UnionOperator single(Paracontraction op) {
  const std::size_t n = op.dimension();
  return {std::make_shared<ExplicitFamily>(std::vector{std::move(op)}), SelectionFunction::constant_full(),
          ConstraintSet::whole_space(n)};
}

ExplicitFamily orthogonal_halfspaces() {
  Matrix e1(1, 2), e2(1, 2);
  e1 << 1.0, 0.0;
  e2 << 0.0, 1.0;
  return ExplicitFamily({Paracontraction::projection(ConstraintSet::halfspaces(e1, vec({0}))),
                         Paracontraction::projection(ConstraintSet::halfspaces(e2, vec({0})))});
}

DeltaOptions grid() {
  DeltaOptions options;
  options.sampling = DeltaSampling::Grid;
  return options;
}

TEST(EstimateDelta, HalvingOnDenseGrid) {
  // Inf over |x| in (2, 4] of |x|/2 is 1, approached from above.
  const ExplicitFamily halve({Paracontraction::strict_contraction(0.5, vec({0}))});
  const auto est = estimate_delta(halve, vec({0}), 1.0, 4.0, ConstraintSet::whole_space(1), 100000, 1, grid());
  ASSERT_FALSE(est.empty_region);
  EXPECT_GT(est.delta_hat, 1.0);
  EXPECT_LE(est.delta_hat, 1.00004);
  EXPECT_EQ(est.n_samples, 100000u);
  EXPECT_EQ(q_bound(4.0, est.delta_hat, IterationMode::Plain), 8u);
  EXPECT_EQ(q_bound(4.0, est.delta_hat, IterationMode::KrasnoselskiMann, 0.25), 32u);
}

TEST(EstimateDelta, OrthogonalHalfspacesMatchBruteForce) {
  // Oracle: same grid, closed-form projections.
  double oracle = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 600; ++i) {
    for (int j = 0; j <= 600; ++j) {
      const double x = -3.0 + 0.01 * i, y = -3.0 + 0.01 * j;
      if (std::hypot(x, y) > 3.0) continue;
      const double r = std::hypot(x, y);
      if (x > 0.5) oracle = std::min(oracle, r - std::abs(y));
      if (y > 0.5) oracle = std::min(oracle, r - std::abs(x));
    }
  }
  EXPECT_NEAR(oracle, 0.04376017743572769, 1e-12);
  const double infimum = 3.0 - std::sqrt(8.75);
  EXPECT_NEAR(infimum, 0.041960108450191935, 1e-15);

  const auto est = estimate_delta(orthogonal_halfspaces(), vec({0, 0}), 0.5, 3.0, ConstraintSet::whole_space(2),
                                  601 * 601, 1, grid());
  EXPECT_NEAR(est.delta_hat, oracle, 1e-9);
  EXPECT_GE(est.delta_hat, infimum);
}

TEST(EstimateDelta, EmptyRegion) {
  const ExplicitFamily halve({Paracontraction::strict_contraction(0.5, vec({0}))});
  const auto est = estimate_delta(halve, vec({0}), 3.0, 4.0, ConstraintSet::whole_space(1), 1000, 2);
  EXPECT_TRUE(est.empty_region);
  EXPECT_EQ(est.active_samples, 0u);
  EXPECT_TRUE(std::isinf(est.delta_hat));
}

TEST(EstimateDelta, RejectsNonCommonFixedPoint) {
  const ExplicitFamily two({Paracontraction::strict_contraction(0.5, vec({0})),
                            Paracontraction::strict_contraction(0.5, vec({1}))});
  EXPECT_THROW(estimate_delta(two, vec({0}), 0.1, 1.0, ConstraintSet::whole_space(1), 10, 1), std::invalid_argument);
}

TEST(EstimateDelta, DeterministicAndRefinesDownward) {
  const auto family = orthogonal_halfspaces();
  const auto c = ConstraintSet::whole_space(2);
  const auto a = estimate_delta(family, vec({0, 0}), 0.5, 3.0, c, 5000, 7);
  const auto b = estimate_delta(family, vec({0, 0}), 0.5, 3.0, c, 5000, 7);
  EXPECT_EQ(a.delta_hat, b.delta_hat);
  EXPECT_EQ(a.argmin_x, b.argmin_x);
  // The same seed visits a prefix of the larger sample, so the minimum can only drop.
  const auto more = estimate_delta(family, vec({0, 0}), 0.5, 3.0, c, 50000, 7);
  EXPECT_LE(more.delta_hat, a.delta_hat);
  EXPECT_GE(more.delta_hat, 3.0 - std::sqrt(8.75));
}

TEST(QBound, Examples) {
  EXPECT_EQ(q_bound(4.0, 1.0, IterationMode::Plain), 8u);
  EXPECT_EQ(q_bound(4.0, 1.0, IterationMode::KrasnoselskiMann, 0.25), 32u);
  EXPECT_EQ(q_bound(0.1, 10.0, IterationMode::Plain), 1u);
  EXPECT_EQ(q_bound(1.0, 0.3, IterationMode::Plain), 7u);
  EXPECT_THROW(q_bound(1.0, 0.0, IterationMode::Plain), std::invalid_argument);
  EXPECT_THROW(q_bound(-1.0, 1.0, IterationMode::Plain), std::invalid_argument);
  EXPECT_THROW(q_bound(1.0, 1.0, IterationMode::KrasnoselskiMann, 0.5), std::invalid_argument);
}

TEST(QBound, MonotoneInDeltaAndKappa) {
  std::uint64_t previous = std::numeric_limits<std::uint64_t>::max();
  for (double delta = 0.01; delta < 5.0; delta *= 1.3) {
    const auto q = q_bound(2.0, delta, IterationMode::Plain);
    EXPECT_LE(q, previous);
    EXPECT_GE(q_bound(2.0, delta, IterationMode::KrasnoselskiMann, 0.2), q);
    previous = q;
  }
}

TEST(Certify, HalvingCounts) {
  const auto toy = make_toy_1d(ToyKind::Halving);
  const auto run = run_plain(toy.op, vec({8}), IterationConfig{}, toy.z_star);
  const auto cert = certify_run(run, toy.op, toy.z_star, {1.0});
  ASSERT_EQ(cert.levels.size(), 1u);
  EXPECT_EQ(cert.levels[0].large_steps, 2u);
  EXPECT_EQ(*cert.levels[0].delta_run, 2.0);
  EXPECT_EQ(*cert.levels[0].run_exact_bound, 4.0);
  EXPECT_TRUE(cert.levels[0].identity_holds);
  EXPECT_EQ(cert.fejer_violations, 0u);
  EXPECT_TRUE(*cert.bounded);
  EXPECT_EQ(cert.radius, 8.0);
}

TEST(Certify, StationaryRunHasNoLargeSteps) {
  const auto toy = make_toy_1d(ToyKind::Halving);
  const auto run = run_plain(toy.op, vec({0}), IterationConfig{}, toy.z_star);
  const auto cert = certify_run(run, toy.op, toy.z_star, {1e-3, 1.0});
  for (const auto& level : cert.levels) {
    EXPECT_EQ(level.large_steps, 0u);
    EXPECT_FALSE(level.delta_run.has_value());
    EXPECT_TRUE(level.identity_holds);
  }
}

TEST(Certify, KmCountsAndAprioriColumn) {
  const auto to_zero = single(Paracontraction::scaling(0.0, vec({0})));
  IterationConfig cfg;
  cfg.mode = IterationMode::KrasnoselskiMann;
  const auto run = run_km(to_zero, vec({8}), cfg, vec({0}));
  CertifyOptions options;
  options.delta_estimates = {
      estimate_delta(to_zero.family(), vec({0}), 1.0, 8.0, to_zero.set(), 1000, 3)};
  const auto cert = certify_run(run, to_zero, vec({0}), {1.0}, options);
  EXPECT_EQ(cert.levels[0].large_steps, 2u);
  EXPECT_EQ(*cert.levels[0].delta_run, 2.0);
  ASSERT_TRUE(cert.levels[0].q_apriori.has_value());
  EXPECT_EQ(*cert.levels[0].q_apriori, q_bound(8.0, *cert.levels[0].delta_hat, IterationMode::KrasnoselskiMann, 0.25));
  EXPECT_NE(format_certificate(cert).find("kappa: 0.25"), std::string::npos);
}

TEST(Certify, RunExactIdentityOnRandomRuns) {
  for (std::uint64_t seed = 1; seed <= 15; ++seed) {
    Rng rng(seed);
    const Point p = sample_uniform_ball(Point::Zero(2), 1.0, rng);
    const auto inst = make_convex_feasibility("h", random_halfspaces_through(p, 3, seed),
                                              SelectionFunction::constant_full(), p, seed);
    IterationConfig cfg;
    cfg.mode = seed % 2 ? IterationMode::Plain : IterationMode::KrasnoselskiMann;
    cfg.lambda = LambdaSchedule::seeded_uniform(seed);
    cfg.policy = {PolicyKind::SeededRandom, seed};
    for (const auto& x0 : inst.x0_candidates) {
      const auto run = run_iteration(inst.op, x0, cfg, p);
      const auto cert = certify_run(run, inst.op, p, {1e-3, 1e-2, 0.1, 1.0});
      for (const auto& level : cert.levels) EXPECT_TRUE(level.identity_holds) << seed;
    }
  }
}

TEST(Stabilization, SingleOperatorStabilizesAtZero) {
  const auto toy = make_toy_1d(ToyKind::Halving);
  const auto run = run_plain(toy.op, vec({8}), IterationConfig{});
  const auto s = detect_stabilization(run, toy.op, 1e-8);
  EXPECT_TRUE(s.verified());
  EXPECT_EQ(s.t0, 0u);
  EXPECT_EQ(s.fixing, IndexSet({0}));
}

TEST(Stabilization, MaxIterIsNotStabilized) {
  const auto toy = make_toy_1d(ToyKind::Halving);
  IterationConfig cfg;
  cfg.max_iter = 3;
  const auto s = detect_stabilization(run_plain(toy.op, vec({8}), cfg), toy.op);
  EXPECT_FALSE(s.stabilized);
  EXPECT_FALSE(s.reason.empty());
}

TEST(Stabilization, SparseRunsSettleOnFixingBranches) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto inst = make_sparse_affine_feasibility(8, 4, 2, seed);
    IterationConfig cfg;
    cfg.max_iter = 100000;
    const auto run = run_plain(inst.op, inst.x0_candidates[3], cfg);
    ASSERT_EQ(run.termination, Termination::Converged);
    const auto s = detect_stabilization(run, inst.op, 1e-8);
    EXPECT_TRUE(s.verified()) << seed;
    EXPECT_FALSE(s.fixing.empty());
    EXPECT_LE(s.t0, run.trace.back().t);
  }
}

TEST(FormatCertificate, KeyValueAndTable) {
  const auto toy = make_toy_1d(ToyKind::Halving);
  const auto run = run_plain(toy.op, vec({8}), IterationConfig{}, toy.z_star);
  CertifyOptions options;
  options.run_id = "halving";
  const auto text = format_certificate(certify_run(run, toy.op, toy.z_star, {1.0}, options));
  EXPECT_EQ(text.rfind("run: halving\nmode: plain\n", 0), 0u);
  EXPECT_NE(text.find("\n1,2,2,4,true,,\n"), std::string::npos);
  EXPECT_EQ(format_index_set({0, 2}), "{0,2}");
  EXPECT_EQ(format_point(vec({1, -0.5})), "1;-0.5");
}

}  // namespace
}  // namespace paracon
