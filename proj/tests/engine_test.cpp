#include "paracon/engine.hpp"
#include "paracon/problems.hpp"

#include <gtest/gtest.h>

#include <sstream>

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

IterationConfig km(LambdaSchedule schedule, double kappa = 0.25) {
  IterationConfig cfg;
  cfg.mode = IterationMode::KrasnoselskiMann;
  cfg.kappa = kappa;
  cfg.lambda = std::move(schedule);
  return cfg;
}

TEST(RunPlain, HalvingTrace) {
  const auto toy = make_toy_1d(ToyKind::Halving);
  IterationConfig cfg;
  cfg.tol_residual = 1e-9;
  const auto run = run_plain(toy.op, toy.x0_candidates.front(), cfg);
  EXPECT_EQ(run.termination, Termination::Converged);
  ASSERT_GT(run.trace.size(), 5u);
  double expected = 8.0;
  for (std::size_t t = 0; t + 1 < run.trace.size(); ++t) {
    EXPECT_EQ(run.trace[t].t, t);
    EXPECT_EQ(run.trace[t].x(0), expected);
    EXPECT_EQ(*run.trace[t].residual, expected / 2);
    expected /= 2;
  }
  EXPECT_FALSE(run.trace.back().has_step());
  EXPECT_LE(*run.final_residual(), 1e-9);
}

TEST(RunPlain, StrongFixedPointIsStationary) {
  const auto toy = make_toy_1d(ToyKind::Halving);
  const auto run = run_plain(toy.op, vec({0}), IterationConfig{});
  EXPECT_EQ(run.termination, Termination::Converged);
  EXPECT_EQ(run.steps(), 1u);
  EXPECT_EQ(*run.trace[0].residual, 0.0);
  EXPECT_EQ(run.trace[0].t, 0u);
}

TEST(RunPlain, SparseFeasibilityFromPerturbedStart) {
  const auto inst = make_sparse_affine_feasibility(6, 3, 2, 1);
  const auto& meta = *inst.sparse;
  IterationConfig cfg;
  cfg.max_iter = 100000;
  for (std::size_t k = 1; k < inst.x0_candidates.size(); ++k) {
    const auto run = run_plain(inst.op, inst.x0_candidates[k], cfg, inst.z_star);
    ASSERT_EQ(run.termination, Termination::Converged);
    // Oracle: check the constraints directly.
    const Point& x = run.final_point();
    EXPECT_LE((meta.a * x - meta.b).norm(), 1e-6);
    EXPECT_LE((x.array().abs() > 1e-8).count(), 2);
  }
}

TEST(RunPlain, MaxIterAndPreconditions) {
  const auto toy = make_toy_1d(ToyKind::Halving);
  IterationConfig cfg;
  cfg.max_iter = 5;
  const auto run = run_plain(toy.op, vec({8}), cfg);
  EXPECT_EQ(run.termination, Termination::MaxIter);
  EXPECT_EQ(run.steps(), 5u);

  const UnionOperator boxed(std::make_shared<ExplicitFamily>(std::vector{Paracontraction::identity(1)}),
                            SelectionFunction::constant_full(), ConstraintSet::box(vec({0}), vec({1})));
  EXPECT_THROW(run_plain(boxed, vec({2}), IterationConfig{}), PreconditionError);
  EXPECT_THROW(run_km(toy.op, vec({1}), IterationConfig{}), PreconditionError);
  EXPECT_THROW(run_plain(toy.op, vec({1, 2}), IterationConfig{}), DimensionError);
}

TEST(RunPlain, NonFiniteIterateCarriesPrefix) {
  const auto blow_up = single(Paracontraction::scaling(1e300, vec({0})));
  try {
    (void)run_plain(blow_up, vec({1e10}), IterationConfig{});
    FAIL() << "expected IterationError";
  } catch (const IterationError& e) {
    EXPECT_EQ(e.partial().termination, Termination::Error);
    ASSERT_FALSE(e.partial().trace.empty());
    EXPECT_EQ(e.partial().trace.front().x, vec({1e10}));
  }
}

TEST(RunKm, ExamplesFromRelaxation) {
  const auto to_zero = single(Paracontraction::scaling(0.0, vec({0})));
  auto run = run_km(to_zero, vec({8}), km(LambdaSchedule::constant(0.5)));
  double expected = 8.0;
  for (std::size_t t = 0; t < 6; ++t, expected /= 2) EXPECT_EQ(run.trace[t].x(0), expected);
  EXPECT_EQ(*run.trace[0].lambda, 0.5);

  const auto halve = single(Paracontraction::strict_contraction(0.5, vec({0})));
  run = run_km(halve, vec({8}), km(LambdaSchedule::constant(0.5)));
  expected = 8.0;
  for (std::size_t t = 0; t < 6; ++t, expected *= 0.75) EXPECT_EQ(run.trace[t].x(0), expected);

  run = run_km(halve, vec({0}), km(LambdaSchedule::seeded_uniform(3)));
  EXPECT_EQ(run.steps(), 1u);
  EXPECT_EQ(*run.trace[0].residual, 0.0);
}

TEST(RunKm, RejectsBadRelaxation) {
  const auto halve = single(Paracontraction::strict_contraction(0.5, vec({0})));
  EXPECT_THROW(run_km(halve, vec({1}), km(LambdaSchedule::constant(0.5), 0.6)), PreconditionError);
  EXPECT_THROW(run_km(halve, vec({1}), km(LambdaSchedule::constant(0.25), 0.25)), PreconditionError);
  EXPECT_THROW(run_km(halve, vec({1}), km(LambdaSchedule::periodic({0.3, 0.9}), 0.2)), PreconditionError);
  EXPECT_THROW(run_km(halve, vec({1}), km(LambdaSchedule::periodic({}), 0.2)), PreconditionError);
}

TEST(LambdaGenerator, SeededUniformStaysInside) {
  for (double kappa : {0.01, 0.25, 0.49}) {
    LambdaGenerator gen(LambdaSchedule::seeded_uniform(5), kappa);
    for (int k = 0; k < 10000; ++k) {
      const double lambda = gen.next();
      ASSERT_GT(lambda, kappa);
      ASSERT_LT(lambda, 1.0 - kappa);
    }
  }
  LambdaGenerator periodic(LambdaSchedule::periodic({0.3, 0.6}), 0.2);
  EXPECT_EQ(periodic.next(), 0.3);
  EXPECT_EQ(periodic.next(), 0.6);
  EXPECT_EQ(periodic.next(), 0.3);
}

TEST(ResidualIdentity, HoldsAndDetectsCorruption) {
  const auto halve = single(Paracontraction::strict_contraction(0.5, vec({0})));
  auto run = run_km(halve, vec({8}), km(LambdaSchedule::constant(0.5)));
  auto report = residual_identity_check(run, halve);
  EXPECT_TRUE(report.passed);
  EXPECT_EQ(report.checked, run.steps());
  EXPECT_LE(report.max_error, 1e-15);

  run.trace[4].x(0) += 1e-3;
  report = residual_identity_check(run, halve);
  EXPECT_FALSE(report.passed);
  EXPECT_EQ(*report.first_failure, 3u);
}

TEST(ResidualIdentity, SeededUniformOnTwoProjections) {
  const auto sets = random_halfspaces_through(vec({0.5, -0.5}), 2, 12);
  const auto inst = make_convex_feasibility("two", sets, SelectionFunction::constant_full(), vec({0.5, -0.5}), 12);
  auto cfg = km(LambdaSchedule::seeded_uniform(77), 0.1);
  cfg.policy = {PolicyKind::SeededRandom, 78};
  for (const auto& x0 : inst.x0_candidates) {
    const auto run = run_km(inst.op, x0, cfg);
    const auto report = residual_identity_check(run, inst.op);
    EXPECT_TRUE(report.passed) << report.max_error;
    // Oracle: recompute each step from scratch.
    for (std::size_t t = 0; t + 1 < run.trace.size(); ++t) {
      const auto& rec = run.trace[t];
      const Point tx = inst.op.family().at(*rec.active_index).evaluate(rec.x);
      const Point expected = (1.0 - *rec.lambda) * rec.x + *rec.lambda * tx;
      ASSERT_EQ(expected, run.trace[t + 1].x);
    }
  }
}

TEST(Invariants, FejerAndBoundednessOnConvexInstances) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    const Point p = sample_uniform_ball(Point::Zero(3), 2.0, rng);
    const auto inst = make_convex_feasibility("halfspaces", random_halfspaces_through(p, 4, seed),
                                              SelectionFunction::constant_full(), p, seed);
    for (auto mode : {IterationMode::Plain, IterationMode::KrasnoselskiMann}) {
      IterationConfig cfg = km(LambdaSchedule::seeded_uniform(seed), 0.2);
      cfg.mode = mode;
      cfg.policy = {PolicyKind::SeededRandom, seed};
      for (const auto& x0 : inst.x0_candidates) {
        const auto run = run_iteration(inst.op, x0, cfg, inst.z_star);
        const double m = std::max(x0.norm(), p.norm());
        for (std::size_t t = 0; t + 1 < run.trace.size(); ++t) {
          EXPECT_LE((run.trace[t + 1].x - p).norm(), (run.trace[t].x - p).norm() + 1e-10);
          EXPECT_LE(run.trace[t].x.norm(), 3 * m + 1e-8);
        }
      }
    }
  }
}

TEST(Determinism, IdenticalConfigIdenticalTrace) {
  const auto inst = make_sparse_affine_feasibility(8, 4, 2, 3);
  IterationConfig cfg = km(LambdaSchedule::seeded_uniform(9), 0.2);
  cfg.policy = {PolicyKind::SeededRandom, 10};
  std::ostringstream a, b;
  write_trace_csv(a, run_km(inst.op, inst.x0_candidates[2], cfg, inst.z_star).trace);
  write_trace_csv(b, run_km(inst.op, inst.x0_candidates[2], cfg, inst.z_star).trace);
  EXPECT_EQ(a.str(), b.str());
}

TEST(TraceCsv, RoundTripIsBitExact) {
  const auto inst = make_sparse_affine_feasibility(6, 3, 2, 5);
  const auto run = run_km(inst.op, inst.x0_candidates[3], km(LambdaSchedule::seeded_uniform(4)), inst.z_star);
  std::stringstream out;
  write_trace_csv(out, run.trace);
  const auto back = read_trace_csv(out);
  ASSERT_EQ(back.size(), run.trace.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].t, run.trace[i].t);
    EXPECT_EQ(back[i].x, run.trace[i].x);
    EXPECT_EQ(back[i].active_index, run.trace[i].active_index);
    EXPECT_EQ(back[i].residual, run.trace[i].residual);
    EXPECT_EQ(back[i].lambda, run.trace[i].lambda);
    EXPECT_EQ(back[i].dist_to_zstar, run.trace[i].dist_to_zstar);
  }
  EXPECT_EQ(classify_trace(back, run.config), run.termination);
}

TEST(TraceCsv, HeaderAndErrors) {
  std::stringstream out;
  write_trace_csv(out, {});
  EXPECT_EQ(out.str(), std::string(kTraceHeader) + "\n");
  std::istringstream bad_header("t,x\n");
  EXPECT_THROW(read_trace_csv(bad_header), std::invalid_argument);
  std::istringstream bad_row(std::string(kTraceHeader) + "\n0,1;x,0,1,,\n");
  EXPECT_THROW(read_trace_csv(bad_row), std::invalid_argument);
}

TEST(FormatDouble, ShortestRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0, 123456789.125}) EXPECT_EQ(parse_double(format_double(v)), v);
  EXPECT_EQ(format_double(0.1), "0.1");
}

}  // namespace
}  // namespace paracon
