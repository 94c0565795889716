#include "paracon/cli/commands.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

namespace paracon::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("paracon-cli-" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_config(const json& doc, const std::string& name = "config.json") {
    const fs::path path = dir_ / name;
    std::ofstream(path) << doc.dump(2);
    return path;
  }

  CommandOptions options(const json& doc, const std::string& out = "out") {
    CommandOptions o;
    o.config = write_config(doc);
    o.out = dir_ / out;
    return o;
  }

  static std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

json halving() { return {{"problem", {{"builtin", "halving"}}}}; }

TEST_F(CliTest, RunHalvingConverges) {
  EXPECT_EQ(cmd_run(options(halving()), out_, err_), kExitOk) << err_.str();
  EXPECT_NE(out_.str().find("halving-x0: converged"), std::string::npos);
  const auto trace_text = slurp(dir_ / "out" / "halving-x0.trace.csv");
  std::istringstream in(trace_text);
  const auto trace = read_trace_csv(in);
  ASSERT_GT(trace.size(), 3u);
  EXPECT_EQ(trace[0].x(0), 8.0);
  EXPECT_EQ(*trace[1].residual, 2.0);
  EXPECT_TRUE(fs::exists(dir_ / "out" / "halving-x0.certificate.txt"));
  const auto cert = json::parse(slurp(dir_ / "out" / "halving-x0.certificate.json"));
  EXPECT_EQ(cert["termination"], "converged");
  EXPECT_EQ(cert["fejer_violations"], 0);
}

TEST_F(CliTest, BadKappaIsAConfigError) {
  json doc = halving();
  doc["iteration"] = {{"mode", "km"}, {"kappa", 0.6}};
  EXPECT_EQ(cmd_run(options(doc), out_, err_), kExitUsage);
  EXPECT_NE(err_.str().find("kappa must lie in (0, 0.5)"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir_ / "out" / "halving-x0.trace.csv"));
}

TEST_F(CliTest, UnknownKeysAreRejectedWithPath) {
  json doc = halving();
  doc["iteration"] = {{"mode", "plain"}, {"max_iters", 5}};
  EXPECT_EQ(cmd_run(options(doc), out_, err_), kExitUsage);
  EXPECT_NE(err_.str().find("/iteration/max_iters: unknown key"), std::string::npos) << err_.str();
}

TEST_F(CliTest, MalformedJsonReportsLine) {
  CommandOptions o;
  o.config = dir_ / "broken.json";
  std::ofstream(o.config) << "{\n  \"problem\": {\"builtin\": \"halving\"},\n  oops\n}\n";
  EXPECT_EQ(cmd_run(o, out_, err_), kExitUsage);
  EXPECT_NE(err_.str().find("line 3"), std::string::npos) << err_.str();
}

TEST_F(CliTest, MaxIterExitCode) {
  json doc = halving();
  doc["iteration"] = {{"max_iter", 3}};
  EXPECT_EQ(cmd_run(options(doc), out_, err_), kExitMaxIter);
}

TEST_F(CliTest, StartOutsideConstraintSet) {
  const json doc = {{"problem",
                     {{"operators", {{{"kind", "identity"}, {"n", 1}}}},
                      {"constraint_set", {{"kind", "box"}, {"lower", {0}}, {"upper", {1}}}},
                      {"x0", {{2}}}}}};
  EXPECT_EQ(cmd_run(options(doc), out_, err_), kExitUsage);
  EXPECT_NE(err_.str().find("x0 must lie in C"), std::string::npos);
}

TEST_F(CliTest, SparseRunStabilizes) {
  const json doc = {{"problem", {{"builtin", "sparse-affine"}, {"n", 6}, {"k", 3}, {"s", 2}, {"seed", 1}}},
                    {"iteration", {{"max_iter", 100000}}},
                    {"analysis", {{"tol_fix", 1e-8}}}};
  EXPECT_EQ(cmd_run(options(doc), out_, err_), kExitOk) << err_.str();
  const auto cert = json::parse(slurp(dir_ / "out" / "sparse-affine-n6-k3-s2-seed1-x3.certificate.json"));
  EXPECT_TRUE(cert["stabilization"]["stabilized"].get<bool>());
  EXPECT_TRUE(cert["stabilization"]["active_in_I1"].get<bool>());
}

TEST_F(CliTest, ValidateProjectionUnionPasses) {
  const json doc = {
      {"problem",
       {{"operators",
         {{{"kind", "projection"}, {"set", {{"kind", "box"}, {"lower", {0, 0}}, {"upper", {2, 2}}}}},
          {{"kind", "projection"}, {"set", {{"kind", "ball"}, {"center", {1, 1}}, {"radius", 1}}}}}},
        {"x0", {{4, -3}}},
        {"z_star", {1, 1}}}}};
  EXPECT_EQ(cmd_validate(options(doc), out_, err_), kExitOk) << out_.str() << err_.str();
}

TEST_F(CliTest, ValidateNamesTheExpansion) {
  const json doc = {{"problem",
                     {{"operators",
                       {{{"kind", "projection"}, {"set", {{"kind", "ball"}, {"center", {0, 0}}, {"radius", 1}}}},
                        {{"kind", "scaling"}, {"factor", 1.1}, {"center", {0, 0}}}}},
                      {"x0", {{2, 1}}},
                      {"z_star", {0, 0}}}}};
  EXPECT_EQ(cmd_validate(options(doc), out_, err_), kExitAssumption);
  EXPECT_NE(out_.str().find("[1] scale(1.1): FAIL"), std::string::npos) << out_.str();
}

TEST_F(CliTest, ValidateSparseSupportAtRandomPoints) {
  const json doc = {{"problem", {{"builtin", "sparse-affine"}, {"n", 6}, {"k", 3}, {"s", 2}, {"seed", 1}}},
                    {"analysis", {{"a3_points", 100}, {"a2_samples", 50}}}};
  EXPECT_EQ(cmd_validate(options(doc), out_, err_), kExitOk) << out_.str() << err_.str();
  EXPECT_NE(out_.str().find("phi=sparse-support: pass points=100 failures=0"), std::string::npos);
}

TEST_F(CliTest, ValidateWithoutFixedPoint) {
  const json doc = {
      {"problem",
       {{"operators",
         {{{"kind", "averaged-composition"},
           {"alpha", 1},
           {"parts",
            {{{"kind", "scaling"}, {"factor", 0.5}, {"center", {0}}},
             {{"kind", "scaling"}, {"factor", 2}, {"center", {1}}}}}}}},
        {"x0", {{3}}}}},
      {"analysis", {{"a2_samples", 10}}}};
  EXPECT_EQ(cmd_validate(options(doc), out_, err_), kExitUsage);
  EXPECT_NE(out_.str().find("no fixed point"), std::string::npos) << out_.str();
}

TEST_F(CliTest, EstimateDeltaHalving) {
  json doc = halving();
  doc["analysis"] = {{"delta_samples", 100000}, {"delta_sampling", "grid"}};
  auto o = options(doc);
  o.epsilon = 1.0;
  o.radius = 4.0;
  EXPECT_EQ(cmd_estimate_delta(o, out_, err_), kExitOk) << err_.str();
  EXPECT_NE(out_.str().find("Q_plain: 8\n"), std::string::npos) << out_.str();
  EXPECT_NE(out_.str().find("Q_km: 32\n"), std::string::npos);

  std::ostringstream empty;
  o.epsilon = 5.0;
  EXPECT_EQ(cmd_estimate_delta(o, empty, err_), kExitOk);
  EXPECT_NE(empty.str().find("empty active region"), std::string::npos);
}

TEST_F(CliTest, EstimateDeltaNeedsStrongZStar) {
  const json doc = {{"problem", {{"builtin", "two-branch"}}}};
  EXPECT_EQ(cmd_estimate_delta(options(doc), out_, err_), kExitUsage);
}

TEST_F(CliTest, DeterministicArtifacts) {
  const json doc = {{"problem", {{"builtin", "convex-feasibility"}, {"n", 3}, {"count", 3}, {"seeds", {4, 5}}}},
                    {"selection", {{"kind", "nearest-operators"}}},
                    {"policy", {{"kind", "seeded-random"}, {"seed", 5}}},
                    {"iteration", {{"mode", "km"}, {"lambda", {{"kind", "seeded-uniform"}, {"seed", 5}}}}}};
  auto a = options(doc, "a");
  a.jobs = 3;
  auto b = options(doc, "b");
  ASSERT_EQ(cmd_run(a, out_, err_), kExitOk) << err_.str();
  ASSERT_EQ(cmd_run(b, out_, err_), kExitOk);
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(dir_ / "a")) {
    ++files;
    EXPECT_EQ(slurp(entry.path()), slurp(dir_ / "b" / entry.path().filename())) << entry.path();
  }
  EXPECT_EQ(files, 18u);

  auto c = options(doc, "c");
  c.seed = 99;
  ASSERT_EQ(cmd_run(c, out_, err_), kExitOk);
  EXPECT_TRUE(fs::exists(dir_ / "c" / "convex-feasibility-n3-seed99-x0.trace.csv"));
}

TEST_F(CliTest, ReportReproducesCertificates) {
  const json doc = {{"problem", {{"builtin", "convex-feasibility"}, {"n", 2}, {"count", 2}, {"seeds", {7}}}},
                    {"policy", {{"kind", "seeded-random"}, {"seed", 1}}},
                    {"analysis", {{"delta_samples", 2000}}}};
  auto run = options(doc, "run");
  ASSERT_EQ(cmd_run(run, out_, err_), kExitOk) << err_.str();
  auto report = options(doc, "report");
  report.trace = dir_ / "run";
  std::ostringstream text;
  ASSERT_EQ(cmd_report(report, text, err_), kExitOk) << err_.str();
  for (const auto* suffix : {".certificate.txt", ".certificate.json"}) {
    for (int k = 0; k < 3; ++k) {
      const std::string name = "convex-feasibility-n2-seed7-x" + std::to_string(k) + suffix;
      EXPECT_EQ(slurp(dir_ / "run" / name), slurp(dir_ / "report" / name)) << name;
    }
  }
  EXPECT_NE(text.str().find("run: convex-feasibility-n2-seed7-x0"), std::string::npos);
}

TEST(Serialization, InstanceRoundTrip) {
  Rng rng(3);
  const Point p = sample_uniform_ball(Point::Zero(3), 1.0, rng);
  std::vector<ConstraintSet> sets = random_halfspaces_through(p, 2, 3);
  sets.push_back(ConstraintSet::ball(p, 2.0));
  const auto original = make_convex_feasibility("mixed", sets, SelectionFunction::nearest_operators(), p, 3);
  const auto rebuilt = build_instances(parse_config(instance_to_json(original))).front();
  ASSERT_EQ(rebuilt.op.size(), original.op.size());
  EXPECT_EQ(rebuilt.op.selection().kind, SelectionKind::NearestOperators);
  EXPECT_EQ(*rebuilt.z_star, p);
  for (int k = 0; k < 50; ++k) {
    const Point x = sample_uniform_ball(Point::Zero(3), 4.0, rng);
    for (std::size_t i = 0; i < original.op.size(); ++i) EXPECT_EQ(rebuilt.op.image(i, x), original.op.image(i, x));
  }

  const auto sparse = make_sparse_affine_feasibility(7, 3, 2, 5);
  const auto sparse_back = build_instances(parse_config(instance_to_json(sparse))).front();
  EXPECT_EQ(sparse_back.sparse->a, sparse.sparse->a);
  EXPECT_EQ(sparse_back.sparse->planted, sparse.sparse->planted);
}

TEST(Serialization, EveryZooOperator) {
  Rng rng(8);
  for (const auto& entry : operator_zoo()) {
    const json doc = {{"problem",
                       {{"operators", {operator_to_json(entry.op)}},
                        {"constraint_set", set_to_json(entry.set)},
                        {"x0", {point_to_json(entry.set.theta())}}}}};
    const auto inst = build_instances(parse_config(doc)).front();
    for (int k = 0; k < 20; ++k) {
      const Point x = sample_in_set_ball(entry.set, entry.set.theta(), 3.0, rng);
      EXPECT_EQ(inst.op.image(0, x), entry.op.evaluate(x)) << entry.id;
    }
  }
}

}  // namespace
}  // namespace paracon::cli
