#pragma once

#include "paracon/analysis.hpp"
#include "paracon/engine.hpp"
#include "paracon/problems.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace paracon::cli {

/// Schema or semantic error in a config document. The message starts with
/// the JSON path of the offending field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ProblemConfig {
  /// halving, two-branch, sparse-affine, convex-feasibility; empty for an
  /// inline operator list.
  std::string builtin;
  std::size_t n = 0;
  std::size_t k = 0;
  std::size_t s = 0;
  std::size_t count = 3;  // convex-feasibility: number of halfspaces
  std::vector<std::uint64_t> seeds{0};

  std::vector<Paracontraction> operators;
  std::optional<ConstraintSet> constraint_set;
  std::vector<Point> x0;
  std::optional<Point> z_star;
  /// Indices into the instance's start candidates; empty means all.
  std::vector<std::size_t> starts;
};

struct AnalysisConfig {
  std::vector<double> epsilons{0.5, 0.1, 0.01};
  std::size_t delta_samples = 10000;
  DeltaSampling sampling = DeltaSampling::Random;
  std::uint64_t seed = 0;
  double tol_fix = kDefaultTolFix;
  bool stabilization = true;
  std::size_t a2_samples = 200;
  std::size_t a2_max_operators = 256;
  std::size_t a3_points = 100;
  std::size_t a3_probes = 32;
  std::vector<double> a3_radii{1e-2, 1e-4, 1e-6, 1e-8};
  std::optional<double> radius;
};

struct OutputConfig {
  std::filesystem::path directory = "out";
  bool csv = true;
  bool text = true;
  bool json = true;
};

struct RunConfig {
  ProblemConfig problem;
  std::optional<SelectionFunction> selection;
  IterationConfig iteration;
  AnalysisConfig analysis;
  OutputConfig output;
};

RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);

/// Replaces every seed in the config (problem, policy, lambda, analysis).
void override_seed(RunConfig& config, std::uint64_t seed);

/// Builds one instance per problem seed. Throws ConfigError when a declared
/// z_star is not fixed by every operator.
std::vector<ProblemInstance> build_instances(const RunConfig& config);

struct RunTask {
  std::string run_id;
  std::size_t instance = 0;
  Point x0;
};

/// One task per (instance, selected start), in a fixed order.
std::vector<RunTask> plan_runs(const RunConfig& config, const std::vector<ProblemInstance>& instances);

// Serialization back to the config format.
nlohmann::json point_to_json(const Point& x);
nlohmann::json set_to_json(const ConstraintSet& set);
nlohmann::json operator_to_json(const Paracontraction& op);
nlohmann::json selection_to_json(const SelectionFunction& phi);
/// A config document ({problem, selection}) that rebuilds `instance`:
/// builtin parameters for sparse instances, an inline operator list
/// otherwise.
nlohmann::json instance_to_json(const ProblemInstance& instance);

nlohmann::json certificate_to_json(const Certificate& cert);

}  // namespace paracon::cli
