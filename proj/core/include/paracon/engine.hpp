#pragma once

#include "paracon/union_operator.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace paracon {

enum class IterationMode { Plain, KrasnoselskiMann };

std::string to_string(IterationMode mode);

/// Relaxation parameters lambda_t for the KM iteration.
struct LambdaSchedule {
  enum class Kind { Constant, Periodic, SeededUniform };
  Kind kind = Kind::Constant;
  double value = 0.5;           // Constant
  std::vector<double> values;   // Periodic
  std::uint64_t seed = 0;       // SeededUniform: uniform on (kappa, 1 - kappa)

  static LambdaSchedule constant(double lambda) { return {Kind::Constant, lambda, {}, 0}; }
  static LambdaSchedule periodic(std::vector<double> values) {
    return {Kind::Periodic, 0.0, std::move(values), 0};
  }
  static LambdaSchedule seeded_uniform(std::uint64_t seed) { return {Kind::SeededUniform, 0.0, {}, seed}; }
};

std::string to_string(LambdaSchedule::Kind kind);

/// Raised when a precondition of the iteration is violated (kappa range,
/// lambda outside (kappa, 1 - kappa), x0 outside C, ...).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Produces lambda_0, lambda_1, ... and rejects any value outside
/// (kappa, 1 - kappa).
class LambdaGenerator {
 public:
  LambdaGenerator(LambdaSchedule schedule, double kappa);
  double next();

 private:
  LambdaSchedule schedule_;
  double kappa_;
  std::size_t step_ = 0;
  Rng rng_;
};

struct IterationConfig {
  IterationMode mode = IterationMode::Plain;
  double kappa = 0.25;
  LambdaSchedule lambda = LambdaSchedule::constant(0.5);
  SelectionPolicy policy;
  std::size_t max_iter = 10000;
  double tol_residual = 1e-10;
  std::size_t stall_window = 10;

  /// Throws PreconditionError on kappa outside (0, 1/2), a schedule that can
  /// leave (kappa, 1 - kappa), or nonsensical stopping parameters.
  void validate() const;
};

/// Record t holds x_t and the step x_t -> x_{t+1}. The final record of a
/// run holds the last iterate and no step.
struct TraceRecord {
  std::size_t t = 0;
  Point x;
  std::optional<std::size_t> active_index;
  std::optional<double> residual;        // ||x_{t+1} - x_t||
  std::optional<double> lambda;          // KM only
  std::optional<double> dist_to_zstar;

  [[nodiscard]] bool has_step() const { return active_index.has_value(); }
};

enum class Termination { Converged, MaxIter, Error };

std::string to_string(Termination termination);

struct IterationRun {
  IterationConfig config;
  Point x0;
  std::vector<TraceRecord> trace;
  Termination termination = Termination::Error;

  [[nodiscard]] const Point& final_point() const { return trace.back().x; }
  [[nodiscard]] std::size_t steps() const { return trace.empty() ? 0 : trace.size() - 1; }
  [[nodiscard]] std::optional<double> final_residual() const;
};

/// Thrown when a non-finite iterate appears; carries the trace so far.
class IterationError : public std::runtime_error {
 public:
  IterationError(const std::string& what, IterationRun partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  [[nodiscard]] const IterationRun& partial() const { return partial_; }

 private:
  IterationRun partial_;
};

/// x_{t+1} = T_s(x_t) with s chosen by the policy from phi(x_t). Stops when
/// the residual stays <= tol_residual for stall_window consecutive steps,
/// at the first exactly-zero residual under a deterministic policy, or at
/// max_iter.
IterationRun run_plain(const UnionOperator& op, const Point& x0, const IterationConfig& cfg,
                       const std::optional<Point>& z_star = std::nullopt);

/// x_{t+1} = (1 - lambda_t) x_t + lambda_t T_s(x_t); same stopping rules.
IterationRun run_km(const UnionOperator& op, const Point& x0, const IterationConfig& cfg,
                    const std::optional<Point>& z_star = std::nullopt);

/// Dispatches on cfg.mode.
IterationRun run_iteration(const UnionOperator& op, const Point& x0, const IterationConfig& cfg,
                           const std::optional<Point>& z_star = std::nullopt);

/// Termination a trace would have been given under cfg's stopping rule.
Termination classify_trace(const std::vector<TraceRecord>& trace, const IterationConfig& cfg);

struct ResidualIdentityReport {
  bool passed = true;
  std::size_t checked = 0;
  std::optional<std::size_t> first_failure;
  double max_error = 0.0;
};

/// Recomputes T_s(x_t) for every KM step and checks
/// ||x_{t+1} - x_t|| == lambda_t ||T_s(x_t) - x_t|| within tol.
ResidualIdentityReport residual_identity_check(const IterationRun& run, const UnionOperator& op,
                                               double tol = 1e-10);

/// Trace CSV. Header: t,x,active_index,residual,lambda,dist_to_zstar.
/// Coordinates are ';'-joined; absent fields are empty; doubles use the
/// shortest decimal form that round-trips exactly.
inline constexpr const char* kTraceHeader = "t,x,active_index,residual,lambda,dist_to_zstar";

void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace);
std::vector<TraceRecord> read_trace_csv(std::istream& in);

std::string format_double(double value);
double parse_double(const std::string& text);

}  // namespace paracon
