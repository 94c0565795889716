#pragma once

#include "paracon/engine.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace paracon {

enum class DeltaSampling { Random, Grid };

struct DeltaOptions {
  DeltaSampling sampling = DeltaSampling::Random;
  double tol_fix = kDefaultTolFix;
  /// Families larger than this get one random member per sample point.
  std::size_t max_operators_per_sample = 64;
};

/// Sampled estimate of the uniform decrease
///   delta = inf { rho(z,x) - rho(z,T_s x) : x in C ∩ B(theta,M), ||x - T_s x|| > eps }.
/// delta_hat is a minimum over finitely many samples, so it can only
/// overestimate the true infimum; Q computed from it underestimates the
/// guaranteed bound.
struct DeltaEstimate {
  double epsilon = 0.0;
  double radius = 0.0;  // M
  Point z_star;
  double delta_hat = std::numeric_limits<double>::infinity();
  bool empty_region = true;
  std::optional<std::size_t> argmin_index;
  std::optional<Point> argmin_x;
  std::size_t n_samples = 0;       // points visited
  std::size_t active_samples = 0;  // (s, x) pairs in the eps-active region
  std::uint64_t seed = 0;
};

/// Throws std::invalid_argument when z_star is not fixed by every member.
DeltaEstimate estimate_delta(const OperatorFamily& family, const Point& z_star, double epsilon, double radius,
                             const ConstraintSet& set, std::size_t n_samples, std::uint64_t seed,
                             const DeltaOptions& options = {});

/// Smallest natural Q with Q >= 2M/delta (plain) or Q >= 2M/(delta kappa) (KM).
std::uint64_t q_bound(double radius, double delta, IterationMode mode, double kappa = 0.25);

struct Stabilization {
  bool stabilized = false;
  std::string reason;
  Point x_star;
  std::size_t t0 = 0;
  IndexSet phi_star;
  IndexSet fixing;      // I1: members of phi(x*) fixing x*
  IndexSet non_fixing;  // I2
  bool active_in_fixing = false;
  std::vector<std::size_t> offending_steps;

  [[nodiscard]] bool verified() const { return stabilized && active_in_fixing; }
};

/// Takes x* as the final iterate, finds the smallest t0 with
/// phi(x_t) ⊆ phi(x*) for every recorded t >= t0, and checks that every
/// branch used from t0 on fixes x* within tol_fix.
Stabilization detect_stabilization(const IterationRun& run, const UnionOperator& op,
                                   double tol_fix = kDefaultTolFix);

struct EpsilonLevel {
  double epsilon = 0.0;
  std::size_t large_steps = 0;             // #{t : residual_t > eps}
  std::optional<double> delta_run;         // min decrease over eps-large steps
  std::optional<double> run_exact_bound;   // rho(z*, x0) / delta_run
  bool identity_holds = true;              // large_steps <= run_exact_bound
  std::optional<double> delta_hat;
  std::optional<std::uint64_t> q_apriori;  // q_bound(M, delta_hat)
};

struct CertifyOptions {
  std::string run_id;
  double tol_fix = kDefaultTolFix;
  double fejer_tol = 1e-10;
  double envelope_tol = 1e-8;
  bool stabilization = true;
  /// Matched to epsilon levels by value; supplies the a-priori Q column.
  std::vector<DeltaEstimate> delta_estimates;
};

struct Certificate {
  std::string run_id;
  IterationMode mode = IterationMode::Plain;
  double kappa = 0.0;
  Termination termination = Termination::Error;
  std::size_t steps = 0;
  std::optional<double> final_residual;
  std::optional<Point> z_star;
  double radius = 0.0;             // M = max(||x0 - theta||, ||z* - theta||)
  double max_dist_theta = 0.0;
  std::optional<bool> bounded;     // all ||x_t - theta|| <= 3M (+tol); needs z*
  std::size_t fejer_violations = 0;
  double max_fejer_increase = 0.0;
  std::vector<EpsilonLevel> levels;
  std::optional<Stabilization> stabilization;
};

Certificate certify_run(const IterationRun& run, const UnionOperator& op, const std::optional<Point>& z_star,
                        const std::vector<double>& epsilon_levels, const CertifyOptions& options = {});

/// key: value lines followed by a per-epsilon CSV table.
std::string format_certificate(const Certificate& cert);

std::string format_point(const Point& x);
std::string format_index_set(const IndexSet& set);

}  // namespace paracon
