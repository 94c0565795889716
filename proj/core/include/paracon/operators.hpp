#pragma once

#include "paracon/space.hpp"

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace paracon {

/// Default tolerance for fixed-point membership, ||T(x) - x|| <= tol_fix.
inline constexpr double kDefaultTolFix = 1e-9;

enum class OperatorKind { Projection, CoordinateProjection, Scaling, Averaged };

std::string to_string(OperatorKind kind);

/// A single-valued continuous map T_i : R^n -> R^n from a closed family of
/// kinds. Values are immutable and cheap to copy.
///
///   Projection            x -> P_S(x)
///   CoordinateProjection  x -> x with coordinates outside the support zeroed
///   Scaling               x -> p + c (x - p)
///   Averaged              x -> (1 - alpha) x + alpha (T_k o ... o T_1)(x)
///
/// Scaling with c in (0, 1) is the strict contraction towards p. Other
/// factors are accepted by scaling() so that negative controls (c > 1) and
/// the identity (c = 1) can be expressed; they are not all paracontractions.
class Paracontraction {
 public:
  static Paracontraction projection(ConstraintSet set);
  /// Support indices are 0-based; duplicates are removed.
  static Paracontraction coordinate_projection(std::size_t n, std::vector<std::size_t> support);
  static Paracontraction strict_contraction(double factor, Point center);
  static Paracontraction scaling(double factor, Point center);
  static Paracontraction identity(std::size_t n);
  /// Parts are applied first to last. alpha must lie in (0, 1].
  static Paracontraction averaged_composition(std::vector<Paracontraction> parts, double alpha);

  [[nodiscard]] OperatorKind kind() const { return kind_; }
  [[nodiscard]] std::size_t dimension() const { return n_; }

  [[nodiscard]] Point evaluate(const Point& x) const;
  [[nodiscard]] bool is_fixed(const Point& x, double tol = kDefaultTolFix) const;

  [[nodiscard]] const ConstraintSet& set() const;
  [[nodiscard]] const std::vector<std::size_t>& support() const;
  [[nodiscard]] double factor() const;
  [[nodiscard]] const Point& center() const;
  [[nodiscard]] const std::vector<Paracontraction>& parts() const;
  [[nodiscard]] double alpha() const;

  [[nodiscard]] std::string describe() const;

 private:
  struct Data;
  Paracontraction(OperatorKind kind, std::size_t n, std::shared_ptr<const Data> data);
  [[nodiscard]] Point apply(const Point& x) const;

  OperatorKind kind_;
  std::size_t n_;
  std::shared_ptr<const Data> data_;
};

/// Closed-form description of Fix(T) where one exists.
struct FixedPointHint {
  enum class Kind { Set, Subspace, SinglePoint, WholeSpace, Unknown };
  Kind kind = Kind::Unknown;
  std::optional<ConstraintSet> set;       // Set
  std::vector<std::size_t> support;       // Subspace: span of these coordinates
  std::optional<Point> point;             // SinglePoint

  /// Nearest fixed point to x. Only valid when kind != Unknown.
  [[nodiscard]] Point nearest(const Point& x) const;
  [[nodiscard]] std::string describe() const;
};

FixedPointHint fixed_points_hint(const Paracontraction& op);

/// Thrown when no fixed point of an operator can be found or constructed.
class NoFixedPointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct A2Violation {
  Point z;
  Point x;
  double dist_image = 0.0;  // rho(z, T x)
  double dist_point = 0.0;  // rho(z, x)
  bool strictness = false;  // false: weak inequality broken
};

struct A2Report {
  std::string operator_id;
  std::size_t samples_tested = 0;
  std::size_t fixed_points_used = 0;
  std::vector<A2Violation> violations;
  /// max over non-fixed samples of rho(z, T y) - rho(z, y); negative when
  /// every sampled move strictly decreased the distance.
  double max_strictness_slack = -std::numeric_limits<double>::infinity();

  [[nodiscard]] bool passed() const { return violations.empty(); }
};

struct A2Options {
  std::string operator_id;
  double tol = 1e-10;             // weak: rho(z,Tx) <= rho(z,x) + tol
  double strict_slack = 1e-12;    // strict: rho(z,Ty) < rho(z,y) - strict_slack
  double move_threshold = 1e-6;   // y counts as non-fixed when ||Ty - y|| > this
  double tol_fix = kDefaultTolFix;
  std::size_t fixed_point_pool = 16;
  std::size_t fixed_point_iterations = 100000;
  /// Fixed points to use instead of discovering them.
  std::vector<Point> known_fixed_points;
};

/// Empirical check of the paracontraction inequalities on samples
/// x in C ∩ B(theta, M) against fixed points z of T. Deterministic in seed.
/// Throws NoFixedPointError when Fix(T) cannot be found.
A2Report validate_paracontraction(const Paracontraction& op, const ConstraintSet& set, double radius,
                                  std::size_t n_samples, std::uint64_t seed,
                                  const A2Options& options = {});

/// Iterates T from `start` until ||T z - z|| stalls; returns z when it is a
/// fixed point within tol_fix.
std::optional<Point> find_fixed_point(const Paracontraction& op, const Point& start,
                                      std::size_t max_iterations, double tol_fix = kDefaultTolFix);

}  // namespace paracon
