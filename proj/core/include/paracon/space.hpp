#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>

namespace paracon {

/// A point of the ambient space R^n. Every point of one problem shares n.
using Point = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Seeded generator used by every sampler in the library.
using Rng = std::mt19937_64;

/// Thrown when two points (or a point and a set/operator) disagree on n.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

void require_same_dimension(const Point& x, const Point& y, const char* where);
void require_dimension(const Point& x, std::size_t n, const char* where);
bool is_finite(const Point& x);

/// Euclidean metric.
double distance(const Point& x, const Point& y);

/// Closed ball membership: ||x - center|| <= radius.
bool ball_contains(const Point& center, double radius, const Point& x);

enum class SetKind { WholeSpace, Box, Ball, Affine, Halfspaces };

std::string to_string(SetKind kind);

/// Nonempty closed convex subset C of R^n with a closed-form (or, for an
/// intersection of several halfspaces, Dykstra) metric projection, plus the
/// base point theta in C.
///
/// Instances are immutable; copies share their parameter storage.
class ConstraintSet {
 public:
  static ConstraintSet whole_space(std::size_t n);
  static ConstraintSet box(Point lower, Point upper);
  static ConstraintSet ball(Point center, double radius);
  /// {x : A x = b}. Throws if the system is inconsistent.
  static ConstraintSet affine(Matrix a, Point b);
  /// {x : A x <= b}, one halfspace per row. Throws if a row is zero.
  static ConstraintSet halfspaces(Matrix a, Point b);

  /// Returns a copy with base point theta. theta must lie in the set.
  [[nodiscard]] ConstraintSet with_theta(Point theta) const;

  [[nodiscard]] SetKind kind() const { return kind_; }
  [[nodiscard]] std::size_t dimension() const { return n_; }
  [[nodiscard]] const Point& theta() const { return theta_; }
  [[nodiscard]] bool is_convex() const { return true; }

  [[nodiscard]] bool contains(const Point& x, double tol = 1e-9) const;
  [[nodiscard]] Point project(const Point& x) const;

  // Parameter access; which ones are meaningful depends on kind().
  [[nodiscard]] const Point& lower() const { return data_->v0; }
  [[nodiscard]] const Point& upper() const { return data_->v1; }
  [[nodiscard]] const Point& center() const { return data_->v0; }
  [[nodiscard]] double radius() const { return data_->radius; }
  [[nodiscard]] const Matrix& matrix() const { return data_->a; }
  [[nodiscard]] const Point& rhs() const { return data_->v0; }

  [[nodiscard]] std::string describe() const;

 private:
  struct Data {
    Matrix a;
    Matrix pinv;  // affine: A^+
    Point v0;     // box lower / ball center / affine-halfspace rhs
    Point v1;     // box upper
    Eigen::VectorXd row_norm2;  // halfspaces
    double radius = 0.0;
  };

  ConstraintSet(SetKind kind, std::size_t n, std::shared_ptr<const Data> data);
  [[nodiscard]] Point project_halfspaces(const Point& x) const;

  SetKind kind_;
  std::size_t n_;
  std::shared_ptr<const Data> data_;
  Point theta_;
};

/// Uniform sample from the closed ball B(center, radius).
Point sample_uniform_ball(const Point& center, double radius, Rng& rng);

/// Sample from C ∩ B(center, radius). Uses rejection against C first and
/// falls back to projecting a ball sample onto C, which stays inside the
/// ball whenever center lies in C. Throws if neither produces a point.
Point sample_in_set_ball(const ConstraintSet& set, const Point& center,
                         double radius, Rng& rng);

}  // namespace paracon
