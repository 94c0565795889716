#include "paracon/space.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace paracon {

namespace {

constexpr int kDykstraMaxSweeps = 200000;
constexpr int kRejectionAttempts = 64;
constexpr int kProjectionAttempts = 1000;

std::string dims_message(const char* where, Eigen::Index a, Eigen::Index b) {
  std::ostringstream os;
  os << where << ": dimension mismatch (" << a << " vs " << b << ")";
  return os.str();
}

}  // namespace

void require_same_dimension(const Point& x, const Point& y, const char* where) {
  if (x.size() != y.size()) throw DimensionError(dims_message(where, x.size(), y.size()));
}

void require_dimension(const Point& x, std::size_t n, const char* where) {
  if (static_cast<std::size_t>(x.size()) != n)
    throw DimensionError(dims_message(where, x.size(), static_cast<Eigen::Index>(n)));
}

bool is_finite(const Point& x) { return x.allFinite(); }

double distance(const Point& x, const Point& y) {
  require_same_dimension(x, y, "distance");
  return (x - y).norm();
}

bool ball_contains(const Point& center, double radius, const Point& x) {
  if (radius < 0.0) throw std::invalid_argument("ball_contains: negative radius");
  return distance(center, x) <= radius;
}

std::string to_string(SetKind kind) {
  switch (kind) {
    case SetKind::WholeSpace: return "whole-space";
    case SetKind::Box: return "box";
    case SetKind::Ball: return "ball";
    case SetKind::Affine: return "affine";
    case SetKind::Halfspaces: return "halfspaces";
  }
  return "unknown";
}

ConstraintSet::ConstraintSet(SetKind kind, std::size_t n, std::shared_ptr<const Data> data)
    : kind_(kind), n_(n), data_(std::move(data)) {
  if (n_ == 0) throw std::invalid_argument("ConstraintSet: dimension must be >= 1");
  theta_ = project(Point::Zero(static_cast<Eigen::Index>(n_)));
}

ConstraintSet ConstraintSet::whole_space(std::size_t n) {
  return {SetKind::WholeSpace, n, std::make_shared<Data>()};
}

ConstraintSet ConstraintSet::box(Point lower, Point upper) {
  require_same_dimension(lower, upper, "ConstraintSet::box");
  if (!is_finite(lower) || !is_finite(upper))
    throw std::invalid_argument("ConstraintSet::box: bounds must be finite");
  if ((lower.array() > upper.array()).any())
    throw std::invalid_argument("ConstraintSet::box: empty box (lower > upper)");
  auto data = std::make_shared<Data>();
  const auto n = static_cast<std::size_t>(lower.size());
  data->v0 = std::move(lower);
  data->v1 = std::move(upper);
  return {SetKind::Box, n, std::move(data)};
}

ConstraintSet ConstraintSet::ball(Point center, double radius) {
  if (!(radius >= 0.0) || !std::isfinite(radius))
    throw std::invalid_argument("ConstraintSet::ball: radius must be finite and >= 0");
  if (!is_finite(center)) throw std::invalid_argument("ConstraintSet::ball: center must be finite");
  auto data = std::make_shared<Data>();
  const auto n = static_cast<std::size_t>(center.size());
  data->v0 = std::move(center);
  data->radius = radius;
  return {SetKind::Ball, n, std::move(data)};
}

ConstraintSet ConstraintSet::affine(Matrix a, Point b) {
  if (a.rows() != b.size())
    throw DimensionError(dims_message("ConstraintSet::affine", a.rows(), b.size()));
  if (a.rows() == 0 || a.cols() == 0)
    throw std::invalid_argument("ConstraintSet::affine: empty system");
  auto data = std::make_shared<Data>();
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(a);
  data->pinv = cod.pseudoInverse();
  const Point residual = a * (data->pinv * b) - b;
  if (residual.norm() > 1e-9 * std::max(1.0, b.norm()))
    throw std::invalid_argument("ConstraintSet::affine: inconsistent system (empty set)");
  const auto n = static_cast<std::size_t>(a.cols());
  data->a = std::move(a);
  data->v0 = std::move(b);
  return {SetKind::Affine, n, std::move(data)};
}

ConstraintSet ConstraintSet::halfspaces(Matrix a, Point b) {
  if (a.rows() != b.size())
    throw DimensionError(dims_message("ConstraintSet::halfspaces", a.rows(), b.size()));
  if (a.rows() == 0 || a.cols() == 0)
    throw std::invalid_argument("ConstraintSet::halfspaces: empty system");
  auto data = std::make_shared<Data>();
  data->row_norm2 = a.rowwise().squaredNorm();
  if ((data->row_norm2.array() == 0.0).any())
    throw std::invalid_argument("ConstraintSet::halfspaces: zero normal vector");
  const auto n = static_cast<std::size_t>(a.cols());
  data->a = std::move(a);
  data->v0 = std::move(b);
  ConstraintSet set{SetKind::Halfspaces, n, std::move(data)};
  // Dykstra converges to the projection only when the intersection is nonempty.
  if (!set.contains(set.theta_, 1e-7))
    throw std::invalid_argument("ConstraintSet::halfspaces: intersection appears empty");
  return set;
}

ConstraintSet ConstraintSet::with_theta(Point theta) const {
  require_dimension(theta, n_, "ConstraintSet::with_theta");
  if (!contains(theta)) throw std::invalid_argument("ConstraintSet::with_theta: theta must lie in C");
  ConstraintSet copy = *this;
  copy.theta_ = std::move(theta);
  return copy;
}

bool ConstraintSet::contains(const Point& x, double tol) const {
  require_dimension(x, n_, "ConstraintSet::contains");
  const Data& d = *data_;
  switch (kind_) {
    case SetKind::WholeSpace:
      return true;
    case SetKind::Box:
      return (x.array() >= d.v0.array() - tol).all() && (x.array() <= d.v1.array() + tol).all();
    case SetKind::Ball:
      return (x - d.v0).norm() <= d.radius + tol;
    case SetKind::Affine:
      return (d.a * x - d.v0).norm() <= tol * std::max(1.0, d.v0.norm());
    case SetKind::Halfspaces:
      return ((d.a * x - d.v0).array() <= tol * d.row_norm2.array().sqrt()).all();
  }
  return false;
}

Point ConstraintSet::project(const Point& x) const {
  require_dimension(x, n_, "ConstraintSet::project");
  const Data& d = *data_;
  switch (kind_) {
    case SetKind::WholeSpace:
      return x;
    case SetKind::Box:
      return x.cwiseMax(d.v0).cwiseMin(d.v1);
    case SetKind::Ball: {
      const Point offset = x - d.v0;
      const double r = offset.norm();
      if (r <= d.radius) return x;
      return d.v0 + (d.radius / r) * offset;
    }
    case SetKind::Affine:
      return x - d.pinv * (d.a * x - d.v0);
    case SetKind::Halfspaces:
      return project_halfspaces(x);
  }
  throw std::logic_error("ConstraintSet::project: unsupported kind");
}

Point ConstraintSet::project_halfspaces(const Point& x) const {
  const Data& d = *data_;
  const Eigen::Index rows = d.a.rows();
  auto project_row = [&](Eigen::Index i, const Point& y) -> Point {
    const double excess = d.a.row(i).dot(y) - d.v0(i);
    if (excess <= 0.0) return y;
    return y - (excess / d.row_norm2(i)) * d.a.row(i).transpose();
  };
  if (rows == 1) return project_row(0, x);
  if (((d.a * x - d.v0).array() <= 0.0).all()) return x;

  // Dykstra's alternating projections with correction terms.
  Point current = x;
  Matrix corrections = Matrix::Zero(x.size(), rows);
  for (int sweep = 0; sweep < kDykstraMaxSweeps; ++sweep) {
    const Point before = current;
    for (Eigen::Index i = 0; i < rows; ++i) {
      const Point shifted = current + corrections.col(i);
      current = project_row(i, shifted);
      corrections.col(i) = shifted - current;
    }
    if ((current - before).norm() <= 1e-15 * std::max(1.0, current.norm())) break;
  }
  return current;
}

std::string ConstraintSet::describe() const {
  std::ostringstream os;
  os << to_string(kind_) << "(n=" << n_;
  switch (kind_) {
    case SetKind::Ball: os << ", radius=" << data_->radius; break;
    case SetKind::Affine:
    case SetKind::Halfspaces: os << ", rows=" << data_->a.rows(); break;
    default: break;
  }
  os << ")";
  return os.str();
}

Point sample_uniform_ball(const Point& center, double radius, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Eigen::Index n = center.size();
  Point direction(n);
  double norm = 0.0;
  do {
    for (Eigen::Index i = 0; i < n; ++i) direction(i) = gauss(rng);
    norm = direction.norm();
  } while (norm == 0.0);
  const double r = radius * std::pow(unit(rng), 1.0 / static_cast<double>(n));
  return center + (r / norm) * direction;
}

Point sample_in_set_ball(const ConstraintSet& set, const Point& center, double radius, Rng& rng) {
  require_dimension(center, set.dimension(), "sample_in_set_ball");
  for (int i = 0; i < kRejectionAttempts; ++i) {
    Point y = sample_uniform_ball(center, radius, rng);
    if (set.contains(y, 0.0)) return y;
  }
  for (int i = 0; i < kProjectionAttempts; ++i) {
    Point y = set.project(sample_uniform_ball(center, radius, rng));
    if ((y - center).norm() <= radius) return y;
  }
  throw std::runtime_error("sample_in_set_ball: C ∩ B(center, radius) looks empty");
}

}  // namespace paracon
