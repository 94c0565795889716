#include "paracon/operators.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace paracon {

struct Paracontraction::Data {
  std::optional<ConstraintSet> set;
  std::vector<std::size_t> support;
  double factor = 0.0;
  Point center;
  std::vector<Paracontraction> parts;
  double alpha = 1.0;
};

std::string to_string(OperatorKind kind) {
  switch (kind) {
    case OperatorKind::Projection: return "projection";
    case OperatorKind::CoordinateProjection: return "coordinate-projection";
    case OperatorKind::Scaling: return "scaling";
    case OperatorKind::Averaged: return "averaged-composition";
  }
  return "unknown";
}

Paracontraction::Paracontraction(OperatorKind kind, std::size_t n, std::shared_ptr<const Data> data)
    : kind_(kind), n_(n), data_(std::move(data)) {}

Paracontraction Paracontraction::projection(ConstraintSet set) {
  auto data = std::make_shared<Data>();
  const std::size_t n = set.dimension();
  data->set = std::move(set);
  return {OperatorKind::Projection, n, std::move(data)};
}

Paracontraction Paracontraction::coordinate_projection(std::size_t n, std::vector<std::size_t> support) {
  if (n == 0) throw std::invalid_argument("coordinate_projection: dimension must be >= 1");
  std::sort(support.begin(), support.end());
  support.erase(std::unique(support.begin(), support.end()), support.end());
  if (!support.empty() && support.back() >= n)
    throw std::invalid_argument("coordinate_projection: support index out of range");
  auto data = std::make_shared<Data>();
  data->support = std::move(support);
  return {OperatorKind::CoordinateProjection, n, std::move(data)};
}

Paracontraction Paracontraction::strict_contraction(double factor, Point center) {
  if (!(factor > 0.0 && factor < 1.0))
    throw std::invalid_argument("strict_contraction: factor must lie in (0, 1)");
  return scaling(factor, std::move(center));
}

Paracontraction Paracontraction::scaling(double factor, Point center) {
  if (!(factor >= 0.0) || !std::isfinite(factor))
    throw std::invalid_argument("scaling: factor must be finite and >= 0");
  if (center.size() == 0) throw std::invalid_argument("scaling: empty center");
  if (!is_finite(center)) throw std::invalid_argument("scaling: center must be finite");
  auto data = std::make_shared<Data>();
  const auto n = static_cast<std::size_t>(center.size());
  data->factor = factor;
  data->center = std::move(center);
  return {OperatorKind::Scaling, n, std::move(data)};
}

Paracontraction Paracontraction::identity(std::size_t n) {
  return scaling(1.0, Point::Zero(static_cast<Eigen::Index>(n)));
}

Paracontraction Paracontraction::averaged_composition(std::vector<Paracontraction> parts, double alpha) {
  if (parts.empty()) throw std::invalid_argument("averaged_composition: no parts");
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw std::invalid_argument("averaged_composition: alpha must lie in (0, 1]");
  const std::size_t n = parts.front().dimension();
  for (const auto& p : parts)
    if (p.dimension() != n) throw DimensionError("averaged_composition: parts disagree on dimension");
  auto data = std::make_shared<Data>();
  data->parts = std::move(parts);
  data->alpha = alpha;
  return {OperatorKind::Averaged, n, std::move(data)};
}

Point Paracontraction::evaluate(const Point& x) const {
  require_dimension(x, n_, "Paracontraction::evaluate");
  return apply(x);
}

Point Paracontraction::apply(const Point& x) const {
  const Data& d = *data_;
  switch (kind_) {
    case OperatorKind::Projection:
      return d.set->project(x);
    case OperatorKind::CoordinateProjection: {
      Point y = Point::Zero(x.size());
      for (std::size_t j : d.support) y(static_cast<Eigen::Index>(j)) = x(static_cast<Eigen::Index>(j));
      return y;
    }
    case OperatorKind::Scaling:
      return d.center + d.factor * (x - d.center);
    case OperatorKind::Averaged: {
      Point y = x;
      for (const auto& part : d.parts) y = part.apply(y);
      if (d.alpha == 1.0) return y;
      return (1.0 - d.alpha) * x + d.alpha * y;
    }
  }
  throw std::logic_error("Paracontraction: unsupported kind");
}

bool Paracontraction::is_fixed(const Point& x, double tol) const {
  return (evaluate(x) - x).norm() <= tol;
}

const ConstraintSet& Paracontraction::set() const {
  if (kind_ != OperatorKind::Projection) throw std::logic_error("Paracontraction::set: not a projection");
  return *data_->set;
}
const std::vector<std::size_t>& Paracontraction::support() const { return data_->support; }
double Paracontraction::factor() const { return data_->factor; }
const Point& Paracontraction::center() const { return data_->center; }
const std::vector<Paracontraction>& Paracontraction::parts() const { return data_->parts; }
double Paracontraction::alpha() const { return data_->alpha; }

std::string Paracontraction::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case OperatorKind::Projection:
      os << "P[" << data_->set->describe() << "]";
      break;
    case OperatorKind::CoordinateProjection: {
      os << "P_J{";
      for (std::size_t i = 0; i < data_->support.size(); ++i) os << (i ? "," : "") << data_->support[i];
      os << "}";
      break;
    }
    case OperatorKind::Scaling:
      os << "scale(" << data_->factor << ")";
      break;
    case OperatorKind::Averaged: {
      os << "avg(" << data_->alpha << "; ";
      for (std::size_t i = data_->parts.size(); i-- > 0;)
        os << data_->parts[i].describe() << (i ? " o " : "");
      os << ")";
      break;
    }
  }
  return os.str();
}

Point FixedPointHint::nearest(const Point& x) const {
  switch (kind) {
    case Kind::Set: return set->project(x);
    case Kind::Subspace: {
      Point y = Point::Zero(x.size());
      for (std::size_t j : support) y(static_cast<Eigen::Index>(j)) = x(static_cast<Eigen::Index>(j));
      return y;
    }
    case Kind::SinglePoint: return *point;
    case Kind::WholeSpace: return x;
    case Kind::Unknown: break;
  }
  throw std::logic_error("FixedPointHint::nearest: fixed-point set unknown");
}

std::string FixedPointHint::describe() const {
  switch (kind) {
    case Kind::Set: return "the set " + set->describe();
    case Kind::Subspace: {
      std::ostringstream os;
      os << "coordinate subspace span{";
      for (std::size_t i = 0; i < support.size(); ++i) os << (i ? "," : "") << support[i];
      os << "}";
      return os.str();
    }
    case Kind::SinglePoint: return "a single point";
    case Kind::WholeSpace: return "the whole space";
    case Kind::Unknown: break;
  }
  return "unknown";
}

FixedPointHint fixed_points_hint(const Paracontraction& op) {
  FixedPointHint hint;
  switch (op.kind()) {
    case OperatorKind::Projection:
      hint.kind = FixedPointHint::Kind::Set;
      hint.set = op.set();
      break;
    case OperatorKind::CoordinateProjection:
      hint.kind = FixedPointHint::Kind::Subspace;
      hint.support = op.support();
      break;
    case OperatorKind::Scaling:
      if (op.factor() == 1.0) {
        hint.kind = FixedPointHint::Kind::WholeSpace;
      } else {
        hint.kind = FixedPointHint::Kind::SinglePoint;
        hint.point = op.center();
      }
      break;
    case OperatorKind::Averaged:
      // Relaxation does not change Fix; compositions have no closed form here.
      if (op.parts().size() == 1) return fixed_points_hint(op.parts().front());
      break;
  }
  return hint;
}

std::optional<Point> find_fixed_point(const Paracontraction& op, const Point& start,
                                      std::size_t max_iterations, double tol_fix) {
  Point z = start;
  for (std::size_t k = 0; k < max_iterations; ++k) {
    Point next = op.evaluate(z);
    if (!is_finite(next)) return std::nullopt;
    const double move = (next - z).norm();
    z = std::move(next);
    if (move <= 1e-15 * std::max(1.0, z.norm())) break;
  }
  if (op.is_fixed(z, tol_fix)) return z;
  return std::nullopt;
}

A2Report validate_paracontraction(const Paracontraction& op, const ConstraintSet& set, double radius,
                                  std::size_t n_samples, std::uint64_t seed,
                                  const A2Options& options) {
  if (op.dimension() != set.dimension())
    throw DimensionError("validate_paracontraction: operator and set disagree on dimension");
  if (!(radius > 0.0)) throw std::invalid_argument("validate_paracontraction: M must be > 0");

  Rng rng(seed);
  const Point& theta = set.theta();

  std::vector<Point> pool = options.known_fixed_points;
  for (const auto& z : pool) {
    require_dimension(z, op.dimension(), "validate_paracontraction");
    if (!op.is_fixed(z, options.tol_fix))
      throw NoFixedPointError("validate_paracontraction: supplied point is not fixed by T");
  }
  if (pool.empty()) {
    const FixedPointHint hint = fixed_points_hint(op);
    const std::size_t wanted = std::max<std::size_t>(1, std::min(options.fixed_point_pool, n_samples));
    if (hint.kind == FixedPointHint::Kind::SinglePoint) {
      pool.push_back(*hint.point);
    } else {
      for (std::size_t k = 0; k < wanted; ++k) {
        const Point start = sample_in_set_ball(set, theta, radius, rng);
        if (hint.kind != FixedPointHint::Kind::Unknown) {
          pool.push_back(hint.nearest(start));
        } else if (auto z = find_fixed_point(op, start, options.fixed_point_iterations, options.tol_fix)) {
          pool.push_back(std::move(*z));
        }
      }
    }
  }
  if (pool.empty()) throw NoFixedPointError("cannot validate (A2) without Fix(T)");

  A2Report report;
  report.operator_id = options.operator_id.empty() ? op.describe() : options.operator_id;
  report.fixed_points_used = pool.size();
  for (std::size_t i = 0; i < n_samples; ++i) {
    const Point& z = pool[i % pool.size()];
    const Point x = sample_in_set_ball(set, theta, radius, rng);
    const Point tx = op.evaluate(x);
    const double before = (x - z).norm();
    const double after = (tx - z).norm();
    ++report.samples_tested;
    if (after > before + options.tol) {
      report.violations.push_back({z, x, after, before, false});
      continue;
    }
    if ((tx - x).norm() > options.move_threshold) {
      report.max_strictness_slack = std::max(report.max_strictness_slack, after - before);
      if (after >= before - options.strict_slack) report.violations.push_back({z, x, after, before, true});
    }
  }
  return report;
}

}  // namespace paracon
