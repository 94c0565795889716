#include "paracon/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace paracon {

namespace {

/// Regular grid over the bounding box of B(center, radius), about `count`
/// points in total, keeping those inside the ball.
std::vector<Point> ball_grid(const Point& center, double radius, std::size_t count) {
  const auto n = static_cast<std::size_t>(center.size());
  auto per_axis = static_cast<std::size_t>(std::floor(std::pow(static_cast<double>(count), 1.0 / n) + 1e-9));
  per_axis = std::max<std::size_t>(per_axis, 2);
  std::vector<Point> points;
  std::vector<std::size_t> counter(n, 0);
  const double spacing = 2.0 * radius / static_cast<double>(per_axis - 1);
  while (true) {
    Point x(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
      x(static_cast<Eigen::Index>(i)) = center(static_cast<Eigen::Index>(i)) - radius + spacing * static_cast<double>(counter[i]);
    if ((x - center).norm() <= radius) points.push_back(std::move(x));
    std::size_t axis = 0;
    while (axis < n && ++counter[axis] == per_axis) counter[axis++] = 0;
    if (axis == n) break;
  }
  return points;
}

}  // namespace

DeltaEstimate estimate_delta(const OperatorFamily& family, const Point& z_star, double epsilon, double radius,
                             const ConstraintSet& set, std::size_t n_samples, std::uint64_t seed,
                             const DeltaOptions& options) {
  if (!(epsilon > 0.0) || !(radius > 0.0)) throw std::invalid_argument("estimate_delta: epsilon and M must be > 0");
  require_dimension(z_star, family.dimension(), "estimate_delta: z_star");
  if (set.dimension() != family.dimension()) throw DimensionError("estimate_delta: set dimension");
  for (std::size_t i = 0; i < family.size(); ++i)
    if ((family.apply(i, z_star) - z_star).norm() > options.tol_fix)
      throw std::invalid_argument("estimate_delta: z_star is not fixed by operator " + family.label(i));

  DeltaEstimate est;
  est.epsilon = epsilon;
  est.radius = radius;
  est.z_star = z_star;
  est.seed = seed;

  Rng rng(seed);
  const bool every_member = family.size() <= options.max_operators_per_sample;
  std::uniform_int_distribution<std::size_t> pick(0, family.size() - 1);

  auto visit = [&](const Point& x) {
    ++est.n_samples;
    const double before = (x - z_star).norm();
    auto try_member = [&](std::size_t s) {
      const Point tx = family.apply(s, x);
      if ((x - tx).norm() <= epsilon) return;
      ++est.active_samples;
      const double decrease = before - (tx - z_star).norm();
      if (est.empty_region || decrease < est.delta_hat) {
        est.delta_hat = decrease;
        est.argmin_index = s;
        est.argmin_x = x;
        est.empty_region = false;
      }
    };
    if (every_member) {
      for (std::size_t s = 0; s < family.size(); ++s) try_member(s);
    } else {
      try_member(pick(rng));
    }
  };

  if (options.sampling == DeltaSampling::Grid) {
    for (const Point& x : ball_grid(set.theta(), radius, n_samples))
      if (set.contains(x, 0.0)) visit(x);
  } else {
    for (std::size_t k = 0; k < n_samples; ++k) visit(sample_in_set_ball(set, set.theta(), radius, rng));
  }
  return est;
}

std::uint64_t q_bound(double radius, double delta, IterationMode mode, double kappa) {
  if (!(radius > 0.0) || !(delta > 0.0)) throw std::invalid_argument("q_bound: M and delta must be > 0");
  double value = 2.0 * radius / delta;
  if (mode == IterationMode::KrasnoselskiMann) {
    if (!(kappa > 0.0 && kappa < 0.5)) throw std::invalid_argument("q_bound: kappa must lie in (0, 0.5)");
    value = 2.0 * radius / (delta * kappa);
  }
  const double q = std::ceil(value);
  if (!(q < 9.2e18)) throw std::overflow_error("q_bound: bound does not fit in 64 bits");
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(q));
}

Stabilization detect_stabilization(const IterationRun& run, const UnionOperator& op, double tol_fix) {
  Stabilization result;
  if (run.trace.empty()) {
    result.reason = "empty trace";
    return result;
  }
  if (run.termination != Termination::Converged) {
    result.reason = "run did not converge (" + to_string(run.termination) + ")";
    return result;
  }
  result.stabilized = true;
  result.x_star = run.final_point();
  result.phi_star = op.select(result.x_star);
  for (std::size_t i : result.phi_star) {
    if ((op.image(i, result.x_star) - result.x_star).norm() <= tol_fix) result.fixing.push_back(i);
    else result.non_fixing.push_back(i);
  }

  std::size_t first = run.trace.size();
  while (first > 0 && is_subset(op.select(run.trace[first - 1].x), result.phi_star)) --first;
  result.t0 = run.trace[std::min(first, run.trace.size() - 1)].t;

  result.active_in_fixing = true;
  for (std::size_t k = first; k < run.trace.size(); ++k) {
    const auto& rec = run.trace[k];
    if (!rec.has_step()) continue;
    if (!std::binary_search(result.fixing.begin(), result.fixing.end(), *rec.active_index)) {
      result.active_in_fixing = false;
      result.offending_steps.push_back(rec.t);
    }
  }
  return result;
}

Certificate certify_run(const IterationRun& run, const UnionOperator& op, const std::optional<Point>& z_star,
                        const std::vector<double>& epsilon_levels, const CertifyOptions& options) {
  Certificate cert;
  cert.run_id = options.run_id;
  cert.mode = run.config.mode;
  cert.kappa = run.config.kappa;
  cert.termination = run.termination;
  cert.steps = run.steps();
  cert.final_residual = run.final_residual();
  cert.z_star = z_star;

  const Point& theta = op.set().theta();
  const Point& x0 = run.trace.empty() ? run.x0 : run.trace.front().x;
  cert.radius = (x0 - theta).norm();
  if (z_star) cert.radius = std::max(cert.radius, (*z_star - theta).norm());
  for (const auto& rec : run.trace) cert.max_dist_theta = std::max(cert.max_dist_theta, (rec.x - theta).norm());
  if (z_star) cert.bounded = cert.max_dist_theta <= 3.0 * cert.radius + options.envelope_tol;

  // Per-step decreases of the distance to z*.
  std::vector<double> decreases;
  std::vector<double> residuals;
  for (std::size_t k = 0; k + 1 < run.trace.size(); ++k) {
    const auto& rec = run.trace[k];
    if (!rec.has_step()) continue;
    residuals.push_back(rec.residual.value_or((run.trace[k + 1].x - rec.x).norm()));
    if (z_star) {
      const double d = (rec.x - *z_star).norm() - (run.trace[k + 1].x - *z_star).norm();
      decreases.push_back(d);
      if (d < -options.fejer_tol) ++cert.fejer_violations;
      cert.max_fejer_increase = std::max(cert.max_fejer_increase, -d);
    }
  }

  for (double eps : epsilon_levels) {
    EpsilonLevel level;
    level.epsilon = eps;
    for (std::size_t k = 0; k < residuals.size(); ++k) {
      if (!(residuals[k] > eps)) continue;
      ++level.large_steps;
      if (z_star) level.delta_run = level.delta_run ? std::min(*level.delta_run, decreases[k]) : decreases[k];
    }
    if (z_star && level.delta_run && *level.delta_run > 0.0) {
      level.run_exact_bound = (x0 - *z_star).norm() / *level.delta_run;
      level.identity_holds = static_cast<double>(level.large_steps) <= *level.run_exact_bound;
    }
    for (const auto& est : options.delta_estimates) {
      if (est.epsilon != eps || est.empty_region || !(est.delta_hat > 0.0)) continue;
      level.delta_hat = est.delta_hat;
      level.q_apriori = q_bound(cert.radius, est.delta_hat, cert.mode, cert.kappa);
    }
    cert.levels.push_back(level);
  }

  if (options.stabilization) cert.stabilization = detect_stabilization(run, op, options.tol_fix);
  return cert;
}

std::string format_point(const Point& x) {
  std::string out;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (i) out += ';';
    out += format_double(x(i));
  }
  return out;
}

std::string format_index_set(const IndexSet& set) {
  std::string out = "{";
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(set[i]);
  }
  return out + "}";
}

std::string format_certificate(const Certificate& cert) {
  std::ostringstream os;
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  os << "run: " << cert.run_id << '\n';
  os << "mode: " << to_string(cert.mode) << '\n';
  if (cert.mode == IterationMode::KrasnoselskiMann) os << "kappa: " << format_double(cert.kappa) << '\n';
  os << "termination: " << to_string(cert.termination) << '\n';
  os << "steps: " << cert.steps << '\n';
  os << "final_residual: " << opt(cert.final_residual) << '\n';
  os << "M: " << format_double(cert.radius) << '\n';
  os << "max_dist_theta: " << format_double(cert.max_dist_theta) << '\n';
  os << "envelope_3M: " << format_double(3.0 * cert.radius) << '\n';
  os << "z_star: " << (cert.z_star ? format_point(*cert.z_star) : "absent") << '\n';
  if (cert.bounded) os << "bounded: " << (*cert.bounded ? "true" : "false") << '\n';
  if (cert.z_star) {
    os << "fejer_violations: " << cert.fejer_violations << '\n';
    os << "max_fejer_increase: " << format_double(cert.max_fejer_increase) << '\n';
  }
  if (cert.stabilization) {
    const auto& s = *cert.stabilization;
    os << "stabilized: " << (s.stabilized ? "true" : "false") << '\n';
    if (s.stabilized) {
      os << "t0: " << s.t0 << '\n';
      os << "x_star: " << format_point(s.x_star) << '\n';
      os << "phi_star: " << format_index_set(s.phi_star) << '\n';
      os << "I1: " << format_index_set(s.fixing) << '\n';
      os << "I2: " << format_index_set(s.non_fixing) << '\n';
      os << "active_in_I1: " << (s.active_in_fixing ? "true" : "false") << '\n';
    } else {
      os << "stabilization_reason: " << s.reason << '\n';
    }
  }
  os << "epsilon,large_steps,delta_run,run_exact_bound,identity_holds,delta_hat,q_apriori\n";
  for (const auto& l : cert.levels) {
    os << format_double(l.epsilon) << ',' << l.large_steps << ',' << opt(l.delta_run) << ','
       << opt(l.run_exact_bound) << ',' << (l.identity_holds ? "true" : "false") << ',' << opt(l.delta_hat)
       << ',' << (l.q_apriori ? std::to_string(*l.q_apriori) : std::string()) << '\n';
  }
  return os.str();
}

}  // namespace paracon
