#include "paracon/engine.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace paracon {

std::string to_string(IterationMode mode) {
  return mode == IterationMode::Plain ? "plain" : "km";
}

std::string to_string(LambdaSchedule::Kind kind) {
  switch (kind) {
    case LambdaSchedule::Kind::Constant: return "constant";
    case LambdaSchedule::Kind::Periodic: return "periodic";
    case LambdaSchedule::Kind::SeededUniform: return "seeded-uniform";
  }
  return "unknown";
}

std::string to_string(Termination termination) {
  switch (termination) {
    case Termination::Converged: return "converged";
    case Termination::MaxIter: return "max_iter";
    case Termination::Error: return "error";
  }
  return "unknown";
}

namespace {

bool strictly_inside(double lambda, double kappa) { return lambda > kappa && lambda < 1.0 - kappa; }

std::string lambda_message(double lambda, double kappa) {
  std::ostringstream os;
  os << "lambda " << lambda << " must lie strictly inside (kappa, 1 - kappa) = (" << kappa << ", "
     << 1.0 - kappa << ")";
  return os.str();
}

void require_kappa(double kappa) {
  if (!(kappa > 0.0 && kappa < 0.5)) throw PreconditionError("kappa must lie in (0, 0.5)");
}

}  // namespace

LambdaGenerator::LambdaGenerator(LambdaSchedule schedule, double kappa)
    : schedule_(std::move(schedule)), kappa_(kappa), rng_(schedule_.seed) {
  require_kappa(kappa_);
  if (schedule_.kind == LambdaSchedule::Kind::Periodic && schedule_.values.empty())
    throw PreconditionError("periodic lambda schedule needs at least one value");
}

double LambdaGenerator::next() {
  double lambda = 0.0;
  switch (schedule_.kind) {
    case LambdaSchedule::Kind::Constant:
      lambda = schedule_.value;
      break;
    case LambdaSchedule::Kind::Periodic:
      lambda = schedule_.values[step_ % schedule_.values.size()];
      break;
    case LambdaSchedule::Kind::SeededUniform: {
      std::uniform_real_distribution<double> dist(kappa_, 1.0 - kappa_);
      do lambda = dist(rng_);
      while (!strictly_inside(lambda, kappa_));
      break;
    }
  }
  ++step_;
  if (!strictly_inside(lambda, kappa_)) throw PreconditionError(lambda_message(lambda, kappa_));
  return lambda;
}

void IterationConfig::validate() const {
  require_kappa(kappa);
  if (!(tol_residual >= 0.0)) throw PreconditionError("tol_residual must be >= 0");
  if (stall_window == 0) throw PreconditionError("stall_window must be >= 1");
  if (mode != IterationMode::KrasnoselskiMann) return;
  switch (lambda.kind) {
    case LambdaSchedule::Kind::Constant:
      if (!strictly_inside(lambda.value, kappa)) throw PreconditionError(lambda_message(lambda.value, kappa));
      break;
    case LambdaSchedule::Kind::Periodic:
      if (lambda.values.empty()) throw PreconditionError("periodic lambda schedule needs at least one value");
      for (double v : lambda.values)
        if (!strictly_inside(v, kappa)) throw PreconditionError(lambda_message(v, kappa));
      break;
    case LambdaSchedule::Kind::SeededUniform:
      break;
  }
}

std::optional<double> IterationRun::final_residual() const {
  for (auto it = trace.rbegin(); it != trace.rend(); ++it)
    if (it->residual) return it->residual;
  return std::nullopt;
}

namespace {

IterationRun iterate(const UnionOperator& op, const Point& x0, const IterationConfig& cfg,
                     const std::optional<Point>& z_star, bool relaxed) {
  cfg.validate();
  require_dimension(x0, op.dimension(), "run: x0");
  if (!is_finite(x0)) throw PreconditionError("x0 must be finite");
  if (!op.set().contains(x0)) throw PreconditionError("x0 must lie in C");
  if (z_star) require_dimension(*z_star, op.dimension(), "run: z_star");
  if (relaxed && !op.set().is_convex()) throw PreconditionError("KM iteration needs a convex C");

  IterationRun run;
  run.config = cfg;
  run.x0 = x0;

  Selector selector(cfg.policy);
  std::optional<LambdaGenerator> lambdas;
  if (relaxed) lambdas.emplace(cfg.lambda, cfg.kappa);

  auto dist = [&](const Point& x) -> std::optional<double> {
    if (!z_star) return std::nullopt;
    return (x - *z_star).norm();
  };

  Point x = x0;
  std::size_t small_steps = 0;
  bool converged = false;
  std::size_t t = 0;
  for (; t < cfg.max_iter; ++t) {
    Image chosen = selector.choose(op, x);
    TraceRecord record;
    record.t = t;
    record.active_index = chosen.index;
    record.dist_to_zstar = dist(x);
    Point next;
    if (relaxed) {
      const double lambda = lambdas->next();
      record.lambda = lambda;
      next = (1.0 - lambda) * x + lambda * chosen.point;
    } else {
      next = std::move(chosen.point);
    }
    if (!is_finite(next)) {
      record.x = x;
      run.trace.push_back(std::move(record));
      run.termination = Termination::Error;
      std::ostringstream os;
      os << "non-finite iterate produced at t=" << t;
      throw IterationError(os.str(), std::move(run));
    }
    const double residual = (next - x).norm();
    record.residual = residual;
    record.x = std::move(x);
    run.trace.push_back(std::move(record));
    x = std::move(next);

    if (residual == 0.0 && selector.deterministic()) {
      ++t;
      converged = true;
      break;
    }
    small_steps = residual <= cfg.tol_residual ? small_steps + 1 : 0;
    if (small_steps >= cfg.stall_window) {
      ++t;
      converged = true;
      break;
    }
  }
  TraceRecord last;
  last.t = t;
  last.dist_to_zstar = dist(x);
  last.x = std::move(x);
  run.trace.push_back(std::move(last));
  run.termination = converged ? Termination::Converged : Termination::MaxIter;
  return run;
}

}  // namespace

IterationRun run_plain(const UnionOperator& op, const Point& x0, const IterationConfig& cfg,
                       const std::optional<Point>& z_star) {
  if (cfg.mode != IterationMode::Plain) throw PreconditionError("run_plain: config mode must be plain");
  return iterate(op, x0, cfg, z_star, false);
}

IterationRun run_km(const UnionOperator& op, const Point& x0, const IterationConfig& cfg,
                    const std::optional<Point>& z_star) {
  if (cfg.mode != IterationMode::KrasnoselskiMann) throw PreconditionError("run_km: config mode must be km");
  return iterate(op, x0, cfg, z_star, true);
}

IterationRun run_iteration(const UnionOperator& op, const Point& x0, const IterationConfig& cfg,
                           const std::optional<Point>& z_star) {
  return cfg.mode == IterationMode::Plain ? run_plain(op, x0, cfg, z_star) : run_km(op, x0, cfg, z_star);
}

Termination classify_trace(const std::vector<TraceRecord>& trace, const IterationConfig& cfg) {
  std::vector<double> residuals;
  for (const auto& r : trace)
    if (r.residual) residuals.push_back(*r.residual);
  if (residuals.empty()) return Termination::MaxIter;
  if (residuals.back() == 0.0 && cfg.policy.kind != PolicyKind::SeededRandom) return Termination::Converged;
  if (residuals.size() < cfg.stall_window) return Termination::MaxIter;
  for (std::size_t k = residuals.size() - cfg.stall_window; k < residuals.size(); ++k)
    if (residuals[k] > cfg.tol_residual) return Termination::MaxIter;
  return Termination::Converged;
}

ResidualIdentityReport residual_identity_check(const IterationRun& run, const UnionOperator& op, double tol) {
  ResidualIdentityReport report;
  for (std::size_t k = 0; k + 1 < run.trace.size(); ++k) {
    const TraceRecord& rec = run.trace[k];
    if (!rec.has_step()) continue;
    const Point& next = run.trace[k + 1].x;
    const double lambda = rec.lambda.value_or(1.0);
    const double step = (next - rec.x).norm();
    const double branch_move = (op.image(*rec.active_index, rec.x) - rec.x).norm();
    const double error = std::abs(step - lambda * branch_move);
    ++report.checked;
    report.max_error = std::max(report.max_error, error);
    if (!(error <= tol) && report.passed) {
      report.passed = false;
      report.first_failure = rec.t;
    }
  }
  return report;
}

std::string format_double(double value) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return {buffer, result.ptr};
}

double parse_double(const std::string& text) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  if (first != last && *first == '+') ++first;
  const auto result = std::from_chars(first, last, value);
  if (result.ec != std::errc() || result.ptr != last)
    throw std::invalid_argument("not a number: '" + text + "'");
  return value;
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace) {
  out << kTraceHeader << '\n';
  for (const auto& r : trace) {
    out << r.t << ',';
    for (Eigen::Index i = 0; i < r.x.size(); ++i) out << (i ? ";" : "") << format_double(r.x(i));
    out << ',';
    if (r.active_index) out << *r.active_index;
    out << ',';
    if (r.residual) out << format_double(*r.residual);
    out << ',';
    if (r.lambda) out << format_double(*r.lambda);
    out << ',';
    if (r.dist_to_zstar) out << format_double(*r.dist_to_zstar);
    out << '\n';
  }
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, sep)) fields.push_back(field);
  if (!line.empty() && line.back() == sep) fields.emplace_back();
  return fields;
}

std::optional<double> optional_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return parse_double(s);
}

}  // namespace

std::vector<TraceRecord> read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader)
    throw std::invalid_argument("trace: missing or unexpected header");
  std::vector<TraceRecord> trace;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != 6)
      throw std::invalid_argument("trace line " + std::to_string(line_no) + ": expected 6 fields");
    try {
      TraceRecord r;
      r.t = std::stoull(fields[0]);
      const auto coords = split(fields[1], ';');
      r.x.resize(static_cast<Eigen::Index>(coords.size()));
      for (std::size_t i = 0; i < coords.size(); ++i) r.x(static_cast<Eigen::Index>(i)) = parse_double(coords[i]);
      if (!fields[2].empty()) r.active_index = std::stoull(fields[2]);
      r.residual = optional_double(fields[3]);
      r.lambda = optional_double(fields[4]);
      r.dist_to_zstar = optional_double(fields[5]);
      trace.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw std::invalid_argument("trace line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return trace;
}

}  // namespace paracon
