#include "paracon/cli/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace paracon::cli {

using nlohmann::json;

namespace {

/// A JSON value together with its path for diagnostics.
class Node {
 public:
  Node(const json& value, std::string path) : value_(&value), path_(std::move(path)) {}

  [[nodiscard]] const std::string& path() const { return path_; }

  [[noreturn]] void fail(const std::string& message) const {
    throw ConfigError((path_.empty() ? "/" : path_) + ": " + message);
  }

  void require_object(std::initializer_list<const char*> allowed) const {
    if (!value_->is_object()) fail("expected an object");
    for (const auto& [key, _] : value_->items()) {
      if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
        Node(*value_, path_ + "/" + key).fail("unknown key");
    }
  }

  [[nodiscard]] std::optional<Node> get(const char* key) const {
    const auto it = value_->find(key);
    if (it == value_->end()) return std::nullopt;
    return Node(*it, path_ + "/" + key);
  }

  [[nodiscard]] Node at(const char* key) const {
    auto node = get(key);
    if (!node) fail(std::string("missing key '") + key + "'");
    return *node;
  }

  [[nodiscard]] std::vector<Node> elements() const {
    if (!value_->is_array()) fail("expected an array");
    std::vector<Node> out;
    for (std::size_t i = 0; i < value_->size(); ++i) out.emplace_back((*value_)[i], path_ + "/" + std::to_string(i));
    return out;
  }

  [[nodiscard]] double number() const {
    if (!value_->is_number()) fail("expected a number");
    return value_->get<double>();
  }

  [[nodiscard]] std::uint64_t unsigned_int() const {
    if (!value_->is_number_unsigned()) fail("expected a non-negative integer");
    return value_->get<std::uint64_t>();
  }

  [[nodiscard]] std::size_t count() const { return static_cast<std::size_t>(unsigned_int()); }

  [[nodiscard]] bool boolean() const {
    if (!value_->is_boolean()) fail("expected true or false");
    return value_->get<bool>();
  }

  [[nodiscard]] std::string string() const {
    if (!value_->is_string()) fail("expected a string");
    return value_->get<std::string>();
  }

  [[nodiscard]] std::vector<double> numbers() const {
    std::vector<double> out;
    for (const auto& e : elements()) out.push_back(e.number());
    return out;
  }

  [[nodiscard]] Point point() const {
    const auto values = numbers();
    if (values.empty()) fail("expected a nonempty vector");
    return Eigen::Map<const Point>(values.data(), static_cast<Eigen::Index>(values.size()));
  }

  [[nodiscard]] Matrix matrix() const {
    const auto rows = elements();
    if (rows.empty()) fail("expected a nonempty matrix");
    std::vector<Point> parsed;
    for (const auto& r : rows) parsed.push_back(r.point());
    Matrix a(static_cast<Eigen::Index>(parsed.size()), parsed.front().size());
    for (std::size_t i = 0; i < parsed.size(); ++i) {
      if (parsed[i].size() != a.cols()) rows[i].fail("row length differs from the first row");
      a.row(static_cast<Eigen::Index>(i)) = parsed[i].transpose();
    }
    return a;
  }

  template <class F>
  auto guarded(F&& f) const -> decltype(f()) {
    try {
      return f();
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      fail(e.what());
    }
  }

 private:
  const json* value_;
  std::string path_;
};

template <class Enum, std::size_t N>
Enum parse_enum(const Node& node, const std::array<Enum, N>& options) {
  const std::string name = node.string();
  for (Enum e : options)
    if (to_string(e) == name) return e;
  std::string allowed;
  for (Enum e : options) allowed += (allowed.empty() ? "" : ", ") + to_string(e);
  node.fail("unknown value '" + name + "' (expected one of " + allowed + ")");
}

ConstraintSet parse_set(const Node& node) {
  node.require_object({"kind", "n", "lower", "upper", "center", "radius", "A", "b", "theta"});
  const std::string kind = node.at("kind").string();
  auto set = node.guarded([&] {
    if (kind == "whole-space") return ConstraintSet::whole_space(node.at("n").count());
    if (kind == "box") return ConstraintSet::box(node.at("lower").point(), node.at("upper").point());
    if (kind == "ball") return ConstraintSet::ball(node.at("center").point(), node.at("radius").number());
    if (kind == "affine") return ConstraintSet::affine(node.at("A").matrix(), node.at("b").point());
    if (kind == "halfspaces") return ConstraintSet::halfspaces(node.at("A").matrix(), node.at("b").point());
    node.at("kind").fail("unknown set kind '" + kind + "'");
  });
  if (auto theta = node.get("theta")) set = theta->guarded([&] { return set.with_theta(theta->point()); });
  return set;
}

Paracontraction parse_operator(const Node& node) {
  node.require_object({"kind", "set", "n", "support", "factor", "center", "parts", "alpha"});
  const std::string kind = node.at("kind").string();
  return node.guarded([&] {
    if (kind == "projection") return Paracontraction::projection(parse_set(node.at("set")));
    if (kind == "coordinate-projection") {
      std::vector<std::size_t> support;
      for (const auto& e : node.at("support").elements()) support.push_back(e.count());
      return Paracontraction::coordinate_projection(node.at("n").count(), std::move(support));
    }
    if (kind == "scaling") return Paracontraction::scaling(node.at("factor").number(), node.at("center").point());
    if (kind == "strict-contraction")
      return Paracontraction::strict_contraction(node.at("factor").number(), node.at("center").point());
    if (kind == "identity") return Paracontraction::identity(node.at("n").count());
    if (kind == "averaged-composition") {
      std::vector<Paracontraction> parts;
      for (const auto& e : node.at("parts").elements()) parts.push_back(parse_operator(e));
      const double alpha = node.get("alpha") ? node.at("alpha").number() : 1.0;
      return Paracontraction::averaged_composition(std::move(parts), alpha);
    }
    node.at("kind").fail("unknown operator kind '" + kind + "'");
  });
}

ProblemConfig parse_problem(const Node& node) {
  node.require_object({"builtin", "n", "k", "s", "count", "seed", "seeds", "operators", "constraint_set", "x0",
                       "z_star", "starts"});
  ProblemConfig p;
  if (auto b = node.get("builtin")) {
    p.builtin = b->string();
    static const std::set<std::string> known{"halving", "two-branch", "sparse-affine", "convex-feasibility"};
    if (!known.count(p.builtin)) b->fail("unknown builtin '" + p.builtin + "'");
  }
  if (auto v = node.get("n")) p.n = v->count();
  if (auto v = node.get("k")) p.k = v->count();
  if (auto v = node.get("s")) p.s = v->count();
  if (auto v = node.get("count")) p.count = v->count();
  if (node.get("seed") && node.get("seeds")) node.fail("give either 'seed' or 'seeds'");
  if (auto v = node.get("seed")) p.seeds = {v->unsigned_int()};
  if (auto v = node.get("seeds")) {
    p.seeds.clear();
    for (const auto& e : v->elements()) p.seeds.push_back(e.unsigned_int());
    if (p.seeds.empty()) v->fail("expected at least one seed");
  }
  if (auto v = node.get("operators")) {
    if (!p.builtin.empty()) v->fail("operators are only allowed without 'builtin'");
    for (const auto& e : v->elements()) p.operators.push_back(parse_operator(e));
  }
  if (auto v = node.get("constraint_set")) {
    if (!p.builtin.empty()) v->fail("constraint_set is only allowed without 'builtin'");
    p.constraint_set = parse_set(*v);
  }
  if (auto v = node.get("x0"))
    for (const auto& e : v->elements()) p.x0.push_back(e.point());
  if (auto v = node.get("z_star")) {
    if (!p.builtin.empty()) v->fail("z_star is only allowed without 'builtin'");
    p.z_star = v->point();
  }
  if (auto v = node.get("starts"))
    for (const auto& e : v->elements()) p.starts.push_back(e.count());

  if (p.builtin.empty()) {
    if (p.operators.empty()) node.fail("need 'builtin' or a nonempty 'operators' list");
    if (p.x0.empty()) node.fail("inline problems need 'x0'");
  }
  if (p.builtin == "sparse-affine" && (p.n == 0 || p.k == 0 || p.s == 0)) node.fail("sparse-affine needs n, k and s");
  if (p.builtin == "convex-feasibility" && (p.n == 0 || p.count == 0)) node.fail("convex-feasibility needs n and count");
  return p;
}

SelectionFunction parse_selection(const Node& node) {
  node.require_object({"kind", "tau_tie", "sparsity"});
  SelectionFunction phi;
  phi.kind = parse_enum(node.at("kind"), std::array{SelectionKind::ConstantFull, SelectionKind::NearestOperators,
                                                    SelectionKind::SparseSupport});
  if (auto v = node.get("tau_tie")) {
    phi.tau_tie = v->number();
    if (!(phi.tau_tie >= 0.0)) v->fail("tau_tie must be >= 0");
  }
  if (auto v = node.get("sparsity")) phi.sparsity = v->count();
  return phi;
}

LambdaSchedule parse_lambda(const Node& node) {
  node.require_object({"kind", "value", "values", "seed"});
  LambdaSchedule schedule;
  schedule.kind = parse_enum(node.at("kind"), std::array{LambdaSchedule::Kind::Constant, LambdaSchedule::Kind::Periodic,
                                                         LambdaSchedule::Kind::SeededUniform});
  if (auto v = node.get("value")) schedule.value = v->number();
  if (auto v = node.get("values")) schedule.values = v->numbers();
  if (auto v = node.get("seed")) schedule.seed = v->unsigned_int();
  return schedule;
}

void parse_iteration(const Node& node, IterationConfig& cfg) {
  node.require_object({"mode", "kappa", "lambda", "max_iter", "tol_residual", "stall_window"});
  if (auto v = node.get("mode"))
    cfg.mode = parse_enum(*v, std::array{IterationMode::Plain, IterationMode::KrasnoselskiMann});
  if (auto v = node.get("kappa")) cfg.kappa = v->number();
  if (auto v = node.get("lambda")) cfg.lambda = parse_lambda(*v);
  if (auto v = node.get("max_iter")) cfg.max_iter = v->count();
  if (auto v = node.get("tol_residual")) cfg.tol_residual = v->number();
  if (auto v = node.get("stall_window")) cfg.stall_window = v->count();
}

void parse_policy(const Node& node, SelectionPolicy& policy) {
  node.require_object({"kind", "seed"});
  policy.kind = parse_enum(node.at("kind"),
                           std::array{PolicyKind::FirstIndex, PolicyKind::GreedyMinMove, PolicyKind::SeededRandom});
  if (auto v = node.get("seed")) policy.seed = v->unsigned_int();
}

AnalysisConfig parse_analysis(const Node& node) {
  node.require_object({"epsilon", "delta_samples", "delta_sampling", "seed", "tol_fix", "stabilization", "a2_samples",
                       "a2_max_operators", "a3_points", "a3_probes", "a3_radii", "radius"});
  AnalysisConfig a;
  if (auto v = node.get("epsilon")) {
    a.epsilons = v->numbers();
    for (double e : a.epsilons)
      if (!(e > 0.0)) v->fail("epsilon levels must be > 0");
  }
  if (auto v = node.get("delta_samples")) a.delta_samples = v->count();
  if (auto v = node.get("delta_sampling")) {
    const std::string s = v->string();
    if (s == "random") a.sampling = DeltaSampling::Random;
    else if (s == "grid") a.sampling = DeltaSampling::Grid;
    else v->fail("expected 'random' or 'grid'");
  }
  if (auto v = node.get("seed")) a.seed = v->unsigned_int();
  if (auto v = node.get("tol_fix")) a.tol_fix = v->number();
  if (auto v = node.get("stabilization")) a.stabilization = v->boolean();
  if (auto v = node.get("a2_samples")) a.a2_samples = v->count();
  if (auto v = node.get("a2_max_operators")) a.a2_max_operators = v->count();
  if (auto v = node.get("a3_points")) a.a3_points = v->count();
  if (auto v = node.get("a3_probes")) a.a3_probes = v->count();
  if (auto v = node.get("a3_radii")) a.a3_radii = v->numbers();
  if (auto v = node.get("radius")) {
    a.radius = v->number();
    if (!(*a.radius > 0.0)) v->fail("radius must be > 0");
  }
  return a;
}

OutputConfig parse_output(const Node& node) {
  node.require_object({"directory", "formats"});
  OutputConfig out;
  if (auto v = node.get("directory")) out.directory = v->string();
  if (auto v = node.get("formats")) {
    out.csv = out.text = out.json = false;
    for (const auto& e : v->elements()) {
      const std::string f = e.string();
      if (f == "csv") out.csv = true;
      else if (f == "txt") out.text = true;
      else if (f == "json") out.json = true;
      else e.fail("unknown format '" + f + "' (expected csv, txt or json)");
    }
  }
  return out;
}

std::string instance_tag(const ProblemInstance& inst, const RunConfig& config) {
  if (config.problem.builtin.empty() || config.problem.builtin == "halving" || config.problem.builtin == "two-branch")
    return inst.name;
  return inst.name + "-seed" + std::to_string(inst.seed);
}

}  // namespace

RunConfig parse_config(const json& doc) {
  const Node root(doc, "");
  root.require_object({"problem", "selection", "policy", "iteration", "analysis", "output"});
  RunConfig config;
  config.problem = parse_problem(root.at("problem"));
  if (auto v = root.get("selection")) config.selection = parse_selection(*v);
  if (auto v = root.get("policy")) parse_policy(*v, config.iteration.policy);
  if (auto v = root.get("iteration")) {
    parse_iteration(*v, config.iteration);
    v->guarded([&] { config.iteration.validate(); });
  } else {
    config.iteration.validate();
  }
  if (auto v = root.get("analysis")) config.analysis = parse_analysis(*v);
  if (auto v = root.get("output")) config.output = parse_output(*v);
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(doc);
}

void override_seed(RunConfig& config, std::uint64_t seed) {
  config.problem.seeds = {seed};
  config.iteration.policy.seed = seed;
  config.iteration.lambda.seed = seed;
  config.analysis.seed = seed;
}

std::vector<ProblemInstance> build_instances(const RunConfig& config) {
  const auto& p = config.problem;
  std::vector<ProblemInstance> instances;
  auto generated = [&](std::uint64_t seed) -> ProblemInstance {
    if (p.builtin == "halving") return make_toy_1d(ToyKind::Halving);
    if (p.builtin == "two-branch") return make_toy_1d(ToyKind::TwoBranch);
    if (p.builtin == "sparse-affine") return make_sparse_affine_feasibility(p.n, p.k, p.s, seed);
    if (p.builtin == "convex-feasibility") {
      Rng rng(seed);
      const Point anchor = sample_uniform_ball(Point::Zero(static_cast<Eigen::Index>(p.n)), 1.0, rng);
      return make_convex_feasibility("convex-feasibility-n" + std::to_string(p.n), random_halfspaces_through(anchor, p.count, seed),
                                     SelectionFunction::constant_full(), anchor, seed);
    }
    const std::size_t n = p.operators.front().dimension();
    const ConstraintSet set = p.constraint_set.value_or(ConstraintSet::whole_space(n));
    return {"inline",
            0,
            UnionOperator(std::make_shared<ExplicitFamily>(p.operators), SelectionFunction::constant_full(), set),
            p.x0,
            p.z_star,
            p.z_star.has_value(),
            std::nullopt};
  };

  const bool seeded = p.builtin == "sparse-affine" || p.builtin == "convex-feasibility";
  const std::vector<std::uint64_t> seeds = seeded ? p.seeds : std::vector<std::uint64_t>{0};
  for (std::uint64_t seed : seeds) {
    ProblemInstance inst = [&] {
      try {
        return generated(seed);
      } catch (const std::exception& e) {
        throw ConfigError(std::string("/problem: ") + e.what());
      }
    }();
    if (config.selection) {
      SelectionFunction phi = *config.selection;
      if (inst.sparse) {
        if (phi.kind != SelectionKind::SparseSupport)
          throw ConfigError("/selection/kind: sparse-affine problems need sparse-support selection");
        if (phi.sparsity == 0) phi.sparsity = inst.sparse->sparsity;
        if (phi.sparsity != inst.sparse->sparsity)
          throw ConfigError("/selection/sparsity: must equal the problem's s");
      } else if (phi.kind == SelectionKind::SparseSupport) {
        throw ConfigError("/selection/kind: sparse-support needs a sparse-affine problem");
      }
      inst.op = UnionOperator(inst.op.family_ptr(), phi, inst.op.set());
    }
    if (!p.x0.empty() && !p.builtin.empty()) inst.x0_candidates = p.x0;
    if (inst.z_star && inst.z_star_strong) {
      if (static_cast<std::size_t>(inst.z_star->size()) != inst.dimension())
        throw ConfigError("/problem/z_star: dimension mismatch");
      for (std::size_t i = 0; i < inst.op.size(); ++i)
        if ((inst.op.image(i, *inst.z_star) - *inst.z_star).norm() > config.analysis.tol_fix)
          throw ConfigError("/problem/z_star: not fixed by operator " + inst.op.family().label(i));
    }
    instances.push_back(std::move(inst));
  }
  return instances;
}

std::vector<RunTask> plan_runs(const RunConfig& config, const std::vector<ProblemInstance>& instances) {
  std::vector<RunTask> tasks;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& inst = instances[i];
    std::vector<std::size_t> starts = config.problem.starts;
    if (starts.empty()) {
      starts.resize(inst.x0_candidates.size());
      for (std::size_t k = 0; k < starts.size(); ++k) starts[k] = k;
    }
    for (std::size_t k : starts) {
      if (k >= inst.x0_candidates.size())
        throw ConfigError("/problem/starts: index " + std::to_string(k) + " exceeds the " +
                          std::to_string(inst.x0_candidates.size()) + " start candidates");
      const Point& x0 = inst.x0_candidates[k];
      if (static_cast<std::size_t>(x0.size()) != inst.dimension())
        throw ConfigError("/problem/x0/" + std::to_string(k) + ": dimension mismatch");
      if (!inst.op.set().contains(x0)) throw ConfigError("/problem/x0/" + std::to_string(k) + ": x0 must lie in C");
      tasks.push_back({instance_tag(inst, config) + "-x" + std::to_string(k), i, x0});
    }
  }
  return tasks;
}

json point_to_json(const Point& x) {
  json out = json::array();
  for (Eigen::Index i = 0; i < x.size(); ++i) out.push_back(x(i));
  return out;
}

namespace {

json matrix_to_json(const Matrix& a) {
  json out = json::array();
  for (Eigen::Index r = 0; r < a.rows(); ++r) out.push_back(point_to_json(a.row(r).transpose()));
  return out;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

json set_to_json(const ConstraintSet& set) {
  json out{{"kind", to_string(set.kind())}};
  switch (set.kind()) {
    case SetKind::WholeSpace: out["n"] = set.dimension(); break;
    case SetKind::Box:
      out["lower"] = point_to_json(set.lower());
      out["upper"] = point_to_json(set.upper());
      break;
    case SetKind::Ball:
      out["center"] = point_to_json(set.center());
      out["radius"] = set.radius();
      break;
    case SetKind::Affine:
    case SetKind::Halfspaces:
      out["A"] = matrix_to_json(set.matrix());
      out["b"] = point_to_json(set.rhs());
      break;
  }
  out["theta"] = point_to_json(set.theta());
  return out;
}

json operator_to_json(const Paracontraction& op) {
  json out{{"kind", to_string(op.kind())}};
  switch (op.kind()) {
    case OperatorKind::Projection: out["set"] = set_to_json(op.set()); break;
    case OperatorKind::CoordinateProjection:
      out["n"] = op.dimension();
      out["support"] = op.support();
      break;
    case OperatorKind::Scaling:
      out["factor"] = op.factor();
      out["center"] = point_to_json(op.center());
      break;
    case OperatorKind::Averaged: {
      json parts = json::array();
      for (const auto& part : op.parts()) parts.push_back(operator_to_json(part));
      out["parts"] = std::move(parts);
      out["alpha"] = op.alpha();
      break;
    }
  }
  return out;
}

json selection_to_json(const SelectionFunction& phi) {
  json out{{"kind", to_string(phi.kind)}, {"tau_tie", phi.tau_tie}};
  if (phi.kind == SelectionKind::SparseSupport) out["sparsity"] = phi.sparsity;
  return out;
}

json instance_to_json(const ProblemInstance& instance) {
  json problem;
  if (instance.sparse) {
    problem = {{"builtin", "sparse-affine"},
               {"n", instance.dimension()},
               {"k", static_cast<std::size_t>(instance.sparse->a.rows())},
               {"s", instance.sparse->sparsity},
               {"seed", instance.seed}};
  } else {
    json ops = json::array();
    for (std::size_t i = 0; i < instance.op.size(); ++i) ops.push_back(operator_to_json(instance.op.family().at(i)));
    problem["operators"] = std::move(ops);
    problem["constraint_set"] = set_to_json(instance.op.set());
    if (instance.z_star && instance.z_star_strong) problem["z_star"] = point_to_json(*instance.z_star);
  }
  json starts = json::array();
  for (const auto& x0 : instance.x0_candidates) starts.push_back(point_to_json(x0));
  problem["x0"] = std::move(starts);
  return {{"problem", std::move(problem)}, {"selection", selection_to_json(instance.op.selection())}};
}

json certificate_to_json(const Certificate& cert) {
  json out{{"run", cert.run_id},
           {"mode", to_string(cert.mode)},
           {"termination", to_string(cert.termination)},
           {"steps", cert.steps},
           {"final_residual", optional_number(cert.final_residual)},
           {"M", cert.radius},
           {"max_dist_theta", cert.max_dist_theta},
           {"envelope_3M", 3.0 * cert.radius},
           {"z_star", cert.z_star ? point_to_json(*cert.z_star) : json(nullptr)}};
  if (cert.mode == IterationMode::KrasnoselskiMann) out["kappa"] = cert.kappa;
  if (cert.bounded) out["bounded"] = *cert.bounded;
  if (cert.z_star) {
    out["fejer_violations"] = cert.fejer_violations;
    out["max_fejer_increase"] = cert.max_fejer_increase;
  }
  if (cert.stabilization) {
    const auto& s = *cert.stabilization;
    json stab{{"stabilized", s.stabilized}};
    if (s.stabilized) {
      stab["t0"] = s.t0;
      stab["x_star"] = point_to_json(s.x_star);
      stab["phi_star"] = s.phi_star;
      stab["I1"] = s.fixing;
      stab["I2"] = s.non_fixing;
      stab["active_in_I1"] = s.active_in_fixing;
      stab["offending_steps"] = s.offending_steps;
    } else {
      stab["reason"] = s.reason;
    }
    out["stabilization"] = std::move(stab);
  }
  json levels = json::array();
  for (const auto& l : cert.levels) {
    levels.push_back({{"epsilon", l.epsilon},
                      {"large_steps", l.large_steps},
                      {"delta_run", optional_number(l.delta_run)},
                      {"run_exact_bound", optional_number(l.run_exact_bound)},
                      {"identity_holds", l.identity_holds},
                      {"delta_hat", optional_number(l.delta_hat)},
                      {"q_apriori", l.q_apriori ? json(*l.q_apriori) : json(nullptr)}});
  }
  out["levels"] = std::move(levels);
  return out;
}

}  // namespace paracon::cli
