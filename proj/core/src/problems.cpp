#include "paracon/problems.hpp"

#include <algorithm>
#include <numeric>

namespace paracon {

namespace {

constexpr int kSparseAttempts = 10;

Point random_unit(std::size_t n, Rng& rng) {
  return sample_uniform_ball(Point::Zero(static_cast<Eigen::Index>(n)), 1.0, rng).normalized();
}

}  // namespace

ProblemInstance make_sparse_affine_feasibility(std::size_t n, std::size_t k, std::size_t s, std::uint64_t seed) {
  if (!(s >= 1 && s < n)) throw std::invalid_argument("sparse feasibility: need 1 <= s < n");
  if (!(k >= 1 && k < n)) throw std::invalid_argument("sparse feasibility: need 1 <= k < n");

  for (int attempt = 0; attempt < kSparseAttempts; ++attempt) {
    const std::uint64_t attempt_seed = seed + static_cast<std::uint64_t>(attempt);
    Rng rng(attempt_seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> magnitude(1.0, 2.0);
    std::bernoulli_distribution sign(0.5);

    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), 0);
    std::shuffle(coords.begin(), coords.end(), rng);
    IndexSet support(coords.begin(), coords.begin() + static_cast<std::ptrdiff_t>(s));
    std::sort(support.begin(), support.end());

    Point planted = Point::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t j : support) planted(static_cast<Eigen::Index>(j)) = (sign(rng) ? 1.0 : -1.0) * magnitude(rng);

    Matrix a(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n));
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
      for (Eigen::Index c = 0; c < a.cols(); ++c) a(r, c) = gauss(rng);
      a.row(r).normalize();
    }

    Eigen::JacobiSVD<Matrix> svd(a);
    const auto& sv = svd.singularValues();
    if (sv(sv.size() - 1) < 1e-8 * sv(0)) continue;
    Matrix restricted(a.rows(), static_cast<Eigen::Index>(s));
    for (std::size_t i = 0; i < s; ++i) restricted.col(static_cast<Eigen::Index>(i)) = a.col(static_cast<Eigen::Index>(support[i]));
    Eigen::JacobiSVD<Matrix> svd_restricted(restricted);
    const auto& rsv = svd_restricted.singularValues();
    if (rsv(rsv.size() - 1) < 1e-8 * rsv(0)) continue;

    const Point b = a * planted;
    auto affine = Paracontraction::projection(ConstraintSet::affine(a, b));
    auto family = std::make_shared<SupportFamily>(n, s, affine);

    std::vector<Point> starts{planted};
    for (double r : {0.01, 0.05, 0.1}) starts.push_back(planted + r * random_unit(n, rng));

    ProblemInstance inst{
        "sparse-affine-n" + std::to_string(n) + "-k" + std::to_string(k) + "-s" + std::to_string(s),
        attempt_seed,
        UnionOperator(family, SelectionFunction::sparse_support(s), ConstraintSet::whole_space(n)),
        std::move(starts),
        planted,
        false,
        SparseMetadata{a, b, s, planted, support}};
    return inst;
  }
  throw std::runtime_error("sparse feasibility: degenerate matrix after 10 attempts");
}

ProblemInstance make_convex_feasibility(std::string name, std::vector<ConstraintSet> sets,
                                        SelectionFunction selection, Point common_point, std::uint64_t seed) {
  if (sets.empty()) throw std::invalid_argument("convex feasibility: no sets");
  const std::size_t n = sets.front().dimension();
  require_dimension(common_point, n, "convex feasibility: common point");
  std::vector<Paracontraction> ops;
  for (auto& set : sets) {
    if (!set.contains(common_point, 1e-12))
      throw std::invalid_argument("convex feasibility: common point outside " + set.describe());
    ops.push_back(Paracontraction::projection(std::move(set)));
  }
  Rng rng(seed);
  std::vector<Point> starts;
  for (double r : {0.5, 2.0, 5.0}) starts.push_back(common_point + r * random_unit(n, rng));

  ProblemInstance inst{std::move(name),
                       seed,
                       UnionOperator(std::make_shared<ExplicitFamily>(std::move(ops)), selection,
                                     ConstraintSet::whole_space(n)),
                       std::move(starts),
                       common_point,
                       true,
                       std::nullopt};
  return inst;
}

std::vector<ConstraintSet> random_halfspaces_through(const Point& p, std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<ConstraintSet> sets;
  const auto n = static_cast<std::size_t>(p.size());
  for (std::size_t i = 0; i < count; ++i) {
    const Point normal = random_unit(n, rng);
    Matrix a = normal.transpose();
    Point b(1);
    b(0) = normal.dot(p);
    sets.push_back(ConstraintSet::halfspaces(std::move(a), std::move(b)));
  }
  return sets;
}

ProblemInstance make_toy_1d(ToyKind kind) {
  const Point zero = Point::Zero(1);
  const Point one = Point::Ones(1);
  const Point eight = Point::Constant(1, 8.0);
  if (kind == ToyKind::Halving) {
    auto family = std::make_shared<ExplicitFamily>(std::vector{Paracontraction::strict_contraction(0.5, zero)});
    return {"halving", 0,
            UnionOperator(family, SelectionFunction::constant_full(), ConstraintSet::whole_space(1)),
            {eight}, zero, true, std::nullopt};
  }
  auto family = std::make_shared<ExplicitFamily>(std::vector{
      Paracontraction::strict_contraction(0.5, zero), Paracontraction::strict_contraction(0.5, one)});
  return {"two-branch", 0,
          UnionOperator(family, SelectionFunction::nearest_operators(), ConstraintSet::whole_space(1)),
          {eight}, std::nullopt, false, std::nullopt};
}

std::vector<ZooEntry> operator_zoo() {
  std::vector<ZooEntry> zoo;
  const auto r2 = ConstraintSet::whole_space(2);
  const auto r3 = ConstraintSet::whole_space(3);

  const auto box = ConstraintSet::box(Point::Zero(2), Point::Ones(2));
  const auto disk = ConstraintSet::ball(Point::Constant(2, 1.0), 1.0);
  Matrix plane_a(1, 3);
  plane_a << 1.0, 1.0, 1.0;
  const auto plane = ConstraintSet::affine(plane_a, Point::Ones(1));
  Matrix half_a(1, 2);
  half_a << 1.0, 0.0;
  const auto half = ConstraintSet::halfspaces(half_a, Point::Zero(1));
  Matrix cone_a(3, 2);
  cone_a << 1.0, 0.2, -0.3, 1.0, -1.0, -1.0;
  const auto polytope = ConstraintSet::halfspaces(cone_a, Point::Ones(3));

  zoo.push_back({"projection-box", Paracontraction::projection(box), r2});
  zoo.push_back({"projection-ball", Paracontraction::projection(disk), r2});
  zoo.push_back({"projection-affine", Paracontraction::projection(plane), r3});
  zoo.push_back({"projection-halfspace", Paracontraction::projection(half), r2});
  zoo.push_back({"projection-polytope", Paracontraction::projection(polytope), r2});
  zoo.push_back({"coordinate-subspace", Paracontraction::coordinate_projection(3, {0, 2}), r3});
  Point center(2);
  center << 0.25, 0.75;
  zoo.push_back({"strict-contraction", Paracontraction::strict_contraction(0.5, center), box});
  zoo.push_back({"averaged-box-ball",
                 Paracontraction::averaged_composition(
                     {Paracontraction::projection(box), Paracontraction::projection(disk)}, 0.5),
                 r2});
  zoo.push_back({"composed-affine-subspace",
                 Paracontraction::averaged_composition(
                     {Paracontraction::coordinate_projection(3, {0, 1}), Paracontraction::projection(plane)}, 1.0),
                 r3});
  return zoo;
}

}  // namespace paracon
