#pragma once

#include "paracon/union_operator.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace paracon {

/// Data of a planted sparse affine feasibility instance: find x with
/// A x = b and at most s nonzeros.
struct SparseMetadata {
  Matrix a;
  Point b;
  std::size_t sparsity = 0;
  Point planted;
  IndexSet planted_support;
};

struct ProblemInstance {
  std::string name;
  std::uint64_t seed = 0;
  UnionOperator op;
  std::vector<Point> x0_candidates;
  /// Reference fixed point. When z_star_strong is set it is fixed by every
  /// member of the family; otherwise only by the branches that select it.
  std::optional<Point> z_star;
  bool z_star_strong = false;
  std::optional<SparseMetadata> sparse;

  [[nodiscard]] std::size_t dimension() const { return op.dimension(); }
};

/// Plants x̄ with exactly s nonzeros (magnitudes in [1, 2], random signs),
/// draws a k x n matrix with unit-norm Gaussian rows and sets b = A x̄.
/// Members are T_J = P_{Ax=b} o P_J over all s-subsets J, selected by the
/// sparse-support phi. A rank-deficient draw is redrawn from the next seed,
/// up to 10 attempts.
ProblemInstance make_sparse_affine_feasibility(std::size_t n, std::size_t k, std::size_t s, std::uint64_t seed);

/// Projections onto `sets`, which must all contain `common_point`.
/// x0 candidates lie at distances 0.5, 2 and 5 from the common point.
ProblemInstance make_convex_feasibility(std::string name, std::vector<ConstraintSet> sets,
                                        SelectionFunction selection, Point common_point, std::uint64_t seed);

/// `count` halfspaces {x : a_i . (x - p) <= 0} with random unit normals.
std::vector<ConstraintSet> random_halfspaces_through(const Point& p, std::size_t count, std::uint64_t seed);

enum class ToyKind { Halving, TwoBranch };

/// Halving: {x -> x/2} on R, z* = 0. Two-branch: {x -> x/2, x -> (x+1)/2}
/// with nearest-operators phi; the branches share no fixed point.
ProblemInstance make_toy_1d(ToyKind kind);

/// Named operators covering every Paracontraction kind, each with the
/// constraint set it maps into itself.
struct ZooEntry {
  std::string id;
  Paracontraction op;
  ConstraintSet set;
};

std::vector<ZooEntry> operator_zoo();

}  // namespace paracon
