#pragma once

#include "paracon/operators.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace paracon {

/// Sorted, duplicate-free list of 0-based operator indices.
using IndexSet = std::vector<std::size_t>;

bool is_subset(const IndexSet& inner, const IndexSet& outer);

/// The finite family {T_0, ..., T_{m-1}}. Families may materialize their
/// members on demand, so callers go through apply()/at() rather than a vector.
class OperatorFamily {
 public:
  virtual ~OperatorFamily() = default;

  [[nodiscard]] virtual std::size_t size() const = 0;
  [[nodiscard]] virtual std::size_t dimension() const = 0;
  [[nodiscard]] virtual Paracontraction at(std::size_t index) const = 0;
  [[nodiscard]] virtual Point apply(std::size_t index, const Point& x) const;
  /// Human-readable name of member `index`.
  [[nodiscard]] virtual std::string label(std::size_t index) const;
};

class ExplicitFamily final : public OperatorFamily {
 public:
  explicit ExplicitFamily(std::vector<Paracontraction> operators);

  [[nodiscard]] std::size_t size() const override { return operators_.size(); }
  [[nodiscard]] std::size_t dimension() const override { return operators_.front().dimension(); }
  [[nodiscard]] Paracontraction at(std::size_t index) const override;
  [[nodiscard]] Point apply(std::size_t index, const Point& x) const override;
  [[nodiscard]] const std::vector<Paracontraction>& operators() const { return operators_; }

 private:
  std::vector<Paracontraction> operators_;
};

/// Number of s-subsets of {0..n-1}. Throws on overflow.
std::uint64_t binomial(std::size_t n, std::size_t s);

/// Colexicographic rank of a sorted s-subset (combinatorial number system).
std::size_t support_rank(const IndexSet& support);
/// Inverse of support_rank for subsets of size s.
IndexSet support_unrank(std::size_t rank, std::size_t s);

/// One member per s-subset J of {0..n-1}: T_J = outer o P_J, or P_J alone
/// when no outer map is given. Member index is the colex rank of J.
class SupportFamily final : public OperatorFamily {
 public:
  SupportFamily(std::size_t n, std::size_t s, std::optional<Paracontraction> outer = std::nullopt);

  [[nodiscard]] std::size_t size() const override { return size_; }
  [[nodiscard]] std::size_t dimension() const override { return n_; }
  [[nodiscard]] std::size_t sparsity() const { return s_; }
  [[nodiscard]] const std::optional<Paracontraction>& outer() const { return outer_; }
  [[nodiscard]] Paracontraction at(std::size_t index) const override;
  [[nodiscard]] Point apply(std::size_t index, const Point& x) const override;
  [[nodiscard]] std::string label(std::size_t index) const override;

 private:
  std::size_t n_;
  std::size_t s_;
  std::size_t size_;
  std::optional<Paracontraction> outer_;
};

enum class SelectionKind { ConstantFull, NearestOperators, SparseSupport };

std::string to_string(SelectionKind kind);

/// The selection function phi: each point gets a nonempty subset of indices.
struct SelectionFunction {
  SelectionKind kind = SelectionKind::ConstantFull;
  double tau_tie = 1e-12;
  std::size_t sparsity = 0;  // SparseSupport only

  static SelectionFunction constant_full() { return {}; }
  static SelectionFunction nearest_operators(double tau_tie = 1e-12) {
    return {SelectionKind::NearestOperators, tau_tie, 0};
  }
  static SelectionFunction sparse_support(std::size_t s, double tau_tie = 1e-12) {
    return {SelectionKind::SparseSupport, tau_tie, s};
  }
};

/// Every s-subset whose magnitudes are within tau of the s largest |x_j|.
/// Subsets are returned sorted in colex-rank order.
std::vector<IndexSet> best_supports(const Point& x, std::size_t s, double tau_tie);

IndexSet select_indices(const SelectionFunction& phi, const OperatorFamily& family, const Point& x);

struct Image {
  std::size_t index;
  Point point;
};

/// The set-valued map x -> {T_i(x) : i in phi(x)} on the constraint set C.
class UnionOperator {
 public:
  UnionOperator(std::shared_ptr<const OperatorFamily> family, SelectionFunction selection,
                ConstraintSet set);

  [[nodiscard]] const OperatorFamily& family() const { return *family_; }
  [[nodiscard]] std::shared_ptr<const OperatorFamily> family_ptr() const { return family_; }
  [[nodiscard]] const SelectionFunction& selection() const { return selection_; }
  [[nodiscard]] const ConstraintSet& set() const { return set_; }
  [[nodiscard]] std::size_t dimension() const { return family_->dimension(); }
  [[nodiscard]] std::size_t size() const { return family_->size(); }

  [[nodiscard]] IndexSet select(const Point& x) const;
  [[nodiscard]] Point image(std::size_t index, const Point& x) const;
  [[nodiscard]] std::vector<Image> apply(const Point& x) const;

  /// z in C with T_i(z) = z for every i (within tol).
  [[nodiscard]] bool in_strong_fixed_set(const Point& z, double tol = kDefaultTolFix) const;
  /// z in C with z in T(z), i.e. some selected branch fixes z (within tol).
  [[nodiscard]] bool in_fixed_set(const Point& z, double tol = kDefaultTolFix) const;

 private:
  std::shared_ptr<const OperatorFamily> family_;
  SelectionFunction selection_;
  ConstraintSet set_;
};

std::vector<Image> apply_union(const UnionOperator& op, const Point& x);

enum class PolicyKind { FirstIndex, GreedyMinMove, SeededRandom };

std::string to_string(PolicyKind kind);

struct SelectionPolicy {
  PolicyKind kind = PolicyKind::FirstIndex;
  std::uint64_t seed = 0;
};

/// Per-run selection state; the seeded-random policy owns its generator.
class Selector {
 public:
  explicit Selector(SelectionPolicy policy);

  [[nodiscard]] const SelectionPolicy& policy() const { return policy_; }
  [[nodiscard]] bool deterministic() const { return policy_.kind != PolicyKind::SeededRandom; }

  Image choose(const UnionOperator& op, const Point& x);

 private:
  SelectionPolicy policy_;
  Rng rng_;
};

/// One-shot choose_next with a fresh Selector.
Image choose_next(const UnionOperator& op, const SelectionPolicy& policy, const Point& x);

struct A3Report {
  bool passed = false;
  std::optional<double> working_radius;  // largest radius with no violation
  IndexSet phi_at_x;
  std::optional<Point> witness;          // last violating y found
  IndexSet phi_at_witness;
  std::size_t probes = 0;
};

/// Falsification probe for local shrinking of phi: phi(y) ⊆ phi(x) for y
/// near x. Passes when at least one radius of the schedule shows no
/// violation among n_probe samples of B(x, r) ∩ C.
A3Report check_A3(const UnionOperator& op, const Point& x, std::size_t n_probe,
                  const std::vector<double>& radii, std::uint64_t seed);

}  // namespace paracon
