#include "paracon/union_operator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace paracon {

bool is_subset(const IndexSet& inner, const IndexSet& outer) {
  return std::includes(outer.begin(), outer.end(), inner.begin(), inner.end());
}

Point OperatorFamily::apply(std::size_t index, const Point& x) const { return at(index).evaluate(x); }

std::string OperatorFamily::label(std::size_t index) const { return std::to_string(index); }

ExplicitFamily::ExplicitFamily(std::vector<Paracontraction> operators) : operators_(std::move(operators)) {
  if (operators_.empty()) throw std::invalid_argument("ExplicitFamily: need at least one operator");
  const std::size_t n = operators_.front().dimension();
  for (const auto& op : operators_)
    if (op.dimension() != n) throw DimensionError("ExplicitFamily: operators disagree on dimension");
}

Paracontraction ExplicitFamily::at(std::size_t index) const { return operators_.at(index); }

Point ExplicitFamily::apply(std::size_t index, const Point& x) const {
  return operators_.at(index).evaluate(x);
}

std::uint64_t binomial(std::size_t n, std::size_t s) {
  if (s > n) return 0;
  s = std::min(s, n - s);
  std::uint64_t result = 1;
  for (std::size_t i = 1; i <= s; ++i) {
    const std::uint64_t factor = n - s + i;
    if (result > std::numeric_limits<std::uint64_t>::max() / factor)
      throw std::overflow_error("binomial: result does not fit in 64 bits");
    result = result * factor / i;
  }
  return result;
}

std::size_t support_rank(const IndexSet& support) {
  std::uint64_t rank = 0;
  for (std::size_t i = 0; i < support.size(); ++i) rank += binomial(support[i], i + 1);
  return static_cast<std::size_t>(rank);
}

IndexSet support_unrank(std::size_t rank, std::size_t s) {
  IndexSet support(s);
  std::uint64_t remaining = rank;
  for (std::size_t i = s; i-- > 0;) {
    // Largest c with C(c, i+1) <= remaining.
    std::size_t c = i;
    while (binomial(c + 1, i + 1) <= remaining) ++c;
    support[i] = c;
    remaining -= binomial(c, i + 1);
  }
  return support;
}

SupportFamily::SupportFamily(std::size_t n, std::size_t s, std::optional<Paracontraction> outer)
    : n_(n), s_(s), outer_(std::move(outer)) {
  if (n == 0 || s == 0 || s > n) throw std::invalid_argument("SupportFamily: need 1 <= s <= n");
  if (outer_ && outer_->dimension() != n) throw DimensionError("SupportFamily: outer map dimension");
  const std::uint64_t m = binomial(n, s);
  if (m > std::numeric_limits<std::size_t>::max()) throw std::overflow_error("SupportFamily: too many supports");
  size_ = static_cast<std::size_t>(m);
}

Paracontraction SupportFamily::at(std::size_t index) const {
  if (index >= size_) throw std::out_of_range("SupportFamily::at");
  auto pj = Paracontraction::coordinate_projection(n_, support_unrank(index, s_));
  if (!outer_) return pj;
  return Paracontraction::averaged_composition({std::move(pj), *outer_}, 1.0);
}

Point SupportFamily::apply(std::size_t index, const Point& x) const {
  if (index >= size_) throw std::out_of_range("SupportFamily::apply");
  require_dimension(x, n_, "SupportFamily::apply");
  Point y = Point::Zero(x.size());
  for (std::size_t j : support_unrank(index, s_)) y(static_cast<Eigen::Index>(j)) = x(static_cast<Eigen::Index>(j));
  return outer_ ? outer_->evaluate(y) : y;
}

std::string SupportFamily::label(std::size_t index) const {
  const IndexSet support = support_unrank(index, s_);
  std::ostringstream os;
  os << "{";
  for (std::size_t i = 0; i < support.size(); ++i) os << (i ? "," : "") << support[i];
  os << "}";
  return os.str();
}

std::string to_string(SelectionKind kind) {
  switch (kind) {
    case SelectionKind::ConstantFull: return "constant-full";
    case SelectionKind::NearestOperators: return "nearest-operators";
    case SelectionKind::SparseSupport: return "sparse-support";
  }
  return "unknown";
}

std::vector<IndexSet> best_supports(const Point& x, std::size_t s, double tau_tie) {
  const auto n = static_cast<std::size_t>(x.size());
  if (s == 0 || s > n) throw std::invalid_argument("best_supports: need 1 <= s <= n");
  std::vector<double> magnitudes(n);
  for (std::size_t j = 0; j < n; ++j) magnitudes[j] = std::abs(x(static_cast<Eigen::Index>(j)));
  std::vector<double> sorted = magnitudes;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(s - 1), sorted.end(),
                   std::greater<>());
  const double pivot = sorted[s - 1];

  IndexSet mandatory;
  IndexSet ties;
  for (std::size_t j = 0; j < n; ++j) {
    if (magnitudes[j] > pivot + tau_tie) mandatory.push_back(j);
    else if (magnitudes[j] >= pivot - tau_tie) ties.push_back(j);
  }
  const std::size_t need = s - mandatory.size();

  std::vector<IndexSet> supports;
  std::vector<bool> pick(ties.size(), false);
  std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(need), true);
  do {
    IndexSet support = mandatory;
    for (std::size_t k = 0; k < ties.size(); ++k)
      if (pick[k]) support.push_back(ties[k]);
    std::sort(support.begin(), support.end());
    supports.push_back(std::move(support));
  } while (std::prev_permutation(pick.begin(), pick.end()));

  std::sort(supports.begin(), supports.end(),
            [](const IndexSet& a, const IndexSet& b) { return support_rank(a) < support_rank(b); });
  return supports;
}

IndexSet select_indices(const SelectionFunction& phi, const OperatorFamily& family, const Point& x) {
  require_dimension(x, family.dimension(), "select_indices");
  IndexSet result;
  switch (phi.kind) {
    case SelectionKind::ConstantFull:
      result.resize(family.size());
      for (std::size_t i = 0; i < result.size(); ++i) result[i] = i;
      break;
    case SelectionKind::NearestOperators: {
      std::vector<double> moves(family.size());
      for (std::size_t i = 0; i < moves.size(); ++i) moves[i] = (family.apply(i, x) - x).norm();
      const double best = *std::min_element(moves.begin(), moves.end());
      for (std::size_t i = 0; i < moves.size(); ++i)
        if (moves[i] <= best + phi.tau_tie) result.push_back(i);
      break;
    }
    case SelectionKind::SparseSupport: {
      if (family.size() != binomial(family.dimension(), phi.sparsity))
        throw std::invalid_argument("select_indices: sparse-support needs a support family of matching s");
      for (const auto& support : best_supports(x, phi.sparsity, phi.tau_tie))
        result.push_back(support_rank(support));
      break;
    }
  }
  return result;
}

UnionOperator::UnionOperator(std::shared_ptr<const OperatorFamily> family, SelectionFunction selection,
                             ConstraintSet set)
    : family_(std::move(family)), selection_(selection), set_(std::move(set)) {
  if (!family_ || family_->size() == 0) throw std::invalid_argument("UnionOperator: empty family");
  if (family_->dimension() != set_.dimension())
    throw DimensionError("UnionOperator: family and constraint set disagree on dimension");
  if (selection_.kind == SelectionKind::SparseSupport &&
      family_->size() != binomial(family_->dimension(), selection_.sparsity))
    throw std::invalid_argument("UnionOperator: sparse-support selection needs a support family");
}

IndexSet UnionOperator::select(const Point& x) const { return select_indices(selection_, *family_, x); }

Point UnionOperator::image(std::size_t index, const Point& x) const { return family_->apply(index, x); }

std::vector<Image> UnionOperator::apply(const Point& x) const {
  std::vector<Image> images;
  for (std::size_t i : select(x)) images.push_back({i, image(i, x)});
  return images;
}

bool UnionOperator::in_strong_fixed_set(const Point& z, double tol) const {
  if (!set_.contains(z)) return false;
  for (std::size_t i = 0; i < family_->size(); ++i)
    if ((image(i, z) - z).norm() > tol) return false;
  return true;
}

bool UnionOperator::in_fixed_set(const Point& z, double tol) const {
  if (!set_.contains(z)) return false;
  for (const auto& img : apply(z))
    if ((img.point - z).norm() <= tol) return true;
  return false;
}

std::vector<Image> apply_union(const UnionOperator& op, const Point& x) { return op.apply(x); }

std::string to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::FirstIndex: return "first-index";
    case PolicyKind::GreedyMinMove: return "greedy-min-move";
    case PolicyKind::SeededRandom: return "seeded-random";
  }
  return "unknown";
}

Selector::Selector(SelectionPolicy policy) : policy_(policy), rng_(policy.seed) {}

Image Selector::choose(const UnionOperator& op, const Point& x) {
  const IndexSet indices = op.select(x);
  switch (policy_.kind) {
    case PolicyKind::FirstIndex:
      return {indices.front(), op.image(indices.front(), x)};
    case PolicyKind::GreedyMinMove: {
      Image best{indices.front(), op.image(indices.front(), x)};
      double best_move = (best.point - x).norm();
      for (std::size_t k = 1; k < indices.size(); ++k) {
        Point y = op.image(indices[k], x);
        const double move = (y - x).norm();
        if (move < best_move) {
          best_move = move;
          best = {indices[k], std::move(y)};
        }
      }
      return best;
    }
    case PolicyKind::SeededRandom: {
      std::uniform_int_distribution<std::size_t> pick(0, indices.size() - 1);
      const std::size_t i = indices[pick(rng_)];
      return {i, op.image(i, x)};
    }
  }
  throw std::logic_error("Selector: unsupported policy");
}

Image choose_next(const UnionOperator& op, const SelectionPolicy& policy, const Point& x) {
  Selector selector(policy);
  return selector.choose(op, x);
}

A3Report check_A3(const UnionOperator& op, const Point& x, std::size_t n_probe,
                  const std::vector<double>& radii, std::uint64_t seed) {
  A3Report report;
  report.phi_at_x = op.select(x);
  Rng rng(seed);
  for (double r : radii) {
    if (!(r > 0.0)) throw std::invalid_argument("check_A3: radii must be positive");
    bool level_ok = true;
    for (std::size_t k = 0; k < n_probe; ++k) {
      const Point y = sample_in_set_ball(op.set(), x, r, rng);
      ++report.probes;
      IndexSet phi_y = op.select(y);
      if (!is_subset(phi_y, report.phi_at_x)) {
        level_ok = false;
        report.witness = y;
        report.phi_at_witness = std::move(phi_y);
        break;
      }
    }
    if (level_ok && !report.working_radius) report.working_radius = r;
  }
  report.passed = report.working_radius.has_value();
  return report;
}

}  // namespace paracon
