#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sandwich/bounds.hpp"
#include "sandwich/linear_span.hpp"
#include "sandwich/prob_space.hpp"

namespace sandwich {

// Marketed-claim subspace L_t: independent basis claims of level <= t, with
// the constant 1 among them.
class ClaimSpace {
 public:
  ClaimSpace(SpacePtr space, int time_index, std::vector<RandomVariable> basis);

  int time_index() const { return time_index_; }
  const std::vector<RandomVariable>& basis() const { return basis_; }
  const SpanSolver& span() const { return span_; }
  int unit_index() const { return unit_index_; }  // position of the constant 1

 private:
  SpacePtr space_;
  int time_index_;
  std::vector<RandomVariable> basis_;
  SpanSolver span_;
  int unit_index_;
};

// A linear operator known on a subspace: basis claims of level <= t and
// their images of level <= s. The working currency of the extension module.
struct PartialOperator {
  int s = 0, t = 0;
  std::vector<RandomVariable> basis;
  std::vector<RandomVariable> images;
};

// Evaluate a partial operator at X (must lie in the span, residual 1e-8).
RandomVariable eval_operator(const PartialOperator& op, const RandomVariable& X,
                             double residual_tol = 1e-8);

// Family x_st of partial price operators: for each pair s <= t the images of
// the L_t basis. Construction validates normalization x_st(1) = 1 and the
// restriction property x_st = x_sT on L_t (tolerance 1e-10).
class PriceSystem {
 public:
  PriceSystem(SpacePtr space, std::vector<ClaimSpace> claim_spaces,
              std::map<std::pair<int, int>, std::vector<RandomVariable>> images);

  const SpacePtr& space() const { return space_; }
  const ClaimSpace& claims(int t) const;
  const std::vector<RandomVariable>& images(int s, int t) const;
  PartialOperator partial_operator(int s, int t) const;

 private:
  SpacePtr space_;
  std::vector<ClaimSpace> claim_spaces_;
  std::map<std::pair<int, int>, std::vector<RandomVariable>> images_;
};

// Time-s price of X in span(L_t); SpanError identifies unpriced claims.
RandomVariable eval_price(const PriceSystem& ps, int s, int t, const RandomVariable& X);

// ---------------------------------------------------------------------------
// Axiom verification (Definition of a price operator + time-consistency)

struct AxiomCheck {
  bool passed = true;
  int checked = 0;
  int not_applicable = 0;
  double worst = 0.0;
  std::string witness;
};

struct AxiomReport {
  AxiomCheck normalization;
  AxiomCheck additivity;
  AxiomCheck homogeneity;         // F_s-homogeneity on representable products
  AxiomCheck monotonicity;        // pool pairs + per-cell positivity LP
  AxiomCheck strict_monotonicity; // E[x(X)] > 0 whenever X >= 0, E[X] > 0
  AxiomCheck time_consistency;    // x_st = x_su o x_ut where representable

  bool all_passed() const {
    return normalization.passed && additivity.passed && homogeneity.passed &&
           monotonicity.passed && strict_monotonicity.passed && time_consistency.passed;
  }
};

AxiomReport check_axioms(const PriceSystem& ps, std::uint64_t seed = 0xA5EED);

// ---------------------------------------------------------------------------
// Sandwich condition  m(Z) + x(X) <= M(Y)  for Z + X <= Y, Z, Y >= 0

struct SandwichWitness {
  RandomVariable X, Y, Z;
  double violation = 0.0;  // m(Z) + x(X) - M(Y) on the worst cell
};

struct SandwichReport {
  bool holds = true;
  double worst_violation = 0.0;  // <= 0 when holds
  int worst_cell = -1;           // F_s-cell attaining it
  std::optional<SandwichWitness> witness;
  std::string method;            // which decision procedure ran
};

// Decides the sandwich condition at the pair (s, t). Density and measure
// bounds run one exact LP per F_s-cell; good-deal bounds are decided by
// pricing-measure feasibility plus a necessary-condition spot check.
SandwichReport check_sandwich(const PriceSystem& ps, int s, int t, const BoundFamily& bounds);
SandwichReport check_sandwich(const PartialOperator& op, const BoundFamily& bounds);

}  // namespace sandwich
