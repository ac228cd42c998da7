#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "sandwich/prob_space.hpp"

namespace sandwich {

// Nonnegative per-atom density with E[f | F_0] = 1 on every F_0-cell
// (tolerance 1e-10). `equivalent()` reports strict positivity.
class Density {
 public:
  Density(SpacePtr space, std::vector<double> f);
  explicit Density(RandomVariable f);

  const RandomVariable& as_rv() const { return f_; }
  const SpacePtr& space() const { return f_.space(); }
  double operator[](int atom) const { return f_[atom]; }
  bool equivalent() const { return equivalent_; }

 private:
  RandomVariable f_;
  bool equivalent_;
};

// ---------------------------------------------------------------------------
// Bound families (m_st, M_st)

// Price band from bound densities: M_st(X) = E[M_st X | F_s] with an
// F_t-measurable weight per pair, 0 < m_st <= M_st, multiplicative across
// grid triples (tolerance 1e-10).
class DensityBounds {
 public:
  static DensityBounds from_table(
      SpacePtr space,
      std::map<std::pair<int, int>, std::pair<RandomVariable, RandomVariable>> table);
  // Canonical multiplicative instance generated from terminal weights
  // m, M > 0: M_st = (E[M|F_0])^((t-s)/T) E[M|F_t] / E[M|F_s].
  static DensityBounds from_terminal(SpacePtr space, const RandomVariable& m_T,
                                     const RandomVariable& M_T);

  const SpacePtr& space() const { return space_; }
  // Weight random variables; s == t yields the constant 1.
  RandomVariable m_weight(int s, int t) const;
  RandomVariable M_weight(int s, int t) const;

 private:
  SpacePtr space_;
  std::map<std::pair<int, int>, std::pair<RandomVariable, RandomVariable>> table_;
};

// Bid-ask style bounds from finite measure families:
// M_st(X) = max_{Q in upper} E_Q[X|F_s], m_st(X) = min_{Q in lower} E_Q[X|F_s].
// Every member must put positive mass on every cell at every level so the
// conditional expectations are defined.
class MeasureFamilies {
 public:
  MeasureFamilies(SpacePtr space, std::vector<Density> upper, std::vector<Density> lower);

  const SpacePtr& space() const { return space_; }
  const std::vector<Density>& upper() const { return upper_; }
  const std::vector<Density>& lower() const { return lower_; }

 private:
  SpacePtr space_;
  std::vector<Density> upper_;
  std::vector<Density> lower_;
};

// Sharpe-ratio (good-deal) bounds of level delta > 1, with
// delta_st = delta^(t-s) - 1 over grid times. By default the bound is the
// exact optimum over nonnegative densities within the quadratic budget;
// with positivity_constrained = false the Cauchy-Schwarz closed form
// E[X|F_s] +/- delta_st sqrt(Var(X|F_s)) is used instead.
class GoodDeal {
 public:
  GoodDeal(SpacePtr space, double delta, bool positivity_constrained = true);

  const SpacePtr& space() const { return space_; }
  double delta() const { return delta_; }
  bool positivity_constrained() const { return positivity_constrained_; }
  double delta_st(int s, int t) const;

 private:
  SpacePtr space_;
  double delta_;
  bool positivity_constrained_;
};

// Per-step good-deal levels composed recursively across the grid:
// M_{s,t} = M_{s,s+1}(M_{s+1,t}(.)) with closed-form one-step operators.
// The step levels need not satisfy the composition law; implied_delta
// reports the product-composed level used by the dynamic-measure check.
class ComposedGoodDeal {
 public:
  // step_deltas[k] is the level for the pair (k, k+1); all >= 0.
  ComposedGoodDeal(SpacePtr space, std::vector<double> step_deltas);

  const SpacePtr& space() const { return space_; }
  const std::vector<double>& step_deltas() const { return step_deltas_; }
  double implied_delta(int s, int t) const;  // prod (1+delta_k) - 1
  // Whether the one-step levels happen to satisfy the composition law
  // (1 + d_rt) = (1 + d_rs)(1 + d_st) for the implied table (always true by
  // construction of implied_delta) -- reported for the step table itself.
  bool steps_satisfy_composition(double tol = 1e-12) const;

 private:
  SpacePtr space_;
  std::vector<double> step_deltas_;
};

using BoundFamily = std::variant<DensityBounds, MeasureFamilies, GoodDeal, ComposedGoodDeal>;

const SpacePtr& bound_space(const BoundFamily& bounds);
std::string bound_kind(const BoundFamily& bounds);

// Upper / lower price bound operators on the positive cone of L_inf(F_t).
// X must satisfy X >= -1e-12 atom-wise and have level <= t.
RandomVariable eval_M(const BoundFamily& bounds, int s, int t, const RandomVariable& X);
RandomVariable eval_m(const BoundFamily& bounds, int s, int t, const RandomVariable& X);

// ---------------------------------------------------------------------------
// Good-deal kernels

enum class OptDirection { Sup, Inf };

// Exact optimum of E_q[x] over conditional densities q >= 0 on one cell:
// sum q_d = 1, sum pi_d (q_d/pi_d - 1)^2 <= delta^2. KKT water-filling with
// outer bisection; `cell` only labels error messages.
struct GoodDealCellSolution {
  double value = 0.0;
  std::vector<double> q;
  bool strictly_positive = true;
};
GoodDealCellSolution goodd_cell(const std::vector<double>& pi, const std::vector<double>& x,
                                double delta, OptDirection dir, int cell = -1);

// Full-space exact bound at granularity F_t: per F_s-cell optimization over
// densities on the F_t-cells inside. X may be any RandomVariable of level <= t.
RandomVariable goodd_exact(int s, int t, const RandomVariable& X, double delta_st,
                           OptDirection dir);

// Closed form E[X|F_s] +/- delta sqrt(Var(X|F_s)).
RandomVariable goodd_closed_form(int s, const RandomVariable& X, double delta_st,
                                 OptDirection dir);

// c_st(X) = delta_st sqrt(E[X^2 | F_s]).
RandomVariable c_operator(int s, int t, double delta_st, const RandomVariable& X);

// delta_st = delta^(t-s) - 1 over grid times; requires delta > 1.
// Entry [s][t] for s <= t; zero elsewhere.
std::vector<std::vector<double>> delta_table(double delta_base, const FilteredSpace& space);

// ---------------------------------------------------------------------------
// Stability and dynamic no-good-deal checks

// One-step density pieces for the pairs (r,s), (s,t), (r,t): each element of
// `rs` must be a level-<=s density with conditional mean 1 at F_r, etc.
struct StepDensityFamily {
  int r, s, t;
  std::vector<RandomVariable> rs, st, rt;
};

struct MStabilityReport {
  bool product_closed = true;
  bool pasting_closed = true;
  std::vector<std::string> counterexamples;
  bool passed() const { return product_closed && pasting_closed; }
};

// Closure of an explicit family under products of conditional pieces and
// under F_s-pasting (membership up to atom-wise tolerance 1e-10).
MStabilityReport check_m_stability(const SpacePtr& space, const StepDensityFamily& family);

struct GoodDealStabilityReport {
  bool passed = true;
  double worst_excess = 0.0;  // max over samples of E[(g_comp)^2|F_r] - delta_rt^2
  int n_samples = 0;
};

// Random one-step tilts g_rs, g_st meeting their per-step budgets must
// compose to a density meeting the delta_rt budget (tolerance 1e-10).
GoodDealStabilityReport check_m_stability(const SpacePtr& space, int r, int s, int t,
                                          const std::vector<std::vector<double>>& deltas,
                                          int n_samples, std::uint64_t seed);

struct NgdPairResult {
  int s, t;
  double budget;     // max over F_s-cells of E[(f_t/f_s - 1)^2 | F_s]
  double limit;      // delta_st^2
  bool passed;
};

struct NgdReport {
  bool passed = true;
  double worst_excess = 0.0;
  std::vector<NgdPairResult> pairs;
};

// Dynamic no-good-deal check: conditional density ratios of f meet the
// quadratic budget delta_st^2 for every grid pair (tolerance 1e-10). The
// (0,T) entry is the static Sharpe-ratio check. Errors if some conditional
// mass of f vanishes (measure not equivalent).
NgdReport is_dynamic_ngd_measure(const Density& f,
                                 const std::vector<std::vector<double>>& deltas);

}  // namespace sandwich
