#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sandwich/bounds.hpp"
#include "sandwich/extension.hpp"
#include "sandwich/price_system.hpp"

namespace sandwich {

// Equivalent (or absolutely continuous) pricing measure built as the product
// of one-step densities across adjacent grid pairs.
struct PricingMeasure {
  Density f;                                // product density over atoms
  std::vector<RandomVariable> per_step;     // f_{s_{k-1} s_k}, level <= k
  double lambda_used = 0.5;
  bool equivalent = false;                  // min f above the positivity floor
  double min_density = 0.0;
};

enum class FeasStatus { Feasible, Infeasible };

// Outcome of the direct search for a representing density. Exactly one of
// `measure` / `farkas` is meaningful: a feasible point, or row multipliers
// combining the constraints into a contradiction (farkas_value < -1e-10).
struct FeasibilityCertificate {
  FeasStatus status = FeasStatus::Feasible;
  std::optional<Density> measure;
  std::vector<double> farkas;
  std::vector<std::string> row_labels;
  double farkas_value = 0.0;
  int cuts_used = 0;
  std::string method;  // "exact-lp" or "cutting-plane"
};

struct FeasibilityOptions {
  double eps_pos = 1e-9;      // strict-positivity floor in the LP search
  double cut_tol = 1e-8;      // quadratic-budget acceptance tolerance
  int max_iterations = 10000; // cutting-plane cap
};

// Direct oracle for the set of representing measures: atom-wise density
// f >= eps_pos with E[f|F_0] = 1, the pricing constraints of every grid pair,
// and the bound constraints compiled per family (linear bands, convex-hull
// memberships, or quadratic budgets via cutting planes).
FeasibilityCertificate lp_feasibility(const PriceSystem& ps, const BoundFamily& bounds,
                                      const FeasibilityOptions& opts = {});

// Single-pair version at F_t granularity with E[f|F_s] = 1 and f >= 0 only:
// decides whether x_st admits a representing density within the bounds,
// which is the sandwich condition at (s, t).
struct PairFeasibility {
  bool feasible = false;
  std::vector<double> f_tcells;  // per F_t-cell (feasible case)
  std::vector<double> farkas;
  std::vector<std::string> row_labels;
  double farkas_value = 0.0;
  int cuts_used = 0;
};
PairFeasibility pair_feasibility(const PartialOperator& op, const BoundFamily& bounds,
                                 const FeasibilityOptions& opts = {});

// Worst violation of the lp_feasibility constraint system by a candidate
// density (conditional-expectation residuals, bound-band excesses, hull
// distances, budget excesses, positivity gap).
double feasibility_residual(const PriceSystem& ps, const BoundFamily& bounds, const Density& f,
                            double eps_pos = 1e-9);

// ---------------------------------------------------------------------------
// Constructive path (grid fundamental theorem)

struct BuildReport {
  bool representation_ok = true;        // induced operator matches x_st on every span
  double worst_representation = 0.0;
  bool containment_ok = true;           // m <= E_f[.|F_s] <= M for all pairs
  double worst_containment = 0.0;
  bool bounds_weak_tc_ok = true;        // sampled weak time-consistency of the family
  double worst_bound_tc = 0.0;
  std::vector<std::string> warnings;
  bool clean() const { return representation_ok && containment_ok && warnings.empty(); }
};

struct BuildOutcome {
  PricingMeasure measure;
  BuildReport report;
};

// Extend each adjacent-pair operator (sandwich-preserving), recover its
// one-step density, and multiply across the grid. Throws
// SandwichViolationError (with the failing pair in the message) when some
// adjacent pair admits no extension. On a positivity failure the lambda
// retry ladder {0.5, 0.25, 0.75, 0.1, 0.9} runs before settling for an
// absolutely-continuous measure.
BuildOutcome build_measure(const PriceSystem& ps, const BoundFamily& bounds,
                           const ExtendOptions& opts = {});

struct RepresentationReport {
  double worst_pricing = 0.0;        // |E_f[B|F_s] - x_st(B)| over pairs and basis
  double worst_time_consistency = 0.0;
  double worst_containment = 0.0;
  bool passed(double tol = 1e-9) const {
    return worst_pricing <= tol && worst_time_consistency <= tol &&
           worst_containment <= 1e-8;
  }
};

// Checks x_st(X) = E[f X | F_s] / E[f | F_s] on every pair and basis claim,
// time-consistency of the induced operator on the full space, and bound
// containment on indicators plus seeded random positives.
RepresentationReport verify_representation(const PriceSystem& ps, const BoundFamily& bounds,
                                           const PricingMeasure& pm,
                                           std::uint64_t seed = 2024);

}  // namespace sandwich
