#pragma once

#include <vector>

#include "sandwich/bounds.hpp"
#include "sandwich/price_system.hpp"

namespace sandwich {

struct ExtendOptions {
  double lambda = 0.5;         // selection inside [c, d]: y0 = (1-lambda) c + lambda d
  bool majorant_only = false;  // extend under x <= M alone (m == 0)
  double cut_tol = 1e-8;       // cutting-plane tolerance for good-deal bounds
  int max_cuts = 500;
  double eps_pos = 1e-9;       // positivity floor used by the measure builder
};

// One-step extension record: the interval [c, d] per F_s-cell and the chosen
// value, all as level-<= s random variables.
struct OneStepResult {
  RandomVariable lower, upper, chosen;
  PartialOperator extended;
};

// Extend x to span(L + R Y0). Y0 must lie outside span(L). Throws
// SandwichViolationError when some cell produces c > d (the sandwich
// condition failed on L), carrying a verified violating triple.
OneStepResult one_step_extend(const PartialOperator& op, const BoundFamily& bounds,
                              const RandomVariable& Y0, const ExtendOptions& opts = {});

struct ExtensionStep {
  int tcell;  // F_t-cell whose indicator was adjoined
  RandomVariable lower, upper, chosen;
};

struct ExtensionResult {
  PartialOperator extended;  // basis: every F_t-cell indicator, in cell order
  std::vector<ExtensionStep> steps;
  double lambda = 0.5;
};

// Iterate one-step extensions over the F_t-cell indicators not yet spanned,
// grouped by F_s-cell, then re-express the operator on the indicator basis.
// The result is checked against the original on its span (1e-9), for
// monotonicity of indicator images (-1e-10), and for sandwich containment
// on the indicator basis (1e-8).
ExtensionResult full_extend(const PartialOperator& op, const BoundFamily& bounds,
                            const ExtendOptions& opts = {});

// Representing one-step density of a full-space operator:
// f = x(1_d) * P(F_s-cell) / P(d) on each F_t-cell d, so that
// x(X) = E[f X | F_s] and E[f | F_s] = 1 per cell. Errors on indicator
// images below -1e-10 (monotonicity violation).
Density recover_density(const PartialOperator& full_op);

}  // namespace sandwich
