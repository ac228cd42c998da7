#include "sandwich/extension.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cell_programs.hpp"
#include "sandwich/errors.hpp"
#include "sandwich/lp.hpp"

namespace sandwich {

namespace {

std::string triple_certificate(const detail::CellGeometry& geo,
                               const detail::CellProgramResult& cprog,
                               const detail::CellProgramResult& dprog, double c_val,
                               double d_val) {
  // Combining the two optimizing triples yields Z + X <= Y with
  // m(Z) + x(X) - M(Y) >= c - d > 0 (superlinearity of m, sublinearity of M).
  std::ostringstream os;
  os << "cell " << geo.s_cell << ": c = " << c_val << " > d = " << d_val
     << "; violating triple X = -(X' + X''), Z = Z' + Z'', Y = Y' + Y'' with alpha' = [";
  for (size_t j = 0; j < cprog.alpha.size(); ++j) os << (j ? ", " : "") << cprog.alpha[j];
  os << "], alpha'' = [";
  for (size_t j = 0; j < dprog.alpha.size(); ++j) os << (j ? ", " : "") << dprog.alpha[j];
  os << "], violation >= " << (c_val - d_val);
  return os.str();
}

RandomVariable from_cell_values(const SpacePtr& space, int level,
                                const std::vector<double>& per_cell) {
  std::vector<double> v(space->n_atoms());
  for (int c = 0; c < space->n_cells(level); ++c)
    for (int atom : space->cells(level)[c]) v[atom] = per_cell[c];
  return RandomVariable(space, std::move(v));
}

}  // namespace

OneStepResult one_step_extend(const PartialOperator& op, const BoundFamily& bounds,
                              const RandomVariable& Y0, const ExtendOptions& opts) {
  if (op.basis.empty()) throw ValidationError("one_step_extend: empty operator");
  const SpacePtr& space = op.basis.front().space();
  if (Y0.space() != space) throw ValidationError("one_step_extend: Y0 on a different space");
  if (Y0.level() > op.t)
    throw ValidationError("one_step_extend: Y0 must be measurable at the right endpoint");
  if (!(opts.lambda >= 0.0 && opts.lambda <= 1.0))
    throw ValidationError("one_step_extend: lambda must lie in [0, 1]");
  {
    SpanSolver span(op.basis);
    if (span.contains(Y0))
      throw ValidationError("one_step_extend: Y0 already lies in the span");
  }

  const auto geometry = detail::make_cell_geometry(op);
  const int n_s = static_cast<int>(geometry.size());
  std::vector<double> c_vals(n_s), d_vals(n_s), y0_vals(n_s);

  const auto* gd = std::get_if<GoodDeal>(&bounds);
  const bool density_route = gd && gd->positivity_constrained() && !opts.majorant_only;

  for (int c = 0; c < n_s; ++c) {
    const auto& geo = geometry[c];
    std::vector<double> y0_sub(geo.tcells.size());
    for (size_t d = 0; d < geo.tcells.size(); ++d)
      y0_sub[d] = Y0.value_on_cell(geo.t, geo.tcells[d]);

    double cv, dv;
    if (density_route) {
      // quadratic-budget bounds: the interval is the price range of Y0 over
      // consistent conditional densities (compact program, stable cuts)
      const auto range = detail::cell_price_range(geo, gd->delta_st(op.s, op.t), y0_sub,
                                                  1e-9, opts.max_cuts);
      if (!range.feasible)
        throw SandwichViolationError(
            "one_step_extend: empty extension interval on F_s-cell " + std::to_string(c) +
                " (sandwich condition fails on the current span)",
            c, range.certificate);
      cv = range.lo;
      dv = range.hi;
    } else {
      const auto oracle = detail::BoundOracle::make(bounds, geo, opts.majorant_only);
      const auto cprog = detail::cell_sup_program(geo, oracle, y0_sub, detail::kVarCap,
                                                  opts.cut_tol, opts.max_cuts);
      std::vector<double> neg(y0_sub.size());
      for (size_t d = 0; d < y0_sub.size(); ++d) neg[d] = -y0_sub[d];
      const auto dprog = detail::cell_sup_program(geo, oracle, neg, detail::kVarCap,
                                                  opts.cut_tol, opts.max_cuts);
      cv = cprog.capped ? lp::kInf : cprog.value;
      dv = dprog.capped ? -lp::kInf : -dprog.value;
      if (cv > dv + 1e-8)
        throw SandwichViolationError(
            "one_step_extend: empty extension interval on F_s-cell " + std::to_string(c) +
                " (sandwich condition fails on the current span)",
            c, triple_certificate(geo, cprog, dprog, cv, dv));
    }
    if (cv > dv) {  // numerically pinned interval
      const double mid = 0.5 * (cv + dv);
      cv = dv = mid;
    }
    c_vals[c] = cv;
    d_vals[c] = dv;
    y0_vals[c] = (1.0 - opts.lambda) * cv + opts.lambda * dv;
  }

  OneStepResult res{from_cell_values(space, op.s, c_vals),
                    from_cell_values(space, op.s, d_vals),
                    from_cell_values(space, op.s, y0_vals),
                    op};
  res.extended.basis.push_back(Y0);
  res.extended.images.push_back(res.chosen);
  return res;
}

RandomVariable eval_operator(const PartialOperator& op, const RandomVariable& X,
                             double residual_tol) {
  SpanSolver span(op.basis);
  const auto coords = span.coordinates(X, residual_tol);
  if (!coords)
    throw SpanError("claim outside the marketed span at t-index " + std::to_string(op.t) +
                    " (residual above " + std::to_string(residual_tol) + ")");
  RandomVariable out = RandomVariable::constant(X.space(), 0.0);
  for (size_t j = 0; j < op.images.size(); ++j)
    if ((*coords)[j] != 0.0) out = out + (*coords)[j] * op.images[j];
  return out;
}

ExtensionResult full_extend(const PartialOperator& op, const BoundFamily& bounds,
                            const ExtendOptions& opts) {
  if (op.basis.empty()) throw ValidationError("full_extend: empty operator");
  const SpacePtr& space = op.basis.front().space();

  ExtensionResult result;
  result.lambda = opts.lambda;

  // Adjoin missing F_t-cell indicators grouped by F_s-cell, in cell order.
  PartialOperator cur = op;
  const auto groups = subcells(*space, op.s, op.t);
  for (const auto& group : groups) {
    for (int d : group) {
      const RandomVariable ind = RandomVariable::cell_indicator(space, op.t, d);
      {
        SpanSolver span(cur.basis);
        if (span.contains(ind)) continue;
      }
      OneStepResult step = one_step_extend(cur, bounds, ind, opts);
      result.steps.push_back(ExtensionStep{d, step.lower, step.upper, step.chosen});
      cur = std::move(step.extended);
    }
  }

  // Re-express on the indicator basis.
  PartialOperator full;
  full.s = op.s;
  full.t = op.t;
  for (int d = 0; d < space->n_cells(op.t); ++d) {
    const RandomVariable ind = RandomVariable::cell_indicator(space, op.t, d);
    full.basis.push_back(ind);
    full.images.push_back(eval_operator(cur, ind, 1e-7));
  }

  // Post checks: agreement on the original span, monotonicity, containment.
  for (size_t j = 0; j < op.basis.size(); ++j) {
    const RandomVariable back = eval_operator(full, op.basis[j]);
    double worst = 0.0;
    for (int i = 0; i < back.size(); ++i)
      worst = std::max(worst, std::abs(back[i] - op.images[j][i]));
    if (worst > 1e-9)
      throw NumericalError("full_extend: extension drifted from the original operator by " +
                           std::to_string(worst));
  }
  for (int d = 0; d < space->n_cells(op.t); ++d) {
    const int parent = space->cell_of(op.s, space->cells(op.t)[d].front());
    if (full.images[d].min_value() < -1e-10)
      throw SandwichViolationError(
          "full_extend: negative indicator image on F_t-cell " + std::to_string(d), parent,
          "monotonicity fails: x(1_" + std::to_string(d) + ") = " +
              std::to_string(full.images[d].min_value()));
    const RandomVariable upper = eval_M(bounds, op.s, op.t, full.basis[d]);
    double worst_up = (full.images[d] - upper).max_value();
    double worst_lo = 0.0;
    if (!opts.majorant_only) {
      const RandomVariable lower = eval_m(bounds, op.s, op.t, full.basis[d]);
      worst_lo = (lower - full.images[d]).max_value();
    }
    if (worst_up > 1e-8 || worst_lo > 1e-8)
      throw SandwichViolationError(
          "full_extend: sandwich containment failed on an indicator already in the span",
          parent,
          "indicator of F_t-cell " + std::to_string(d) + " priced " +
              std::to_string(worst_up > worst_lo ? worst_up : -worst_lo) +
              " outside [m, M]");
  }

  result.extended = std::move(full);
  return result;
}

Density recover_density(const PartialOperator& full_op) {
  if (full_op.basis.empty()) throw ValidationError("recover_density: empty operator");
  const SpacePtr& space = full_op.basis.front().space();
  const int s = full_op.s, t = full_op.t;

  std::vector<double> f(space->n_atoms(), 0.0);
  for (int d = 0; d < space->n_cells(t); ++d) {
    const RandomVariable image =
        eval_operator(full_op, RandomVariable::cell_indicator(space, t, d), 1e-7);
    const int parent = space->cell_of(s, space->cells(t)[d].front());
    const double v = image.value_on_cell(s, parent);
    if (v < -1e-10)
      throw ValidationError("recover_density: indicator image " + std::to_string(v) +
                            " on F_t-cell " + std::to_string(d) +
                            " violates monotonicity");
    const double fd = std::max(0.0, v) * space->cell_mass(s, parent) / space->cell_mass(t, d);
    for (int atom : space->cells(t)[d]) f[atom] = fd;
  }

  // E[f | F_s] = 1 per cell by construction; verify before packaging.
  const RandomVariable frv(space, std::move(f));
  const RandomVariable mean = cond_expect(frv, s);
  for (int c = 0; c < space->n_cells(s); ++c) {
    const double m = mean.value_on_cell(s, c);
    if (std::abs(m - 1.0) > 1e-10)
      throw NumericalError("recover_density: conditional mass " + std::to_string(m) +
                           " on F_s-cell " + std::to_string(c) + ", expected 1");
  }
  return Density(frv);
}

}  // namespace sandwich
