#include "cell_programs.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "sandwich/errors.hpp"
#include "sandwich/lp.hpp"

namespace sandwich::detail {

std::vector<CellGeometry> make_cell_geometry(const PartialOperator& op) {
  if (op.basis.empty()) throw ValidationError("cell geometry: empty operator basis");
  const auto& space = *op.basis.front().space();
  const auto sub = subcells(space, op.s, op.t);
  std::vector<CellGeometry> out;
  out.reserve(sub.size());
  for (int c = 0; c < space.n_cells(op.s); ++c) {
    CellGeometry geo;
    geo.s = op.s;
    geo.t = op.t;
    geo.s_cell = c;
    geo.tcells = sub[c];
    const double mass = space.cell_mass(op.s, c);
    for (int d : sub[c]) geo.pi.push_back(space.cell_mass(op.t, d) / mass);
    geo.basis_on.resize(op.basis.size());
    geo.image_at.resize(op.basis.size());
    for (size_t j = 0; j < op.basis.size(); ++j) {
      for (int d : sub[c]) geo.basis_on[j].push_back(op.basis[j].value_on_cell(op.t, d));
      geo.image_at[j] = op.images[j].value_on_cell(op.s, c);
    }
    out.push_back(std::move(geo));
  }
  return out;
}

BoundOracle BoundOracle::make(const BoundFamily& bounds, const CellGeometry& geo,
                              bool majorant_only) {
  BoundOracle o;
  o.pi_ = geo.pi;
  o.majorant_only_ = majorant_only;
  o.cell_ = geo.s_cell;
  const auto& space = *bound_space(bounds);
  const int n = static_cast<int>(geo.tcells.size());

  if (const auto* db = std::get_if<DensityBounds>(&bounds)) {
    const RandomVariable mw = db->m_weight(geo.s, geo.t);
    const RandomVariable Mw = db->M_weight(geo.s, geo.t);
    const double mass = space.cell_mass(geo.s, geo.s_cell);
    std::vector<double> wm(n), wM(n);
    for (int d = 0; d < n; ++d) {
      const int tc = geo.tcells[d];
      wm[d] = mw.value_on_cell(geo.t, tc) * space.cell_mass(geo.t, tc) / mass;
      wM[d] = Mw.value_on_cell(geo.t, tc) * space.cell_mass(geo.t, tc) / mass;
    }
    o.m_supports_ = {std::move(wm)};
    o.M_supports_ = {std::move(wM)};
  } else if (const auto* mf = std::get_if<MeasureFamilies>(&bounds)) {
    auto supports = [&](const std::vector<Density>& fam) {
      std::vector<std::vector<double>> ws;
      for (const Density& q : fam) {
        std::vector<double> w(n);
        double total = 0.0;
        std::vector<double> raw(n, 0.0);
        for (int d = 0; d < n; ++d) {
          const int tc = geo.tcells[d];
          for (int atom : space.cells(geo.t)[tc]) raw[d] += space.prob(atom) * q[atom];
          total += raw[d];
        }
        for (int d = 0; d < n; ++d) w[d] = raw[d] / total;
        ws.push_back(std::move(w));
      }
      return ws;
    };
    o.M_supports_ = supports(mf->upper());
    o.m_supports_ = supports(mf->lower());
  } else if (const auto* gd = std::get_if<GoodDeal>(&bounds)) {
    if (!gd->positivity_constrained())
      throw ValidationError(
          "cell programs require the exact good-deal operators; disable --drop-positivity");
    o.oracle_ = true;
    o.delta_ = gd->delta_st(geo.s, geo.t);
  } else {
    throw ValidationError("composed good-deal bounds support the bound calculus only; "
                          "extension and feasibility need density, measure-family, or "
                          "good-deal bounds");
  }
  if (majorant_only) o.m_supports_ = {std::vector<double>(n, 0.0)};
  return o;
}

std::pair<double, std::vector<double>> BoundOracle::m_at(const std::vector<double>& z) const {
  if (majorant_only_) return {0.0, std::vector<double>(z.size(), 0.0)};
  if (oracle_) {
    GoodDealCellSolution sol = goodd_cell(pi_, z, delta_, OptDirection::Inf, cell_);
    return {sol.value, std::move(sol.q)};
  }
  double best = 0.0;
  const std::vector<double>* arg = nullptr;
  for (const auto& w : m_supports_) {
    double v = 0.0;
    for (size_t d = 0; d < z.size(); ++d) v += w[d] * z[d];
    if (!arg || v < best) {
      best = v;
      arg = &w;
    }
  }
  return {best, *arg};
}

std::pair<double, std::vector<double>> BoundOracle::M_at(const std::vector<double>& y) const {
  if (oracle_) {
    GoodDealCellSolution sol = goodd_cell(pi_, y, delta_, OptDirection::Sup, cell_);
    return {sol.value, std::move(sol.q)};
  }
  double best = 0.0;
  const std::vector<double>* arg = nullptr;
  for (const auto& w : M_supports_) {
    double v = 0.0;
    for (size_t d = 0; d < y.size(); ++d) v += w[d] * y[d];
    if (!arg || v > best) {
      best = v;
      arg = &w;
    }
  }
  return {best, *arg};
}

CellProgramResult cell_sup_program(const CellGeometry& geo, const BoundOracle& oracle,
                                   const std::vector<double>& rhs, double y_cap,
                                   double cut_tol, int max_cuts) {
  const int n = static_cast<int>(geo.tcells.size());
  const int nb = static_cast<int>(geo.basis_on.size());

  lp::Problem prob;
  std::vector<int> va(nb), vz(n), vy(n);
  for (int j = 0; j < nb; ++j) va[j] = prob.add_variable(-kAlphaCap, kAlphaCap);
  for (int d = 0; d < n; ++d) vz[d] = prob.add_variable(0.0, kVarCap);
  for (int d = 0; d < n; ++d) vy[d] = prob.add_variable(0.0, y_cap);
  // u, v are pinned by the epigraph cuts; leaving them free keeps the
  // tableau scale near the problem data
  const int vu = prob.add_variable(-lp::kInf, lp::kInf);
  const int vv = prob.add_variable(-lp::kInf, lp::kInf);

  // z_d - X_d - y_d <= rhs_d
  for (int d = 0; d < n; ++d) {
    std::vector<lp::Term> terms{{vz[d], 1.0}, {vy[d], -1.0}};
    for (int j = 0; j < nb; ++j)
      if (geo.basis_on[j][d] != 0.0) terms.push_back({va[j], -geo.basis_on[j][d]});
    prob.add_constraint(std::move(terms), lp::Sense::LessEq, rhs[d]);
  }

  std::vector<std::vector<double>> m_cuts, M_cuts;
  auto known = [n](const std::vector<std::vector<double>>& cuts,
                   const std::vector<double>& w) {
    for (const auto& c : cuts) {
      double diff = 0.0;
      for (int d = 0; d < n; ++d) diff = std::max(diff, std::abs(c[d] - w[d]));
      if (diff <= 1e-10) return true;
    }
    return false;
  };
  auto add_m_cut = [&](const std::vector<double>& w) {
    if (known(m_cuts, w)) return false;
    std::vector<lp::Term> terms{{vu, 1.0}};
    for (int d = 0; d < n; ++d)
      if (w[d] != 0.0) terms.push_back({vz[d], -w[d]});
    prob.add_constraint(std::move(terms), lp::Sense::LessEq, 0.0);  // u <= <w, z>
    m_cuts.push_back(w);
    return true;
  };
  auto add_M_cut = [&](const std::vector<double>& w) {
    if (known(M_cuts, w)) return false;
    std::vector<lp::Term> terms{{vv, 1.0}};
    for (int d = 0; d < n; ++d)
      if (w[d] != 0.0) terms.push_back({vy[d], -w[d]});
    prob.add_constraint(std::move(terms), lp::Sense::GreaterEq, 0.0);  // v >= <w, y>
    M_cuts.push_back(w);
    return true;
  };
  auto cut_value = [n](const std::vector<std::vector<double>>& cuts,
                       const std::vector<double>& x, bool lower) {
    double best = 0.0;
    bool first = true;
    for (const auto& w : cuts) {
      double v = 0.0;
      for (int d = 0; d < n; ++d) v += w[d] * x[d];
      if (first || (lower ? v < best : v > best)) best = v;
      first = false;
    }
    return best;
  };

  if (oracle.needs_cuts()) {
    add_m_cut(oracle.pi());
    add_M_cut(oracle.pi());
  } else {
    for (const auto& w : oracle.m_supports()) add_m_cut(w);
    for (const auto& w : oracle.M_supports()) add_M_cut(w);
  }

  // maximize u - sum_j alpha_j img_j - v
  std::vector<lp::Term> objective{{vu, 1.0}, {vv, -1.0}};
  for (int j = 0; j < nb; ++j)
    if (geo.image_at[j] != 0.0) objective.push_back({va[j], -geo.image_at[j]});

  // |alpha| epigraph variables for the norm-minimizing second stage; the
  // optimal face often contains flat rays (shift alpha, z, y together), and
  // picking the least-norm optimum keeps genuine unboundedness detectable
  // at the variable caps.
  std::vector<int> vt(nb);
  for (int j = 0; j < nb; ++j) {
    vt[j] = prob.add_variable(0.0, lp::kInf);
    prob.add_constraint({{vt[j], 1.0}, {va[j], -1.0}}, lp::Sense::GreaterEq, 0.0);
    prob.add_constraint({{vt[j], 1.0}, {va[j], 1.0}}, lp::Sense::GreaterEq, 0.0);
  }

  auto solve_two_stage = [&]() {
    lp::Problem stage1 = prob;
    stage1.set_objective(objective, /*maximize=*/true);
    const lp::Result val = stage1.solve();
    if (val.status != lp::Status::Optimal)
      throw NumericalError("cell program: LP solver returned a non-optimal status on cell " +
                           std::to_string(geo.s_cell));
    lp::Problem stage2 = prob;
    std::vector<lp::Term> pin = objective;
    stage2.add_constraint(std::move(pin), lp::Sense::GreaterEq,
                          val.objective - 1e-9 * (1.0 + std::abs(val.objective)));
    std::vector<lp::Term> norm;
    for (int j = 0; j < nb; ++j) norm.push_back({vt[j], 1.0});
    for (int d = 0; d < n; ++d) norm.push_back({vz[d], 1.0});
    for (int d = 0; d < n; ++d) norm.push_back({vy[d], 1.0});
    stage2.set_objective(std::move(norm), /*maximize=*/false);
    lp::Result point = stage2.solve();
    if (point.status != lp::Status::Optimal)
      point = val;  // cap-scale optimum: the pinned re-solve can fail; keep stage 1
    point.objective = val.objective;
    return point;
  };

  CellProgramResult res;
  for (int round = 0;; ++round) {
    const lp::Result sol = solve_two_stage();
    res.alpha.assign(nb, 0.0);
    res.z.assign(n, 0.0);
    res.y.assign(n, 0.0);
    for (int j = 0; j < nb; ++j) res.alpha[j] = sol.x[va[j]];
    for (int d = 0; d < n; ++d) res.z[d] = sol.x[vz[d]];
    for (int d = 0; d < n; ++d) res.y[d] = sol.x[vy[d]];
    // cut-implied bound estimates at the returned point (the LP variables
    // u, v float freely after the norm stage)
    const double u_star = cut_value(m_cuts, res.z, /*lower=*/true);
    const double v_star = cut_value(M_cuts, res.y, /*lower=*/false);

    auto [m_true, m_supp] = oracle.m_at(res.z);
    auto [M_true, M_supp] = oracle.M_at(res.y);
    bool progress = false;
    if (oracle.needs_cuts()) {
      // a repeated support means the model is already as tight as the
      // kernel can certify at this point; only genuinely new cuts count
      if (u_star > m_true + cut_tol && add_m_cut(m_supp)) progress = true;
      if (v_star < M_true - cut_tol && add_M_cut(M_supp)) progress = true;
    }
    if (progress) {
      if (round >= max_cuts)
        throw NumericalError("cell program: cutting-plane cap (" + std::to_string(max_cuts) +
                             ") exceeded on cell " + std::to_string(geo.s_cell));
      res.cuts_used = round + 1;
      continue;
    }

    // stage-1 optimum: exact for complete-support families, within cut_tol
    // of the true sup once the oracle cuts are tight at the returned point
    res.value = sol.objective;

    res.capped = false;
    for (int j = 0; j < nb; ++j)
      if (std::abs(res.alpha[j]) >= 0.999 * kAlphaCap) res.capped = true;
    for (int d = 0; d < n; ++d) {
      if (res.z[d] >= 0.999 * kVarCap) res.capped = true;
      // y_cap <= 1 is the sandwich normalization, not a boundedness guard
      if (y_cap > 1.0 && res.y[d] >= 0.999 * y_cap) res.capped = true;
    }
    return res;
  }
}

CellPriceRange cell_price_range(const CellGeometry& geo, double delta,
                                const std::vector<double>& y0, double cut_tol,
                                int max_cuts) {
  const int n = static_cast<int>(geo.tcells.size());
  const int nb = static_cast<int>(geo.basis_on.size());
  const double d2 = delta * delta;

  lp::Problem prob;
  std::vector<int> vq(n);
  for (int d = 0; d < n; ++d) vq[d] = prob.add_variable(0.0, 1.0);
  std::vector<std::string> labels;
  {
    std::vector<lp::Term> terms;
    for (int d = 0; d < n; ++d) terms.push_back({vq[d], 1.0});
    prob.add_constraint(std::move(terms), lp::Sense::Equal, 1.0);
    labels.push_back("unit mass");
  }
  for (int j = 0; j < nb; ++j) {
    std::vector<lp::Term> terms;
    for (int d = 0; d < n; ++d)
      if (geo.basis_on[j][d] != 0.0) terms.push_back({vq[d], geo.basis_on[j][d]});
    prob.add_constraint(std::move(terms), lp::Sense::Equal, geo.image_at[j]);
    labels.push_back("pricing of span claim " + std::to_string(j));
  }

  auto budget = [&](const std::vector<double>& q) {
    double g = 0.0;
    for (int d = 0; d < n; ++d) {
      const double r = q[d] / geo.pi[d] - 1.0;
      g += geo.pi[d] * r * r;
    }
    return g;
  };

  CellPriceRange out;
  std::vector<lp::Term> objective;
  for (int d = 0; d < n; ++d)
    if (y0[d] != 0.0) objective.push_back({vq[d], y0[d]});

  // Inner feasible anchor for chord mixing: the pricing-consistent density
  // closest to pi in weighted L1 (usually deep inside the budget ball).
  std::optional<std::vector<double>> anchor;
  {
    lp::Problem center = prob;
    std::vector<lp::Term> obj;
    for (int d = 0; d < n; ++d) {
      const int e = center.add_variable(0.0, lp::kInf);
      center.add_constraint({{e, 1.0}, {vq[d], -1.0 / geo.pi[d]}}, lp::Sense::GreaterEq, -1.0);
      center.add_constraint({{e, 1.0}, {vq[d], 1.0 / geo.pi[d]}}, lp::Sense::GreaterEq, 1.0);
      obj.push_back({e, geo.pi[d]});
    }
    center.set_objective(std::move(obj), false);
    const lp::Result sol = center.solve();
    if (sol.status == lp::Status::Infeasible) {
      out.feasible = false;
      std::string note = "no consistent density on cell " + std::to_string(geo.s_cell) +
                         "; dual combination:";
      for (size_t i = 0; i < sol.farkas.size() && i < labels.size(); ++i)
        if (std::abs(sol.farkas[i]) > 1e-9)
          note += " " + std::to_string(sol.farkas[i]) + " x [" + labels[i] + "]";
      out.certificate = std::move(note);
      return out;
    }
    if (sol.status == lp::Status::Optimal) {
      std::vector<double> q(n);
      for (int d = 0; d < n; ++d) q[d] = sol.x[vq[d]];
      if (budget(q) <= d2) anchor = std::move(q);
    }
  }

  // largest theta in [0,1] with budget(a + theta (b - a)) <= d2, given
  // budget(a) <= d2; the budget is quadratic along the chord
  auto chord_to_sphere = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double qa = 0.0, qb = 0.0, qc = -d2;
    for (int d = 0; d < n; ++d) {
      const double base = a[d] / geo.pi[d] - 1.0;
      const double dirv = (b[d] - a[d]) / geo.pi[d];
      qa += geo.pi[d] * dirv * dirv;
      qb += 2.0 * geo.pi[d] * base * dirv;
      qc += geo.pi[d] * base * base;
    }
    double theta = 1.0;
    if (qa > 0.0) {
      const double disc = qb * qb - 4.0 * qa * qc;
      theta = disc >= 0.0 ? std::max(0.0, (-qb + std::sqrt(disc)) / (2.0 * qa)) : 0.0;
    }
    theta = std::min(1.0, theta);
    std::vector<double> mix(n);
    for (int d = 0; d < n; ++d) mix[d] = a[d] + theta * (b[d] - a[d]);
    return mix;
  };
  auto price_of = [&](const std::vector<double>& q) {
    double v = 0.0;
    for (int d = 0; d < n; ++d) v += y0[d] * q[d];
    return v;
  };

  for (int dir = 0; dir < 2; ++dir) {
    const bool maximize = dir == 1;
    std::optional<std::vector<double>> inner = anchor;
    for (int round = 0;; ++round) {
      if (round > max_cuts)
        throw NumericalError("cell_price_range: cut cap exceeded on cell " +
                             std::to_string(geo.s_cell));
      lp::Problem solve_prob = prob;
      solve_prob.set_objective(objective, maximize);
      const lp::Result sol = solve_prob.solve();
      if (sol.status == lp::Status::Infeasible) {
        out.feasible = false;
        out.certificate = "no consistent density on cell " + std::to_string(geo.s_cell) +
                          " once the budget cuts accumulate";
        return out;
      }
      if (sol.status != lp::Status::Optimal)
        throw NumericalError("cell_price_range: unexpected LP status on cell " +
                             std::to_string(geo.s_cell));
      std::vector<double> q(n);
      for (int d = 0; d < n; ++d) q[d] = sol.x[vq[d]];
      if (budget(q) <= d2 + cut_tol) {
        (maximize ? out.hi : out.lo) = sol.objective;
        break;
      }
      if (inner) {
        // feasible chord point bounds the optimum from inside
        std::vector<double> mix = chord_to_sphere(*inner, q);
        const double lb = price_of(mix);
        const double ub = sol.objective;
        if (std::abs(ub - lb) <= 1e-8 * std::max(1.0, std::abs(ub))) {
          (maximize ? out.hi : out.lo) = lb;
          break;
        }
        if (maximize ? lb > price_of(*inner) : lb < price_of(*inner)) inner = std::move(mix);
      }
      std::vector<double> cut_dir(n);
      for (int d = 0; d < n; ++d) cut_dir[d] = q[d] / geo.pi[d] - 1.0;
      const double h = goodd_cell(geo.pi, cut_dir, delta, OptDirection::Sup, geo.s_cell).value;
      std::vector<lp::Term> terms;
      for (int d = 0; d < n; ++d)
        if (cut_dir[d] != 0.0) terms.push_back({vq[d], cut_dir[d]});
      prob.add_constraint(std::move(terms), lp::Sense::LessEq, h);
      labels.push_back("budget cut");
      ++out.cuts_used;
    }
  }
  return out;
}

}  // namespace sandwich::detail
