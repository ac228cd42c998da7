#include <algorithm>
#include <cmath>
#include <sstream>

#include "sandwich/errors.hpp"
#include "sandwich/ftap.hpp"
#include "sandwich/lp.hpp"

namespace sandwich {

namespace {

// Conditional member densities over the F_t-cells inside one F_s-cell.
std::vector<std::vector<double>> member_supports(const FilteredSpace& space,
                                                 const std::vector<Density>& fam, int t,
                                                 const std::vector<int>& tcells) {
  std::vector<std::vector<double>> ws;
  ws.reserve(fam.size());
  for (const Density& q : fam) {
    std::vector<double> w(tcells.size(), 0.0);
    double total = 0.0;
    for (size_t d = 0; d < tcells.size(); ++d) {
      for (int atom : space.cells(t)[tcells[d]]) w[d] += space.prob(atom) * q[atom];
      total += w[d];
    }
    for (double& v : w) v /= total;
    ws.push_back(std::move(w));
  }
  return ws;
}

double budget_of_cond(const std::vector<double>& pi, const std::vector<double>& q) {
  double g = 0.0;
  for (size_t d = 0; d < pi.size(); ++d) {
    const double r = q[d] / pi[d] - 1.0;
    g += pi[d] * r * r;
  }
  return g;
}

}  // namespace

// ---------------------------------------------------------------------------
// Global oracle

FeasibilityCertificate lp_feasibility(const PriceSystem& ps, const BoundFamily& bounds,
                                      const FeasibilityOptions& opts) {
  const SpacePtr& space = ps.space();
  if (bound_space(bounds) != space)
    throw ValidationError("lp_feasibility: bounds on a different space");
  if (std::holds_alternative<ComposedGoodDeal>(bounds))
    throw ValidationError("lp_feasibility: composed good-deal bounds are not supported; "
                          "use the good_deal variant");
  const int n = space->n_atoms();
  const int L = space->n_levels();
  const bool good_deal = std::holds_alternative<GoodDeal>(bounds);

  lp::Problem prob;
  std::vector<std::string> labels;
  std::vector<int> vf(n);
  for (int i = 0; i < n; ++i) vf[i] = prob.add_variable(opts.eps_pos, lp::kInf);

  // Centering objective: minimize the weighted L1 distance to the reference
  // density f == 1. Keeps the cutting-plane iterates away from extreme
  // vertices (the quadratic budgets measure exactly this kind of distance)
  // and makes the returned measure deterministic and well-behaved.
  {
    std::vector<lp::Term> obj;
    for (int i = 0; i < n; ++i) {
      const int e = prob.add_variable(0.0, lp::kInf);
      prob.add_constraint({{e, 1.0}, {vf[i], -1.0}}, lp::Sense::GreaterEq, -1.0);
      prob.add_constraint({{e, 1.0}, {vf[i], 1.0}}, lp::Sense::GreaterEq, 1.0);
      labels.push_back("centering+ atom " + std::to_string(i));
      labels.push_back("centering- atom " + std::to_string(i));
      obj.push_back({e, space->prob(i)});
    }
    prob.set_objective(std::move(obj), /*maximize=*/false);
  }

  // E[f | F_0] = 1 per cell
  for (int c = 0; c < space->n_cells(0); ++c) {
    std::vector<lp::Term> terms;
    for (int atom : space->cells(0)[c]) terms.push_back({vf[atom], space->prob(atom)});
    prob.add_constraint(std::move(terms), lp::Sense::Equal, space->cell_mass(0, c));
    labels.push_back("normalization F_0-cell " + std::to_string(c));
  }

  // pricing constraints for every pair
  for (int s = 0; s < L; ++s)
    for (int t = s + 1; t < L; ++t) {
      const auto& basis = ps.claims(t).basis();
      const auto& imgs = ps.images(s, t);
      const int unit = ps.claims(t).unit_index();
      for (size_t j = 0; j < basis.size(); ++j) {
        if (static_cast<int>(j) == unit) continue;
        for (int c = 0; c < space->n_cells(s); ++c) {
          const double price = imgs[j].value_on_cell(s, c);
          std::vector<lp::Term> terms;
          for (int atom : space->cells(s)[c])
            terms.push_back({vf[atom], space->prob(atom) * (basis[j][atom] - price)});
          prob.add_constraint(std::move(terms), lp::Sense::Equal, 0.0);
          labels.push_back("pricing (" + std::to_string(s) + "," + std::to_string(t) +
                           ") claim " + std::to_string(j) + " cell " + std::to_string(c));
        }
      }
    }

  // bound constraints per family
  if (const auto* db = std::get_if<DensityBounds>(&bounds)) {
    for (int s = 0; s < L; ++s)
      for (int t = s + 1; t < L; ++t) {
        const RandomVariable mw = db->m_weight(s, t);
        const RandomVariable Mw = db->M_weight(s, t);
        for (int d = 0; d < space->n_cells(t); ++d) {
          const int A = space->cell_of(s, space->cells(t)[d].front());
          const double md = mw.value_on_cell(t, d);
          const double Md = Mw.value_on_cell(t, d);
          const double invd = 1.0 / space->cell_mass(t, d);
          const double invA = 1.0 / space->cell_mass(s, A);
          for (int side = 0; side < 2; ++side) {
            const double wgt = side == 0 ? md : Md;
            std::vector<lp::Term> terms;
            for (int atom : space->cells(t)[d])
              terms.push_back({vf[atom], space->prob(atom) * invd});
            for (int atom : space->cells(s)[A])
              terms.push_back({vf[atom], -wgt * space->prob(atom) * invA});
            prob.add_constraint(std::move(terms),
                                side == 0 ? lp::Sense::GreaterEq : lp::Sense::LessEq, 0.0);
            labels.push_back(std::string(side == 0 ? "density lower" : "density upper") +
                             " (" + std::to_string(s) + "," + std::to_string(t) + ") t-cell " +
                             std::to_string(d));
          }
        }
      }
  } else if (const auto* mf = std::get_if<MeasureFamilies>(&bounds)) {
    for (int s = 0; s < L; ++s)
      for (int t = s + 1; t < L; ++t) {
        const auto sub = subcells(*space, s, t);
        for (int A = 0; A < space->n_cells(s); ++A) {
          for (int fam = 0; fam < 2; ++fam) {
            const auto& members = fam == 0 ? mf->upper() : mf->lower();
            const auto ws = member_supports(*space, members, t, sub[A]);
            std::vector<int> vnu(members.size());
            for (size_t q = 0; q < members.size(); ++q) vnu[q] = prob.add_variable(0.0, lp::kInf);
            for (size_t d = 0; d < sub[A].size(); ++d) {
              std::vector<lp::Term> terms;
              for (int atom : space->cells(t)[sub[A][d]])
                terms.push_back({vf[atom], space->prob(atom)});
              for (size_t q = 0; q < members.size(); ++q)
                terms.push_back({vnu[q], -ws[q][d]});
              prob.add_constraint(std::move(terms), lp::Sense::Equal, 0.0);
              labels.push_back(std::string(fam == 0 ? "upper" : "lower") + "-hull (" +
                               std::to_string(s) + "," + std::to_string(t) + ") cell " +
                               std::to_string(A) + " t-cell " + std::to_string(sub[A][d]));
            }
          }
        }
      }
  }

  FeasibilityCertificate cert;
  cert.method = good_deal ? "cutting-plane" : "exact-lp";
  const auto* gd = std::get_if<GoodDeal>(&bounds);

  for (int round = 0;; ++round) {
    if (round > opts.max_iterations)
      throw NumericalError("lp_feasibility: cutting-plane iteration cap exceeded");
    const lp::Result sol = prob.solve();
    if (sol.status == lp::Status::Infeasible) {
      if (getenv("SANDWICH_LP_DEBUG"))
        fprintf(stderr, "[lp_feasibility] phase1 residual %.3e farkas %.3e rows %d\n",
                sol.phase1, sol.farkas_value, prob.n_constraints());
      if (!(sol.farkas_value < -1e-10))
        throw NumericalError(
            "lp_feasibility: infeasibility reported without a verifiable certificate");
      cert.status = FeasStatus::Infeasible;
      cert.farkas = sol.farkas;
      cert.farkas_value = sol.farkas_value;
      cert.row_labels = labels;
      cert.cuts_used = round;
      return cert;
    }
    if (sol.status != lp::Status::Optimal)
      throw NumericalError("lp_feasibility: unexpected LP status");

    std::vector<double> f(n);
    for (int i = 0; i < n; ++i) f[i] = sol.x[vf[i]];

    if (!good_deal) {
      cert.status = FeasStatus::Feasible;
      cert.measure = Density(space, std::move(f));
      cert.cuts_used = round;
      return cert;
    }

    // quadratic budgets: cut every violated (pair, cell)
    bool violated = false;
    for (int s = 0; s < L; ++s)
      for (int t = s + 1; t < L; ++t) {
        const double delta = gd->delta_st(s, t);
        const auto sub = subcells(*space, s, t);
        for (int A = 0; A < space->n_cells(s); ++A) {
          const int nd = static_cast<int>(sub[A].size());
          std::vector<double> pi(nd), u(nd);
          double uA = 0.0;
          for (int d = 0; d < nd; ++d) {
            pi[d] = space->cell_mass(t, sub[A][d]) / space->cell_mass(s, A);
            u[d] = 0.0;
            for (int atom : space->cells(t)[sub[A][d]]) u[d] += space->prob(atom) * f[atom];
            uA += u[d];
          }
          std::vector<double> q(nd);
          for (int d = 0; d < nd; ++d) q[d] = u[d] / uA;
          const double g = budget_of_cond(pi, q);
          if (g <= delta * delta + opts.cut_tol) continue;
          violated = true;
          // gradient direction c_d = q_d/pi_d - 1; support value from the kernel
          std::vector<double> dir(nd);
          for (int d = 0; d < nd; ++d) dir[d] = q[d] / pi[d] - 1.0;
          const double h = goodd_cell(pi, dir, delta, OptDirection::Sup, A).value;
          std::vector<lp::Term> terms;
          for (int d = 0; d < nd; ++d)
            for (int atom : space->cells(t)[sub[A][d]])
              terms.push_back({vf[atom], dir[d] * space->prob(atom)});
          for (int d = 0; d < nd; ++d)
            for (int atom : space->cells(t)[sub[A][d]])
              terms.push_back({vf[atom], -h * space->prob(atom)});
          prob.add_constraint(std::move(terms), lp::Sense::LessEq, 0.0);
          labels.push_back("gd-cut (" + std::to_string(s) + "," + std::to_string(t) +
                           ") cell " + std::to_string(A) + " #" + std::to_string(round));
        }
      }
    if (!violated) {
      cert.status = FeasStatus::Feasible;
      cert.measure = Density(space, std::move(f));
      cert.cuts_used = round;
      return cert;
    }
  }
}

// ---------------------------------------------------------------------------
// Single-pair oracle at F_t granularity

PairFeasibility pair_feasibility(const PartialOperator& op, const BoundFamily& bounds,
                                 const FeasibilityOptions& opts) {
  if (op.basis.empty()) throw ValidationError("pair_feasibility: empty operator");
  const SpacePtr& space = op.basis.front().space();
  if (std::holds_alternative<ComposedGoodDeal>(bounds))
    throw ValidationError("pair_feasibility: composed good-deal bounds are not supported");
  const int s = op.s, t = op.t;
  const int nt = space->n_cells(t);
  const auto sub = subcells(*space, s, t);

  lp::Problem prob;
  std::vector<std::string> labels;
  std::vector<int> vf(nt);
  for (int d = 0; d < nt; ++d) vf[d] = prob.add_variable(0.0, lp::kInf);

  // same centering objective as the global oracle
  {
    std::vector<lp::Term> obj;
    for (int d = 0; d < nt; ++d) {
      const int e = prob.add_variable(0.0, lp::kInf);
      prob.add_constraint({{e, 1.0}, {vf[d], -1.0}}, lp::Sense::GreaterEq, -1.0);
      prob.add_constraint({{e, 1.0}, {vf[d], 1.0}}, lp::Sense::GreaterEq, 1.0);
      labels.push_back("centering+ t-cell " + std::to_string(d));
      labels.push_back("centering- t-cell " + std::to_string(d));
      obj.push_back({e, space->cell_mass(t, d)});
    }
    prob.set_objective(std::move(obj), /*maximize=*/false);
  }

  for (int A = 0; A < space->n_cells(s); ++A) {
    std::vector<lp::Term> terms;
    for (int d : sub[A]) terms.push_back({vf[d], space->cell_mass(t, d)});
    prob.add_constraint(std::move(terms), lp::Sense::Equal, space->cell_mass(s, A));
    labels.push_back("normalization cell " + std::to_string(A));
  }
  for (size_t j = 0; j < op.basis.size(); ++j)
    for (int A = 0; A < space->n_cells(s); ++A) {
      const double price = op.images[j].value_on_cell(s, A);
      std::vector<lp::Term> terms;
      for (int d : sub[A])
        terms.push_back({vf[d], space->cell_mass(t, d) * op.basis[j].value_on_cell(t, d)});
      prob.add_constraint(std::move(terms), lp::Sense::Equal,
                          price * space->cell_mass(s, A));
      labels.push_back("pricing claim " + std::to_string(j) + " cell " + std::to_string(A));
    }

  const auto* gd = std::get_if<GoodDeal>(&bounds);
  if (const auto* db = std::get_if<DensityBounds>(&bounds)) {
    const RandomVariable mw = db->m_weight(s, t);
    const RandomVariable Mw = db->M_weight(s, t);
    for (int d = 0; d < nt; ++d) {
      prob.add_constraint({{vf[d], 1.0}}, lp::Sense::GreaterEq, mw.value_on_cell(t, d));
      labels.push_back("density lower t-cell " + std::to_string(d));
      prob.add_constraint({{vf[d], 1.0}}, lp::Sense::LessEq, Mw.value_on_cell(t, d));
      labels.push_back("density upper t-cell " + std::to_string(d));
    }
  } else if (const auto* mf = std::get_if<MeasureFamilies>(&bounds)) {
    for (int A = 0; A < space->n_cells(s); ++A)
      for (int fam = 0; fam < 2; ++fam) {
        const auto& members = fam == 0 ? mf->upper() : mf->lower();
        const auto ws = member_supports(*space, members, t, sub[A]);
        std::vector<int> vnu(members.size());
        for (size_t q = 0; q < members.size(); ++q) vnu[q] = prob.add_variable(0.0, lp::kInf);
        for (size_t d = 0; d < sub[A].size(); ++d) {
          std::vector<lp::Term> terms{{vf[sub[A][d]], space->cell_mass(t, sub[A][d])}};
          for (size_t q = 0; q < members.size(); ++q)
            terms.push_back({vnu[q], -ws[q][d] * space->cell_mass(s, A)});
          prob.add_constraint(std::move(terms), lp::Sense::Equal, 0.0);
          labels.push_back(std::string(fam == 0 ? "upper" : "lower") + "-hull cell " +
                           std::to_string(A) + " t-cell " + std::to_string(sub[A][d]));
        }
      }
  }

  PairFeasibility out;
  for (int round = 0;; ++round) {
    if (round > opts.max_iterations)
      throw NumericalError("pair_feasibility: cutting-plane iteration cap exceeded");
    const lp::Result sol = prob.solve();
    if (sol.status == lp::Status::Infeasible) {
      if (!(sol.farkas_value < -1e-10))
        throw NumericalError(
            "pair_feasibility: infeasibility reported without a verifiable certificate");
      out.feasible = false;
      out.farkas = sol.farkas;
      out.farkas_value = sol.farkas_value;
      out.row_labels = labels;
      out.cuts_used = round;
      return out;
    }
    if (sol.status != lp::Status::Optimal)
      throw NumericalError("pair_feasibility: unexpected LP status");
    std::vector<double> f(nt);
    for (int d = 0; d < nt; ++d) f[d] = sol.x[vf[d]];

    if (!gd) {
      out.feasible = true;
      out.f_tcells = std::move(f);
      out.cuts_used = round;
      return out;
    }
    const double delta = gd->delta_st(s, t);
    bool violated = false;
    for (int A = 0; A < space->n_cells(s); ++A) {
      const int nd = static_cast<int>(sub[A].size());
      std::vector<double> pi(nd), q(nd);
      for (int d = 0; d < nd; ++d) {
        pi[d] = space->cell_mass(t, sub[A][d]) / space->cell_mass(s, A);
        q[d] = pi[d] * f[sub[A][d]];
      }
      const double g = budget_of_cond(pi, q);
      if (g <= delta * delta + opts.cut_tol) continue;
      violated = true;
      std::vector<double> dir(nd);
      for (int d = 0; d < nd; ++d) dir[d] = q[d] / pi[d] - 1.0;
      const double h = goodd_cell(pi, dir, delta, OptDirection::Sup, A).value;
      std::vector<lp::Term> terms;
      for (int d = 0; d < nd; ++d)
        terms.push_back({vf[sub[A][d]], (dir[d] - h) * pi[d]});
      prob.add_constraint(std::move(terms), lp::Sense::LessEq, 0.0);
      labels.push_back("gd-cut cell " + std::to_string(A) + " #" + std::to_string(round));
    }
    if (!violated) {
      out.feasible = true;
      out.f_tcells = std::move(f);
      out.cuts_used = round;
      return out;
    }
  }
}

// ---------------------------------------------------------------------------
// Residual of the full constraint system at a candidate density

double feasibility_residual(const PriceSystem& ps, const BoundFamily& bounds, const Density& f,
                            double eps_pos) {
  const SpacePtr& space = ps.space();
  const int L = space->n_levels();
  double worst = 0.0;

  const RandomVariable frv = f.as_rv();
  worst = std::max(worst, eps_pos - frv.min_value());

  const RandomVariable mean0 = cond_expect(frv, 0);
  for (int c = 0; c < space->n_cells(0); ++c)
    worst = std::max(worst, std::abs(mean0.value_on_cell(0, c) - 1.0));

  std::vector<RandomVariable> f_at;
  for (int k = 0; k < L; ++k) f_at.push_back(cond_expect(frv, k));

  for (int s = 0; s < L; ++s)
    for (int t = s + 1; t < L; ++t) {
      const auto& basis = ps.claims(t).basis();
      const auto& imgs = ps.images(s, t);
      for (size_t j = 0; j < basis.size(); ++j) {
        const RandomVariable cond = cond_expect_under(frv, basis[j], s);
        for (int i = 0; i < space->n_atoms(); ++i)
          worst = std::max(worst, std::abs(cond[i] - imgs[j][i]));
      }

      if (const auto* db = std::get_if<DensityBounds>(&bounds)) {
        const RandomVariable mw = db->m_weight(s, t);
        const RandomVariable Mw = db->M_weight(s, t);
        for (int i = 0; i < space->n_atoms(); ++i) {
          const double ratio = f_at[t][i] / f_at[s][i];
          worst = std::max(worst, mw[i] - ratio);
          worst = std::max(worst, ratio - Mw[i]);
        }
      } else if (const auto* mf = std::get_if<MeasureFamilies>(&bounds)) {
        const auto sub = subcells(*space, s, t);
        for (int A = 0; A < space->n_cells(s); ++A) {
          const int nd = static_cast<int>(sub[A].size());
          std::vector<double> q(nd);
          double uA = 0.0;
          for (int d = 0; d < nd; ++d) {
            q[d] = 0.0;
            for (int atom : space->cells(t)[sub[A][d]])
              q[d] += space->prob(atom) * frv[atom];
            uA += q[d];
          }
          for (double& v : q) v /= uA;
          for (int fam = 0; fam < 2; ++fam) {
            const auto& members = fam == 0 ? mf->upper() : mf->lower();
            const auto ws = member_supports(*space, members, t, sub[A]);
            // L1 distance from q to the convex hull of the member supports
            lp::Problem prob;
            std::vector<int> vmu(members.size());
            for (size_t m = 0; m < members.size(); ++m)
              vmu[m] = prob.add_variable(0.0, lp::kInf);
            std::vector<int> vep(nd), ven(nd);
            for (int d = 0; d < nd; ++d) {
              vep[d] = prob.add_variable(0.0, lp::kInf);
              ven[d] = prob.add_variable(0.0, lp::kInf);
            }
            for (int d = 0; d < nd; ++d) {
              std::vector<lp::Term> terms{{vep[d], 1.0}, {ven[d], -1.0}};
              for (size_t m = 0; m < members.size(); ++m) terms.push_back({vmu[m], ws[m][d]});
              prob.add_constraint(std::move(terms), lp::Sense::Equal, q[d]);
            }
            std::vector<lp::Term> one;
            for (size_t m = 0; m < members.size(); ++m) one.push_back({vmu[m], 1.0});
            prob.add_constraint(std::move(one), lp::Sense::Equal, 1.0);
            std::vector<lp::Term> obj;
            for (int d = 0; d < nd; ++d) {
              obj.push_back({vep[d], 1.0});
              obj.push_back({ven[d], 1.0});
            }
            prob.set_objective(std::move(obj), false);
            const auto sol = prob.solve();
            if (sol.status == lp::Status::Optimal) worst = std::max(worst, sol.objective);
          }
        }
      } else if (const auto* gd = std::get_if<GoodDeal>(&bounds)) {
        const double delta = gd->delta_st(s, t);
        const auto sub = subcells(*space, s, t);
        for (int A = 0; A < space->n_cells(s); ++A) {
          const int nd = static_cast<int>(sub[A].size());
          std::vector<double> pi(nd), q(nd);
          double uA = 0.0;
          for (int d = 0; d < nd; ++d) {
            pi[d] = space->cell_mass(t, sub[A][d]) / space->cell_mass(s, A);
            q[d] = 0.0;
            for (int atom : space->cells(t)[sub[A][d]])
              q[d] += space->prob(atom) * frv[atom];
            uA += q[d];
          }
          for (double& v : q) v /= uA;
          worst = std::max(worst, budget_of_cond(pi, q) - delta * delta);
        }
      }
    }
  return worst;
}

}  // namespace sandwich
