#include "sandwich/price_system.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "cell_programs.hpp"
#include "sandwich/errors.hpp"
#include "sandwich/ftap.hpp"
#include "sandwich/lp.hpp"

namespace sandwich {

namespace {
constexpr double kAxiomTol = 1e-10;
}

// ---------------------------------------------------------------------------
// ClaimSpace / PriceSystem

ClaimSpace::ClaimSpace(SpacePtr space, int time_index, std::vector<RandomVariable> basis)
    : space_(std::move(space)),
      time_index_(time_index),
      basis_(std::move(basis)),
      span_(basis_),
      unit_index_(-1) {
  std::vector<std::string> issues;
  space_->require_level(time_index_);
  for (size_t j = 0; j < basis_.size(); ++j) {
    if (basis_[j].space() != space_)
      issues.push_back("claims[" + std::to_string(j) + "]: wrong space");
    else if (basis_[j].level() > time_index_)
      issues.push_back("claims[" + std::to_string(j) + "]: level " +
                       std::to_string(basis_[j].level()) + " exceeds time index " +
                       std::to_string(time_index_));
    bool unit = true;
    for (int i = 0; i < basis_[j].size(); ++i)
      if (std::abs(basis_[j][i] - 1.0) > 1e-12) {
        unit = false;
        break;
      }
    if (unit && unit_index_ < 0) unit_index_ = static_cast<int>(j);
  }
  if (unit_index_ < 0)
    issues.push_back("claims at t-index " + std::to_string(time_index_) +
                     ": the constant 1 must be a basis claim");
  if (!span_.independent(1e-10))
    issues.push_back("claims at t-index " + std::to_string(time_index_) +
                     ": basis is not linearly independent (rank " +
                     std::to_string(span_.rank(1e-10)) + " of " +
                     std::to_string(basis_.size()) + ")");
  if (!issues.empty()) throw ValidationError(issues);
}

PriceSystem::PriceSystem(SpacePtr space, std::vector<ClaimSpace> claim_spaces,
                         std::map<std::pair<int, int>, std::vector<RandomVariable>> images)
    : space_(std::move(space)), claim_spaces_(std::move(claim_spaces)), images_(std::move(images)) {
  std::vector<std::string> issues;
  const int L = space_->n_levels();
  if (static_cast<int>(claim_spaces_.size()) != L)
    issues.push_back("price system: expected one claim space per grid point");
  else
    for (int k = 0; k < L; ++k)
      if (claim_spaces_[k].time_index() != k)
        issues.push_back("price system: claim space " + std::to_string(k) +
                         " has time index " + std::to_string(claim_spaces_[k].time_index()));
  if (!issues.empty()) throw ValidationError(issues);

  for (int s = 0; s < L; ++s)
    for (int t = s + 1; t < L; ++t) {
      const auto it = images_.find({s, t});
      const std::string tag = "prices(" + std::to_string(s) + "," + std::to_string(t) + ")";
      if (it == images_.end()) {
        issues.push_back(tag + ": missing");
        continue;
      }
      const auto& imgs = it->second;
      if (imgs.size() != claim_spaces_[t].basis().size()) {
        issues.push_back(tag + ": expected " +
                         std::to_string(claim_spaces_[t].basis().size()) + " images, got " +
                         std::to_string(imgs.size()));
        continue;
      }
      for (size_t j = 0; j < imgs.size(); ++j) {
        if (imgs[j].space() != space_) issues.push_back(tag + ": image on wrong space");
        else if (imgs[j].level() > s)
          issues.push_back(tag + "[" + std::to_string(j) + "]: image level " +
                           std::to_string(imgs[j].level()) + " exceeds s");
      }
      // normalization x_st(1) = 1
      const int u = claim_spaces_[t].unit_index();
      if (u >= 0 && static_cast<size_t>(u) < imgs.size()) {
        double worst = 0.0;
        for (int i = 0; i < space_->n_atoms(); ++i)
          worst = std::max(worst, std::abs(imgs[u][i] - 1.0));
        if (worst > kAxiomTol)
          issues.push_back(tag + ": normalization fails, |x(1) - 1| = " + std::to_string(worst));
      }
    }
  if (!issues.empty()) throw ValidationError(issues);

  // Restriction property: x_st agrees with x_sT on L_t.
  const int T = L - 1;
  for (int t = 1; t < T; ++t) {
    const auto& basis_t = claim_spaces_[t].basis();
    for (size_t j = 0; j < basis_t.size(); ++j) {
      const auto coords = claim_spaces_[T].span().coordinates(basis_t[j], 1e-8);
      if (!coords) {
        issues.push_back("claims at t-index " + std::to_string(t) + ", basis " +
                         std::to_string(j) + ": not contained in span(L_T)");
        continue;
      }
      for (int s = 0; s < t; ++s) {
        const auto& imgs_T = images_.at({s, T});
        RandomVariable via_T = RandomVariable::constant(space_, 0.0);
        for (size_t k = 0; k < coords->size(); ++k)
          if ((*coords)[k] != 0.0) via_T = via_T + (*coords)[k] * imgs_T[k];
        const RandomVariable& direct = images_.at({s, t})[j];
        double worst = 0.0;
        for (int i = 0; i < space_->n_atoms(); ++i)
          worst = std::max(worst, std::abs(via_T[i] - direct[i]));
        if (worst > kAxiomTol)
          issues.push_back("restriction property fails for claim " + std::to_string(j) +
                           " of L_" + std::to_string(t) + " at s = " + std::to_string(s) +
                           " (deviation " + std::to_string(worst) + ")");
      }
    }
  }
  if (!issues.empty()) throw ValidationError(issues);
}

const ClaimSpace& PriceSystem::claims(int t) const {
  space_->require_level(t);
  return claim_spaces_[t];
}

const std::vector<RandomVariable>& PriceSystem::images(int s, int t) const {
  const auto it = images_.find({s, t});
  if (it == images_.end())
    throw ValidationError("prices(" + std::to_string(s) + "," + std::to_string(t) +
                          "): no such pair");
  return it->second;
}

PartialOperator PriceSystem::partial_operator(int s, int t) const {
  space_->require_level(s);
  space_->require_level(t);
  if (s > t) throw ValidationError("partial_operator: s must not exceed t");
  PartialOperator op;
  op.s = s;
  op.t = t;
  op.basis = claim_spaces_[t].basis();
  op.images = s == t ? op.basis : images(s, t);
  return op;
}

RandomVariable eval_price(const PriceSystem& ps, int s, int t, const RandomVariable& X) {
  const auto coords = ps.claims(t).span().coordinates(X, 1e-8);
  if (!coords)
    throw SpanError("eval_price: claim outside span(L_" + std::to_string(t) + ")");
  if (s == t) return X;
  const auto& imgs = ps.images(s, t);
  RandomVariable out = RandomVariable::constant(ps.space(), 0.0);
  for (size_t j = 0; j < coords->size(); ++j)
    if ((*coords)[j] != 0.0) out = out + (*coords)[j] * imgs[j];
  return out;
}

// ---------------------------------------------------------------------------
// Axioms

namespace {

struct PricedClaim {
  RandomVariable claim;
  RandomVariable price;
};

void track(AxiomCheck& check, double violation, const std::string& witness,
           double tol = kAxiomTol) {
  ++check.checked;
  if (violation > check.worst) {
    check.worst = violation;
    if (violation > tol) check.witness = witness;
  }
  if (violation > tol) check.passed = false;
}

// LP-derived quantities carry simplex roundoff well above the exact
// atom-wise comparisons; violations below this are noise, not verdicts.
constexpr double kLpNoiseTol = 1e-8;

}  // namespace

AxiomReport check_axioms(const PriceSystem& ps, std::uint64_t seed) {
  AxiomReport report;
  const auto& space = ps.space();
  const int L = space->n_levels();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);

  for (int s = 0; s < L; ++s) {
    for (int t = s + 1; t < L; ++t) {
      const auto& basis = ps.claims(t).basis();
      const auto& imgs = ps.images(s, t);
      const int J = static_cast<int>(basis.size());
      const std::string pair_tag = "(" + std::to_string(s) + "," + std::to_string(t) + ")";

      // normalization
      {
        const int u = ps.claims(t).unit_index();
        double worst = 0.0;
        for (int i = 0; i < space->n_atoms(); ++i)
          worst = std::max(worst, std::abs(imgs[u][i] - 1.0));
        track(report.normalization, worst, "x" + pair_tag + "(1) != 1");
      }

      // deterministic pool: basis, pairwise sums, seeded span elements
      std::vector<PricedClaim> pool;
      auto combine = [&](const std::vector<double>& c) {
        RandomVariable claim = RandomVariable::constant(space, 0.0);
        RandomVariable price = RandomVariable::constant(space, 0.0);
        for (int j = 0; j < J; ++j)
          if (c[j] != 0.0) {
            claim = claim + c[j] * basis[j];
            price = price + c[j] * imgs[j];
          }
        return PricedClaim{claim, price};
      };
      for (int j = 0; j < J; ++j) pool.push_back(PricedClaim{basis[j], imgs[j]});
      for (int a = 0; a < J; ++a)
        for (int b = a + 1; b < J; ++b)
          pool.push_back(PricedClaim{basis[a] + basis[b], imgs[a] + imgs[b]});
      for (int r = 0; r < 200; ++r) {
        std::vector<double> c(J);
        for (int j = 0; j < J; ++j) c[j] = coef(rng);
        pool.push_back(combine(c));
      }

      // monotonicity over comparable pool pairs
      for (size_t a = 0; a < pool.size(); ++a)
        for (size_t b = 0; b < pool.size(); ++b) {
          if (a == b) continue;
          bool dominates = true;
          for (int i = 0; i < space->n_atoms() && dominates; ++i)
            if (pool[a].claim[i] < pool[b].claim[i] - 1e-15) dominates = false;
          if (!dominates) continue;
          double worst = 0.0;
          for (int i = 0; i < space->n_atoms(); ++i)
            worst = std::max(worst, pool[b].price[i] - pool[a].price[i]);
          track(report.monotonicity, worst,
                "pool pair at " + pair_tag + ": X' >= X'' but x(X') < x(X'')");
        }

      // positivity LP per F_s-cell: min x(X)(c) s.t. X in span, X >= 0, E[X] = 1
      {
        const auto geometry = detail::make_cell_geometry(ps.partial_operator(s, t));
        std::vector<double> ebasis(J, 0.0);
        for (int j = 0; j < J; ++j) ebasis[j] = expectation(basis[j]);
        std::vector<double> eimg(J, 0.0);
        for (int j = 0; j < J; ++j) eimg[j] = expectation(imgs[j]);

        auto make_lp = [&](lp::Problem& prob, std::vector<int>& va) {
          for (int j = 0; j < J; ++j) va.push_back(prob.add_variable(-1e6, 1e6));
          for (const auto& geo : geometry)
            for (size_t d = 0; d < geo.tcells.size(); ++d) {
              std::vector<lp::Term> terms;
              for (int j = 0; j < J; ++j)
                if (geo.basis_on[j][d] != 0.0) terms.push_back({va[j], geo.basis_on[j][d]});
              prob.add_constraint(std::move(terms), lp::Sense::GreaterEq, 0.0);
            }
          std::vector<lp::Term> norm;
          for (int j = 0; j < J; ++j) norm.push_back({va[j], ebasis[j]});
          prob.add_constraint(std::move(norm), lp::Sense::Equal, 1.0);
        };

        for (const auto& geo : geometry) {
          lp::Problem prob;
          std::vector<int> va;
          make_lp(prob, va);
          std::vector<lp::Term> obj;
          for (int j = 0; j < J; ++j)
            if (geo.image_at[j] != 0.0) obj.push_back({va[j], geo.image_at[j]});
          prob.set_objective(std::move(obj), /*maximize=*/false);
          const auto sol = prob.solve();
          if (sol.status == lp::Status::Optimal)
            track(report.monotonicity, -sol.objective,
                  "positivity LP at " + pair_tag + ", cell " + std::to_string(geo.s_cell) +
                      ": nonnegative claim priced below 0",
                  kLpNoiseTol);
        }

        // strict monotonicity: min E[x(X)] over the same feasible set
        lp::Problem prob;
        std::vector<int> va;
        make_lp(prob, va);
        std::vector<lp::Term> obj;
        for (int j = 0; j < J; ++j)
          if (eimg[j] != 0.0) obj.push_back({va[j], eimg[j]});
        prob.set_objective(std::move(obj), /*maximize=*/false);
        const auto sol = prob.solve();
        if (sol.status == lp::Status::Optimal) {
          ++report.strict_monotonicity.checked;
          if (sol.objective <= kLpNoiseTol) {
            report.strict_monotonicity.passed = false;
            report.strict_monotonicity.worst =
                std::max(report.strict_monotonicity.worst, kLpNoiseTol - sol.objective);
            report.strict_monotonicity.witness =
                "at " + pair_tag + ": X >= 0 with E[X] = 1 but E[x(X)] = " +
                std::to_string(sol.objective);
          }
        }
      }

      // additivity on random pool pairs
      std::uniform_int_distribution<size_t> pick(0, pool.size() - 1);
      for (int r = 0; r < 50; ++r) {
        const auto& A = pool[pick(rng)];
        const auto& B = pool[pick(rng)];
        const RandomVariable lhs = eval_price(ps, s, t, A.claim + B.claim);
        double worst = 0.0;
        for (int i = 0; i < space->n_atoms(); ++i)
          worst = std::max(worst, std::abs(lhs[i] - (A.price[i] + B.price[i])));
        track(report.additivity, worst, "additivity at " + pair_tag);
      }

      // F_s-homogeneity where lambda X stays in the span
      const double lam_levels[] = {0.0, 0.5, 1.0, 2.0};
      for (int r = 0; r < 50; ++r) {
        const auto& A = pool[pick(rng)];
        std::vector<double> lam_vals(space->n_atoms());
        if (r % 5 == 0) {
          std::fill(lam_vals.begin(), lam_vals.end(), 2.0);  // constant scaling
        } else {
          for (int c = 0; c < space->n_cells(s); ++c) {
            const double lv = lam_levels[rng() % 4];
            for (int atom : space->cells(s)[c]) lam_vals[atom] = lv;
          }
        }
        const RandomVariable lam(space, std::move(lam_vals));
        const RandomVariable scaled = lam * A.claim;
        const auto coords = ps.claims(t).span().coordinates(scaled, 1e-8);
        if (!coords) {
          ++report.homogeneity.not_applicable;
          continue;
        }
        const RandomVariable lhs = eval_price(ps, s, t, scaled);
        const RandomVariable rhs = lam * A.price;
        double worst = 0.0;
        for (int i = 0; i < space->n_atoms(); ++i)
          worst = std::max(worst, std::abs(lhs[i] - rhs[i]));
        track(report.homogeneity, worst, "F_s-homogeneity at " + pair_tag);
      }
    }
  }

  // time-consistency across grid triples
  for (int s = 0; s < L; ++s)
    for (int u = s + 1; u < L; ++u)
      for (int t = u + 1; t < L; ++t) {
        const auto& basis = ps.claims(t).basis();
        const int J = static_cast<int>(basis.size());
        std::vector<RandomVariable> claims = basis;
        for (int r = 0; r < 20; ++r) {
          RandomVariable X = RandomVariable::constant(space, 0.0);
          for (int j = 0; j < J; ++j) X = X + coef(rng) * basis[j];
          claims.push_back(X);
        }
        for (const auto& X : claims) {
          const RandomVariable xut = eval_price(ps, u, t, X);
          if (!ps.claims(u).span().contains(xut, 1e-8)) {
            ++report.time_consistency.not_applicable;
            continue;
          }
          const RandomVariable lhs = eval_price(ps, s, u, xut);
          const RandomVariable rhs = eval_price(ps, s, t, X);
          double worst = 0.0;
          for (int i = 0; i < space->n_atoms(); ++i)
            worst = std::max(worst, std::abs(lhs[i] - rhs[i]));
          track(report.time_consistency, worst,
                "time-consistency across (" + std::to_string(s) + "," + std::to_string(u) +
                    "," + std::to_string(t) + ")");
        }
      }

  return report;
}

// ---------------------------------------------------------------------------
// Sandwich condition

namespace {

SandwichWitness build_witness(const SpacePtr& space, const detail::CellGeometry& geo,
                              const PartialOperator& op,
                              const detail::CellProgramResult& prog) {
  // Engine variables solve sup m(Z) - x(X') - M(Y) with Z - X' - Y <= 0;
  // the sandwich triple uses X = -X'.
  RandomVariable X = RandomVariable::constant(space, 0.0);
  for (size_t j = 0; j < op.basis.size(); ++j)
    if (prog.alpha[j] != 0.0) X = X - prog.alpha[j] * op.basis[j];

  std::vector<double> zv(space->n_atoms(), 0.0), yv(space->n_atoms(), 0.0);
  for (size_t d = 0; d < geo.tcells.size(); ++d)
    for (int atom : space->cells(geo.t)[geo.tcells[d]]) {
      zv[atom] = prog.z[d];
      yv[atom] = prog.y[d];
    }
  // outside the violating cell take Z = 0, Y = X^+ so Z + X <= Y holds globally
  for (int atom = 0; atom < space->n_atoms(); ++atom)
    if (space->cell_of(geo.s, atom) != geo.s_cell) {
      zv[atom] = 0.0;
      yv[atom] = std::max(0.0, X[atom]);
    }
  SandwichWitness w{X, RandomVariable(space, std::move(yv)),
                    RandomVariable(space, std::move(zv)), prog.value};
  return w;
}

SandwichReport sandwich_by_cell_lp(const PartialOperator& op, const BoundFamily& bounds,
                                   const char* method) {
  const SpacePtr& space = op.basis.front().space();
  const auto geometry = detail::make_cell_geometry(op);
  SandwichReport report;
  report.method = method;
  double worst = -lp::kInf;
  int worst_cell = -1;
  detail::CellProgramResult worst_prog;
  for (const auto& geo : geometry) {
    const auto oracle = detail::BoundOracle::make(bounds, geo, false);
    const std::vector<double> rhs(geo.tcells.size(), 0.0);
    auto prog = detail::cell_sup_program(geo, oracle, rhs, /*y_cap=*/1.0);
    const double value = prog.capped ? lp::kInf : prog.value;
    if (value > worst) {
      worst = value;
      worst_cell = geo.s_cell;
      worst_prog = std::move(prog);
    }
  }
  report.worst_cell = worst_cell;
  report.holds = worst <= 1e-9;
  report.worst_violation = report.holds ? std::min(worst, 0.0) : worst;
  if (!report.holds)
    report.witness = build_witness(space, geometry[worst_cell], op, worst_prog);
  return report;
}

}  // namespace

SandwichReport check_sandwich(const PartialOperator& op, const BoundFamily& bounds) {
  if (op.basis.empty()) throw ValidationError("check_sandwich: empty operator");
  const SpacePtr& space = op.basis.front().space();
  if (bound_space(bounds) != space)
    throw ValidationError("check_sandwich: bounds on a different space");
  if (std::holds_alternative<ComposedGoodDeal>(bounds))
    throw ValidationError("check_sandwich: composed good-deal bounds are not supported here; "
                          "use the good_deal variant");

  if (!std::holds_alternative<GoodDeal>(bounds))
    return sandwich_by_cell_lp(op, bounds, "exact-lp");

  // Good-deal route: necessary-condition spot check, then pricing-measure
  // feasibility per the extension theorem's equivalence.
  SandwichReport report;
  {
    std::mt19937_64 rng(0xA5EED);
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    const int J = static_cast<int>(op.basis.size());
    std::vector<std::pair<RandomVariable, RandomVariable>> samples;  // claim, price
    for (int j = 0; j < J; ++j) samples.push_back({op.basis[j], op.images[j]});
    for (int r = 0; r < 50; ++r) {
      RandomVariable X = RandomVariable::constant(space, 0.0);
      RandomVariable P = RandomVariable::constant(space, 0.0);
      for (int j = 0; j < J; ++j) {
        const double c = coef(rng);
        X = X + c * op.basis[j];
        P = P + c * op.images[j];
      }
      samples.push_back({X, P});
    }
    for (const auto& [X, priceX] : samples) {
      const RandomVariable xplus = positive_part(X);
      const RandomVariable xminus = negative_part(X);
      const RandomVariable hi = eval_M(bounds, op.s, op.t, xplus) -
                                eval_m(bounds, op.s, op.t, xminus);
      const RandomVariable lo = eval_m(bounds, op.s, op.t, xplus) -
                                eval_M(bounds, op.s, op.t, xminus);
      double v_hi = (priceX - hi).max_value();
      double v_lo = (lo - priceX).max_value();
      if (v_hi > 1e-9 || v_lo > 1e-9) {
        report.holds = false;
        report.method = "good-deal spot check";
        const bool upper = v_hi >= v_lo;
        const RandomVariable W = upper ? X : (-1.0 * X);
        SandwichWitness w{W, upper ? xplus : xminus, upper ? xminus : xplus,
                          std::max(v_hi, v_lo)};
        report.worst_violation = w.violation;
        // locate the violating F_s-cell
        const RandomVariable gap = upper ? (priceX - hi) : (lo - priceX);
        for (int i = 0; i < space->n_atoms(); ++i)
          if (gap[i] >= report.worst_violation - 1e-15) {
            report.worst_cell = space->cell_of(op.s, i);
            break;
          }
        report.witness = std::move(w);
        return report;
      }
    }
  }

  const PairFeasibility feas = pair_feasibility(op, bounds);
  if (feas.feasible) {
    report.holds = true;
    report.worst_violation = 0.0;
    report.method = "pricing-measure feasibility";
    return report;
  }
  // Infeasible: produce an explicit violating triple with the cut program.
  report = sandwich_by_cell_lp(op, bounds, "pricing-measure feasibility + cut witness");
  report.holds = false;
  if (report.worst_violation <= 0.0) report.worst_violation = -feas.farkas_value;
  return report;
}

SandwichReport check_sandwich(const PriceSystem& ps, int s, int t, const BoundFamily& bounds) {
  return check_sandwich(ps.partial_operator(s, t), bounds);
}

}  // namespace sandwich
