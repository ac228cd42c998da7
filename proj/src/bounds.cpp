#include "sandwich/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "sandwich/errors.hpp"

namespace sandwich {

namespace {

constexpr double kNormTol = 1e-10;
constexpr double kConeTol = 1e-12;

void require_pair(const FilteredSpace& space, int s, int t) {
  space.require_level(s);
  space.require_level(t);
  if (s > t) throw ValidationError("grid pair: s must not exceed t");
}

void require_positive_cone(const RandomVariable& X) {
  if (X.min_value() < -kConeTol)
    throw ValidationError("bound operators are defined on the positive cone; "
                          "claim has value " + std::to_string(X.min_value()));
}

void require_claim_level(const RandomVariable& X, int t) {
  if (X.level() > t)
    throw ValidationError("claim has level " + std::to_string(X.level()) +
                          " but the operator acts on claims of level <= " + std::to_string(t));
}

}  // namespace

// ---------------------------------------------------------------------------
// Density

Density::Density(SpacePtr space, std::vector<double> f)
    : Density(RandomVariable(std::move(space), std::move(f))) {}

Density::Density(RandomVariable f) : f_(std::move(f)), equivalent_(true) {
  std::vector<std::string> issues;
  std::vector<double> v = f_.values();
  for (size_t i = 0; i < v.size(); ++i) {
    if (v[i] < -1e-10)
      issues.push_back("density[" + std::to_string(i) + "]: negative value " +
                       std::to_string(v[i]));
    if (v[i] < 0.0) v[i] = 0.0;  // roundoff from upstream linear algebra
    if (v[i] <= 0.0) equivalent_ = false;
  }
  if (issues.empty()) {
    const auto& space = *f_.space();
    RandomVariable clamped(f_.space(), std::move(v));
    const RandomVariable mean0 = cond_expect(clamped, 0);
    for (int c = 0; c < space.n_cells(0); ++c) {
      const double m = mean0.value_on_cell(0, c);
      if (std::abs(m - 1.0) > kNormTol)
        issues.push_back("density: conditional mean on F_0 cell " + std::to_string(c) +
                         " is " + std::to_string(m) + ", expected 1");
    }
    f_ = std::move(clamped);
  }
  if (!issues.empty()) throw ValidationError(issues);
}

// ---------------------------------------------------------------------------
// DensityBounds

DensityBounds DensityBounds::from_table(
    SpacePtr space,
    std::map<std::pair<int, int>, std::pair<RandomVariable, RandomVariable>> table) {
  std::vector<std::string> issues;
  const int K = space->last_level();
  for (int s = 0; s < K; ++s)
    for (int t = s + 1; t <= K; ++t)
      if (!table.count({s, t}))
        issues.push_back("density bounds: missing pair (" + std::to_string(s) + "," +
                         std::to_string(t) + ")");
  if (!issues.empty()) throw ValidationError(issues);

  for (const auto& [key, mm] : table) {
    const auto& [m, M] = mm;
    const std::string tag = "density bounds (" + std::to_string(key.first) + "," +
                            std::to_string(key.second) + ")";
    if (m.space() != space || M.space() != space)
      issues.push_back(tag + ": weight on wrong space");
    else {
      if (m.level() > key.second || M.level() > key.second)
        issues.push_back(tag + ": weights must be measurable at the right endpoint");
      if (m.min_value() <= 0.0)
        issues.push_back(tag + ": lower weight must be strictly positive");
      for (int i = 0; i < m.size(); ++i)
        if (m[i] > M[i] + 1e-12) {
          issues.push_back(tag + ": lower weight exceeds upper weight");
          break;
        }
    }
  }
  if (!issues.empty()) throw ValidationError(issues);

  // multiplicativity across all triples
  for (int r = 0; r < K; ++r)
    for (int s = r + 1; s < K; ++s)
      for (int t = s + 1; t <= K; ++t) {
        const auto& rs = table.at({r, s});
        const auto& st = table.at({s, t});
        const auto& rt = table.at({r, t});
        for (int i = 0; i < space->n_atoms(); ++i) {
          if (std::abs(rs.first[i] * st.first[i] - rt.first[i]) > kNormTol ||
              std::abs(rs.second[i] * st.second[i] - rt.second[i]) > kNormTol) {
            issues.push_back("density bounds: multiplicativity fails across (" +
                             std::to_string(r) + "," + std::to_string(s) + "," +
                             std::to_string(t) + ")");
            break;
          }
        }
      }
  if (!issues.empty()) throw ValidationError(issues);

  DensityBounds b;
  b.space_ = std::move(space);
  b.table_ = std::move(table);
  return b;
}

DensityBounds DensityBounds::from_terminal(SpacePtr space, const RandomVariable& m_T,
                                           const RandomVariable& M_T) {
  if (m_T.min_value() <= 0.0 || M_T.min_value() <= 0.0)
    throw ValidationError("density bounds: terminal weights must be strictly positive");
  const int K = space->last_level();
  const double T = space->time(K) - space->time(0);
  std::map<std::pair<int, int>, std::pair<RandomVariable, RandomVariable>> table;
  auto weight = [&](const RandomVariable& w, int s, int t) {
    const RandomVariable e0 = cond_expect(w, 0);
    const RandomVariable es = cond_expect(w, s);
    const RandomVariable et = cond_expect(w, t);
    const double expo = (space->time(t) - space->time(s)) / T;
    std::vector<double> v(space->n_atoms());
    for (int i = 0; i < space->n_atoms(); ++i)
      v[i] = std::pow(e0[i], expo) * et[i] / es[i];
    return RandomVariable(space, std::move(v));
  };
  for (int s = 0; s < K; ++s)
    for (int t = s + 1; t <= K; ++t)
      table.emplace(std::make_pair(s, t), std::make_pair(weight(m_T, s, t), weight(M_T, s, t)));
  return from_table(std::move(space), std::move(table));
}

RandomVariable DensityBounds::m_weight(int s, int t) const {
  require_pair(*space_, s, t);
  if (s == t) return RandomVariable::constant(space_, 1.0);
  return table_.at({s, t}).first;
}

RandomVariable DensityBounds::M_weight(int s, int t) const {
  require_pair(*space_, s, t);
  if (s == t) return RandomVariable::constant(space_, 1.0);
  return table_.at({s, t}).second;
}

// ---------------------------------------------------------------------------
// MeasureFamilies

MeasureFamilies::MeasureFamilies(SpacePtr space, std::vector<Density> upper,
                                 std::vector<Density> lower)
    : space_(std::move(space)), upper_(std::move(upper)), lower_(std::move(lower)) {
  std::vector<std::string> issues;
  if (upper_.empty()) issues.push_back("measure families: upper family is empty");
  if (lower_.empty()) issues.push_back("measure families: lower family is empty");
  auto check = [&](const std::vector<Density>& fam, const char* name) {
    for (size_t q = 0; q < fam.size(); ++q) {
      if (fam[q].space() != space_) {
        issues.push_back(std::string("measure families: ") + name + "[" + std::to_string(q) +
                         "] lives on a different space");
        continue;
      }
      // positive conditional mass at every level keeps E_Q[.|F_s] defined
      for (int k = 0; k < space_->n_levels(); ++k) {
        const RandomVariable mass = cond_expect(fam[q].as_rv(), k);
        if (mass.min_value() <= 0.0) {
          issues.push_back(std::string("measure families: ") + name + "[" + std::to_string(q) +
                           "] has zero mass on a cell of level " + std::to_string(k));
          break;
        }
      }
    }
  };
  check(upper_, "upper");
  check(lower_, "lower");
  if (!issues.empty()) throw ValidationError(issues);
}

// ---------------------------------------------------------------------------
// GoodDeal / ComposedGoodDeal

GoodDeal::GoodDeal(SpacePtr space, double delta, bool positivity_constrained)
    : space_(std::move(space)), delta_(delta), positivity_constrained_(positivity_constrained) {
  if (!(delta > 1.0)) throw ValidationError("good deal: delta must exceed 1");
}

double GoodDeal::delta_st(int s, int t) const {
  require_pair(*space_, s, t);
  return std::pow(delta_, space_->time(t) - space_->time(s)) - 1.0;
}

ComposedGoodDeal::ComposedGoodDeal(SpacePtr space, std::vector<double> step_deltas)
    : space_(std::move(space)), step_deltas_(std::move(step_deltas)) {
  if (static_cast<int>(step_deltas_.size()) != space_->last_level())
    throw ValidationError("composed good deal: expected one level per adjacent pair (" +
                          std::to_string(space_->last_level()) + ")");
  for (double d : step_deltas_)
    if (!(d >= 0.0)) throw ValidationError("composed good deal: step levels must be >= 0");
}

double ComposedGoodDeal::implied_delta(int s, int t) const {
  require_pair(*space_, s, t);
  double prod = 1.0;
  for (int k = s; k < t; ++k) prod *= 1.0 + step_deltas_[k];
  return prod - 1.0;
}

bool ComposedGoodDeal::steps_satisfy_composition(double tol) const {
  // True iff a single base level generates every step: (1+d_k)^(1/dt_k) constant.
  double base = 0.0;
  for (size_t k = 0; k < step_deltas_.size(); ++k) {
    const double dt = space_->time(static_cast<int>(k) + 1) - space_->time(static_cast<int>(k));
    const double b = std::pow(1.0 + step_deltas_[k], 1.0 / dt);
    if (k == 0) base = b;
    else if (std::abs(b - base) > tol * std::max(1.0, base)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Variant plumbing

const SpacePtr& bound_space(const BoundFamily& bounds) {
  return std::visit([](const auto& b) -> const SpacePtr& { return b.space(); }, bounds);
}

std::string bound_kind(const BoundFamily& bounds) {
  struct Visitor {
    std::string operator()(const DensityBounds&) const { return "density_bounds"; }
    std::string operator()(const MeasureFamilies&) const { return "measure_families"; }
    std::string operator()(const GoodDeal&) const { return "good_deal"; }
    std::string operator()(const ComposedGoodDeal&) const { return "composed_good_deal"; }
  };
  return std::visit(Visitor{}, bounds);
}

namespace {

RandomVariable eval_measure_family(const std::vector<Density>& fam, int s,
                                   const RandomVariable& X, ExtremaMode mode) {
  std::vector<RandomVariable> vals;
  vals.reserve(fam.size());
  for (const Density& q : fam) vals.push_back(cond_expect_under(q.as_rv(), X, s));
  return pointwise_extrema(vals, mode);
}

// Composed one-step closed-form recursion; intermediate values may leave the
// positive cone, so no cone check here.
RandomVariable eval_composed(const ComposedGoodDeal& b, int s, int t, const RandomVariable& X,
                             OptDirection dir) {
  if (s == t) return X;
  const RandomVariable inner = eval_composed(b, s + 1, t, X, dir);
  return goodd_closed_form(s, inner, b.step_deltas()[s], dir);
}

RandomVariable eval_bound(const BoundFamily& bounds, int s, int t, const RandomVariable& X,
                          OptDirection dir) {
  const auto& space = bound_space(bounds);
  require_pair(*space, s, t);
  if (X.space() != space) throw ValidationError("claim lives on a different space");
  require_claim_level(X, t);
  require_positive_cone(X);

  struct Visitor {
    int s, t;
    const RandomVariable& X;
    OptDirection dir;

    RandomVariable operator()(const DensityBounds& b) const {
      const RandomVariable w = dir == OptDirection::Sup ? b.M_weight(s, t) : b.m_weight(s, t);
      return cond_expect(w * X, s);
    }
    RandomVariable operator()(const MeasureFamilies& b) const {
      return dir == OptDirection::Sup
                 ? eval_measure_family(b.upper(), s, X, ExtremaMode::Max)
                 : eval_measure_family(b.lower(), s, X, ExtremaMode::Min);
    }
    RandomVariable operator()(const GoodDeal& b) const {
      const double d = b.delta_st(s, t);
      return b.positivity_constrained() ? goodd_exact(s, t, X, d, dir)
                                        : goodd_closed_form(s, X, d, dir);
    }
    RandomVariable operator()(const ComposedGoodDeal& b) const {
      return eval_composed(b, s, t, X, dir);
    }
  };
  return std::visit(Visitor{s, t, X, dir}, bounds);
}

}  // namespace

RandomVariable eval_M(const BoundFamily& bounds, int s, int t, const RandomVariable& X) {
  return eval_bound(bounds, s, t, X, OptDirection::Sup);
}

RandomVariable eval_m(const BoundFamily& bounds, int s, int t, const RandomVariable& X) {
  return eval_bound(bounds, s, t, X, OptDirection::Inf);
}

// ---------------------------------------------------------------------------
// Water-filling kernel

namespace {

// Conditional masses q_i = max(0, pi_i (1 + lambda (x_i - mu))) with mu chosen
// so the masses sum to one.
std::vector<double> tilt_solution(const std::vector<double>& pi, const std::vector<double>& x,
                                  double lambda) {
  const int n = static_cast<int>(pi.size());
  auto mass = [&](double mu) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += std::max(0.0, pi[i] * (1.0 + lambda * (x[i] - mu)));
    return s;
  };
  double lo = *std::min_element(x.begin(), x.end()) - 1.0 / lambda;
  double hi = *std::max_element(x.begin(), x.end());
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mass(mid) > 1.0 ? lo : hi) = mid;
  }
  double mu = 0.5 * (lo + hi);
  // closed-form polish from the active set
  for (int round = 0; round < 2; ++round) {
    double pa = 0.0, pxa = 0.0;
    for (int i = 0; i < n; ++i)
      if (1.0 + lambda * (x[i] - mu) > 0.0) {
        pa += pi[i];
        pxa += pi[i] * (1.0 + lambda * x[i]);
      }
    if (pa <= 0.0) break;
    mu = (pxa - 1.0) / (lambda * pa);
  }
  std::vector<double> q(n);
  for (int i = 0; i < n; ++i) q[i] = std::max(0.0, pi[i] * (1.0 + lambda * (x[i] - mu)));
  return q;
}

double budget_of(const std::vector<double>& pi, const std::vector<double>& q) {
  double b = 0.0;
  for (size_t i = 0; i < pi.size(); ++i) {
    const double r = q[i] / pi[i] - 1.0;
    b += pi[i] * r * r;
  }
  return b;
}

}  // namespace

GoodDealCellSolution goodd_cell(const std::vector<double>& pi, const std::vector<double>& x,
                                double delta, OptDirection dir, int cell) {
  const int n = static_cast<int>(pi.size());
  if (n == 0 || x.size() != pi.size())
    throw ValidationError("goodd_cell: inconsistent cell data");
  if (delta < 0.0) throw ValidationError("goodd_cell: delta must be >= 0");

  if (dir == OptDirection::Inf) {
    std::vector<double> neg(x.size());
    for (size_t i = 0; i < x.size(); ++i) neg[i] = -x[i];
    GoodDealCellSolution sol = goodd_cell(pi, neg, delta, OptDirection::Sup, cell);
    sol.value = -sol.value;
    return sol;
  }

  GoodDealCellSolution sol;
  double xbar = 0.0;
  for (int i = 0; i < n; ++i) xbar += pi[i] * x[i];
  const double xmax = *std::max_element(x.begin(), x.end());
  const double xmin = *std::min_element(x.begin(), x.end());
  const double spread = xmax - xmin;

  if (delta == 0.0 || spread <= 1e-14 * std::max(1.0, std::abs(xmax))) {
    sol.value = xbar;
    sol.q = pi;
    return sol;
  }

  double var = 0.0;
  for (int i = 0; i < n; ++i) var += pi[i] * (x[i] - xbar) * (x[i] - xbar);
  const double sigma = std::sqrt(var);

  // Unconstrained optimum: q = pi (1 + (delta/sigma)(x - xbar)). When it stays
  // nonnegative the positivity constraint is slack and the Cauchy-Schwarz
  // value is exact.
  {
    const double lam = delta / sigma;
    std::vector<double> q(n);
    double qmin = 0.0;
    for (int i = 0; i < n; ++i) {
      q[i] = pi[i] * (1.0 + lam * (x[i] - xbar));
      qmin = std::min(qmin, q[i]);
    }
    if (qmin >= 0.0) {
      sol.value = xbar + delta * sigma;
      sol.q = std::move(q);
      sol.strictly_positive = true;
      for (double v : sol.q)
        if (v <= 0.0) sol.strictly_positive = false;
      return sol;
    }
  }

  // Simplex vertex: all mass on the argmax cells. If even its budget fits,
  // the constraint set caps at the plain maximum.
  {
    double pmax = 0.0;
    for (int i = 0; i < n; ++i)
      if (x[i] >= xmax - 1e-14 * std::max(1.0, std::abs(xmax))) pmax += pi[i];
    const double vertex_budget = (1.0 - pmax) / pmax;
    if (delta * delta >= vertex_budget) {
      std::vector<double> q(n, 0.0);
      double value = 0.0;
      for (int i = 0; i < n; ++i)
        if (x[i] >= xmax - 1e-14 * std::max(1.0, std::abs(xmax))) {
          q[i] = pi[i] / pmax;
          value += q[i] * x[i];
        }
      sol.value = value;
      sol.q = std::move(q);
      sol.strictly_positive = false;
      return sol;
    }
  }

  // Budget binds with positivity active: bisect the tilt strength. The
  // budget along the tilt path can jump at active-set breakpoints, so the
  // bisection brackets the target and a final convex mix between the
  // feasible and infeasible endpoints lands on the budget sphere exactly.
  const double target = delta * delta;
  const double tol = 1e-12 * std::max(1.0, target);
  double lam_lo = 0.0;
  double lam_hi = 2.0 * delta / (spread + 1e-15);  // initial bracket, doubled as needed
  std::vector<double> q_lo = pi;
  std::vector<double> q_hi = tilt_solution(pi, x, lam_hi);
  int doublings = 0;
  while (budget_of(pi, q_hi) < target) {
    lam_lo = lam_hi;
    q_lo = q_hi;
    lam_hi *= 2.0;
    q_hi = tilt_solution(pi, x, lam_hi);
    if (++doublings > 200)
      throw NumericalError("goodd_cell: bracket expansion failed on cell " +
                           std::to_string(cell));
  }
  double gap_lo = budget_of(pi, q_lo) - target;
  for (int it = 0; it < 200 && std::abs(gap_lo) > tol; ++it) {
    const double lam = 0.5 * (lam_lo + lam_hi);
    std::vector<double> q = tilt_solution(pi, x, lam);
    const double gap = budget_of(pi, q) - target;
    if (gap < 0.0) {
      lam_lo = lam;
      q_lo = std::move(q);
      gap_lo = gap;
    } else {
      lam_hi = lam;
      q_hi = std::move(q);
    }
  }

  std::vector<double> q = q_lo;
  if (std::abs(gap_lo) > tol) {
    // largest theta in [0, 1] with budget(q_lo + theta (q_hi - q_lo)) = target;
    // the budget is quadratic in theta and the value increases with theta
    double a = 0.0, b = 0.0, c0 = -target;
    for (int i = 0; i < n; ++i) {
      const double base = q_lo[i] / pi[i] - 1.0;
      const double dir = (q_hi[i] - q_lo[i]) / pi[i];
      a += pi[i] * dir * dir;
      b += 2.0 * pi[i] * base * dir;
      c0 += pi[i] * base * base;
    }
    double theta = 0.0;
    if (a > 0.0) {
      const double disc = b * b - 4.0 * a * c0;
      theta = disc >= 0.0 ? (-b + std::sqrt(disc)) / (2.0 * a) : 0.0;
    } else if (b > 0.0) {
      theta = -c0 / b;
    }
    theta = std::min(1.0, std::max(0.0, theta));
    for (int i = 0; i < n; ++i) q[i] = q_lo[i] + theta * (q_hi[i] - q_lo[i]);
    if (std::abs(budget_of(pi, q) - target) > 1e-9 * std::max(1.0, target))
      throw NumericalError("goodd_cell: water-filling bisection did not converge on cell " +
                           std::to_string(cell));
  }

  double value = 0.0;
  bool strictly_positive = true;
  for (int i = 0; i < n; ++i) {
    value += q[i] * x[i];
    if (q[i] <= 0.0) strictly_positive = false;
  }
  sol.value = value;
  sol.q = std::move(q);
  sol.strictly_positive = strictly_positive;
  return sol;
}

RandomVariable goodd_exact(int s, int t, const RandomVariable& X, double delta_st,
                           OptDirection dir) {
  const auto& space = *X.space();
  require_pair(space, s, t);
  require_claim_level(X, t);
  if (delta_st < 0.0) throw ValidationError("goodd_exact: delta must be >= 0");

  const auto sub = subcells(space, s, t);
  std::vector<double> out(space.n_atoms());
  for (int c = 0; c < space.n_cells(s); ++c) {
    const double mass = space.cell_mass(s, c);
    std::vector<double> pi, xv;
    pi.reserve(sub[c].size());
    for (int d : sub[c]) {
      pi.push_back(space.cell_mass(t, d) / mass);
      xv.push_back(X.value_on_cell(t, d));
    }
    const GoodDealCellSolution sol = goodd_cell(pi, xv, delta_st, dir, c);
    for (int atom : space.cells(s)[c]) out[atom] = sol.value;
  }
  return RandomVariable(X.space(), std::move(out));
}

RandomVariable goodd_closed_form(int s, const RandomVariable& X, double delta_st,
                                 OptDirection dir) {
  const RandomVariable mean = cond_expect(X, s);
  const RandomVariable var = cond_variance(X, s);
  const double sign = dir == OptDirection::Sup ? 1.0 : -1.0;
  std::vector<double> v(X.size());
  for (int i = 0; i < X.size(); ++i) v[i] = mean[i] + sign * delta_st * std::sqrt(var[i]);
  return RandomVariable(X.space(), std::move(v));
}

RandomVariable c_operator(int s, int t, double delta_st, const RandomVariable& X) {
  require_pair(*X.space(), s, t);
  require_claim_level(X, t);
  if (delta_st < 0.0) throw ValidationError("c_operator: delta must be >= 0");
  const RandomVariable m2 = cond_moment2(X, s);
  std::vector<double> v(X.size());
  for (int i = 0; i < X.size(); ++i) v[i] = delta_st * std::sqrt(m2[i]);
  return RandomVariable(X.space(), std::move(v));
}

std::vector<std::vector<double>> delta_table(double delta_base, const FilteredSpace& space) {
  if (!(delta_base > 1.0)) throw ValidationError("delta_table: delta must exceed 1");
  const int L = space.n_levels();
  std::vector<std::vector<double>> d(L, std::vector<double>(L, 0.0));
  for (int s = 0; s < L; ++s)
    for (int t = s; t < L; ++t)
      d[s][t] = std::pow(delta_base, space.time(t) - space.time(s)) - 1.0;
  return d;
}

// ---------------------------------------------------------------------------
// m-stability

namespace {

void validate_step_density(const SpacePtr& space, const RandomVariable& f, int left, int right,
                           const std::string& tag, std::vector<std::string>& issues) {
  if (f.space() != space) {
    issues.push_back(tag + ": wrong space");
    return;
  }
  if (f.level() > right) issues.push_back(tag + ": level exceeds right endpoint");
  if (f.min_value() < -1e-12) issues.push_back(tag + ": negative values");
  const RandomVariable mean = cond_expect(f, left);
  for (int c = 0; c < space->n_cells(left); ++c)
    if (std::abs(mean.value_on_cell(left, c) - 1.0) > kNormTol) {
      issues.push_back(tag + ": conditional mean at left endpoint differs from 1");
      break;
    }
}

bool member_of(const RandomVariable& f, const std::vector<RandomVariable>& fam, double tol) {
  for (const RandomVariable& g : fam) {
    double worst = 0.0;
    for (int i = 0; i < f.size(); ++i) worst = std::max(worst, std::abs(f[i] - g[i]));
    if (worst <= tol) return true;
  }
  return false;
}

}  // namespace

MStabilityReport check_m_stability(const SpacePtr& space, const StepDensityFamily& family) {
  std::vector<std::string> issues;
  require_pair(*space, family.r, family.s);
  require_pair(*space, family.s, family.t);
  for (size_t i = 0; i < family.rs.size(); ++i)
    validate_step_density(space, family.rs[i], family.r, family.s,
                          "rs[" + std::to_string(i) + "]", issues);
  for (size_t i = 0; i < family.st.size(); ++i)
    validate_step_density(space, family.st[i], family.s, family.t,
                          "st[" + std::to_string(i) + "]", issues);
  for (size_t i = 0; i < family.rt.size(); ++i)
    validate_step_density(space, family.rt[i], family.r, family.t,
                          "rt[" + std::to_string(i) + "]", issues);
  if (!issues.empty()) throw ValidationError(issues);

  MStabilityReport report;
  const double tol = 1e-10;
  for (size_t i = 0; i < family.rs.size(); ++i)
    for (size_t j = 0; j < family.st.size(); ++j) {
      const RandomVariable prod = family.rs[i] * family.st[j];
      if (!member_of(prod, family.rt, tol)) {
        report.product_closed = false;
        report.counterexamples.push_back("product rs[" + std::to_string(i) + "] * st[" +
                                         std::to_string(j) + "] not in the (r,t) family");
      }
    }
  for (int a = 0; a < space->n_cells(family.s); ++a)
    for (size_t i = 0; i < family.st.size(); ++i)
      for (size_t j = 0; j < family.st.size(); ++j) {
        if (i == j) continue;
        std::vector<double> v(space->n_atoms());
        for (int atom = 0; atom < space->n_atoms(); ++atom)
          v[atom] = space->cell_of(family.s, atom) == a ? family.st[i][atom]
                                                        : family.st[j][atom];
        const RandomVariable paste(space, std::move(v));
        if (!member_of(paste, family.st, tol)) {
          report.pasting_closed = false;
          report.counterexamples.push_back(
              "pasting of st[" + std::to_string(i) + "] on cell " + std::to_string(a) +
              " of level " + std::to_string(family.s) + " with st[" + std::to_string(j) +
              "] not in the (s,t) family");
        }
      }
  return report;
}

namespace {

// Centered tilt g at granularity `fine`, conditionally centered at `coarse`,
// with E[g^2|F_coarse] within the given budget and 1 + g >= 0.
RandomVariable random_step_tilt(const SpacePtr& space, int coarse, int fine, double delta,
                                std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::uniform_real_distribution<double> frac(0.2, 0.95);
  std::vector<double> raw(space->n_atoms());
  for (int d = 0; d < space->n_cells(fine); ++d) {
    const double u = unif(rng);
    for (int atom : space->cells(fine)[d]) raw[atom] = u;
  }
  RandomVariable g = RandomVariable(space, std::move(raw));
  g = g - cond_expect(g, coarse);
  const RandomVariable m2 = cond_expect(g * g, coarse);

  std::vector<double> v(space->n_atoms(), 0.0);
  for (int c = 0; c < space->n_cells(coarse); ++c) {
    const double cur = m2.value_on_cell(coarse, c);
    if (cur <= 1e-24) continue;  // single-subcell case: no tilt possible
    double scale = std::sqrt(frac(rng) * delta * delta / cur);
    double mn = 0.0;
    for (int atom : space->cells(coarse)[c]) mn = std::min(mn, scale * g[atom]);
    if (mn < -1.0) scale *= 0.999 / (-mn);  // keep 1 + g >= 0
    for (int atom : space->cells(coarse)[c]) v[atom] = scale * g[atom];
  }
  return RandomVariable(space, std::move(v));
}

}  // namespace

GoodDealStabilityReport check_m_stability(const SpacePtr& space, int r, int s, int t,
                                          const std::vector<std::vector<double>>& deltas,
                                          int n_samples, std::uint64_t seed) {
  require_pair(*space, r, s);
  require_pair(*space, s, t);
  std::mt19937_64 rng(seed);
  GoodDealStabilityReport report;
  report.n_samples = n_samples;
  for (int i = 0; i < n_samples; ++i) {
    const RandomVariable g_rs = random_step_tilt(space, r, s, deltas[r][s], rng);
    const RandomVariable g_st = random_step_tilt(space, s, t, deltas[s][t], rng);
    const RandomVariable comp = g_rs * g_st + g_rs + g_st;
    const RandomVariable m2 = cond_expect(comp * comp, r);
    const double excess = m2.max_value() - deltas[r][t] * deltas[r][t];
    report.worst_excess = std::max(report.worst_excess, excess);
  }
  report.passed = report.worst_excess <= 1e-10;
  return report;
}

// ---------------------------------------------------------------------------
// Dynamic no-good-deal measure check

NgdReport is_dynamic_ngd_measure(const Density& f,
                                 const std::vector<std::vector<double>>& deltas) {
  const auto& space = *f.space();
  const int L = space.n_levels();
  if (static_cast<int>(deltas.size()) < L)
    throw ValidationError("is_dynamic_ngd_measure: delta table too small for the grid");
  if (!f.equivalent())
    throw EquivalenceError(
        "is_dynamic_ngd_measure: measure not equivalent (density has a zero atom)");

  std::vector<RandomVariable> f_at;
  f_at.reserve(L);
  for (int k = 0; k < L; ++k) f_at.push_back(cond_expect(f.as_rv(), k));

  NgdReport report;
  for (int s = 0; s < L; ++s) {
    for (int c = 0; c < space.n_cells(s); ++c)
      if (!(f_at[s].value_on_cell(s, c) > 0.0))
        throw EquivalenceError(
            "is_dynamic_ngd_measure: measure not equivalent, conditional mass vanishes on "
            "cell " + std::to_string(c) + " of level " + std::to_string(s));
    for (int t = s + 1; t < L; ++t) {
      std::vector<double> kv(space.n_atoms());
      for (int i = 0; i < space.n_atoms(); ++i) kv[i] = f_at[t][i] / f_at[s][i] - 1.0;
      const RandomVariable k_st(f.as_rv().space(), std::move(kv));
      const RandomVariable m2 = cond_expect(k_st * k_st, s);
      NgdPairResult pr;
      pr.s = s;
      pr.t = t;
      pr.budget = m2.max_value();
      pr.limit = deltas[s][t] * deltas[s][t];
      pr.passed = pr.budget <= pr.limit + 1e-10;
      report.worst_excess = std::max(report.worst_excess, pr.budget - pr.limit);
      report.passed = report.passed && pr.passed;
      report.pairs.push_back(pr);
    }
  }
  return report;
}

}  // namespace sandwich
