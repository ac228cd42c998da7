#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "sandwich/errors.hpp"
#include "sandwich/ftap.hpp"

namespace sandwich {

namespace {

// Random nonnegative claim at F_t granularity.
RandomVariable random_positive_claim(const SpacePtr& space, int t, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 2.0);
  std::vector<double> v(space->n_atoms());
  for (int d = 0; d < space->n_cells(t); ++d) {
    const double x = unif(rng);
    for (int atom : space->cells(t)[d]) v[atom] = x;
  }
  return RandomVariable(space, std::move(v));
}

struct ContainmentStats {
  double worst = 0.0;
  std::vector<std::string> warnings;
};

// m_st(X) <= E_f[X|F_s] <= M_st(X) on indicators and seeded random positives,
// for every grid pair. Cells without f-mass are vacuous under the measure and
// reported as warnings.
ContainmentStats containment_check(const SpacePtr& space, const BoundFamily& bounds,
                                   const RandomVariable& f, int n_random,
                                   std::uint64_t seed) {
  ContainmentStats stats;
  std::mt19937_64 rng(seed);
  const int L = space->n_levels();
  for (int s = 0; s < L; ++s)
    for (int t = s + 1; t < L; ++t) {
      const RandomVariable fs = cond_expect(f, s);
      bool vacuous = false;
      for (int c = 0; c < space->n_cells(s); ++c)
        if (!(fs.value_on_cell(s, c) > 0.0)) vacuous = true;
      if (vacuous) {
        stats.warnings.push_back("pair (" + std::to_string(s) + "," + std::to_string(t) +
                                 "): f vanishes on an F_s-cell; containment vacuous there");
        continue;
      }
      std::vector<RandomVariable> claims;
      for (int d = 0; d < space->n_cells(t); ++d)
        claims.push_back(RandomVariable::cell_indicator(space, t, d));
      for (int r = 0; r < n_random; ++r) claims.push_back(random_positive_claim(space, t, rng));
      for (const auto& X : claims) {
        const RandomVariable mid = cond_expect_under(f, X, s);
        const RandomVariable up = eval_M(bounds, s, t, X);
        const RandomVariable lo = eval_m(bounds, s, t, X);
        stats.worst = std::max(stats.worst, (mid - up).max_value());
        stats.worst = std::max(stats.worst, (lo - mid).max_value());
      }
    }
  return stats;
}

}  // namespace

BuildOutcome build_measure(const PriceSystem& ps, const BoundFamily& bounds,
                           const ExtendOptions& opts) {
  const SpacePtr& space = ps.space();
  if (bound_space(bounds) != space)
    throw ValidationError("build_measure: bounds on a different space");
  const int K = space->last_level();

  std::vector<double> ladder{opts.lambda};
  for (double l : {0.5, 0.25, 0.75, 0.1, 0.9})
    if (std::find(ladder.begin(), ladder.end(), l) == ladder.end()) ladder.push_back(l);

  struct RawBuild {
    std::vector<RandomVariable> per_step;
    RandomVariable f;
    double lambda;
  };
  auto build_once = [&](double lambda) {
    std::vector<RandomVariable> per_step;
    std::vector<double> prod(space->n_atoms(), 1.0);
    for (int k = 1; k <= K; ++k) {
      ExtendOptions step_opts = opts;
      step_opts.lambda = lambda;
      try {
        const ExtensionResult ext =
            full_extend(ps.partial_operator(k - 1, k), bounds, step_opts);
        const Density fk = recover_density(ext.extended);
        per_step.push_back(fk.as_rv());
        for (int i = 0; i < space->n_atoms(); ++i) prod[i] *= fk[i];
      } catch (const SandwichViolationError& e) {
        throw SandwichViolationError("pair (" + std::to_string(k - 1) + "," +
                                         std::to_string(k) + "): " + e.what(),
                                     e.cell(), e.certificate());
      }
    }
    return RawBuild{std::move(per_step), RandomVariable(space, std::move(prod)), lambda};
  };

  RawBuild best = build_once(ladder.front());
  bool retried = false;
  for (size_t i = 1; i < ladder.size() && best.f.min_value() <= opts.eps_pos; ++i) {
    retried = true;
    RawBuild next = build_once(ladder[i]);
    if (next.f.min_value() > best.f.min_value()) best = std::move(next);
  }

  const RandomVariable frv = best.f;
  PricingMeasure measure{Density(frv), std::move(best.per_step), best.lambda,
                         frv.min_value() > opts.eps_pos, frv.min_value()};
  BuildOutcome outcome{std::move(measure), {}};
  BuildReport& report = outcome.report;
  if (!outcome.measure.equivalent) {
    report.warnings.push_back(
        std::string("measure is absolutely continuous only (min density ") +
        std::to_string(outcome.measure.min_density) +
        (retried ? ", after lambda retries)" : ")"));
  }

  // representation on every pair's span
  const int L = space->n_levels();
  for (int s = 0; s < L; ++s)
    for (int t = s + 1; t < L; ++t) {
      const RandomVariable fs = cond_expect(frv, s);
      bool vacuous = false;
      for (int c = 0; c < space->n_cells(s); ++c)
        if (!(fs.value_on_cell(s, c) > 0.0)) vacuous = true;
      if (vacuous) {
        report.warnings.push_back("pair (" + std::to_string(s) + "," + std::to_string(t) +
                                  "): representation vacuous on an f-null cell");
        continue;
      }
      const auto& basis = ps.claims(t).basis();
      const auto& imgs = ps.images(s, t);
      for (size_t j = 0; j < basis.size(); ++j) {
        const RandomVariable cond = cond_expect_under(frv, basis[j], s);
        for (int i = 0; i < space->n_atoms(); ++i)
          report.worst_representation =
              std::max(report.worst_representation, std::abs(cond[i] - imgs[j][i]));
      }
    }
  report.representation_ok = report.worst_representation <= 1e-9;
  if (!report.representation_ok)
    report.warnings.push_back("induced operator deviates from x_st by " +
                              std::to_string(report.worst_representation) +
                              " on some non-adjacent pair");

  // bound containment (guaranteed per adjacent pair; verified for all pairs)
  const ContainmentStats cont = containment_check(space, bounds, frv, 100, 515151);
  report.worst_containment = cont.worst;
  report.containment_ok = cont.worst <= 1e-8;
  for (const auto& w : cont.warnings) report.warnings.push_back(w);
  if (!report.containment_ok)
    report.warnings.push_back("multi-pair bound containment fails by " +
                              std::to_string(cont.worst) +
                              " (bound family not weakly time-consistent?)");

  // sampled weak time-consistency of the bound family itself
  {
    std::mt19937_64 rng(77);
    for (int r = 0; r < L; ++r)
      for (int s = r + 1; s < L; ++s)
        for (int t = s + 1; t < L; ++t)
          for (int rep = 0; rep < 5; ++rep) {
            const RandomVariable X = random_positive_claim(space, t, rng);
            const RandomVariable up_inner = eval_M(bounds, s, t, X);
            const RandomVariable up = eval_M(bounds, r, s, up_inner);
            const RandomVariable up_direct = eval_M(bounds, r, t, X);
            report.worst_bound_tc =
                std::max(report.worst_bound_tc, (up - up_direct).max_value());
            const RandomVariable lo_inner = eval_m(bounds, s, t, X);
            if (lo_inner.min_value() >= -1e-12) {
              const RandomVariable lo = eval_m(bounds, r, s, positive_part(lo_inner));
              const RandomVariable lo_direct = eval_m(bounds, r, t, X);
              report.worst_bound_tc =
                  std::max(report.worst_bound_tc, (lo_direct - lo).max_value());
            }
          }
    report.bounds_weak_tc_ok = report.worst_bound_tc <= 1e-9;
    if (!report.bounds_weak_tc_ok)
      report.warnings.push_back("bound family fails sampled weak time-consistency by " +
                                std::to_string(report.worst_bound_tc));
  }

  return outcome;
}

RepresentationReport verify_representation(const PriceSystem& ps, const BoundFamily& bounds,
                                           const PricingMeasure& pm, std::uint64_t seed) {
  const SpacePtr& space = ps.space();
  const RandomVariable frv = pm.f.as_rv();
  const int L = space->n_levels();
  RepresentationReport report;

  for (int s = 0; s < L; ++s)
    for (int t = s + 1; t < L; ++t) {
      const auto& basis = ps.claims(t).basis();
      const auto& imgs = ps.images(s, t);
      for (size_t j = 0; j < basis.size(); ++j) {
        const RandomVariable cond = cond_expect_under(frv, basis[j], s);
        for (int i = 0; i < space->n_atoms(); ++i)
          report.worst_pricing = std::max(report.worst_pricing, std::abs(cond[i] - imgs[j][i]));
      }
    }

  // time-consistency of the induced operator on the full space
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int r = 0; r < L; ++r)
    for (int s = r + 1; s < L; ++s)
      for (int t = s + 1; t < L; ++t)
        for (int rep = 0; rep < 20; ++rep) {
          std::vector<double> v(space->n_atoms());
          for (int d = 0; d < space->n_cells(t); ++d) {
            const double x = unif(rng);
            for (int atom : space->cells(t)[d]) v[atom] = x;
          }
          const RandomVariable X(space, std::move(v));
          const RandomVariable direct = cond_expect_under(frv, X, r);
          const RandomVariable nested = cond_expect_under(frv, cond_expect_under(frv, X, s), r);
          for (int i = 0; i < space->n_atoms(); ++i)
            report.worst_time_consistency =
                std::max(report.worst_time_consistency, std::abs(direct[i] - nested[i]));
        }

  const ContainmentStats cont = containment_check(space, bounds, frv, 100, seed ^ 0x9E3779B9);
  report.worst_containment = cont.worst;
  return report;
}

}  // namespace sandwich
