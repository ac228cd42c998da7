#include <doctest.h>

#include <map>

#include "sandwich/price_system.hpp"
#include "support/instance_gen.hpp"

using namespace sandwich;

namespace {

SpacePtr binomial_space() {
  return FilteredSpace::create({"up", "down"}, {0.5, 0.5}, {0.0, 1.0},
                               {{{0, 1}}, {{0}, {1}}});
}

// Uniform two-atom market with S_T = (2, 0.5) priced at 1: the risk-neutral
// density is (2/3, 4/3).
PriceSystem binomial_system(const SpacePtr& space) {
  std::vector<ClaimSpace> spaces;
  spaces.emplace_back(space, 0,
                      std::vector<RandomVariable>{RandomVariable::constant(space, 1.0)});
  spaces.emplace_back(space, 1,
                      std::vector<RandomVariable>{RandomVariable::constant(space, 1.0),
                                                  RandomVariable(space, {2.0, 0.5})});
  std::map<std::pair<int, int>, std::vector<RandomVariable>> images;
  images.emplace(std::make_pair(0, 1),
                 std::vector<RandomVariable>{RandomVariable::constant(space, 1.0),
                                             RandomVariable::constant(space, 1.0)});
  return PriceSystem(space, std::move(spaces), std::move(images));
}

}  // namespace

TEST_CASE("claim space validation") {
  auto space = binomial_space();
  // missing unit
  CHECK_THROWS_AS(
      ClaimSpace(space, 1, {RandomVariable(space, {2.0, 0.5})}), ValidationError);
  // dependent basis
  CHECK_THROWS_AS(ClaimSpace(space, 1,
                             {RandomVariable::constant(space, 1.0),
                              RandomVariable::constant(space, 2.0)}),
                  ValidationError);
  // level above the time index
  CHECK_THROWS_AS(ClaimSpace(space, 0,
                             {RandomVariable::constant(space, 1.0),
                              RandomVariable(space, {2.0, 0.5})}),
                  ValidationError);
}

TEST_CASE("price system validation catches a broken numeraire") {
  auto space = binomial_space();
  std::vector<ClaimSpace> spaces;
  spaces.emplace_back(space, 0,
                      std::vector<RandomVariable>{RandomVariable::constant(space, 1.0)});
  spaces.emplace_back(space, 1,
                      std::vector<RandomVariable>{RandomVariable::constant(space, 1.0),
                                                  RandomVariable(space, {2.0, 0.5})});
  std::map<std::pair<int, int>, std::vector<RandomVariable>> images;
  images.emplace(std::make_pair(0, 1),
                 std::vector<RandomVariable>{RandomVariable::constant(space, 0.9),
                                             RandomVariable::constant(space, 1.0)});
  CHECK_THROWS_AS(PriceSystem(space, std::move(spaces), std::move(images)), ValidationError);
}

TEST_CASE("eval_price spec examples") {
  auto space = binomial_space();
  const PriceSystem ps = binomial_system(space);

  const RandomVariable one = RandomVariable::constant(space, 1.0);
  CHECK(eval_price(ps, 0, 1, one)[0] == doctest::Approx(1.0));

  const RandomVariable S(space, {2.0, 0.5});
  CHECK(eval_price(ps, 0, 1, S)[0] == doctest::Approx(1.0));
  CHECK(eval_price(ps, 0, 1, 3.0 * S)[0] == doctest::Approx(3.0));

  // linearity on a random combination
  const RandomVariable combo = 2.0 * S - one;
  CHECK(eval_price(ps, 0, 1, combo)[0] == doctest::Approx(1.0));

  // the Arrow claim is spanned here (complete market), so pricing succeeds
  const RandomVariable arrow(space, {1.0, 0.0});
  CHECK(eval_price(ps, 0, 1, arrow)[0] == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("eval_price rejects claims outside the span") {
  std::mt19937_64 rng(3);
  const auto inst = sandwich::testing::make_instance(42, sandwich::testing::BoundKind::Density,
                                                     false, 8, 2);
  const int K = inst.space->last_level();
  // a random atom-level claim is almost surely unpriced when the span is thin
  if (inst.system.claims(K).basis().size() < static_cast<size_t>(inst.space->n_cells(K))) {
    std::vector<double> v(inst.space->n_atoms());
    for (double& x : v) x = static_cast<double>(rng() % 97) / 7.0;
    CHECK_THROWS_AS(eval_price(inst.system, 0, K, RandomVariable(inst.space, v)), SpanError);
  }
}

TEST_CASE("check_axioms passes on conditional-expectation systems") {
  for (int rep = 0; rep < 3; ++rep) {
    const auto inst = sandwich::testing::make_instance(
        100 + rep, sandwich::testing::BoundKind::GoodDealKind, false, 10, 3);
    const AxiomReport report = check_axioms(inst.system);
    CHECK(report.normalization.passed);
    CHECK(report.additivity.passed);
    CHECK(report.homogeneity.passed);
    CHECK(report.monotonicity.passed);
    CHECK(report.strict_monotonicity.passed);
    CHECK(report.time_consistency.passed);
  }
}

TEST_CASE("check_axioms flags a constructed monotonicity violation") {
  auto space = binomial_space();
  std::vector<ClaimSpace> spaces;
  spaces.emplace_back(space, 0,
                      std::vector<RandomVariable>{RandomVariable::constant(space, 1.0)});
  spaces.emplace_back(space, 1,
                      std::vector<RandomVariable>{RandomVariable::constant(space, 1.0),
                                                  RandomVariable(space, {2.0, 0.5})});
  // price S at 3: above the maximum payoff scaled by x(1) = 1, so the claim
  // 3 * 1 - S >= 0 gets the negative price 3 - 3.5 < 0
  std::map<std::pair<int, int>, std::vector<RandomVariable>> images;
  images.emplace(std::make_pair(0, 1),
                 std::vector<RandomVariable>{RandomVariable::constant(space, 1.0),
                                             RandomVariable::constant(space, 3.5)});
  const PriceSystem bad(space, std::move(spaces), std::move(images));
  const AxiomReport report = check_axioms(bad);
  CHECK(!report.monotonicity.passed);
  CHECK(report.monotonicity.worst > 0.1);
  CHECK(!report.monotonicity.witness.empty());
}

TEST_CASE("single-period systems are trivially time-consistent") {
  auto space = binomial_space();
  const PriceSystem ps = binomial_system(space);
  const AxiomReport report = check_axioms(ps);
  CHECK(report.time_consistency.passed);
  CHECK(report.time_consistency.checked == 0);
}

TEST_CASE("check_sandwich: equality and band cases") {
  auto space = binomial_space();
  const PriceSystem ps = binomial_system(space);
  // the fixture prices are E_Q with Q = (2/3, 4/3)
  const Density q(space, {2.0 / 3.0, 4.0 / 3.0});

  SUBCASE("m = M = E_Q pins the operator; worst violation 0") {
    BoundFamily bounds{MeasureFamilies(space, {q}, {q})};
    const SandwichReport rep = check_sandwich(ps, 0, 1, bounds);
    CHECK(rep.holds);
    CHECK(rep.worst_violation == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(!rep.witness.has_value());
    CHECK(rep.method == "exact-lp");
  }

  SUBCASE("density band around the pricing density holds") {
    std::vector<double> lo{q[0] / 1.2, q[1] / 1.2}, hi{q[0] * 1.2, q[1] * 1.2};
    BoundFamily bounds{DensityBounds::from_terminal(space, RandomVariable(space, lo),
                                                    RandomVariable(space, hi))};
    CHECK(check_sandwich(ps, 0, 1, bounds).holds);
  }

  SUBCASE("good-deal threshold: holds above 1/3, fails below with a witness") {
    BoundFamily wide{GoodDeal(space, 1.0 + 1.0 / 3.0 + 1e-6)};
    const SandwichReport ok = check_sandwich(ps, 0, 1, wide);
    CHECK(ok.holds);
    CHECK(ok.method == "pricing-measure feasibility");

    BoundFamily tight{GoodDeal(space, 1.0 + 0.2)};  // delta_0T = 0.2 < 1/3
    const SandwichReport bad = check_sandwich(ps, 0, 1, tight);
    CHECK(!bad.holds);
    CHECK(bad.worst_violation > 1e-6);
    REQUIRE(bad.witness.has_value());
    // witness satisfies Z + X <= Y atom-wise and genuinely violates
    const auto& w = *bad.witness;
    for (int i = 0; i < 2; ++i) CHECK(w.Z[i] + w.X[i] <= w.Y[i] + 1e-9);
    CHECK(w.Z.min_value() >= -1e-12);
    CHECK(w.Y.min_value() >= -1e-12);
    const RandomVariable val = eval_m(tight, 0, 1, w.Z) + eval_price(ps, 0, 1, w.X) -
                               eval_M(tight, 0, 1, w.Y);
    CHECK(val.max_value() > 1e-8);
  }
}

TEST_CASE("sandwich holds implies band containment on positives") {
  const auto inst = sandwich::testing::make_instance(
      321, sandwich::testing::BoundKind::Density, false, 8, 2);
  const int K = inst.space->last_level();
  const SandwichReport rep = check_sandwich(inst.system, 0, K, inst.bounds);
  REQUIRE(rep.holds);
  std::mt19937_64 rng(5150);
  std::uniform_real_distribution<double> cu(0.0, 1.5);
  const auto& basis = inst.system.claims(K).basis();
  for (int r = 0; r < 20; ++r) {
    RandomVariable X = RandomVariable::constant(inst.space, 0.0);
    for (const auto& B : basis) X = X + cu(rng) * B;  // nonneg coefficients of nonneg basis
    const RandomVariable price = eval_price(inst.system, 0, K, X);
    CHECK((eval_m(inst.bounds, 0, K, X) - price).max_value() <= 1e-8);
    CHECK((price - eval_M(inst.bounds, 0, K, X)).max_value() <= 1e-8);
  }
}
