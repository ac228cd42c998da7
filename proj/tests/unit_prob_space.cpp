#include <doctest.h>

#include <random>

#include "sandwich/prob_space.hpp"
#include "support/instance_gen.hpp"

using namespace sandwich;

namespace {

// Independent brute-force conditional expectation: loop atoms of each cell
// directly, no shared code with the library path.
std::vector<double> brute_cond_expect(const FilteredSpace& space,
                                      const std::vector<double>& x, int k) {
  std::vector<double> out(x.size(), 0.0);
  for (const auto& cell : space.cells(k)) {
    double num = 0.0, den = 0.0;
    for (int atom : cell) {
      num += space.prob(atom) * x[atom];
      den += space.prob(atom);
    }
    for (int atom : cell) out[atom] = num / den;
  }
  return out;
}

SpacePtr uniform4() {
  return FilteredSpace::create({"w1", "w2", "w3", "w4"}, {0.25, 0.25, 0.25, 0.25}, {0.0, 1.0, 2.0},
                               {{{0, 1, 2, 3}}, {{0, 1}, {2, 3}}, {{0}, {1}, {2}, {3}}});
}

}  // namespace

TEST_CASE("filtered space validation") {
  CHECK_THROWS_AS(FilteredSpace::create({}, {0.5, 0.4}, {0.0, 1.0}, {{{0, 1}}, {{0}, {1}}}),
                  ValidationError);
  CHECK_THROWS_AS(FilteredSpace::create({}, {0.5, 0.5}, {0.0}, {{{0}, {1}}}), ValidationError);
  // refinement breach: level-1 cell straddles two level-0 cells is impossible
  // with trivial F_0, so break the final-partition rule instead
  CHECK_THROWS_AS(FilteredSpace::create({}, {0.5, 0.5}, {0.0, 1.0}, {{{0, 1}}, {{0, 1}}}),
                  ValidationError);
  // double cover
  CHECK_THROWS_AS(
      FilteredSpace::create({}, {0.5, 0.5}, {0.0, 1.0}, {{{0, 1}, {1}}, {{0}, {1}}}),
      ValidationError);
  // non-refining chain
  CHECK_THROWS_AS(FilteredSpace::create({}, {0.25, 0.25, 0.25, 0.25}, {0.0, 1.0, 2.0},
                                        {{{0, 1}, {2, 3}}, {{0, 2}, {1, 3}},
                                         {{0}, {1}, {2}, {3}}}),
                  ValidationError);
}

TEST_CASE("measurability level is computed and validated") {
  auto space = uniform4();
  const RandomVariable x(space, {1.0, 1.0, 2.0, 2.0});
  CHECK(x.level() == 1);
  CHECK(RandomVariable::constant(space, 3.0).level() == 0);
  CHECK(RandomVariable(space, {1.0, 2.0, 3.0, 4.0}).level() == 2);
  CHECK_THROWS_AS(RandomVariable(space, {1.0, 1.0, 2.0, 2.0}, 2), ValidationError);
  CHECK_NOTHROW(RandomVariable(space, {1.0, 1.0, 2.0, 2.0}, 1));
}

TEST_CASE("cond_expect spec examples") {
  auto space = uniform4();
  // F_k-measurable input is returned unchanged
  const RandomVariable x(space, {1.0, 1.0, 2.0, 2.0});
  const RandomVariable e1 = cond_expect(x, 1);
  for (int i = 0; i < 4; ++i) CHECK(e1[i] == x[i]);

  // trivial partition at k = 0 gives the plain mean
  const RandomVariable y(space, {1.0, 3.0, 2.0, 6.0});
  const RandomVariable e0 = cond_expect(y, 0);
  for (int i = 0; i < 4; ++i) CHECK(e0[i] == doctest::Approx(3.0));

  // per-cell weighted average, frozen from the brute-force oracle
  const auto oracle = brute_cond_expect(*space, {1.0, 3.0, 2.0, 6.0}, 1);
  const RandomVariable e = cond_expect(y, 1);
  CHECK(e[0] == doctest::Approx(2.0));
  CHECK(e[1] == doctest::Approx(2.0));
  CHECK(e[2] == doctest::Approx(4.0));
  CHECK(e[3] == doctest::Approx(4.0));
  for (int i = 0; i < 4; ++i) CHECK(e[i] == doctest::Approx(oracle[i]));
  CHECK(e.level() <= 1);
}

TEST_CASE("cond_variance spec examples") {
  auto space = uniform4();
  CHECK(cond_variance(RandomVariable::constant(space, 5.0), 1).max_value() == 0.0);

  const RandomVariable x(space, {0.0, 2.0, 0.0, 2.0});
  const RandomVariable v = cond_variance(x, 1);
  for (int i = 0; i < 4; ++i) CHECK(v[i] == doctest::Approx(1.0));

  CHECK(cond_variance(x, 2).max_value() == 0.0);  // atom-level conditioning
}

TEST_CASE("pointwise extrema") {
  auto space = FilteredSpace::create({}, {0.5, 0.5}, {0.0, 1.0}, {{{0, 1}}, {{0}, {1}}});
  const RandomVariable a(space, {1.0, 0.0});
  const RandomVariable b(space, {0.0, 1.0});
  CHECK_THROWS_AS(pointwise_extrema({}, ExtremaMode::Max), ValidationError);
  const RandomVariable one = pointwise_max({a, b});
  CHECK(one[0] == 1.0);
  CHECK(one[1] == 1.0);
  const RandomVariable same = pointwise_min({a});
  CHECK(same[0] == a[0]);
  const RandomVariable neg = pointwise_min({a - b, b - a});
  CHECK(neg[0] == doctest::Approx(-1.0));
  CHECK(neg[1] == doctest::Approx(-1.0));
}

TEST_CASE("conditional calculus properties on random spaces") {
  std::mt19937_64 rng(31337);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  for (int rep = 0; rep < 40; ++rep) {
    auto space = sandwich::testing::random_space(rng, 12, 3);
    const int n = space->n_atoms();
    std::vector<double> xv(n), yv(n);
    for (int i = 0; i < n; ++i) {
      xv[i] = unif(rng);
      yv[i] = unif(rng);
    }
    const RandomVariable x(space, xv), y(space, yv);
    const int K = space->last_level();
    std::uniform_int_distribution<int> lv(0, K);
    int k1 = lv(rng), k2 = lv(rng);
    if (k1 > k2) std::swap(k1, k2);

    // tower
    const RandomVariable lhs = cond_expect(cond_expect(x, k2), k1);
    const RandomVariable rhs = cond_expect(x, k1);
    for (int i = 0; i < n; ++i) CHECK(lhs[i] == doctest::Approx(rhs[i]).epsilon(1e-10));

    // linearity
    const RandomVariable lin = cond_expect(2.5 * x + (-1.0) * y, k1);
    const RandomVariable lin2 = 2.5 * cond_expect(x, k1) - cond_expect(y, k1);
    for (int i = 0; i < n; ++i) CHECK(lin[i] == doctest::Approx(lin2[i]).epsilon(1e-10));

    // positivity
    const RandomVariable pos = cond_expect(positive_part(x), k1);
    CHECK(pos.min_value() >= -1e-12);

    // pull-out of a level-<= k1 nonnegative factor
    const RandomVariable g = positive_part(cond_expect(y, k1));
    const RandomVariable pulled = cond_expect(g * x, k1);
    const RandomVariable manual = g * cond_expect(x, k1);
    for (int i = 0; i < n; ++i) CHECK(pulled[i] == doctest::Approx(manual[i]).epsilon(1e-10));
  }
}

TEST_CASE("cond_expect_under recovers weighted averages") {
  auto space = uniform4();
  const RandomVariable f(space, {2.0, 0.0, 1.0, 1.0});
  const RandomVariable x(space, {1.0, 5.0, 2.0, 4.0});
  const RandomVariable e = cond_expect_under(f, x, 1);
  CHECK(e[0] == doctest::Approx(1.0));  // all weight on atom 0 in the first cell
  CHECK(e[2] == doctest::Approx(3.0));
  const RandomVariable zero_mass(space, {0.0, 0.0, 1.0, 1.0});
  CHECK_THROWS_AS(cond_expect_under(zero_mass, x, 1), EquivalenceError);
}
