#pragma once

// Seeded random instances for the property suites: a filtered space, a price
// system generated from a hidden strictly positive density, and a bound
// family admitting that density. Optionally one image is bumped above its
// upper bound to manufacture a certifiably infeasible instance.

#include <cstdint>
#include <random>

#include "sandwich/bounds.hpp"
#include "sandwich/price_system.hpp"

namespace sandwich::testing {

enum class BoundKind { Density, Measures, GoodDealKind };

struct Instance {
  SpacePtr space;
  PriceSystem system;
  BoundFamily bounds;
  Density hidden;
  bool expect_feasible = true;
};

// Random refining partition chain with trivial F_0, unit-spaced grid.
SpacePtr random_space(std::mt19937_64& rng, int max_atoms, int max_levels);

// Strictly positive density with E[f|F_0] = 1.
Density random_density(const SpacePtr& space, std::mt19937_64& rng);

Instance make_instance(std::uint64_t seed, BoundKind kind, bool make_infeasible,
                       int max_atoms = 16, int max_grid_steps = 4);

}  // namespace sandwich::testing
