#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "sandwich/bounds.hpp"
#include "sandwich/price_system.hpp"

namespace sandwich {

struct ScenarioOptions {
  double lambda = 0.5;
  double eps_pos = 1e-9;
  double tolerance = 1e-9;
  std::uint64_t seed = 0;
  bool drop_positivity = false;
};

// One self-contained problem instance: the filtered space, marketed claims
// and their prices, a bound family, and solver options. Parsing aggregates
// every validation failure instead of stopping at the first.
struct Scenario {
  SpacePtr space;
  PriceSystem system;
  BoundFamily bounds;
  ScenarioOptions options;
  std::optional<Density> density;  // optional candidate for check-ngd
};

Scenario parse_scenario(const std::string& path);
Scenario parse_scenario_json(const nlohmann::json& doc);

}  // namespace sandwich
