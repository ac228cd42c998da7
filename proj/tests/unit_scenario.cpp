#include <doctest.h>

#include <charconv>
#include <random>

#include <nlohmann/json.hpp>

#include "sandwich/csv.hpp"
#include "sandwich/ftap.hpp"
#include "sandwich/scenario.hpp"

using namespace sandwich;
using nlohmann::json;

namespace {

json minimal_scenario() {
  return json::parse(R"({
    "space": {
      "probs": [0.5, 0.5],
      "times": [0.0, 1.0],
      "partitions": [[[0, 1]], [[0], [1]]]
    },
    "bounds": {"variant": "good_deal", "delta": 2.0}
  })");
}

json binomial_scenario() {
  json doc = minimal_scenario();
  doc["space"]["atoms"] = {"up", "down"};
  doc["claims"] = json::array({{{"t", 1}, {"basis", {{1.0, 1.0}, {2.0, 0.5}}}}});
  doc["prices"] = json::array({{{"s", 0}, {"t", 1}, {"images", {{1.0, 1.0}, {1.0, 1.0}}}}});
  doc["bounds"] = {{"variant", "good_deal"}, {"delta", 1.5}};
  return doc;
}

}  // namespace

TEST_CASE("minimal scenario parses with defaults") {
  const Scenario sc = parse_scenario_json(minimal_scenario());
  CHECK(sc.space->n_atoms() == 2);
  CHECK(sc.options.lambda == 0.5);
  CHECK(sc.options.eps_pos == 1e-9);
  CHECK(sc.system.claims(1).basis().size() == 1);  // just the unit
  CHECK(bound_kind(sc.bounds) == "good_deal");
}

TEST_CASE("validation errors carry offending paths and aggregate") {
  json doc = minimal_scenario();
  doc["space"]["probs"] = {0.5, 0.4};
  try {
    parse_scenario_json(doc);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("space.probs") != std::string::npos);
  }

  json bad_delta = minimal_scenario();
  bad_delta["bounds"]["delta"] = 0.8;
  try {
    parse_scenario_json(bad_delta);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("delta must exceed 1") != std::string::npos);
  }

  // several problems reported at once
  json multi = minimal_scenario();
  multi["space"]["probs"] = {0.5, 0.4};
  multi["space"]["times"] = {0.0};
  try {
    parse_scenario_json(multi);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(e.issues().size() >= 2);
  }
}

TEST_CASE("binomial scenario drives the pipeline") {
  const Scenario sc = parse_scenario_json(binomial_scenario());
  const BuildOutcome built = build_measure(sc.system, sc.bounds, {});
  CHECK(built.measure.f[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  const FeasibilityCertificate cert = lp_feasibility(sc.system, sc.bounds);
  CHECK(cert.status == FeasStatus::Feasible);
}

TEST_CASE("scenario bounds variants parse") {
  json doc = binomial_scenario();
  doc["bounds"] = {{"variant", "measure_families"},
                   {"upper", {{2.0 / 3.0, 4.0 / 3.0}, {1.0, 1.0}}},
                   {"lower", {{2.0 / 3.0, 4.0 / 3.0}}}};
  CHECK(bound_kind(parse_scenario_json(doc).bounds) == "measure_families");

  doc["bounds"] = {{"variant", "density_bounds"},
                   {"terminal_m", {0.5, 0.9}},
                   {"terminal_M", {1.2, 1.8}}};
  CHECK(bound_kind(parse_scenario_json(doc).bounds) == "density_bounds");

  doc["bounds"] = {{"variant", "composed_good_deal"}, {"step_deltas", {0.5}}};
  CHECK(bound_kind(parse_scenario_json(doc).bounds) == "composed_good_deal");

  doc["bounds"] = {{"variant", "nonsense"}};
  CHECK_THROWS_AS(parse_scenario_json(doc), ValidationError);
}

TEST_CASE("optional density feeds the ngd check") {
  json doc = binomial_scenario();
  doc["density"] = {2.0 / 3.0, 4.0 / 3.0};
  const Scenario sc = parse_scenario_json(doc);
  REQUIRE(sc.density.has_value());
  const auto deltas = delta_table(1.5, *sc.space);
  CHECK(is_dynamic_ngd_measure(*sc.density, deltas).passed);
}

TEST_CASE("format_double round-trips") {
  std::mt19937_64 rng(1234);
  std::uniform_real_distribution<double> unif(-1e6, 1e6);
  for (int i = 0; i < 2000; ++i) {
    double v;
    switch (i % 4) {
      case 0: v = unif(rng); break;
      case 1: v = unif(rng) * 1e-12; break;
      case 2: v = 1.0 / 3.0 * unif(rng); break;
      default: v = static_cast<double>(rng()) / 3.0; break;
    }
    const std::string s = format_double(v);
    double back = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), back);
    REQUIRE(res.ec == std::errc());
    CHECK(back == v);
  }
}

TEST_CASE("csv layout") {
  std::vector<ReportRow> rows{{0, 1, "B0", "price", "0", 1.0},
                              {0, 1, "B1", "eval_M", "1", 0.5}};
  const std::string csv = to_csv(rows);
  CHECK(csv == "s,t,claim_id,quantity,cell_id,value\n0,1,B0,price,0,1\n0,1,B1,eval_M,1,0.5\n");
}
