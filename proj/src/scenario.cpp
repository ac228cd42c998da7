#include "sandwich/scenario.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sandwich/errors.hpp"

namespace sandwich {

namespace {

using nlohmann::json;

class Issues {
 public:
  void add(const std::string& path, const std::string& what) {
    items_.push_back(path + ": " + what);
  }
  void merge(const ValidationError& e) {
    for (const auto& i : e.issues()) items_.push_back(i);
  }
  bool empty() const { return items_.empty(); }
  [[noreturn]] void raise() const { throw ValidationError(items_); }
  void raise_if_any() const {
    if (!items_.empty()) raise();
  }

 private:
  std::vector<std::string> items_;
};

std::vector<double> parse_vector(const json& j, const std::string& path, size_t expect,
                                 Issues& issues) {
  std::vector<double> out;
  if (!j.is_array()) {
    issues.add(path, "expected an array of numbers");
    return out;
  }
  for (const auto& v : j) {
    if (!v.is_number()) {
      issues.add(path, "expected numbers");
      return {};
    }
    out.push_back(v.get<double>());
  }
  if (expect != 0 && out.size() != expect)
    issues.add(path, "expected " + std::to_string(expect) + " entries, got " +
                         std::to_string(out.size()));
  return out;
}

SpacePtr parse_space(const json& doc, Issues& issues) {
  if (!doc.contains("space") || !doc["space"].is_object()) {
    issues.add("space", "missing object");
    return nullptr;
  }
  const json& sp = doc["space"];
  std::vector<double> probs = parse_vector(sp.value("probs", json::array()), "space.probs", 0, issues);
  std::vector<double> times = parse_vector(sp.value("times", json::array()), "space.times", 0, issues);
  const size_t n = probs.size();

  std::vector<std::string> atoms;
  if (sp.contains("atoms")) {
    if (!sp["atoms"].is_array())
      issues.add("space.atoms", "expected an array of strings");
    else
      for (const auto& a : sp["atoms"]) atoms.push_back(a.is_string() ? a.get<std::string>() : "");
  }

  auto atom_index = [&](const json& v, const std::string& path) -> int {
    if (v.is_number_integer()) {
      const int i = v.get<int>();
      if (i < 0 || i >= static_cast<int>(n)) {
        issues.add(path, "atom index " + std::to_string(i) + " out of range");
        return -1;
      }
      return i;
    }
    if (v.is_string()) {
      const std::string name = v.get<std::string>();
      for (size_t i = 0; i < atoms.size(); ++i)
        if (atoms[i] == name) return static_cast<int>(i);
      issues.add(path, "unknown atom id '" + name + "'");
      return -1;
    }
    issues.add(path, "atoms must be indices or atom ids");
    return -1;
  };

  std::vector<FilteredSpace::Partition> partitions;
  if (!sp.contains("partitions") || !sp["partitions"].is_array()) {
    issues.add("space.partitions", "missing array");
  } else {
    int k = 0;
    for (const auto& part : sp["partitions"]) {
      FilteredSpace::Partition p;
      if (!part.is_array()) {
        issues.add("space.partitions[" + std::to_string(k) + "]", "expected array of cells");
      } else {
        int c = 0;
        for (const auto& cell : part) {
          FilteredSpace::Cell cc;
          if (!cell.is_array()) {
            issues.add("space.partitions[" + std::to_string(k) + "][" + std::to_string(c) + "]",
                       "expected array of atoms");
          } else {
            for (const auto& a : cell) {
              const int idx = atom_index(a, "space.partitions[" + std::to_string(k) + "][" +
                                                std::to_string(c) + "]");
              if (idx >= 0) cc.push_back(idx);
            }
          }
          p.push_back(std::move(cc));
          ++c;
        }
      }
      partitions.push_back(std::move(p));
      ++k;
    }
  }
  if (!issues.empty()) return nullptr;

  try {
    return FilteredSpace::create(std::move(atoms), std::move(probs), std::move(times),
                                 std::move(partitions));
  } catch (const ValidationError& e) {
    issues.merge(e);
    return nullptr;
  }
}

BoundFamily parse_bounds(const json& doc, const SpacePtr& space, bool drop_positivity,
                         Issues& issues) {
  const GoodDeal fallback =
      [&] {  // placeholder so a BoundFamily exists even when parsing fails
        return GoodDeal(space, 2.0);
      }();
  if (!doc.contains("bounds") || !doc["bounds"].is_object()) {
    issues.add("bounds", "missing object");
    return fallback;
  }
  const json& b = doc["bounds"];
  const std::string variant = b.value("variant", "");
  const size_t n = static_cast<size_t>(space->n_atoms());
  try {
    if (variant == "good_deal") {
      if (!b.contains("delta") || !b["delta"].is_number()) {
        issues.add("bounds.delta", "missing number");
        return fallback;
      }
      return GoodDeal(space, b["delta"].get<double>(),
                      !drop_positivity && b.value("positivity_constrained", true));
    }
    if (variant == "composed_good_deal") {
      std::vector<double> steps =
          parse_vector(b.value("step_deltas", json::array()), "bounds.step_deltas",
                       static_cast<size_t>(space->last_level()), issues);
      if (!issues.empty()) return fallback;
      return ComposedGoodDeal(space, std::move(steps));
    }
    if (variant == "density_bounds") {
      if (b.contains("terminal_m") || b.contains("terminal_M")) {
        std::vector<double> m =
            parse_vector(b.value("terminal_m", json::array()), "bounds.terminal_m", n, issues);
        std::vector<double> M =
            parse_vector(b.value("terminal_M", json::array()), "bounds.terminal_M", n, issues);
        if (!issues.empty()) return fallback;
        return DensityBounds::from_terminal(space, RandomVariable(space, std::move(m)),
                                            RandomVariable(space, std::move(M)));
      }
      std::map<std::pair<int, int>, std::pair<RandomVariable, RandomVariable>> table;
      for (const auto& e : b.value("pairs", json::array())) {
        const int s = e.value("s", -1), t = e.value("t", -1);
        std::vector<double> m = parse_vector(e.value("m", json::array()), "bounds.pairs.m", n, issues);
        std::vector<double> M = parse_vector(e.value("M", json::array()), "bounds.pairs.M", n, issues);
        if (!issues.empty()) return fallback;
        table.emplace(std::make_pair(s, t),
                      std::make_pair(RandomVariable(space, std::move(m)),
                                     RandomVariable(space, std::move(M))));
      }
      return DensityBounds::from_table(space, std::move(table));
    }
    if (variant == "measure_families") {
      auto fam = [&](const char* key) {
        std::vector<Density> out;
        for (const auto& e : b.value(key, json::array())) {
          std::vector<double> f =
              parse_vector(e, std::string("bounds.") + key, n, issues);
          if (issues.empty()) out.emplace_back(space, std::move(f));
        }
        return out;
      };
      std::vector<Density> upper = fam("upper");
      std::vector<Density> lower = fam("lower");
      if (!issues.empty()) return fallback;
      return MeasureFamilies(space, std::move(upper), std::move(lower));
    }
    issues.add("bounds.variant",
               "unknown variant '" + variant +
                   "' (expected good_deal, composed_good_deal, density_bounds, "
                   "measure_families)");
  } catch (const ValidationError& e) {
    issues.merge(e);
  }
  return fallback;
}

}  // namespace

Scenario parse_scenario_json(const json& doc) {
  Issues issues;
  if (!doc.is_object()) {
    issues.add("$", "scenario must be a JSON object");
    issues.raise();
  }

  SpacePtr space = parse_space(doc, issues);
  issues.raise_if_any();
  const int L = space->n_levels();
  const size_t n = static_cast<size_t>(space->n_atoms());

  // claims: default every level to { 1 }, then apply entries
  std::vector<std::vector<RandomVariable>> bases(L);
  for (int k = 0; k < L; ++k) bases[k].push_back(RandomVariable::constant(space, 1.0));
  for (const auto& e : doc.value("claims", json::array())) {
    const int t = e.value("t", -1);
    if (t < 0 || t >= L) {
      issues.add("claims", "time index " + std::to_string(t) + " not on the grid");
      continue;
    }
    if (!e.contains("basis") || !e["basis"].is_array()) {
      issues.add("claims[t=" + std::to_string(t) + "].basis", "missing array");
      continue;
    }
    int j = 0;
    for (const auto& vec : e["basis"]) {
      std::vector<double> v = parse_vector(
          vec, "claims[t=" + std::to_string(t) + "].basis[" + std::to_string(j) + "]", n, issues);
      if (issues.empty()) {
        RandomVariable claim(space, std::move(v));
        bool is_unit = true;
        for (int i = 0; i < claim.size(); ++i)
          if (std::abs(claim[i] - 1.0) > 1e-12) {
            is_unit = false;
            break;
          }
        if (!is_unit) bases[t].push_back(std::move(claim));  // 1 is always present
      }
      ++j;
    }
  }
  issues.raise_if_any();

  std::vector<ClaimSpace> claim_spaces;
  for (int k = 0; k < L; ++k) {
    try {
      claim_spaces.emplace_back(space, k, bases[k]);
    } catch (const ValidationError& e) {
      issues.merge(e);
    }
  }
  issues.raise_if_any();

  // prices: entries for pairs with nontrivial claim spaces; pairs whose L_t
  // is just {1} default to the unit image.
  std::map<std::pair<int, int>, std::vector<RandomVariable>> images;
  for (const auto& e : doc.value("prices", json::array())) {
    const int s = e.value("s", -1), t = e.value("t", -1);
    const std::string tag = "prices[s=" + std::to_string(s) + ",t=" + std::to_string(t) + "]";
    if (s < 0 || t < 0 || s >= t || t >= L) {
      issues.add(tag, "invalid grid pair");
      continue;
    }
    std::vector<RandomVariable> imgs;
    for (const auto& vec : e.value("images", json::array())) {
      std::vector<double> v = parse_vector(vec, tag + ".images", n, issues);
      if (issues.empty()) imgs.emplace_back(space, std::move(v));
    }
    if (issues.empty()) {
      if (imgs.size() != claim_spaces[t].basis().size())
        issues.add(tag, "expected " + std::to_string(claim_spaces[t].basis().size()) +
                            " images (one per basis claim, unit first), got " +
                            std::to_string(imgs.size()));
      else
        images.emplace(std::make_pair(s, t), std::move(imgs));
    }
  }
  issues.raise_if_any();
  for (int s = 0; s < L; ++s)
    for (int t = s + 1; t < L; ++t)
      if (!images.count({s, t})) {
        if (claim_spaces[t].basis().size() == 1)
          images.emplace(std::make_pair(s, t),
                         std::vector<RandomVariable>{RandomVariable::constant(space, 1.0)});
        else
          issues.add("prices", "missing images for pair (" + std::to_string(s) + "," +
                                   std::to_string(t) + ")");
      }
  issues.raise_if_any();

  ScenarioOptions options;
  const json& o = doc.value("options", json::object());
  options.lambda = o.value("lambda", 0.5);
  options.eps_pos = o.value("eps_pos", 1e-9);
  options.tolerance = o.value("tolerance", 1e-9);
  options.seed = o.value("seed", 0ULL);
  if (!(options.lambda >= 0.0 && options.lambda <= 1.0))
    issues.add("options.lambda", "must lie in [0, 1]");
  options.drop_positivity = o.value("drop_positivity", false);

  BoundFamily bounds = parse_bounds(doc, space, options.drop_positivity, issues);
  issues.raise_if_any();

  std::optional<Density> density;
  if (doc.contains("density")) {
    std::vector<double> f = parse_vector(doc["density"], "density", n, issues);
    issues.raise_if_any();
    try {
      density.emplace(space, std::move(f));
    } catch (const ValidationError& e) {
      issues.merge(e);
    }
  }
  issues.raise_if_any();

  try {
    PriceSystem system(space, std::move(claim_spaces), std::move(images));
    return Scenario{space, std::move(system), std::move(bounds), options, std::move(density)};
  } catch (const ValidationError& e) {
    issues.merge(e);
    issues.raise();
  }
}

Scenario parse_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("scenario: cannot open '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    throw ValidationError("scenario: JSON parse failure in '" + path + "': " + e.what());
  }
  return parse_scenario_json(doc);
}

}  // namespace sandwich
