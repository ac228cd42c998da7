// Command-line front end: scenario ingestion, command dispatch, and
// text/CSV reporting for the pricing pipeline.
//
// Exit codes: 0 = success / feasible / holds, 2 = definitive negative
// (infeasible, violation), 1 = usage or numerical error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "sandwich/csv.hpp"
#include "sandwich/errors.hpp"
#include "sandwich/extension.hpp"
#include "sandwich/ftap.hpp"
#include "sandwich/scenario.hpp"

namespace {

using namespace sandwich;

struct CliConfig {
  std::string scenario_path;
  std::string command;
  std::string out_dir = ".";
  double lambda = -1.0;  // < 0: use scenario option
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool csv = false;
  bool drop_positivity = false;
};

std::string fd(double v) { return format_double(v); }

void write_file(const CliConfig& cfg, const std::string& name, const std::string& content) {
  std::filesystem::create_directories(cfg.out_dir);
  const auto path = std::filesystem::path(cfg.out_dir) / name;
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) throw Error("cannot write " + path.string());
  std::cout << "wrote " << path.string() << "\n";
}

ExtendOptions extend_options(const Scenario& sc, const CliConfig& cfg) {
  ExtendOptions opts;
  opts.lambda = cfg.lambda >= 0.0 ? cfg.lambda : sc.options.lambda;
  opts.eps_pos = sc.options.eps_pos;
  return opts;
}

std::uint64_t effective_seed(const Scenario& sc, const CliConfig& cfg) {
  if (cfg.seed_set) return cfg.seed;
  return sc.options.seed != 0 ? sc.options.seed : 0xA5EED;
}

std::vector<std::vector<double>> ngd_delta_table(const Scenario& sc) {
  const auto& space = *sc.space;
  if (const auto* gd = std::get_if<GoodDeal>(&sc.bounds)) return delta_table(gd->delta(), space);
  if (const auto* cg = std::get_if<ComposedGoodDeal>(&sc.bounds)) {
    const int L = space.n_levels();
    std::vector<std::vector<double>> d(L, std::vector<double>(L, 0.0));
    for (int s = 0; s < L; ++s)
      for (int t = s; t < L; ++t) d[s][t] = cg->implied_delta(s, t);
    return d;
  }
  throw ValidationError("check-ngd requires good_deal or composed_good_deal bounds");
}

// ---------------------------------------------------------------------------
// command bodies

int cmd_validate(const Scenario& sc, const CliConfig&, std::ostream& os) {
  const auto& space = *sc.space;
  os << "scenario valid\n"
     << "  atoms: " << space.n_atoms() << ", grid points: " << space.n_levels() << "\n"
     << "  bounds: " << bound_kind(sc.bounds) << "\n";
  for (int t = 0; t < space.n_levels(); ++t)
    os << "  L_" << t << ": " << sc.system.claims(t).basis().size() << " basis claim(s)\n";
  return 0;
}

void axiom_line(std::ostream& os, const std::string& name, const AxiomCheck& c) {
  os << "  " << name << ": " << (c.passed ? "pass" : "FAIL") << " (checked " << c.checked;
  if (c.not_applicable > 0) os << ", not applicable " << c.not_applicable;
  os << ", worst " << fd(c.worst) << ")";
  if (!c.passed) os << "  [" << c.witness << "]";
  os << "\n";
}

int cmd_check_axioms(const Scenario& sc, const CliConfig& cfg, std::ostream& os) {
  const AxiomReport report = check_axioms(sc.system, effective_seed(sc, cfg));
  os << "axioms:\n";
  axiom_line(os, "normalization", report.normalization);
  axiom_line(os, "additivity", report.additivity);
  axiom_line(os, "F_s-homogeneity", report.homogeneity);
  axiom_line(os, "monotonicity", report.monotonicity);
  axiom_line(os, "strict monotonicity", report.strict_monotonicity);
  axiom_line(os, "time-consistency", report.time_consistency);
  return report.all_passed() ? 0 : 2;
}

int cmd_check_sandwich(const Scenario& sc, const CliConfig& cfg, std::ostream& os,
                       std::vector<ReportRow>* rows) {
  const int L = sc.space->n_levels();
  bool all_hold = true;
  os << "sandwich condition:\n";
  for (int s = 0; s < L; ++s)
    for (int t = s + 1; t < L; ++t) {
      const SandwichReport rep = check_sandwich(sc.system, s, t, sc.bounds);
      os << "  (" << s << "," << t << "): " << (rep.holds ? "holds" : "FAILS")
         << " (worst " << fd(rep.worst_violation) << ", method: " << rep.method << ")";
      if (!rep.holds && rep.worst_cell >= 0) os << " on F_s-cell " << rep.worst_cell;
      os << "\n";
      if (rows)
        rows->push_back(
            {s, t, "-", "sandwich_worst_violation", std::to_string(rep.worst_cell),
             rep.worst_violation});
      all_hold = all_hold && rep.holds;
    }
  (void)cfg;
  return all_hold ? 0 : 2;
}

int cmd_extend(const Scenario& sc, const CliConfig& cfg, std::ostream& os) {
  const auto& space = *sc.space;
  const ExtendOptions opts = extend_options(sc, cfg);
  std::vector<ReportRow> rows;
  for (int k = 1; k <= space.last_level(); ++k) {
    os << "extending pair (" << k - 1 << "," << k << "), lambda = " << fd(opts.lambda) << "\n";
    const ExtensionResult ext = full_extend(sc.system.partial_operator(k - 1, k), sc.bounds, opts);
    if (ext.steps.empty()) os << "  span already full, nothing to extend\n";
    for (const auto& step : ext.steps) {
      os << "  adjoin indicator of F_" << k << "-cell " << step.tcell << ":\n";
      for (int c = 0; c < space.n_cells(k - 1); ++c) {
        const double lo = step.lower.value_on_cell(k - 1, c);
        const double hi = step.upper.value_on_cell(k - 1, c);
        const double y0 = step.chosen.value_on_cell(k - 1, c);
        os << "    cell " << c << ": [c, d] = [" << fd(lo) << ", " << fd(hi) << "], y0 = "
           << fd(y0) << "\n";
        rows.push_back({k - 1, k, "1_" + std::to_string(step.tcell), "interval_lower",
                        std::to_string(c), lo});
        rows.push_back({k - 1, k, "1_" + std::to_string(step.tcell), "interval_upper",
                        std::to_string(c), hi});
        rows.push_back({k - 1, k, "1_" + std::to_string(step.tcell), "chosen_value",
                        std::to_string(c), y0});
      }
    }
  }
  if (cfg.csv) write_file(cfg, "extend.csv", to_csv(rows));
  return 0;
}

int cmd_find_measure(const Scenario& sc, const CliConfig& cfg, std::ostream& os,
                     std::vector<ReportRow>* rows) {
  const auto& space = *sc.space;
  FeasibilityOptions fopts;
  fopts.eps_pos = sc.options.eps_pos;

  bool built_ok = true;
  std::string build_error;
  std::optional<BuildOutcome> outcome;
  try {
    outcome = build_measure(sc.system, sc.bounds, extend_options(sc, cfg));
  } catch (const SandwichViolationError& e) {
    built_ok = false;
    build_error = e.what();
  }

  const FeasibilityCertificate cert = lp_feasibility(sc.system, sc.bounds, fopts);
  const bool lp_ok = cert.status == FeasStatus::Feasible;

  os << "constructive path: "
     << (built_ok ? "measure built" : std::string("failed (") + build_error + ")") << "\n";
  if (built_ok) {
    const auto& pm = outcome->measure;
    os << "  lambda = " << fd(pm.lambda_used) << ", min density = " << fd(pm.min_density)
       << ", equivalent: " << (pm.equivalent ? "yes" : "no") << "\n";
    for (int i = 0; i < space.n_atoms(); ++i)
      os << "  f(" << space.atoms()[i] << ") = " << fd(pm.f[i]) << "\n";
    for (const auto& w : outcome->report.warnings) os << "  warning: " << w << "\n";
  }
  os << "lp oracle: " << (lp_ok ? "feasible" : "infeasible") << " (method: " << cert.method
     << ", cuts: " << cert.cuts_used << ")\n";
  if (!lp_ok) {
    os << "  infeasibility certificate (value " << fd(cert.farkas_value) << "):\n";
    for (size_t i = 0; i < cert.farkas.size(); ++i)
      if (std::abs(cert.farkas[i]) > 1e-9)
        os << "    " << fd(cert.farkas[i]) << " x [" << cert.row_labels[i] << "]\n";
  }

  if (built_ok != lp_ok) {
    os << "DISAGREEMENT between constructive and LP paths\n";
    return 1;
  }
  if (!built_ok) return 2;

  const double residual = feasibility_residual(sc.system, sc.bounds, outcome->measure.f,
                                               sc.options.eps_pos);
  os << "agreement: both paths feasible; constructive measure meets the oracle constraints "
     << "within " << fd(residual) << "\n";
  if (rows) {
    for (int i = 0; i < space.n_atoms(); ++i)
      rows->push_back({0, space.last_level(), space.atoms()[i], "density",
                       space.atoms()[i], outcome->measure.f[i]});
    for (size_t k = 0; k < outcome->measure.per_step.size(); ++k)
      for (int i = 0; i < space.n_atoms(); ++i)
        rows->push_back({static_cast<int>(k), static_cast<int>(k) + 1, space.atoms()[i],
                         "step_density", space.atoms()[i], outcome->measure.per_step[k][i]});
    rows->push_back({0, space.last_level(), "-", "oracle_residual", "-", residual});
  }
  if (cfg.csv && rows) write_file(cfg, "measure.csv", to_csv(*rows));
  return 0;
}

int cmd_bounds(const Scenario& sc, const CliConfig& cfg, std::ostream& os,
               std::vector<ReportRow>* rows_out) {
  const auto& space = *sc.space;
  const int L = space.n_levels();
  std::vector<ReportRow> local;
  std::vector<ReportRow>& rows = rows_out ? *rows_out : local;
  os << "bound tables (per F_s-cell):\n";
  for (int s = 0; s < L; ++s)
    for (int t = s + 1; t < L; ++t) {
      std::vector<std::pair<std::string, RandomVariable>> claims;
      const auto& basis = sc.system.claims(t).basis();
      for (size_t j = 0; j < basis.size(); ++j) {
        if (basis[j].min_value() < -1e-12) continue;  // bounds act on the positive cone
        claims.push_back({"B" + std::to_string(j), basis[j]});
      }
      for (int d = 0; d < space.n_cells(t); ++d)
        claims.push_back({"1_" + std::to_string(d),
                          RandomVariable::cell_indicator(sc.space, t, d)});
      for (const auto& [id, X] : claims) {
        const RandomVariable lo = eval_m(sc.bounds, s, t, X);
        const RandomVariable hi = eval_M(sc.bounds, s, t, X);
        for (int c = 0; c < space.n_cells(s); ++c) {
          os << "  (" << s << "," << t << ") " << id << " cell " << c << ": m = "
             << fd(lo.value_on_cell(s, c)) << ", M = " << fd(hi.value_on_cell(s, c)) << "\n";
          rows.push_back({s, t, id, "eval_m", std::to_string(c), lo.value_on_cell(s, c)});
          rows.push_back({s, t, id, "eval_M", std::to_string(c), hi.value_on_cell(s, c)});
        }
      }
    }
  if (cfg.csv && !rows_out) write_file(cfg, "bounds.csv", to_csv(local));
  return 0;
}

int cmd_check_ngd(const Scenario& sc, const CliConfig& cfg, std::ostream& os,
                  std::vector<ReportRow>* rows) {
  const auto deltas = ngd_delta_table(sc);
  std::optional<Density> f = sc.density;
  if (!f) {
    os << "no density in scenario; building one\n";
    f = build_measure(sc.system, sc.bounds, extend_options(sc, cfg)).measure.f;
  }
  const NgdReport report = is_dynamic_ngd_measure(*f, deltas);
  os << "dynamic no-good-deal check: " << (report.passed ? "pass" : "FAIL") << "\n";
  for (const auto& pr : report.pairs) {
    os << "  (" << pr.s << "," << pr.t << "): E[k^2|F_s] = " << fd(pr.budget)
       << " vs delta^2 = " << fd(pr.limit) << (pr.passed ? "" : "  VIOLATED") << "\n";
    if (rows)
      rows->push_back({pr.s, pr.t, "-", "ngd_budget", "-", pr.budget});
  }
  (void)cfg;
  return report.passed ? 0 : 2;
}

int cmd_report(const Scenario& sc, const CliConfig& cfg) {
  std::ostringstream text;
  std::vector<ReportRow> rows;
  int worst_rc = 0;
  auto absorb = [&](int rc) { worst_rc = std::max(worst_rc, rc); };

  cmd_validate(sc, cfg, text);
  text << "\n";
  absorb(cmd_check_axioms(sc, cfg, text));
  text << "\n";
  absorb(cmd_check_sandwich(sc, cfg, text, &rows));
  text << "\n";
  absorb(cmd_find_measure(sc, cfg, text, &rows));
  text << "\n";
  absorb(cmd_bounds(sc, cfg, text, &rows));
  if (std::holds_alternative<GoodDeal>(sc.bounds) ||
      std::holds_alternative<ComposedGoodDeal>(sc.bounds)) {
    text << "\n";
    absorb(cmd_check_ngd(sc, cfg, text, &rows));
  }

  // price images always go to the CSV
  const auto& space = *sc.space;
  for (int s = 0; s < space.n_levels(); ++s)
    for (int t = s + 1; t < space.n_levels(); ++t) {
      const auto& imgs = sc.system.images(s, t);
      for (size_t j = 0; j < imgs.size(); ++j)
        for (int c = 0; c < space.n_cells(s); ++c)
          rows.push_back({s, t, "B" + std::to_string(j), "price",
                          std::to_string(c), imgs[j].value_on_cell(s, c)});
    }

  write_file(cfg, "report.txt", text.str());
  write_file(cfg, "report.csv", to_csv(rows));
  std::cout << text.str();
  return worst_rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sandwich: price-system verification, extension, and no-good-deal bounds "
               "on finite filtered spaces"};
  CliConfig cfg;
  app.add_option("--scenario", cfg.scenario_path, "scenario JSON file")->required();
  app.add_option("--command", cfg.command,
                 "one of: validate, check-axioms, check-sandwich, extend, find-measure, "
                 "bounds, check-ngd, report")
      ->required();
  app.add_option("--lambda", cfg.lambda, "selection parameter in [0,1] for extensions");
  auto* seed_opt = app.add_option("--seed", cfg.seed, "seed for sampled checks");
  app.add_option("--out", cfg.out_dir, "output directory for artifacts");
  app.add_flag("--csv", cfg.csv, "write CSV artifacts");
  app.add_flag("--drop-positivity", cfg.drop_positivity,
               "use the closed-form good-deal bounds (positivity_constrained = false)");
  CLI11_PARSE(app, argc, argv);
  cfg.seed_set = seed_opt->count() > 0;

  try {
    Scenario sc = parse_scenario(cfg.scenario_path);
    if (cfg.drop_positivity) {
      if (auto* gd = std::get_if<GoodDeal>(&sc.bounds))
        sc.bounds = GoodDeal(sc.space, gd->delta(), false);
    }

    if (cfg.command == "validate") return cmd_validate(sc, cfg, std::cout);
    if (cfg.command == "check-axioms") return cmd_check_axioms(sc, cfg, std::cout);
    if (cfg.command == "check-sandwich") {
      std::vector<ReportRow> rows;
      const int rc = cmd_check_sandwich(sc, cfg, std::cout, &rows);
      if (cfg.csv) write_file(cfg, "sandwich.csv", to_csv(rows));
      return rc;
    }
    if (cfg.command == "extend") return cmd_extend(sc, cfg, std::cout);
    if (cfg.command == "find-measure") {
      std::vector<ReportRow> rows;
      return cmd_find_measure(sc, cfg, std::cout, &rows);
    }
    if (cfg.command == "bounds") return cmd_bounds(sc, cfg, std::cout, nullptr);
    if (cfg.command == "check-ngd") {
      std::vector<ReportRow> rows;
      const int rc = cmd_check_ngd(sc, cfg, std::cout, &rows);
      if (cfg.csv) write_file(cfg, "ngd.csv", to_csv(rows));
      return rc;
    }
    if (cfg.command == "report") return cmd_report(sc, cfg);
    std::cerr << "unknown command '" << cfg.command << "'\n";
    return 1;
  } catch (const SandwichViolationError& e) {
    std::cerr << "sandwich violation: " << e.what() << "\n  certificate: " << e.certificate()
              << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
