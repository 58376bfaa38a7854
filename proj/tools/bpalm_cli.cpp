#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "bpalm/diagnostics.hpp"
#include "bpalm/io.hpp"
#include "bpalm/outer.hpp"

namespace {

constexpr int kExitOptimal = 0;
constexpr int kExitMaxIter = 1;
constexpr int kExitFailure = 2;
constexpr int kExitUsage = 64;

struct Options {
  std::string problem;
  std::string primal;
  std::string dual;
  std::string regime = "qsc";
  double sigma0 = 1.0;
  double sigma_growth = 2.0;
  double rho = 0.5;
  double rho_decay = 1.0;
  double tol = 1e-8;
  int max_outer = 500;
  int newton_cap = 50;
  std::string report = "text";
  std::string trace;
  bool diagnose = false;
  bool reproducible = false;
};

bpalm::Regime parse_regime(const std::string& s) {
  if (s == "qsc_lipschitz") return bpalm::Regime::qsc_lipschitz;
  if (s == "sc") return bpalm::Regime::sc;
  return bpalm::Regime::qsc;
}

bpalm::io::OrderedJson diagnostics_json(const bpalm::SolveReport& report, const bpalm::io::AssembledProblem& ap) {
  bpalm::io::OrderedJson d;
  const auto& x_star = *ap.x_star;
  const auto& y_star = *ap.y_star;
  try {
    const auto fejer = bpalm::fejer_check(report, x_star, y_star, ap.geometry);
    d["fejer_monotone"] = fejer.monotone;
    d["fejer_violations"] = fejer.violations;
  } catch (const bpalm::DomainError& e) {
    d["fejer_skipped"] = e.what();
  }
  try {
    const auto rate = bpalm::rate_fit(report, x_star, y_star, ap.geometry);
    d["superlinear"] = rate.superlinear;
    d["q"] = rate.q;
  } catch (const std::exception& e) {
    d["rate_skipped"] = e.what();
  }
  const auto gap = bpalm::ergodic_gap_check(report, ap.spec, ap.geometry, {{x_star, y_star}});
  d["ergodic_max_violation"] = gap.max_violation;
  return d;
}

int run(const Options& opt) {
  bpalm::io::ProblemDocument doc;
  try {
    doc = bpalm::io::load_problem(opt.problem);
  } catch (const bpalm::io::ParseError& e) {
    std::cerr << "ParseError: " << e.what() << '\n';
    return kExitFailure;
  } catch (const bpalm::io::DimensionError& e) {
    std::cerr << "DimensionError: " << e.what() << '\n';
    return kExitFailure;
  }

  bpalm::io::AssemblyOptions assembly;
  assembly.regime = parse_regime(opt.regime);
  if (opt.primal == "box_barrier") assembly.primal = bpalm::io::PrimalChoice::box_barrier;
  if (opt.primal == "energy") assembly.primal = bpalm::io::PrimalChoice::energy;
  if (opt.dual == "energy") assembly.dual = bpalm::LegendreKind::energy;
  if (opt.dual == "von_neumann") assembly.dual = bpalm::LegendreKind::von_neumann;
  if (opt.dual == "spence") assembly.dual = bpalm::LegendreKind::spence;

  bpalm::io::AssembledProblem ap;
  bpalm::SolveReport report;
  try {
    ap = bpalm::io::assemble(doc, assembly);
    bpalm::SolverConfig cfg;
    cfg.geometry = ap.geometry;
    cfg.regime = assembly.regime;
    cfg.sigma0 = opt.sigma0;
    cfg.sigma_growth = opt.sigma_growth;
    cfg.rho = bpalm::RhoSchedule{opt.rho, opt.rho_decay};
    cfg.tol_kkt = opt.tol;
    cfg.tol_B = opt.tol;
    cfg.max_outer = opt.max_outer;
    cfg.newton_cap = opt.newton_cap;
    cfg.validate();
    report = bpalm::run(cfg, ap.spec, bpalm::default_primal_start(ap.geometry.primal),
                        bpalm::default_dual_start(ap.spec));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }

  bpalm::io::ReportOptions ropt;
  ropt.reproducible = opt.reproducible;
  ropt.regime = bpalm::to_string(assembly.regime);
  ropt.primal = bpalm::to_string(ap.geometry.primal.kind());
  ropt.dual = bpalm::to_string(ap.geometry.dual.kind());

  const bool can_diagnose = opt.diagnose && ap.x_star && ap.y_star;
  if (opt.report == "json") {
    auto j = bpalm::io::report_json(report, ropt);
    if (can_diagnose) j["diagnostics"] = diagnostics_json(report, ap);
    std::cout << j.dump(2) << '\n';
  } else {
    std::cout << bpalm::io::report_text(report, ropt);
    if (can_diagnose) std::cout << "diagnostics         " << diagnostics_json(report, ap).dump() << '\n';
  }
  if (opt.diagnose && !can_diagnose) std::cerr << "note: no embedded solution, diagnostics skipped\n";

  if (!opt.trace.empty()) {
    std::ofstream out(opt.trace);
    if (!out) {
      std::cerr << "error: cannot write trace file '" << opt.trace << "'\n";
      return kExitFailure;
    }
    out << bpalm::io::trace_csv(report, ap.geometry, ap.x_star, ap.y_star);
  }

  switch (report.status) {
    case bpalm::SolveStatus::Optimal: return kExitOptimal;
    case bpalm::SolveStatus::MaxIter: return kExitMaxIter;
    default: return kExitFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bregman proximal augmented Lagrangian solver with inner Newton iterations"};
  Options opt;
  app.add_option("--problem", opt.problem, "Problem file (JSON)")->required();
  app.add_option("--primal", opt.primal, "Primal Legendre geometry")
      ->check(CLI::IsMember({"energy", "box_barrier"}));
  app.add_option("--dual", opt.dual, "Dual Legendre geometry")
      ->check(CLI::IsMember({"energy", "von_neumann", "spence"}));
  app.add_option("--regime", opt.regime, "Step-size and complexity regime")
      ->check(CLI::IsMember({"qsc", "qsc_lipschitz", "sc"}));
  app.add_option("--sigma0", opt.sigma0, "Initial step size")->check(CLI::PositiveNumber);
  app.add_option("--sigma-growth", opt.sigma_growth, "Step-size growth factor (>= 1)")->check(CLI::Range(1.0, 1e12));
  app.add_option("--rho", opt.rho, "Initial relative tolerance in [0, 1)")->check(CLI::Range(0.0, 1.0));
  app.add_option("--rho-decay", opt.rho_decay, "Factor applied to rho each iteration")->check(CLI::Range(0.0, 1.0));
  app.add_option("--tol", opt.tol, "KKT tolerance, also the bound on B_k")->check(CLI::PositiveNumber);
  app.add_option("--max-outer", opt.max_outer, "Outer iteration limit")->check(CLI::NonNegativeNumber);
  app.add_option("--newton-cap", opt.newton_cap, "Newton steps per subproblem")->check(CLI::NonNegativeNumber);
  app.add_option("--report", opt.report, "Report format")->check(CLI::IsMember({"text", "json"}));
  app.add_option("--trace", opt.trace, "Write the per-iteration CSV trace here");
  app.add_flag("--diagnose", opt.diagnose, "Run Fejer, rate and ergodic checks against the embedded solution");
  app.add_flag("--reproducible", opt.reproducible, "Report wall_time_ms as 0 so output is byte-stable");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  if (opt.rho >= 1.0) {
    std::cerr << "--rho must be below 1\n";
    return kExitUsage;
  }
  return run(opt);
}
