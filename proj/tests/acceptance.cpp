// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "bpalm/diagnostics.hpp"
#include "bpalm/io.hpp"
#include "bpalm/oracle.hpp"
#include "support/golden.hpp"

namespace {

using namespace bpalm;
using bpalm::testing::Family;
using bpalm::testing::GoldenProblem;
using bpalm::testing::Rng;

struct Verdict {
  bool pass = true;
  std::string detail;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct GoldenRun {
  GoldenProblem problem;
  SolveReport report;
  double seconds = 0.0;
};

const std::vector<GoldenRun>& golden_runs() {
  static const std::vector<GoldenRun> runs = [] {
    std::vector<GoldenRun> out;
    for (auto& gp : bpalm::testing::golden_suite()) {
      const auto t0 = std::chrono::steady_clock::now();
      auto report = bpalm::testing::solve_golden(gp);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      out.push_back({gp, std::move(report), secs});
    }
    return out;
  }();
  return runs;
}

Verdict golden_equivalence() {
  Verdict v;
  int ok = 0;
  double worst_err = 0.0, slowest = 0.0;
  const auto& runs = golden_runs();
  for (const auto& run : runs) {
    const auto& gp = run.problem;
    const double err = (run.report.x - gp.x_star).norm() / (1.0 + gp.x_star.norm());
    worst_err = std::max(worst_err, err);
    slowest = std::max(slowest, run.seconds);
    const bool good = run.report.status == SolveStatus::Optimal && err <= 1e-6 && run.seconds < 1.0;
    if (good) {
      ++ok;
    } else {
      v.detail += " [" + gp.name + " status=" + to_string(run.report.status) + " err=" + fmt(err) +
                  " t=" + fmt(run.seconds) + "s]";
    }
  }
  v.pass = runs.size() >= 20 && ok == static_cast<int>(runs.size());
  v.detail = std::to_string(ok) + "/" + std::to_string(runs.size()) + " problems, max rel x error " +
             fmt(worst_err) + ", slowest " + fmt(slowest) + "s" + v.detail;
  return v;
}

Verdict penalty_conjugacy() {
  struct Pairing {
    NonsmoothKind g;
    LegendreKind dual;
  };
  const std::vector<Pairing> pairings{
      {NonsmoothKind::nonpositive, LegendreKind::von_neumann}, {NonsmoothKind::vecmax, LegendreKind::von_neumann},
      {NonsmoothKind::nonpositive, LegendreKind::spence},      {NonsmoothKind::zero, LegendreKind::energy},
      {NonsmoothKind::nonpositive, LegendreKind::energy},      {NonsmoothKind::one_norm, LegendreKind::energy},
  };
  Rng rng(2);
  double worst_value = 0.0, worst_grad = 0.0;
  int points = 0;
  for (const auto& p : pairings) {
    const auto pen = DualPenalty::for_pairing(p.g, p.dual);
    for (int i = 0; i < 50; ++i) {
      const Index m = 1 + (i % 2);
      const Vector u = rng.vector(m, -2.0, 2.0);
      const double sigma = rng.uniform(0.2, 5.0);
      worst_value = std::max(worst_value, std::abs(pen.value(u) - oracle::penalty_bruteforce(p.g, p.dual, sigma, u)));
      const Vector grad = pen.grad(u);
      for (Index j = 0; j < m; ++j) {
        const double h = 1e-6;
        Vector up = u, um = u;
        up[j] += h;
        um[j] -= h;
        worst_grad = std::max(worst_grad, std::abs((pen.value(up) - pen.value(um)) / (2 * h) - grad[j]));
      }
      ++points;
    }
  }
  return {worst_value <= 1e-4 && worst_grad <= 1e-6,
          std::to_string(points) + " points over " + std::to_string(pairings.size()) +
              " pairings, max value error " + fmt(worst_value) + ", max gradient error " + fmt(worst_grad)};
}

Verdict legendre_calculus() {
  struct Geometry {
    std::string name;
    LegendreFunction fn;
    std::function<Vector(Rng&)> sample;
  };
  const Index n = 4;
  const Vector lo = Vector::LinSpaced(n, -2.0, -1.0), hi = Vector::LinSpaced(n, 1.0, 3.0);
  auto in_box = [lo, hi](Rng& r) {
    Vector z(lo.size());
    for (Index i = 0; i < z.size(); ++i) {
      const double w = hi[i] - lo[i];
      z[i] = r.uniform(lo[i] + 0.01 * w, hi[i] - 0.01 * w);
    }
    return z;
  };
  const std::vector<Geometry> geometries{
      {"energy", LegendreFunction::energy(n), [n](Rng& r) { return r.vector(n, -5.0, 5.0); }},
      {"von_neumann", LegendreFunction::von_neumann(n), [n](Rng& r) { return r.vector(n, 0.01, 5.0); }},
      {"burg", LegendreFunction::burg(n), [n](Rng& r) { return r.vector(n, 0.05, 5.0); }},
      {"spence", LegendreFunction::spence(n), [n](Rng& r) { return r.vector(n, 0.01, 5.0); }},
      {"box_barrier", LegendreFunction::box_barrier(lo, hi), in_box},
  };
  double worst_trip = 0.0, worst_hess = 0.0;
  int failures = 0;
  for (const auto& g : geometries) {
    Rng rng(77);
    for (int i = 0; i < 1000; ++i) {
      const Vector z = g.sample(rng);
      const Vector w = g.sample(rng);
      worst_trip = std::max(worst_trip, (g.fn.conj_grad(g.fn.grad(z)) - z).norm() / (1.0 + z.norm()));
      const Vector product = g.fn.conj_hess_diag(g.fn.grad(z)).cwiseProduct(g.fn.hess_diag(z));
      worst_hess = std::max(worst_hess, (product - Vector::Ones(n)).cwiseAbs().maxCoeff());
      if (!(g.fn.bregman_distance(z, w) > 0.0) || g.fn.bregman_distance(z, z) != 0.0) ++failures;
    }
  }
  return {worst_trip <= 1e-10 && worst_hess <= 1e-8 && failures == 0,
          "1000 samples x " + std::to_string(geometries.size()) + " geometries, round trip " + fmt(worst_trip) +
              ", inverse Hessian " + fmt(worst_hess) + ", distance sign failures " + std::to_string(failures)};
}

Verdict inner_complexity() {
  int checked = 0, exceeded = 0, small = 0, total = 0, unpredicted = 0;
  for (const auto& run : golden_runs()) {
    const bool qsc_suite = run.problem.regime == Regime::qsc;
    const bool sc_suite = run.problem.regime == Regime::sc;
    for (const auto& rec : run.report.trace) {
      if (rec.x.size() == 0) continue;
      ++total;
      if (rec.newton_steps <= 10) ++small;
      if (!qsc_suite && !sc_suite) continue;
      if (!rec.predicted) {
        ++unpredicted;
        continue;
      }
      ++checked;
      if (rec.newton_steps > *rec.predicted) ++exceeded;
    }
  }
  const double share = total ? static_cast<double>(small) / total : 0.0;
  return {checked > 0 && exceeded == 0 && share >= 0.95,
          std::to_string(checked) + " predicted iterations, " + std::to_string(exceeded) + " above prediction, " +
              std::to_string(unpredicted) + " without a finite modulus; " + fmt(100.0 * share) +
              "% of " + std::to_string(total) + " inner solves used <= 10 steps"};
}

Verdict quadratic_contraction() {
  int checked = 0, violations = 0;
  double worst = -kInfinity;
  for (const auto& run : golden_runs()) {
    if (run.problem.family != Family::box_sc) continue;
    for (const auto& rec : run.report.trace) {
      const auto& steps = rec.newton.steps;
      for (std::size_t t = 0; t + 1 < steps.size(); ++t) {
        if (steps[t].decrement >= 0.25) continue;
        const double excess = steps[t + 1].decrement - 2.0 * steps[t].decrement * steps[t].decrement;
        worst = std::max(worst, excess);
        if (excess > 1e-8) ++violations;
        ++checked;
      }
    }
  }
  return {checked > 0 && violations == 0,
          std::to_string(checked) + " Newton pairs, " + std::to_string(violations) + " violations, max excess " +
              fmt(worst)};
}

Verdict fejer_monotonicity() {
  int monotone = 0, converged = 0, skipped = 0;
  std::string failures, skipped_names;
  for (const auto& run : golden_runs()) {
    if (run.report.status != SolveStatus::Optimal) continue;
    try {
      const auto f = fejer_check(run.report, run.problem.x_star, run.problem.y_star, run.problem.geometry);
      ++converged;
      if (f.monotone) {
        ++monotone;
      } else {
        failures += " [" + run.problem.name + " first violation k=" + std::to_string(f.violations.front()) + "]";
      }
    } catch (const DomainError&) {
      ++skipped;
      skipped_names += " " + run.problem.name;
    }
  }
  std::string detail = std::to_string(monotone) + "/" + std::to_string(converged) + " converged runs monotone";
  if (skipped) detail += "; skipped " + std::to_string(skipped) + " with the solution outside int dom:" + skipped_names;
  return {converged > 0 && monotone == converged, detail + failures};
}

Verdict superlinear_tail() {
  const GoldenProblem* target = nullptr;
  const auto& runs = golden_runs();
  for (const auto& run : runs) {
    if (run.problem.name == "eq_n4_m2") target = &run.problem;
  }
  if (!target) return {false, "eq_n4_m2 missing from the golden suite"};
  SolverConfig cfg;
  cfg.geometry = target->geometry;
  cfg.sigma0 = 1.0;
  cfg.sigma_growth = 2.0;
  cfg.rho = RhoSchedule::geometric(0.5, 0.5);
  cfg.tol_kkt = 1e-300;
  cfg.tol_B = 1e-300;
  cfg.max_outer = 60;
  const auto r = run(cfg, target->spec, default_primal_start(cfg.geometry.primal), default_dual_start(target->spec));
  // Keep the iterations that ran with the doubled step size and whose inner
  // solve was not limited by rounding. From the first floor-limited solve on,
  // the distances measure rounding noise and σ stops doubling.
  auto d = distances_to_solution(r, target->x_star, target->y_star, cfg.geometry);
  std::size_t kept = 0;
  while (kept < r.trace.size() && r.trace[kept].sigma == std::ldexp(cfg.sigma0, static_cast<int>(kept)) &&
         !r.trace[kept].newton.precision_floor) {
    ++kept;
  }
  d.resize(kept + 1);
  try {
    const auto est = rate_fit(d);
    std::string tail;
    for (std::size_t i = est.q.size() >= 5 ? est.q.size() - 5 : 0; i < est.q.size(); ++i) tail += " " + fmt(est.q[i]);
    return {est.superlinear, target->name + ", " + std::to_string(kept) + " doubling iterations, last q:" + tail};
  } catch (const InsufficientTraceError& e) {
    return {false, e.what()};
  }
}

std::vector<std::pair<Vector, Vector>> test_points(const GoldenProblem& gp, Rng& rng) {
  std::vector<std::pair<Vector, Vector>> pts{{gp.x_star, gp.y_star}};
  const Vector lo = gp.geometry.primal.lower_bounds(), hi = gp.geometry.primal.upper_bounds();
  for (int i = 0; i < 6; ++i) {
    Vector x = gp.x_star + rng.vector(gp.spec.n(), -0.5, 0.5);
    for (Index j = 0; j < x.size(); ++j) {
      const double w = std::isfinite(hi[j] - lo[j]) ? hi[j] - lo[j] : 1.0;
      x[j] = std::clamp(x[j], lo[j] + 1e-3 * w, hi[j] - 1e-3 * w);
    }
    Vector y = gp.y_star + rng.vector(gp.spec.m(), -0.5, 0.5);
    switch (gp.spec.g.kind) {
      case NonsmoothKind::nonpositive: y = y.cwiseAbs(); break;
      case NonsmoothKind::vecmax: y = project_simplex(y); break;
      case NonsmoothKind::one_norm: y = y.cwiseMax(-1.0).cwiseMin(1.0); break;
      case NonsmoothKind::zero: break;
    }
    pts.emplace_back(x, y);
  }
  return pts;
}

Verdict ergodic_bounds() {
  Rng rng(8);
  double worst_gap = -kInfinity, worst_conic = -kInfinity;
  int gap_checks = 0, conic_runs = 0;
  for (const auto& run : golden_runs()) {
    const auto gap = ergodic_gap_check(run.report, run.problem.spec, run.problem.geometry, test_points(run.problem, rng));
    worst_gap = std::max(worst_gap, gap.max_violation);
    gap_checks += gap.checks;
    if (run.problem.family == Family::inequality) {
      const auto conic = conic_feasibility_check(run.report, run.problem.spec, run.problem.geometry,
                                                 run.problem.x_star, run.problem.y_star);
      worst_conic = std::max(worst_conic, conic.max_violation);
      ++conic_runs;
    }
  }
  return {worst_gap <= 1e-8 && conic_runs > 0 && worst_conic <= 1e-8,
          std::to_string(gap_checks) + " gap checks, max violation " + fmt(worst_gap) + "; conic bound on " +
              std::to_string(conic_runs) + " inequality runs, max violation " + fmt(worst_conic)};
}

Verdict exponential_multipliers() {
  int checked = 0, log_only = 0;
  double worst = 0.0;
  for (const auto& run : golden_runs()) {
    const auto& gp = run.problem;
    if (gp.geometry.dual.kind() != LegendreKind::von_neumann || gp.spec.g.kind != NonsmoothKind::nonpositive) continue;
    Vector y = run.report.y0;
    Vector log_y = run.report.mirror0;
    for (const auto& rec : run.report.trace) {
      if (rec.x.size() == 0) break;
      const Vector step = rec.sigma * gp.spec.map.residual(rec.s);
      for (Index i = 0; i < step.size(); ++i) {
        const double predicted = y[i] * std::exp(step[i]);
        if (predicted >= 1e-300 && y[i] >= 1e-300) {
          worst = std::max(worst, std::abs(rec.y[i] - predicted) / predicted);
        } else {
          // Below the normal range the product loses digits; compare logs.
          worst = std::max(worst, std::abs(rec.mirror[i] - (log_y[i] + step[i])) / (1.0 + std::abs(rec.mirror[i])));
          ++log_only;
        }
        ++checked;
      }
      y = rec.y;
      log_y = rec.mirror;
    }
  }
  return {checked > 0 && worst <= 1e-12, std::to_string(checked) + " components, max relative error " + fmt(worst) +
                                             (log_only ? " (" + std::to_string(log_only) + " compared in log form)" : "")};
}

std::pair<int, std::string> shell(const std::string& cmd) {
  std::string out;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return {-1, out};
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

Verdict cli_determinism() {
  const std::string problem = std::string(BPALM_TEST_DATA_DIR) + "/ineq_qp_1d.json";
  const auto dir = std::filesystem::temp_directory_path();
  const auto trace_a = dir / "bpalm_acceptance_a.csv";
  const auto trace_b = dir / "bpalm_acceptance_b.csv";
  const std::string base = std::string(BPALM_CLI_PATH) + " --problem " + problem + " --report json --reproducible --trace ";
  const auto a = shell(base + trace_a.string() + " 2>/dev/null");
  const auto b = shell(base + trace_b.string() + " 2>/dev/null");
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
  };
  const std::string csv_a = slurp(trace_a), csv_b = slurp(trace_b);
  std::filesystem::remove(trace_a);
  std::filesystem::remove(trace_b);

  std::istringstream rows(csv_a);
  std::string line;
  std::getline(rows, line);
  std::string expected_header;
  for (const auto& c : io::trace_columns()) expected_header += (expected_header.empty() ? "" : ",") + c;
  bool schema = line == expected_header;
  int data_rows = 0;
  while (std::getline(rows, line)) {
    schema = schema && std::count(line.begin(), line.end(), ',') == static_cast<long>(io::trace_columns().size()) - 1;
    ++data_rows;
  }
  const bool identical = a.second == b.second && csv_a == csv_b && !a.second.empty();
  return {a.first == 0 && identical && schema && data_rows > 0,
          std::string("reports ") + (identical ? "identical" : "differ") + ", trace schema " +
              (schema ? "valid" : "invalid") + " over " + std::to_string(data_rows) + " rows"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"golden-solve equivalence", golden_equivalence},
      {"penalty conjugacy", penalty_conjugacy},
      {"Legendre calculus", legendre_calculus},
      {"inner-complexity bound", inner_complexity},
      {"quadratic contraction", quadratic_contraction},
      {"Fejer monotonicity", fejer_monotonicity},
      {"superlinear tail", superlinear_tail},
      {"ergodic bounds", ergodic_bounds},
      {"exponential-multiplier identity", exponential_multipliers},
      {"CLI determinism and schema", cli_determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.pass) ++failed;
    std::cout << (v.pass ? "PASS" : "FAIL") << "  criterion " << (i + 1) << " (" << criteria[i].first
              << "): " << v.detail << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
