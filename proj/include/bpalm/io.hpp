#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bpalm/core.hpp"
#include "bpalm/diagnostics.hpp"
#include "bpalm/legendre.hpp"
#include "bpalm/outer.hpp"
#include "bpalm/problem.hpp"

namespace bpalm::io {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ConstraintType { eq, ineq, vecmax, l1 };

inline const char* to_string(ConstraintType t) {
  switch (t) {
    case ConstraintType::eq: return "eq";
    case ConstraintType::ineq: return "ineq";
    case ConstraintType::vecmax: return "vecmax";
    case ConstraintType::l1: return "l1";
  }
  return "unknown";
}

/// Parsed problem file, before any routing decisions.
struct ProblemDocument {
  Index n = 0;
  Index m = 0;
  bool quadratic = true;
  std::vector<Triplet> W;
  std::string function_name;
  Vector c;
  ConstraintType constraint = ConstraintType::eq;
  std::vector<Triplet> A;
  Vector b;
  std::optional<Vector> lower;
  std::optional<Vector> upper;
  std::optional<Vector> x_star;
  std::optional<Vector> y_star;
};

namespace detail {

inline void reject_unknown(const Json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ParseError("field '" + where + "': expected an object");
  for (const auto& item : obj.items()) {
    if (!allowed.count(item.key())) {
      throw ParseError("field '" + where + (where.empty() ? "" : ".") + item.key() + "': unknown field");
    }
  }
}

inline const Json& require(const Json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key)) throw ParseError("field '" + where + key + "': missing");
  return obj.at(key);
}

inline double number(const Json& v, const std::string& where, bool allow_infinite) {
  if (v.is_number()) return v.get<double>();
  if (allow_infinite && v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "+inf") return kInfinity;
    if (s == "-inf") return -kInfinity;
  }
  throw ParseError("field '" + where + "': expected a number" + (allow_infinite ? " or \"inf\"/\"-inf\"" : ""));
}

inline Vector dense(const Json& v, Index expected, const std::string& where, bool allow_infinite = false) {
  if (!v.is_array()) throw ParseError("field '" + where + "': expected an array");
  if (static_cast<Index>(v.size()) != expected) {
    throw DimensionError("field '" + where + "': length " + std::to_string(v.size()) + ", expected " +
                         std::to_string(expected));
  }
  Vector out(expected);
  for (Index i = 0; i < expected; ++i) {
    out[i] = number(v.at(static_cast<std::size_t>(i)), where + "[" + std::to_string(i) + "]", allow_infinite);
  }
  return out;
}

inline std::vector<Triplet> triplets(const Json& v, Index rows, Index cols, const std::string& where) {
  if (!v.is_array()) throw ParseError("field '" + where + "': expected an array of [i, j, value]");
  std::vector<Triplet> out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    const auto& t = v.at(k);
    const std::string here = where + "[" + std::to_string(k) + "]";
    if (!t.is_array() || t.size() != 3 || !t.at(0).is_number_integer() || !t.at(1).is_number_integer()) {
      throw ParseError("field '" + here + "': expected [row, col, value] with integer indices");
    }
    const auto i = t.at(0).get<long long>();
    const auto j = t.at(1).get<long long>();
    if (i < 0 || i >= rows || j < 0 || j >= cols) {
      throw DimensionError("field '" + here + "': index (" + std::to_string(i) + ", " + std::to_string(j) +
                           ") outside " + std::to_string(rows) + "x" + std::to_string(cols));
    }
    out.emplace_back(static_cast<Index>(i), static_cast<Index>(j), number(t.at(2), here + "[2]", false));
  }
  return out;
}

inline std::string line_context(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace detail

inline ProblemDocument parse_problem_text(const std::string& text) {
  Json root;
  try {
    root = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(detail::line_context(text, e.byte) + ": malformed document");
  }
  detail::reject_unknown(root, {"name", "description", "n", "m", "objective", "constraint", "bounds", "solution"}, "");
  ProblemDocument doc;
  const auto& n_field = detail::require(root, "n", "");
  const auto& m_field = detail::require(root, "m", "");
  if (!n_field.is_number_integer() || n_field.get<long long>() < 1) throw ParseError("field 'n': expected a positive integer");
  if (!m_field.is_number_integer() || m_field.get<long long>() < 0) throw ParseError("field 'm': expected a nonnegative integer");
  doc.n = n_field.get<Index>();
  doc.m = m_field.get<Index>();

  const auto& objective = detail::require(root, "objective", "");
  detail::reject_unknown(objective, {"quadratic", "function"}, "objective");
  if (objective.contains("quadratic") == objective.contains("function")) {
    throw ParseError("field 'objective': exactly one of 'quadratic' or 'function' is required");
  }
  if (objective.contains("quadratic")) {
    const auto& q = objective.at("quadratic");
    detail::reject_unknown(q, {"W", "c"}, "objective.quadratic");
    doc.quadratic = true;
    doc.W = detail::triplets(detail::require(q, "W", "objective.quadratic."), doc.n, doc.n, "objective.quadratic.W");
    doc.c = detail::dense(detail::require(q, "c", "objective.quadratic."), doc.n, "objective.quadratic.c");
  } else {
    const auto& fn = objective.at("function");
    detail::reject_unknown(fn, {"name", "c"}, "objective.function");
    doc.quadratic = false;
    const auto& name = detail::require(fn, "name", "objective.function.");
    if (!name.is_string()) throw ParseError("field 'objective.function.name': expected a string");
    doc.function_name = name.get<std::string>();
    if (doc.function_name != "logsumexp" && doc.function_name != "softplus_sum") {
      throw ParseError("field 'objective.function.name': unknown function '" + doc.function_name + "'");
    }
    doc.c = fn.contains("c") ? detail::dense(fn.at("c"), doc.n, "objective.function.c") : Vector::Zero(doc.n);
  }

  const auto& constraint = detail::require(root, "constraint", "");
  detail::reject_unknown(constraint, {"type", "A", "b"}, "constraint");
  const auto& type = detail::require(constraint, "type", "constraint.");
  if (!type.is_string()) throw ParseError("field 'constraint.type': expected a string");
  const auto t = type.get<std::string>();
  if (t == "eq") doc.constraint = ConstraintType::eq;
  else if (t == "ineq") doc.constraint = ConstraintType::ineq;
  else if (t == "vecmax") doc.constraint = ConstraintType::vecmax;
  else if (t == "l1") doc.constraint = ConstraintType::l1;
  else throw ParseError("field 'constraint.type': expected eq, ineq, vecmax or l1");
  doc.A = detail::triplets(detail::require(constraint, "A", "constraint."), doc.m, doc.n, "constraint.A");
  doc.b = detail::dense(detail::require(constraint, "b", "constraint."), doc.m, "constraint.b");

  if (root.contains("bounds")) {
    const auto& bounds = root.at("bounds");
    detail::reject_unknown(bounds, {"l", "u"}, "bounds");
    doc.lower = bounds.contains("l") ? detail::dense(bounds.at("l"), doc.n, "bounds.l", true)
                                     : Vector::Constant(doc.n, -kInfinity);
    doc.upper = bounds.contains("u") ? detail::dense(bounds.at("u"), doc.n, "bounds.u", true)
                                     : Vector::Constant(doc.n, kInfinity);
    for (Index i = 0; i < doc.n; ++i) {
      if (!((*doc.lower)[i] < (*doc.upper)[i])) {
        throw ParseError("field 'bounds': l[" + std::to_string(i) + "] must be below u[" + std::to_string(i) + "]");
      }
    }
  }
  if (root.contains("solution")) {
    const auto& sol = root.at("solution");
    detail::reject_unknown(sol, {"x", "y"}, "solution");
    doc.x_star = detail::dense(detail::require(sol, "x", "solution."), doc.n, "solution.x");
    doc.y_star = detail::dense(detail::require(sol, "y", "solution."), doc.m, "solution.y");
  }
  return doc;
}

inline ProblemDocument load_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open problem file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_problem_text(buffer.str());
}

enum class PrimalChoice { energy, box_barrier };

struct AssemblyOptions {
  std::optional<PrimalChoice> primal;
  std::optional<LegendreKind> dual;
  Regime regime = Regime::qsc;
};

struct AssembledProblem {
  ProblemSpec spec;
  BregmanGeometry geometry;
  std::optional<Vector> x_star;
  std::optional<Vector> y_star;
  /// Number of rows appended to carry finite bounds as inequality rows.
  Index bound_rows = 0;
};

inline LegendreKind default_dual(ConstraintType t) {
  switch (t) {
    case ConstraintType::eq: return LegendreKind::energy;
    case ConstraintType::ineq: return LegendreKind::von_neumann;
    case ConstraintType::vecmax: return LegendreKind::von_neumann;
    case ConstraintType::l1: return LegendreKind::energy;
  }
  return LegendreKind::energy;
}

/// Builds the solver problem and geometry. Finite bounds go into the
/// box-barrier primal geometry under the sc regime or an explicit
/// box_barrier primal; otherwise they become extra rows of an inequality
/// constraint. Other constraint types with bounds need the barrier.
inline AssembledProblem assemble(const ProblemDocument& doc, const AssemblyOptions& opts) {
  AssembledProblem out;
  const LegendreKind dual = opts.dual.value_or(default_dual(doc.constraint));
  const bool has_bounds = doc.lower.has_value();
  const bool use_barrier = opts.regime == Regime::sc || opts.primal == PrimalChoice::box_barrier;

  if (opts.regime == Regime::sc && (doc.constraint != ConstraintType::eq || dual != LegendreKind::energy)) {
    throw UnsupportedError("the sc regime needs an eq constraint with the energy dual");
  }
  if (!doc.quadratic && has_bounds) throw UnsupportedError("bounds are only supported with quadratic objectives");

  SparseMatrix W;
  if (doc.quadratic) {
    W.resize(doc.n, doc.n);
    W.setFromTriplets(doc.W.begin(), doc.W.end());
  }

  std::vector<Triplet> rows = doc.A;
  std::vector<double> rhs(doc.b.data(), doc.b.data() + doc.b.size());
  Index m = doc.m;

  if (has_bounds && use_barrier) {
    out.spec.f = SmoothObjective::box_quadratic(W, doc.c, *doc.lower, *doc.upper);
    out.geometry.primal = LegendreFunction::box_barrier(*doc.lower, *doc.upper);
  } else {
    if (has_bounds) {
      if (doc.constraint != ConstraintType::ineq) {
        throw UnsupportedError(std::string("bounds with a '") + to_string(doc.constraint) +
                               "' constraint need --primal box_barrier or the sc regime");
      }
      for (Index i = 0; i < doc.n; ++i) {
        if (std::isfinite((*doc.upper)[i])) {
          rows.emplace_back(m, i, 1.0);
          rhs.push_back((*doc.upper)[i]);
          ++m;
        }
        if (std::isfinite((*doc.lower)[i])) {
          rows.emplace_back(m, i, -1.0);
          rhs.push_back(-(*doc.lower)[i]);
          ++m;
        }
      }
      out.bound_rows = m - doc.m;
    }
    if (doc.quadratic) {
      out.spec.f = SmoothObjective::quadratic(W, doc.c);
    } else if (doc.function_name == "logsumexp") {
      out.spec.f = SmoothObjective::logsumexp(doc.c);
    } else {
      out.spec.f = SmoothObjective::softplus_sum(doc.c);
    }
    out.geometry.primal = use_barrier ? LegendreFunction::box_barrier(Vector::Constant(doc.n, -kInfinity),
                                                                      Vector::Constant(doc.n, kInfinity))
                                      : LegendreFunction::energy(doc.n);
  }

  switch (doc.constraint) {
    case ConstraintType::eq: out.spec.g.kind = NonsmoothKind::zero; break;
    case ConstraintType::ineq: out.spec.g.kind = NonsmoothKind::nonpositive; break;
    case ConstraintType::vecmax: out.spec.g.kind = NonsmoothKind::vecmax; break;
    case ConstraintType::l1: out.spec.g.kind = NonsmoothKind::one_norm; break;
  }
  out.spec.map = AffineMap::from_triplets(m, doc.n, rows, Eigen::Map<const Vector>(rhs.data(), m));
  out.spec.validate();

  switch (dual) {
    case LegendreKind::energy: out.geometry.dual = LegendreFunction::energy(m); break;
    case LegendreKind::von_neumann: out.geometry.dual = LegendreFunction::von_neumann(m); break;
    case LegendreKind::spence: out.geometry.dual = LegendreFunction::spence(m); break;
    default: throw UnsupportedError(std::string("dual geometry '") + to_string(dual) + "' is not offered");
  }
  // Fails early for pairings outside the penalty catalog.
  (void)DualPenalty::for_pairing(out.spec.g.kind, dual);

  out.x_star = doc.x_star;
  if (out.bound_rows == 0) out.y_star = doc.y_star;
  return out;
}

/// Shortest round-trip text of a double (what the JSON writer uses).
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct ReportOptions {
  bool reproducible = false;
  std::string regime;
  std::string primal;
  std::string dual;
};

inline OrderedJson vector_json(const Vector& v) {
  OrderedJson arr = OrderedJson::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

inline OrderedJson report_json(const SolveReport& r, const ReportOptions& opts) {
  OrderedJson j;
  j["status"] = to_string(r.status);
  j["iterations"] = r.outer_iterations;
  j["newton_steps_total"] = r.newton_steps_total;
  j["dual_res"] = r.residuals.dual_res;
  j["primal_res"] = r.residuals.primal_res;
  j["compl_res"] = r.residuals.compl_res;
  j["sigma_final"] = r.sigma_final;
  j["wall_time_ms"] = opts.reproducible ? 0.0 : r.wall_time_ms;
  j["regime"] = opts.regime;
  j["primal"] = opts.primal;
  j["dual"] = opts.dual;
  j["message"] = r.message;
  j["x"] = vector_json(r.x);
  j["y"] = vector_json(r.y);
  return j;
}

inline std::string report_text(const SolveReport& r, const ReportOptions& opts) {
  std::ostringstream out;
  out << "status              " << to_string(r.status) << '\n';
  if (!r.message.empty()) out << "message             " << r.message << '\n';
  out << "geometry            primal=" << opts.primal << " dual=" << opts.dual << " regime=" << opts.regime << '\n';
  out << "iterations          " << r.outer_iterations << '\n';
  out << "newton_steps_total  " << r.newton_steps_total << '\n';
  out << "dual_res            " << format_double(r.residuals.dual_res) << '\n';
  out << "primal_res          " << format_double(r.residuals.primal_res) << '\n';
  out << "compl_res           " << format_double(r.residuals.compl_res) << '\n';
  out << "sigma_final         " << format_double(r.sigma_final) << '\n';
  out << "wall_time_ms        " << format_double(opts.reproducible ? 0.0 : r.wall_time_ms) << '\n';
  out << "x                  ";
  for (Index i = 0; i < r.x.size(); ++i) out << ' ' << format_double(r.x[i]);
  out << "\ny                  ";
  for (Index i = 0; i < r.y.size(); ++i) out << ' ' << format_double(r.y[i]);
  out << '\n';
  return out.str();
}

inline const std::vector<std::string>& trace_columns() {
  static const std::vector<std::string> cols{"k",        "sigma",    "rho",       "T_k_used",
                                             "T_k_predicted", "B_k", "grad_norm", "decrement",
                                             "dual_res", "primal_res", "D_to_solution"};
  return cols;
}

/// Per-iteration CSV. D_to_solution is D_Φ(z*, z_{k+1}) and stays empty
/// without a reference solution.
inline std::string trace_csv(const SolveReport& r, const BregmanGeometry& geometry,
                             const std::optional<Vector>& x_star, const std::optional<Vector>& y_star) {
  std::ostringstream out;
  const auto& cols = trace_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  const bool with_solution = x_star && y_star && geometry.primal.in_domain(*x_star) && geometry.dual.in_domain(*y_star);
  for (const auto& rec : r.trace) {
    if (rec.x.size() == 0) continue;
    out << rec.k << ',' << format_double(rec.sigma) << ',' << format_double(rec.rho) << ',' << rec.newton_steps << ',';
    if (rec.predicted) out << *rec.predicted;
    out << ',' << format_double(rec.b_measure) << ',' << format_double(rec.grad_norm) << ','
        << format_double(rec.initial_decrement) << ',' << format_double(rec.residuals.dual_res) << ','
        << format_double(rec.residuals.primal_res) << ',';
    if (with_solution) {
      out << format_double(geometry.primal.bregman_distance(*x_star, rec.x) +
                           geometry.dual.bregman_distance_to_mirror(*y_star, rec.mirror));
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace bpalm::io
