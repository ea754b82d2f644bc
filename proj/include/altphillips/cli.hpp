#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "altphillips/cones.hpp"
#include "altphillips/error.hpp"
#include "altphillips/exponents.hpp"
#include "altphillips/expression.hpp"
#include "altphillips/field_io.hpp"
#include "altphillips/fields.hpp"
#include "altphillips/hodograph.hpp"
#include "altphillips/minimize.hpp"
#include "altphillips/parallel.hpp"
#include "altphillips/spectrum.hpp"
#include "altphillips/stability.hpp"
#include "altphillips/svg.hpp"

namespace altphillips::cli {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode { kOk = 0, kNumericalFailure = 1, kManifestError = 2 };

struct FieldIssue {
  std::string field;
  std::string message;
};

class ManifestError : public std::runtime_error {
public:
  explicit ManifestError(std::vector<FieldIssue> issues)
      : std::runtime_error(summary(issues)), issues_(std::move(issues)) {}
  const std::vector<FieldIssue>& issues() const { return issues_; }

private:
  static std::string summary(const std::vector<FieldIssue>& v) {
    std::string s = "manifest error";
    for (const auto& i : v) s += "\n  " + i.field + ": " + i.message;
    return s;
  }
  std::vector<FieldIssue> issues_;
};

// ---------------------------------------------------------------------------
// Tabular output.

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<json>> rows;

  void add(std::vector<json> row) { rows.push_back(std::move(row)); }

  std::string to_csv() const {
    std::string out;
    for (std::size_t k = 0; k < columns.size(); ++k) out += (k ? "," : "") + columns[k];
    out += '\n';
    for (const auto& r : rows) {
      for (std::size_t k = 0; k < r.size(); ++k) {
        if (k) out += ',';
        out += cell(r[k]);
      }
      out += '\n';
    }
    return out;
  }

  static std::string cell(const json& v) {
    if (v.is_number_float()) {
      const double x = v.get<double>();
      return std::isfinite(x) ? format_real(x) : (std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf"));
    }
    if (v.is_number()) return v.dump();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_null()) return "nan";
    const std::string s = v.is_string() ? v.get<std::string>() : v.dump();
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  }
};

// Finite doubles as numbers, non-finite as null, so result files stay valid JSON.
inline json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

struct Artifacts {
  json result = json::object();
  std::vector<std::pair<std::string, Table>> tables;
  std::vector<std::pair<std::string, std::string>> files;  // name, contents (fields, profiles, SVG)
  bool failed = false;
  std::string failure;

  void fail(const std::string& why) {
    failed = true;
    failure += failure.empty() ? why : "; " + why;
  }
};

// ---------------------------------------------------------------------------
// Parameter block reader: every accessor records field-level issues instead
// of throwing, so one pass reports every problem in a manifest.

class Params {
public:
  Params(const json& j, std::string prefix, std::vector<FieldIssue>& issues)
      : j_(j), prefix_(std::move(prefix)), issues_(issues) {
    if (!j_.is_object()) issue("", "must be an object");
  }

  bool has(const std::string& k) const { return j_.is_object() && j_.contains(k); }

  void issue(const std::string& key, const std::string& msg) {
    issues_.push_back({key.empty() ? prefix_ : prefix_ + "." + key, msg});
  }

  // A real may be a JSON number or a constant expression such as "2*5^0.5-5".
  std::optional<double> to_real(const json& v, const std::string& key) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
      try {
        Expression e(v.get<std::string>());
        if (e.max_coordinate() > 0) {
          issue(key, "constant expected, found coordinates in \"" + v.get<std::string>() + "\"");
          return std::nullopt;
        }
        return e();
      } catch (const std::exception& ex) {
        issue(key, ex.what());
        return std::nullopt;
      }
    }
    issue(key, "expected a number or a constant expression");
    return std::nullopt;
  }

  double real(const std::string& key, std::optional<double> def, double lo = -std::numeric_limits<double>::infinity(),
              double hi = std::numeric_limits<double>::infinity(), bool open = false) {
    used_.insert(key);
    if (!has(key)) {
      if (!def) issue(key, "required");
      return def.value_or(std::numeric_limits<double>::quiet_NaN());
    }
    const auto v = to_real(j_[key], key);
    if (!v) return def.value_or(std::numeric_limits<double>::quiet_NaN());
    check_range(key, *v, lo, hi, open);
    return *v;
  }

  long integer(const std::string& key, std::optional<long> def, long lo, long hi) {
    used_.insert(key);
    if (!has(key)) {
      if (!def) issue(key, "required");
      return def.value_or(lo);
    }
    const auto& v = j_[key];
    if (!v.is_number_integer()) {
      issue(key, "expected an integer");
      return def.value_or(lo);
    }
    const long x = v.get<long>();
    if (x < lo || x > hi) issue(key, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return x;
  }

  bool boolean(const std::string& key, bool def) {
    used_.insert(key);
    if (!has(key)) return def;
    if (!j_[key].is_boolean()) {
      issue(key, "expected true or false");
      return def;
    }
    return j_[key].get<bool>();
  }

  std::string choice(const std::string& key, std::optional<std::string> def, const std::vector<std::string>& allowed) {
    used_.insert(key);
    if (!has(key)) {
      if (!def) issue(key, "required");
      return def.value_or(allowed.front());
    }
    if (!j_[key].is_string()) {
      issue(key, "expected a string");
      return def.value_or(allowed.front());
    }
    const auto v = j_[key].get<std::string>();
    if (std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      issue(key, "unknown value \"" + v + "\"; expected one of: " + list);
    }
    return v;
  }

  std::vector<double> reals(const std::string& key, std::optional<std::vector<double>> def,
                            double lo = -std::numeric_limits<double>::infinity(),
                            double hi = std::numeric_limits<double>::infinity(), bool open = false) {
    used_.insert(key);
    if (!has(key)) {
      if (!def) issue(key, "required");
      return def.value_or(std::vector<double>{});
    }
    const auto& v = j_[key];
    if (!v.is_array() || v.empty()) {
      issue(key, "expected a non-empty array");
      return def.value_or(std::vector<double>{});
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string k = key + "[" + std::to_string(i) + "]";
      const auto x = to_real(v[i], k);
      if (!x) continue;
      check_range(k, *x, lo, hi, open);
      out.push_back(*x);
    }
    return out;
  }

  std::vector<long> integers(const std::string& key, std::optional<std::vector<long>> def, long lo, long hi) {
    used_.insert(key);
    if (!has(key)) {
      if (!def) issue(key, "required");
      return def.value_or(std::vector<long>{});
    }
    const auto& v = j_[key];
    if (!v.is_array() || v.empty()) {
      issue(key, "expected a non-empty array");
      return def.value_or(std::vector<long>{});
    }
    std::vector<long> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number_integer()) {
        issue(key + "[" + std::to_string(i) + "]", "expected an integer");
        continue;
      }
      const long x = v[i].get<long>();
      if (x < lo || x > hi)
        issue(key + "[" + std::to_string(i) + "]",
              "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
      out.push_back(x);
    }
    return out;
  }

  Expression expression(const std::string& key, std::optional<std::string> def, int max_dim) {
    used_.insert(key);
    std::string text;
    if (!has(key)) {
      if (!def) {
        issue(key, "required");
        return Expression("0");
      }
      text = *def;
    } else if (!j_[key].is_string()) {
      issue(key, "expected an expression string");
      return Expression("0");
    } else {
      text = j_[key].get<std::string>();
    }
    try {
      Expression e(text);
      if (e.max_coordinate() > max_dim)
        issue(key, "uses x" + std::to_string(e.max_coordinate()) + " on a " + std::to_string(max_dim) + "D grid");
      return e;
    } catch (const std::exception& ex) {
      issue(key, ex.what());
      return Expression("0");
    }
  }

  std::vector<Expression> expressions(const std::string& key, int max_dim) {
    used_.insert(key);
    std::vector<Expression> out;
    if (!has(key) || !j_[key].is_array() || j_[key].empty()) {
      issue(key, has(key) ? "expected a non-empty array of expressions" : "required");
      return out;
    }
    const auto& v = j_[key];
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string k = key + "[" + std::to_string(i) + "]";
      if (!v[i].is_string()) {
        issue(k, "expected an expression string");
        continue;
      }
      try {
        Expression e(v[i].get<std::string>());
        if (e.max_coordinate() > max_dim) issue(k, "uses a coordinate beyond the grid dimension");
        out.push_back(std::move(e));
      } catch (const std::exception& ex) {
        issue(k, ex.what());
      }
    }
    return out;
  }

  // Exactly one of gamma / s.
  ExponentPack pack(std::optional<double> def_gamma = std::nullopt) {
    used_.insert("gamma");
    used_.insert("s");
    const bool g = has("gamma"), s = has("s");
    if (g && s) {
      issue("gamma", "give either gamma or s, not both");
      return make_exponents(0.0);
    }
    if (!g && !s && !def_gamma) {
      issue("gamma", "required (or s)");
      return make_exponents(0.0);
    }
    if (s) {
      const double v = real("s", std::nullopt, -1.0, 2.0, true);
      return std::isfinite(v) && v > -1.0 ? exponents_from_s(v) : make_exponents(0.0);
    }
    const double v = g ? real("gamma", std::nullopt, -2.0, 2.0, true) : *def_gamma;
    return std::isfinite(v) && v > -2.0 && v < 2.0 ? make_exponents(v) : make_exponents(0.0);
  }

  void mark_used(const std::string& key) { used_.insert(key); }
  const json& raw() const { return j_; }

  // Reports keys no accessor asked for.
  void finish() {
    if (!j_.is_object()) return;
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) issue(it.key(), "unknown parameter");
  }

private:
  void check_range(const std::string& key, double v, double lo, double hi, bool open) {
    const bool bad = !std::isfinite(v) || (open ? (v <= lo || v >= hi) : (v < lo || v > hi));
    if (bad) {
      std::ostringstream m;
      m << "value " << v << " outside " << (open ? "(" : "[") << lo << ", " << hi << (open ? ")" : "]");
      issue(key, m.str());
    }
  }

  const json& j_;
  std::string prefix_;
  std::vector<FieldIssue>& issues_;
  std::set<std::string> used_;
};

// ---------------------------------------------------------------------------
// Manifest.

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> v{"exponents", "minimize", "hodograph", "cone-shoot",
                                          "stability", "spectrum", "sweep",     "hardy"};
  return v;
}

struct Manifest {
  std::string subcommand;
  fs::path output_dir;
  long seed = 0;
  json parameters = json::object();
  std::map<std::string, fs::path> inputs;
  json raw;
};

inline Manifest read_manifest(const json& raw, const fs::path& base_dir, std::vector<FieldIssue>& issues) {
  Manifest m;
  m.raw = raw;
  if (!raw.is_object()) {
    issues.push_back({"(root)", "manifest must be a JSON object"});
    return m;
  }
  static const std::set<std::string> known{"subcommand", "output_dir", "seed", "parameters", "inputs", "description"};
  for (auto it = raw.begin(); it != raw.end(); ++it)
    if (!known.count(it.key())) issues.push_back({it.key(), "unknown manifest field"});
  if (!raw.contains("subcommand") || !raw["subcommand"].is_string()) {
    issues.push_back({"subcommand", "required string"});
  } else {
    m.subcommand = raw["subcommand"].get<std::string>();
    const auto& all = subcommands();
    if (std::find(all.begin(), all.end(), m.subcommand) == all.end())
      issues.push_back({"subcommand", "unknown subcommand \"" + m.subcommand + "\""});
  }
  if (raw.contains("output_dir")) {
    if (!raw["output_dir"].is_string() || raw["output_dir"].get<std::string>().empty())
      issues.push_back({"output_dir", "expected a non-empty path string"});
    else
      m.output_dir = raw["output_dir"].get<std::string>();
  } else {
    m.output_dir = fs::path("altphillips-out") / m.subcommand;
  }
  if (raw.contains("seed")) {
    if (!raw["seed"].is_number_integer() || raw["seed"].get<long>() < 0)
      issues.push_back({"seed", "expected a non-negative integer"});
    else
      m.seed = raw["seed"].get<long>();
  }
  if (raw.contains("description") && !raw["description"].is_string())
    issues.push_back({"description", "expected a string"});
  if (raw.contains("parameters")) {
    if (!raw["parameters"].is_object())
      issues.push_back({"parameters", "expected an object"});
    else
      m.parameters = raw["parameters"];
  }
  if (raw.contains("inputs")) {
    if (!raw["inputs"].is_object()) {
      issues.push_back({"inputs", "expected an object of file paths"});
    } else {
      for (auto it = raw["inputs"].begin(); it != raw["inputs"].end(); ++it) {
        const std::string f = "inputs." + it.key();
        if (!it.value().is_string()) {
          issues.push_back({f, "expected a path string"});
          continue;
        }
        fs::path p = it.value().get<std::string>();
        if (p.is_relative()) p = base_dir / p;
        if (!fs::exists(p))
          issues.push_back({f, "file not found: " + p.string()});
        else
          m.inputs[it.key()] = p;
      }
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Shared helpers for runners.

struct GridSpec {
  Grid grid;
  bool ok = false;
};

// Box from lo / hi / cells (cells per axis, nodes = cells + 1).
inline GridSpec read_grid(Params& P, std::optional<std::vector<double>> lo_def, std::optional<std::vector<double>> hi_def,
                          std::optional<std::vector<long>> cells_def) {
  const auto lo = P.reals("lo", lo_def);
  const auto hi = P.reals("hi", hi_def);
  const auto cells = P.integers("cells", cells_def, 2, 100000);
  GridSpec gs;
  const std::size_t dim = cells.size();
  if (dim < 1 || dim > 3) {
    P.issue("cells", "needs 1 to 3 entries");
    return gs;
  }
  if (lo.size() != dim || hi.size() != dim) {
    P.issue("lo", "lo, hi and cells must have the same length");
    return gs;
  }
  Vec3 a{0, 0, 0}, b{0, 0, 0};
  std::array<std::size_t, 3> n{1, 1, 1};
  for (std::size_t k = 0; k < dim; ++k) {
    if (!(hi[k] > lo[k])) {
      P.issue("hi", "each hi must exceed lo");
      return gs;
    }
    a[k] = lo[k];
    b[k] = hi[k];
    n[k] = static_cast<std::size_t>(cells[k]) + 1;
  }
  gs.grid = Grid::box(static_cast<int>(dim), a, b, n);
  gs.ok = true;
  return gs;
}

inline Grid refine_grid(const Grid& g, long factor) {
  Vec3 lo = g.origin, hi{0, 0, 0};
  std::array<std::size_t, 3> n{1, 1, 1};
  for (int k = 0; k < g.dim; ++k) {
    hi[k] = g.upper(k);
    n[k] = (g.nodes[k] - 1) * static_cast<std::size_t>(factor) + 1;
  }
  return Grid::box(g.dim, lo, hi, n);
}

inline ScalarField sample(const Grid& g, const Expression& e) {
  return ScalarField::sample(g, [&](const Vec3& x) { return e(x); });
}

inline std::string field_text(const ScalarField& f, const json& extra = {}) {
  std::ostringstream os;
  write_field(os, f, extra);
  return os.str();
}

inline json pack_json(const ExponentPack& p) {
  return {{"gamma", num(p.gamma)}, {"beta", num(p.beta)}, {"s", num(p.s)}, {"c_beta", num(p.c_beta)}};
}

// Least-squares slope of log y against log x.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = std::log(x[i]), b = std::log(y[i]);
    sx += a;
    sy += b;
    sxx += a * a;
    sxy += a * b;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// ---------------------------------------------------------------------------
// Subcommands. Each one parses its parameters first (collecting issues) and
// returns a runner; nothing heavy happens until validation has passed.

using Runner = std::function<Artifacts()>;

inline Runner plan_exponents(Params& P, const Manifest&) {
  const bool have_pack = P.has("gamma") || P.has("s");
  const ExponentPack p = have_pack ? P.pack() : make_exponents(0.0);
  const long samples = P.integer("samples", 200, 1, 1000000);
  const auto dims = P.integers("dims", std::vector<long>{2, 3, 4, 5, 6, 7, 8}, 1, 100);
  const auto one_dim_gammas = P.reals("one_dim_gammas", std::vector<double>{-1.5, -1.0, -0.5}, -2.0, 2.0, true);
  const auto ts = P.reals("one_dim_t", std::vector<double>{0.25, 0.5, 1.0, 2.0, 4.0}, 0.0,
                          std::numeric_limits<double>::infinity(), true);
  return [=] {
    Artifacts A;
    Table id{{"gamma", "beta", "s", "c_beta", "s_identity_error", "c_beta_identity_error"}, {}};
    double worst_s = 0.0, worst_c = 0.0;
    for (long k = 0; k < samples; ++k) {
      const double g = -2.0 + 4.0 * (static_cast<double>(k) + 0.5) / static_cast<double>(samples);
      const auto q = make_exponents(g);
      const double e1 = std::abs((1.0 + q.s) * (2.0 - g) - (2.0 + g));
      const double e2 = std::abs(q.c_beta - std::pow((2.0 - g) / 2.0, 2.0 / (2.0 - g)));
      worst_s = std::max(worst_s, e1);
      worst_c = std::max(worst_c, e2);
      id.add({g, q.beta, q.s, q.c_beta, e1, e2});
    }
    A.tables.emplace_back("identities", id);

    Table od{{"gamma", "t", "u", "u_tt", "rhs", "residual", "residual_fd", "free_boundary_term"}, {}};
    double worst_res = 0.0;
    bool fb_exact = true;
    for (double g : one_dim_gammas) {
      const auto q = make_exponents(g);
      for (double t : ts) {
        const double u = one_dim_solution(t, q).u0;
        const double utt = q.c_beta * q.beta * (q.beta - 1.0) * std::pow(t, q.beta - 2.0);
        const double rhs = 0.5 * g * std::pow(u, g - 1.0);
        auto uf = [&](double x) { return one_dim_solution(x, q).u0; };
        auto d2 = [&](double h) { return (uf(t + h) - 2.0 * uf(t) + uf(t - h)) / (h * h); };
        const double h = 1e-2 * t;
        const double fd = (4.0 * d2(h / 2.0) - d2(h)) / 3.0;
        const double fb = std::pow(t, q.s) * (one_dim_solution(t, q).w0 / t - 1.0);
        fb_exact = fb_exact && fb == 0.0;
        worst_res = std::max(worst_res, std::abs(utt - rhs));
        od.add({g, t, u, utt, rhs, std::abs(utt - rhs), std::abs(fd - rhs), fb});
      }
    }
    A.tables.emplace_back("one_dim", od);

    const double d7 = d7_gamma_threshold();
    A.result["d7_gamma_threshold"] = d7;
    A.result["d7_printed_approximation"] = -0.7171;
    A.result["d7_abs_difference"] = std::abs(d7 + 0.7171);
    A.result["identity_max_error"] = {{"s", worst_s}, {"c_beta", worst_c}};
    A.result["one_dim_max_residual"] = worst_res;
    A.result["free_boundary_condition_exact"] = fb_exact;
    A.result["samples"] = samples;
    if (have_pack) {
      A.result["pack"] = pack_json(p);
      Table win{{"d", "dimension_window_admits", "theta_window_feasible", "theta_lo", "theta_hi", "stability_threshold"}, {}};
      json wj = json::object();
      if (p.s <= 1.0) {
        const auto dw = dimension_window(p.s);
        wj = {{"d_low", dw.d_low}, {"d_high", dw.d_high}};
        for (long d : dims) {
          const auto tw = theta_window(static_cast<double>(d), p.s);
          win.add({d, dw.admits(static_cast<double>(d)), tw.feasible, tw.lo, tw.hi, stability_threshold(d, p.s)});
        }
        A.tables.emplace_back("windows", win);
      }
      A.result["dimension_window"] = wj;
    }
    return A;
  };
}

inline Runner plan_minimize(Params& P, const Manifest&) {
  const ExponentPack p = P.pack();
  const GridSpec gs = read_grid(P, std::nullopt, std::nullopt, std::nullopt);
  const int dim = gs.ok ? gs.grid.dim : 3;
  const Expression boundary = P.expression("boundary", std::nullopt, dim);
  const Expression initial = P.has("initial") ? P.expression("initial", std::nullopt, dim) : boundary;
  P.mark_used("initial");
  const bool has_ref = P.has("reference");
  const Expression reference = has_ref ? P.expression("reference", std::nullopt, dim) : Expression("0");
  P.mark_used("reference");
  const auto refine = P.integers("refine", std::vector<long>{1}, 1, 64);
  DescentConfig cfg;
  cfg.max_iters = static_cast<int>(P.integer("max_iters", 2000, 1, 10000000));
  cfg.stop_tolerance = P.real("stop_tolerance", 1e-13, 0.0, 1.0);
  const bool plot = P.boolean("plot", false);
  if (has_ref && refine.size() < 2) P.issue("refine", "an order estimate needs at least two refinement levels");
  return [=] {
    Artifacts A;
    A.result["pack"] = pack_json(p);
    Table runs{{"cells_axis0", "h", "iterations", "converged", "energy", "residual", "max_error"}, {}};
    std::vector<double> hs, errs;
    MinimizeResult last;
    for (long f : refine) {
      const Grid g = refine_grid(gs.grid, f);
      auto clip = [](ScalarField s) {
        std::vector<double> v = s.values();
        for (double& x : v) x = std::max(x, 0.0);
        return ScalarField(s.grid(), std::move(v));
      };
      const auto r = minimize_projected(clip(sample(g, initial)), clip(sample(g, boundary)), p, cfg);
      double err = std::numeric_limits<double>::quiet_NaN();
      if (has_ref) {
        err = 0.0;
        for (std::size_t i = 0; i < r.w.size(); ++i) err = std::max(err, std::abs(r.w[i] - reference(g.point(i))));
        hs.push_back(g.spacing[0]);
        errs.push_back(err);
      }
      if (!r.converged) A.fail("descent did not converge at " + std::to_string(g.nodes[0] - 1) + " cells: " + r.message);
      runs.add({static_cast<long>(g.nodes[0] - 1), g.spacing[0], r.iterations, r.converged, energy_E(r.w, p).total,
                num(r.residual), num(err)});
      last = r;
    }
    A.tables.emplace_back("runs", runs);
    const auto E = energy_E(last.w, p);
    A.result["energy"] = {{"dirichlet", E.dirichlet}, {"potential", E.potential}, {"total", E.total}};
    A.result["iterations"] = last.iterations;
    A.result["converged"] = last.converged;
    A.result["residual"] = num(last.residual);
    A.result["interface_moves"] = last.interface_moves;
    if (has_ref) {
      A.result["max_error_finest"] = errs.back();
      bool positive = true;
      for (double e : errs) positive = positive && e > 0.0;
      A.result["observed_order"] = positive ? num(loglog_slope(hs, errs)) : json(nullptr);
    }
    Table trace{{"iteration", "energy"}, {}};
    for (std::size_t k = 0; k < last.energy_trace.size(); ++k) trace.add({static_cast<long>(k), last.energy_trace[k]});
    A.tables.emplace_back("energy_trace", trace);
    A.files.emplace_back("field.csv", field_text(last.w, {{"quantity", "w"}, {"gamma", p.gamma}}));
    if (last.w.grid().dim >= 2) {
      const auto fb = extract_free_boundary(last.w);
      Table t{{"curve", "x1", "x2", "x3", "curvature"}, {}};
      for (std::size_t c = 0; c < fb.curves.size(); ++c)
        for (const auto& q : fb.curves[c].points) t.add({static_cast<long>(c), q.x[0], q.x[1], q.x[2], q.curvature});
      A.tables.emplace_back("free_boundary", t);
      A.result["free_boundary"] = {{"curves", fb.curves.size()}, {"points", fb.point_count()}};
    } else {
      // 1D: last zero node before the positive phase.
      double x0 = std::numeric_limits<double>::quiet_NaN();
      for (std::size_t i = 0; i + 1 < last.w.size(); ++i)
        if (last.w[i] == 0.0 && last.w[i + 1] > 0.0) x0 = last.w.grid().point(i)[0];
      A.result["free_boundary"] = {{"x", num(x0)}};
    }
    if (plot) {
      PlotSeries s{"energy", {}, {}};
      for (std::size_t k = 0; k < last.energy_trace.size(); ++k) {
        s.x.push_back(static_cast<double>(k));
        s.y.push_back(last.energy_trace[k]);
      }
      A.files.emplace_back("energy_trace.svg", svg_line_plot("Energy trace", "iteration", "E", {s}));
    }
    return A;
  };
}

inline Runner plan_hodograph(Params& P, const Manifest& m) {
  const std::string mode = P.choice("mode", "solve", {"solve", "primitive", "forward"});
  if (mode == "primitive") {
    const auto svals = P.reals("s_values", std::vector<double>{-0.9, -0.5, 0.0, 1.0}, -1.0, 10.0, true);
    const long cells = P.integer("cells", 64, 2, 100000);
    return [=] {
      Artifacts A;
      Table t{{"s", "max_error_one", "max_error_linear"}, {}};
      double worst = 0.0;
      for (double s : svals) {
        const Grid g = Grid::box(2, {0.0, 0.0, 0.0}, {1.0, 1.0, 0.0}, {3, static_cast<std::size_t>(cells) + 1, 1});
        const auto one = weighted_ode_average(ScalarField::sample(g, [](const Vec3&) { return 1.0; }), s);
        const auto lin = weighted_ode_average(ScalarField::sample(g, [](const Vec3& x) { return x[1]; }), s);
        double e1 = 0.0, e2 = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double y = g.point(i)[1];
          e1 = std::max(e1, std::abs(one[i] - y / (1.0 + s)));
          e2 = std::max(e2, std::abs(lin[i] - y * y / (2.0 + s)));
        }
        worst = std::max({worst, e1, e2});
        t.add({s, e1, e2});
      }
      A.tables.emplace_back("primitive", t);
      A.result["max_error"] = worst;
      return A;
    };
  }
  const ExponentPack p = P.pack();
  if (mode == "forward") {
    const double y_hi = P.real("y_hi", std::nullopt, 0.0, std::numeric_limits<double>::infinity(), true);
    const long levels = P.integer("levels", 65, 3, 100000);
    if (!m.inputs.count("field")) P.issue("", "forward mode needs inputs.field");
    const fs::path path = m.inputs.count("field") ? m.inputs.at("field") : fs::path();
    return [=] {
      Artifacts A;
      std::ifstream in(path);
      const auto ff = read_field(in);
      const auto hf = forward_hodograph(ff.field, 0.0, y_hi, static_cast<std::size_t>(levels), p.s);
      A.files.emplace_back("h_field.csv", field_text(hf.h, {{"quantity", "h"}, {"s", p.s}}));
      A.result["pack"] = pack_json(p);
      A.result["admissible"] = hf.admissible();
      A.result["ball_deviation"] = hf.ball_deviation;
      if (hf.admissible()) {
        const auto r = quasilinear_residual(hf);
        A.result["max_interior_residual"] = r.max_interior;
      }
      const Grid& g = hf.h.grid();
      const Vec3 c{0.5 * (g.origin[0] + g.upper(0)), 0.5 * (g.origin[1] + g.upper(1)), 0.0};
      const auto pt = regularity_probe(hf.h, c);
      Table t{{"k", "scale", "gradient_seminorm", "second_difference"}, {}};
      for (const auto& r : pt.rows) t.add({r.k, r.scale, r.gradient_seminorm, r.second_difference});
      A.tables.emplace_back("probe", t);
      A.result["probe"] = {{"growth_slope", pt.growth_slope}, {"rough", pt.rough}};
      return A;
    };
  }
  const auto cells = P.integers("cells", std::vector<long>{16, 32, 64}, 2, 4096);
  const Expression data = P.expression("data", std::string("x2 + 0.05*x1"), 2);
  NewtonConfig cfg;
  cfg.max_steps = static_cast<int>(P.integer("max_steps", 30, 1, 10000));
  cfg.tolerance = P.real("tolerance", 1e-10, 0.0, 1.0, true);
  const double order_window = P.real("order_window", 0.0, 0.0, 0.5);
  return [=] {
    Artifacts A;
    A.result["pack"] = pack_json(p);
    Table newton{{"cells", "step", "residual"}, {}};
    Table runs{{"cells", "newton_steps", "converged", "final_residual", "recheck_residual"}, {}};
    std::vector<ScalarField> sols;
    int worst_steps = 0;
    for (long n : cells) {
      const Grid g = Grid::box(2, {0.0, 0.0, 0.0}, {1.0, 1.0, 0.0},
                               {static_cast<std::size_t>(n) + 1, static_cast<std::size_t>(n) + 1, 1});
      const auto r = solve_quasilinear(g, [&](const Vec3& x) { return data(x); }, p.s, cfg);
      for (std::size_t k = 0; k < r.residual_history.size(); ++k) newton.add({n, static_cast<long>(k), r.residual_history[k]});
      const double recheck = r.field.admissible() ? quasilinear_residual(r.field).max_interior : std::nan("");
      runs.add({n, r.newton_steps, r.converged, r.residual_history.empty() ? num(std::nan("")) : num(r.residual_history.back()),
                num(recheck)});
      if (!r.converged) A.fail("Newton did not converge on " + std::to_string(n) + " cells: " + r.message);
      worst_steps = std::max(worst_steps, r.newton_steps);
      sols.push_back(r.field.h);
    }
    A.tables.emplace_back("newton", newton);
    A.tables.emplace_back("runs", runs);
    A.result["max_newton_steps"] = worst_steps;
    {
      const Grid& g = sols.back().grid();
      const auto flat = ScalarField::sample(g, [](const Vec3& x) { return x[1]; });
      A.result["vertical_residual"] = quasilinear_residual(make_hodograph_field(flat, p.s)).max_interior;
    }
    if (sols.size() >= 3) {
      auto diff = [&](const ScalarField& a, const ScalarField& b) {
        double mx = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
          const Vec3 x = a.grid().point(i);
          if (x[0] < order_window || x[0] > 1.0 - order_window) continue;
          mx = std::max(mx, std::abs(a[i] - interpolate(b.grid(), b.values(), x)));
        }
        return mx;
      };
      const std::size_t k = sols.size();
      const double d1 = diff(sols[k - 3], sols[k - 2]), d2 = diff(sols[k - 2], sols[k - 1]);
      A.result["richardson"] = {{"coarse_difference", d1}, {"fine_difference", d2}, {"order", num(std::log2(d1 / d2))}};
    }
    A.files.emplace_back("h_field.csv", field_text(sols.back(), {{"quantity", "h"}, {"s", p.s}}));
    const auto pt = regularity_probe(sols.back(), {0.5, 0.5, 0.0});
    Table t{{"k", "scale", "gradient_seminorm", "second_difference"}, {}};
    for (const auto& r : pt.rows) t.add({r.k, r.scale, r.gradient_seminorm, r.second_difference});
    A.tables.emplace_back("probe", t);
    A.result["probe"] = {{"growth_slope", pt.growth_slope}, {"rough", pt.rough}};
    return A;
  };
}

inline json profile_json(const ConeProfile& c) {
  return {{"format", "altphillips-cone-profile"},
          {"d", c.d},
          {"gamma", c.pack.gamma},
          {"theta0", c.theta0},
          {"axis_defect", num(c.axis_defect)},
          {"collapsed", c.collapsed},
          {"collapse_theta", c.collapse_theta},
          {"exact_half_space", c.exact_half_space},
          {"diagnostic", c.diagnostic},
          {"theta", c.theta},
          {"g", c.g},
          {"dg", c.dg},
          {"ddg", c.ddg}};
}

inline ConeProfile profile_from_json(const json& j) {
  if (!j.is_object() || j.value("format", "") != "altphillips-cone-profile")
    throw DomainError("profile file: not an altphillips cone profile");
  ConeProfile c;
  c.d = j.at("d").get<int>();
  c.pack = make_exponents(j.at("gamma").get<double>());
  c.theta0 = j.at("theta0").get<double>();
  c.axis_defect = j.at("axis_defect").is_null() ? std::nan("") : j.at("axis_defect").get<double>();
  c.collapsed = j.at("collapsed").get<bool>();
  c.collapse_theta = j.value("collapse_theta", 0.0);
  c.exact_half_space = j.value("exact_half_space", false);
  c.diagnostic = j.value("diagnostic", std::string());
  c.theta = j.at("theta").get<std::vector<double>>();
  c.g = j.at("g").get<std::vector<double>>();
  c.dg = j.at("dg").get<std::vector<double>>();
  c.ddg = j.at("ddg").get<std::vector<double>>();
  if (c.theta.size() < 2 || c.g.size() != c.theta.size() || c.dg.size() != c.theta.size() || c.ddg.size() != c.theta.size())
    throw DomainError("profile file: sample arrays are missing or of different lengths");
  return c;
}

inline Runner plan_cone_shoot(Params& P, const Manifest&) {
  const int d = static_cast<int>(P.integer("d", std::nullopt, 3, 64));
  const ExponentPack p = P.pack();
  const bool single = P.has("theta0");
  const double theta0 = single ? P.real("theta0", std::nullopt, 0.0, std::numbers::pi, true) : 0.0;
  P.mark_used("theta0");
  ConeSearchConfig cfg;
  cfg.scan_points = static_cast<int>(P.integer("scan_points", 256, 8, 100000));
  cfg.tolerance = P.real("tolerance", 1e-7, 0.0, 1.0, true);
  cfg.shoot.steps = static_cast<int>(P.integer("steps", 4000, 100, 10000000));
  return [=] {
    Artifacts A;
    A.result["pack"] = pack_json(p);
    A.result["d"] = d;
    Table roots{{"index", "theta0", "axis_defect", "half_space"}, {}};
    std::vector<ConeProfile> profiles;
    if (single) {
      const auto c = shoot_from_edge(theta0, d, p, cfg.shoot);
      A.result["shot"] = {{"theta0", theta0},
                          {"axis_defect", num(c.axis_defect)},
                          {"collapsed", c.collapsed},
                          {"collapse_theta", c.collapse_theta},
                          {"complete", c.complete()},
                          {"diagnostic", c.diagnostic}};
      profiles.push_back(c);
    } else {
      const auto r = find_axisymmetric_cone(d, p, cfg);
      Table scan{{"theta0", "axis_defect"}, {}};
      for (std::size_t k = 0; k < r.scan_theta.size(); ++k) scan.add({r.scan_theta[k], num(r.scan_defect[k])});
      A.tables.emplace_back("scan", scan);
      std::size_t collapsed = 0;
      for (double v : r.scan_defect) collapsed += std::isnan(v);
      A.result["scan"] = {{"points", r.scan_theta.size()}, {"collapsed", collapsed}};
      profiles = r.roots;
      json rj = json::array();
      for (std::size_t k = 0; k < r.roots.size(); ++k) {
        const bool hs = std::abs(r.roots[k].theta0 - 0.5 * std::numbers::pi) < 1e-6;
        roots.add({static_cast<long>(k), r.roots[k].theta0, r.roots[k].axis_defect, hs});
        rj.push_back({{"theta0", r.roots[k].theta0}, {"axis_defect", r.roots[k].axis_defect}, {"half_space", hs}});
      }
      A.result["roots"] = rj;
      A.tables.emplace_back("roots", roots);
    }
    Table prof{{"profile", "theta", "g", "dg", "ddg"}, {}};
    for (std::size_t k = 0; k < profiles.size(); ++k) {
      const auto& c = profiles[k];
      for (std::size_t i = 0; i < c.theta.size(); ++i) prof.add({static_cast<long>(k), c.theta[i], c.g[i], c.dg[i], c.ddg[i]});
      A.files.emplace_back("profile_" + std::to_string(k) + ".json", profile_json(c).dump(1) + "\n");
    }
    A.tables.emplace_back("profiles", prof);
    return A;
  };
}

inline Runner plan_stability(Params& P, const Manifest&) {
  const std::string suite = P.choice("suite", std::nullopt, {"second-variation", "sternberg-zumbrun"});
  if (suite == "second-variation") {
    const GridSpec gs = read_grid(P, std::vector<double>{-1.0, 0.0}, std::vector<double>{1.0, 1.0}, std::vector<long>{128, 64});
    const int dim = gs.ok ? gs.grid.dim : 3;
    const Expression field = P.expression("field", std::string("max(x2, 0)"), dim);
    const auto tests = P.expressions("tests", dim);
    std::vector<double> svals;
    if (P.has("s_values")) {
      svals = P.reals("s_values", std::nullopt, -1.0, 10.0, true);
    } else {
      svals = {P.pack().s};
    }
    const double dt = P.real("dt", 1e-3, 0.0, 1.0, true);
    const double tol = P.real("tolerance", 1e-2, 0.0, 1.0, true);
    return [=] {
      Artifacts A;
      auto w = sample(gs.grid, field);
      {
        std::vector<double> v = w.values();
        for (double& x : v) x = std::max(x, 0.0);
        w = ScalarField(gs.grid, std::move(v));
      }
      Table t{{"s", "test", "expression", "Q", "second_variation_fd", "relative_difference", "both_positive", "pass"}, {}};
      bool all = true;
      for (double s : svals) {
        const auto p = exponents_from_s(s);
        for (std::size_t k = 0; k < tests.size(); ++k) {
          const auto f = sample(gs.grid, tests[k]);
          const double q = quadratic_form_Q(w, p, f);
          const double fd = second_variation_fd(w, p, f, dt);
          const double rel = std::abs(fd - q) / std::abs(q);
          const bool pos = q > 0.0 && fd > 0.0;
          const bool pass = rel <= tol && pos;
          all = all && pass;
          t.add({s, static_cast<long>(k), tests[k].text(), q, fd, rel, pos, pass});
        }
      }
      A.tables.emplace_back("verdicts", t);
      A.result["suite"] = "second-variation";
      A.result["tolerance"] = tol;
      A.result["pass"] = all;
      return A;
    };
  }
  const GridSpec gs =
      read_grid(P, std::vector<double>{-0.987, -0.993}, std::vector<double>{1.013, 1.007}, std::vector<long>{100, 100});
  const Expression field = P.expression("field", std::string("(x1^2 + x2^2)^0.5"), 2);
  const auto refine = P.integers("refine", std::vector<long>{1, 2}, 1, 64);
  const double tol = P.real("tolerance", 5e-2, 0.0, 1.0, true);
  if (gs.ok && gs.grid.dim != 2) P.issue("cells", "the Sternberg-Zumbrun suite needs a 2D grid");
  return [=] {
    Artifacts A;
    Table t{{"cells_axis0", "h", "max_relative", "max_absolute", "samples"}, {}};
    std::vector<double> rel;
    for (long f : refine) {
      const Grid g = refine_grid(gs.grid, f);
      const auto r = sternberg_zumbrun_check(sample(g, field));
      t.add({static_cast<long>(g.nodes[0] - 1), g.spacing[0], r.max_rel, r.max_abs, r.samples});
      rel.push_back(r.max_rel);
    }
    bool decreasing = true;
    for (std::size_t k = 1; k < rel.size(); ++k) decreasing = decreasing && rel[k] < rel[k - 1];
    A.tables.emplace_back("verdicts", t);
    A.result["suite"] = "sternberg-zumbrun";
    A.result["tolerance"] = tol;
    A.result["finest_max_relative"] = rel.back();
    A.result["decreasing"] = decreasing;
    A.result["pass"] = rel.back() <= tol && decreasing;
    return A;
  };
}

inline json report_json(const SpectrumReport& r) {
  return {{"lambda", r.lambda}, {"threshold", r.threshold}, {"stable", r.stable}, {"tolerance", r.tolerance}};
}

inline Runner plan_spectrum(Params& P, const Manifest& m) {
  const std::string mode = P.choice("mode", "section", {"section", "sphere", "jacobi", "classify"});
  const long elements = P.integer("elements", mode == "section" || mode == "classify" ? 800 : 400, 4, 10000000);
  if (mode == "section") {
    const bool from_file = m.inputs.count("profile") > 0;
    const int d = from_file ? 0 : static_cast<int>(P.integer("d", std::nullopt, 3, 64));
    const ExponentPack p = from_file ? make_exponents(0.0) : P.pack();
    const fs::path path = from_file ? m.inputs.at("profile") : fs::path();
    return [=] {
      Artifacts A;
      ConeProfile c;
      if (from_file) {
        std::ifstream in(path);
        c = profile_from_json(json::parse(in));
      } else {
        c = half_space_profile(d, p);
      }
      const auto sec = section_from_profile(c, static_cast<std::size_t>(elements));
      const auto r = lambda_s(sec, c.pack);
      A.result = report_json(r);
      A.result["pack"] = pack_json(c.pack);
      A.result["d"] = c.d;
      A.result["theta0"] = c.theta0;
      A.result["half_space"] = c.exact_half_space;
      double lo = 1e300, hi = -1e300;
      for (double v : r.eigenfunction) lo = std::min(lo, v), hi = std::max(hi, v);
      A.result["eigenfunction_spread"] = hi - lo;
      if (c.exact_half_space) {
        A.result["second_eigenvalue"] = section_eigenpair(sec, 1).value;
        A.result["second_eigenvalue_exact"] = 2.0 * (c.pack.s + c.d);
      }
      Table t{{"theta", "eigenfunction", "rho", "a2"}, {}};
      for (std::size_t i = 0; i < sec.size(); ++i) t.add({sec.theta[i], r.eigenfunction[i], num(sec.rho(i)), sec.a2[i]});
      A.tables.emplace_back("eigenfunction", t);
      return A;
    };
  }
  if (mode == "sphere") {
    const int d = static_cast<int>(P.integer("d", 3, 2, 64));
    const double end = P.real("theta_end", std::numbers::pi, 0.0, std::numbers::pi);
    const long modes = P.integer("modes", 3, 1, 100);
    return [=] {
      Artifacts A;
      const auto sec = unit_weight_section(d, end, static_cast<std::size_t>(elements));
      const bool full = end == std::numbers::pi;
      Table t{{"k", "lambda", "exact", "relative_error"}, {}};
      for (long k = 0; k < modes; ++k) {
        const double lam = section_eigenpair(sec, static_cast<std::size_t>(k)).value;
        const double ex = full ? static_cast<double>(k) * (k + d - 2) : std::nan("");
        t.add({k, lam, num(ex), full && k > 0 ? num(std::abs(lam / ex - 1.0)) : json(nullptr)});
        if (k == 1) A.result["first_nonzero"] = lam;
      }
      A.tables.emplace_back("eigenvalues", t);
      A.result["d"] = d;
      A.result["theta_end"] = end;
      return A;
    };
  }
  if (mode == "jacobi") {
    const auto dims = P.integers("dims", std::vector<long>{3, 4, 5, 6, 7}, 3, 64);
    const auto thetas = P.reals("thetas", std::vector<double>{std::numbers::pi / 3, 0.5 * std::numbers::pi}, 0.0,
                                std::numbers::pi, true);
    return [=] {
      Artifacts A;
      Table t{{"d", "theta0", "lambda", "closed_form", "relative_error", "threshold", "stable"}, {}};
      double worst = 0.0;
      for (long d : dims)
        for (double th : thetas) {
          const auto r = jacobi_lambda_latitude(static_cast<int>(d), th, static_cast<std::size_t>(elements));
          const double cf = jacobi_lambda_closed_form(static_cast<int>(d), th);
          const double rel = std::abs(cf) > 1e-12 ? std::abs(r.lambda / cf - 1.0) : std::abs(r.lambda);
          worst = std::max(worst, rel);
          t.add({d, th, r.lambda, cf, rel, r.threshold, r.stable});
        }
      A.tables.emplace_back("jacobi", t);
      A.result["max_relative_error"] = worst;
      return A;
    };
  }
  const auto dims = P.integers("dims", std::nullopt, 3, 64);
  const auto gammas = P.reals("gammas", std::nullopt, -2.0, 2.0, true);
  ConeSearchConfig cfg;
  cfg.scan_points = static_cast<int>(P.integer("scan_points", 256, 8, 100000));
  return [=] {
    Artifacts A;
    Table cones{{"d", "gamma", "s", "theta0", "half_space", "lambda", "threshold", "stable"}, {}};
    Table summary{{"d", "gamma", "s", "theta_window_feasible", "dimension_window_admits", "candidates",
                   "all_candidates_unstable", "half_space_stable"},
                  {}};
    bool consistent = true;
    for (long d : dims)
      for (double g : gammas) {
        const auto p = make_exponents(g);
        const auto r = classify_cones(static_cast<int>(d), p, cfg, static_cast<std::size_t>(elements));
        bool hs_stable = true;
        for (const auto& c : r.cones) {
          cones.add({d, g, p.s, c.theta0, c.half_space, c.report.lambda, c.report.threshold, c.report.stable});
          if (c.half_space) hs_stable = hs_stable && c.report.stable;
        }
        const bool admits = p.s <= 1.0 && dimension_window(p.s).admits(static_cast<double>(d));
        summary.add({d, g, p.s, r.window.feasible, admits, static_cast<long>(r.non_half_space()),
                     r.all_candidates_unstable(), hs_stable});
        consistent = consistent && r.all_candidates_unstable() && r.window.feasible == admits;
      }
    A.tables.emplace_back("cones", cones);
    A.tables.emplace_back("summary", summary);
    A.result["consistent"] = consistent;
    return A;
  };
}

inline Runner plan_sweep(Params& P, const Manifest&) {
  const int d = static_cast<int>(P.integer("d", std::nullopt, 3, 64));
  std::vector<double> gammas;
  if (P.has("s_values")) {
    for (double s : P.reals("s_values", std::nullopt, -1.0, 2.0, true)) gammas.push_back(exponents_from_s(s).gamma);
    P.mark_used("gammas");
  } else {
    gammas = P.reals("gammas", std::nullopt, -2.0, 2.0, true);
    P.mark_used("s_values");
  }
  const double delta = P.real("delta", 0.5, 0.0, std::numeric_limits<double>::infinity(), true);
  const long elements = P.integer("elements", 400, 4, 10000000);
  const bool plot = P.boolean("plot", true);
  return [=] {
    Artifacts A;
    const auto rows = asymptotic_sweep(d, gammas, delta, static_cast<std::size_t>(elements));
    Table t{{"gamma", "s", "lambda", "threshold", "stable", "concentration", "jacobi_target", "jacobi_threshold",
             "threshold_gap_over_1_plus_s", "note"},
            {}};
    bool conc_up = true, thr_up = true;
    double max_dev = 0.0;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const auto& r = rows[k];
      const double rate = -(r.threshold - r.jacobi_threshold) / (1.0 + r.s);
      t.add({r.gamma, r.s, num(r.lambda), r.threshold, r.stable, r.concentration, r.jacobi_target, r.jacobi_threshold, rate,
             r.note});
      max_dev = std::max(max_dev, std::abs(r.lambda - r.jacobi_target));
      if (k > 0) {
        conc_up = conc_up && r.concentration > rows[k - 1].concentration;
        thr_up = thr_up && r.threshold > rows[k - 1].threshold;
      }
    }
    A.tables.emplace_back("sweep", t);
    A.result["d"] = d;
    A.result["delta"] = delta;
    A.result["max_abs_lambda_minus_target"] = max_dev;
    A.result["concentration_increasing"] = conc_up;
    A.result["threshold_increasing"] = thr_up;
    A.result["limit_threshold"] = jacobi_threshold(d);
    if (plot) {
      PlotSeries lam{"lambda_s", {}, {}, "#1f77b4", true}, thr{"threshold", {}, {}, "#d62728", true},
          tgt{"Jacobi target", {}, {}, "#2ca02c"};
      for (const auto& r : rows) {
        lam.x.push_back(r.gamma);
        lam.y.push_back(r.lambda);
        thr.x.push_back(r.gamma);
        thr.y.push_back(r.threshold);
        tgt.x.push_back(r.gamma);
        tgt.y.push_back(r.jacobi_target);
      }
      A.files.emplace_back("sweep.svg", svg_line_plot("lambda_s and threshold, d = " + std::to_string(d), "gamma",
                                                      "value", {lam, thr, tgt}));
    }
    return A;
  };
}

inline Runner plan_hardy(Params& P, const Manifest&) {
  // Cases come either as "cases": [[d, s], ...] or as a single d with gamma / s.
  std::vector<std::pair<double, double>> cases;
  if (P.has("cases")) {
    P.mark_used("cases");
    P.mark_used("d");
    const json& c = P.raw()["cases"];
    if (!c.is_array() || c.empty()) {
      P.issue("cases", "expected a non-empty array of [d, s] pairs");
    } else {
      for (std::size_t i = 0; i < c.size(); ++i) {
        const std::string k = "cases[" + std::to_string(i) + "]";
        if (!c[i].is_array() || c[i].size() != 2) {
          P.issue(k, "expected [d, s]");
          continue;
        }
        const auto d = P.to_real(c[i][0], k + "[0]");
        const auto s = P.to_real(c[i][1], k + "[1]");
        if (!d || !s) continue;
        if (!(*d >= 2.0)) P.issue(k + "[0]", "d must be at least 2");
        if (!(*s > -1.0)) P.issue(k + "[1]", "s must exceed -1");
        cases.emplace_back(*d, *s);
      }
    }
  } else {
    const double d = P.real("d", std::nullopt, 2.0, 64.0);
    cases.emplace_back(d, P.pack().s);
  }
  const auto widen = P.reals("widen", std::vector<double>{3.0, 6.0, 12.0}, 0.0, 300.0, true);
  const long nodes = P.integer("nodes", 8000, 4, 100000000);
  const double tol = P.real("tolerance", 2e-2, 0.0, 1.0, true);
  const bool plot = P.boolean("plot", false);
  return [=] {
    Artifacts A;
    Table t{{"d", "s", "r_min", "r_max", "nodes", "value", "constant", "relative_excess", "finite_interval_value"}, {}};
    json cj = json::array();
    bool all = true;
    std::vector<PlotSeries> series;
    const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    for (std::size_t ci = 0; ci < cases.size(); ++ci) {
      const auto [d, s] = cases[ci];
      PlotSeries ps{"d=" + format_real(d) + " s=" + format_real(s), {}, {}, colors[ci % 6], true};
      double prev = std::numeric_limits<double>::infinity();
      bool from_above = true, shrinking = true;
      double last_rel = std::nan("");
      HardyResult last;
      for (double e : widen) {
        const double r0 = std::pow(10.0, -e), r1 = std::pow(10.0, e);
        const auto r = hardy_constant_numeric(d, s, r0, r1, static_cast<std::size_t>(nodes));
        const double L = std::log(r1 / r0);
        const double finite = r.exact + std::numbers::pi * std::numbers::pi / (L * L);
        const double rel = r.exact > 0.0 ? (r.value - r.exact) / r.exact : std::nan("");
        from_above = from_above && r.value >= r.exact;
        shrinking = shrinking && r.value <= prev;
        prev = r.value;
        last_rel = rel;
        last = r;
        t.add({d, s, r0, r1, nodes, r.value, r.exact, num(rel), finite});
        ps.x.push_back(e);
        ps.y.push_back(num(rel).is_null() ? std::nan("") : rel);
      }
      const bool pass = from_above && shrinking && std::isfinite(last_rel) && last_rel <= tol;
      all = all && pass;
      cj.push_back({{"d", d},
                    {"s", s},
                    {"value", last.value},
                    {"constant", last.exact},
                    {"relative_excess", num(last_rel)},
                    {"approaches_from_above", from_above && shrinking},
                    {"pass", pass}});
      series.push_back(std::move(ps));
    }
    A.tables.emplace_back("hardy", t);
    A.result["cases"] = cj;
    A.result["tolerance"] = tol;
    A.result["pass"] = all;
    if (cases.size() == 1) A.result["value"] = cj[0]["value"];
    if (plot)
      A.files.emplace_back("hardy.svg",
                           svg_line_plot("Relative excess over the Hardy constant", "log10 r_max", "relative excess", series));
    return A;
  };
}

// ---------------------------------------------------------------------------
// Validation and execution.

inline Runner plan(const Manifest& m, std::vector<FieldIssue>& issues) {
  Params P(m.parameters, "parameters", issues);
  Runner r;
  if (m.subcommand == "exponents") r = plan_exponents(P, m);
  else if (m.subcommand == "minimize") r = plan_minimize(P, m);
  else if (m.subcommand == "hodograph") r = plan_hodograph(P, m);
  else if (m.subcommand == "cone-shoot") r = plan_cone_shoot(P, m);
  else if (m.subcommand == "stability") r = plan_stability(P, m);
  else if (m.subcommand == "spectrum") r = plan_spectrum(P, m);
  else if (m.subcommand == "sweep") r = plan_sweep(P, m);
  else if (m.subcommand == "hardy") r = plan_hardy(P, m);
  else return nullptr;
  P.finish();
  for (const auto& [k, v] : m.inputs) {
    const bool wanted = (k == "field" && m.subcommand == "hodograph") || (k == "profile" && m.subcommand == "spectrum");
    if (!wanted) issues.push_back({"inputs." + k, "not used by " + m.subcommand});
  }
  return r;
}

// Parses and validates; throws ManifestError with every issue found.
inline std::pair<Manifest, Runner> validate(const json& raw, const fs::path& base_dir) {
  std::vector<FieldIssue> issues;
  Manifest m = read_manifest(raw, base_dir, issues);
  Runner r;
  if (issues.empty() || !m.subcommand.empty()) {
    const auto& all = subcommands();
    if (std::find(all.begin(), all.end(), m.subcommand) != all.end()) r = plan(m, issues);
  }
  if (!issues.empty()) throw ManifestError(std::move(issues));
  return {std::move(m), std::move(r)};
}

inline std::string compiler_text() {
#if defined(__clang__)
  return "clang " __clang_version__;
#elif defined(__GNUC__)
  return "gcc " __VERSION__;
#else
  return "unknown";
#endif
}

inline void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

struct RunOutcome {
  int code = kOk;
  fs::path dir;
  json result;    // result.json contents, or error.json contents on failure
  std::string message;
};

// Runs one manifest. `out` overrides the manifest's output_dir when non-empty.
inline RunOutcome execute(const json& raw, const fs::path& base_dir, const fs::path& out = {}) {
  RunOutcome o;
  o.dir = out;
  const auto t0 = std::chrono::steady_clock::now();
  Manifest m;
  Runner run;
  try {
    std::tie(m, run) = validate(raw, base_dir);
  } catch (const ManifestError& e) {
    json fields = json::array();
    for (const auto& i : e.issues()) fields.push_back({{"field", i.field}, {"message", i.message}});
    o.code = kManifestError;
    o.result = {{"error", "manifest"}, {"status", kManifestError}, {"fields", fields}};
    o.message = e.what();
    if (o.dir.empty() && raw.is_object() && raw.contains("output_dir") && raw["output_dir"].is_string() &&
        !raw["output_dir"].get<std::string>().empty())
      o.dir = raw["output_dir"].get<std::string>();
    if (!o.dir.empty()) {
      fs::create_directories(o.dir);
      write_text(o.dir / "error.json", o.result.dump(2) + "\n");
    }
    return o;
  }
  if (o.dir.empty()) o.dir = m.output_dir;
  fs::create_directories(o.dir);
  fs::remove(o.dir / "error.json");

  Artifacts A;
  try {
    A = run();
  } catch (const std::exception& e) {
    o.code = kNumericalFailure;
    o.result = {{"error", "numerical"}, {"status", kNumericalFailure}, {"message", e.what()}};
    o.message = e.what();
    write_text(o.dir / "error.json", o.result.dump(2) + "\n");
    return o;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  json result = A.result;
  result["subcommand"] = m.subcommand;
  result["status"] = A.failed ? "failed" : "ok";
  if (A.failed) result["failure"] = A.failure;
  json table_names = json::array();
  for (const auto& [name, table] : A.tables) {
    write_text(o.dir / (name + ".csv"), table.to_csv());
    table_names.push_back(name + ".csv");
  }
  json file_names = json::array();
  for (const auto& [name, text] : A.files) {
    write_text(o.dir / name, text);
    file_names.push_back(name);
  }
  result["tables"] = table_names;
  result["files"] = file_names;
  write_text(o.dir / "result.json", result.dump(2) + "\n");

  const json meta = {{"tool", "altphillips"},
                     {"version", kVersion},
                     {"subcommand", m.subcommand},
                     {"seed", m.seed},
                     {"manifest", m.raw},
                     {"build", {{"compiler", compiler_text()}, {"cxx_standard", static_cast<long>(__cplusplus)},
                                {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                              "." + std::to_string(EIGEN_MINOR_VERSION)},
                                {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                                      std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                                      std::to_string(NLOHMANN_JSON_VERSION_PATCH)}}},
                     {"threads", thread_count()},
                     {"timings", {{"total_seconds", seconds}}}};
  write_text(o.dir / "metadata.json", meta.dump(2) + "\n");

  o.result = result;
  if (A.failed) {
    o.code = kNumericalFailure;
    o.message = A.failure;
    write_text(o.dir / "error.json",
               json{{"error", "numerical"}, {"status", kNumericalFailure}, {"message", A.failure}}.dump(2) + "\n");
  }
  return o;
}

}  // namespace altphillips::cli
