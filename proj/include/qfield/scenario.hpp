#pragma once

// Scenario files: flat `key = value` lines, `#` comments, sections by key
// prefix. Parsing, serialization and the run driver live here; file output
// is in io.hpp.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "qfield/propagator.hpp"
#include "qfield/verify.hpp"

namespace qfield {

enum class StateKind { gaussian, eigenstate, plane_wave };

inline const char* to_string(StateKind k) {
  switch (k) {
    case StateKind::gaussian: return "gaussian";
    case StateKind::eigenstate: return "eigenstate";
    case StateKind::plane_wave: return "plane_wave";
  }
  return "unknown";
}

struct StateSpec {
  StateKind kind = StateKind::gaussian;
  double x0 = 0.0;
  double sigma = 1.0;
  double k0 = 0.0;
  int n = 1;  // eigenstate index, 1 = ground state

  friend bool operator==(const StateSpec&, const StateSpec&) = default;
};

struct Scenario {
  double x_min = 0.0;
  double x_max = 0.0;
  std::size_t n_points = 0;
  double hbar = 1.0;
  double mass = 1.0;
  PotentialSpec potential;
  StateSpec state;
  PropagatorConfig prop;
  double t_end = 0.0;
  double dt_out = 0.0;
  std::set<IdentityTag> identities = all_identities();
  bool refinement = false;
  double mask_threshold = kDefaultMaskThreshold;
  std::string out_dir = "out";
  std::vector<FieldLabel> plots;

  Grid grid() const { return make_grid(x_min, x_max, n_points, hbar, mass); }

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class ScenarioParser {
 public:
  Scenario parse(const std::string& text) {
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
      ++line_no;
      const auto hash = raw.find('#');
      const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) fail(line_no, "", ErrorCode::parse_error, "expected 'key = value'");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty()) fail(line_no, "", ErrorCode::parse_error, "missing key");
      if (lines_.count(key)) fail(line_no, key, ErrorCode::parse_error, "duplicate key (first on line " +
                                                                            std::to_string(lines_[key]) + ")");
      const auto h = handlers().find(key);
      if (h == handlers().end()) fail(line_no, key, ErrorCode::parse_error, "unknown key");
      lines_[key] = line_no;
      line_ = line_no;
      key_ = key;
      h->second(*this, value);
    }
    validate();
    return s_;
  }

 private:
  using Handler = std::function<void(ScenarioParser&, const std::string&)>;

  [[noreturn]] static void fail(int line, const std::string& key, ErrorCode code, const std::string& what) {
    std::string msg = "line " + std::to_string(line);
    if (!key.empty()) msg += ", key '" + key + "'";
    throw Error(code, msg + ": " + what);
  }
  [[noreturn]] void fail_key(const std::string& key, ErrorCode code, const std::string& what) const {
    const auto it = lines_.find(key);
    if (it == lines_.end()) throw Error(code, "key '" + key + "': " + what);
    fail(it->second, key, code, what);
  }
  [[noreturn]] void type_error(const std::string& expected, const std::string& got) const {
    fail(line_, key_, ErrorCode::parse_error, "expected " + expected + ", got '" + got + "'");
  }

  double real(const std::string& v) const {
    char* end = nullptr;
    const double d = std::strtod(v.c_str(), &end);
    if (v.empty() || *end != '\0' || !std::isfinite(d)) type_error("a finite real number", v);
    return d;
  }
  long long integer(const std::string& v) const {
    char* end = nullptr;
    const long long n = std::strtoll(v.c_str(), &end, 10);
    if (v.empty() || *end != '\0') type_error("an integer", v);
    return n;
  }
  bool boolean(const std::string& v) const {
    if (v == "true") return true;
    if (v == "false") return false;
    type_error("true or false", v);
  }

  static const std::map<std::string, Handler>& handlers() {
    static const std::map<std::string, Handler> h = {
        {"grid.x_min", [](ScenarioParser& p, const std::string& v) { p.s_.x_min = p.real(v); }},
        {"grid.x_max", [](ScenarioParser& p, const std::string& v) { p.s_.x_max = p.real(v); }},
        {"grid.n_points",
         [](ScenarioParser& p, const std::string& v) {
           const auto n = p.integer(v);
           if (n < 0) p.type_error("a non-negative integer", v);
           p.s_.n_points = static_cast<std::size_t>(n);
         }},
        {"grid.hbar", [](ScenarioParser& p, const std::string& v) { p.s_.hbar = p.real(v); }},
        {"grid.mass", [](ScenarioParser& p, const std::string& v) { p.s_.mass = p.real(v); }},
        {"potential.kind",
         [](ScenarioParser& p, const std::string& v) {
           static const std::map<std::string, PotentialKind> kinds = {{"free", PotentialKind::free},
                                                                     {"harmonic", PotentialKind::harmonic},
                                                                     {"box", PotentialKind::box},
                                                                     {"barrier", PotentialKind::barrier},
                                                                     {"linear", PotentialKind::linear}};
           const auto it = kinds.find(v);
           if (it == kinds.end()) p.type_error("one of free, harmonic, box, barrier, linear", v);
           p.s_.potential.kind = it->second;
         }},
        {"potential.omega", [](ScenarioParser& p, const std::string& v) { p.s_.potential.omega = p.real(v); }},
        {"potential.height", [](ScenarioParser& p, const std::string& v) { p.s_.potential.height = p.real(v); }},
        {"potential.left", [](ScenarioParser& p, const std::string& v) { p.s_.potential.left = p.real(v); }},
        {"potential.right", [](ScenarioParser& p, const std::string& v) { p.s_.potential.right = p.real(v); }},
        {"potential.slope", [](ScenarioParser& p, const std::string& v) { p.s_.potential.slope = p.real(v); }},
        {"state.kind",
         [](ScenarioParser& p, const std::string& v) {
           if (v == "gaussian")
             p.s_.state.kind = StateKind::gaussian;
           else if (v == "eigenstate")
             p.s_.state.kind = StateKind::eigenstate;
           else if (v == "plane_wave")
             p.s_.state.kind = StateKind::plane_wave;
           else
             p.type_error("one of gaussian, eigenstate, plane_wave", v);
         }},
        {"state.x0", [](ScenarioParser& p, const std::string& v) { p.s_.state.x0 = p.real(v); }},
        {"state.sigma", [](ScenarioParser& p, const std::string& v) { p.s_.state.sigma = p.real(v); }},
        {"state.k0", [](ScenarioParser& p, const std::string& v) { p.s_.state.k0 = p.real(v); }},
        {"state.n",
         [](ScenarioParser& p, const std::string& v) {
           const auto n = p.integer(v);
           if (n < 1 || n > 1000000) p.type_error("a positive integer", v);
           p.s_.state.n = static_cast<int>(n);
         }},
        {"prop.scheme",
         [](ScenarioParser& p, const std::string& v) {
           if (v == "crank_nicolson")
             p.s_.prop.scheme = Scheme::crank_nicolson;
           else if (v == "split_fourier")
             p.s_.prop.scheme = Scheme::split_fourier;
           else
             p.type_error("crank_nicolson or split_fourier", v);
         }},
        {"prop.dt", [](ScenarioParser& p, const std::string& v) { p.s_.prop.dt = p.real(v); }},
        {"prop.boundary",
         [](ScenarioParser& p, const std::string& v) {
           if (v == "dirichlet")
             p.s_.prop.boundary = Boundary::dirichlet;
           else if (v == "periodic")
             p.s_.prop.boundary = Boundary::periodic;
           else
             p.type_error("dirichlet or periodic", v);
         }},
        {"prop.t_end", [](ScenarioParser& p, const std::string& v) { p.s_.t_end = p.real(v); }},
        {"verify.identities",
         [](ScenarioParser& p, const std::string& v) {
           p.s_.identities.clear();
           for (const auto& item : split_list(v)) {
             if (item == "all") {
               const auto all = all_identities();
               p.s_.identities.insert(all.begin(), all.end());
               continue;
             }
             const auto tag = parse_identity(item);
             if (!tag) p.type_error("identity tags or 'all'", item);
             p.s_.identities.insert(*tag);
           }
           if (p.s_.identities.empty()) p.fail(p.line_, p.key_, ErrorCode::empty_selection, "no identities selected");
         }},
        {"verify.refinement", [](ScenarioParser& p, const std::string& v) { p.s_.refinement = p.boolean(v); }},
        {"verify.mask_threshold", [](ScenarioParser& p, const std::string& v) { p.s_.mask_threshold = p.real(v); }},
        {"out.dir",
         [](ScenarioParser& p, const std::string& v) {
           if (v.empty()) p.type_error("a directory path", v);
           p.s_.out_dir = v;
         }},
        {"out.dt_out", [](ScenarioParser& p, const std::string& v) { p.s_.dt_out = p.real(v); }},
        {"out.plots",
         [](ScenarioParser& p, const std::string& v) {
           p.s_.plots.clear();
           for (const auto& item : split_list(v)) {
             const auto label = parse_field_label(item);
             if (!label || *label == FieldLabel::custom) p.type_error("field labels", item);
             if (std::find(p.s_.plots.begin(), p.s_.plots.end(), *label) == p.s_.plots.end())
               p.s_.plots.push_back(*label);
           }
         }},
    };
    return h;
  }

  void validate() {
    for (const char* key : {"grid.x_min", "grid.x_max", "grid.n_points", "prop.dt", "prop.t_end", "out.dt_out"})
      if (!lines_.count(key)) throw Error(ErrorCode::parse_error, std::string("missing required key '") + key + "'");

    try {
      (void)s_.grid();
    } catch (const Error& e) {
      const char* key = e.code() == ErrorCode::too_few_points      ? "grid.n_points"
                        : e.code() == ErrorCode::degenerate_domain ? "grid.x_max"
                        : !(s_.mass > 0.0)                         ? "grid.mass"
                                                                   : "grid.hbar";
      fail_key(key, e.code(), e.what());
    }

    if (!lines_.count("prop.boundary"))
      s_.prop.boundary = s_.prop.scheme == Scheme::crank_nicolson ? Boundary::dirichlet : Boundary::periodic;
    try {
      s_.prop.validate();
    } catch (const Error& e) {
      fail_key(e.code() == ErrorCode::boundary_scheme_mismatch ? (lines_.count("prop.boundary") ? "prop.boundary" : "prop.scheme")
                                                               : "prop.dt",
               e.code(), e.what());
    }
    if (s_.potential.kind == PotentialKind::box && s_.prop.scheme == Scheme::split_fourier)
      fail_key(lines_.count("prop.scheme") ? "prop.scheme" : "potential.kind", ErrorCode::boundary_scheme_mismatch,
               "box potential needs hard walls; split_fourier is periodic, use crank_nicolson");
    if (s_.potential.kind == PotentialKind::harmonic && !(s_.potential.omega > 0.0))
      fail_key("potential.omega", ErrorCode::invalid_argument, "harmonic omega must be positive");
    if (s_.potential.kind == PotentialKind::barrier && !(s_.potential.left < s_.potential.right))
      fail_key("potential.right", ErrorCode::invalid_argument, "barrier edges must satisfy left < right");

    if (!(s_.dt_out > 0.0)) fail_key("out.dt_out", ErrorCode::invalid_argument, "must be positive");
    const double ratio = s_.dt_out / s_.prop.dt;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio || std::round(ratio) < 1.0)
      fail_key("out.dt_out", ErrorCode::invalid_argument,
               "out.dt_out = " + format_double(s_.dt_out) + " is not an integer multiple of prop.dt = " +
                   format_double(s_.prop.dt));
    if (!(s_.t_end >= 2.0 * s_.dt_out * (1.0 - 1e-12)))
      fail_key("prop.t_end", ErrorCode::invalid_argument,
               "prop.t_end = " + format_double(s_.t_end) + " must be at least 2 * out.dt_out = " +
                   format_double(2.0 * s_.dt_out));

    if (s_.state.kind == StateKind::gaussian && !(s_.state.sigma > 0.0))
      fail_key("state.sigma", ErrorCode::nonpositive_sigma, "must be positive");
    if (s_.state.kind == StateKind::eigenstate && s_.prop.boundary != Boundary::dirichlet)
      fail_key("state.kind", ErrorCode::boundary_scheme_mismatch, "eigenstates are computed with hard walls; use crank_nicolson");
    if (s_.state.kind == StateKind::eigenstate && static_cast<std::size_t>(s_.state.n) + 2 >= s_.n_points)
      fail_key("state.n", ErrorCode::invalid_argument, "eigenstate index exceeds the grid");
    if (s_.state.kind == StateKind::plane_wave && s_.prop.boundary != Boundary::periodic)
      fail_key("state.kind", ErrorCode::boundary_scheme_mismatch, "plane waves need a periodic grid");

    if (!(s_.mask_threshold >= 0.0 && s_.mask_threshold < 1.0))
      fail_key("verify.mask_threshold", ErrorCode::invalid_argument, "must lie in [0, 1)");
  }

  Scenario s_;
  std::map<std::string, int> lines_;
  int line_ = 0;
  std::string key_;
};

}  // namespace detail

inline Scenario parse_scenario(const std::string& text) { return detail::ScenarioParser().parse(text); }

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot read scenario file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_scenario(ss.str());
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

/// Every key written explicitly, reals with 17 significant digits, so that
/// parse_scenario(serialize(s)) == s.
inline std::string serialize(const Scenario& s) {
  using detail::format_double;
  if (s.potential.kind == PotentialKind::tabulated)
    throw Error(ErrorCode::invalid_argument, "tabulated potentials are not expressible in scenario files");
  std::ostringstream o;
  o << "grid.x_min = " << format_double(s.x_min) << "\n"
    << "grid.x_max = " << format_double(s.x_max) << "\n"
    << "grid.n_points = " << s.n_points << "\n"
    << "grid.hbar = " << format_double(s.hbar) << "\n"
    << "grid.mass = " << format_double(s.mass) << "\n"
    << "potential.kind = " << to_string(s.potential.kind) << "\n"
    << "potential.omega = " << format_double(s.potential.omega) << "\n"
    << "potential.height = " << format_double(s.potential.height) << "\n"
    << "potential.left = " << format_double(s.potential.left) << "\n"
    << "potential.right = " << format_double(s.potential.right) << "\n"
    << "potential.slope = " << format_double(s.potential.slope) << "\n"
    << "state.kind = " << to_string(s.state.kind) << "\n"
    << "state.x0 = " << format_double(s.state.x0) << "\n"
    << "state.sigma = " << format_double(s.state.sigma) << "\n"
    << "state.k0 = " << format_double(s.state.k0) << "\n"
    << "state.n = " << s.state.n << "\n"
    << "prop.scheme = " << to_string(s.prop.scheme) << "\n"
    << "prop.dt = " << format_double(s.prop.dt) << "\n"
    << "prop.boundary = " << to_string(s.prop.boundary) << "\n"
    << "prop.t_end = " << format_double(s.t_end) << "\n";
  o << "verify.identities = ";
  bool first = true;
  for (auto t : s.identities) {
    o << (first ? "" : ", ") << to_string(t);
    first = false;
  }
  o << "\n"
    << "verify.refinement = " << (s.refinement ? "true" : "false") << "\n"
    << "verify.mask_threshold = " << format_double(s.mask_threshold) << "\n"
    << "out.dir = " << s.out_dir << "\n"
    << "out.dt_out = " << format_double(s.dt_out) << "\n"
    << "out.plots = ";
  for (std::size_t i = 0; i < s.plots.size(); ++i) o << (i ? ", " : "") << to_string(s.plots[i]);
  o << "\n";
  return o.str();
}

/// The scenario at half dx (2n-1 points), half dt and half dt_out.
inline Scenario refined(const Scenario& s) {
  Scenario r = s;
  r.n_points = 2 * s.n_points - 1;
  r.prop.dt = s.prop.dt / 2.0;
  r.dt_out = s.dt_out / 2.0;
  return r;
}

inline WaveFunction initial_state(const Scenario& s, const Grid& grid, const PotentialField& v) {
  switch (s.state.kind) {
    case StateKind::gaussian:
      return gaussian_packet(grid, s.state.x0, s.state.sigma, s.state.k0).psi;
    case StateKind::plane_wave:
      return plane_wave(grid, s.state.k0);
    case StateKind::eigenstate: {
      auto sol = solve_stationary(v, grid, static_cast<std::size_t>(s.state.n));
      return std::move(sol.states.back());
    }
  }
  throw Error(ErrorCode::invalid_argument, "unknown state kind");
}

inline FieldOptions field_options(const Scenario& s) {
  FieldOptions o;
  o.mask_threshold = s.mask_threshold;
  o.boundary = s.prop.boundary;
  return o;
}

/// Propagates one resolution of the scenario. Checks that the omega stencil
/// (phase difference over 2 dt_out) stays unambiguous as well as the step.
inline RunHistory run_history(const Scenario& s) {
  const Grid grid = s.grid();
  const auto v = eval_potential(s.potential, grid);
  const auto psi0 = initial_state(s, grid, v);
  const double emax = max_abs_energy(psi0, v, field_options(s));
  if (!(emax * 2.0 * s.dt_out / grid.hbar < std::numbers::pi))
    throw Error(ErrorCode::dt_guard, "max|E| * 2 dt_out / hbar = " + detail::format_double(emax * 2.0 * s.dt_out / grid.hbar) +
                                         " is not below pi; reduce out.dt_out");
  return propagate(psi0, v, s.prop, s.t_end, s.dt_out);
}

struct ScenarioRun {
  RunHistory run;
  std::optional<RunHistory> refined;
  VerificationReport report;
};

inline ReportOptions report_options(const Scenario& s) {
  ReportOptions o;
  o.fields = field_options(s);
  return o;
}

inline ScenarioRun run_scenario(const Scenario& s) {
  ScenarioRun r;
  r.run = run_history(s);
  if (s.refinement) r.refined = run_history(refined(s));
  r.report = build_report(r.run, s.identities, r.refined ? &*r.refined : nullptr, report_options(s));
  return r;
}

/// One row of the stationary-state sweep.
struct EigenRow {
  int n = 0;
  double energy = 0.0;
  std::optional<double> exact;  // closed-form level where the potential has one
  double residual = 0.0;
  double e_mean = 0.0;
  double e_spread = 0.0;  // (max - min)/|mean| of E(x) over valid points
  double q_mean = 0.0;
  double q_spread = 0.0;
  std::optional<double> q_exact;  // box only: hbar^2 k_n^2/(m L)
};

namespace detail {
inline std::pair<double, double> mean_and_spread(const ObservableField& f) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo, sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < f.size(); ++i)
    if (f.valid[i]) {
      lo = std::min(lo, f.values[i]);
      hi = std::max(hi, f.values[i]);
      sum += f.values[i];
      ++count;
    }
  if (count == 0) throw Error(ErrorCode::empty_selection, "field has no valid points");
  const double mean = sum / static_cast<double>(count);
  return {mean, mean != 0.0 ? (hi - lo) / std::abs(mean) : hi - lo};
}
}  // namespace detail

/// Lowest `count` stationary states of the scenario's potential with hard
/// walls: eigenvalue, local-energy constancy and the Q field per level.
inline std::vector<EigenRow> eigen_sweep(const Scenario& s, std::size_t count) {
  const Grid grid = s.grid();
  const auto v = eval_potential(s.potential, grid);
  const auto sol = solve_stationary(v, grid, count);
  FieldOptions opts = field_options(s);
  opts.boundary = Boundary::dirichlet;
  std::vector<EigenRow> rows;
  for (std::size_t k = 0; k < count; ++k) {
    EigenRow r;
    r.n = static_cast<int>(k + 1);
    r.energy = sol.energies[k];
    r.residual = eigen_residual(sol.states[k], r.energy, v);
    const double L = grid.length(), kn = r.n * std::numbers::pi / L;
    // V = 0 between hard walls is the box whatever the kind is called
    if (s.potential.kind == PotentialKind::box || s.potential.kind == PotentialKind::free) {
      r.exact = grid.hbar * grid.hbar * kn * kn / (2.0 * grid.mass);
      r.q_exact = grid.hbar * grid.hbar * kn * kn / (grid.mass * L);
    } else if (s.potential.kind == PotentialKind::harmonic) {
      r.exact = (static_cast<double>(k) + 0.5) * grid.hbar * s.potential.omega;
    }
    const auto fs = extract_fields(sol.states[k], v, opts);
    std::tie(r.e_mean, r.e_spread) = detail::mean_and_spread(fs.E);
    std::tie(r.q_mean, r.q_spread) = detail::mean_and_spread(fs.Q);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace qfield
