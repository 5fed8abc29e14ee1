#pragma once

// Pointwise residuals of the identities satisfied by the local fields of any
// solution of the Schrodinger equation:
//   continuity        w_t + j_x = 0
//   energy_frequency  hbar omega - E = 0
//   momentum_balance  p_t + E_x = 0
//   local_balance     w E_x + p j_x - w V_x - Q_x = 0
//   ehrenfest         d<p>/dt + <V_x> = 0
// and p - hbar k = 0 (momentum_wavenumber, selectable but not in "all").

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "qfield/fields.hpp"
#include "qfield/propagator.hpp"

namespace qfield {

enum class IdentityTag { continuity, energy_frequency, momentum_balance, local_balance, ehrenfest, momentum_wavenumber };

inline const char* to_string(IdentityTag t) {
  switch (t) {
    case IdentityTag::continuity: return "continuity";
    case IdentityTag::energy_frequency: return "energy_frequency";
    case IdentityTag::momentum_balance: return "momentum_balance";
    case IdentityTag::local_balance: return "local_balance";
    case IdentityTag::ehrenfest: return "ehrenfest";
    case IdentityTag::momentum_wavenumber: return "momentum_wavenumber";
  }
  return "unknown";
}

inline std::optional<IdentityTag> parse_identity(const std::string& s) {
  for (auto t : {IdentityTag::continuity, IdentityTag::energy_frequency, IdentityTag::momentum_balance,
                 IdentityTag::local_balance, IdentityTag::ehrenfest, IdentityTag::momentum_wavenumber})
    if (s == to_string(t)) return t;
  return std::nullopt;
}

inline std::set<IdentityTag> all_identities() {
  return {IdentityTag::continuity, IdentityTag::energy_frequency, IdentityTag::momentum_balance,
          IdentityTag::local_balance, IdentityTag::ehrenfest};
}

namespace detail {
inline std::string format_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

inline std::vector<bool> both(const std::vector<bool>& a, const std::vector<bool>& b) {
  std::vector<bool> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] && b[i];
  return out;
}

/// centered x-derivative of a masked field; valid where all three points are
inline ObservableField masked_d1(const ObservableField& f, double dx) {
  ObservableField d{FieldLabel::custom, centered_d1(std::span<const double>(f.values), dx),
                    FieldKernel::centered_mask(f.valid)};
  for (std::size_t i = 0; i < d.size(); ++i)
    if (!d.valid[i]) d.values[i] = 0.0;
  return d;
}

inline void check_bracket(const FieldSet& prev, const FieldSet& cur, const FieldSet& next) {
  if (prev.mp.size() != cur.mp.size() || next.mp.size() != cur.mp.size())
    throw Error(ErrorCode::size_mismatch, "snapshots do not share a grid");
}
}  // namespace detail

// --- residuals on extracted field snapshots --------------------------------

inline ObservableField continuity_residual(const FieldSet& prev, const FieldSet& cur, const FieldSet& next,
                                           double dt_out) {
  detail::check_bracket(prev, cur, next);
  const auto jx = detail::masked_d1(cur.j, cur.grid.dx);
  ObservableField r{FieldLabel::custom, std::vector<double>(cur.mp.size(), 0.0),
                    detail::both(detail::both(prev.mp.valid, next.mp.valid), jx.valid)};
  for (std::size_t i = 0; i < r.size(); ++i)
    if (r.valid[i]) r.values[i] = (next.mp.w[i] - prev.mp.w[i]) / (2.0 * dt_out) + jx.values[i];
  return r;
}

inline ObservableField energy_frequency_residual(const FieldSet& prev, const FieldSet& cur, const FieldSet& next,
                                                 double dt_out) {
  detail::check_bracket(prev, cur, next);
  const auto omega = frequency_field(prev.mp, next.mp, dt_out);
  ObservableField r{FieldLabel::custom, std::vector<double>(cur.mp.size(), 0.0), detail::both(omega.valid, cur.E.valid)};
  for (std::size_t i = 0; i < r.size(); ++i)
    if (r.valid[i]) r.values[i] = cur.grid.hbar * omega.values[i] - cur.E.values[i];
  return r;
}

inline ObservableField momentum_balance_residual(const FieldSet& prev, const FieldSet& cur, const FieldSet& next,
                                                 double dt_out) {
  detail::check_bracket(prev, cur, next);
  const auto Ex = detail::masked_d1(cur.E, cur.grid.dx);
  ObservableField r{FieldLabel::custom, std::vector<double>(cur.mp.size(), 0.0),
                    detail::both(detail::both(prev.p.valid, next.p.valid), Ex.valid)};
  for (std::size_t i = 0; i < r.size(); ++i)
    if (r.valid[i]) r.values[i] = (next.p.values[i] - prev.p.values[i]) / (2.0 * dt_out) + Ex.values[i];
  return r;
}

inline ObservableField local_balance_residual(const FieldSet& cur, const PotentialField& v) {
  if (v.size() != cur.mp.size()) throw Error(ErrorCode::size_mismatch, "potential does not match snapshot grid");
  const double dx = cur.grid.dx;
  const auto Ex = detail::masked_d1(cur.E, dx);
  const auto jx = detail::masked_d1(cur.j, dx);
  const auto Qx = detail::masked_d1(cur.Q, dx);
  const std::size_t n = cur.mp.size();
  ObservableField r{FieldLabel::custom, std::vector<double>(n, 0.0),
                    detail::both(detail::both(Ex.valid, jx.valid), Qx.valid)};
  for (std::size_t i = 0; i < n; ++i) {
    // skip points whose stencils touch a potential discontinuity
    for (std::size_t k = (i >= 2 ? i - 2 : 0); k <= std::min(n - 1, i + 2); ++k)
      if (v.edge[k]) r.valid[i] = false;
    if (!r.valid[i]) continue;
    const double w = cur.mp.w[i];
    r.values[i] = w * Ex.values[i] + cur.p.values[i] * jx.values[i] - w * v.v_x[i] - Qx.values[i];
  }
  return r;
}

inline ObservableField momentum_wavenumber_residual(const FieldSet& cur) {
  ObservableField r{FieldLabel::custom, std::vector<double>(cur.mp.size(), 0.0), detail::both(cur.p.valid, cur.k.valid)};
  for (std::size_t i = 0; i < r.size(); ++i)
    if (r.valid[i]) r.values[i] = cur.p.values[i] - cur.grid.hbar * cur.k.values[i];
  return r;
}

// --- residuals on a run history ---------------------------------------------

namespace detail {
inline void check_index(const RunHistory& h, std::size_t t_index) {
  if (h.size() < 3) throw Error(ErrorCode::too_few_snapshots, "need at least 3 snapshots");
  if (t_index < 1 || t_index + 1 >= h.size())
    throw Error(ErrorCode::invalid_argument, "t_index must be an interior snapshot");
}
}  // namespace detail

inline ObservableField continuity_residual(const RunHistory& h, std::size_t t_index, const FieldOptions& opts = {}) {
  detail::check_index(h, t_index);
  return continuity_residual(extract_fields(h.snapshots[t_index - 1], h.potential, opts),
                             extract_fields(h.snapshots[t_index], h.potential, opts),
                             extract_fields(h.snapshots[t_index + 1], h.potential, opts), h.dt_out);
}

inline ObservableField energy_frequency_residual(const RunHistory& h, std::size_t t_index,
                                                 const FieldOptions& opts = {}) {
  detail::check_index(h, t_index);
  return energy_frequency_residual(extract_fields(h.snapshots[t_index - 1], h.potential, opts),
                                   extract_fields(h.snapshots[t_index], h.potential, opts),
                                   extract_fields(h.snapshots[t_index + 1], h.potential, opts), h.dt_out);
}

inline ObservableField momentum_balance_residual(const RunHistory& h, std::size_t t_index,
                                                 const FieldOptions& opts = {}) {
  detail::check_index(h, t_index);
  return momentum_balance_residual(extract_fields(h.snapshots[t_index - 1], h.potential, opts),
                                   extract_fields(h.snapshots[t_index], h.potential, opts),
                                   extract_fields(h.snapshots[t_index + 1], h.potential, opts), h.dt_out);
}

inline ObservableField local_balance_residual(const WaveFunction& psi, const PotentialField& v,
                                              const FieldOptions& opts = {}) {
  return local_balance_residual(extract_fields(psi, v, opts), v);
}

// --- norms -------------------------------------------------------------------

struct ResidualNorms {
  double linf = 0.0;
  double l2 = 0.0;  // sqrt(sum r^2 dx)
  double masked_probability = 0.0;
  std::size_t valid_points = 0;
};

inline ResidualNorms residual_norms(const ObservableField& r, const ModulusPhaseField& mp, double dx) {
  ResidualNorms n;
  double s = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (r.valid[i]) {
      n.linf = std::max(n.linf, std::abs(r.values[i]));
      s += r.values[i] * r.values[i];
      ++n.valid_points;
    } else {
      n.masked_probability += mp.w[i];
    }
  }
  n.l2 = std::sqrt(s * dx);
  n.masked_probability *= dx;
  return n;
}

// --- Q surface term and Ehrenfest --------------------------------------------

/// Relative density below which Q is not evaluated at all; far below the
/// field mask so the check reaches the real edge of the packet.
inline constexpr double kQBoundaryMaskThreshold = 1e-200;
inline constexpr double kQBoundaryTolerance = 1e-9;

struct QBoundary {
  double left = 0.0;
  double right = 0.0;
  double max_abs = 0.0;
  bool pass = false;
  std::string tag;
};

/// Q at the outermost points where it can be evaluated; passes when both are
/// below 1e-9 max|Q|, i.e. the surface term dropped on the way to the
/// Ehrenfest equation is negligible.
inline QBoundary q_boundary_check(const WaveFunction& psi, FieldOptions opts = {}) {
  opts.mask_threshold = kQBoundaryMaskThreshold;
  const auto Q = q_field(psi, opts);
  QBoundary b;
  std::optional<std::size_t> first, last;
  for (std::size_t i = 0; i < Q.size(); ++i) {
    if (!Q.valid[i] || !std::isfinite(Q.values[i])) continue;
    if (!first) first = i;
    last = i;
    b.max_abs = std::max(b.max_abs, std::abs(Q.values[i]));
  }
  if (!first) {
    b.tag = "no evaluable points";
    return b;
  }
  b.left = Q.values[*first];
  b.right = Q.values[*last];
  b.pass = std::abs(b.left) < kQBoundaryTolerance * b.max_abs && std::abs(b.right) < kQBoundaryTolerance * b.max_abs;
  b.tag = b.pass ? "Q vanishes at the boundary" : "Q does not vanish at the boundary: surface term in the momentum balance is not negligible";
  return b;
}

struct EhrenfestSeries {
  std::vector<double> times;
  std::vector<double> mean_p;       // <p>(t)
  std::vector<double> mean_force;   // -<V_x>(t)
  std::vector<double> dp_dt;        // centered, NaN at the two end snapshots
  std::vector<double> residual;     // dp_dt - mean_force, NaN at the ends
  double max_residual = 0.0;
  bool boundary_warning = false;    // Q surface term not negligible somewhere
};

inline EhrenfestSeries ehrenfest_from_fields(const std::vector<FieldSet>& snaps, const PotentialField& v, double dt_out) {
  if (snaps.size() < 3) throw Error(ErrorCode::too_few_snapshots, "ehrenfest check needs at least 3 snapshots");
  EhrenfestSeries e;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& s : snaps) {
    e.times.push_back(s.time);
    e.mean_p.push_back(expectation(s.p, s.mp, s.grid).value);
    double f = 0.0;
    for (std::size_t i = 0; i < s.mp.size(); ++i) f += s.mp.w[i] * v.v_x[i];
    e.mean_force.push_back(-f * s.grid.dx);
  }
  const std::size_t n = snaps.size();
  e.dp_dt.assign(n, nan);
  e.residual.assign(n, nan);
  for (std::size_t t = 1; t + 1 < n; ++t) {
    e.dp_dt[t] = (e.mean_p[t + 1] - e.mean_p[t - 1]) / (2.0 * dt_out);
    e.residual[t] = e.dp_dt[t] - e.mean_force[t];
    e.max_residual = std::max(e.max_residual, std::abs(e.residual[t]));
  }
  return e;
}

inline EhrenfestSeries ehrenfest_check(const RunHistory& h, const FieldOptions& opts = {}) {
  if (h.size() < 3) throw Error(ErrorCode::too_few_snapshots, "ehrenfest check needs at least 3 snapshots");
  std::vector<FieldSet> snaps;
  for (const auto& psi : h.snapshots) snaps.push_back(extract_fields(psi, h.potential, opts));
  auto e = ehrenfest_from_fields(snaps, h.potential, h.dt_out);
  for (const auto& psi : h.snapshots)
    if (!q_boundary_check(psi, opts).pass) e.boundary_warning = true;
  return e;
}

// --- report -------------------------------------------------------------------

struct ReportOptions {
  FieldOptions fields;
  double ratio_min = 3.5;
  double ratio_max = 4.5;
  /// residuals below this are exact up to round-off
  double residual_floor = 1e-9;
  /// absolute ceiling for the Ehrenfest residual
  double ehrenfest_ceiling = 1e-4;
};

struct IdentityEntry {
  IdentityTag tag = IdentityTag::continuity;
  double linf = 0.0;
  double l2 = 0.0;
  double masked_probability = 0.0;
  std::optional<double> fine_linf, fine_l2;
  std::optional<double> ratio_linf, ratio_l2;
  std::string tolerance;
  bool pass = false;
  std::string note;
};

struct VerificationReport {
  std::vector<IdentityEntry> entries;
  bool ehrenfest_boundary_warning = false;
  std::vector<std::string> notes;

  bool all_pass() const {
    return std::all_of(entries.begin(), entries.end(), [](const IdentityEntry& e) { return e.pass; });
  }
  const IdentityEntry* find(IdentityTag t) const {
    for (const auto& e : entries)
      if (e.tag == t) return &e;
    return nullptr;
  }
};

/// Extracted fields of a whole run; also what the field tables on disk hold.
struct FieldHistory {
  std::vector<FieldSet> snapshots;
  double dt_out = 0.0;
  PotentialField potential;
};

inline FieldHistory extract_history(const RunHistory& h, const FieldOptions& opts) {
  FieldHistory f;
  f.dt_out = h.dt_out;
  f.potential = h.potential;
  for (const auto& psi : h.snapshots) f.snapshots.push_back(extract_fields(psi, h.potential, opts));
  return f;
}

namespace detail {

struct Aggregate {
  double linf = 0.0, l2 = 0.0, masked = 0.0;
};

/// Worst norms over the snapshots listed in `indices` (all interior).
inline Aggregate aggregate(const FieldHistory& h, IdentityTag tag, const std::vector<std::size_t>& indices) {
  Aggregate a;
  if (tag == IdentityTag::ehrenfest) {
    const auto e = ehrenfest_from_fields(h.snapshots, h.potential, h.dt_out);
    double s = 0.0;
    for (std::size_t t : indices) {
      a.linf = std::max(a.linf, std::abs(e.residual[t]));
      s += e.residual[t] * e.residual[t];
    }
    a.l2 = std::sqrt(s * h.dt_out);
    return a;
  }
  for (std::size_t t : indices) {
    const auto& prev = h.snapshots[t - 1];
    const auto& cur = h.snapshots[t];
    const auto& next = h.snapshots[t + 1];
    ObservableField r;
    switch (tag) {
      case IdentityTag::continuity: r = continuity_residual(prev, cur, next, h.dt_out); break;
      case IdentityTag::energy_frequency: r = energy_frequency_residual(prev, cur, next, h.dt_out); break;
      case IdentityTag::momentum_balance: r = momentum_balance_residual(prev, cur, next, h.dt_out); break;
      case IdentityTag::local_balance: r = local_balance_residual(cur, h.potential); break;
      case IdentityTag::momentum_wavenumber: r = momentum_wavenumber_residual(cur); break;
      case IdentityTag::ehrenfest: break;
    }
    const auto n = residual_norms(r, cur.mp, cur.grid.dx);
    a.linf = std::max(a.linf, n.linf);
    a.l2 = std::max(a.l2, n.l2);
    a.masked = std::max(a.masked, n.masked_probability);
  }
  return a;
}

inline void check_refinement(const FieldHistory& coarse, const FieldHistory& fine) {
  const auto& gc = coarse.snapshots.front().grid;
  const auto& gf = fine.snapshots.front().grid;
  auto bad = [](const std::string& why) { throw Error(ErrorCode::scenario_mismatch, "refinement run " + why); };
  if (gc.x_min != gf.x_min || gc.x_max != gf.x_max || gc.hbar != gf.hbar || gc.mass != gf.mass)
    bad("covers a different domain or different constants");
  if (gf.n_points != 2 * gc.n_points - 1) bad("does not halve dx");
  if (std::abs(fine.dt_out * 2.0 - coarse.dt_out) > 1e-12 * coarse.dt_out) bad("does not halve dt_out");
  if (fine.snapshots.size() != 2 * (coarse.snapshots.size() - 1) + 1) bad("spans a different time interval");
  for (std::size_t i = 0; i < gc.n_points; ++i) {
    const double a = coarse.potential.v[i], b = fine.potential.v[2 * i];
    if (std::abs(a - b) > 1e-12 * std::max({1.0, std::abs(a), std::abs(b)})) bad("uses a different potential");
  }
}

}  // namespace detail

inline VerificationReport build_report_from_fields(const FieldHistory& h, const std::set<IdentityTag>& identities,
                                                   const FieldHistory* refinement = nullptr,
                                                   const ReportOptions& opts = {}) {
  if (identities.empty()) throw Error(ErrorCode::empty_selection, "no identities selected");
  if (h.snapshots.size() < 3) throw Error(ErrorCode::too_few_snapshots, "need at least 3 snapshots");
  if (refinement) detail::check_refinement(h, *refinement);

  std::vector<std::size_t> coarse_idx, fine_idx;
  for (std::size_t t = 1; t + 1 < h.snapshots.size(); ++t) {
    coarse_idx.push_back(t);
    fine_idx.push_back(2 * t);
  }

  VerificationReport rep;
  for (IdentityTag tag : identities) {
    IdentityEntry e;
    e.tag = tag;
    const auto a = detail::aggregate(h, tag, coarse_idx);
    e.linf = a.linf;
    e.l2 = a.l2;
    e.masked_probability = a.masked;
    if (refinement) {
      const auto f = detail::aggregate(*refinement, tag, fine_idx);
      e.fine_linf = f.linf;
      e.fine_l2 = f.l2;
      if (f.linf > 0.0) e.ratio_linf = a.linf / f.linf;
      if (f.l2 > 0.0) e.ratio_l2 = a.l2 / f.l2;
    }
    auto in_window = [&](const std::optional<double>& r) {
      return r && *r >= opts.ratio_min && *r <= opts.ratio_max;
    };
    if (tag == IdentityTag::ehrenfest) {
      e.tolerance = "max |d<p>/dt + <V_x>| < " + detail::format_g(opts.ehrenfest_ceiling);
      e.pass = e.linf < opts.ehrenfest_ceiling;
      e.note = "absolute ceiling; ratio informational";
    } else if (e.linf < opts.residual_floor) {
      e.tolerance = "L-inf below round-off floor " + detail::format_g(opts.residual_floor);
      e.pass = true;
      e.note = "exact up to round-off";
    } else if (refinement) {
      e.tolerance = "convergence ratio in [" + detail::format_g(opts.ratio_min) + ", " + detail::format_g(opts.ratio_max) + "]";
      e.pass = in_window(e.ratio_linf) && in_window(e.ratio_l2);
      e.note = "second-order convergence under dx, dt_out halving";
    } else {
      e.tolerance = "L-inf below round-off floor " + detail::format_g(opts.residual_floor);
      e.pass = false;
      e.note = "residual above floor and no refinement run to judge convergence";
    }
    rep.entries.push_back(std::move(e));
  }
  return rep;
}

inline VerificationReport build_report(const RunHistory& h, const std::set<IdentityTag>& identities,
                                       const RunHistory* refinement = nullptr, const ReportOptions& opts = {}) {
  if (identities.empty()) throw Error(ErrorCode::empty_selection, "no identities selected");
  const auto fh = extract_history(h, opts.fields);
  std::optional<FieldHistory> ff;
  if (refinement) ff = extract_history(*refinement, opts.fields);
  auto rep = build_report_from_fields(fh, identities, ff ? &*ff : nullptr, opts);
  if (identities.count(IdentityTag::ehrenfest)) {
    for (const auto& psi : h.snapshots)
      if (!q_boundary_check(psi, opts.fields).pass) {
        rep.ehrenfest_boundary_warning = true;
        rep.notes.push_back("Q does not vanish at the domain edge at t = " + std::to_string(psi.time) +
                            "; the Ehrenfest surface-term assumption is violated");
        break;
      }
  }
  return rep;
}

}  // namespace qfield
