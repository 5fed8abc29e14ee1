#pragma once

// Local observable fields O(x,t) = Re[psi* O psi] / |psi|^2 and the special
// cases built from the modulus and phase: momentum p, wave number k,
// frequency omega, kinetic K (with its density part K_w), energy E, flux j
// and the Q function whose x-derivative closes the local momentum balance.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qfield/derivative.hpp"
#include "qfield/grid_state.hpp"
#include "qfield/potentials.hpp"

namespace qfield {

enum class FieldLabel { w, phi, k, p, K, Kw, E, omega, j, Q, custom };

inline const char* to_string(FieldLabel l) {
  switch (l) {
    case FieldLabel::w: return "w";
    case FieldLabel::phi: return "phi";
    case FieldLabel::k: return "k";
    case FieldLabel::p: return "p";
    case FieldLabel::K: return "K";
    case FieldLabel::Kw: return "Kw";
    case FieldLabel::E: return "E";
    case FieldLabel::omega: return "omega";
    case FieldLabel::j: return "j";
    case FieldLabel::Q: return "Q";
    case FieldLabel::custom: return "custom";
  }
  return "custom";
}

inline std::optional<FieldLabel> parse_field_label(const std::string& s) {
  for (auto l : {FieldLabel::w, FieldLabel::phi, FieldLabel::k, FieldLabel::p, FieldLabel::K, FieldLabel::Kw,
                 FieldLabel::E, FieldLabel::omega, FieldLabel::j, FieldLabel::Q})
    if (s == to_string(l)) return l;
  return std::nullopt;
}

/// Real samples of a local field. Values at invalid points are 0 and carry no
/// meaning (except j, which is 0 where w vanishes).
struct ObservableField {
  FieldLabel label = FieldLabel::custom;
  std::vector<double> values;
  std::vector<bool> valid;

  std::size_t size() const { return values.size(); }
  std::size_t valid_count() const { return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), true)); }
};

struct FieldOptions {
  double mask_threshold = kDefaultMaskThreshold;
  DerivativeMode derivative = DerivativeMode::centered;
  /// only consulted by the spectral mode
  Boundary boundary = Boundary::dirichlet;
};

/// Lo(x) = c0(x) + c1(x) d/dx + c2(x) d^2/dx^2 with complex coefficients.
/// An empty coefficient vector means that term is absent.
struct OperatorStencil {
  std::vector<complex> c0, c1, c2;

  int order() const { return !c2.empty() ? 2 : (!c1.empty() ? 1 : 0); }

  static OperatorStencil identity(const Grid& g) { return {std::vector<complex>(g.n_points, 1.0), {}, {}}; }
  static OperatorStencil position(const Grid& g) {
    OperatorStencil s;
    s.c0.resize(g.n_points);
    for (std::size_t i = 0; i < g.n_points; ++i) s.c0[i] = g.x(i);
    return s;
  }
  /// -i hbar d/dx
  static OperatorStencil momentum(const Grid& g) {
    return {{}, std::vector<complex>(g.n_points, complex{0.0, -g.hbar}), {}};
  }
  /// -(hbar^2/2m) d^2/dx^2
  static OperatorStencil kinetic(const Grid& g) {
    return {{}, {}, std::vector<complex>(g.n_points, -g.hbar * g.hbar / (2.0 * g.mass))};
  }
  /// kinetic + V
  static OperatorStencil hamiltonian(const Grid& g, const PotentialField& v) {
    OperatorStencil s = kinetic(g);
    s.c0.assign(v.v.begin(), v.v.end());
    return s;
  }
};

namespace detail {

/// Shared per-snapshot intermediates: density split and derivatives of psi.
struct FieldKernel {
  Grid grid;
  FieldOptions opts;
  ModulusPhaseField mp;
  std::vector<complex> d1, d2;
  std::vector<bool> stencil_valid;  // density-valid and derivative available

  FieldKernel(const WaveFunction& psi, const FieldOptions& o) : grid(psi.grid), opts(o) {
    mp = decompose(psi, o.mask_threshold);
    const std::span<const complex> s(psi.samples);
    if (o.derivative == DerivativeMode::centered) {
      d1 = centered_d1(s, grid.dx);
      d2 = centered_d2(s, grid.dx);
    } else {
      d1 = spectral_derivative(s, grid.dx, 1, o.boundary, Parity::odd);
      d2 = spectral_derivative(s, grid.dx, 2, o.boundary, Parity::odd);
    }
    stencil_valid = expand_mask(mp.valid);
  }

  std::vector<bool> expand_mask(const std::vector<bool>& v) const {
    if (opts.derivative == DerivativeMode::spectral) return v;
    return centered_mask(v);
  }

  static std::vector<bool> centered_mask(const std::vector<bool>& v) {
    const std::size_t n = v.size();
    std::vector<bool> out(n, false);
    for (std::size_t i = 1; i + 1 < n; ++i) out[i] = v[i - 1] && v[i] && v[i + 1];
    return out;
  }

  std::vector<double> density_derivative(int order) const {
    const std::span<const double> w(mp.w);
    if (opts.derivative == DerivativeMode::centered)
      return order == 1 ? centered_d1(w, grid.dx) : centered_d2(w, grid.dx);
    return spectral_derivative(w, grid.dx, order, opts.boundary, Parity::even);
  }
};

inline ObservableField momentum(const WaveFunction& psi, const FieldKernel& k) {
  ObservableField f{FieldLabel::p, std::vector<double>(psi.size(), 0.0), k.stencil_valid};
  for (std::size_t i = 0; i < psi.size(); ++i)
    if (f.valid[i]) f.values[i] = k.grid.hbar * (std::conj(psi[i]) * k.d1[i]).imag() / k.mp.w[i];
  return f;
}

/// K = -(hbar^2/2m) Re(psi* psi_xx)/w, equal to p^2/2m + K_w in the continuum.
inline std::pair<ObservableField, ObservableField> kinetic(const WaveFunction& psi, const FieldKernel& k,
                                                           const ObservableField& p) {
  const double c = -k.grid.hbar * k.grid.hbar / (2.0 * k.grid.mass);
  ObservableField K{FieldLabel::K, std::vector<double>(psi.size(), 0.0), k.stencil_valid};
  ObservableField Kw{FieldLabel::Kw, std::vector<double>(psi.size(), 0.0), k.stencil_valid};
  for (std::size_t i = 0; i < psi.size(); ++i) {
    if (!K.valid[i]) continue;
    K.values[i] = c * (std::conj(psi[i]) * k.d2[i]).real() / k.mp.w[i];
    Kw.values[i] = K.values[i] - p.values[i] * p.values[i] / (2.0 * k.grid.mass);
  }
  return {std::move(K), std::move(Kw)};
}

inline ObservableField energy(const ObservableField& K, const PotentialField& v) {
  if (v.size() != K.size()) throw Error(ErrorCode::size_mismatch, "potential does not match wave function grid");
  ObservableField E{FieldLabel::E, std::vector<double>(K.size(), 0.0), K.valid};
  for (std::size_t i = 0; i < K.size(); ++i)
    if (E.valid[i]) E.values[i] = K.values[i] + v.v[i];
  return E;
}

inline ObservableField flux(const FieldKernel& k, const ObservableField& p) {
  ObservableField j{FieldLabel::j, std::vector<double>(p.size(), 0.0), p.valid};
  for (std::size_t i = 0; i < p.size(); ++i)
    if (j.valid[i]) j.values[i] = k.mp.w[i] * p.values[i] / k.grid.mass;
  return j;
}

inline ObservableField q_function(const FieldKernel& k, const ObservableField& p) {
  const auto wx = k.density_derivative(1);
  const auto wxx = k.density_derivative(2);
  const double c = k.grid.hbar * k.grid.hbar / (4.0 * k.grid.mass);
  ObservableField Q{FieldLabel::Q, std::vector<double>(p.size(), 0.0), p.valid};
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!Q.valid[i]) continue;
    const double w = k.mp.w[i];
    Q.values[i] = p.values[i] * p.values[i] * w / k.grid.mass + c * (wx[i] * wx[i] / w - wxx[i]);
  }
  return Q;
}

}  // namespace detail

/// p = hbar Im(psi* psi_x)/w.
inline ObservableField momentum_field(const WaveFunction& psi, const FieldOptions& opts = {}) {
  const detail::FieldKernel k(psi, opts);
  return detail::momentum(psi, k);
}

/// k = d(phi)/dx of the unwrapped phase; independent of the psi* psi_x route.
inline ObservableField wavenumber_field(const ModulusPhaseField& mp, const Grid& grid) {
  const std::size_t n = mp.size();
  ObservableField f{FieldLabel::k, std::vector<double>(n, 0.0), detail::FieldKernel::centered_mask(mp.valid)};
  for (std::size_t i = 1; i + 1 < n; ++i)
    if (f.valid[i]) f.values[i] = (mp.dphi[i] + mp.dphi[i + 1]) / (2.0 * grid.dx);
  return f;
}

/// omega = -phi_t from two decompositions at t - dt and t + dt. The per-point
/// phase change is reduced to (-pi, pi]; a change that cannot be resolved
/// that way (a jump in the reduced difference between neighbouring points,
/// or a difference at the edge of the interval) is rejected.
inline ObservableField frequency_field(const ModulusPhaseField& prev, const ModulusPhaseField& next, double dt) {
  if (prev.size() != next.size()) throw Error(ErrorCode::size_mismatch, "frequency_field: snapshot sizes differ");
  if (!(dt > 0.0)) throw Error(ErrorCode::invalid_argument, "frequency_field: dt must be positive");
  constexpr double pi = std::numbers::pi;
  constexpr double edge = pi * (1.0 - 1e-9);
  const std::size_t n = prev.size();
  ObservableField f{FieldLabel::omega, std::vector<double>(n, 0.0), std::vector<bool>(n, false)};
  std::vector<double> dphi(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    f.valid[i] = prev.valid[i] && next.valid[i];
    if (!f.valid[i]) continue;
    double d = next.phi[i] - prev.phi[i];
    d -= 2.0 * pi * std::round(d / (2.0 * pi));
    if (std::abs(d) >= edge)
      throw Error(ErrorCode::unwrap_guard, "phase change of pi per bracket at x index " + std::to_string(i) +
                                               "; reduce the time step");
    dphi[i] = d;
    f.values[i] = -d / (2.0 * dt);
  }
  for (std::size_t i = 1; i < n; ++i)
    if (f.valid[i] && f.valid[i - 1] && std::abs(dphi[i] - dphi[i - 1]) > pi)
      throw Error(ErrorCode::unwrap_guard, "temporal phase change wraps between x indices " + std::to_string(i - 1) +
                                               " and " + std::to_string(i) + "; reduce the time step");
  return f;
}

struct KineticFields {
  ObservableField K;
  ObservableField Kw;
};

/// K = p^2/2m + K_w. K is evaluated as -(hbar^2/2m) Re(psi* psi_xx)/w and
/// K_w as K - p^2/2m, so the decomposition holds exactly in floating point.
inline KineticFields kinetic_field(const WaveFunction& psi, const FieldOptions& opts = {}) {
  const detail::FieldKernel k(psi, opts);
  const auto p = detail::momentum(psi, k);
  auto [K, Kw] = detail::kinetic(psi, k, p);
  return {std::move(K), std::move(Kw)};
}

/// K_w = (hbar^2/4m) [ (w_x/w)^2 / 2 - w_xx/w ] straight from density
/// stencils. Agrees with kinetic_field's K_w to O(dx^2) where w is smooth and
/// bounded away from zero; loses accuracy next to nodes.
inline ObservableField wave_kinetic_from_density(const WaveFunction& psi, const FieldOptions& opts = {}) {
  const detail::FieldKernel k(psi, opts);
  const auto wx = k.density_derivative(1);
  const auto wxx = k.density_derivative(2);
  const double c = k.grid.hbar * k.grid.hbar / (4.0 * k.grid.mass);
  ObservableField f{FieldLabel::Kw, std::vector<double>(psi.size(), 0.0), k.stencil_valid};
  for (std::size_t i = 0; i < psi.size(); ++i) {
    if (!f.valid[i]) continue;
    const double r = wx[i] / k.mp.w[i];
    f.values[i] = c * (0.5 * r * r - wxx[i] / k.mp.w[i]);
  }
  return f;
}

inline ObservableField energy_field(const WaveFunction& psi, const PotentialField& v, const FieldOptions& opts = {}) {
  const detail::FieldKernel k(psi, opts);
  const auto p = detail::momentum(psi, k);
  const auto K = detail::kinetic(psi, k, p).first;
  return detail::energy(K, v);
}

/// j = w p / m; 0 where w is masked.
inline ObservableField flux_field(const WaveFunction& psi, const FieldOptions& opts = {}) {
  const detail::FieldKernel k(psi, opts);
  return detail::flux(k, detail::momentum(psi, k));
}

/// Q = p^2 w/m + (hbar^2/4m)(w_x^2/w - w_xx).
inline ObservableField q_field(const WaveFunction& psi, const FieldOptions& opts = {}) {
  const detail::FieldKernel k(psi, opts);
  return detail::q_function(k, detail::momentum(psi, k));
}

/// O = Re(psi* (O psi)) / w for a differential operator of order <= 2.
inline ObservableField local_field(const WaveFunction& psi, const OperatorStencil& op, const FieldOptions& opts = {}) {
  const std::size_t n = psi.size();
  for (const auto* c : {&op.c0, &op.c1, &op.c2})
    if (!c->empty() && c->size() != n) throw Error(ErrorCode::size_mismatch, "operator coefficients do not match grid");
  const detail::FieldKernel k(psi, opts);
  const auto& valid = op.order() == 0 ? k.mp.valid : k.stencil_valid;
  ObservableField f{FieldLabel::custom, std::vector<double>(n, 0.0), valid};
  for (std::size_t i = 0; i < n; ++i) {
    if (!f.valid[i]) continue;
    complex o{0.0};
    if (!op.c0.empty()) o += op.c0[i] * psi[i];
    if (!op.c1.empty()) o += op.c1[i] * k.d1[i];
    if (!op.c2.empty()) o += op.c2[i] * k.d2[i];
    f.values[i] = (std::conj(psi[i]) * o).real() / k.mp.w[i];
  }
  return f;
}

inline constexpr double kMaskedProbabilityWarning = 1e-6;

struct Expectation {
  double value = 0.0;
  /// probability sitting on points where the field is invalid
  double masked_probability = 0.0;
  bool warning = false;
};

/// <O> = sum over valid points of O_i w_i dx.
inline Expectation expectation(const ObservableField& field, const ModulusPhaseField& mp, const Grid& grid) {
  if (field.size() != mp.size() || mp.size() != grid.n_points)
    throw Error(ErrorCode::size_mismatch, "expectation: field, density and grid sizes differ");
  Expectation e;
  for (std::size_t i = 0; i < field.size(); ++i) {
    if (field.valid[i])
      e.value += field.values[i] * mp.w[i];
    else
      e.masked_probability += mp.w[i];
  }
  e.value *= grid.dx;
  e.masked_probability *= grid.dx;
  e.warning = e.masked_probability > kMaskedProbabilityWarning;
  return e;
}

/// All single-snapshot fields at once (omega needs two snapshots and lives
/// in the verification layer).
struct FieldSet {
  double time = 0.0;
  Grid grid;
  ModulusPhaseField mp;
  ObservableField k, p, K, Kw, E, j, Q;
};

inline FieldSet extract_fields(const WaveFunction& psi, const PotentialField& v, const FieldOptions& opts = {}) {
  const detail::FieldKernel ker(psi, opts);
  FieldSet s;
  s.time = psi.time;
  s.grid = psi.grid;
  s.mp = ker.mp;
  s.k = wavenumber_field(ker.mp, psi.grid);
  s.p = detail::momentum(psi, ker);
  auto [K, Kw] = detail::kinetic(psi, ker, s.p);
  s.K = std::move(K);
  s.Kw = std::move(Kw);
  s.E = detail::energy(s.K, v);
  s.j = detail::flux(ker, s.p);
  s.Q = detail::q_function(ker, s.p);
  return s;
}

/// max |E| over valid points; used by the time-step guard.
inline double max_abs_energy(const WaveFunction& psi, const PotentialField& v, const FieldOptions& opts = {}) {
  const auto E = energy_field(psi, v, opts);
  double m = 0.0;
  for (std::size_t i = 0; i < E.size(); ++i)
    if (E.valid[i]) m = std::max(m, std::abs(E.values[i]));
  return m;
}

}  // namespace qfield
