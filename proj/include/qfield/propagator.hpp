#pragma once

// Time evolution under i hbar psi_t = H psi with H = -(hbar^2/2m) d^2/dx^2 + V.
// Two independent schemes: Crank-Nicolson on the 3-point Laplacian (hard
// walls) and Strang split-step with an exact spectral kinetic phase
// (periodic). Plus the stationary states of the 3-point Hamiltonian.

#include <cmath>
#include <numbers>
#include <string>
#include <type_traits>
#include <vector>

#include "qfield/fft.hpp"
#include "qfield/fields.hpp"
#include "qfield/grid_state.hpp"
#include "qfield/linalg.hpp"
#include "qfield/potentials.hpp"

namespace qfield {

enum class Scheme { crank_nicolson, split_fourier };

inline const char* to_string(Scheme s) { return s == Scheme::crank_nicolson ? "crank_nicolson" : "split_fourier"; }

struct PropagatorConfig {
  Scheme scheme = Scheme::split_fourier;
  double dt = 1e-3;
  Boundary boundary = Boundary::periodic;

  void validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorCode::invalid_argument, "time step must be positive");
    if (scheme == Scheme::split_fourier && boundary != Boundary::periodic)
      throw Error(ErrorCode::boundary_scheme_mismatch, "split_fourier requires periodic boundary");
    if (scheme == Scheme::crank_nicolson && boundary != Boundary::dirichlet)
      throw Error(ErrorCode::boundary_scheme_mismatch, "crank_nicolson requires dirichlet boundary");
  }

  friend bool operator==(const PropagatorConfig&, const PropagatorConfig&) = default;
};

/// psi' = (1 + i H dt/2hbar)^-1 (1 - i H dt/2hbar) psi on the interior points;
/// the two end samples are pinned to zero. The factorization is built once
/// and is read-only afterwards, so one stepper may serve several threads.
/// Arithmetic is in long double for the same reason as the split-step: the
/// propagator spreads absolute round-off into the low-density tails.
class CrankNicolsonStepper {
 public:
  using real_type = long double;
  using state_type = std::vector<std::complex<real_type>>;

  CrankNicolsonStepper(const Grid& grid, const PotentialField& v, double dt) : grid_(grid), dt_(dt) {
    if (v.size() != grid.n_points) throw Error(ErrorCode::size_mismatch, "potential does not match grid");
    using cl = std::complex<real_type>;
    const std::size_t m = grid.n_points - 2;
    const real_type kin = static_cast<real_type>(grid.hbar) * grid.hbar / (2.0L * grid.mass * grid.dx * grid.dx);
    const cl tau{0.0L, static_cast<real_type>(dt) / (2.0L * grid.hbar)};
    diag_.resize(m);
    off_ = -kin;
    std::vector<cl> d(m), lower(m - 1, tau * off_), upper(m - 1, tau * off_);
    for (std::size_t i = 0; i < m; ++i) {
      if (!std::isfinite(v.v[i + 1])) throw Error(ErrorCode::solver_breakdown, "non-finite potential sample");
      diag_[i] = 2.0L * kin + v.v[i + 1];
      d[i] = 1.0L + tau * diag_[i];
    }
    tau_ = tau;
    lu_ = TridiagonalLu<cl>(std::move(lower), std::move(d), std::move(upper));
  }

  double dt() const { return dt_; }

  WaveFunction step(const WaveFunction& psi) const {
    if (psi.size() != grid_.n_points) throw Error(ErrorCode::size_mismatch, "wave function does not match stepper grid");
    state_type st(psi.samples.begin(), psi.samples.end());
    advance(st, 1);
    return WaveFunction(psi.grid, std::vector<complex>(st.begin(), st.end()), psi.time + dt_);
  }

  /// Applies `steps` steps to a full-grid extended-precision state.
  void advance(state_type& st, long long steps) const {
    if (st.size() != grid_.n_points) throw Error(ErrorCode::size_mismatch, "state does not match stepper grid");
    const std::size_t m = grid_.n_points - 2;
    state_type rhs(m);
    for (long long s = 0; s < steps; ++s) {
      for (std::size_t i = 0; i < m; ++i) {
        const auto h = diag_[i] * st[i + 1] + off_ * (st[i] + st[i + 2]);
        rhs[i] = st[i + 1] - tau_ * h;
      }
      lu_.solve(rhs);
      st.front() = st.back() = 0.0L;
      std::copy(rhs.begin(), rhs.end(), st.begin() + 1);
    }
  }

 private:
  Grid grid_;
  double dt_;
  std::vector<real_type> diag_;
  real_type off_ = 0.0L;
  std::complex<real_type> tau_;
  TridiagonalLu<std::complex<real_type>> lu_;
};

/// Strang splitting exp(-iV dt/2hbar) exp(-iT dt/hbar) exp(-iV dt/2hbar) with
/// T diagonal in wave-number space. Negative dt steps backwards. The
/// transforms and phase factors run in long double: FFT round-off is absolute
/// (relative to the peak of psi), and in double it swamps the low-density
/// tails where the local fields are still evaluated. Holds FFT scratch, so
/// each concurrent run needs its own stepper.
class SplitFourierStepper {
 public:
  SplitFourierStepper(const Grid& grid, const PotentialField& v, double dt)
      : grid_(grid), dt_(dt), fft_(grid.n_points) {
    if (v.size() != grid.n_points) throw Error(ErrorCode::size_mismatch, "potential does not match grid");
    if (v.hard_walls) throw Error(ErrorCode::boundary_scheme_mismatch, "split_fourier cannot realise hard walls");
    const auto k = fft_wavenumbers(grid.n_points, grid.dx);
    half_v_.resize(grid.n_points);
    kinetic_.resize(grid.n_points);
    using ld = long double;
    const ld inv_n = 1.0L / static_cast<ld>(grid.n_points);
    for (std::size_t i = 0; i < grid.n_points; ++i) {
      half_v_[i] = std::polar(1.0L, -static_cast<ld>(v.v[i]) * dt / (2.0L * grid.hbar));
      const ld t = static_cast<ld>(grid.hbar) * k[i] * k[i] / (2.0L * grid.mass);
      kinetic_[i] = std::polar(inv_n, -t * dt / grid.hbar);
    }
  }

  double dt() const { return dt_; }

  using state_type = std::vector<std::complex<long double>>;

  WaveFunction step(const WaveFunction& psi) {
    if (psi.size() != grid_.n_points) throw Error(ErrorCode::size_mismatch, "wave function does not match stepper grid");
    state_type st(psi.samples.begin(), psi.samples.end());
    advance(st, 1);
    WaveFunction out(psi.grid, std::vector<complex>(st.begin(), st.end()), psi.time + dt_);
    return out;
  }

  /// Applies `steps` steps to an extended-precision state. Carrying the state
  /// across steps in long double keeps rounding to double out of the loop.
  void advance(state_type& st, long long steps) {
    if (st.size() != grid_.n_points) throw Error(ErrorCode::size_mismatch, "state does not match stepper grid");
    const std::size_t n = st.size();
    for (long long s = 0; s < steps; ++s) {
      for (std::size_t i = 0; i < n; ++i) st[i] *= half_v_[i];
      fft_.forward(std::span(st));
      for (std::size_t i = 0; i < n; ++i) st[i] *= kinetic_[i];
      fft_.backward(std::span(st));
      for (std::size_t i = 0; i < n; ++i) st[i] *= half_v_[i];
    }
  }

 private:
  Grid grid_;
  double dt_;
  BasicFft<long double> fft_;
  std::vector<std::complex<long double>> half_v_;
  std::vector<std::complex<long double>> kinetic_;
};

inline WaveFunction step_crank_nicolson(const WaveFunction& psi, const PotentialField& v, double dt) {
  return CrankNicolsonStepper(psi.grid, v, dt).step(psi);
}

inline WaveFunction step_split_fourier(const WaveFunction& psi, const PotentialField& v, double dt) {
  return SplitFourierStepper(psi.grid, v, dt).step(psi);
}

/// Dense action of the 3-point Hamiltonian with zero walls (interior rows
/// only; end rows return 0).
inline std::vector<complex> apply_hamiltonian(const WaveFunction& psi, const PotentialField& v) {
  const auto& g = psi.grid;
  const std::size_t n = g.n_points;
  const double kin = g.hbar * g.hbar / (2.0 * g.mass * g.dx * g.dx);
  std::vector<complex> out(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const complex left = i > 1 ? psi[i - 1] : complex{0.0};
    const complex right = i + 2 < n ? psi[i + 1] : complex{0.0};
    out[i] = (2.0 * kin + v.v[i]) * psi[i] - kin * (left + right);
  }
  return out;
}

struct EigenSolution {
  std::vector<double> energies;
  std::vector<WaveFunction> states;
};

/// Lowest n_states eigenpairs of the 3-point Hamiltonian with hard walls.
/// States are real, normalized to sum u^2 dx = 1 and signed so the first
/// lobe from the left is positive.
inline EigenSolution solve_stationary(const PotentialField& v, const Grid& grid, std::size_t n_states) {
  if (v.size() != grid.n_points) throw Error(ErrorCode::size_mismatch, "potential does not match grid");
  if (n_states == 0 || n_states >= grid.n_points - 2)
    throw Error(ErrorCode::invalid_argument, "n_states must be in [1, n_points-3]");
  const std::size_t m = grid.n_points - 2;
  const double kin = grid.hbar * grid.hbar / (2.0 * grid.mass * grid.dx * grid.dx);
  std::vector<double> diag(m), off(m - 1, -kin);
  for (std::size_t i = 0; i < m; ++i) diag[i] = 2.0 * kin + v.v[i + 1];

  const auto eig = lowest_eigenpairs(diag, off, n_states);
  EigenSolution sol;
  for (std::size_t k = 0; k < n_states; ++k) {
    if (k > 0 && !(eig.values[k] > eig.values[k - 1]))
      throw Error(ErrorCode::convergence_failure, "eigenvalues " + std::to_string(k - 1) + " and " + std::to_string(k) +
                                                      " are not separated");
    const auto& u = eig.vectors[k];
    double umax = 0.0;
    for (double x : u) umax = std::max(umax, std::abs(x));
    double sign = 1.0;
    for (double x : u)
      if (std::abs(x) > 1e-3 * umax) {
        sign = x > 0.0 ? 1.0 : -1.0;
        break;
      }
    const double scale = sign / std::sqrt(grid.dx);
    std::vector<complex> s(grid.n_points, 0.0);
    for (std::size_t i = 0; i < m; ++i) s[i + 1] = u[i] * scale;
    // Rayleigh quotient in first-difference form: bisection leaves an error of
    // order eps * kin, the differences keep it near eps * E / dx.
    double kinetic = 0.0, potential = 0.0, uu = 0.0;
    for (std::size_t i = 0; i <= m; ++i) {
      const double left = i > 0 ? u[i - 1] : 0.0, right = i < m ? u[i] : 0.0;
      kinetic += (right - left) * (right - left);
    }
    for (std::size_t i = 0; i < m; ++i) {
      potential += v.v[i + 1] * u[i] * u[i];
      uu += u[i] * u[i];
    }
    sol.energies.push_back((kin * kinetic + potential) / uu);
    sol.states.emplace_back(grid, std::move(s));
  }
  return sol;
}

/// ||H u - E u|| with the grid-weighted norm sqrt(sum |.|^2 dx).
inline double eigen_residual(const WaveFunction& u, double energy, const PotentialField& v) {
  const auto hu = apply_hamiltonian(u, v);
  double s = 0.0;
  for (std::size_t i = 1; i + 1 < u.size(); ++i) s += std::norm(hu[i] - energy * u[i]);
  return std::sqrt(s * u.grid.dx);
}

/// Ordered snapshots at uniform spacing dt_out plus what produced them.
struct RunHistory {
  std::vector<WaveFunction> snapshots;
  double dt_out = 0.0;
  PotentialField potential;
  PropagatorConfig config;

  std::size_t size() const { return snapshots.size(); }
  const Grid& grid() const { return snapshots.front().grid; }
};

/// Guard for temporal phase unwrapping: max|E|*dt/hbar must stay below pi.
inline void check_dt_guard(const WaveFunction& psi, const PotentialField& v, double dt,
                           double mask_threshold = kDefaultMaskThreshold) {
  FieldOptions opts;
  opts.mask_threshold = mask_threshold;
  const double emax = max_abs_energy(psi, v, opts);
  if (!(emax * dt / psi.grid.hbar < std::numbers::pi))
    throw Error(ErrorCode::dt_guard, "max|E| dt / hbar = " + std::to_string(emax * dt / psi.grid.hbar) +
                                         " is not below pi; reduce the time step");
}

/// Propagates to t_end and records a snapshot every dt_out (an integer
/// multiple of config.dt). Snapshot count is floor(t_end/dt_out) + 1.
inline RunHistory propagate(const WaveFunction& initial, const PotentialField& v, const PropagatorConfig& config,
                            double t_end, double dt_out) {
  config.validate();
  if (v.hard_walls && config.boundary != Boundary::dirichlet)
    throw Error(ErrorCode::boundary_scheme_mismatch, "box potential requires dirichlet boundary");
  const double ratio = dt_out / config.dt;
  const auto steps_per_out = static_cast<long long>(std::llround(ratio));
  if (steps_per_out < 1 || std::abs(ratio - static_cast<double>(steps_per_out)) > 1e-9 * ratio)
    throw Error(ErrorCode::invalid_argument, "dt_out must be an integer multiple of dt");
  const auto n_out = static_cast<long long>(std::floor(t_end / dt_out * (1.0 + 1e-12)));
  if (n_out < 1) throw Error(ErrorCode::invalid_argument, "t_end must be at least dt_out");
  check_dt_guard(initial, v, config.dt);

  RunHistory h;
  h.dt_out = dt_out;
  h.potential = v;
  h.config = config;
  h.snapshots.reserve(static_cast<std::size_t>(n_out) + 1);
  h.snapshots.push_back(initial);

  auto record = [&](long long s, WaveFunction psi) {
    // Exact snapshot times; accumulated dt rounding is dropped.
    psi.time = initial.time + static_cast<double>(s) * dt_out;
    h.snapshots.push_back(std::move(psi));
  };
  auto failed = [&](const Error& e, long long s) {
    const double t = initial.time + static_cast<double>(s - 1) * dt_out;
    return Error(e.code(), std::string("propagation failed after t = ") + std::to_string(t) + ": " + e.what());
  };
  auto run = [&](auto& stepper) {
    typename std::remove_cvref_t<decltype(stepper)>::state_type state(initial.samples.begin(), initial.samples.end());
    for (long long s = 1; s <= n_out; ++s) {
      try {
        stepper.advance(state, steps_per_out);
      } catch (const Error& e) {
        throw failed(e, s);
      }
      WaveFunction psi(initial.grid, std::vector<complex>(state.size()));
      for (std::size_t i = 0; i < state.size(); ++i) {
        psi[i] = complex(state[i]);
        if (!std::isfinite(psi[i].real()) || !std::isfinite(psi[i].imag()))
          throw failed(Error(ErrorCode::solver_breakdown, "non-finite wave function"), s);
      }
      record(s, std::move(psi));
    }
  };
  if (config.scheme == Scheme::crank_nicolson) {
    const CrankNicolsonStepper st(initial.grid, v, config.dt);
    run(st);
  } else {
    SplitFourierStepper st(initial.grid, v, config.dt);
    run(st);
  }
  return h;
}

}  // namespace qfield
