#pragma once

// Spatial lattice, wave-function storage and the modulus/phase split
// psi = sqrt(w) exp(i phi).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "qfield/error.hpp"

namespace qfield {

using complex = std::complex<double>;

enum class Boundary { dirichlet, periodic };

inline const char* to_string(Boundary b) { return b == Boundary::dirichlet ? "dirichlet" : "periodic"; }

/// Uniform 1-D lattice x_i = x_min + i*dx, i = 0..n_points-1, together with
/// the constants hbar and mass. On periodic runs the n samples form one
/// period of length n*dx.
struct Grid {
  double x_min = 0.0;
  double x_max = 1.0;
  std::size_t n_points = 8;
  double dx = 1.0 / 7.0;
  double hbar = 1.0;
  double mass = 1.0;

  double x(std::size_t i) const { return x_min + static_cast<double>(i) * dx; }
  double length() const { return x_max - x_min; }
  double period() const { return static_cast<double>(n_points) * dx; }

  std::vector<double> coordinates() const {
    std::vector<double> xs(n_points);
    for (std::size_t i = 0; i < n_points; ++i) xs[i] = x(i);
    return xs;
  }

  friend bool operator==(const Grid&, const Grid&) = default;
};

inline constexpr std::size_t kMinGridPoints = 8;

inline Grid make_grid(double x_min, double x_max, std::size_t n_points, double hbar = 1.0,
                      double mass = 1.0) {
  if (!(x_max > x_min)) throw Error(ErrorCode::degenerate_domain, "x_max must exceed x_min");
  if (n_points < kMinGridPoints)
    throw Error(ErrorCode::too_few_points, "need at least 8 grid points, got " + std::to_string(n_points));
  if (!(hbar > 0.0) || !(mass > 0.0))
    throw Error(ErrorCode::nonpositive_constant, "hbar and mass must be positive");
  Grid g;
  g.x_min = x_min;
  g.x_max = x_max;
  g.n_points = n_points;
  g.dx = (x_max - x_min) / static_cast<double>(n_points - 1);
  g.hbar = hbar;
  g.mass = mass;
  return g;
}

/// Same physical domain with the spacing halved (2n-1 points).
inline Grid refine(const Grid& g) {
  return make_grid(g.x_min, g.x_max, 2 * g.n_points - 1, g.hbar, g.mass);
}

struct WaveFunction {
  Grid grid;
  std::vector<complex> samples;
  double time = 0.0;

  WaveFunction() = default;
  WaveFunction(Grid g, std::vector<complex> s, double t = 0.0)
      : grid(g), samples(std::move(s)), time(t) {
    if (samples.size() != grid.n_points)
      throw Error(ErrorCode::size_mismatch, "wave function sample count does not match grid");
  }

  std::size_t size() const { return samples.size(); }
  const complex& operator[](std::size_t i) const { return samples[i]; }
  complex& operator[](std::size_t i) { return samples[i]; }
};

/// Discrete norm sum |psi_i|^2 dx.
inline double norm(const WaveFunction& psi) {
  double s = 0.0;
  for (const auto& z : psi.samples) s += std::norm(z);
  return s * psi.grid.dx;
}

inline WaveFunction normalize(const WaveFunction& psi) {
  const double n = norm(psi);
  if (!(n > 0.0) || !std::isfinite(n)) throw Error(ErrorCode::zero_norm, "cannot normalize a zero wave function");
  WaveFunction out = psi;
  const double scale = 1.0 / std::sqrt(n);
  for (auto& z : out.samples) z *= scale;
  return out;
}

/// psi -> exp(i alpha) psi.
inline WaveFunction rotate_phase(const WaveFunction& psi, double alpha) {
  WaveFunction out = psi;
  const complex f = std::polar(1.0, alpha);
  for (auto& z : out.samples) z *= f;
  return out;
}

struct GaussianPacket {
  WaveFunction psi;
  /// max(w at the two end points) / max(w)
  double boundary_ratio = 0.0;
  /// set when boundary_ratio >= 1e-12: the packet does not fit the domain
  bool truncated = false;
};

inline constexpr double kTruncationThreshold = 1e-12;

/// Normalized psi_i ~ exp(-(x_i-x0)^2/(4 sigma^2) + i k0 x_i); sigma is the
/// standard deviation of w.
inline GaussianPacket gaussian_packet(const Grid& grid, double x0, double sigma, double k0) {
  if (!(sigma > 0.0)) throw Error(ErrorCode::nonpositive_sigma, "gaussian sigma must be positive");
  std::vector<complex> s(grid.n_points);
  for (std::size_t i = 0; i < grid.n_points; ++i) {
    const double x = grid.x(i);
    const double u = x - x0;
    s[i] = std::exp(-u * u / (4.0 * sigma * sigma)) * std::polar(1.0, k0 * x);
  }
  GaussianPacket out{normalize(WaveFunction(grid, std::move(s))), 0.0, false};
  double wmax = 0.0;
  for (const auto& z : out.psi.samples) wmax = std::max(wmax, std::norm(z));
  out.boundary_ratio = std::max(std::norm(out.psi.samples.front()), std::norm(out.psi.samples.back())) / wmax;
  out.truncated = out.boundary_ratio >= kTruncationThreshold;
  return out;
}

/// Normalized exp(i k x). On a periodic grid k*period should be a multiple of
/// 2 pi for the state to be smooth across the seam.
inline WaveFunction plane_wave(const Grid& grid, double k) {
  std::vector<complex> s(grid.n_points);
  for (std::size_t i = 0; i < grid.n_points; ++i) s[i] = std::polar(1.0, k * grid.x(i));
  return normalize(WaveFunction(grid, std::move(s)));
}

/// Samples of the box eigenfunction sqrt(2/L) sin(n pi (x - x_min)/L) on a
/// grid spanning the box, L = x_max - x_min.
inline WaveFunction box_eigenstate(const Grid& grid, int n) {
  if (n < 1) throw Error(ErrorCode::invalid_argument, "box quantum number starts at 1");
  const double L = grid.length();
  const double k = n * std::numbers::pi / L;
  const std::size_t last = grid.n_points - 1;
  const double mirror = n % 2 == 1 ? 1.0 : -1.0;
  std::vector<complex> s(grid.n_points);
  // sample the right half from the far wall so sin stays small-argument accurate
  for (std::size_t i = 0; i < grid.n_points; ++i) {
    const bool right = 2 * i > last;
    const double u = static_cast<double>(right ? last - i : i) * grid.dx;
    s[i] = (right ? mirror : 1.0) * std::sqrt(2.0 / L) * std::sin(k * u);
  }
  return WaveFunction(grid, std::move(s));
}

inline constexpr double kDefaultMaskThreshold = 1e-8;

/// w = |psi|^2 and the spatially unwrapped phase. valid[i] is false where
/// w_i < threshold * max(w).
struct ModulusPhaseField {
  std::vector<double> w;
  std::vector<double> phi;
  std::vector<bool> valid;
  // dphi[i] = arg(psi[i] conj(psi[i-1])), the phase step across link (i-1, i);
  // free of the rounding that large unwrapped phases carry
  std::vector<double> dphi;

  std::size_t size() const { return w.size(); }
};

/// Phase is unwrapped separately on each contiguous valid run, anchored at the
/// run's leftmost point (which keeps its principal value).
inline ModulusPhaseField decompose(const WaveFunction& psi, double mask_threshold = kDefaultMaskThreshold) {
  const std::size_t n = psi.size();
  ModulusPhaseField mp;
  mp.w.resize(n);
  mp.phi.resize(n);
  mp.valid.resize(n);
  mp.dphi.assign(n, 0.0);
  double wmax = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mp.w[i] = std::norm(psi[i]);
    wmax = std::max(wmax, mp.w[i]);
  }
  const double cut = mask_threshold * wmax;
  for (std::size_t i = 0; i < n; ++i) {
    mp.valid[i] = mp.w[i] > 0.0 && mp.w[i] >= cut;
    mp.phi[i] = std::arg(psi[i]);
  }
  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t i = 1; i < n; ++i) {
    if (!mp.valid[i] || !mp.valid[i - 1]) continue;
    mp.dphi[i] = std::arg(psi[i] * std::conj(psi[i - 1]));
    const double d = mp.phi[i] - mp.phi[i - 1];
    mp.phi[i] -= two_pi * std::round(d / two_pi);
  }
  return mp;
}

}  // namespace qfield
