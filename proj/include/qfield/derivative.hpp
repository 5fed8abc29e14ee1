#pragma once

// Centered 3-point and spectral derivatives on a uniform grid.

#include <complex>
#include <span>
#include <vector>

#include "qfield/fft.hpp"
#include "qfield/grid_state.hpp"

namespace qfield {

enum class DerivativeMode { centered, spectral };

/// Parity used to extend a Dirichlet-grid function to a periodic one:
/// wave functions vanish at the walls (odd), densities are even.
enum class Parity { odd, even };

/// (f[i+1] - f[i-1]) / 2dx on interior points, 0 at both ends.
template <typename T>
std::vector<T> centered_d1(std::span<const T> f, double dx) {
  const std::size_t n = f.size();
  std::vector<T> d(n, T{});
  const double s = 1.0 / (2.0 * dx);
  for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (f[i + 1] - f[i - 1]) * s;
  return d;
}

/// (f[i+1] - 2 f[i] + f[i-1]) / dx^2 on interior points, 0 at both ends.
template <typename T>
std::vector<T> centered_d2(std::span<const T> f, double dx) {
  const std::size_t n = f.size();
  std::vector<T> d(n, T{});
  const double s = 1.0 / (dx * dx);
  for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (f[i + 1] - 2.0 * f[i] + f[i - 1]) * s;
  return d;
}

/// order-th derivative (1 or 2) through the DFT. Periodic grids use the n
/// samples as one period; Dirichlet grids are extended to period 2(n-1)dx
/// with the given parity about each wall.
inline std::vector<complex> spectral_derivative(std::span<const complex> f, double dx, int order, Boundary boundary,
                                                Parity parity = Parity::odd) {
  const std::size_t n = f.size();
  std::vector<complex> g;
  if (boundary == Boundary::periodic) {
    g.assign(f.begin(), f.end());
  } else {
    const std::size_t m = 2 * (n - 1);
    g.resize(m);
    const double sign = parity == Parity::odd ? -1.0 : 1.0;
    for (std::size_t j = 0; j < n; ++j) g[j] = f[j];
    for (std::size_t j = 1; j + 1 < n; ++j) g[m - j] = sign * f[j];
    if (parity == Parity::odd) g[0] = g[n - 1] = 0.0;
  }
  const std::size_t m = g.size();
  Fft fft(m);
  fft.forward(std::span(g));
  const auto k = fft_wavenumbers(m, dx);
  const complex ik{0.0, 1.0};
  for (std::size_t j = 0; j < m; ++j) {
    const bool nyquist = (m % 2 == 0) && j == m / 2;
    if (order == 1)
      g[j] *= nyquist ? complex{0.0} : ik * k[j];
    else
      g[j] *= -k[j] * k[j];
  }
  fft.backward(std::span(g));
  std::vector<complex> d(n);
  const double inv = 1.0 / static_cast<double>(m);
  for (std::size_t j = 0; j < n; ++j) d[j] = g[j] * inv;
  return d;
}

inline std::vector<double> spectral_derivative(std::span<const double> f, double dx, int order, Boundary boundary,
                                               Parity parity) {
  std::vector<complex> z(f.begin(), f.end());
  const auto d = spectral_derivative(std::span<const complex>(z), dx, order, boundary, parity);
  std::vector<double> out(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) out[i] = d[i].real();
  return out;
}

}  // namespace qfield
