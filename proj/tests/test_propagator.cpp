#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "oracles.hpp"
#include "qfield/propagator.hpp"

using namespace qfield;

namespace {
constexpr double pi = std::numbers::pi;

Grid periodic_grid(double period, std::size_t n, double x_min = 0.0) {
  // n samples spanning one period: x_max = x_min + (n-1) period/n
  return make_grid(x_min, x_min + period * static_cast<double>(n - 1) / static_cast<double>(n), n);
}

double mean_x(const WaveFunction& psi) {
  double s = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i) s += std::norm(psi[i]) * psi.grid.x(i);
  return s * psi.grid.dx;
}
}  // namespace

TEST(TridiagonalLu, SolvesWithPivoting) {
  // first pivot is zero, so row exchange is required
  const std::vector<double> lo{2.0, 1.0, -1.0}, d{0.0, 3.0, 1.0, 4.0}, up{1.0, 2.0, 5.0};
  const TridiagonalLu<double> lu(lo, d, up);
  const std::vector<double> x{1.0, -2.0, 0.5, 3.0};
  std::vector<double> b(4);
  for (std::size_t i = 0; i < 4; ++i) {
    b[i] = d[i] * x[i];
    if (i > 0) b[i] += lo[i - 1] * x[i - 1];
    if (i < 3) b[i] += up[i] * x[i + 1];
  }
  lu.solve(b);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(b[i], x[i], 1e-14);
}

TEST(TridiagonalLu, SingularBreaksDown) {
  try {
    TridiagonalLu<double>({0.0}, {0.0, 1.0}, {0.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::solver_breakdown);
  }
}

TEST(Sturm, CountsEigenvaluesBelow) {
  // diag 2, off -1, n = 3: eigenvalues 2 - sqrt2, 2, 2 + sqrt2
  const std::vector<double> d{2.0, 2.0, 2.0}, o{-1.0, -1.0};
  EXPECT_EQ(sturm_count(d, o, 0.5), 0u);
  EXPECT_EQ(sturm_count(d, o, 1.0), 1u);
  EXPECT_EQ(sturm_count(d, o, 2.5), 2u);
  EXPECT_EQ(sturm_count(d, o, 4.0), 3u);
  const auto e = lowest_eigenpairs(d, o, 3);
  EXPECT_NEAR(e.values[0], 2.0 - std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(e.values[1], 2.0, 1e-14);
  EXPECT_NEAR(e.values[2], 2.0 + std::sqrt(2.0), 1e-14);
}

TEST(PropagatorConfig, Validation) {
  auto code = [](PropagatorConfig c) {
    try {
      c.validate();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::io_error;
  };
  EXPECT_EQ(code({Scheme::split_fourier, 1e-3, Boundary::dirichlet}), ErrorCode::boundary_scheme_mismatch);
  EXPECT_EQ(code({Scheme::crank_nicolson, 1e-3, Boundary::periodic}), ErrorCode::boundary_scheme_mismatch);
  EXPECT_EQ(code({Scheme::crank_nicolson, 0.0, Boundary::dirichlet}), ErrorCode::invalid_argument);
  EXPECT_EQ(code({Scheme::crank_nicolson, 1e-3, Boundary::dirichlet}), ErrorCode::io_error);
}

TEST(CrankNicolson, EigenstatePicksUpCayleyFactor) {
  const auto g = make_grid(0.0, 1.0, 401);
  const auto v = eval_potential(PotentialSpec::box(), g);
  const auto sol = solve_stationary(v, g, 1);
  const double E = sol.energies[0], dt = 1e-3;
  const auto out = step_crank_nicolson(sol.states[0], v, dt);
  const complex factor = complex(1.0, -E * dt / 2.0) / complex(1.0, E * dt / 2.0);
  for (std::size_t i = 0; i < g.n_points; ++i) {
    EXPECT_NEAR(std::abs(out[i] - sol.states[0][i] * factor), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(out[i]), std::abs(sol.states[0][i]), 1e-12);
  }
  EXPECT_DOUBLE_EQ(out.time, dt);
}

TEST(CrankNicolson, OneStepKeepsNorm) {
  const auto g = make_grid(-10.0, 10.0, 1001);
  const auto v = eval_potential(PotentialSpec::harmonic(1.0), g);
  const auto psi = gaussian_packet(g, 1.0, 0.8, 2.0).psi;
  EXPECT_NEAR(norm(step_crank_nicolson(psi, v, 0.01)), 1.0, 1e-12);
}

TEST(CrankNicolson, HarmonicCoherentPacketAtHalfPeriod) {
  const auto g = make_grid(-10.0, 10.0, 2001);
  const auto v = eval_potential(PotentialSpec::harmonic(1.0), g);
  const auto psi = gaussian_packet(g, 1.0, std::sqrt(0.5), 0.0).psi;
  const auto h = propagate(psi, v, {Scheme::crank_nicolson, pi / 1000.0, Boundary::dirichlet}, pi, pi / 10.0);
  ASSERT_EQ(h.size(), 11u);
  EXPECT_NEAR(mean_x(h.snapshots.back()), -1.0, 1e-3);
  for (std::size_t s = 0; s < h.size(); ++s) EXPECT_NEAR(mean_x(h.snapshots[s]), std::cos(h.snapshots[s].time), 1e-3);
}

TEST(CrankNicolson, NonFinitePotentialBreaksDown) {
  const auto g = make_grid(0.0, 1.0, 16);
  auto v = eval_potential(PotentialSpec::box(), g);
  v.v[5] = std::numeric_limits<double>::infinity();
  try {
    CrankNicolsonStepper(g, v, 1e-3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::solver_breakdown);
  }
}

TEST(CrankNicolson, SecondOrderInTime) {
  // spatial error is common to both runs; the difference to the analytic
  // packet is dominated by the time step at these dt
  const auto g = make_grid(-25.0, 25.0, 8001);
  const auto v = eval_potential(PotentialSpec::free_particle(), g);
  const auto psi = gaussian_packet(g, 0.0, 1.0, 1.0).psi;
  const auto exact = test::free_gaussian(g, 1.0, 1.0, 1.0);
  auto err = [&](double dt) {
    const auto h = propagate(psi, v, {Scheme::crank_nicolson, dt, Boundary::dirichlet}, 1.0, 1.0);
    return test::linf_diff(h.snapshots.back(), exact);
  };
  const double e1 = err(0.04), e2 = err(0.02);
  EXPECT_GE(e1 / e2, 3.5);
  EXPECT_LE(e1 / e2, 4.5);
}

TEST(SplitFourier, PlaneWaveDispersion) {
  const auto g = periodic_grid(2.0 * pi, 64);
  const auto v = eval_potential(PotentialSpec::free_particle(), g);
  const auto psi = plane_wave(g, 2.0);
  const auto out = step_split_fourier(psi, v, 0.1);
  const complex f = std::polar(1.0, -0.2);
  for (std::size_t i = 0; i < g.n_points; ++i) EXPECT_NEAR(std::abs(out[i] - psi[i] * f), 0.0, 1e-14);
}

TEST(SplitFourier, FreeGaussianMatchesClosedForm) {
  const auto g = periodic_grid(40.0, 1024, -20.0);
  const auto v = eval_potential(PotentialSpec::free_particle(), g);
  const auto psi = test::free_gaussian(g, 1.0, 0.0, 0.0);
  const auto h = propagate(psi, v, {Scheme::split_fourier, 1e-3, Boundary::periodic}, 1.0, 1.0);
  EXPECT_LT(test::linf_diff(h.snapshots.back(), test::free_gaussian(g, 1.0, 0.0, 1.0)), 1e-6);
}

TEST(SplitFourier, ForwardThenBackward) {
  const auto g = periodic_grid(30.0, 512, -15.0);
  const auto v = eval_potential(PotentialSpec::free_particle(), g);
  const auto psi = gaussian_packet(g, -1.0, 0.7, 3.0).psi;
  SplitFourierStepper fwd(g, v, 0.05), bwd(g, v, -0.05);
  const auto back = bwd.step(fwd.step(psi));
  EXPECT_LT(test::linf_diff(back, psi), 1e-12);
}

TEST(SplitFourier, RejectsHardWalls) {
  const auto g = make_grid(0.0, 1.0, 64);
  try {
    SplitFourierStepper(g, eval_potential(PotentialSpec::box(), g), 1e-3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::boundary_scheme_mismatch);
  }
}

TEST(Propagate, NormConservedOverTenThousandSteps) {
  const auto g = periodic_grid(40.0, 1024, -20.0);
  const auto v = eval_potential(PotentialSpec::free_particle(), g);
  const auto psi = gaussian_packet(g, 0.0, 1.0, 1.0).psi;
  for (auto scheme : {Scheme::split_fourier, Scheme::crank_nicolson}) {
    const auto b = scheme == Scheme::split_fourier ? Boundary::periodic : Boundary::dirichlet;
    const auto h = propagate(psi, v, {scheme, 1e-4, b}, 1.0, 0.25);
    for (const auto& s : h.snapshots) EXPECT_LT(std::abs(norm(s) - 1.0), 1e-10) << to_string(scheme);
  }
}

TEST(Propagate, SchemesAgreeOnFreeGaussian) {
  const auto g = make_grid(-20.0, 20.0, 4096);
  const auto v = eval_potential(PotentialSpec::free_particle(), g);
  const auto psi = gaussian_packet(g, 0.0, 1.0, 0.0).psi;
  const auto cn = propagate(psi, v, {Scheme::crank_nicolson, 1e-3, Boundary::dirichlet}, 1.0, 1.0);
  const auto sf = propagate(psi, v, {Scheme::split_fourier, 1e-3, Boundary::periodic}, 1.0, 1.0);
  EXPECT_LT(test::linf_diff(cn.snapshots.back(), sf.snapshots.back()), 1e-5);
}

TEST(Propagate, SnapshotsAndErrors) {
  const auto g = make_grid(-10.0, 10.0, 256);
  const auto v = eval_potential(PotentialSpec::free_particle(), g);
  const auto psi = gaussian_packet(g, 0.0, 1.0, 0.0).psi;
  const auto h = propagate(psi, v, {Scheme::split_fourier, 0.01, Boundary::periodic}, 1.0, 0.1);
  ASSERT_EQ(h.size(), 11u);
  for (std::size_t s = 0; s < h.size(); ++s) EXPECT_DOUBLE_EQ(h.snapshots[s].time, 0.1 * static_cast<double>(s));

  auto code = [&](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::io_error;
  };
  EXPECT_EQ(code([&] { propagate(psi, v, {Scheme::split_fourier, 0.03, Boundary::periodic}, 1.0, 0.1); }),
            ErrorCode::invalid_argument);
  EXPECT_EQ(code([&] { propagate(psi, v, {Scheme::crank_nicolson, 0.01, Boundary::periodic}, 1.0, 0.1); }),
            ErrorCode::boundary_scheme_mismatch);
  // max|E| ~ k^2/2 = 50 for k = 10: dt = 0.1 violates the phase guard
  const auto fast = gaussian_packet(g, 0.0, 1.0, 10.0).psi;
  EXPECT_EQ(code([&] { propagate(fast, v, {Scheme::split_fourier, 0.1, Boundary::periodic}, 1.0, 0.1); }),
            ErrorCode::dt_guard);
}

TEST(Stationary, BoxGroundStateWithinStencilBound) {
  const auto g = make_grid(0.0, 1.0, 2001);
  const auto sol = solve_stationary(eval_potential(PotentialSpec::box(), g), g, 1);
  const double exact = pi * pi / 2.0;
  EXPECT_LE(std::abs(sol.energies[0] - exact) / exact, (pi * g.dx) * (pi * g.dx) / 12.0);
  EXPECT_NEAR(sol.energies[0], 4.934802, 1e-5);
}

TEST(Stationary, HarmonicGroundState) {
  // The 3-point stencil lowers E0 by dx^2/32 at leading order (the <x^4> term
  // of the Taylor remainder); at 2001 points that is 3.1e-6.
  const auto g = make_grid(-10.0, 10.0, 2001);
  const auto e = solve_stationary(eval_potential(PotentialSpec::harmonic(1.0), g), g, 1).energies[0];
  EXPECT_NEAR(e - 0.5, -g.dx * g.dx / 32.0, 1e-9);
  const auto gf = make_grid(-10.0, 10.0, 4001);
  const auto ef = solve_stationary(eval_potential(PotentialSpec::harmonic(1.0), gf), gf, 1).energies[0];
  EXPECT_NEAR(ef, 0.5, 1e-6);
}

TEST(Stationary, AscendingNormalizedSmallResidual) {
  for (const auto& spec : {PotentialSpec::box(), PotentialSpec::harmonic(1.3), PotentialSpec::linear(2.0),
                           PotentialSpec::barrier(40.0, 0.4, 0.6)}) {
    const auto g = spec.kind == PotentialKind::box ? make_grid(0.0, 1.0, 1001) : make_grid(-6.0, 6.0, 1201);
    const auto v = eval_potential(spec, g);
    const auto sol = solve_stationary(v, g, 6);
    for (std::size_t k = 0; k < 6; ++k) {
      if (k > 0) {
        EXPECT_GT(sol.energies[k], sol.energies[k - 1]);
      }
      EXPECT_NEAR(norm(sol.states[k]), 1.0, 1e-10);
      EXPECT_LE(eigen_residual(sol.states[k], sol.energies[k], v), 1e-8 * std::abs(sol.energies[k]))
          << to_string(spec.kind) << " n=" << k;
      double first = 0.0, umax = 0.0;
      for (const auto& z : sol.states[k].samples) umax = std::max(umax, std::abs(z.real()));
      for (const auto& z : sol.states[k].samples)
        if (std::abs(z.real()) > 1e-3 * umax) {
          first = z.real();
          break;
        }
      EXPECT_GT(first, 0.0);
    }
  }
}

TEST(Stationary, RejectsBadCount) {
  const auto g = make_grid(0.0, 1.0, 16);
  const auto v = eval_potential(PotentialSpec::box(), g);
  for (std::size_t n : {0u, 14u}) {
    try {
      solve_stationary(v, g, n);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::invalid_argument);
    }
  }
}
