#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "qfield/fields.hpp"
#include "qfield/propagator.hpp"

using namespace qfield;

namespace {
constexpr double pi = std::numbers::pi;

Grid periodic_grid(double period, std::size_t n, double x_min = 0.0) {
  return make_grid(x_min, x_min + period * static_cast<double>(n - 1) / static_cast<double>(n), n);
}

FieldOptions spectral_periodic() {
  FieldOptions o;
  o.derivative = DerivativeMode::spectral;
  o.boundary = Boundary::periodic;
  return o;
}

template <class F>
double max_dev(const ObservableField& f, F&& oracle) {
  double m = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i)
    if (f.valid[i]) m = std::max(m, std::abs(f.values[i] - oracle(i)));
  return m;
}

double max_abs(const ObservableField& f) {
  return max_dev(f, [](std::size_t) { return 0.0; });
}

double spread(const ObservableField& f) {
  double lo = INFINITY, hi = -INFINITY;
  for (std::size_t i = 0; i < f.size(); ++i)
    if (f.valid[i]) {
      lo = std::min(lo, f.values[i]);
      hi = std::max(hi, f.values[i]);
    }
  return hi - lo;
}
}  // namespace

TEST(PlaneWave, SpectralFieldsAreExact) {
  const double L = 10.0 * pi;
  const auto g = periodic_grid(L, 256);
  const auto psi = plane_wave(g, 2.0);
  const auto v = eval_potential(PotentialSpec::free_particle(), g);
  const auto s = extract_fields(psi, v, spectral_periodic());
  const auto c = [](double x) { return [x](std::size_t) { return x; }; };
  EXPECT_EQ(s.p.valid_count(), g.n_points);
  EXPECT_LT(max_dev(s.p, c(2.0)), 1e-11);
  EXPECT_LT(max_dev(s.k, c(2.0)), 1e-11);
  EXPECT_LT(max_dev(s.K, c(2.0)), 1e-10);
  EXPECT_LT(max_dev(s.Kw, c(0.0)), 1e-10);
  EXPECT_LT(max_dev(s.E, c(2.0)), 1e-10);
  EXPECT_LT(max_dev(s.j, c(2.0 / L)), 1e-12);
  EXPECT_LT(max_dev(s.Q, c(4.0 / L)), 1e-12);
}

TEST(PlaneWave, CenteredStencilsMatchDiscreteSymbols) {
  const auto g = periodic_grid(10.0 * pi, 256);
  const auto psi = plane_wave(g, 2.0);
  const double h = g.dx, kh = 2.0 * h;
  const auto p = momentum_field(psi);
  const auto [K, Kw] = kinetic_field(psi);
  const auto j = flux_field(psi);
  EXPECT_FALSE(p.valid.front());
  EXPECT_FALSE(p.valid.back());
  EXPECT_LT(max_dev(p, [&](std::size_t) { return std::sin(kh) / h; }), 1e-12);
  EXPECT_LT(max_dev(K, [&](std::size_t) { return (1.0 - std::cos(kh)) / (h * h); }), 1e-10);
  EXPECT_LT(max_dev(j, [&](std::size_t i) { return std::norm(psi[i]) * std::sin(kh) / h; }), 1e-14);
}

TEST(Momentum, RealStateCarriesNoCurrent) {
  const auto g = make_grid(-10, 10, 801);
  const auto psi = gaussian_packet(g, 0.3, 1.2, 0.0).psi;
  const auto p = momentum_field(psi);
  const auto j = flux_field(psi);
  for (std::size_t i = 0; i < g.n_points; ++i) {
    EXPECT_EQ(p.values[i], 0.0);
    EXPECT_EQ(j.values[i], 0.0);
  }
  EXPECT_GT(p.valid_count(), 500u);
}

TEST(Momentum, SpreadingGaussianVelocityField) {
  // sigma = 1, k0 = 0 at t = 1: phase is x^2/10 + const, so p = 0.2 x
  const auto g = periodic_grid(40.0, 1024, -20.0);
  const auto psi = test::free_gaussian(g, 1.0, 0.0, 1.0);
  const auto s = extract_fields(psi, eval_potential(PotentialSpec::free_particle(), g), spectral_periodic());
  EXPECT_LT(max_dev(s.p, [&](std::size_t i) { return 0.2 * g.x(i); }), 1e-6);
  // centred difference of a quadratic phase is exact, so this is a p route check
  EXPECT_LT(max_dev(s.p, [&](std::size_t i) { return s.k.valid[i] ? g.hbar * s.k.values[i] : s.p.values[i]; }),
            1e-6);
  EXPECT_LT(max_dev(s.j, [&](std::size_t i) { return s.mp.w[i] * 0.2 * g.x(i); }), 1e-6);
}

TEST(Momentum, CenteredRouteConvergesSecondOrder) {
  auto err = [](std::size_t n) {
    const auto g = make_grid(-20, 20, n);
    const auto psi = test::free_gaussian(g, 1.0, 0.0, 1.0);
    const auto p = momentum_field(psi);
    const auto k = wavenumber_field(decompose(psi), g);
    // compare on |x| <= 5 so both grids see the same points
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (std::abs(g.x(i)) <= 5.0) {
        a = std::max(a, std::abs(p.values[i] - 0.2 * g.x(i)));
        b = std::max(b, std::abs(p.values[i] - k.values[i]));
      }
    return std::pair{a, b};
  };
  const auto [e1, d1] = err(1001);
  const auto [e2, d2] = err(2001);
  EXPECT_GT(e1 / e2, 3.5);
  EXPECT_LT(e1 / e2, 4.5);
  EXPECT_GT(d1 / d2, 3.5);
  EXPECT_LT(d1 / d2, 4.5);
}

TEST(Wavenumber, BoostedGaussianHasUniformK) {
  const auto g = make_grid(-12, 12, 1201);
  const auto psi = gaussian_packet(g, 0.0, 1.0, 1.5).psi;
  const auto k = wavenumber_field(decompose(psi), g);
  EXPECT_GT(k.valid_count(), 500u);
  EXPECT_LT(max_dev(k, [](std::size_t) { return 1.5; }), 1e-10);
}

TEST(Frequency, StationaryStateRotatesAtItsEnergy) {
  const auto g = make_grid(0, 1, 4096);
  const auto psi = box_eigenstate(g, 1);
  const double e1 = pi * pi / 2.0, dt = 1e-3;
  const auto prev = decompose(test::stationary(psi, e1, -dt));
  const auto next = decompose(test::stationary(psi, e1, dt));
  const auto om = frequency_field(prev, next, dt);
  EXPECT_EQ(om.valid_count(), g.n_points - 2);
  EXPECT_LT(max_dev(om, [&](std::size_t) { return e1; }), 1e-10);
}

TEST(Frequency, PlaneWaveFromPropagation) {
  const auto g = periodic_grid(10.0 * pi, 256);
  const auto v = eval_potential(PotentialSpec::free_particle(), g);
  const auto h = propagate(plane_wave(g, 2.0), v, {Scheme::split_fourier, 0.01, Boundary::periodic}, 0.2, 0.1);
  const auto om = frequency_field(decompose(h.snapshots[0]), decompose(h.snapshots[2]), 0.1);
  EXPECT_LT(max_dev(om, [](std::size_t) { return 2.0; }), 1e-10);
}

TEST(Frequency, UnwrapGuard) {
  const auto g = periodic_grid(10.0 * pi, 64);
  const auto psi = plane_wave(g, 2.0);
  try {
    frequency_field(decompose(psi), decompose(rotate_phase(psi, pi)), 0.1);
    FAIL() << "expected unwrap_guard";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::unwrap_guard);
  }
  // reduced phase change jumps by more than pi between neighbours
  auto next = psi;
  for (std::size_t i = 0; i < g.n_points; ++i) next[i] *= std::polar(1.0, i < 32 ? 3.0 : -3.0);
  EXPECT_THROW(frequency_field(decompose(psi), decompose(next), 0.1), Error);
  const auto om = frequency_field(decompose(psi), decompose(rotate_phase(psi, -3.0)), 0.1);
  EXPECT_NEAR(om.values[10], 15.0, 1e-12);
}

TEST(Kinetic, DecompositionIsExact) {
  const auto g = make_grid(-15, 15, 1501);
  const auto psi = test::free_gaussian(g, 1.0, 1.3, 0.7);
  const auto p = momentum_field(psi);
  const auto [K, Kw] = kinetic_field(psi);
  std::size_t checked = 0;
  for (std::size_t i = 0; i < g.n_points; ++i) {
    if (!K.valid[i]) continue;
    EXPECT_EQ(K.values[i] - p.values[i] * p.values[i] / (2.0 * g.mass) - Kw.values[i], 0.0);
    ++checked;
  }
  EXPECT_GT(checked, 500u);
}

TEST(Kinetic, RealGaussianCentre) {
  // psi(+-h)/psi(0) = exp(-h^2/4), so the 3-point K_w(0) is (1 - exp(-h^2/4))/h^2
  const auto g = make_grid(-10, 10, 2001);
  const auto psi = gaussian_packet(g, 0.0, 1.0, 0.0).psi;
  const auto Kw = kinetic_field(psi).Kw;
  const double h = g.dx;
  EXPECT_NEAR(Kw.values[1000], -std::expm1(-h * h / 4.0) / (h * h), 1e-12);
  EXPECT_NEAR(Kw.values[1000], 0.25, h * h);
  const auto alt = wave_kinetic_from_density(psi);
  EXPECT_NEAR(alt.values[1000], 0.25, h * h);
}

TEST(Kinetic, BoxGroundState) {
  const auto g = make_grid(0, 1, 4096);
  const auto psi = box_eigenstate(g, 1);
  const auto v = eval_potential(PotentialSpec::box(), g);
  const double e1 = pi * pi / 2.0;
  const auto s = extract_fields(psi, v);
  // walls are nodes, and the wall-adjacent points lack a full stencil
  EXPECT_EQ(s.K.valid_count(), g.n_points - 4);
  EXPECT_LT(max_dev(s.K, [&](std::size_t) { return e1; }) / e1, 1e-6);
  EXPECT_LT(max_dev(s.Kw, [&](std::size_t) { return e1; }) / e1, 1e-6);
  EXPECT_LT(max_dev(s.E, [&](std::size_t) { return e1; }) / e1, 1e-6);
  EXPECT_LT(max_dev(s.Q, [&](std::size_t) { return pi * pi; }) / (pi * pi), 1e-5);
}

TEST(Energy, HarmonicGroundState) {
  const auto g = make_grid(-10, 10, 2001);
  const auto v = eval_potential(PotentialSpec::harmonic(1.0), g);
  const auto sol = solve_stationary(v, g, 1);
  const double e0 = sol.energies[0];
  const double bound = std::abs(e0 - 0.5);
  const auto E = energy_field(sol.states[0], v);
  EXPECT_LT(spread(E), 10.0 * bound);
  EXPECT_LT(max_dev(E, [&](std::size_t) { return e0; }), 10.0 * bound);

  // the closed-form ground state is resolved exactly by the spectral route
  std::vector<complex> s(g.n_points);
  for (std::size_t i = 0; i < g.n_points; ++i) s[i] = std::exp(-g.x(i) * g.x(i) / 2.0);
  FieldOptions o;
  o.derivative = DerivativeMode::spectral;
  const auto Es = energy_field(normalize(WaveFunction(g, s)), v, o);
  EXPECT_LT(max_dev(Es, [](std::size_t) { return 0.5; }), 1e-6);
}

TEST(Energy, ExpectationEqualsRayleighQuotient) {
  const auto g = make_grid(-12, 12, 2401);
  const auto v = eval_potential(PotentialSpec::harmonic(1.0), g);
  auto rayleigh = [&](const WaveFunction& psi) {
    const double c = -g.hbar * g.hbar / (2.0 * g.mass * g.dx * g.dx);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < g.n_points; ++i) {
      const complex l = i > 0 ? psi[i - 1] : complex{0.0};
      const complex r = i + 1 < g.n_points ? psi[i + 1] : complex{0.0};
      num += (std::conj(psi[i]) * (c * (l - 2.0 * psi[i] + r) + v.v[i] * psi[i])).real();
      den += std::norm(psi[i]);
    }
    return num / den;
  };
  FieldOptions o;
  o.mask_threshold = 1e-14;
  const auto sol = solve_stationary(v, g, 3);
  for (const auto& psi : {sol.states[2], gaussian_packet(g, 1.0, 0.8, 1.5).psi}) {
    const auto E = energy_field(psi, v, o);
    const auto ev = expectation(E, decompose(psi, o.mask_threshold), g);
    const double rq = rayleigh(psi);
    EXPECT_LT(std::abs(ev.value - rq) / rq, 1e-8);
  }
}

TEST(Q, PlaneWaveAndTails) {
  const double L = 10.0 * pi;
  const auto g = periodic_grid(L, 256);
  const auto q = q_field(plane_wave(g, 2.0), spectral_periodic());
  EXPECT_LT(max_dev(q, [&](std::size_t) { return 4.0 / L; }), 1e-12);

  const auto gg = make_grid(-10, 10, 2001);
  FieldOptions o;
  o.mask_threshold = 1e-200;
  const auto qg = q_field(gaussian_packet(gg, 0.0, 0.8, 1.0).psi, o);
  std::size_t first = 0, last = gg.n_points - 1;
  while (!qg.valid[first]) ++first;
  while (!qg.valid[last]) --last;
  EXPECT_LT(std::abs(qg.values[first]), 1e-12 * max_abs(qg));
  EXPECT_LT(std::abs(qg.values[last]), 1e-12 * max_abs(qg));
}

TEST(LocalField, OperatorStencils) {
  const auto g = make_grid(-12, 12, 1201);
  const auto psi = test::free_gaussian(g, 1.0, 0.8, 0.5);
  const auto v = eval_potential(PotentialSpec::harmonic(0.7), g);

  const auto one = local_field(psi, OperatorStencil::identity(g));
  EXPECT_LT(max_dev(one, [](std::size_t) { return 1.0; }), 1e-15);

  const auto p = momentum_field(psi);
  const auto lp = local_field(psi, OperatorStencil::momentum(g));
  EXPECT_EQ(lp.valid, p.valid);
  EXPECT_LT(max_dev(lp, [&](std::size_t i) { return p.values[i]; }), 1e-12);

  const auto E = energy_field(psi, v);
  const auto lh = local_field(psi, OperatorStencil::hamiltonian(g, v));
  EXPECT_LT(max_dev(lh, [&](std::size_t i) { return E.values[i]; }), 1e-10);

  const auto lx = local_field(psi, OperatorStencil::position(g));
  EXPECT_LT(max_dev(lx, [&](std::size_t i) { return g.x(i); }), 1e-14);
}

TEST(LocalField, RejectsMismatchedCoefficients) {
  const auto g = make_grid(-1, 1, 16);
  OperatorStencil op;
  op.c1.assign(5, 1.0);
  EXPECT_THROW(local_field(gaussian_packet(g, 0, 0.2, 0).psi, op), Error);
}

TEST(Fields, GlobalPhaseInvariance) {
  const auto g = make_grid(-15, 15, 1501);
  const auto v = eval_potential(PotentialSpec::harmonic(1.0), g);
  const auto psi = test::free_gaussian(g, 1.0, 1.2, 0.6);
  const auto a = extract_fields(psi, v);
  auto check = [&](const WaveFunction& rotated, double tol, const std::string& what) {
    const auto b = extract_fields(rotated, v);
    for (auto m : {&FieldSet::k, &FieldSet::p, &FieldSet::K, &FieldSet::Kw, &FieldSet::E, &FieldSet::j,
                   &FieldSet::Q}) {
      const auto& fa = a.*m;
      const auto& fb = b.*m;
      ASSERT_EQ(fa.valid, fb.valid);
      const double scale = std::max(1.0, max_abs(fa));
      EXPECT_LE(max_dev(fb, [&](std::size_t i) { return fa.values[i]; }) / scale, tol) << to_string(fa.label) << " " << what;
    }
  };
  // multiplying by i swaps components exactly, so every field is unchanged bit for bit
  WaveFunction turned = psi;
  for (int q = 1; q <= 3; ++q) {
    for (auto& z : turned.samples) z = complex(-z.imag(), z.real());
    check(turned, 0.0, "quarter turns " + std::to_string(q));
  }
  // a generic angle rounds every sample once and that rounding reaches K and Q through 1/dx^2
  for (double alpha : {0.7, -2.3}) check(rotate_phase(psi, alpha), 1e-12, "alpha " + std::to_string(alpha));
}

TEST(Expectation, NormalizationAndMoments) {
  const auto pg = periodic_grid(10.0 * pi, 256);
  const auto pw = plane_wave(pg, 2.0);
  const auto one = expectation(local_field(pw, OperatorStencil::identity(pg)), decompose(pw), pg);
  EXPECT_NEAR(one.value, 1.0, 1e-10);
  EXPECT_FALSE(one.warning);

  const auto g = make_grid(-12, 12, 4801);
  const auto real = gaussian_packet(g, 0.0, 1.0, 0.0).psi;
  const auto K = kinetic_field(real).K;
  EXPECT_NEAR(expectation(K, decompose(real), g).value, 0.125, 1e-6);

  const auto sg = periodic_grid(32.0, 512, -16.0);
  const auto boosted = gaussian_packet(sg, 0.0, 1.0, 2.0).psi;
  const auto p = momentum_field(boosted, spectral_periodic());
  EXPECT_NEAR(expectation(p, decompose(boosted), sg).value, 2.0, 1e-8);
}

TEST(Expectation, WarnsOnMaskedProbability) {
  const auto g = make_grid(0, 1, 257);
  const auto psi = box_eigenstate(g, 2);
  FieldOptions o;
  o.mask_threshold = 0.05;
  const auto mp = decompose(psi, o.mask_threshold);
  const auto e = expectation(momentum_field(psi, o), mp, g);
  EXPECT_TRUE(e.warning);
  EXPECT_GT(e.masked_probability, 1e-6);
}
