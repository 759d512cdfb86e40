#include <gtest/gtest.h>

#include <boost/numeric/odeint.hpp>

#include <random>

#include "oracles.hpp"
#include "wallforge/asymptotics.hpp"
#include "wallforge/model.hpp"

using namespace wallforge;

namespace {

ModelParams params(double eps, double delta) {
  ModelParams p;
  p.epsilon = eps;
  p.delta = delta;
  return p;
}

ReducedState reduced(std::initializer_list<double> v) {
  ReducedState s;
  int i = 0;
  for (double x : v) s[i++] = x;
  return s;
}

PerturbedState perturbed(std::initializer_list<double> v) {
  PerturbedState s;
  int i = 0;
  for (double x : v) s[i++] = x;
  return s;
}

NormalFormCoeffs random_coeffs(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  NormalFormCoeffs c;
  for (double* v : {&c.d1, &c.d2, &c.d3, &c.d4, &c.d5, &c.d6, &c.d7, &c.d8, &c.c0, &c.c1, &c.c2, &c.c3, &c.c4,
                    &c.c5, &c.c6, &c.c7, &c.c8, &c.c9, &c.c10, &c.c11, &c.sigma0})
    *v = u(rng);
  return c;
}

}  // namespace

TEST(ReducedRhs, EquilibriaAreFixed) {
  const auto p = params(0.1, 0.6);
  EXPECT_EQ(reduced_rhs(minus_state(), p).norm(), 0.0);
  EXPECT_EQ(reduced_rhs(plus_state(), p).norm(), 0.0);
}

TEST(ReducedRhs, HandEvaluation) {
  const auto p = ModelParams::from_g(0.1, 1.36);
  const auto f = reduced_rhs(reduced({0.5, 0, 0, 0, 0.5, 0}), p);
  EXPECT_NEAR(f[rslot::A3], 0.205, 1e-15);
  EXPECT_NEAR(f[rslot::B1], -0.00205, 1e-15);
}

TEST(ReducedRhs, MatchesDirectTranscription) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const auto p = params(0.13, 0.7);
  for (int n = 0; n < 200; ++n) {
    std::array<double, 6> a;
    ReducedState s;
    for (int k = 0; k < 6; ++k) s[k] = a[static_cast<std::size_t>(k)] = u(rng);
    const auto f = reduced_rhs(s, p);
    const auto r = oracle::reduced_field(a, p.epsilon, p.g());
    for (int k = 0; k < 6; ++k) EXPECT_NEAR(f[k], r[static_cast<std::size_t>(k)], 1e-14);
  }
}

TEST(ReducedJacobian, AgreesWithFiniteDifferences) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  const auto p = params(0.1, 0.6);
  for (int n = 0; n < 50; ++n) {
    ReducedState s;
    for (int k = 0; k < 6; ++k) s[k] = u(rng);
    const auto J = reduced_jacobian(s, p);
    for (int k = 0; k < 6; ++k) {
      ReducedState e = ReducedState::Zero();
      const double h = 1e-6;
      e[k] = h;
      const ReducedState fd = (reduced_rhs(s + e, p) - reduced_rhs(s - e, p)) / (2 * h);
      EXPECT_LT((fd - J.col(k)).norm(), 1e-8);
    }
  }
}

TEST(PerturbedRhs, ReducesToReducedField) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto p = params(0.1, 0.6);
  p.coeffs = NormalFormCoeffs::zero();
  for (int n = 0; n < 100; ++n) {
    ReducedState s;
    for (int k = 0; k < 6; ++k) s[k] = u(rng);
    const auto f = perturbed_rhs(0.3 * n, embed(s), p);
    const auto r = reduced_rhs(s, p);
    for (int k = 0; k < 4; ++k) EXPECT_NEAR(f[k], r[k], 1e-15);
    EXPECT_NEAR(f[pslot::C0], r[rslot::B0], 1e-15);
    EXPECT_NEAR(f[pslot::C1], r[rslot::B1], 1e-15);
    EXPECT_EQ(f[pslot::D0], 0.0);
    EXPECT_EQ(f[pslot::D1], 0.0);
  }
}

TEST(PerturbedRhs, PlusEquilibriumInRotatingFrame) {
  auto p = params(0.1, 0.6);
  p.coeffs = NormalFormCoeffs::zero();
  const auto f = perturbed_rhs(0.0, perturbed({0, 0, 0, 0, 1, 0, 0, 0}), p);
  EXPECT_NEAR(f[pslot::C1], 0.0, 1e-16);
}

TEST(PerturbedRhs, HandEvaluationWithRotation) {
  auto p = ModelParams::from_g(0.1, 1.36);
  p.coeffs = NormalFormCoeffs::zero();
  p.omega_tilde_plus = 0.05;
  const auto f = perturbed_rhs(0.0, perturbed({1, 0, 0, 0, 0.2, 0, 0, 0}), p);
  EXPECT_NEAR(f[pslot::C1], 0.000805, 1e-15);
}

TEST(FirstIntegral, VanishesAtEquilibria) {
  const auto p = params(0.1, 0.6);
  EXPECT_EQ(first_integral(minus_state(), p), 0.0);
  EXPECT_EQ(first_integral(plus_state(), p), 0.0);
}

TEST(FirstIntegral, HandEvaluation) {
  const auto p = ModelParams::from_g(0.1, 1.36);
  const std::array<double, 6> a{0.5, 0.1, -0.2, 0.3, 0.4, 0.05};
  const double expected = oracle::first_integral(a, 0.1, 1.36);
  EXPECT_NEAR(expected, -4.155e-4, 1e-12);
  EXPECT_NEAR(first_integral(reduced({0.5, 0.1, -0.2, 0.3, 0.4, 0.05}), p), expected, 1e-16);
}

TEST(FirstIntegral, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  const auto p = params(0.2, 0.5);
  for (int n = 0; n < 100; ++n) {
    ReducedState s;
    for (int k = 0; k < 6; ++k) s[k] = u(rng);
    const auto grad = first_integral_gradient(s, p);
    for (int k = 0; k < 6; ++k) {
      ReducedState e = ReducedState::Zero();
      e[k] = 1e-6;
      const double fd = (first_integral(s + e, p) - first_integral(s - e, p)) / 2e-6;
      EXPECT_NEAR(grad[k], fd, 1e-8 * (1.0 + std::abs(fd)));
    }
  }
}

TEST(FirstIntegral, DirectionalDerivativeVanishesOnRandomStates) {
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_real_distribution<double> pe(0.01, 0.2), pd(1.0 / 3.0, 1.0);
  for (int n = 0; n < 10000; ++n) {
    const auto p = params(pe(rng), pd(rng));
    ReducedState s;
    for (int k = 0; k < 6; ++k) s[k] = u(rng);
    const double d = first_integral_gradient(s, p).dot(reduced_rhs(s, p));
    ASSERT_LE(std::abs(d), 1e-12 * (1.0 + std::pow(s.norm(), 6))) << "state " << s.transpose();
  }
}

TEST(FirstIntegral, ConservedAlongBoundedTrajectory) {
  namespace ode = boost::numeric::odeint;
  const auto p = params(0.1, 0.6);
  const auto es = linearize_at_minus(p);
  const auto lam = es.roots();
  int slow = -1;
  for (int j = 0; j < 6; ++j)
    if (std::abs(lam[static_cast<std::size_t>(j)].imag()) < 1e-14 && lam[static_cast<std::size_t>(j)].real() > 0) slow = j;
  ASSERT_GE(slow, 0);
  using S = std::array<double, 6>;
  S u;
  const Eigen::VectorXd v = es.basis.col(slow).real().normalized();
  for (int k = 0; k < 6; ++k) u[static_cast<std::size_t>(k)] = minus_state()[k] + 1e-3 * v[k];
  auto field = [&](const S& x, S& dx, double) { dx = oracle::reduced_field(x, p.epsilon, p.g()); };
  const double w0 = oracle::first_integral(u, p.epsilon, p.g());
  double drift = 0.0;
  auto stepper = ode::make_controlled(1e-13, 1e-13, ode::runge_kutta_fehlberg78<S>());
  ode::integrate_adaptive(stepper, field, u, 0.0, 15.0, 0.01, [&](const S& x, double) {
    drift = std::max(drift, std::abs(oracle::first_integral(x, p.epsilon, p.g()) - w0));
  });
  EXPECT_LE(drift, 1e-10);
}

TEST(Reverser, SignPatternAndInvolution) {
  const auto r = apply_reverser(reduced({1, 2, 3, 4, 5, 6}));
  EXPECT_EQ(r, reduced({1, -2, 3, -4, 5, -6}));
  EXPECT_EQ(apply_reverser(r), reduced({1, 2, 3, 4, 5, 6}));
  const auto q = apply_reverser(perturbed({1, 2, 3, 4, 5, 6, 7, 8}));
  EXPECT_EQ(q, perturbed({1, -2, 3, -4, 5, -6, -7, 8}));
  EXPECT_EQ(apply_reverser(q), perturbed({1, 2, 3, 4, 5, 6, 7, 8}));
}

TEST(Reverser, FixedPointsHaveOddSlotsZero) {
  const auto s = reduced({0.3, 0, -0.7, 0, 0.2, 0});
  EXPECT_EQ(apply_reverser(s), s);
  EXPECT_NE(apply_reverser(reduced({0.3, 0.1, -0.7, 0, 0.2, 0})), reduced({0.3, 0.1, -0.7, 0, 0.2, 0}));
}

TEST(Reverser, AnticommutesWithBothFields) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_real_distribution<double> pe(0.01, 0.2), pd(0.2, 1.5), pk(-0.5, 0.5);
  for (int n = 0; n < 10000; ++n) {
    auto p = params(pe(rng), pd(rng));
    p.k_minus = pk(rng);
    p.omega_tilde_plus = pk(rng);
    p.coeffs = random_coeffs(rng);
    ReducedState s;
    for (int k = 0; k < 6; ++k) s[k] = u(rng);
    const auto f = reduced_rhs(s, p);
    ASSERT_LE((reduced_rhs(apply_reverser(s), p) + apply_reverser(f)).norm(), 1e-12 * (1.0 + f.norm()));
    PerturbedState q;
    for (int k = 0; k < 8; ++k) q[k] = u(rng);
    const auto g = perturbed_rhs(0.0, q, p);
    ASSERT_LE((perturbed_rhs(0.0, apply_reverser(q), p) + apply_reverser(g)).norm(), 1e-12 * (1.0 + g.norm()));
  }
}

TEST(Equivariance, NegatingAmplitudeAIsASymmetry) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  auto p = params(0.1, 0.6);
  p.coeffs = random_coeffs(rng);
  for (int n = 0; n < 500; ++n) {
    ReducedState s;
    for (int k = 0; k < 6; ++k) s[k] = u(rng);
    ReducedState t = s;
    t.head<4>() *= -1.0;
    ReducedState ft = reduced_rhs(s, p);
    ft.head<4>() *= -1.0;
    EXPECT_LE((reduced_rhs(t, p) - ft).norm(), 1e-14);

    PerturbedState q;
    for (int k = 0; k < 8; ++k) q[k] = u(rng);
    PerturbedState r = q;
    r.head<4>() *= -1.0;
    PerturbedState fq = perturbed_rhs(0.4, q, p);
    fq.head<4>() *= -1.0;
    EXPECT_LE((perturbed_rhs(0.4, r, p) - fq).norm(), 1e-13 * (1.0 + fq.norm()));
  }
}

TEST(PerturbationHook, ZeroScaleAndZeroStateGiveNothing) {
  const PerturbationHook off(0.0, 1);
  const auto a = off.evaluate(1.3, perturbed({1, 1, 1, 1, 1, 1, 1, 1}), 0.1);
  EXPECT_EQ(a, (std::array<double, 3>{0.0, 0.0, 0.0}));
  const PerturbationHook on(5.0, 1);
  const auto b = on.evaluate(1.3, PerturbedState::Zero(), 0.1);
  EXPECT_EQ(b, (std::array<double, 3>{0.0, 0.0, 0.0}));
}

TEST(PerturbationHook, RespectsEnvelope) {
  const PerturbationHook hook(1.0, 42);
  const auto s = perturbed({1, 0, 0, 0, 1, 0, 0, 0});
  for (int n = 0; n < 2000; ++n) {
    const auto v = hook.evaluate(-50.0 + 0.05 * n, s, 0.1);
    EXPECT_LE(std::abs(v[0]), 4e-4 * (1 + 1e-14));
    EXPECT_LE(std::abs(v[1]), 1e-6 * 2.0 * 4.0 * (1 + 1e-14));
  }
}

TEST(PerturbationHook, DeterministicPerSeedAndPeriodic) {
  const PerturbationHook a(1.0, 9), b(1.0, 9);
  const auto s = perturbed({0.5, 0.1, 0, 0, 0.6, 0, 0.1, 0});
  const double eps = 0.1;
  const double period = 2.0 * eps * 2.0 * M_PI;
  for (double x : {-3.0, 0.0, 2.5}) {
    EXPECT_EQ(a.evaluate(x, s, eps), b.evaluate(x, s, eps));
    const auto u = a.evaluate(x, s, eps), w = a.evaluate(x + period, s, eps);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(u[static_cast<std::size_t>(k)], w[static_cast<std::size_t>(k)], 1e-15);
  }
}

TEST(PerturbationHook, RejectsNegativeScale) {
  EXPECT_THROW(PerturbationHook(-1.0, 0), Error);
}

TEST(ModelParams, SolverRangeOnDelta) {
  auto p = params(0.1, 0.3);
  EXPECT_NO_THROW(p.validate(ParamUse::Evaluation));
  try {
    p.validate(ParamUse::Solver);
    FAIL() << "expected a precondition error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Precondition);
  }
  p.delta = 1.0 / 3.0;
  EXPECT_NO_THROW(p.validate(ParamUse::Solver));
  p.epsilon = 0.0;
  EXPECT_THROW(p.validate(), Error);
}

TEST(ModelParams, GFromDelta) {
  const auto p = ModelParams::from_g(0.1, 1.36);
  EXPECT_NEAR(p.delta, 0.6, 1e-15);
  EXPECT_NEAR(p.g(), 1.36, 1e-15);
  EXPECT_THROW(ModelParams::from_g(0.1, 1.0), Error);
}
