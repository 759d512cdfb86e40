#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "wallforge/config.hpp"
#include "wallforge/spectral.hpp"

using namespace wallforge;

namespace {

ModelParams params(double eps, double delta) {
  ModelParams p = default_run_params();
  p.epsilon = eps;
  p.delta = delta;
  return p;
}

std::vector<double> graded_grid(int n) {
  std::vector<double> x;
  for (int i = 0; i < n; ++i) {
    const double t = -1.0 + 2.0 * i / (n - 1.0);
    x.push_back(10.0 * t + 3.0 * std::sin(1.3 * t));
  }
  return x;
}

/// Interleaves A and C samples like the M_g unknowns.
Eigen::VectorXd interleave(const std::vector<double>& a, const std::vector<double>& c) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(2 * a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    v[static_cast<Eigen::Index>(2 * i)] = a[i];
    v[static_cast<Eigen::Index>(2 * i + 1)] = c[i];
  }
  return v;
}

class Solved : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    if (!sol_) sol_ = std::make_unique<HeteroclinicSolution>(solve_heteroclinic(params(0.1, 0.6)));
  }
  static const HeteroclinicSolution& sol() { return *sol_; }
  static std::unique_ptr<HeteroclinicSolution> sol_;
};
std::unique_ptr<HeteroclinicSolution> Solved::sol_;

/// Profiles of the solution resampled on the once-refined mesh.
std::pair<std::vector<double>, std::pair<std::vector<double>, std::vector<double>>> refined_profiles(
    const HeteroclinicSolution& s) {
  const Mesh r = refine(s.mesh);
  std::vector<double> a, b;
  for (double x : r.nodes) {
    const auto u = s.state_at(x);
    a.push_back(u[rslot::A0]);
    b.push_back(u[rslot::B0]);
  }
  return {r.nodes, {a, b}};
}

}  // namespace

TEST(Stencil, PolynomialsReproducedExactly) {
  const auto x = graded_grid(60);
  const int w = 9;
  for (std::size_t i : {0ul, 3ul, 30ul, 58ul}) {
    const std::size_t lo = detail::stencil_start(i, x.size(), w);
    const auto nodes = std::span<const double>(x).subspan(lo, w);
    const Eigen::MatrixXd c = fd_weights(x[i], nodes, 4);
    for (int deg = 0; deg <= w - 1; ++deg) {
      // derivatives of (x - x0)^deg at x_i, with x0 offset to avoid trivial zeros
      const double x0 = 0.37;
      for (int m = 0; m <= 4; ++m) {
        double exact = 0.0;
        if (m <= deg) {
          double f = 1.0;
          for (int q = 0; q < m; ++q) f *= deg - q;
          exact = f * std::pow(x[i] - x0, deg - m);
        }
        double approx = 0.0;
        for (int k = 0; k < w; ++k) approx += c(m, k) * std::pow(nodes[static_cast<std::size_t>(k)] - x0, deg);
        const double scale = std::max(1.0, std::abs(exact)) * std::pow(20.0, deg);
        EXPECT_NEAR(approx, exact, 1e-11 * scale) << "i " << i << " deg " << deg << " m " << m;
      }
    }
  }
}

TEST(Stencil, OperatorsReproducePolynomialDerivativesInInterior) {
  const auto x = graded_grid(80);
  const auto p = params(0.1, 0.6);
  const std::size_t n = x.size();
  // zero profiles: A rows are -A'''' + A, C rows eps^-2 C'' + C
  const std::vector<double> zero(n, 0.0), one(n, 1.0);
  const auto mg = assemble_Mg_profiles(x, zero, zero, p);
  auto poly = [](double t, int d) { return std::pow(0.1 * t - 0.2, d); };
  auto dpoly = [](double t, int d, int m) {
    double f = 1.0;
    for (int q = 0; q < m; ++q) f *= (d - q) * 0.1;
    return m > d ? 0.0 : f * std::pow(0.1 * t - 0.2, d - m);
  };
  for (int d = 0; d <= 8; ++d) {
    std::vector<double> a(n), c(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = c[i] = poly(x[i], d);
    const Eigen::VectorXd r = mg.apply(interleave(a, c));
    for (std::size_t i = 2; i + 2 < n; ++i) {
      EXPECT_NEAR(r[static_cast<Eigen::Index>(2 * i)], -dpoly(x[i], d, 4) + a[i], 1e-9) << d << " " << i;
      EXPECT_NEAR(r[static_cast<Eigen::Index>(2 * i + 1)], 100.0 * dpoly(x[i], d, 2) + c[i], 1e-8) << d << " " << i;
    }
  }
  // B = 1, A = 0 zeroes the L_g potential
  const auto lg = assemble_Lg_profiles(x, zero, one, p);
  for (int d = 0; d <= 8; ++d) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) v[static_cast<Eigen::Index>(i)] = poly(x[i], d);
    const Eigen::VectorXd r = lg.apply(v);
    for (std::size_t i = 1; i + 1 < n; ++i)
      EXPECT_NEAR(r[static_cast<Eigen::Index>(i)], 100.0 * dpoly(x[i], d, 2), 1e-8) << d << " " << i;
  }
}

TEST(Stencil, CoarseGridRejected) {
  const auto x = graded_grid(12);
  const std::vector<double> z(x.size(), 0.0);
  EXPECT_THROW(assemble_Mg_profiles(x, z, z, params(0.1, 0.6)), Error);
  EXPECT_THROW(assemble_Lg_profiles(x, z, z, params(0.1, 0.6)), Error);
  EXPECT_THROW(assemble_Lg_profiles(graded_grid(40), z, z, params(0.1, 0.6)), Error);
}

TEST(Symbol, FrozenRollsGiveQuarticSymbol) {
  // A* = 1, B* = 0: the A-block acts on cos(kx) as -k^4 - 2
  const int n = 801;
  std::vector<double> x(n);
  for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = -20.0 + 40.0 * i / (n - 1.0);
  const auto p = params(0.1, 0.6);
  const std::vector<double> one(n, 1.0), zero(n, 0.0);
  const auto mg = assemble_Mg_profiles(x, one, zero, p);
  for (double k : {0.3, 0.8, 1.5}) {
    std::vector<double> a(n), c(n, 0.0);
    for (int i = 0; i < n; ++i) a[static_cast<std::size_t>(i)] = std::cos(k * x[static_cast<std::size_t>(i)]);
    const Eigen::VectorXd r = mg.apply(interleave(a, c));
    for (int i = 10; i < n - 10; i += 37) {
      const auto u = static_cast<std::size_t>(i);
      EXPECT_NEAR(r[2 * i], (-std::pow(k, 4) - 2.0) * a[u], 1e-6) << k;
      EXPECT_NEAR(r[2 * i + 1], 0.0, 1e-12);
    }
  }
}

TEST(Symbol, ParallelRollsGiveNegativeDefiniteLg) {
  // A* = 0, B* = 1: L_g acts on cos(kx) as -k^2 / eps^2
  const int n = 801;
  std::vector<double> x(n);
  for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = -20.0 + 40.0 * i / (n - 1.0);
  const auto p = params(0.1, 0.6);
  const std::vector<double> one(n, 1.0), zero(n, 0.0);
  const auto lg = assemble_Lg_profiles(x, zero, one, p);
  for (double k : {0.1, 0.5, 2.0}) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = std::cos(k * x[static_cast<std::size_t>(i)]);
    const Eigen::VectorXd r = lg.apply(v);
    const double symbol = -k * k / 0.01;
    EXPECT_LT(symbol, 0.0);
    for (int i = 10; i < n - 10; i += 37) EXPECT_NEAR(r[i], symbol * v[i], 1e-6 * std::abs(symbol)) << k;
  }
}

TEST_F(Solved, OperatorShape) {
  const auto mg = assemble_Mg(sol());
  const auto lg = assemble_Lg(sol());
  const auto n = static_cast<Eigen::Index>(sol().mesh.nodes.size());
  EXPECT_EQ(mg.matrix.rows(), 2 * n);
  EXPECT_EQ(mg.matrix.cols(), 2 * n);
  EXPECT_EQ(lg.matrix.rows(), n);
  EXPECT_EQ(lg.matrix.cols(), n);
  EXPECT_LE(lg.bandwidth(), lg.stencil);
  EXPECT_LE(mg.bandwidth(), 2 * mg.stencil);
  // centred stencils give a symmetric pattern away from the one-sided end rows
  for (const auto* op : {&mg, &lg}) {
    std::set<std::pair<Eigen::Index, Eigen::Index>> pattern;
    for (Eigen::Index k = 0; k < op->matrix.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(op->matrix, k); it; ++it) pattern.insert({it.row(), it.col()});
    const Eigen::Index margin = 2 * op->components * op->stencil;
    for (const auto& [r, c] : pattern) {
      if (r < margin || c < margin || r >= op->size() - margin || c >= op->size() - margin) continue;
      EXPECT_TRUE(pattern.count({c, r})) << to_string(op->kind) << " " << r << " " << c;
    }
  }
}

TEST_F(Solved, ZeroInZeroOut) {
  const auto mg = assemble_Mg(sol());
  const auto lg = assemble_Lg(sol());
  EXPECT_EQ(mg.apply(Eigen::VectorXd::Zero(mg.size())).lpNorm<Eigen::Infinity>(), 0.0);
  EXPECT_EQ(lg.apply(Eigen::VectorXd::Zero(lg.size())).lpNorm<Eigen::Infinity>(), 0.0);
  EXPECT_THROW(lg.apply(Eigen::VectorXd::Zero(3)), Error);
}

TEST_F(Solved, TranslationModeInKernelOfMg) {
  const auto mg = assemble_Mg(sol());
  const Eigen::VectorXd t = translation_mode(sol());
  const Eigen::VectorXd r = mg.apply(t);
  const std::size_t n = sol().mesh.nodes.size();
  double worst = 0.0;
  for (std::size_t i = 2; i + 2 < n; ++i) {
    worst = std::max(worst, std::abs(r[static_cast<Eigen::Index>(2 * i)]));
    worst = std::max(worst, std::abs(r[static_cast<Eigen::Index>(2 * i + 1)]));
  }
  // interior residual: discretisation error of the stencils plus the orbit residual
  EXPECT_LE(worst, 1e-5 + 10.0 * sol().newton_residual) << worst;
}

TEST_F(Solved, BStarAnnihilatedByLgInInterior) {
  const auto lg = assemble_Lg(sol());
  const std::size_t n = sol().mesh.nodes.size();
  Eigen::VectorXd b(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) b[static_cast<Eigen::Index>(i)] = sol().states()[i][rslot::B0];
  const Eigen::VectorXd r = lg.apply(b);
  EXPECT_LE(r.segment(1, static_cast<Eigen::Index>(n) - 2).lpNorm<Eigen::Infinity>(), 1e-5);
}

TEST_F(Solved, MgKernelIsOneDimensional) {
  const auto rep = kernel_diagnostics(assemble_Mg(sol()), &sol());
  ASSERT_EQ(rep.smallest_singulars.size(), 4u);
  for (std::size_t i = 0; i < rep.smallest_singulars.size(); ++i) {
    EXPECT_GE(rep.smallest_singulars[i], 0.0);
    if (i > 0) EXPECT_GE(rep.smallest_singulars[i], rep.smallest_singulars[i - 1]);
  }
  EXPECT_LE(rep.kernel_angle, 1e-3);
  EXPECT_GE(rep.spectral_gap, 1e3);
  EXPECT_NEAR(rep.kernel_vector.norm(), 1.0, 1e-12);
}

TEST_F(Solved, MgSecondSingularValueMeshStable) {
  const auto coarse = kernel_diagnostics(assemble_Mg(sol()), &sol());
  const auto [grid, ab] = refined_profiles(sol());
  const auto fine = kernel_diagnostics(assemble_Mg_profiles(grid, ab.first, ab.second, sol().params), nullptr);
  EXPECT_NEAR(fine.smallest_singulars[1] / coarse.smallest_singulars[1], 1.0, 0.02);
  EXPECT_LE(fine.smallest_singulars[0], 1e-4 * fine.smallest_singulars[1]);
}

TEST_F(Solved, LgTrivialKernelMeshStable) {
  const auto coarse = kernel_diagnostics(assemble_Lg(sol()), &sol());
  EXPECT_GT(coarse.smallest_singulars[0], 0.01);
  EXPECT_TRUE(std::isnan(coarse.kernel_angle));
  const auto [grid, ab] = refined_profiles(sol());
  const auto fine = kernel_diagnostics(assemble_Lg_profiles(grid, ab.first, ab.second, sol().params), nullptr);
  EXPECT_NEAR(fine.smallest_singulars[0] / coarse.smallest_singulars[0], 1.0, 0.01);
}

TEST_F(Solved, ShiftCalibration) {
  // zero operator plus a shift: every singular value is the shift
  auto zero = assemble_Lg(sol());
  zero.matrix *= 0.0;
  const auto flat = kernel_diagnostics(zero.shifted(7.5), nullptr);
  for (double s : flat.smallest_singulars) EXPECT_NEAR(s, 7.5, 1e-12);
  // L_g is negative semidefinite up to the end rows, so a large negative
  // shift dominates; the dense cluster near the shift converges slowly, hence
  // the looser sweep tolerance
  SpectralSettings set;
  set.count = 1;
  set.tol = 1e-7;
  set.max_iter = 2000;
  const double shift = -1e3;
  const auto rep = kernel_diagnostics(assemble_Lg(sol()).shifted(shift), nullptr, set);
  EXPECT_NEAR(rep.smallest_singulars[0] / std::abs(shift), 1.0, 1e-3);
}

TEST_F(Solved, SolveLgZeroAndConsistency) {
  const auto lg = assemble_Lg(sol());
  const std::size_t n = sol().mesh.nodes.size();
  Eigen::VectorXd b(static_cast<Eigen::Index>(n)), v(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double x = sol().mesh.nodes[i];
    b[static_cast<Eigen::Index>(i)] = sol().states()[i][rslot::B0];
    // smooth bump supported in [-3, 3]
    v[static_cast<Eigen::Index>(i)] = std::abs(x) < 3.0 ? std::pow(std::cos(M_PI * x / 6.0), 8) : 0.0;
  }
  const auto zero = solve_Lg(lg, Eigen::VectorXd::Zero(lg.size()), b);
  EXPECT_EQ(zero.w.lpNorm<Eigen::Infinity>(), 0.0);
  const Eigen::VectorXd rhs = lg.apply(v);
  const auto res = solve_Lg(lg, rhs, b, 1e-3);
  EXPECT_LT((res.w - v).lpNorm<Eigen::Infinity>(), 1e-8);
  EXPECT_THROW(solve_Lg(lg, b, b), Error);
  EXPECT_THROW(solve_Lg(assemble_Mg(sol()), rhs, b), Error);
}

TEST_F(Solved, W1CompatibilityAndSolve) {
  NormalFormCoeffs c = sol().params.coeffs;
  c.c9 = 1.0;
  const auto w = compute_w1(sol(), c);
  EXPECT_LE(w.compat_defect_relative, 1e-6);
  EXPECT_NEAR(w.b_b1_integral, 0.5, 1e-6);
  EXPECT_GT(w.l2_norm, 0.0);
  EXPECT_GE(w.h2_norm, w.l2_norm);
  EXPECT_TRUE(std::isfinite(w.max_norm));
  // the discrete solution satisfies the system away from the end rows
  const auto lg = assemble_Lg(sol());
  const Eigen::VectorXd r = lg.apply(w.w) - w.rhs;
  EXPECT_LT(r.segment(1, r.size() - 2).lpNorm<Eigen::Infinity>(), 1e-8 * std::max(1.0, w.rhs.lpNorm<Eigen::Infinity>()));
  // doubling c9 doubles w
  c.c9 = 2.0;
  const auto w2 = compute_w1(sol(), c);
  EXPECT_LT((w2.w - 2.0 * w.w).lpNorm<Eigen::Infinity>(), 1e-10 * std::max(1.0, w.max_norm));
}
