#pragma once

// Boundary states at both infinities and the eigenstructure of the
// linearisations used for projection boundary conditions.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <span>
#include <sstream>
#include <vector>

#include "wallforge/error.hpp"
#include "wallforge/model.hpp"

namespace wallforge {

enum class AsymptoticMode { Expansion, Newton };

inline const char* to_string(AsymptoticMode m) {
  return m == AsymptoticMode::Expansion ? "expansion" : "newton";
}

struct EquilibriumMinus {
  double a0_minus = 1.0;
  double b0_minus = 0.0;
  double omega_tilde_minus_sq = 0.0;
  AsymptoticMode method = AsymptoticMode::Expansion;
  int iterations = 0;
  double residual = 0.0;
};

struct PeriodicPlus {
  double r0 = 1.0;
  double r1 = 0.0;
  double k_plus = 0.0;
  double omega = 0.0;
  AsymptoticMode method = AsymptoticMode::Expansion;
  int iterations = 0;
  double residual = 0.0;
};

struct NewtonOptions {
  int max_iter = 50;
  double tol = 1e-15;
};

namespace detail {

inline Error newton_failure(const char* what, int iters, double residual) {
  std::ostringstream os;
  os << what << ": Newton did not converge after " << iters
     << " iterations, last residual " << residual;
  return Error(ErrorKind::NonConvergence, os.str());
}

}  // namespace detail

/// Rolls at -infinity: the equilibrium (A0, B0) of the perturbed field.
inline EquilibriumMinus equilibrium_minus(const ModelParams& p, AsymptoticMode mode,
                                          NewtonOptions opt = {}) {
  p.validate();
  const double k = p.k_minus;
  if (!(std::abs(k) < 1.0)) throw precondition_error("|k_minus| < 1 required");
  const double eps2 = p.epsilon * p.epsilon;
  const double a2_exp = 1.0 - 0.25 * k * k + p.coeffs.sigma0 * eps2 * k;
  if (!(a2_exp > 0.0)) throw domain_error("expansion gives A0^2 <= 0");

  EquilibriumMinus eq;
  eq.method = mode;
  eq.a0_minus = std::sqrt(a2_exp);
  eq.b0_minus = 0.0;

  if (mode == AsymptoticMode::Newton) {
    // Stationary state: all derivatives zero, D0 = 0. Unknowns (A0, C0);
    // equations are the A'''' and C'' slots of the perturbed field.
    Eigen::Vector2d z(eq.a0_minus, 0.0);
    auto F = [&](const Eigen::Vector2d& v) {
      PerturbedState s = PerturbedState::Zero();
      s[pslot::A0] = v[0];
      s[pslot::C0] = v[1];
      const PerturbedState f = perturbed_rhs(0.0, s, p);
      // C'' slot carries an eps^2 factor; rescale so both rows are O(1).
      return Eigen::Vector2d(f[pslot::A3], f[pslot::C1] / eps2);
    };
    Eigen::Vector2d r = F(z);
    int it = 0;
    while (r.lpNorm<Eigen::Infinity>() > opt.tol && it < opt.max_iter) {
      Eigen::Matrix2d J;
      for (int j = 0; j < 2; ++j) {
        const double h = 1e-7 * std::max(1.0, std::abs(z[j]));
        Eigen::Vector2d zp = z, zm = z;
        zp[j] += h;
        zm[j] -= h;
        J.col(j) = (F(zp) - F(zm)) / (2.0 * h);
      }
      z -= J.partialPivLu().solve(r);
      r = F(z);
      ++it;
    }
    eq.iterations = it;
    eq.residual = r.lpNorm<Eigen::Infinity>();
    if (!(eq.residual <= opt.tol * 10.0) || !std::isfinite(eq.residual))
      throw detail::newton_failure("equilibrium_minus", it, eq.residual);
    eq.a0_minus = z[0];
    eq.b0_minus = z[1];
  }
  eq.omega_tilde_minus_sq = 2.0 * (1.0 - eq.a0_minus);
  return eq;
}

/// Rolls at +infinity: the circle (r0, r1) of the 1:1 resonance normal form.
inline PeriodicPlus periodic_plus(const ModelParams& p, double k_plus, AsymptoticMode mode,
                                  NewtonOptions opt = {}) {
  p.validate();
  if (!(std::abs(k_plus) < 1.0)) throw precondition_error("|k_plus| < 1 required");
  const auto& c = p.coeffs;
  const double eps = p.epsilon;
  const double eps2 = eps * eps;
  const double r0sq_exp =
      1.0 - 0.25 * k_plus * k_plus + c.sigma1 * eps2 * k_plus + c.sigma2 * eps2 * eps2;
  if (!(r0sq_exp > 0.0)) throw domain_error("expansion gives r0^2 <= 0");

  PeriodicPlus out;
  out.method = mode;
  out.k_plus = k_plus;
  out.r0 = std::sqrt(r0sq_exp);
  out.r1 = 0.5 * eps * out.r0 * k_plus;
  out.omega = (1.0 + eps2 * k_plus) / (2.0 * eps);
  if (mode == AsymptoticMode::Expansion) return out;

  // eps k/2 = r1/r0 + eps^3 P,  (r1/r0)^2 = -eps^2 Q,
  // P = alpha + beta r0^2 + eps gamma r0 r1,  Q = -1 + r0^2 + eps delta_c r0 r1.
  auto F = [&](double r0, double r1) {
    const double P = c.alpha + c.beta * r0 * r0 + eps * c.gamma * r0 * r1;
    const double Q = -1.0 + r0 * r0 + eps * c.delta_c * r0 * r1;
    const double t = r1 / r0;
    return Eigen::Vector2d(0.5 * eps * k_plus - t - eps2 * eps * P, (t * t + eps2 * Q) / eps2);
  };
  auto J = [&](double r0, double r1) {
    Eigen::Matrix2d m;
    const double t = r1 / r0;
    m(0, 0) = r1 / (r0 * r0) - eps2 * eps * (2.0 * c.beta * r0 + eps * c.gamma * r1);
    m(0, 1) = -1.0 / r0 - eps2 * eps * eps * c.gamma * r0;
    m(1, 0) = (-2.0 * t * r1 / (r0 * r0) + eps2 * (2.0 * r0 + eps * c.delta_c * r1)) / eps2;
    m(1, 1) = (2.0 * t / r0 + eps2 * eps * c.delta_c * r0) / eps2;
    return m;
  };
  double r0 = out.r0, r1 = out.r1;
  Eigen::Vector2d r = F(r0, r1);
  int it = 0;
  while (r.lpNorm<Eigen::Infinity>() > opt.tol && it < opt.max_iter) {
    const Eigen::Vector2d d = J(r0, r1).partialPivLu().solve(r);
    r0 -= d[0];
    r1 -= d[1];
    r = F(r0, r1);
    ++it;
  }
  out.iterations = it;
  out.residual = r.lpNorm<Eigen::Infinity>();
  if (!(out.residual <= opt.tol * 10.0) || !std::isfinite(out.residual) || !(r0 > 0.0))
    throw detail::newton_failure("periodic_plus", it, out.residual);
  const double Q = -1.0 + r0 * r0 + eps * c.delta_c * r0 * r1;
  if (Q > 1e-12) throw domain_error("Q > 0 at the periodic orbit: no real r1/r0");
  out.r0 = r0;
  out.r1 = r1;
  return out;
}

struct EigenStructure {
  std::array<std::complex<double>, 4> a_block_roots{};
  std::array<std::complex<double>, 2> b_block_roots{};
  int unstable_dim = 0;
  int stable_dim = 0;
  int center_dim = 0;
  /// Right eigenvectors in the 6-dimensional reduced state space; column j
  /// belongs to roots()[j] (A-block roots first).
  Eigen::Matrix<std::complex<double>, 6, 6> basis;
  /// Left eigenvectors, rows ordered like the columns of basis.
  Eigen::Matrix<std::complex<double>, 6, 6> left_basis;

  std::array<std::complex<double>, 6> roots() const {
    return {a_block_roots[0], a_block_roots[1], a_block_roots[2],
            a_block_roots[3], b_block_roots[0], b_block_roots[1]};
  }

  /// Real rows spanning the left eigenspace for Re(lambda) < 0 (stable) or
  /// Re(lambda) > 0 (unstable). A complex pair contributes its real and
  /// imaginary parts. Rows are normalised.
  Eigen::MatrixXd projection_rows(bool unstable) const {
    std::vector<Eigen::Matrix<double, 1, 6>> rows;
    const auto lam = roots();
    for (int j = 0; j < 6; ++j) {
      const double re = lam[j].real();
      if ((unstable && re <= 0.0) || (!unstable && re >= 0.0)) continue;
      const auto w = left_basis.row(j);
      if (std::abs(lam[j].imag()) > 1e-14) {
        if (lam[j].imag() < 0.0) continue;  // conjugate partner handled
        rows.push_back(w.real());
        rows.push_back(w.imag());
      } else {
        rows.push_back(w.real());
      }
    }
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), 6);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      out.row(static_cast<Eigen::Index>(i)) = rows[i] / rows[i].norm();
    }
    return out;
  }
};

namespace detail {

inline constexpr double kHyperbolicThreshold = 1e-12;

/// Roots of lambda^4 = k lambda^2 + c, solved as a quadratic in lambda^2.
inline std::array<std::complex<double>, 4> quartic_roots(double k, double c) {
  using cd = std::complex<double>;
  const cd disc = std::sqrt(cd(k * k + 4.0 * c, 0.0));
  const cd m1 = 0.5 * (cd(k, 0.0) + disc);
  const cd m2 = 0.5 * (cd(k, 0.0) - disc);
  const cd s1 = std::sqrt(m1);
  const cd s2 = std::sqrt(m2);
  std::array<cd, 4> r{s1, -s1, s2, -s2};
  std::sort(r.begin(), r.end(), [](const cd& a, const cd& b) {
    if (a.real() != b.real()) return a.real() > b.real();
    return a.imag() > b.imag();
  });
  return r;
}

inline EigenStructure build_structure(double k, double a_const, double b_lambda_sq) {
  using cd = std::complex<double>;
  EigenStructure es;
  es.a_block_roots = quartic_roots(k, a_const);
  const cd bl = std::sqrt(cd(b_lambda_sq, 0.0));
  es.b_block_roots = {bl, -bl};
  es.basis.setZero();
  es.left_basis.setZero();
  for (int j = 0; j < 4; ++j) {
    const cd l = es.a_block_roots[j];
    es.basis(0, j) = 1.0;
    es.basis(1, j) = l;
    es.basis(2, j) = l * l;
    es.basis(3, j) = l * l * l;
    // Left eigenvector of the companion block with A'''' = k A'' + c A.
    es.left_basis(j, 0) = l * l * l - k * l;
    es.left_basis(j, 1) = l * l - k;
    es.left_basis(j, 2) = l;
    es.left_basis(j, 3) = 1.0;
  }
  for (int j = 0; j < 2; ++j) {
    const cd l = es.b_block_roots[j];
    es.basis(4, 4 + j) = 1.0;
    es.basis(5, 4 + j) = l;
    es.left_basis(4 + j, 4) = l;
    es.left_basis(4 + j, 5) = 1.0;
  }
  for (const auto& l : es.roots()) {
    if (l.real() > kHyperbolicThreshold)
      ++es.unstable_dim;
    else if (l.real() < -kHyperbolicThreshold)
      ++es.stable_dim;
    else
      ++es.center_dim;
  }
  if (es.center_dim != 0)
    throw domain_error("center directions in the linearisation (|Re lambda| <= 1e-12)");
  return es;
}

}  // namespace detail

/// Linearisation of the reduced field at the rolls at -infinity.
inline EigenStructure linearize_at_minus(const ModelParams& p) {
  p.validate();
  const double k = p.k_minus;
  double a0sq = 1.0;
  if (k != 0.0) {
    const double a = equilibrium_minus(p, AsymptoticMode::Expansion).a0_minus;
    a0sq = a * a;
  }
  const double eps2 = p.epsilon * p.epsilon;
  return detail::build_structure(k, 1.0 - 0.25 * k * k - 3.0 * a0sq,
                                 eps2 * (p.g() * a0sq - 1.0));
}

/// Linearisation of the reduced field at the rolls at +infinity (A = 0, B = 1).
inline EigenStructure linearize_at_plus(const ModelParams& p) {
  p.validate();
  const double k = p.k_minus;
  const double eps2 = p.epsilon * p.epsilon;
  return detail::build_structure(k, 1.0 - 0.25 * k * k - p.g(), 2.0 * eps2);
}

struct DecayFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  ///< rms deviation of log|v| from the fitted line
  std::size_t points = 0;
};

/// Least-squares slope of log|values| against x on [first, last).
inline DecayFit decay_rate_fit(std::span<const double> xs, std::span<const double> values,
                               std::size_t first, std::size_t last) {
  if (xs.size() != values.size()) throw precondition_error("decay fit: size mismatch");
  if (last > xs.size() || first >= last || last - first < 8)
    throw precondition_error("decay fit: window must hold at least 8 points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(last - first);
  for (std::size_t i = first; i < last; ++i) {
    if (!(values[i] > 0.0)) throw domain_error("decay fit: non-positive value in window");
    const double y = std::log(values[i]);
    sx += xs[i];
    sy += y;
    sxx += xs[i] * xs[i];
    sxy += xs[i] * y;
  }
  const double den = n * sxx - sx * sx;
  if (!(std::abs(den) > 1e-300 * n * sxx)) throw precondition_error("decay fit: degenerate window");
  DecayFit fit;
  fit.slope = (n * sxy - sx * sy) / den;
  fit.intercept = (sy - fit.slope * sx) / n;
  double ss = 0;
  for (std::size_t i = first; i < last; ++i) {
    const double e = std::log(values[i]) - (fit.intercept + fit.slope * xs[i]);
    ss += e * e;
  }
  fit.residual = std::sqrt(ss / n);
  fit.points = last - first;
  return fit;
}

}  // namespace wallforge
