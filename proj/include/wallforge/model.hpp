#pragma once

// Amplitude equations for orthogonal domain walls.
//
// Reduced system (real B):
//   A'''' = A (1 - A^2 - g B^2)
//   B''   = eps^2 B (-1 + g A^2 + B^2)
// with first integral W_g, reversibility S1 and the perturbed 8-dimensional
// cubic normal form written in the rotating frame B e^{-i eps w x} = C + iD.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>

#include "wallforge/error.hpp"

namespace wallforge {

using ReducedState = Eigen::Matrix<double, 6, 1>;
using PerturbedState = Eigen::Matrix<double, 8, 1>;
using ReducedJacobian = Eigen::Matrix<double, 6, 6>;

/// Slot names of the reduced state (A, A', A'', A''', B, B').
namespace rslot {
enum : int { A0 = 0, A1, A2, A3, B0, B1 };
}

/// Slot names of the perturbed state (A, A', A'', A''', C, C', D, D').
namespace pslot {
enum : int { A0 = 0, A1, A2, A3, C0, C1, D0, D1 };
}

/// Real cubic normal-form coefficients. The defaults are non-physical test
/// values; sigma1/sigma2 are chosen consistent with alpha, beta, delta_c.
struct NormalFormCoeffs {
  double d1 = 0.0, d2 = -0.5, d3 = 0.0, d4 = 0.5;
  double d5 = 0.0, d6 = 0.0, d7 = 0.0, d8 = 0.0;
  double c0 = 0.0, c1 = 0.0, c2 = 0.0, c3 = 0.0, c4 = 0.0, c5 = 0.0;
  double c6 = 0.0, c7 = 0.0, c8 = 0.0, c9 = 1.0, c10 = 0.0, c11 = 0.0;
  double sigma0 = 1.0;
  double sigma1 = -0.05;
  double sigma2 = 0.02;
  double alpha = 0.2, beta = -0.1, gamma = 0.1, delta_c = 0.3;

  static NormalFormCoeffs zero() {
    NormalFormCoeffs z;
    z.d2 = z.d4 = z.c9 = 0.0;
    z.sigma0 = z.sigma1 = z.sigma2 = 0.0;
    z.alpha = z.beta = z.gamma = z.delta_c = 0.0;
    return z;
  }

  bool all_finite() const {
    for (double v : {d1, d2, d3, d4, d5, d6, d7, d8, c0, c1, c2, c3, c4, c5, c6,
                     c7, c8, c9, c10, c11, sigma0, sigma1, sigma2, alpha, beta,
                     gamma, delta_c}) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }
};

/// Expansion coefficients of r0^2(k+) implied by the 1:1 resonance system:
/// sigma1 = alpha + beta - delta_c/2, sigma2 = delta_c (alpha+beta) - (alpha+beta)^2.
inline std::pair<double, double> consistent_sigma12(const NormalFormCoeffs& c) {
  const double ab = c.alpha + c.beta;
  return {ab - 0.5 * c.delta_c, c.delta_c * ab - ab * ab};
}

enum class ParamUse { Evaluation, Solver };

struct ModelParams {
  double epsilon = 0.1;
  double delta = 0.6;
  double k_minus = 0.0;
  double omega_tilde_plus = 0.0;
  NormalFormCoeffs coeffs = NormalFormCoeffs::zero();

  double g() const { return 1.0 + delta * delta; }

  static ModelParams from_g(double eps, double g) {
    if (!(g > 1.0)) throw precondition_error("g must exceed 1 (g = 1 + delta^2)");
    ModelParams p;
    p.epsilon = eps;
    p.delta = std::sqrt(g - 1.0);
    return p;
  }

  /// Throws a precondition error when the parameters are out of range.
  void validate(ParamUse use = ParamUse::Evaluation) const {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon))
      throw precondition_error("epsilon must be finite and > 0");
    if (!(delta > 0.0) || !std::isfinite(delta))
      throw precondition_error("delta must be finite and > 0");
    if (!std::isfinite(k_minus) || !std::isfinite(omega_tilde_plus))
      throw precondition_error("wavenumber offsets must be finite");
    if (!coeffs.all_finite())
      throw precondition_error("normal-form coefficients must be finite");
    if (use == ParamUse::Solver && (delta < 1.0 / 3.0 - 1e-15 || delta > 1.0 + 1e-15))
      throw precondition_error("solver entry requires 1/3 <= delta <= 1, got delta = " +
                               std::to_string(delta));
  }
};

inline const ReducedState& minus_state() {
  static const ReducedState m = (ReducedState() << 1, 0, 0, 0, 0, 0).finished();
  return m;
}

inline const ReducedState& plus_state() {
  static const ReducedState m = (ReducedState() << 0, 0, 0, 0, 1, 0).finished();
  return m;
}

inline ReducedState reduced_rhs(const ReducedState& s, const ModelParams& p) {
  using namespace rslot;
  const double g = p.g();
  const double eps2 = p.epsilon * p.epsilon;
  ReducedState f;
  f[A0] = s[A1];
  f[A1] = s[A2];
  f[A2] = s[A3];
  f[A3] = s[A0] * (1.0 - s[A0] * s[A0] - g * s[B0] * s[B0]);
  f[B0] = s[B1];
  f[B1] = eps2 * s[B0] * (-1.0 + g * s[A0] * s[A0] + s[B0] * s[B0]);
  return f;
}

inline ReducedJacobian reduced_jacobian(const ReducedState& s, const ModelParams& p) {
  using namespace rslot;
  const double g = p.g();
  const double eps2 = p.epsilon * p.epsilon;
  ReducedJacobian J = ReducedJacobian::Zero();
  J(A0, A1) = J(A1, A2) = J(A2, A3) = J(B0, B1) = 1.0;
  J(A3, A0) = 1.0 - 3.0 * s[A0] * s[A0] - g * s[B0] * s[B0];
  J(A3, B0) = -2.0 * g * s[A0] * s[B0];
  J(B1, A0) = 2.0 * eps2 * g * s[A0] * s[B0];
  J(B1, B0) = eps2 * (-1.0 + g * s[A0] * s[A0] + 3.0 * s[B0] * s[B0]);
  return J;
}

/// W_g in state variables, using (A'^2)'' = 2A''^2 + 2A'A'''.
inline double first_integral(const ReducedState& s, const ModelParams& p) {
  using namespace rslot;
  const double eps2 = p.epsilon * p.epsilon;
  const double a2 = s[A0] * s[A0];
  const double b2 = s[B0] * s[B0];
  const double q = a2 + b2 - 1.0;
  return eps2 * (2.0 * s[A1] * s[A3] - s[A2] * s[A2]) - s[B1] * s[B1] +
         0.5 * eps2 * q * q + eps2 * (p.g() - 1.0) * a2 * b2;
}

inline ReducedState first_integral_gradient(const ReducedState& s, const ModelParams& p) {
  using namespace rslot;
  const double eps2 = p.epsilon * p.epsilon;
  const double gm1 = p.g() - 1.0;
  const double q = s[A0] * s[A0] + s[B0] * s[B0] - 1.0;
  ReducedState d;
  d[A0] = eps2 * (2.0 * q * s[A0] + 2.0 * gm1 * s[A0] * s[B0] * s[B0]);
  d[A1] = 2.0 * eps2 * s[A3];
  d[A2] = -2.0 * eps2 * s[A2];
  d[A3] = 2.0 * eps2 * s[A1];
  d[B0] = eps2 * (2.0 * q * s[B0] + 2.0 * gm1 * s[A0] * s[A0] * s[B0]);
  d[B1] = -2.0 * s[B1];
  return d;
}

/// Reversibility S1 on the reduced state: (+,-,+,-,+,-).
inline ReducedState apply_reverser(const ReducedState& s) {
  ReducedState r = s;
  r[rslot::A1] = -r[rslot::A1];
  r[rslot::A3] = -r[rslot::A3];
  r[rslot::B1] = -r[rslot::B1];
  return r;
}

/// Reversibility S1 on the perturbed state: (+,-,+,-,+,-,-,+).
inline PerturbedState apply_reverser(const PerturbedState& s) {
  PerturbedState r = s;
  r[pslot::A1] = -r[pslot::A1];
  r[pslot::A3] = -r[pslot::A3];
  r[pslot::C1] = -r[pslot::C1];
  r[pslot::D0] = -r[pslot::D0];
  return r;
}

/// Bounded non-autonomous perturbation inside the envelopes of the
/// non-normal-form rests. Periodic in the fast phase x/(2 eps); the Fourier
/// coefficients are drawn from a seeded generator and normalised so that the
/// trigonometric factor never exceeds one in magnitude.
class PerturbationHook {
 public:
  static constexpr int kModes = 4;

  PerturbationHook(double envelope_scale, std::uint64_t seed) : scale_(envelope_scale) {
    if (!(envelope_scale >= 0.0) || !std::isfinite(envelope_scale))
      throw precondition_error("perturbation envelope_scale must be >= 0");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto* set : {&a_, &c_, &d_}) {
      double total = 0.0;
      for (auto& v : *set) {
        v = u(rng);
        total += std::abs(v);
      }
      if (total > 0.0)
        for (auto& v : *set) v /= total;
    }
  }

  double scale() const { return scale_; }

  /// Additive terms for the (A'''', C'', D'') slots at position x.
  std::array<double, 3> evaluate(double x, const PerturbedState& s, double eps) const {
    using namespace pslot;
    if (scale_ == 0.0) return {0.0, 0.0, 0.0};
    const double x2 = s[A0] * s[A0] + s[A1] * s[A1] + s[A2] * s[A2] + s[A3] * s[A3];
    const double y2 = s[C0] * s[C0] + s[D0] * s[D0] + s[C1] * s[C1] + s[D1] * s[D1];
    const double xn = std::sqrt(x2);
    const double yn = std::sqrt(y2);
    const double w = (x2 + y2) * (x2 + y2);
    const double eps2 = eps * eps;
    const double env_a = scale_ * eps2 * eps2 * xn * w;
    const double env_b = scale_ * eps2 * eps2 * eps2 * (x2 + yn) * w;
    const double phase = x / (2.0 * eps);
    return {env_a * trig(a_, phase), env_b * trig(c_, phase), env_b * trig(d_, phase)};
  }

 private:
  static double trig(const std::array<double, 2 * kModes>& coef, double phase) {
    double v = 0.0;
    for (int m = 0; m < kModes; ++m) {
      v += coef[2 * m] * std::cos((m + 1) * phase) + coef[2 * m + 1] * std::sin((m + 1) * phase);
    }
    return v;
  }

  double scale_;
  std::array<double, 2 * kModes> a_{}, c_{}, d_{};
};

/// Cubic normal form in the rotating frame (C, D), without the unspecified
/// higher-order rests. The optional hook adds a bounded non-autonomous term.
inline PerturbedState perturbed_rhs(double x, const PerturbedState& s, const ModelParams& p,
                                    const PerturbationHook* hook = nullptr) {
  using namespace pslot;
  const auto& k = p.coeffs;
  const double eps = p.epsilon;
  const double eps2 = eps * eps;
  const double eps3 = eps2 * eps;
  const double eps4 = eps2 * eps2;
  const double eps5 = eps4 * eps;
  const double g = p.g();
  const double km = p.k_minus;
  const double w = p.omega_tilde_plus;

  const double A = s[A0], Ap = s[A1], App = s[A2], Appp = s[A3];
  const double C = s[C0], Cp = s[C1], D = s[D0], Dp = s[D1];
  const double mod2 = C * C + D * D;
  const double wr = C * Dp - D * Cp;   // Im(conj(B) B') in the rotating frame
  const double jr = C * Cp + D * Dp;   // Re(conj(B) B')

  const double f0 = k.d1 * eps * A * wr + k.sigma0 * eps2 * km * A * A * A +
                    k.d2 * eps2 * A * Ap * Ap + k.d3 * eps2 * App +
                    k.d4 * eps2 * A * A * App + k.d5 * eps2 * App * mod2 +
                    k.d6 * eps2 * A * (Cp * Cp + Dp * Dp) + k.d7 * eps2 * Ap * jr +
                    k.d8 * eps3 * App * wr;

  // g_r0 + i g_i0, accumulated as (re, im).
  double gr = 0.0, gi = 0.0;
  {
    const double pc = k.c0 + k.c1 * A * A + k.c2 * mod2;
    // i eps^3 (C' + i D') P
    gr += -eps3 * Dp * pc;
    gi += eps3 * Cp * pc;
    // eps^3 c3 (C + i D) W
    gr += eps3 * k.c3 * C * wr;
    gi += eps3 * k.c3 * D * wr;
    // i eps^3 c9 (C + i D) A A'
    gr += -eps3 * k.c9 * D * A * Ap;
    gi += eps3 * k.c9 * C * A * Ap;
    // i eps^4 c4 (C' + i D') W; the factor i follows from
    // B'(B conj(B') - conj(B) B') = -2i (C' + i D') W.
    gr += -eps4 * k.c4 * Dp * wr;
    gi += eps4 * k.c4 * Cp * wr;
    // eps^4 [c5 A A'' + c6 A'^2] (C + i D) + eps^4 c7 A A' (C' + i D')
    const double q4 = k.c5 * A * App + k.c6 * Ap * Ap;
    gr += eps4 * (q4 * C + k.c7 * A * Ap * Cp);
    gi += eps4 * (q4 * D + k.c7 * A * Ap * Dp);
    // i eps^5 (C' + i D')(c7 A A'' + c10 A'^2)
    const double q5 = k.c7 * A * App + k.c10 * Ap * Ap;
    gr += -eps5 * Dp * q5;
    gi += eps5 * Cp * q5;
    // i eps^5 (C + i D)(c8 A A''' + c11 A' A'')
    const double r5 = k.c8 * A * Appp + k.c11 * Ap * App;
    gr += -eps5 * D * r5;
    gi += eps5 * C * r5;
  }

  const double bulk = -1.0 + w * w + g * A * A + mod2;

  PerturbedState f;
  f[A0] = Ap;
  f[A1] = App;
  f[A2] = Appp;
  f[A3] = km * App + A * (1.0 - 0.25 * km * km - A * A - g * mod2) + f0;
  f[C0] = Cp;
  f[C1] = 2.0 * eps * w * Dp + eps2 * C * bulk + gr;
  f[D0] = Dp;
  f[D1] = -2.0 * eps * w * Cp + eps2 * D * bulk + gi;

  if (hook != nullptr) {
    const auto extra = hook->evaluate(x, s, eps);
    f[A3] += extra[0];
    f[C1] += extra[1];
    f[D1] += extra[2];
  }
  return f;
}

/// Embeds a reduced state into the perturbed coordinates (D = D' = 0).
inline PerturbedState embed(const ReducedState& s) {
  PerturbedState e;
  e << s[0], s[1], s[2], s[3], s[4], s[5], 0.0, 0.0;
  return e;
}

}  // namespace wallforge
