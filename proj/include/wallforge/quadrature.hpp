#pragma once

// Integrals along a computed orbit: composite Gauss rules on the collocation
// interpolant, node-based weights for grid functions, and exponential tail
// corrections beyond the truncation points.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wallforge/error.hpp"
#include "wallforge/heteroclinic.hpp"
#include "wallforge/linalg.hpp"

namespace wallforge {

/// Smooth step: 1 on (-inf, -1], 0 on [0, inf), quintic in between (C^2).
struct Cutoff {
  static double value(double x) {
    if (x <= -1.0) return 1.0;
    if (x >= 0.0) return 0.0;
    const double t = x + 1.0;
    return 1.0 - t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
  }
  static double d1(double x) {
    if (x <= -1.0 || x >= 0.0) return 0.0;
    const double t = x + 1.0;
    return -30.0 * t * t * (1.0 - t) * (1.0 - t);
  }
  static double d4(double x) {
    if (x <= -1.0 || x >= 0.0) return 0.0;
    return -(720.0 * (x + 1.0) - 360.0);
  }
};

enum class Integrand {
  ASecondSquared,       ///< A''^2
  ATimesAPrimeCubed,    ///< A A'^3
  ASquaredA1A2,         ///< A^2 A' A''
  AMinusCutoffTimesA1,  ///< (A - chi) A'
  OneMinusA2A1Cutoff,   ///< (1 - A^2) A' chi
  AB2PrimeCutoff,       ///< (A B^2)' chi
  Cutoff4TimesA1,       ///< chi'''' A'
  A1TimesACubedMinusCutoff,  ///< A' (A^3 - chi)
  QuadraticA,           ///< 3 A A'^3 + 2g B B' A'^2 + g A A' B'^2
  QuadraticB,           ///< g B B' A'^2 + 2g A A' B'^2 + B B'^3
  B2AA1,                ///< B^2 A A'
  A2TimesA1,            ///< A'' A'
  ATimesA1,             ///< A A'
  BTimesB1,             ///< B B'
};

inline constexpr std::array<Integrand, 14> kAllIntegrands{
    Integrand::ASecondSquared, Integrand::ATimesAPrimeCubed, Integrand::ASquaredA1A2,
    Integrand::AMinusCutoffTimesA1, Integrand::OneMinusA2A1Cutoff, Integrand::AB2PrimeCutoff,
    Integrand::Cutoff4TimesA1, Integrand::A1TimesACubedMinusCutoff, Integrand::QuadraticA,
    Integrand::QuadraticB, Integrand::B2AA1, Integrand::A2TimesA1, Integrand::ATimesA1,
    Integrand::BTimesB1};

inline std::string_view integrand_name(Integrand id) {
  switch (id) {
    case Integrand::ASecondSquared: return "a2_squared";
    case Integrand::ATimesAPrimeCubed: return "a_a1_cubed";
    case Integrand::ASquaredA1A2: return "a_squared_a1_a2";
    case Integrand::AMinusCutoffTimesA1: return "a_minus_cutoff_a1";
    case Integrand::OneMinusA2A1Cutoff: return "one_minus_a_squared_a1_cutoff";
    case Integrand::AB2PrimeCutoff: return "a_b_squared_prime_cutoff";
    case Integrand::Cutoff4TimesA1: return "cutoff4_a1";
    case Integrand::A1TimesACubedMinusCutoff: return "a1_a_cubed_minus_cutoff";
    case Integrand::QuadraticA: return "quadratic_a";
    case Integrand::QuadraticB: return "quadratic_b";
    case Integrand::B2AA1: return "b_squared_a_a1";
    case Integrand::A2TimesA1: return "a2_a1";
    case Integrand::ATimesA1: return "a_a1";
    case Integrand::BTimesB1: return "b_b1";
  }
  return "unknown";
}

inline Integrand integrand_from_name(std::string_view name) {
  for (Integrand id : kAllIntegrands)
    if (integrand_name(id) == name) return id;
  throw precondition_error("unknown integrand '" + std::string(name) + "'");
}

/// Pointwise value of a catalog integrand given the state and its derivative.
inline double integrand_value(Integrand id, double x, const ReducedState& u, const ReducedState& du,
                              double g) {
  (void)du;
  const double a = u[rslot::A0], a1 = u[rslot::A1], a2 = u[rslot::A2];
  const double b = u[rslot::B0], b1 = u[rslot::B1];
  switch (id) {
    case Integrand::ASecondSquared: return a2 * a2;
    case Integrand::ATimesAPrimeCubed: return a * a1 * a1 * a1;
    case Integrand::ASquaredA1A2: return a * a * a1 * a2;
    case Integrand::AMinusCutoffTimesA1: return (a - Cutoff::value(x)) * a1;
    case Integrand::OneMinusA2A1Cutoff: return (1.0 - a * a) * a1 * Cutoff::value(x);
    case Integrand::AB2PrimeCutoff: return (a1 * b * b + 2.0 * a * b * b1) * Cutoff::value(x);
    case Integrand::Cutoff4TimesA1: return Cutoff::d4(x) * a1;
    case Integrand::A1TimesACubedMinusCutoff: return a1 * (a * a * a - Cutoff::value(x));
    case Integrand::QuadraticA:
      return 3.0 * a * a1 * a1 * a1 + 2.0 * g * b * b1 * a1 * a1 + g * a * a1 * b1 * b1;
    case Integrand::QuadraticB:
      return g * b * b1 * a1 * a1 + 2.0 * g * a * a1 * b1 * b1 + b * b1 * b1 * b1;
    case Integrand::B2AA1: return b * b * a * a1;
    case Integrand::A2TimesA1: return a2 * a1;
    case Integrand::ATimesA1: return a * a1;
    case Integrand::BTimesB1: return b * b1;
  }
  return 0.0;
}

struct QuadratureResult {
  double interior = 0.0;
  double left_tail = 0.0;
  double right_tail = 0.0;
  bool left_tail_skipped = false;
  bool right_tail_skipped = false;
  double total() const { return interior + left_tail + right_tail; }
};

struct QuadratureOptions {
  int points = 0;             ///< Gauss points per cell; 0 means 2s + 1
  bool tails = true;
  std::size_t tail_window = 12;  ///< nodes used to fit the tail rate
  std::vector<double> breakpoints{-1.0, 0.0};
};

namespace detail {

/// Integral beyond the end of a sampled, exponentially decaying function.
/// xs ordered away from the interval interior towards the truncation point;
/// returns nullopt when the samples do not look like a one-signed decay.
inline std::optional<double> exponential_tail(std::span<const double> xs, std::span<const double> fs) {
  if (xs.size() < 8) return std::nullopt;
  const double sign = fs.back() > 0.0 ? 1.0 : -1.0;
  std::vector<double> mag(fs.size());
  for (std::size_t i = 0; i < fs.size(); ++i) {
    if (!(sign * fs[i] > 0.0)) return std::nullopt;
    mag[i] = sign * fs[i];
  }
  const DecayFit fit = decay_rate_fit(xs, mag, 0, xs.size());
  // decay towards the truncation point: |f| shrinks as x moves outward
  const double outward = xs.back() > xs.front() ? 1.0 : -1.0;
  const double rate = -outward * fit.slope;
  if (!(rate > 0.0)) return std::nullopt;
  return fs.back() / rate;
}

}  // namespace detail

using PointIntegrand = std::function<double(double x, const ReducedState& u, const ReducedState& du)>;

/// Composite Gauss quadrature of f along the orbit's interpolant, split at
/// the breakpoints, plus exponential tails fitted from f at the end nodes.
inline QuadratureResult integrate_profile(const HeteroclinicSolution& sol, const PointIntegrand& f,
                                          const QuadratureOptions& opt = {}) {
  const Mesh& m = sol.mesh;
  const int pts = opt.points > 0 ? opt.points : 2 * m.collocation_order + 1;
  std::vector<double> gx, gw;
  gauss_legendre(pts, gx, gw);
  QuadratureResult out;
  long double acc = 0.0L;
  for (std::size_t j = 0; j < m.cells(); ++j) {
    std::vector<double> cuts{0.0};
    for (double b : opt.breakpoints)
      if (b > m.nodes[j] && b < m.nodes[j + 1]) cuts.push_back((b - m.nodes[j]) / m.width(j));
    cuts.push_back(1.0);
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
      const double t0 = cuts[c], t1 = cuts[c + 1];
      for (int q = 0; q < pts; ++q) {
        const double th = t0 + (t1 - t0) * gx[static_cast<std::size_t>(q)];
        const double x = m.nodes[j] + th * m.width(j);
        acc += static_cast<long double>(gw[static_cast<std::size_t>(q)] * (t1 - t0) * m.width(j) *
                                        f(x, sol.state_in_cell(j, th), sol.derivative_in_cell(j, th)));
      }
    }
  }
  out.interior = static_cast<double>(acc);
  if (!opt.tails) return out;

  const std::size_t n = m.nodes.size();
  const std::size_t w = std::min(opt.tail_window, n / 2);
  {
    std::vector<double> xs, fs;
    for (std::size_t i = w; i-- > 0;) {
      const std::size_t j = std::min(i, m.cells() - 1);
      const double th = i == m.cells() ? 1.0 : 0.0;
      xs.push_back(m.nodes[i]);
      fs.push_back(f(m.nodes[i], sol.state_in_cell(j, th), sol.derivative_in_cell(j, th)));
    }
    const auto t = detail::exponential_tail(xs, fs);
    out.left_tail = t.value_or(0.0);
    out.left_tail_skipped = !t;
  }
  {
    std::vector<double> xs, fs;
    for (std::size_t i = n - w; i < n; ++i) {
      const std::size_t j = std::min(i, m.cells() - 1);
      const double th = i == m.cells() ? 1.0 : 0.0;
      xs.push_back(m.nodes[i]);
      fs.push_back(f(m.nodes[i], sol.state_in_cell(j, th), sol.derivative_in_cell(j, th)));
    }
    const auto t = detail::exponential_tail(xs, fs);
    out.right_tail = t.value_or(0.0);
    out.right_tail_skipped = !t;
  }
  return out;
}

/// Catalog quadrature. Requires the decay fits of the solution, which the
/// tail corrections stand in for.
inline QuadratureResult quadrature(const HeteroclinicSolution& sol, Integrand id,
                                   const QuadratureOptions& opt = {}) {
  if (opt.tails && (!sol.decay_fits.b_minus || !sol.decay_fits.b_plus || !sol.decay_fits.a_plus))
    throw precondition_error("quadrature: solution lacks decay fits for the tail corrections");
  const double g = sol.params.g();
  return integrate_profile(
      sol, [&](double x, const ReducedState& u, const ReducedState& du) { return integrand_value(id, x, u, du, g); },
      opt);
}

/// Interpolatory weights for grid functions: every cell integrates the
/// degree order-1 interpolant through the nearest `order` nodes.
inline std::vector<double> node_weights(std::span<const double> x, int order = 6) {
  const std::size_t n = x.size();
  if (n < static_cast<std::size_t>(order)) throw precondition_error("node_weights: too few nodes");
  std::vector<double> w(n, 0.0), gx, gw;
  gauss_legendre((order + 1) / 2 + 1, gx, gw);
  for (std::size_t j = 0; j + 1 < n; ++j) {
    const long lo = std::clamp(static_cast<long>(j) - order / 2 + 1, 0L, static_cast<long>(n) - order);
    const auto stencil = x.subspan(static_cast<std::size_t>(lo), static_cast<std::size_t>(order));
    const double h = x[j + 1] - x[j];
    for (std::size_t q = 0; q < gx.size(); ++q) {
      const Eigen::MatrixXd c = fd_weights(x[j] + gx[q] * h, stencil, 0);
      for (int k = 0; k < order; ++k) w[static_cast<std::size_t>(lo + k)] += gw[q] * h * c(0, k);
    }
  }
  return w;
}

inline std::vector<double> trapezoid_weights(std::span<const double> x) {
  std::vector<double> w(x.size(), 0.0);
  for (std::size_t j = 0; j + 1 < x.size(); ++j) {
    const double h = 0.5 * (x[j + 1] - x[j]);
    w[j] += h;
    w[j + 1] += h;
  }
  return w;
}

/// Integral of a grid function with node weights and exponential tails.
inline QuadratureResult integrate_nodes(std::span<const double> x, std::span<const double> weights,
                                        std::span<const double> f, std::size_t tail_window = 12) {
  if (x.size() != f.size() || x.size() != weights.size())
    throw precondition_error("integrate_nodes: size mismatch");
  QuadratureResult out;
  long double acc = 0.0L;
  for (std::size_t i = 0; i < x.size(); ++i) acc += static_cast<long double>(weights[i] * f[i]);
  out.interior = static_cast<double>(acc);
  const std::size_t w = std::min(tail_window, x.size() / 2);
  std::vector<double> xs, fs;
  for (std::size_t i = w; i-- > 0;) {
    xs.push_back(x[i]);
    fs.push_back(f[i]);
  }
  auto t = detail::exponential_tail(xs, fs);
  out.left_tail = t.value_or(0.0);
  out.left_tail_skipped = !t;
  xs.assign(x.end() - static_cast<long>(w), x.end());
  fs.assign(f.end() - static_cast<long>(w), f.end());
  t = detail::exponential_tail(xs, fs);
  out.right_tail = t.value_or(0.0);
  out.right_tail_skipped = !t;
  return out;
}

}  // namespace wallforge
