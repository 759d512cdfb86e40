#pragma once

// Small numerical kernels: banded LU with partial pivoting, Gauss-Legendre
// collocation tableaux and finite-difference weights on arbitrary nodes.

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "wallforge/error.hpp"

namespace wallforge {

/// Square banded matrix with kl sub- and ku super-diagonals, factorised in
/// place with row interchanges (fill widens the upper band to kl + ku).
class BandedLU {
 public:
  BandedLU(int n, int kl, int ku)
      : n_(n), kl_(kl), ku_(ku), width_(2 * kl + ku + 1),
        a_(static_cast<std::size_t>(n) * static_cast<std::size_t>(2 * kl + ku + 1), 0.0),
        mult_(static_cast<std::size_t>(n) * static_cast<std::size_t>(kl), 0.0),
        piv_(static_cast<std::size_t>(n), 0) {}

  int size() const { return n_; }
  int lower() const { return kl_; }
  int upper() const { return ku_; }

  bool in_band(int i, int j) const { return j >= i - kl_ && j <= i + ku_; }

  double& at(int i, int j) {
    if (!in_band(i, j)) throw precondition_error("banded matrix: entry outside band");
    return a_[idx(i, j)];
  }

  void factorize() {
    for (int k = 0; k < n_; ++k) {
      const int last = std::min(n_ - 1, k + kl_);
      int p = k;
      double best = std::abs(a_[idx(k, k)]);
      for (int i = k + 1; i <= last; ++i) {
        const double v = std::abs(a_[idx(i, k)]);
        if (v > best) {
          best = v;
          p = i;
        }
      }
      piv_[static_cast<std::size_t>(k)] = p;
      if (best == 0.0) throw Error(ErrorKind::NonConvergence, "banded LU: singular matrix");
      const int jmax = std::min(n_ - 1, k + kl_ + ku_);
      if (p != k) {
        for (int j = k; j <= jmax; ++j) std::swap(a_[idx(k, j)], a_[idx(p, j)]);
      }
      const double pivot = a_[idx(k, k)];
      for (int i = k + 1; i <= last; ++i) {
        const double m = a_[idx(i, k)] / pivot;
        mult_[static_cast<std::size_t>(k) * kl_ + static_cast<std::size_t>(i - k - 1)] = m;
        a_[idx(i, k)] = 0.0;
        if (m == 0.0) continue;
        for (int j = k + 1; j <= jmax; ++j) a_[idx(i, j)] -= m * a_[idx(k, j)];
      }
    }
    factored_ = true;
  }

  void solve_in_place(std::span<double> b) const {
    if (!factored_) throw precondition_error("banded LU: solve before factorize");
    if (static_cast<int>(b.size()) != n_) throw precondition_error("banded LU: rhs size");
    for (int k = 0; k < n_; ++k) {
      const int p = piv_[static_cast<std::size_t>(k)];
      if (p != k) std::swap(b[static_cast<std::size_t>(k)], b[static_cast<std::size_t>(p)]);
      const int last = std::min(n_ - 1, k + kl_);
      for (int i = k + 1; i <= last; ++i) {
        b[static_cast<std::size_t>(i)] -=
            mult_[static_cast<std::size_t>(k) * kl_ + static_cast<std::size_t>(i - k - 1)] *
            b[static_cast<std::size_t>(k)];
      }
    }
    for (int k = n_ - 1; k >= 0; --k) {
      double s = b[static_cast<std::size_t>(k)];
      const int jmax = std::min(n_ - 1, k + kl_ + ku_);
      for (int j = k + 1; j <= jmax; ++j) s -= a_[idx(k, j)] * b[static_cast<std::size_t>(j)];
      b[static_cast<std::size_t>(k)] = s / a_[idx(k, k)];
    }
  }

 private:
  std::size_t idx(int i, int j) const {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(j - i + kl_);
  }

  int n_, kl_, ku_, width_;
  std::vector<double> a_;
  std::vector<double> mult_;
  std::vector<int> piv_;
  bool factored_ = false;
};

/// Gauss-Legendre nodes and weights on [0, 1].
inline void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  if (n < 1) throw precondition_error("Gauss-Legendre order must be >= 1");
  nodes.assign(static_cast<std::size_t>(n), 0.0);
  weights.assign(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    // ascending order on [0, 1]
    nodes[static_cast<std::size_t>(n - 1 - i)] = 0.5 * (x + 1.0);
    weights[static_cast<std::size_t>(n - 1 - i)] = 1.0 / ((1.0 - x * x) * dp * dp);
  }
}

/// Collocation tableau at the Gauss points: c (nodes), A (stage weights),
/// b (quadrature weights), plus the Lagrange basis in monomial form so the
/// collocation polynomial can be evaluated anywhere inside a cell.
struct GaussScheme {
  int stages = 0;
  Eigen::VectorXd c, b;
  Eigen::MatrixXd a;
  Eigen::MatrixXd basis;  ///< basis(m, k): coefficient of t^m in l_k(t)

  explicit GaussScheme(int s) : stages(s) {
    std::vector<double> nodes, weights;
    gauss_legendre(s, nodes, weights);
    c = Eigen::Map<Eigen::VectorXd>(nodes.data(), s);
    Eigen::MatrixXd V(s, s);
    for (int i = 0; i < s; ++i)
      for (int m = 0; m < s; ++m) V(i, m) = std::pow(c[i], m);
    basis = V.inverse();
    a.resize(s, s);
    b.resize(s);
    for (int k = 0; k < s; ++k) {
      b[k] = integral(k, 1.0);
      for (int i = 0; i < s; ++i) a(i, k) = integral(k, c[i]);
    }
  }

  /// Integral of l_k over [0, theta].
  double integral(int k, double theta) const {
    double v = 0.0, t = theta;
    for (int m = 0; m < stages; ++m) {
      v += basis(m, k) * t / (m + 1);
      t *= theta;
    }
    return v;
  }

  double value(int k, double theta) const {
    double v = 0.0, t = 1.0;
    for (int m = 0; m < stages; ++m) {
      v += basis(m, k) * t;
      t *= theta;
    }
    return v;
  }
};

/// Finite-difference weights (Fornberg) for derivatives 0..m at z from the
/// nodes x. Returns a (m+1) x n matrix; row d holds the weights of d^d/dx^d.
inline Eigen::MatrixXd fd_weights(double z, std::span<const double> x, int m) {
  const int n = static_cast<int>(x.size());
  if (n < m + 1) throw precondition_error("fd_weights: too few nodes for derivative order");
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(m + 1, n);
  double c1 = 1.0;
  double c4 = x[0] - z;
  c(0, 0) = 1.0;
  for (int i = 1; i < n; ++i) {
    const int mn = std::min(i, m);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[static_cast<std::size_t>(i)] - z;
    for (int j = 0; j < i; ++j) {
      const double c3 = x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(j)];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k)
          c(k, i) = c1 * (k * c(k - 1, i - 1) - c5 * c(k, i - 1)) / c2;
        c(0, i) = -c1 * c5 * c(0, i - 1) / c2;
      }
      for (int k = mn; k >= 1; --k) c(k, j) = (c4 * c(k, j) - k * c(k - 1, j)) / c3;
      c(0, j) = c4 * c(0, j) / c3;
    }
    c1 = c2;
  }
  return c;
}

}  // namespace wallforge
