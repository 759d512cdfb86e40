#pragma once

// Finite-difference discretisations of the linearisations along the orbit:
//   M_g (A, C) = ( -A'''' + (1 - 3A*^2 - g B*^2) A - 2g A* B* C ,
//                  eps^-2 C'' + (1 - g A*^2 - 3B*^2) C - 2g A* B* A )
//   L_g D      =   eps^-2 D'' + (1 - g A*^2 - B*^2) D
// on the orbit's own nodes, with decay (Dirichlet-type) end conditions, plus
// small-singular-value diagnostics and the solve behind the correction w1.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "wallforge/error.hpp"
#include "wallforge/heteroclinic.hpp"
#include "wallforge/linalg.hpp"
#include "wallforge/quadrature.hpp"

namespace wallforge {

enum class OperatorKind { Mg, Lg };

inline const char* to_string(OperatorKind k) { return k == OperatorKind::Mg ? "Mg" : "Lg"; }

struct SpectralSettings {
  int stencil = 9;          ///< nodes per finite-difference stencil
  int block = 6;            ///< subspace size of the inverse iteration
  int count = 4;            ///< singular values reported
  int max_iter = 400;
  double tol = 1e-11;       ///< relative change of the tracked singular values
  std::uint64_t seed = 20240611;
  double compat_tol = 1e-6;  ///< allowed |<rhs, B*>| / ||rhs|| for solve_Lg
};

struct DiscretizedOperator {
  OperatorKind kind = OperatorKind::Mg;
  std::vector<double> grid;
  Eigen::SparseMatrix<double> matrix;
  int components = 1;  ///< unknowns per node, interleaved
  int stencil = 9;
  std::string bc;
  std::vector<double> weights;  ///< trapezoid weights per node (L2 scaling)

  Eigen::Index size() const { return matrix.rows(); }

  Eigen::VectorXd apply(const Eigen::VectorXd& v) const {
    if (v.size() != matrix.cols()) throw precondition_error("operator applied to a vector of wrong size");
    return matrix * v;
  }

  /// Same operator plus shift * identity.
  DiscretizedOperator shifted(double shift) const {
    DiscretizedOperator out = *this;
    Eigen::SparseMatrix<double> id(matrix.rows(), matrix.cols());
    id.setIdentity();
    out.matrix = matrix + shift * id;
    return out;
  }

  /// Largest |i - j| over stored entries.
  Eigen::Index bandwidth() const {
    Eigen::Index bw = 0;
    for (Eigen::Index k = 0; k < matrix.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(matrix, k); it; ++it)
        bw = std::max<Eigen::Index>(bw, std::abs(it.row() - it.col()));
    return bw;
  }
};

namespace detail {

inline std::size_t stencil_start(std::size_t i, std::size_t n, int width) {
  const long lo = static_cast<long>(i) - width / 2;
  return static_cast<std::size_t>(std::clamp(lo, 0L, static_cast<long>(n) - width));
}

inline void require_grid(std::span<const double> grid, int stencil) {
  if (stencil < 5) throw precondition_error("stencil must hold at least 5 nodes for the fourth derivative");
  if (grid.size() < static_cast<std::size_t>(2 * stencil))
    throw precondition_error("grid too coarse for the fourth-derivative stencil");
}

/// Rescales each boundary-condition row to the magnitude of a reference
/// interior row. Unscaled unit rows make the end conditions cheap to violate
/// relative to rows of size eps^-2 h^-2 or h^-4, which would let smooth modes
/// ignore them and drift with the mesh.
inline void balance_rows(Eigen::SparseMatrix<double, Eigen::RowMajor>& m,
                         const std::vector<std::pair<int, int>>& bc_and_ref) {
  auto row_max = [&](int r) {
    double v = 0.0;
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(m, r); it; ++it)
      v = std::max(v, std::abs(it.value()));
    return v;
  };
  for (const auto& [bc, ref] : bc_and_ref) {
    const double f = row_max(ref) / row_max(bc);
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(m, bc); it; ++it) it.valueRef() *= f;
  }
}

}  // namespace detail

/// M_g for given profiles A*, B* sampled on the grid. Unknowns (A_i, C_i)
/// are interleaved; A = A' = 0 and C = 0 are imposed at both ends.
inline DiscretizedOperator assemble_Mg_profiles(std::span<const double> grid, std::span<const double> a,
                                                std::span<const double> b, const ModelParams& p,
                                                int stencil = 9) {
  detail::require_grid(grid, stencil);
  if (a.size() != grid.size() || b.size() != grid.size())
    throw precondition_error("profile length does not match grid");
  const std::size_t n = grid.size();
  const double g = p.g();
  const double ie2 = 1.0 / (p.epsilon * p.epsilon);
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(n * static_cast<std::size_t>(2 * stencil + 2));
  auto ia = [](std::size_t i) { return static_cast<int>(2 * i); };
  auto ic = [](std::size_t i) { return static_cast<int>(2 * i + 1); };
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = detail::stencil_start(i, n, stencil);
    const auto nodes = grid.subspan(lo, static_cast<std::size_t>(stencil));
    const bool a_end = i < 2 || i + 2 >= n;
    if (a_end) {
      const bool value_row = i == 0 || i + 1 == n;
      if (value_row) {
        t.emplace_back(ia(i), ia(i), 1.0);
      } else {
        // derivative condition at the adjacent end node
        const std::size_t e = i == 1 ? 0 : n - 1;
        const std::size_t elo = detail::stencil_start(e, n, stencil);
        const Eigen::MatrixXd w = fd_weights(grid[e], grid.subspan(elo, static_cast<std::size_t>(stencil)), 1);
        for (int k = 0; k < stencil; ++k) t.emplace_back(ia(i), ia(elo + static_cast<std::size_t>(k)), w(1, k));
      }
    } else {
      const Eigen::MatrixXd w = fd_weights(grid[i], nodes, 4);
      for (int k = 0; k < stencil; ++k) t.emplace_back(ia(i), ia(lo + static_cast<std::size_t>(k)), -w(4, k));
      t.emplace_back(ia(i), ia(i), 1.0 - 3.0 * a[i] * a[i] - g * b[i] * b[i]);
      t.emplace_back(ia(i), ic(i), -2.0 * g * a[i] * b[i]);
    }
    if (i == 0 || i + 1 == n) {
      t.emplace_back(ic(i), ic(i), 1.0);
    } else {
      const Eigen::MatrixXd w = fd_weights(grid[i], nodes, 2);
      for (int k = 0; k < stencil; ++k) t.emplace_back(ic(i), ic(lo + static_cast<std::size_t>(k)), ie2 * w(2, k));
      t.emplace_back(ic(i), ic(i), 1.0 - g * a[i] * a[i] - 3.0 * b[i] * b[i]);
      t.emplace_back(ic(i), ia(i), -2.0 * g * a[i] * b[i]);
    }
  }
  DiscretizedOperator op;
  op.kind = OperatorKind::Mg;
  op.grid.assign(grid.begin(), grid.end());
  op.components = 2;
  op.stencil = stencil;
  op.bc = "A = A' = 0 and C = 0 at both truncation points (rows scaled like the interior)";
  op.weights = trapezoid_weights(grid);
  Eigen::SparseMatrix<double, Eigen::RowMajor> m(static_cast<Eigen::Index>(2 * n), static_cast<Eigen::Index>(2 * n));
  m.setFromTriplets(t.begin(), t.end());
  detail::balance_rows(m, {{ia(0), ia(2)}, {ia(1), ia(2)}, {ia(n - 1), ia(n - 3)}, {ia(n - 2), ia(n - 3)},
                           {ic(0), ic(1)}, {ic(n - 1), ic(n - 2)}});
  op.matrix = m;
  op.matrix.makeCompressed();
  return op;
}

/// L_g for given profiles; D = 0 at both ends.
inline DiscretizedOperator assemble_Lg_profiles(std::span<const double> grid, std::span<const double> a,
                                                std::span<const double> b, const ModelParams& p,
                                                int stencil = 9) {
  detail::require_grid(grid, stencil);
  if (a.size() != grid.size() || b.size() != grid.size())
    throw precondition_error("profile length does not match grid");
  const std::size_t n = grid.size();
  const double g = p.g();
  const double ie2 = 1.0 / (p.epsilon * p.epsilon);
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(n * static_cast<std::size_t>(stencil + 1));
  for (std::size_t i = 0; i < n; ++i) {
    const int r = static_cast<int>(i);
    if (i == 0 || i + 1 == n) {
      t.emplace_back(r, r, 1.0);
      continue;
    }
    const std::size_t lo = detail::stencil_start(i, n, stencil);
    const Eigen::MatrixXd w = fd_weights(grid[i], grid.subspan(lo, static_cast<std::size_t>(stencil)), 2);
    for (int k = 0; k < stencil; ++k) t.emplace_back(r, static_cast<int>(lo) + k, ie2 * w(2, k));
    t.emplace_back(r, r, 1.0 - g * a[i] * a[i] - b[i] * b[i]);
  }
  DiscretizedOperator op;
  op.kind = OperatorKind::Lg;
  op.grid.assign(grid.begin(), grid.end());
  op.components = 1;
  op.stencil = stencil;
  op.bc = "D = 0 at both truncation points (rows scaled like the interior)";
  op.weights = trapezoid_weights(grid);
  Eigen::SparseMatrix<double, Eigen::RowMajor> m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  m.setFromTriplets(t.begin(), t.end());
  const int last = static_cast<int>(n) - 1;
  detail::balance_rows(m, {{0, 1}, {last, last - 1}});
  op.matrix = m;
  op.matrix.makeCompressed();
  return op;
}

namespace detail {

inline std::pair<std::vector<double>, std::vector<double>> profiles(const HeteroclinicSolution& sol) {
  std::vector<double> a, b;
  a.reserve(sol.path.nodes.size());
  b.reserve(sol.path.nodes.size());
  for (const auto& u : sol.path.nodes) {
    a.push_back(u[rslot::A0]);
    b.push_back(u[rslot::B0]);
  }
  return {a, b};
}

}  // namespace detail

inline DiscretizedOperator assemble_Mg(const HeteroclinicSolution& sol, const SpectralSettings& s = {}) {
  const auto [a, b] = detail::profiles(sol);
  return assemble_Mg_profiles(sol.mesh.nodes, a, b, sol.params, s.stencil);
}

inline DiscretizedOperator assemble_Lg(const HeteroclinicSolution& sol, const SpectralSettings& s = {}) {
  const auto [a, b] = detail::profiles(sol);
  return assemble_Lg_profiles(sol.mesh.nodes, a, b, sol.params, s.stencil);
}

/// Nodal (A*', B*') interleaved like the M_g unknowns.
inline Eigen::VectorXd translation_mode(const HeteroclinicSolution& sol) {
  const std::size_t n = sol.path.nodes.size();
  Eigen::VectorXd v(static_cast<Eigen::Index>(2 * n));
  for (std::size_t i = 0; i < n; ++i) {
    v[static_cast<Eigen::Index>(2 * i)] = sol.path.nodes[i][rslot::A1];
    v[static_cast<Eigen::Index>(2 * i + 1)] = sol.path.nodes[i][rslot::B1];
  }
  return v;
}

struct KernelReport {
  OperatorKind kind = OperatorKind::Mg;
  std::vector<double> smallest_singulars;  ///< ascending
  double kernel_angle = std::nan("");      ///< radians, M_g only
  double spectral_gap = std::nan("");      ///< sigma_2 / sigma_1
  int iterations = 0;
  Eigen::VectorXd kernel_vector;           ///< unweighted, unit L2 norm
};

namespace detail {

/// Diagonal scaling sqrt(w) per unknown.
inline Eigen::VectorXd sqrt_weights(const DiscretizedOperator& op) {
  Eigen::VectorXd s(op.size());
  for (Eigen::Index i = 0; i < op.size(); ++i)
    s[i] = std::sqrt(op.weights[static_cast<std::size_t>(i / op.components)]);
  return s;
}

}  // namespace detail

/// Smallest singular values of W^{1/2} M W^{-1/2} (W: trapezoid weights, so
/// the values approximate L2 operator quantities) by subspace inverse
/// iteration with sparse LU factors of the matrix and its transpose.
inline KernelReport kernel_diagnostics(const DiscretizedOperator& op, const HeteroclinicSolution* sol,
                                       const SpectralSettings& set = {}) {
  const Eigen::Index n = op.size();
  const int k = static_cast<int>(std::min<Eigen::Index>(set.block, n));
  const int count = std::min(set.count, k);
  if (count < 1) throw precondition_error("kernel_diagnostics: nothing to compute");
  const Eigen::VectorXd sw = detail::sqrt_weights(op);
  const Eigen::VectorXd isw = sw.cwiseInverse();
  Eigen::SparseMatrix<double> S = sw.asDiagonal() * op.matrix * isw.asDiagonal();
  S.makeCompressed();
  Eigen::SparseMatrix<double> St = S.transpose();
  St.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu, lut;
  lu.compute(S);
  lut.compute(St);
  if (lu.info() != Eigen::Success || lut.info() != Eigen::Success)
    throw Error(ErrorKind::NonConvergence, "kernel_diagnostics: sparse factorisation failed (singular operator)");

  // singular values below this are indistinguishable from rounding noise
  double row_sum = 0.0;
  {
    Eigen::VectorXd rows = Eigen::VectorXd::Zero(n);
    for (Eigen::Index c = 0; c < S.outerSize(); ++c)
      for (Eigen::SparseMatrix<double>::InnerIterator it(S, c); it; ++it) rows[it.row()] += std::abs(it.value());
    row_sum = rows.maxCoeff();
  }
  const double noise = 64.0 * std::numeric_limits<double>::epsilon() * row_sum;

  std::mt19937_64 rng(set.seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd X(n, k);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) X(i, j) = normal(rng);
  X = Eigen::HouseholderQR<Eigen::MatrixXd>(X).householderQ() * Eigen::MatrixXd::Identity(n, k);

  KernelReport rep;
  rep.kind = op.kind;
  std::vector<double> trace;

  // Phase 1 resolves sigma_1. Phase 2 repeats the iteration on the Wielandt
  // deflation S + c u1 v1^T (applied through Sherman-Morrison), which lifts
  // sigma_1 out of the way; iterating on S itself would let the 1/sigma_1^2
  // amplification of rounding swamp every other direction.
  struct Deflation {
    Eigen::VectorXd u, v, z, zt;  // z = S^-1 u, zt = S^-T v
    double c = 0.0, den = 1.0, dent = 1.0;
  };
  std::optional<Deflation> defl;
  auto solve_s = [&](const Eigen::MatrixXd& B) -> Eigen::MatrixXd {
    Eigen::MatrixXd Y = lu.solve(B);
    if (defl) Y -= defl->z * ((defl->c / defl->den) * (defl->v.transpose() * Y));
    return Y;
  };
  auto solve_st = [&](const Eigen::MatrixXd& B) -> Eigen::MatrixXd {
    Eigen::MatrixXd Y = lut.solve(B);
    if (defl) Y -= defl->zt * ((defl->c / defl->dent) * (defl->u.transpose() * Y));
    return Y;
  };
  auto apply_s = [&](const Eigen::MatrixXd& B) -> Eigen::MatrixXd {
    Eigen::MatrixXd Y = S * B;
    if (defl) Y += defl->u * (defl->c * (defl->v.transpose() * B));
    return Y;
  };

  auto iterate = [&](int tracked, Eigen::VectorXd& sig) {
    Eigen::VectorXd prev = Eigen::VectorXd::Zero(tracked);
    for (int it = 1; it <= set.max_iter; ++it) {
      const Eigen::MatrixXd Y = solve_s(solve_st(X));
      X = Eigen::HouseholderQR<Eigen::MatrixXd>(Y).householderQ() * Eigen::MatrixXd::Identity(n, k);
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(apply_s(X), Eigen::ComputeThinV);
      sig = svd.singularValues().reverse();
      X = X * svd.matrixV().rowwise().reverse();
      trace.push_back(sig[0]);
      ++rep.iterations;
      double change = 0.0;
      for (int j = 0; j < tracked; ++j) {
        const double d = std::abs(sig[j] - prev[j]);
        change = std::max(change, d <= noise ? 0.0 : d / sig[j]);
      }
      prev = sig.head(tracked);
      if (it > 2 && change <= set.tol) return;
    }
    std::ostringstream os;
    os << "inverse iteration did not converge in " << set.max_iter << " sweeps; sigma_min trace:";
    for (std::size_t i = trace.size() > 5 ? trace.size() - 5 : 0; i < trace.size(); ++i) os << ' ' << trace[i];
    throw Error(ErrorKind::NonConvergence, os.str());
  };

  Eigen::VectorXd sig;
  iterate(1, sig);
  const Eigen::VectorXd v1 = X.col(0);
  rep.smallest_singulars.push_back(sig[0]);
  if (count > 1) {
    Deflation d;
    d.v = v1;
    d.u = lut.solve(v1);
    d.u.normalize();
    d.c = 10.0 * sig[k - 1] + 1.0;
    d.z = lu.solve(d.u);
    d.zt = lut.solve(d.v);
    d.den = 1.0 + d.c * d.v.dot(d.z);
    d.dent = 1.0 + d.c * d.u.dot(d.zt);
    defl = std::move(d);
    X.col(0).setZero();
    for (Eigen::Index i = 0; i < n; ++i) X(i, 0) = normal(rng);
    X = Eigen::HouseholderQR<Eigen::MatrixXd>(X).householderQ() * Eigen::MatrixXd::Identity(n, k);
    iterate(count - 1, sig);
    for (int j = 0; j + 1 < count; ++j) rep.smallest_singulars.push_back(sig[j]);
    std::sort(rep.smallest_singulars.begin() + 1, rep.smallest_singulars.end());
  }
  X = v1;
  Eigen::VectorXd kv = isw.cwiseProduct(X.col(0));
  rep.kernel_vector = kv / kv.norm();
  if (count >= 2) rep.spectral_gap = rep.smallest_singulars[1] / rep.smallest_singulars[0];
  if (op.kind == OperatorKind::Mg && sol != nullptr) {
    const Eigen::VectorXd t = sw.cwiseProduct(translation_mode(*sol));
    if (t.size() != n) throw precondition_error("kernel_diagnostics: solution does not match operator grid");
    const Eigen::VectorXd x0 = X.col(0);
    const double c = std::abs(t.dot(x0)) / t.norm();
    const double sres = (t / t.norm() - (t.dot(x0) / t.norm()) * x0).norm();
    rep.kernel_angle = std::atan2(sres, c);
  }
  return rep;
}

/// Weighted inner product of two grid functions with exponential tails.
inline double grid_inner(std::span<const double> grid, std::span<const double> f, std::span<const double> g) {
  std::vector<double> prod(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) prod[i] = f[i] * g[i];
  return integrate_nodes(grid, node_weights(grid), prod).total();
}

struct LgSolve {
  Eigen::VectorXd w;
  double compat_defect = 0.0;           ///< |<rhs, B*>|
  double compat_defect_relative = 0.0;  ///< |<rhs, B*>| / ||rhs||
};

/// Solves L_g w = rhs after checking <rhs, B*> = 0 (plain L2 on the grid,
/// with exponential tails) to the configured tolerance.
inline LgSolve solve_Lg(const DiscretizedOperator& op, const Eigen::VectorXd& rhs, const Eigen::VectorXd& b_star,
                        double compat_tol = 1e-6) {
  if (op.kind != OperatorKind::Lg) throw precondition_error("solve_Lg expects an L_g operator");
  if (rhs.size() != op.size() || b_star.size() != op.size())
    throw precondition_error("solve_Lg: vector size does not match operator");
  LgSolve out;
  const std::span<const double> x(op.grid);
  const double rn = std::sqrt(std::max(0.0, grid_inner(x, {rhs.data(), static_cast<std::size_t>(rhs.size())},
                                                      {rhs.data(), static_cast<std::size_t>(rhs.size())})));
  out.compat_defect = std::abs(grid_inner(x, {rhs.data(), static_cast<std::size_t>(rhs.size())},
                                          {b_star.data(), static_cast<std::size_t>(b_star.size())}));
  out.compat_defect_relative = rn > 0.0 ? out.compat_defect / rn : 0.0;
  if (rn == 0.0) {
    out.w = Eigen::VectorXd::Zero(op.size());
    return out;
  }
  if (out.compat_defect_relative > compat_tol) {
    std::ostringstream os;
    os << "solve_Lg: right-hand side is not orthogonal to B*; <rhs, B*> = " << out.compat_defect
       << " (relative " << out.compat_defect_relative << ", tolerance " << compat_tol << ")";
    throw precondition_error(os.str());
  }
  Eigen::VectorXd r = rhs;
  r[0] = 0.0;
  r[r.size() - 1] = 0.0;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(op.matrix);
  if (lu.info() != Eigen::Success) throw Error(ErrorKind::NonConvergence, "solve_Lg: singular operator");
  out.w = lu.solve(r);
  return out;
}

struct W1Result {
  Eigen::VectorXd w;
  Eigen::VectorXd rhs;
  double projection_integral = 0.0;  ///< integral of B*^2 A* A*'
  double b_b1_integral = 0.0;        ///< integral of B* B*' (1/2 exactly on the line)
  double compat_defect = 0.0;
  double compat_defect_relative = 0.0;
  double l2_norm = 0.0;
  double h2_norm = 0.0;  ///< ||w|| + ||w'|| + ||w''|| in L2 on the truncated line
  double max_norm = 0.0;
};

inline W1Result compute_w1(const HeteroclinicSolution& sol, const NormalFormCoeffs& coeffs,
                           const SpectralSettings& set = {}) {
  const DiscretizedOperator op = assemble_Lg(sol, set);
  const std::size_t n = sol.path.nodes.size();
  W1Result out;
  const std::span<const double> x(sol.mesh.nodes);
  std::vector<double> f(n), bb(n);
  Eigen::VectorXd b(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& u = sol.path.nodes[i];
    f[i] = u[rslot::B0] * u[rslot::B0] * u[rslot::A0] * u[rslot::A1];
    bb[i] = u[rslot::B0] * u[rslot::B1];
    b[static_cast<Eigen::Index>(i)] = u[rslot::B0];
  }
  const auto wts = node_weights(x);
  out.projection_integral = integrate_nodes(x, wts, f).total();
  out.b_b1_integral = integrate_nodes(x, wts, bb).total();
  out.rhs.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& u = sol.path.nodes[i];
    out.rhs[static_cast<Eigen::Index>(i)] =
        coeffs.c9 * (u[rslot::B0] * u[rslot::A0] * u[rslot::A1] - 2.0 * u[rslot::B1] * out.projection_integral);
  }
  const LgSolve s = solve_Lg(op, out.rhs, b, set.compat_tol);
  out.w = s.w;
  out.compat_defect = s.compat_defect;
  out.compat_defect_relative = s.compat_defect_relative;

  std::vector<double> w0(n), w1(n), w2(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = detail::stencil_start(i, n, set.stencil);
    const Eigen::MatrixXd c = fd_weights(x[i], x.subspan(lo, static_cast<std::size_t>(set.stencil)), 2);
    double d1 = 0.0, d2 = 0.0;
    for (int k = 0; k < set.stencil; ++k) {
      d1 += c(1, k) * out.w[static_cast<Eigen::Index>(lo) + k];
      d2 += c(2, k) * out.w[static_cast<Eigen::Index>(lo) + k];
    }
    w0[i] = out.w[static_cast<Eigen::Index>(i)] * out.w[static_cast<Eigen::Index>(i)];
    w1[i] = d1 * d1;
    w2[i] = d2 * d2;
  }
  double s0 = 0.0, s1 = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    s0 += wts[i] * w0[i];
    s1 += wts[i] * w1[i];
    s2 += wts[i] * w2[i];
  }
  out.l2_norm = std::sqrt(std::max(0.0, s0));
  out.h2_norm = out.l2_norm + std::sqrt(std::max(0.0, s1)) + std::sqrt(std::max(0.0, s2));
  out.max_norm = out.w.lpNorm<Eigen::Infinity>();
  return out;
}

}  // namespace wallforge
