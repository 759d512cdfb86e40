// Acceptance report: one PASS/FAIL line per criterion.
//
// The default mode exits 0 once every criterion has been evaluated, so the
// ctest entry checks that the report is produced; `--strict` exits with the
// number of failing criteria.

#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "wallforge/wallforge.hpp"

using namespace wallforge;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

ModelParams params(double eps, double delta) {
  ModelParams p = default_run_params();
  p.epsilon = eps;
  p.delta = delta;
  return p;
}

std::string fmt(const char* f, auto... v) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, v...);
  return buf;
}

bool near_root(const auto& roots, std::complex<double> z, double tol) {
  for (const auto& r : roots)
    if (std::abs(r - z) <= tol) return true;
  return false;
}

// Solutions shared between criteria, computed once.
struct Cache {
  std::map<std::pair<double, double>, HeteroclinicSolution> solved;
  std::map<std::pair<double, double>, std::string> failed;
  std::map<std::pair<double, double>, double> seconds;

  const HeteroclinicSolution* get(double eps, double delta) {
    const auto key = std::pair{eps, delta};
    if (auto it = solved.find(key); it != solved.end()) return &it->second;
    if (failed.count(key)) return nullptr;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      solved.emplace(key, solve_heteroclinic(params(eps, delta)));
    } catch (const Error& e) {
      failed[key] = e.what();
    }
    seconds[key] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return failed.count(key) ? nullptr : &solved.at(key);
  }
};

Cache cache;

Outcome reversibility() {
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_real_distribution<double> pe(0.01, 0.2), pd(0.2, 1.5), pk(-0.5, 0.5);
  double worst = 0.0;
  for (int n = 0; n < 10000; ++n) {
    ModelParams p = params(pe(rng), pd(rng));
    p.k_minus = pk(rng);
    p.omega_tilde_plus = pk(rng);
    ReducedState s;
    for (int k = 0; k < 6; ++k) s[k] = u(rng);
    const auto f = reduced_rhs(s, p);
    worst = std::max(worst, (reduced_rhs(apply_reverser(s), p) + apply_reverser(f)).norm() / (1.0 + f.norm()));
    PerturbedState q;
    for (int k = 0; k < 8; ++k) q[k] = u(rng);
    const auto g = perturbed_rhs(0.0, q, p);
    worst = std::max(worst, (perturbed_rhs(0.0, apply_reverser(q), p) + apply_reverser(g)).norm() / (1.0 + g.norm()));
  }
  return {worst <= 1e-12, fmt("worst relative defect %.3e over 10^4 states", worst)};
}

Outcome conservation() {
  namespace ode = boost::numeric::odeint;
  const ModelParams p = params(0.1, 0.6);
  const auto es = linearize_at_minus(p);
  const auto lam = es.roots();
  std::string out;
  bool all = true;
  // every unstable direction: the real B root and the real and imaginary
  // parts of the complex A pair
  for (int j = 0; j < 6; ++j) {
    const auto l = lam[static_cast<std::size_t>(j)];
    if (l.real() <= 0.0 || l.imag() < 0.0) continue;
    using S = std::array<double, 6>;
    S u;
    const Eigen::VectorXd v = es.basis.col(j).real().normalized();
    for (int k = 0; k < 6; ++k) u[static_cast<std::size_t>(k)] = minus_state()[k] + 1e-3 * v[k];
    const double w0 = oracle::first_integral(u, p.epsilon, p.g());
    double drift = 0.0, reached = 0.0;
    bool escaped = false;
    auto field = [&](const S& x, S& dx, double) { dx = oracle::reduced_field(x, p.epsilon, p.g()); };
    auto stepper = ode::make_controlled(1e-13, 1e-13, ode::runge_kutta_fehlberg78<S>());
    struct Escape {};
    try {
      ode::integrate_adaptive(stepper, field, u, 0.0, 50.0, 0.01, [&](const S& x, double t) {
        double n = 0.0;
        for (double c : x) n = std::max(n, std::abs(c));
        if (!std::isfinite(n) || n > 1e3) throw Escape{};
        reached = t;
        drift = std::max(drift, std::abs(oracle::first_integral(x, p.epsilon, p.g()) - w0));
      });
    } catch (const Escape&) {
      escaped = true;
    }
    const bool ok = !escaped && drift <= 1e-10;
    all = all && ok;
    out += fmt("%sdir Re=%.3f: drift %.2e to x=%.2f%s", out.empty() ? "" : "; ", l.real(), drift, reached,
               escaped ? " (escaped |u|>1e3)" : "");
  }
  return {all, out};
}

Outcome eigenstructure() {
  const ModelParams p = params(0.1, 0.6);
  const auto m = linearize_at_minus(p), q = linearize_at_plus(p);
  bool ok = m.unstable_dim == 3 && q.stable_dim == 3;
  for (int k = 0; k < 4; ++k) {
    ok = ok && near_root(m.a_block_roots, std::polar(std::pow(2.0, 0.25), std::numbers::pi * (2 * k + 1) / 4.0), 1e-10);
    ok = ok && near_root(q.a_block_roots, std::polar(std::sqrt(0.6), std::numbers::pi * (2 * k + 1) / 4.0), 1e-10);
  }
  for (double s : {1.0, -1.0}) {
    ok = ok && near_root(m.b_block_roots, {s * 0.06, 0.0}, 1e-10);
    ok = ok && near_root(q.b_block_roots, {s * std::sqrt(2.0) * 0.1, 0.0}, 1e-10);
  }
  return {ok, fmt("dims %d/%d at M-, %d/%d at M+", m.unstable_dim, m.stable_dim, q.unstable_dim, q.stable_dim)};
}

const std::vector<double> kSolveEps{0.05, 0.1};
const std::vector<double> kSolveDelta{0.5, 0.6, 0.8};

Outcome solves() {
  bool all = true;
  std::string out;
  for (double e : kSolveEps) {
    for (double d : kSolveDelta) {
      const auto* s = cache.get(e, d);
      const double t = cache.seconds.at({e, d});
      if (!s) {
        all = false;
        out += fmt("; (%.2g,%.2g) failed: %s", e, d, cache.failed.at({e, d}).c_str());
        continue;
      }
      double wg = 0.0;
      for (double w : s->wg_profile) wg = std::max(wg, std::abs(w));
      const auto pos = positivity(s->mesh, s->states());
      const bool ok = s->newton_residual <= 1e-10 && wg <= 1e-6 && pos.ok() && t <= 30.0;
      all = all && ok;
      out += fmt("; (%.2g,%.2g) res %.1e wg %.1e minA %.2e minB %.2e minB' %.2e %.1fs", e, d, s->newton_residual, wg,
                 pos.min_a, pos.min_b, pos.min_bp, t);
    }
  }
  return {all, out.substr(2)};
}

Outcome decay_rates() {
  bool all = true;
  std::string out;
  for (double e : kSolveEps) {
    for (double d : kSolveDelta) {
      const auto* s = cache.get(e, d);
      if (!s) {
        all = false;
        continue;
      }
      const auto& f = s->decay_fits;
      const bool have = f.b_minus && f.b_plus && f.a_plus;
      const double bm = have ? f.b_minus->slope / (e * d) : std::nan("");
      const double bp = have ? -f.b_plus->slope / (std::sqrt(2.0) * e) : std::nan("");
      const double ap = have ? -f.a_plus->slope / std::sqrt(d / 2.0) : std::nan("");
      const bool ok = have && std::abs(bm - 1.0) <= 0.1 && std::abs(bp - 1.0) <= 0.1 && ap >= 0.9;
      all = all && ok;
      out += fmt("; (%.2g,%.2g) B-:%.3f B+:%.3f A+:%.3f", e, d, bm, bp, ap);
    }
  }
  return {all, "fitted/expected" + out};
}

Outcome operators() {
  const auto* s = cache.get(0.1, 0.6);
  if (!s) return {false, "no solution at (0.1, 0.6)"};
  const auto mg = kernel_diagnostics(assemble_Mg(*s), s);
  const auto lg = kernel_diagnostics(assemble_Lg(*s), s);
  const Mesh r = refine(s->mesh);
  std::vector<double> a, b;
  for (double x : r.nodes) {
    const auto u = s->state_at(x);
    a.push_back(u[rslot::A0]);
    b.push_back(u[rslot::B0]);
  }
  const auto lg_fine = kernel_diagnostics(assemble_Lg_profiles(r.nodes, a, b, s->params), nullptr);
  const double drift = lg_fine.smallest_singulars[0] / lg.smallest_singulars[0] - 1.0;
  const auto w1 = compute_w1(*s, s->params.coeffs);
  const bool ok = mg.kernel_angle <= 1e-3 && mg.spectral_gap >= 1e3 && lg.smallest_singulars[0] > 0.0 &&
                  std::abs(drift) <= 0.05 && w1.compat_defect_relative <= 1e-6;
  return {ok, fmt("Mg angle %.2e gap %.2e; Lg sigma_min %.4f (refined %+.2e); w1 compat %.2e", mg.kernel_angle,
                  mg.spectral_gap, lg.smallest_singulars[0], drift, w1.compat_defect_relative)};
}

Outcome scaling() {
  std::vector<double> ratio;
  bool positive = true, disc = true;
  std::string out;
  for (double e : {0.04, 0.08, 0.16}) {
    const auto* s = cache.get(e, 0.6);
    if (!s) return {false, fmt("no solution at eps %.2g", e)};
    const auto c = evaluate_coefficients(*s, s->params.coeffs);
    ratio.push_back(c.a1 / std::pow(e, 0.2));
    positive = positive && c.a1 > 0.0;
    disc = disc && c.Delta > 0.0;
    out += fmt("; eps %.2g a1 %.3e Delta %.3e", e, c.a1, c.Delta);
  }
  const double band = *std::max_element(ratio.begin(), ratio.end()) / *std::min_element(ratio.begin(), ratio.end());
  return {positive && disc && band <= 25.0, fmt("a1/eps^0.2 band %.2f", band) + out};
}

Outcome stated_constants() {
  const auto* s = cache.get(0.1, 0.6);
  if (!s) return {false, "no solution at (0.1, 0.6)"};
  const auto c = evaluate_coefficients(*s, s->params.coeffs);
  const auto rows = compare_with_stated(c, s->params.coeffs.sigma0);
  std::string out;
  for (const auto& r : rows)
    out += fmt("%s %.4g vs stated %.4g%s; ", r.name.c_str(), r.computed, r.stated, r.discrepancy ? " (DISCREPANCY)" : "");
  const double defect = std::abs(c.a2 - (c.int_a_minus_cutoff - c.a3));
  return {!rows.empty() && defect <= 1e-8, out + fmt("a2 consistency %.1e", defect)};
}

Outcome family() {
  // bounds on each eps's own admissible grid; the residual is compared at
  // fixed phi on the eps = 0.1 grid, which is admissible for both
  const std::vector<double> shared = phi_grid(0.1, 7);
  std::vector<std::vector<double>> norm_res;
  bool bounds = true;
  std::string out;
  for (double e : {0.1, 0.05}) {
    const auto* s = cache.get(e, 0.6);
    if (!s) return {false, fmt("no solution at eps %.2g", e)};
    const auto c = evaluate_coefficients(*s, s->params.coeffs);
    // Delta <= 0 at these coefficients; the formulas are evaluated anyway
    double worst_z = 0.0, worst_k = 0.0;
    for (const auto& w : detail::family_samples(c, phi_grid(e, 9))) {
      worst_z = std::max(worst_z, std::abs(w.z) / std::pow(e, 0.2));
      worst_k = std::max(worst_k, std::abs(w.k_minus) / e);
      bounds = bounds && std::abs(w.k_minus) < e && std::abs(w.z) < std::pow(e, 0.2) &&
               (w.k_minus > 0.0) == (c.a5 < 0.0);
    }
    std::vector<double> res;
    for (const auto& w : detail::family_samples(c, shared)) res.push_back(std::abs(w.residual) / std::pow(e, 2.8));
    norm_res.push_back(res);
    out += fmt("; eps %.2g max|z|/eps^0.2 %.3g max|k-|/eps %.3g Delta %.2e", e, worst_z, worst_k, c.Delta);
  }
  int rising = 0;
  std::string ratios;
  for (std::size_t i = 0; i < shared.size(); ++i) {
    rising += !(norm_res[1][i] < norm_res[0][i]);
    ratios += fmt("%s%.3f", i ? "," : "", norm_res[1][i] / norm_res[0][i]);
  }
  return {bounds && rising == 0,
          fmt("residual ratio (eps 0.05 / 0.1) per phi [%s], %d not decreasing", ratios.c_str(), rising) + out};
}

Outcome boundary_oracles() {
  double worst_a = 0.0, worst_r = 0.0;
  for (double e : {0.02, 0.05, 0.1, 0.15, 0.2}) {
    for (double k : {-0.4, -0.2, 0.05, 0.2, 0.4}) {
      ModelParams p = params(e, 0.6);
      p.k_minus = k;
      const double a_exp = equilibrium_minus(p, AsymptoticMode::Expansion).a0_minus;
      const double a_new = equilibrium_minus(p, AsymptoticMode::Newton).a0_minus;
      worst_a = std::max(worst_a, std::abs(a_new - a_exp) / (5.0 * (e * e * std::abs(k * k * k) + std::pow(e, 4))));
      const auto rx = periodic_plus(p, k, AsymptoticMode::Expansion);
      const auto rn = periodic_plus(p, k, AsymptoticMode::Newton);
      worst_r = std::max(worst_r, std::abs(rn.r0 * rn.r0 - rx.r0 * rx.r0) / (5.0 * std::pow(std::abs(k) + e * e, 4)));
    }
  }
  return {worst_a <= 1.0 && worst_r <= 1.0, fmt("worst fraction of bound: A0 %.3f, r0^2 %.3f", worst_a, worst_r)};
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "wallforge_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  {
    std::ofstream(root / "run.cfg") << serialize(RunConfig{});
  }
  std::string texts[2];
  for (int i = 0; i < 2; ++i) {
    const fs::path out = root / ("run" + std::to_string(i));
    const std::string cmd = std::string(WALLFORGE_TOOL) + " het-solve --config " + (root / "run.cfg").string() +
                            " --out " + out.string() + " > /dev/null 2>&1";
    if (std::system(cmd.c_str()) != 0) return {false, "het-solve exited nonzero"};
    texts[i] = read_text_file((out / cli::names::solution).string()) + read_text_file((out / cli::names::verify).string());
  }
  return {texts[0] == texts[1], fmt("%zu bytes compared", texts[0].size())};
}

}  // namespace

int main(int argc, char** argv) {
  const bool strict = argc > 1 && std::string(argv[1]) == "--strict";
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"reversibility", reversibility},       {"first-integral conservation", conservation},
      {"eigenstructure", eigenstructure},     {"heteroclinic solves", solves},
      {"decay rates", decay_rates},           {"operator structure", operators},
      {"coefficient scaling", scaling},       {"stated-constant report", stated_constants},
      {"family consistency", family},         {"boundary-state oracles", boundary_oracles},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += !o.pass;
    std::cout << "criterion " << i + 1 << " " << (o.pass ? "PASS" : "FAIL") << " " << criteria[i].first << " ["
              << fmt("%.2fs", t) << "] " << o.detail << std::endl;
  }
  std::cout << failures << " of " << criteria.size() << " criteria failing" << std::endl;
  return strict ? failures : 0;
}
