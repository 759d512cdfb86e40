#pragma once

// Command dispatch for the batch front end. Every command reads one config,
// writes its artifacts under the output directory and returns an exit code
// (0 on success, otherwise the ErrorKind value of the failure class).

#include <atomic>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "wallforge/asymptotics.hpp"
#include "wallforge/bifurcation.hpp"
#include "wallforge/config.hpp"
#include "wallforge/heteroclinic.hpp"
#include "wallforge/io.hpp"
#include "wallforge/spectral.hpp"

namespace wallforge::cli {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

inline constexpr int kUsageExit = 1;

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> c{"asymptotics", "het-solve", "continue", "spectral",
                                          "coefficients", "family",  "verify",   "report"};
  return c;
}

namespace names {
inline constexpr const char* solution = "solution.txt";
inline constexpr const char* verify = "verify.json";
inline constexpr const char* trace = "het-solve.trace.txt";
inline constexpr const char* asymptotics = "asymptotics.json";
inline constexpr const char* spectral = "spectral.json";
inline constexpr const char* coefficients = "coefficients.txt";
inline constexpr const char* family = "family.csv";
inline constexpr const char* sweep = "sweep";
inline constexpr const char* sweep_summary = "summary.csv";
inline constexpr const char* report = "report.json";
}  // namespace names

/// JSON number, or null when not finite.
inline Json num(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json config_json(const RunConfig& c) {
  Json j = Json::object();
  for (const auto& [k, v] : config_items(c)) j[k] = v;
  return j;
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

inline Json verify_json(const VerifyReport& rep) {
  Json checks = Json::array();
  for (const auto& c : rep.checks) {
    checks.push_back({{"name", c.name},
                      {"value", num(c.value)},
                      {"threshold", num(c.threshold)},
                      {"pass", c.pass},
                      {"asserted", c.asserted},
                      {"note", c.note}});
  }
  return Json{{"all_pass", rep.all_pass()}, {"checks", checks}};
}

inline Json verify_document(const RunConfig& cfg, const VerifyReport& rep) {
  Json j{{"config", config_json(cfg)}, {"source", names::solution}};
  j.update(verify_json(rep));
  return j;
}

inline Json roots_json(const auto& roots) {
  Json out = Json::array();
  for (const auto& r : roots) out.push_back({num(r.real()), num(r.imag())});
  return out;
}

inline Json structure_json(const EigenStructure& es) {
  return Json{{"a_block_roots", roots_json(es.a_block_roots)},
              {"b_block_roots", roots_json(es.b_block_roots)},
              {"unstable_dim", es.unstable_dim},
              {"stable_dim", es.stable_dim},
              {"center_dim", es.center_dim}};
}

inline Json kernel_json(const KernelReport& r) {
  Json sv = Json::array();
  for (double v : r.smallest_singulars) sv.push_back(num(v));
  Json j{{"kind", to_string(r.kind)}, {"smallest_singulars", sv}, {"iterations", r.iterations}};
  if (r.kind == OperatorKind::Mg) {
    j["kernel_angle"] = num(r.kernel_angle);
    j["spectral_gap"] = num(r.spectral_gap);
  }
  return j;
}

/// Solve with the config's mesh and solver settings.
inline HeteroclinicSolution solve_from_config(const RunConfig& cfg) {
  return solve_heteroclinic(cfg.params, cfg.mesh, cfg.solver);
}

inline std::string trace_text(const std::vector<double>& trace, const std::string& what, const RunConfig& cfg) {
  std::string s = "# wallforge Newton trace\n" + config_echo(cfg) + "# error: " + what + "\n# iteration residual\n";
  for (std::size_t i = 0; i < trace.size(); ++i) s += std::to_string(i) + " " + format_number(trace[i]) + "\n";
  return s;
}

class Runner {
 public:
  Runner(RunConfig cfg, fs::path out, std::ostream& log) : cfg_(std::move(cfg)), out_(std::move(out)), log_(log) {}

  int asymptotics() {
    const ModelParams& p = cfg_.params;
    Json j{{"config", config_json(cfg_)}};
    auto attempt = [&](auto&& f) -> Json {
      try {
        return f();
      } catch (const Error& e) {
        return Json{{"error", e.what()}, {"exit_code", static_cast<int>(e.kind())}};
      }
    };
    for (auto mode : {AsymptoticMode::Expansion, AsymptoticMode::Newton}) {
      j["equilibrium_minus"][to_string(mode)] = attempt([&] {
        const auto eq = equilibrium_minus(p, mode);
        return Json{{"a0_minus", num(eq.a0_minus)},
                    {"b0_minus", num(eq.b0_minus)},
                    {"omega_tilde_minus_sq", num(eq.omega_tilde_minus_sq)},
                    {"iterations", eq.iterations},
                    {"residual", num(eq.residual)}};
      });
    }
    const double k_plus = 2.0 * p.omega_tilde_plus;
    for (auto mode : {AsymptoticMode::Expansion, AsymptoticMode::Newton}) {
      j["periodic_plus"][to_string(mode)] = attempt([&] {
        const auto pp = periodic_plus(p, k_plus, mode);
        return Json{{"k_plus", num(pp.k_plus)}, {"r0", num(pp.r0)},          {"r1", num(pp.r1)},
                    {"omega", num(pp.omega)},   {"iterations", pp.iterations}, {"residual", num(pp.residual)}};
      });
    }
    j["linearization_minus"] = structure_json(linearize_at_minus(p));
    j["linearization_plus"] = structure_json(linearize_at_plus(p));
    write(names::asymptotics, dump(j));
    log_ << "asymptotics: wrote " << names::asymptotics << "\n";
    return 0;
  }

  int het_solve() {
    HeteroclinicSolution sol;
    try {
      sol = solve_from_config(cfg_);
    } catch (const SolveError& e) {
      write(names::trace, trace_text(e.trace(), e.what(), cfg_));
      log_ << "het-solve: " << e.what() << " (trace in " << names::trace << ")\n";
      return static_cast<int>(e.kind());
    }
    write(names::solution, format_solution(sol, cfg_));
    const auto rep = verify_solution(sol, cfg_.verify);
    write(names::verify, dump(verify_document(cfg_, rep)));
    log_ << "het-solve: converged in " << sol.iterations << " iterations, residual " << format_number(sol.newton_residual)
         << "; verify " << (rep.all_pass() ? "pass" : "FAIL") << failing(rep) << "\n";
    return 0;
  }

  int verify() {
    const fs::path src = out_ / names::solution;
    if (!fs::exists(src)) throw precondition_error("no solution file at `" + src.string() + "`; run het-solve first");
    const auto loaded = load_solution(src.string());
    const auto rep = verify_solution(loaded.solution, loaded.config.verify);
    write(names::verify, dump(verify_document(loaded.config, rep)));
    log_ << "verify: " << (rep.all_pass() ? "pass" : "FAIL") << failing(rep) << "\n";
    return rep.all_pass() ? 0 : static_cast<int>(ErrorKind::InvariantViolation);
  }

  int continuation() {
    const HeteroclinicSolution base = solve_from_config(cfg_);
    struct Item {
      double eps, delta;
      std::string file, status;
      int steps = 0;
      double residual = std::nan(""), wg = std::nan(""), min_a = std::nan(""), min_b = std::nan(""),
             min_bp = std::nan(""), a1 = std::nan("");
    };
    std::vector<Item> items;
    for (double e : cfg_.sweep_epsilon)
      for (double d : cfg_.sweep_delta) items.push_back({e, d, sweep_name(e, d), "", 0});

    ContinuationSettings cs;
    cs.solver = cfg_.solver;
    cs.mesh = cfg_.mesh;
    auto work = [&](Item& it) {
      ModelParams target = cfg_.params;
      target.epsilon = it.eps;
      target.delta = it.delta;
      RunConfig item_cfg = cfg_;
      item_cfg.params = target;
      try {
        auto seq = continue_in_parameter(base, target, cfg_.sweep_steps, cs);
        const HeteroclinicSolution& sol = seq.back();
        it.steps = static_cast<int>(seq.size());
        it.residual = sol.newton_residual;
        it.wg = 0.0;
        for (double w : sol.wg_profile) it.wg = std::max(it.wg, std::abs(w));
        const auto pos = positivity(sol.mesh, sol.path.nodes);
        it.min_a = pos.min_a;
        it.min_b = pos.min_b;
        it.min_bp = pos.min_bp;
        it.a1 = quadrature(sol, Integrand::ASecondSquared).total();
        write(fs::path(names::sweep) / it.file, format_solution(sol, item_cfg));
        it.status = "converged";
      } catch (const ContinuationError& e) {
        it.status = "failed";
        write(fs::path(names::sweep) / (it.file + ".trace.txt"),
              trace_text(e.last_good().residual_trace, e.what(), item_cfg));
      } catch (const Error& e) {
        it.status = "failed";
        write(fs::path(names::sweep) / (it.file + ".trace.txt"), trace_text({}, e.what(), item_cfg));
      }
    };
    const int threads = std::max(1, std::min<int>(resolved_threads(cfg_), static_cast<int>(items.size())));
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::mutex err_mutex;
    std::exception_ptr failure;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < items.size(); i = next++) {
          try {
            work(items[i]);
          } catch (...) {
            std::lock_guard lock(err_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);

    std::string csv = "# wallforge continuation sweep\n" + config_echo(cfg_) +
                      "epsilon,delta,status,steps,newton_residual,max_abs_wg,min_a,min_b,min_bprime,a1,file\n";
    int failed = 0;
    for (const auto& it : items) {
      failed += it.status != "converged";
      csv += format_number(it.eps) + "," + format_number(it.delta) + "," + it.status + "," + std::to_string(it.steps) +
             "," + format_number(it.residual) + "," + format_number(it.wg) + "," + format_number(it.min_a) + "," +
             format_number(it.min_b) + "," + format_number(it.min_bp) + "," + format_number(it.a1) + "," + it.file +
             "\n";
    }
    write(fs::path(names::sweep) / names::sweep_summary, csv);
    log_ << "continue: " << items.size() - static_cast<std::size_t>(failed) << "/" << items.size()
         << " sweep points converged\n";
    return failed == 0 ? 0 : static_cast<int>(ErrorKind::NonConvergence);
  }

  int spectral() {
    const HeteroclinicSolution sol = solve_from_config(cfg_);
    const SpectralSettings ss = spectral_settings(cfg_);
    const auto mg = kernel_diagnostics(assemble_Mg(sol, ss), &sol, ss);
    const auto lg = kernel_diagnostics(assemble_Lg(sol, ss), &sol, ss);
    Json j{{"config", config_json(cfg_)}, {"Mg", kernel_json(mg)}, {"Lg", kernel_json(lg)}};
    int code = 0;
    try {
      const auto w1 = compute_w1(sol, cfg_.params.coeffs, ss);
      j["w1"] = Json{{"projection_integral", num(w1.projection_integral)},
                     {"b_b1_integral", num(w1.b_b1_integral)},
                     {"compat_defect", num(w1.compat_defect)},
                     {"compat_defect_relative", num(w1.compat_defect_relative)},
                     {"l2_norm", num(w1.l2_norm)},
                     {"h2_norm", num(w1.h2_norm)},
                     {"max_norm", num(w1.max_norm)}};
    } catch (const Error& e) {
      j["w1"] = Json{{"error", e.what()}};
      code = static_cast<int>(e.kind());
    }
    write(names::spectral, dump(j));
    log_ << "spectral: Mg sigma1 " << format_number(mg.smallest_singulars.front()) << ", gap "
         << format_number(mg.spectral_gap) << ", kernel angle " << format_number(mg.kernel_angle) << "; Lg sigma_min "
         << format_number(lg.smallest_singulars.front()) << "\n";
    return code;
  }

  int coefficients() {
    const HeteroclinicSolution sol = solve_from_config(cfg_);
    const BifurcationCoefficients c = evaluate_coefficients(sol, cfg_.params.coeffs, cfg_.a4);
    write(names::coefficients, format_coefficients(c, cfg_.params.coeffs.sigma0, cfg_));
    log_ << "coefficients: wrote " << names::coefficients << "\n";
    check_coefficient_invariants(c);
    return 0;
  }

  int family() {
    const fs::path src = out_ / names::coefficients;
    BifurcationCoefficients c;
    if (fs::exists(src)) {
      c = parse_coefficients(read_text_file(src.string()));
    } else {
      c = evaluate_coefficients(solve_from_config(cfg_), cfg_.params.coeffs, cfg_.a4);
    }
    const std::vector<double> phis =
        cfg_.family_phi.empty() ? phi_grid(c.epsilon, cfg_.family_phi_count) : cfg_.family_phi;
    std::vector<WallFamilySample> samples;
    std::string note;
    if (cfg_.family_enforce_discriminant) {
      samples = wall_family(c, phis);
    } else {
      samples = detail::family_samples(c, phis);
      if (!(c.Delta > 0.0)) note = "# warning: Delta = " + format_number(c.Delta) + " <= 0, precondition not enforced\n";
    }
    std::string csv = "# wallforge wall family\n" + config_echo(cfg_) + note + "phi,z,k_minus,k_plus,residual\n";
    for (const auto& s : samples)
      csv += format_number(s.phi) + "," + format_number(s.z) + "," + format_number(s.k_minus) + "," +
             format_number(s.k_plus) + "," + format_number(s.residual) + "\n";
    write(names::family, csv);
    log_ << "family: " << samples.size() << " samples written to " << names::family << "\n";
    return 0;
  }

  int report() {
    Json found = Json::object();
    auto add_json = [&](const char* name) {
      const fs::path p = out_ / name;
      if (fs::exists(p)) found[name] = Json::parse(read_text_file(p.string()));
    };
    auto add_table = [&](const fs::path& rel) {
      const fs::path p = out_ / rel;
      if (!fs::exists(p)) return;
      Json rows = Json::array();
      std::istringstream in(read_text_file(p.string()));
      for (std::string line; std::getline(in, line);)
        if (!line.empty() && line[0] != '#') rows.push_back(line);
      found[rel.generic_string()] = rows;
    };
    add_json(names::asymptotics);
    add_json(names::verify);
    add_json(names::spectral);
    if (const fs::path p = out_ / names::coefficients; fs::exists(p)) {
      Json t = Json::object();
      for (const auto& e : parse_flat(read_text_file(p.string()))) t[e.key] = e.value;
      found[names::coefficients] = t;
    }
    add_table(names::family);
    add_table(fs::path(names::sweep) / names::sweep_summary);
    if (const fs::path p = out_ / names::solution; fs::exists(p)) {
      Json h = Json::object();
      std::istringstream in(read_text_file(p.string()));
      for (std::string line; std::getline(in, line) && !line.empty() && line[0] == '#';) {
        const auto eq = line.find('=');
        if (line.rfind("# config.", 0) == 0 || eq == std::string::npos) continue;
        h[line.substr(2, eq - 2)] = line.substr(eq + 1);
      }
      found[names::solution] = h;
    }
    if (found.empty()) {
      log_ << "report: nothing to report\n";
      return 0;
    }
    Json artifacts = Json::array();
    for (const auto& [k, v] : found.items()) artifacts.push_back(k);
    write(names::report, dump(Json{{"config", config_json(cfg_)}, {"artifacts", artifacts}, {"contents", found}}));
    log_ << "report: bundled " << found.size() << " artifacts into " << names::report << "\n";
    return 0;
  }

 private:
  static std::string sweep_name(double eps, double delta) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "solution_eps%.6g_delta%.6g.txt", eps, delta);
    return buf;
  }

  static std::string failing(const VerifyReport& rep) {
    std::string s;
    for (const auto& c : rep.checks)
      if (c.asserted && !c.pass) s += (s.empty() ? " (" : ", ") + c.name;
    return s.empty() ? s : s + ")";
  }

  void write(const fs::path& rel, const std::string& text) const { write_text_file(out_ / rel, text); }

  RunConfig cfg_;
  fs::path out_;
  std::ostream& log_;
};

/// Runs one command with an already parsed config. `out_dir` overrides
/// output.dir when nonempty.
inline int run(const std::string& command, const RunConfig& cfg, const std::string& out_dir, std::ostream& log) {
  try {
    validate(cfg);
    Runner r(cfg, out_dir.empty() ? fs::path(cfg.output_dir) : fs::path(out_dir), log);
    if (command == "asymptotics") return r.asymptotics();
    if (command == "het-solve") return r.het_solve();
    if (command == "continue") return r.continuation();
    if (command == "spectral") return r.spectral();
    if (command == "coefficients") return r.coefficients();
    if (command == "family") return r.family();
    if (command == "verify") return r.verify();
    if (command == "report") return r.report();
    log << "unknown command `" << command << "`\n";
    return kUsageExit;
  } catch (const Error& e) {
    log << command << ": " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const nlohmann::json::exception& e) {
    log << command << ": malformed JSON artifact: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::Parse);
  } catch (const fs::filesystem_error& e) {
    log << command << ": " << e.what() << "\n";
    return static_cast<int>(ErrorKind::Io);
  }
}

/// Reads the config file first; parse failures map to the parse exit code.
inline int run(const std::string& command, const std::string& config_path, const std::string& out_dir,
               std::ostream& log) {
  RunConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const Error& e) {
    log << config_path << ": " << e.what() << "\n";
    return static_cast<int>(e.kind());
  }
  return run(command, cfg, out_dir, log);
}

}  // namespace wallforge::cli
