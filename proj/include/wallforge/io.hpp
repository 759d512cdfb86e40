#pragma once

// Text formats: the columnar solution file and the coefficient table. Both
// start with `#` header lines that echo the full resolved config.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "wallforge/bifurcation.hpp"
#include "wallforge/config.hpp"
#include "wallforge/heteroclinic.hpp"

namespace wallforge {

inline Error io_error(const std::string& what) { return Error(ErrorKind::Io, "i/o error: " + what); }

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw io_error("cannot create `" + path.parent_path().string() + "`: " + ec.message());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot open `" + path.string() + "` for writing");
  out << text;
  if (!out) throw io_error("write failed for `" + path.string() + "`");
}

/// `# config.<key> = <value>` lines for every config key.
inline std::string config_echo(const RunConfig& c) {
  std::string s;
  for (const auto& [k, v] : config_items(c)) s += "# config." + k + " = " + v + "\n";
  return s;
}

/// Rebuilds a config from the echo lines of a file header.
inline RunConfig config_from_echo(std::string_view text) {
  std::string body;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(pos, end - pos);
    pos = end + 1;
    constexpr std::string_view tag = "# config.";
    if (line.substr(0, tag.size()) == tag) {
      body.append(line.substr(tag.size()));
      body.push_back('\n');
    }
  }
  return parse_config(body);
}

// ----------------------------------------------------------------------------
// Solution file

inline std::string format_solution(const HeteroclinicSolution& sol, const RunConfig& cfg) {
  std::ostringstream os;
  os << "# wallforge heteroclinic solution\n";
  os << config_echo(cfg);
  auto kv = [&](const char* k, const std::string& v) { os << "# " << k << "=" << v << "\n"; };
  kv("epsilon", format_number(sol.params.epsilon));
  kv("delta", format_number(sol.params.delta));
  kv("g", format_number(sol.params.g()));
  kv("collocation_order", std::to_string(sol.mesh.collocation_order));
  kv("nodes", std::to_string(sol.mesh.nodes.size()));
  kv("x_left", format_number(sol.mesh.x_left));
  kv("x_right", format_number(sol.mesh.x_right));
  kv("mu", format_number(sol.path.mu));
  kv("phase_anchor", format_number(sol.phase_anchor));
  kv("newton_residual", format_number(sol.newton_residual));
  kv("iterations", std::to_string(sol.iterations));
  double wg = 0.0;
  for (double w : sol.wg_profile) wg = std::max(wg, std::abs(w));
  kv("max_abs_wg", format_number(wg));
  auto fit = [&](const char* k, const std::optional<DecayFit>& f) {
    kv(k, f ? format_number(f->slope) : std::string("none"));
  };
  fit("fit_b_minus", sol.decay_fits.b_minus);
  fit("fit_a_minus", sol.decay_fits.a_minus);
  fit("fit_a_plus", sol.decay_fits.a_plus);
  fit("fit_b_plus", sol.decay_fits.b_plus);
  for (const auto& w : sol.warnings) kv("warning", w);
  os << "# columns: x A A' A'' A''' B B'\n";
  char buf[32];
  for (std::size_t i = 0; i < sol.mesh.nodes.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", sol.mesh.nodes[i]);
    os << buf;
    for (int k = 0; k < 6; ++k) {
      std::snprintf(buf, sizeof buf, " %.17g", sol.path.nodes[i][k]);
      os << buf;
    }
    os << "\n";
  }
  return os.str();
}

struct LoadedSolution {
  RunConfig config;
  HeteroclinicSolution solution;
};

/// Reads a solution file and rebuilds the collocation path from the node
/// values (stage slopes are recomputed cell by cell).
inline LoadedSolution parse_solution(std::string_view text) {
  LoadedSolution out;
  out.config = config_from_echo(text);
  std::optional<double> mu, phase;
  int order = -1;
  Mesh m;
  std::vector<ReducedState> nodes;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string line(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (line.rfind("# config.", 0) == 0 || eq == std::string::npos) continue;
      const std::string key = line.substr(2, eq - 2);
      const std::string val = line.substr(eq + 1);
      if (key == "mu") mu = parse_double(val);
      else if (key == "phase_anchor") phase = parse_double(val);
      else if (key == "collocation_order") order = std::atoi(val.c_str());
      continue;
    }
    std::istringstream is(line);
    std::string tok;
    std::vector<double> row;
    while (is >> tok) {
      const auto v = parse_double(tok);
      if (!v) throw ParseError("malformed number `" + tok + "`", line_no, static_cast<int>(line.find(tok)) + 1);
      row.push_back(*v);
    }
    if (row.size() != 7) throw ParseError("expected 7 columns, got " + std::to_string(row.size()), line_no, 1);
    m.nodes.push_back(row[0]);
    ReducedState u;
    for (int k = 0; k < 6; ++k) u[k] = row[static_cast<std::size_t>(k) + 1];
    nodes.push_back(u);
  }
  if (!mu || !phase || order < 1) throw ParseError("solution header lacks mu, phase_anchor or collocation_order", 1, 1);
  if (m.nodes.size() < 3) throw ParseError("solution has fewer than 3 nodes", line_no, 1);
  m.collocation_order = order;
  m.x_left = m.nodes.front();
  m.x_right = m.nodes.back();
  const auto zero = std::find(m.nodes.begin(), m.nodes.end(), 0.0);
  if (zero == m.nodes.end()) throw ParseError("solution mesh has no node at x = 0", 1, 1);
  m.anchor = static_cast<std::size_t>(zero - m.nodes.begin());
  const ModelParams& p = out.config.params;
  DiscretePath path = reconstruct_path(p, m, nodes, *mu);
  out.solution = evaluate_path(p, m, std::move(path), *phase);
  return out;
}

inline LoadedSolution load_solution(const std::string& path) { return parse_solution(read_text_file(path)); }

// ----------------------------------------------------------------------------
// Coefficient table

namespace detail {

struct CoefficientField {
  const char* key;
  double BifurcationCoefficients::*member;
  const char* provenance;
};

inline const std::vector<CoefficientField>& coefficient_fields() {
  using C = BifurcationCoefficients;
  static const std::vector<CoefficientField> fields{
      {"epsilon", &C::epsilon, "input"},
      {"a0", &C::a0, "a0_prime + a0_dblprime"},
      {"a0_prime", &C::a0_prime, "quadrature of 3AA'^3 + 2gBB'A'^2 + gAA'B'^2"},
      {"a0_dblprime", &C::a0_dblprime, "quadrature of the second quadratic integrand"},
      {"a1", &C::a1, "quadrature of A''^2"},
      {"a1_prime", &C::a1_prime, "leading order: a1"},
      {"a2", &C::a2, "quadrature of (A - chi)A' minus a3"},
      {"a2_prime", &C::a2_prime, "leading order: a2"},
      {"a3", &C::a3, "half of chi''''A' - 3(1 - A^2)A'chi + g(AB^2)'chi quadratures"},
      {"a3_prime", &C::a3_prime, "a3 sigma0 + sigma0_prime"},
      {"a3_dblprime", &C::a3_dblprime, "a1' a3' - a4 a2' eps^{1/5} / 2"},
      {"a4", &C::a4, "input (no defining integral)"},
      {"a5", &C::a5, "eps^{-4/5} (d2 - d4) times quadrature of AA'^3"},
      {"sigma0_prime", &C::sigma0_prime, "sigma0 times quadrature of A'(A^3 - chi)"},
      {"Delta", &C::Delta, "a1'^2 - a0 a2'"},
      {"gamma1", &C::gamma1, "2 sqrt(2|a5|/3)"},
      {"gamma2", &C::gamma2, "eps^{1/5} sqrt(3|a5|/2) / (2 a1)"},
      {"int_a_minus_cutoff", &C::int_a_minus_cutoff, "quadrature of (A - chi)A'"},
      {"int_cutoff4", &C::int_cutoff4, "quadrature of chi''''A'"},
      {"int_one_minus_a2", &C::int_one_minus_a2, "quadrature of (1 - A^2)A'chi"},
      {"int_ab2_prime", &C::int_ab2_prime, "quadrature of (AB^2)'chi"},
      {"int_a_a1_cubed", &C::int_a_a1_cubed, "quadrature of AA'^3"},
      {"int_a1_a3_minus_cutoff", &C::int_a1_a3_minus_cutoff, "quadrature of A'(A^3 - chi)"},
  };
  return fields;
}

}  // namespace detail

/// Coefficient table with provenance comments, invariant flags and the
/// comparison against the quoted limits.
inline std::string format_coefficients(const BifurcationCoefficients& c, double sigma0, const RunConfig& cfg) {
  std::ostringstream os;
  os << "# wallforge bifurcation coefficients\n";
  os << config_echo(cfg);
  for (const auto& f : detail::coefficient_fields())
    os << f.key << " = " << format_number(c.*f.member) << "  # " << f.provenance << "\n";
  os << "invariant.a1_positive = " << (c.a1 > 0.0 ? "true" : "false") << "\n";
  os << "invariant.delta_positive = " << (c.Delta > 0.0 ? "true" : "false") << "\n";
  for (const auto& row : compare_with_stated(c, sigma0)) {
    os << "stated." << row.name << " = " << format_number(row.stated) << "  # computed "
       << format_number(row.computed) << (row.discrepancy ? ", DISCREPANCY" : ", agrees") << "\n";
  }
  os << "check.a2_consistency = " << format_number(c.a2 - (c.int_a_minus_cutoff - c.a3))
     << "  # a2 - (integral (A - chi)A' - a3)\n";
  return os.str();
}

/// Reads the numeric fields back; flags and stated values are ignored.
inline BifurcationCoefficients parse_coefficients(std::string_view text) {
  BifurcationCoefficients c;
  std::vector<std::string> seen;
  for (const auto& e : parse_flat(text)) {
    const auto& fields = detail::coefficient_fields();
    const auto it = std::find_if(fields.begin(), fields.end(), [&](const auto& f) { return e.key == f.key; });
    if (it == fields.end()) continue;
    const auto v = parse_double(e.value);
    if (!v) throw ParseError("expected a real number for `" + e.key + "`", e.line, e.value_column);
    c.*(it->member) = *v;
    seen.push_back(e.key);
  }
  for (const char* required : {"epsilon", "a0", "a1_prime", "a2_prime", "a3_prime", "a4", "a5", "Delta"})
    if (std::find(seen.begin(), seen.end(), required) == seen.end())
      throw ParseError(std::string("coefficient table lacks `") + required + "`", 1, 1);
  return c;
}

}  // namespace wallforge
