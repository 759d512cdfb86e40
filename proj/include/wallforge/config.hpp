#pragma once

// Run configuration: flat `key = value` text with dotted keys and `#`
// comments. Numbers are written with 17 significant digits so a config read
// back from its own serialization is bit-identical.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "wallforge/error.hpp"
#include "wallforge/heteroclinic.hpp"
#include "wallforge/model.hpp"
#include "wallforge/spectral.hpp"

namespace wallforge {

class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line, int column)
      : Error(ErrorKind::Parse, "parse error at line " + std::to_string(line) + ", column " +
                                    std::to_string(column) + ": " + what),
        line_(line), column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_, column_;
};

/// One `key = value` line; columns are 1-based.
struct FlatEntry {
  std::string key;
  std::string value;
  int line = 0;
  int key_column = 0;
  int value_column = 0;
};

namespace detail {

inline std::string_view trim(std::string_view s, std::size_t* lead = nullptr) {
  std::size_t a = 0, b = s.size();
  while (a < b && (s[a] == ' ' || s[a] == '\t' || s[a] == '\r')) ++a;
  while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
  if (lead) *lead = a;
  return s.substr(a, b - a);
}

inline bool valid_key(std::string_view k) {
  if (k.empty()) return false;
  for (char c : k)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.')) return false;
  return k.front() != '.' && k.back() != '.';
}

}  // namespace detail

/// Splits text into entries; blank lines and everything after `#` are ignored.
inline std::vector<FlatEntry> parse_flat(std::string_view text) {
  std::vector<FlatEntry> out;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    std::size_t lead = 0;
    if (detail::trim(line, &lead).empty()) {
      if (end == text.size()) break;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ParseError("expected `key = value`", line_no, static_cast<int>(lead) + 1);
    std::size_t klead = 0, vlead = 0;
    const auto key = detail::trim(line.substr(0, eq), &klead);
    const auto value = detail::trim(line.substr(eq + 1), &vlead);
    if (!detail::valid_key(key))
      throw ParseError("invalid key `" + std::string(key) + "`", line_no, static_cast<int>(klead) + 1);
    if (value.empty()) throw ParseError("missing value", line_no, static_cast<int>(eq) + 2);
    out.push_back({std::string(key), std::string(value), line_no, static_cast<int>(klead) + 1,
                   static_cast<int>(eq + 1 + vlead) + 1});
    if (end == text.size()) break;
  }
  return out;
}

/// Parses a whole-string double; nullopt on trailing garbage.
inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  const auto r = std::from_chars(first, last, v);
  if (r.ec != std::errc() || r.ptr != last) return std::nullopt;
  return v;
}

/// Solver defaults plus the documented non-physical test coefficients, so the
/// default run exercises every term (a5 != 0 needs d2 != d4).
inline ModelParams default_run_params() {
  ModelParams p;
  p.coeffs = NormalFormCoeffs{};
  return p;
}

struct RunConfig {
  ModelParams params = default_run_params();
  double a4 = 0.0;  ///< z-linear coefficient of the bifurcation equation (input)
  MeshControls mesh;
  SolverSettings solver;
  VerifyTolerances verify;
  int spectral_stencil = 9;
  int spectral_count = 4;
  std::vector<double> sweep_epsilon{0.05, 0.1};
  std::vector<double> sweep_delta{0.6};
  int sweep_steps = 5;
  std::vector<double> family_phi;  ///< empty: evenly spaced over the admissible range
  int family_phi_count = 9;
  bool family_enforce_discriminant = true;
  std::string output_dir = "out";
  std::uint64_t seed = 20240611;
  double perturbation_scale = 0.0;
  int threads = 1;

  bool operator==(const RunConfig& o) const;
};

namespace detail {

using RealRef = double& (*)(RunConfig&);
using IntRef = int& (*)(RunConfig&);
using BoolRef = bool& (*)(RunConfig&);
using SeedRef = std::uint64_t& (*)(RunConfig&);
using TextRef = std::string& (*)(RunConfig&);
using ListRef = std::vector<double>& (*)(RunConfig&);

struct ConfigField {
  const char* key;
  std::variant<RealRef, IntRef, BoolRef, SeedRef, TextRef, ListRef> ref;
};

#define WF_FIELD(key, expr) \
  ConfigField { key, +[](RunConfig& c) -> decltype(auto) { return (expr); } }

inline const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> fields{
      WF_FIELD("params.epsilon", c.params.epsilon),
      WF_FIELD("params.delta", c.params.delta),
      WF_FIELD("params.k_minus", c.params.k_minus),
      WF_FIELD("params.omega_tilde_plus", c.params.omega_tilde_plus),
      WF_FIELD("params.a4", c.a4),
      WF_FIELD("coeffs.d1", c.params.coeffs.d1),
      WF_FIELD("coeffs.d2", c.params.coeffs.d2),
      WF_FIELD("coeffs.d3", c.params.coeffs.d3),
      WF_FIELD("coeffs.d4", c.params.coeffs.d4),
      WF_FIELD("coeffs.d5", c.params.coeffs.d5),
      WF_FIELD("coeffs.d6", c.params.coeffs.d6),
      WF_FIELD("coeffs.d7", c.params.coeffs.d7),
      WF_FIELD("coeffs.d8", c.params.coeffs.d8),
      WF_FIELD("coeffs.c0", c.params.coeffs.c0),
      WF_FIELD("coeffs.c1", c.params.coeffs.c1),
      WF_FIELD("coeffs.c2", c.params.coeffs.c2),
      WF_FIELD("coeffs.c3", c.params.coeffs.c3),
      WF_FIELD("coeffs.c4", c.params.coeffs.c4),
      WF_FIELD("coeffs.c5", c.params.coeffs.c5),
      WF_FIELD("coeffs.c6", c.params.coeffs.c6),
      WF_FIELD("coeffs.c7", c.params.coeffs.c7),
      WF_FIELD("coeffs.c8", c.params.coeffs.c8),
      WF_FIELD("coeffs.c9", c.params.coeffs.c9),
      WF_FIELD("coeffs.c10", c.params.coeffs.c10),
      WF_FIELD("coeffs.c11", c.params.coeffs.c11),
      WF_FIELD("coeffs.sigma0", c.params.coeffs.sigma0),
      WF_FIELD("coeffs.sigma1", c.params.coeffs.sigma1),
      WF_FIELD("coeffs.sigma2", c.params.coeffs.sigma2),
      WF_FIELD("coeffs.alpha", c.params.coeffs.alpha),
      WF_FIELD("coeffs.beta", c.params.coeffs.beta),
      WF_FIELD("coeffs.gamma", c.params.coeffs.gamma),
      WF_FIELD("coeffs.delta_c", c.params.coeffs.delta_c),
      WF_FIELD("mesh.left_multiplier", c.mesh.left_multiplier),
      WF_FIELD("mesh.right_multiplier", c.mesh.right_multiplier),
      WF_FIELD("mesh.cells", c.mesh.cells),
      WF_FIELD("mesh.collocation_order", c.mesh.collocation_order),
      WF_FIELD("mesh.core_left", c.mesh.core_left),
      WF_FIELD("mesh.core_right", c.mesh.core_right),
      WF_FIELD("mesh.core_transition", c.mesh.core_transition),
      WF_FIELD("mesh.grading", c.mesh.grading),
      WF_FIELD("tolerance.newton", c.solver.tol),
      WF_FIELD("tolerance.wg", c.verify.wg),
      WF_FIELD("tolerance.bc", c.verify.bc),
      WF_FIELD("tolerance.fit", c.verify.fit),
      WF_FIELD("tolerance.a_plus_floor", c.verify.a_plus_floor),
      WF_FIELD("solver.max_iter", c.solver.max_iter),
      WF_FIELD("solver.phase_value", c.solver.phase_value),
      WF_FIELD("spectral.stencil", c.spectral_stencil),
      WF_FIELD("spectral.count", c.spectral_count),
      WF_FIELD("sweep.epsilon", c.sweep_epsilon),
      WF_FIELD("sweep.delta", c.sweep_delta),
      WF_FIELD("sweep.steps", c.sweep_steps),
      WF_FIELD("family.phi", c.family_phi),
      WF_FIELD("family.phi_count", c.family_phi_count),
      WF_FIELD("family.enforce_discriminant", c.family_enforce_discriminant),
      WF_FIELD("output.dir", c.output_dir),
      WF_FIELD("seed", c.seed),
      WF_FIELD("perturbation.scale", c.perturbation_scale),
      WF_FIELD("threads", c.threads),
  };
  return fields;
}

#undef WF_FIELD

template <class... F>
struct overloaded : F... {
  using F::operator()...;
};
template <class... F>
overloaded(F...) -> overloaded<F...>;

inline std::string field_text(const ConfigField& f, const RunConfig& cfg) {
  auto& c = const_cast<RunConfig&>(cfg);
  return std::visit(
      overloaded{
          [&](RealRef r) { return format_number(r(c)); },
          [&](IntRef r) { return std::to_string(r(c)); },
          [&](BoolRef r) { return std::string(r(c) ? "true" : "false"); },
          [&](SeedRef r) { return std::to_string(r(c)); },
          [&](TextRef r) { return r(c); },
          [&](ListRef r) {
            if (r(c).empty()) return std::string("none");
            std::string s;
            for (double v : r(c)) s += (s.empty() ? "" : ", ") + format_number(v);
            return s;
          },
      },
      f.ref);
}

inline void assign_field(const ConfigField& f, RunConfig& c, const FlatEntry& e) {
  auto bad = [&](const char* what) { return ParseError(what + (" for `" + e.key + "`"), e.line, e.value_column); };
  std::visit(overloaded{
                 [&](RealRef r) {
                   const auto v = parse_double(e.value);
                   if (!v) throw bad("expected a real number");
                   r(c) = *v;
                 },
                 [&](IntRef r) {
                   int v = 0;
                   const auto res = std::from_chars(e.value.data(), e.value.data() + e.value.size(), v);
                   if (res.ec != std::errc() || res.ptr != e.value.data() + e.value.size())
                     throw bad("expected an integer");
                   r(c) = v;
                 },
                 [&](BoolRef r) {
                   if (e.value == "true") r(c) = true;
                   else if (e.value == "false") r(c) = false;
                   else throw bad("expected true or false");
                 },
                 [&](SeedRef r) {
                   std::uint64_t v = 0;
                   const auto res = std::from_chars(e.value.data(), e.value.data() + e.value.size(), v);
                   if (res.ec != std::errc() || res.ptr != e.value.data() + e.value.size())
                     throw bad("expected an unsigned integer");
                   r(c) = v;
                 },
                 [&](TextRef r) { r(c) = e.value; },
                 [&](ListRef r) {
                   r(c).clear();
                   if (e.value == "none") return;
                   std::string_view rest = e.value;
                   int col = e.value_column;
                   while (true) {
                     const auto comma = rest.find(',');
                     std::size_t lead = 0;
                     const auto item = trim(rest.substr(0, comma), &lead);
                     const auto v = parse_double(item);
                     if (!v)
                       throw ParseError("expected a comma-separated list of reals for `" + e.key + "`", e.line,
                                        col + static_cast<int>(lead));
                     r(c).push_back(*v);
                     if (comma == std::string_view::npos) break;
                     rest = rest.substr(comma + 1);
                     col += static_cast<int>(comma) + 1;
                   }
                 },
             },
             f.ref);
}

}  // namespace detail

inline bool RunConfig::operator==(const RunConfig& o) const {
  for (const auto& f : detail::config_fields())
    if (detail::field_text(f, *this) != detail::field_text(f, o)) return false;
  return true;
}

/// Keys in canonical order with their serialized values.
inline std::vector<std::pair<std::string, std::string>> config_items(const RunConfig& c) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : detail::config_fields()) out.emplace_back(f.key, detail::field_text(f, c));
  return out;
}

inline std::string serialize(const RunConfig& c) {
  std::string s;
  for (const auto& [k, v] : config_items(c)) s += k + " = " + v + "\n";
  return s;
}

/// Named range checks; run after parsing and before any command.
inline void validate(const RunConfig& c) {
  c.params.validate();
  auto positive = [](const char* key, double v) {
    if (!(v > 0.0) || !std::isfinite(v)) throw precondition_error(std::string(key) + " must be > 0");
  };
  positive("tolerance.newton", c.solver.tol);
  positive("tolerance.wg", c.verify.wg);
  positive("tolerance.bc", c.verify.bc);
  positive("tolerance.fit", c.verify.fit);
  positive("tolerance.a_plus_floor", c.verify.a_plus_floor);
  if (c.solver.max_iter < 0) throw precondition_error("solver.max_iter must be >= 0");
  if (c.mesh.cells < 8) throw precondition_error("mesh.cells must be >= 8");
  if (c.mesh.collocation_order < 1 || c.mesh.collocation_order > 8)
    throw precondition_error("mesh.collocation_order must lie in [1, 8]");
  if (c.sweep_epsilon.empty()) throw precondition_error("sweep.epsilon must be nonempty");
  if (c.sweep_delta.empty()) throw precondition_error("sweep.delta must be nonempty");
  if (c.sweep_steps < 1) throw precondition_error("sweep.steps must be >= 1");
  if (c.family_phi.empty() && c.family_phi_count < 1)
    throw precondition_error("family.phi_count must be >= 1 when family.phi is none");
  if (c.spectral_stencil < 5 || c.spectral_stencil % 2 == 0)
    throw precondition_error("spectral.stencil must be odd and >= 5");
  if (c.spectral_count < 2) throw precondition_error("spectral.count must be >= 2");
  if (c.threads < 1) throw precondition_error("threads must be >= 1");
  if (!(c.perturbation_scale >= 0.0)) throw precondition_error("perturbation.scale must be >= 0");
  if (c.output_dir.empty()) throw precondition_error("output.dir must be nonempty");
}

/// Parses config text; unknown or repeated keys are errors, missing keys
/// keep their defaults.
inline RunConfig parse_config(std::string_view text) {
  RunConfig c;
  std::vector<std::string> seen;
  for (const auto& e : parse_flat(text)) {
    const auto& fields = detail::config_fields();
    const auto it = std::find_if(fields.begin(), fields.end(), [&](const auto& f) { return e.key == f.key; });
    if (it == fields.end()) throw ParseError("unknown key `" + e.key + "`", e.line, e.key_column);
    if (std::find(seen.begin(), seen.end(), e.key) != seen.end())
      throw ParseError("repeated key `" + e.key + "`", e.line, e.key_column);
    seen.push_back(e.key);
    detail::assign_field(*it, c, e);
  }
  return c;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw precondition_error("cannot open `" + path + "`");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline RunConfig load_config(const std::string& path) { return parse_config(read_text_file(path)); }

/// Worker count: WALLFORGE_THREADS wins over the config key when set.
inline int resolved_threads(const RunConfig& c) {
  if (const char* env = std::getenv("WALLFORGE_THREADS"); env != nullptr && *env != '\0') {
    int v = 0;
    const std::string_view s(env);
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size() || v < 1)
      throw precondition_error("WALLFORGE_THREADS must be a positive integer");
    return v;
  }
  return c.threads;
}

inline SpectralSettings spectral_settings(const RunConfig& c) {
  SpectralSettings s;
  s.stencil = c.spectral_stencil;
  s.count = c.spectral_count;
  s.seed = c.seed;
  return s;
}

}  // namespace wallforge
