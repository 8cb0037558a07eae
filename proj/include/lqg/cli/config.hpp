#pragma once

// Scenario configuration. The accepted syntax is the subset of TOML the
// scenarios need: [section] headers, key = value pairs, '#' comments, and
// values that are quoted strings, numbers, booleans or single-line arrays of
// numbers or strings.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "lqg/cli/csv.hpp"
#include "lqg/core.hpp"
#include "lqg/identification.hpp"
#include "lqg/tolerances.hpp"

namespace lqg::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Value = std::variant<double, bool, std::string, std::vector<double>, std::vector<std::string>>;

struct Entry {
  Value value;
  int line = 0;
};

/// section -> key -> entry; keys before the first header live in section "".
class Document {
 public:
  static Document parse(const std::string& text, const std::string& source = "<config>") {
    Document doc;
    doc.source_ = source;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int lineno = 0;
    while (std::getline(in, raw)) {
      ++lineno;
      const std::string line(trim(strip_comment(raw)));
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']' || line.size() < 3) doc.error(lineno, "malformed section header");
        section = std::string(trim(std::string_view(line).substr(1, line.size() - 2)));
        if (!doc.sections_.emplace(section).second) doc.error(lineno, "duplicate section [" + section + "]");
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) doc.error(lineno, "expected key = value");
      const std::string key(trim(std::string_view(line).substr(0, eq)));
      if (key.empty()) doc.error(lineno, "empty key");
      const std::string_view rhs = trim(std::string_view(line).substr(eq + 1));
      auto& table = doc.tables_[section];
      if (table.count(key)) doc.error(lineno, "duplicate key '" + key + "'");
      table[key] = Entry{doc.parse_value(rhs, lineno), lineno};
    }
    return doc;
  }

  static Document load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.string() + ": cannot open config");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
  }

  const std::string& source() const { return source_; }

  bool has(const std::string& section, const std::string& key) const {
    auto it = tables_.find(section);
    return it != tables_.end() && it->second.count(key);
  }

  bool has_section(const std::string& section) const { return tables_.count(section) || sections_.count(section); }

  const Entry* find(const std::string& section, const std::string& key) const {
    auto it = tables_.find(section);
    if (it == tables_.end()) return nullptr;
    auto kt = it->second.find(key);
    return kt == it->second.end() ? nullptr : &kt->second;
  }

  double number(const std::string& section, const std::string& key, std::optional<double> fallback = {}) const {
    const Entry* e = find(section, key);
    if (!e) return fallback ? *fallback : missing(section, key);
    if (auto* v = std::get_if<double>(&e->value)) return *v;
    field_error(section, key, e->line, "expected a number");
  }

  long long integer(const std::string& section, const std::string& key, std::optional<long long> fallback = {}) const {
    const Entry* e = find(section, key);
    if (!e) {
      if (fallback) return *fallback;
      missing(section, key);
    }
    const double v = number(section, key);
    if (v != static_cast<double>(static_cast<long long>(v))) field_error(section, key, e->line, "expected an integer");
    return static_cast<long long>(v);
  }

  bool boolean(const std::string& section, const std::string& key, bool fallback) const {
    const Entry* e = find(section, key);
    if (!e) return fallback;
    if (auto* v = std::get_if<bool>(&e->value)) return *v;
    field_error(section, key, e->line, "expected true or false");
  }

  std::string string(const std::string& section, const std::string& key,
                     std::optional<std::string> fallback = {}) const {
    const Entry* e = find(section, key);
    if (!e) {
      if (fallback) return *fallback;
      missing(section, key);
    }
    if (auto* v = std::get_if<std::string>(&e->value)) return *v;
    field_error(section, key, e->line, "expected a quoted string");
  }

  /// Rejects keys outside `allowed` so that misspelled fields do not pass silently.
  void restrict_keys(const std::string& section, const std::set<std::string>& allowed) const {
    auto it = tables_.find(section);
    if (it == tables_.end()) return;
    for (const auto& [key, entry] : it->second) {
      if (!allowed.count(key)) field_error(section, key, entry.line, "unknown field");
    }
  }

  void restrict_sections(const std::set<std::string>& allowed) const {
    for (const auto& s : sections_) {
      if (!allowed.count(s)) throw ConfigError(source_ + ": unknown section [" + s + "]");
    }
  }

  [[noreturn]] void field_error(const std::string& section, const std::string& key, int line,
                                const std::string& what) const {
    const std::string field = section.empty() ? key : section + "." + key;
    throw ConfigError(source_ + ":" + std::to_string(line) + ": " + field + ": " + what);
  }

  [[noreturn]] double missing(const std::string& section, const std::string& key) const {
    const std::string field = section.empty() ? key : section + "." + key;
    throw ConfigError(source_ + ": missing required field " + field);
  }

 private:
  [[noreturn]] void error(int line, const std::string& what) const {
    throw ConfigError(source_ + ":" + std::to_string(line) + ": " + what);
  }

  static std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t k = 0; k < line.size(); ++k) {
      if (line[k] == '"') quoted = !quoted;
      if (line[k] == '#' && !quoted) return line.substr(0, k);
    }
    return line;
  }

  Value parse_value(std::string_view s, int line) const {
    if (s.empty()) error(line, "missing value");
    if (s.front() == '"') {
      if (s.size() < 2 || s.back() != '"') error(line, "unterminated string");
      const std::string_view body = s.substr(1, s.size() - 2);
      if (body.find('"') != std::string_view::npos) error(line, "embedded quotes are not supported");
      return std::string(body);
    }
    if (s == "true") return true;
    if (s == "false") return false;
    if (s.front() == '[') {
      if (s.back() != ']') error(line, "arrays must close on the same line");
      const std::string_view body = trim(s.substr(1, s.size() - 2));
      std::vector<double> nums;
      std::vector<std::string> strs;
      std::size_t start = 0;
      while (!body.empty() && start <= body.size()) {
        const auto comma = body.find(',', start);
        const std::string_view item =
            trim(body.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (!item.empty()) {
          const Value v = parse_value(item, line);
          if (auto* d = std::get_if<double>(&v)) {
            nums.push_back(*d);
          } else if (auto* str = std::get_if<std::string>(&v)) {
            strs.push_back(*str);
          } else {
            error(line, "arrays hold numbers or strings only");
          }
        }
        if (comma == std::string_view::npos) break;
        start = comma + 1;
      }
      if (!nums.empty() && !strs.empty()) error(line, "arrays must not mix numbers and strings");
      if (!strs.empty()) return strs;
      return nums;
    }
    std::string cleaned;
    for (char ch : s)
      if (ch != '_') cleaned += ch;
    double v = 0.0;
    if (!parse_double(cleaned, v)) error(line, "cannot parse value '" + std::string(s) + "'");
    return v;
  }

  std::string source_;
  std::set<std::string> sections_;
  std::map<std::string, std::map<std::string, Entry>> tables_;
};

// ---------------------------------------------------------------------------
// Scenario

struct TaxSweepSpec {
  std::vector<double> h;
  double tau_min = 0.0;
  double tau_max = 1.0;
  double tau_step = 0.01;
};

struct Scenario {
  std::string payoff_family;
  std::string info_family;
  double market_tau = 0.0;            // set when payoff_family == "market"
  std::optional<double> uniform_h;    // set when canonical h is a single number
  AgentGrid grid{1};
  PayoffStructure payoff;
  InformationStructure info;
  Tolerances tol;
  std::uint64_t seed = 0;
  double theta1 = 0.0;
  double theta2 = 1.0;
  long long draws = 0;
  bool positive = false;
  std::vector<TeamPath> paths;
  TaxSweepSpec sweep;
  std::vector<double> roundtrip_h;
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<long long> n;
  std::optional<long long> draws;
  std::optional<double> theta1;
  std::optional<double> theta2;
  bool positive = false;
  std::optional<std::filesystem::path> teams_file;
};

/// "3 4;5" -> {{3,4},{5}}. Agents split on spaces or commas, teams on ';'.
inline TeamPath parse_team_path(const std::string& text) {
  TeamPath path;
  std::stringstream ss(text);
  std::string team_text;
  while (std::getline(ss, team_text, ';')) {
    IndexSet team;
    for (char& ch : team_text)
      if (ch == ',') ch = ' ';
    std::stringstream ts(team_text);
    std::string tok;
    while (ts >> tok) {
      double v = 0.0;
      if (!parse_double(tok, v) || v < 0 || v != static_cast<double>(static_cast<Index>(v))) {
        throw ConfigError("team path '" + text + "': bad agent index '" + tok + "'");
      }
      team.push_back(static_cast<Index>(v));
    }
    if (team.empty()) throw ConfigError("team path '" + text + "': empty team");
    path.push_back(std::move(team));
  }
  if (path.empty()) throw ConfigError("empty team path");
  return path;
}

inline std::string format_team_path(const TeamPath& path) {
  std::string out;
  for (std::size_t q = 0; q < path.size(); ++q) {
    if (q) out += ';';
    for (std::size_t a = 0; a < path[q].size(); ++a) {
      if (a) out += ' ';
      out += std::to_string(path[q][a]);
    }
  }
  return out;
}

inline std::vector<TeamPath> read_teams_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open teams file");
  std::vector<TeamPath> out;
  std::string line;
  while (std::getline(in, line)) {
    const std::string t(trim(line));
    if (t.empty() || t.front() == '#') continue;
    out.push_back(parse_team_path(t));
  }
  return out;
}

namespace detail {

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& ref) {
  const std::filesystem::path p(ref);
  return p.is_absolute() ? p : base / p;
}

inline MatrixXd load_table(const std::filesystem::path& base, const std::string& ref, const std::string& field) {
  try {
    return read_matrix_csv(resolve(base, ref));
  } catch (const std::exception& e) {
    throw ConfigError(field + ": " + e.what());
  }
}

/// A per-agent vector given as a number, an inline array or a CSV reference.
inline VectorXd agent_vector(const Document& doc, const std::filesystem::path& base, const std::string& section,
                             const std::string& key, Index n, std::optional<double> fallback = {}) {
  const Entry* e = doc.find(section, key);
  if (!e) {
    if (fallback) return VectorXd::Constant(n, *fallback);
    doc.missing(section, key);
  }
  if (auto* v = std::get_if<double>(&e->value)) return VectorXd::Constant(n, *v);
  if (auto* arr = std::get_if<std::vector<double>>(&e->value)) {
    if (static_cast<Index>(arr->size()) != n) doc.field_error(section, key, e->line, "array length must equal grid.n");
    return Eigen::Map<const VectorXd>(arr->data(), n);
  }
  if (auto* ref = std::get_if<std::string>(&e->value)) {
    const MatrixXd m = load_table(base, *ref, section + "." + key);
    if (m.size() != n) doc.field_error(section, key, e->line, "table must hold grid.n values");
    return flatten_slopes(m);
  }
  doc.field_error(section, key, e->line, "expected a number, an array or a CSV path");
}

inline MatrixXd agent_matrix(const Document& doc, const std::filesystem::path& base, const std::string& section,
                             const std::string& key, Index rows, Index cols, std::optional<double> fallback = {}) {
  const Entry* e = doc.find(section, key);
  if (!e) {
    if (fallback) return MatrixXd::Constant(rows, cols, *fallback);
    doc.missing(section, key);
  }
  if (auto* v = std::get_if<double>(&e->value)) return MatrixXd::Constant(rows, cols, *v);
  if (auto* ref = std::get_if<std::string>(&e->value)) {
    const MatrixXd m = load_table(base, *ref, section + "." + key);
    if (m.rows() != rows || m.cols() != cols) {
      doc.field_error(section, key, e->line,
                      "table must be " + std::to_string(rows) + " x " + std::to_string(cols));
    }
    return m;
  }
  doc.field_error(section, key, e->line, "expected a number or a CSV path");
}

}  // namespace detail

inline Scenario build_scenario(const Document& doc, const std::filesystem::path& base, const Overrides& ov = {}) {
  doc.restrict_sections({"grid", "prior", "payoff", "info", "identify", "variance", "tax_sweep", "roundtrip",
                         "tolerances"});
  doc.restrict_keys("", {"seed"});
  doc.restrict_keys("grid", {"n"});
  doc.restrict_keys("prior", {"mu_theta", "var_theta"});
  doc.restrict_keys("payoff", {"family", "tau", "b", "c", "w"});
  doc.restrict_keys("info", {"family", "h", "g", "g_kernel_diag", "d", "means", "own_cov", "kernel", "k_theta"});
  doc.restrict_keys("identify", {"theta1", "theta2", "draws", "positive"});
  doc.restrict_keys("variance", {"paths", "teams_file"});
  doc.restrict_keys("tax_sweep", {"h", "tau_min", "tau_max", "tau_step"});
  doc.restrict_keys("roundtrip", {"h"});
  doc.restrict_keys("tolerances", {"psd", "pd", "residual", "spectral"});

  Scenario s;
  const long long seed = doc.integer("", "seed", 0);
  if (seed < 0) throw ConfigError("seed must be nonnegative");
  s.seed = ov.seed ? *ov.seed : static_cast<std::uint64_t>(seed);

  const long long n = ov.n ? *ov.n : doc.integer("grid", "n");
  if (n <= 0 || n > 4000) throw ConfigError("grid.n must lie in [1, 4000]");
  s.grid = AgentGrid(static_cast<Index>(n));

  s.tol.psd = doc.number("tolerances", "psd", kDefaultTolerances.psd);
  s.tol.pd = doc.number("tolerances", "pd", kDefaultTolerances.pd);
  s.tol.residual = doc.number("tolerances", "residual", kDefaultTolerances.residual);
  s.tol.spectral = doc.number("tolerances", "spectral", kDefaultTolerances.spectral);

  Prior prior{doc.number("prior", "mu_theta", 0.0), doc.number("prior", "var_theta", 1.0)};
  if (!(prior.var > 0.0)) throw ConfigError("prior.var_theta must be positive");

  // Payoff
  s.payoff_family = doc.string("payoff", "family");
  const Index nn = s.grid.size();
  if (s.payoff_family == "market") {
    s.market_tau = doc.number("payoff", "tau");
    if (s.market_tau < 0.0 || s.market_tau > 1.0) throw ConfigError("payoff.tau must lie in [0,1]");
    s.payoff.b = VectorXd::Constant(nn, 1.0 - s.market_tau);
    s.payoff.c = VectorXd::Zero(nn);
    s.payoff.w = MatrixXd::Constant(nn, nn, -(1.0 - s.market_tau));
  } else if (s.payoff_family == "constant" || s.payoff_family == "tabulated") {
    s.payoff.b = detail::agent_vector(doc, base, "payoff", "b", nn);
    s.payoff.c = detail::agent_vector(doc, base, "payoff", "c", nn, 0.0);
    s.payoff.w = detail::agent_matrix(doc, base, "payoff", "w", nn, nn);
  } else {
    throw ConfigError("payoff.family must be \"market\", \"constant\" or \"tabulated\"");
  }

  // Information
  s.info_family = doc.string("info", "family");
  if (s.info_family == "canonical") {
    const VectorXd h = detail::agent_vector(doc, base, "info", "h", nn);
    if (const Entry* e = doc.find("info", "h"); e && std::holds_alternative<double>(e->value)) {
      s.uniform_h = std::get<double>(e->value);
    }
    MatrixXd g_off = MatrixXd::Zero(nn, nn);
    if (const Entry* e = doc.find("info", "g")) {
      if (auto* str = std::get_if<std::string>(&e->value); str && *str == "iid") {
        // zero off-diagonal
      } else if (auto* rho = std::get_if<double>(&e->value)) {
        g_off.setConstant(*rho);
      } else {
        g_off = detail::agent_matrix(doc, base, "info", "g", nn, nn);
      }
      g_off.diagonal().setZero();
    }
    const VectorXd g_kdiag = detail::agent_vector(doc, base, "info", "g_kernel_diag", nn, 0.0);
    try {
      const CanonicalInfo c = make_canonical_info(h, g_off, prior.var, g_kdiag, s.tol.psd);
      s.info = canonical_to_info(c, s.grid, prior.mu);
    } catch (const Error& err) {
      throw ConfigError(std::string("info: ") + err.what());
    }
  } else if (s.info_family == "tabulated") {
    const long long d = doc.integer("info", "d", 1);
    if (d <= 0 || d > 16) throw ConfigError("info.d must lie in [1, 16]");
    const Index dd = static_cast<Index>(d);
    InformationStructure info;
    info.d = dd;
    info.prior = prior;
    info.means = detail::agent_matrix(doc, base, "info", "means", nn, dd, 0.0);
    const MatrixXd own = detail::agent_matrix(doc, base, "info", "own_cov", nn, dd * dd);
    for (Index i = 0; i < nn; ++i) {
      MatrixXd block(dd, dd);
      for (Index r = 0; r < dd; ++r)
        for (Index c = 0; c < dd; ++c) block(r, c) = own(i, r * dd + c);
      info.own_cov.push_back(std::move(block));
    }
    info.kernel = detail::agent_matrix(doc, base, "info", "kernel", nn * dd, nn * dd);
    info.k_theta = flatten_slopes(detail::agent_matrix(doc, base, "info", "k_theta", nn, dd));
    try {
      info.validate();
    } catch (const Error& err) {
      throw ConfigError(std::string("info: ") + err.what());
    }
    s.info = std::move(info);
  } else {
    throw ConfigError("info.family must be \"canonical\" or \"tabulated\"");
  }

  // Identification
  s.theta1 = ov.theta1 ? *ov.theta1 : doc.number("identify", "theta1", 0.0);
  s.theta2 = ov.theta2 ? *ov.theta2 : doc.number("identify", "theta2", 1.0);
  s.draws = ov.draws ? *ov.draws : doc.integer("identify", "draws", 0);
  if (s.draws < 0) throw ConfigError("draws must be nonnegative");
  s.positive = ov.positive || doc.boolean("identify", "positive", false);

  // Team paths
  if (ov.teams_file) {
    s.paths = read_teams_file(*ov.teams_file);
  } else if (const Entry* e = doc.find("variance", "paths")) {
    auto* arr = std::get_if<std::vector<std::string>>(&e->value);
    if (!arr) doc.field_error("variance", "paths", e->line, "expected an array of strings such as [\"3\", \"1 2;4\"]");
    for (const auto& p : *arr) s.paths.push_back(parse_team_path(p));
  } else if (doc.has("variance", "teams_file")) {
    s.paths = read_teams_file(detail::resolve(base, doc.string("variance", "teams_file")));
  }
  for (const auto& path : s.paths)
    for (const auto& team : path)
      for (Index i : team)
        if (i >= nn) throw ConfigError("team path " + format_team_path(path) + " names an agent outside the grid");

  // Market sweeps
  auto h_list = [&](const std::string& section) {
    std::vector<double> out;
    if (const Entry* e = doc.find(section, "h")) {
      if (auto* v = std::get_if<double>(&e->value)) {
        out.push_back(*v);
      } else if (auto* arr = std::get_if<std::vector<double>>(&e->value)) {
        out = *arr;
      } else {
        doc.field_error(section, "h", e->line, "expected a number or an array of numbers");
      }
    } else if (s.uniform_h) {
      out.push_back(*s.uniform_h);
    }
    for (double h : out)
      if (h < 0.0 || h > 1.0) throw ConfigError(section + ".h values must lie in [0,1]");
    return out;
  };
  s.sweep.h = h_list("tax_sweep");
  s.sweep.tau_min = doc.number("tax_sweep", "tau_min", 0.0);
  s.sweep.tau_max = doc.number("tax_sweep", "tau_max", 1.0);
  s.sweep.tau_step = doc.number("tax_sweep", "tau_step", 0.01);
  if (s.sweep.tau_min < 0.0 || s.sweep.tau_max > 1.0 || s.sweep.tau_min > s.sweep.tau_max || s.sweep.tau_step <= 0.0) {
    throw ConfigError("tax_sweep: need 0 <= tau_min <= tau_max <= 1 and tau_step > 0");
  }
  s.roundtrip_h = h_list("roundtrip");
  return s;
}

}  // namespace lqg::cli
