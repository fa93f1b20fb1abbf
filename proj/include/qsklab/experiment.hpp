#pragma once

// Declarative experiment files for sweeps.
//
//   # comment
//   [model]
//   n = 6
//   j = 1.0
//   [disorder]
//   law = gaussian            # gaussian | rademacher | uniform
//   [ensemble]
//   mode = monte_carlo        # monte_carlo | enumerate | gauge_paired
//   samples = 100
//   seed = 42
//   conditional_remainders = false
//   pair_duhamels = true
//   quadrature_nodes = 48
//   [grid]
//   beta = 5, 20
//   h = 0.05, 0.5
//   [output]
//   csv = sweep.csv
//   json = sweep.json         # optional
//   samples = samples.jsonl   # optional
//
// Unknown sections and keys are errors; every error carries line:column.

#include <cerrno>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "qsklab/ensemble.hpp"
#include "qsklab/error.hpp"

#ifndef QSKLAB_VERSION
#define QSKLAB_VERSION "0.1.0"
#endif

namespace qsklab {

inline constexpr const char* version_string = "qsklab " QSKLAB_VERSION;

struct ExperimentFile {
  int n_sites = 0;
  double j_coupling = 1.0;
  std::string law = "gaussian";
  EnsembleMode mode = EnsembleMode::monte_carlo;
  int samples = 100;
  std::uint64_t seed = 0;
  std::optional<bool> conditional_remainders;
  bool pair_duhamels = true;
  int quadrature_nodes = default_quadrature_nodes;
  std::vector<double> betas;
  std::vector<double> hs;
  std::string csv_path;
  std::string json_path;
  std::string samples_path;

  /// Grid points in emission order: beta outer, h inner.
  std::vector<EnsembleConfig> configs() const {
    std::vector<EnsembleConfig> out;
    for (double beta : betas)
      for (double h : hs) {
        EnsembleConfig c;
        c.params = ModelParams{n_sites, beta, h, j_coupling};
        c.spec = DisorderSpec::from_name(law);
        c.n_samples = samples;
        c.master_seed = seed;
        c.mode = mode;
        c.conditional_remainders = conditional_remainders;
        c.pair_duhamels = pair_duhamels;
        c.quadrature_nodes = quadrature_nodes;
        out.push_back(c);
      }
    return out;
  }

  /// Range and cap checks, run before any computation.
  void validate() const {
    if (n_sites < 2) throw invalid_argument("model.n must be >= 2");
    check_site_count(n_sites);
    if (!(j_coupling > 0.0)) throw invalid_argument("model.j must be > 0");
    if (betas.empty() || hs.empty()) throw invalid_argument("grid.beta and grid.h must be non-empty");
    if (csv_path.empty()) throw invalid_argument("output.csv is required");
    for (const auto& c : configs()) validate_config(c);
  }

  json resolved() const {
    json j{{"model", {{"n", n_sites}, {"j", j_coupling}}},
           {"disorder", {{"law", law}}},
           {"ensemble",
            {{"mode", mode_name(mode)},
             {"samples", samples},
             {"seed", seed},
             {"pair_duhamels", pair_duhamels},
             {"quadrature_nodes", quadrature_nodes}}},
           {"grid", {{"beta", betas}, {"h", hs}}},
           {"output", {{"csv", csv_path}, {"json", json_path}, {"samples", samples_path}}}};
    if (conditional_remainders) j["ensemble"]["conditional_remainders"] = *conditional_remainders;
    return j;
  }

 private:
  static void validate_config(const EnsembleConfig& c) { qsklab::validate(c); }
};

namespace detail {

inline std::string trim(const std::string& s, std::size_t& offset) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  offset = b;
  return s.substr(b, e - b);
}

struct Cursor {
  std::string source;
  int line = 0;
  int column = 1;

  [[noreturn]] void fail(const std::string& msg) const {
    throw invalid_argument(source + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + msg);
  }
};

inline double parse_real(const std::string& v, const Cursor& at) {
  errno = 0;
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0' || errno != 0 || !std::isfinite(x)) at.fail("expected a real number, got '" + v + "'");
  return x;
}

inline long long parse_integer(const std::string& v, const Cursor& at) {
  errno = 0;
  char* end = nullptr;
  const long long x = std::strtoll(v.c_str(), &end, 10);
  if (v.empty() || *end != '\0' || errno != 0) at.fail("expected an integer, got '" + v + "'");
  return x;
}

inline std::uint64_t parse_unsigned(const std::string& v, const Cursor& at) {
  errno = 0;
  char* end = nullptr;
  if (!v.empty() && v[0] == '-') at.fail("expected a non-negative integer, got '" + v + "'");
  const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
  if (v.empty() || *end != '\0' || errno != 0) at.fail("expected a non-negative integer, got '" + v + "'");
  return x;
}

inline bool parse_bool(const std::string& v, const Cursor& at) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  at.fail("expected true|false, got '" + v + "'");
}

inline std::vector<double> parse_real_list(const std::string& v, const Cursor& at) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t off = 0;
    out.push_back(parse_real(trim(item, off), at));
  }
  if (out.empty()) at.fail("expected a comma-separated list of reals");
  return out;
}

}  // namespace detail

inline ExperimentFile parse_experiment(const std::string& text, const std::string& source = "<experiment>") {
  static const std::map<std::string, std::set<std::string>> schema{
      {"model", {"n", "j"}},
      {"disorder", {"law"}},
      {"ensemble", {"mode", "samples", "seed", "conditional_remainders", "pair_duhamels", "quadrature_nodes"}},
      {"grid", {"beta", "h"}},
      {"output", {"csv", "json", "samples"}}};

  ExperimentFile ex;
  detail::Cursor at{source};
  std::string section;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string raw;
  while (std::getline(in, raw)) {
    ++at.line;
    at.column = 1;
    // Strip trailing comments.
    const auto hash = raw.find('#');
    std::string body = hash == std::string::npos ? raw : raw.substr(0, hash);
    std::size_t off = 0;
    const std::string line = detail::trim(body, off);
    if (line.empty() || line[0] == ';') continue;
    at.column = static_cast<int>(off) + 1;
    if (line.front() == '[') {
      if (line.back() != ']') at.fail("unterminated section header");
      section = line.substr(1, line.size() - 2);
      if (!schema.count(section)) at.fail("unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) at.fail("expected 'key = value'");
    std::size_t key_off = 0, val_off = 0;
    const std::string key = detail::trim(line.substr(0, eq), key_off);
    const std::string value = detail::trim(line.substr(eq + 1), val_off);
    if (section.empty()) at.fail("key '" + key + "' outside of any section");
    if (!schema.at(section).count(key)) at.fail("unknown key '" + key + "' in [" + section + "]");
    const std::string qualified = section + "." + key;
    if (!seen.insert(qualified).second) at.fail("duplicate key '" + qualified + "'");
    at.column = static_cast<int>(off + eq + 1 + val_off) + 1;
    if (value.empty()) at.fail("empty value for '" + qualified + "'");

    if (qualified == "model.n") {
      ex.n_sites = static_cast<int>(detail::parse_integer(value, at));
    } else if (qualified == "model.j") {
      ex.j_coupling = detail::parse_real(value, at);
    } else if (qualified == "disorder.law") {
      if (value != "gaussian" && value != "rademacher" && value != "uniform") at.fail("unknown law '" + value + "'");
      ex.law = value;
    } else if (qualified == "ensemble.mode") {
      try {
        ex.mode = mode_from_name(value);
      } catch (const Error& e) {
        at.fail(e.what());
      }
    } else if (qualified == "ensemble.samples") {
      ex.samples = static_cast<int>(detail::parse_integer(value, at));
    } else if (qualified == "ensemble.seed") {
      ex.seed = detail::parse_unsigned(value, at);
    } else if (qualified == "ensemble.conditional_remainders") {
      ex.conditional_remainders = detail::parse_bool(value, at);
    } else if (qualified == "ensemble.pair_duhamels") {
      ex.pair_duhamels = detail::parse_bool(value, at);
    } else if (qualified == "ensemble.quadrature_nodes") {
      ex.quadrature_nodes = static_cast<int>(detail::parse_integer(value, at));
    } else if (qualified == "grid.beta") {
      ex.betas = detail::parse_real_list(value, at);
    } else if (qualified == "grid.h") {
      ex.hs = detail::parse_real_list(value, at);
    } else if (qualified == "output.csv") {
      ex.csv_path = value;
    } else if (qualified == "output.json") {
      ex.json_path = value;
    } else if (qualified == "output.samples") {
      ex.samples_path = value;
    }
  }
  if (!seen.count("model.n")) throw invalid_argument(source + ": missing required key model.n");
  if (!seen.count("grid.beta")) throw invalid_argument(source + ": missing required key grid.beta");
  if (!seen.count("grid.h")) throw invalid_argument(source + ": missing required key grid.h");
  if (!seen.count("output.csv")) throw invalid_argument(source + ": missing required key output.csv");
  return ex;
}

inline ExperimentFile load_experiment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open experiment file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_experiment(buf.str(), path);
}

/// Write through a temporary sibling and rename into place.
inline void write_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot write '" + tmp + "'");
    out << content;
    out.flush();
    if (!out) {
      std::remove(tmp.c_str());
      throw Error(ErrorKind::io, "write failed for '" + tmp + "'");
    }
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw Error(ErrorKind::io, "cannot rename output into '" + path + "'");
  }
}

/// CSV table for a sweep: two '#' provenance lines, the header, one row per
/// grid point.
inline std::string sweep_csv(const ExperimentFile& ex, const std::vector<SweepRecord>& records) {
  std::string out = std::string("# ") + version_string + "\n# config: " + ex.resolved().dump() + "\n";
  out += sweep_csv_header;
  out += "\n";
  for (const auto& r : records) out += sweep_csv_row(r) + "\n";
  return out;
}

inline json sweep_json(const ExperimentFile& ex, const std::vector<SweepRecord>& records) {
  json points = json::array();
  for (const auto& r : records) {
    json p;
    if (r.stats) {
      p = to_json(*r.stats);
      if (r.config.params.j_coupling > 0.0 && r.stats->has("duhamel_pair_mean"))
        p["overlap_identity"] = to_json(assemble_rau_identity(*r.stats, r.config.params));
      p["overlap_lower_bound"] = to_json(theorem_bound(r.config.params, *r.stats));
    } else {
      p = json{{"beta", r.config.params.beta}, {"h", r.config.params.h}, {"error", r.error}};
    }
    points.push_back(p);
  }
  return json{{"version", version_string}, {"config", ex.resolved()}, {"points", points}};
}

}  // namespace qsklab
