#pragma once

// Command-line front end. Exit codes: 0 pass, 1 check failure, 2 usage or
// configuration error, 3 resource cap.

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "qsklab/ensemble.hpp"
#include "qsklab/error.hpp"
#include "qsklab/experiment.hpp"
#include "qsklab/model.hpp"
#include "qsklab/observables.hpp"
#include "qsklab/verify.hpp"

namespace qsklab {

enum ExitCode : int { exit_ok = 0, exit_check_failed = 1, exit_usage = 2, exit_cap = 3 };

inline int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::cap_exceeded: return exit_cap;
    case ErrorKind::numerical: return exit_check_failed;
    case ErrorKind::invalid_argument:
    case ErrorKind::io: return exit_usage;
  }
  return exit_usage;
}

namespace cli_detail {

struct ModelFlags {
  std::optional<int> n;
  std::optional<double> beta;
  std::optional<double> h;
  std::optional<double> j;
  std::optional<std::string> law;
  std::optional<std::string> mode;
  std::optional<int> samples;
  std::optional<std::uint64_t> seed;
  int workers = static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));
  std::string out;
  bool json_output = false;
};

inline void add_model_flags(CLI::App* cmd, ModelFlags& f, bool with_ensemble) {
  cmd->add_option("--n", f.n, "number of sites");
  cmd->add_option("--beta", f.beta, "inverse temperature");
  cmd->add_option("--h", f.h, "transverse field");
  cmd->add_option("--j", f.j, "coupling strength J");
  cmd->add_option("--law", f.law, "disorder law")->check(CLI::IsMember({"gaussian", "rademacher", "uniform"}));
  cmd->add_option("--seed", f.seed, "master seed");
  if (with_ensemble) {
    cmd->add_option("--samples", f.samples, "disorder samples (monte_carlo, gauge_paired)");
    cmd->add_option("--mode", f.mode, "ensemble mode")->check(CLI::IsMember({"monte_carlo", "enumerate", "gauge_paired"}));
    cmd->add_option("--workers", f.workers, "worker threads")->check(CLI::PositiveNumber);
  }
  cmd->add_option("--out", f.out, "output file");
}

inline json document(const json& config, json body) {
  body["version"] = version_string;
  body["config"] = config;
  return body;
}

inline void print_suite(std::ostream& out, const SuiteReport& rep) {
  out << "verify " << rep.suite << "\n";
  int passed = 0;
  for (const auto& c : rep.checks) {
    passed += c.passed;
    std::ostringstream line;
    line << "  " << (c.passed ? "PASS" : "FAIL") << "  " << c.name << "  observed=" << std::setprecision(6) << c.observed
         << " " << c.relation << " " << c.threshold;
    out << line.str() << "\n";
  }
  for (const auto& b : rep.bounds) {
    out << "  " << b.name << ": lhs=" << format_double(b.lhs) << " rhs=" << format_double(b.rhs)
        << " margin=" << format_double(b.margin) << (b.satisfied ? "" : "  (violated)") << "\n";
    if (!b.satisfied) out << "  " << to_json(b).dump() << "\n";
  }
  if (rep.suite == "theorem") {
    out << "  E<R^2> = " << format_double(rep.summary.at("overlap_sq_mean").get<double>())
        << "  finite-N rhs = " << format_double(rep.summary.at("finite_rhs").get<double>())
        << "  asymptotic rhs = " << format_double(rep.summary.at("asymptotic_rhs").get<double>()) << "\n";
  }
  out << rep.suite << ": " << passed << "/" << rep.checks.size() << " checks passed\n";
}

inline EnsembleConfig ensemble_config(const ModelFlags& f) {
  if (!f.n) throw invalid_argument("--n is required");
  EnsembleConfig c;
  c.params = ModelParams{*f.n, f.beta.value_or(1.0), f.h.value_or(0.0), f.j.value_or(1.0)};
  c.spec = DisorderSpec::from_name(f.law.value_or("gaussian"));
  c.mode = mode_from_name(f.mode.value_or("monte_carlo"));
  c.n_samples = f.samples.value_or(100);
  c.master_seed = f.seed.value_or(0);
  return c;
}

inline json config_json(const EnsembleConfig& c) {
  return json{{"n", c.params.n_sites},
              {"beta", c.params.beta},
              {"h", c.params.h},
              {"j", c.params.j_coupling},
              {"law", c.spec.name()},
              {"mode", mode_name(c.mode)},
              {"samples", c.n_samples},
              {"seed", c.master_seed},
              {"conditional_remainders", c.use_conditional_remainders()},
              {"pair_duhamels", c.pair_duhamels},
              {"quadrature_nodes", c.quadrature_nodes}};
}

inline int cmd_verify(const std::string& suite, const ModelFlags& f, std::ostream& out) {
  VerifyOptions opt;
  opt.n_sites = f.n;
  opt.beta = f.beta;
  opt.h = f.h;
  opt.j_coupling = f.j;
  opt.law = f.law;
  if (f.mode) opt.mode = mode_from_name(*f.mode);
  opt.samples = f.samples;
  if (f.seed) opt.seed = *f.seed;
  opt.workers = f.workers;
  const SuiteReport rep = run_suite(suite, opt);
  json options{{"suite", suite}, {"seed", opt.seed}};
  if (f.n) options["n"] = *f.n;
  if (f.beta) options["beta"] = *f.beta;
  if (f.h) options["h"] = *f.h;
  if (f.j) options["j"] = *f.j;
  if (f.law) options["law"] = *f.law;
  if (f.mode) options["mode"] = *f.mode;
  if (f.samples) options["samples"] = *f.samples;
  const json doc = document(options, to_json(rep));
  if (f.json_output)
    out << doc.dump(2) << "\n";
  else
    print_suite(out, rep);
  if (!f.out.empty()) write_atomic(f.out, doc.dump(2) + "\n");
  return rep.passed() ? exit_ok : exit_check_failed;
}

inline int cmd_sample(const ModelFlags& f, const std::string& couplings_path, std::ostream& out) {
  if (!f.n && couplings_path.empty()) throw invalid_argument("--n is required");
  CouplingSample s;
  DisorderSpec spec = DisorderSpec::from_name(f.law.value_or("gaussian"));
  if (!couplings_path.empty()) {
    std::ifstream in(couplings_path);
    if (!in) throw Error(ErrorKind::io, "cannot open couplings file '" + couplings_path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    s = parse_coupling_sample(buf.str());
    if (f.n && *f.n != s.n_sites) throw invalid_argument("--n does not match the couplings file");
  }
  const ModelParams params{f.n.value_or(s.n_sites), f.beta.value_or(1.0), f.h.value_or(0.0), f.j.value_or(1.0)};
  params.validate();
  params.require_pairs();
  if (couplings_path.empty()) s = sample_couplings(spec, params.n_sites, f.seed.value_or(0));
  SampleReport r = sample_report(params, s);
  r.provenance.master_seed = f.seed.value_or(0);
  json doc = to_json(r, true);
  doc["gamma"] = s.gamma;
  doc["falk_bruch_margin"] = r.fb_margin;
  const json config{{"n", params.n_sites},
                    {"beta", params.beta},
                    {"h", params.h},
                    {"j", params.j_coupling},
                    {"law", s.kind},
                    {"seed", s.seed},
                    {"couplings", couplings_path}};
  doc = document(config, doc);
  out << doc.dump(2) << "\n";
  if (!f.out.empty()) write_atomic(f.out, doc.dump(2) + "\n");
  return exit_ok;
}

inline int cmd_ensemble(const ModelFlags& f, const std::string& jsonl_path, std::ostream& out) {
  const EnsembleConfig cfg = ensemble_config(f);
  validate(cfg);
  const json config = config_json(cfg);
  std::string lines;
  SampleSink sink;
  if (!jsonl_path.empty()) {
    lines = json{{"kind", "header"}, {"version", version_string}, {"config", config}}.dump() + "\n";
    sink = [&](const SampleReport& r) { lines += to_json(r).dump() + "\n"; };
  }
  const EnsembleStats stats = run_ensemble(cfg, f.workers, sink);
  json doc = document(config, to_json(stats));
  if (cfg.params.j_coupling > 0.0) {
    if (stats.has("duhamel_pair_mean")) doc["overlap_identity"] = to_json(assemble_rau_identity(stats, cfg.params));
    doc["overlap_lower_bound"] = to_json(theorem_bound(cfg.params, stats));
  }
  out << doc.dump(2) << "\n";
  if (!f.out.empty()) write_atomic(f.out, doc.dump(2) + "\n");
  if (!jsonl_path.empty()) write_atomic(jsonl_path, lines);
  return exit_ok;
}

inline int cmd_sweep(const std::string& path, int workers, std::ostream& out) {
  const ExperimentFile ex = load_experiment(path);
  ex.validate();
  std::string lines;
  SampleSink sink;
  if (!ex.samples_path.empty()) {
    lines = json{{"kind", "header"}, {"version", version_string}, {"config", ex.resolved()}}.dump() + "\n";
    sink = [&](const SampleReport& r) { lines += to_json(r).dump() + "\n"; };
  }
  const auto records = sweep(ex.configs(), workers, sink);
  write_atomic(ex.csv_path, sweep_csv(ex, records));
  if (!ex.json_path.empty()) write_atomic(ex.json_path, sweep_json(ex, records).dump(2) + "\n");
  if (!ex.samples_path.empty()) write_atomic(ex.samples_path, lines);
  int failed = 0;
  for (const auto& r : records) {
    out << std::setprecision(6) << "beta=" << r.config.params.beta << " h=" << r.config.params.h;
    if (r.stats) {
      out << "  E<R^2>=" << r.stats->mean("overlap_sq") << " +- " << std::setprecision(2)
          << r.stats->std_error("overlap_sq") << std::setprecision(6) << "  var=" << r.stats->overlap_variance() << "\n";
    } else {
      ++failed;
      out << "  error: " << r.error << "\n";
    }
  }
  out << records.size() << " grid points, " << failed << " failed; wrote " << ex.csv_path << "\n";
  return failed ? exit_check_failed : exit_ok;
}

inline int cmd_couplings(const ModelFlags& f, std::ostream& out) {
  if (!f.n) throw invalid_argument("--n is required");
  check_site_count(*f.n);
  const auto s = sample_couplings(DisorderSpec::from_name(f.law.value_or("gaussian")), *f.n, f.seed.value_or(0));
  const std::string text = serialize(s);
  if (f.out.empty())
    out << text;
  else
    write_atomic(f.out, text);
  return exit_ok;
}

}  // namespace cli_detail

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Numerical lab for the transverse-field Sherrington-Kirkpatrick model", "qsklab"};
  app.set_help_flag("--help", "print this help message and exit");
  app.set_version_flag("--version", std::string(version_string));
  app.require_subcommand(1);

  cli_detail::ModelFlags verify_flags, sample_flags, ensemble_flags, couplings_flags;
  std::string suite, experiment, couplings_path, jsonl_path;
  int sweep_workers = static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));

  auto* verify = app.add_subcommand("verify", "run an invariant suite");
  verify->add_option("suite", suite, "algebra | duhamel | lemmas | theorem")
      ->required()
      ->check(CLI::IsMember(suite_names()));
  cli_detail::add_model_flags(verify, verify_flags, true);
  verify->add_flag("--json", verify_flags.json_output, "print the JSON report");

  auto* sweep_cmd = app.add_subcommand("sweep", "run a (beta, h) sweep from an experiment file");
  sweep_cmd->add_option("file", experiment, "experiment file")->required();
  sweep_cmd->add_option("--workers", sweep_workers, "worker threads")->check(CLI::PositiveNumber);

  auto* sample = app.add_subcommand("sample", "diagnostics for one disorder realization");
  cli_detail::add_model_flags(sample, sample_flags, false);
  sample->add_option("--couplings", couplings_path, "read couplings from a file instead of sampling");

  auto* ensemble = app.add_subcommand("ensemble", "disorder-averaged statistics at one (beta, h)");
  cli_detail::add_model_flags(ensemble, ensemble_flags, true);
  ensemble->add_option("--jsonl", jsonl_path, "per-sample JSON-lines output");

  auto* couplings = app.add_subcommand("couplings", "draw and print one coupling sample");
  cli_detail::add_model_flags(couplings, couplings_flags, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? exit_ok : exit_usage;
  }

  try {
    if (*verify) return cli_detail::cmd_verify(suite, verify_flags, out);
    if (*sweep_cmd) return cli_detail::cmd_sweep(experiment, sweep_workers, out);
    if (*sample) return cli_detail::cmd_sample(sample_flags, couplings_path, out);
    if (*ensemble) return cli_detail::cmd_ensemble(ensemble_flags, jsonl_path, out);
    if (*couplings) return cli_detail::cmd_couplings(couplings_flags, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_usage;
  }
  return exit_usage;
}

}  // namespace qsklab
