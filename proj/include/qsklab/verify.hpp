#pragma once

// Invariant suites behind `qsklab verify`: algebra, duhamel, lemmas, theorem.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "qsklab/bounds.hpp"
#include "qsklab/ensemble.hpp"
#include "qsklab/hilbert.hpp"
#include "qsklab/model.hpp"
#include "qsklab/rng.hpp"
#include "qsklab/spectral.hpp"

namespace qsklab {

struct Check {
  std::string name;
  double observed = 0.0;
  double threshold = 0.0;
  std::string relation;  // "<=" or ">="
  bool passed = false;
};

inline Check check_at_most(std::string name, double observed, double threshold) {
  return {std::move(name), observed, threshold, "<=", observed <= threshold};
}

inline Check check_at_least(std::string name, double observed, double threshold) {
  return {std::move(name), observed, threshold, ">=", observed >= threshold};
}

inline json to_json(const Check& c) {
  return json{{"name", c.name}, {"observed", c.observed}, {"threshold", c.threshold},
              {"relation", c.relation}, {"passed", c.passed}};
}

struct SuiteReport {
  std::string suite;
  std::vector<Check> checks;
  std::vector<BoundReport> bounds;
  json summary = json::object();

  bool passed() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }
};

inline json to_json(const SuiteReport& r) {
  json checks = json::array();
  for (const auto& c : r.checks) checks.push_back(to_json(c));
  json bounds = json::array();
  for (const auto& b : r.bounds) bounds.push_back(to_json(b));
  return json{{"suite", r.suite}, {"passed", r.passed()}, {"checks", checks}, {"bounds", bounds},
              {"summary", r.summary}};
}

/// Overrides for the built-in suite defaults.
struct VerifyOptions {
  std::optional<int> n_sites;
  std::optional<double> beta;
  std::optional<double> h;
  std::optional<double> j_coupling;
  std::optional<std::string> law;
  std::optional<EnsembleMode> mode;
  std::optional<int> samples;
  std::uint64_t seed = 20240601;
  int workers = 1;
};

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"algebra", "duhamel", "lemmas", "theorem"};
  return names;
}

// ---------------------------------------------------------------------------
// algebra

namespace detail {

inline Axis third_axis(Axis a, Axis b) { return static_cast<Axis>(3 - static_cast<int>(a) - static_cast<int>(b)); }

/// Levi-Civita sign of (a, b, c) for a != b.
inline double levi_civita(Axis a, Axis b) {
  const int ia = static_cast<int>(a), ib = static_cast<int>(b);
  return ((ib - ia + 3) % 3 == 1) ? 1.0 : -1.0;
}

}  // namespace detail

inline SuiteReport verify_algebra(const VerifyOptions& opt = {}) {
  const int n_max = opt.n_sites.value_or(6);
  if (n_max < 1) throw invalid_argument("verify algebra: --n must be >= 1");
  check_site_count(n_max);
  constexpr double tol = 1e-10;
  constexpr Axis axes[] = {Axis::x, Axis::y, Axis::z};
  SuiteReport rep;
  rep.suite = "algebra";
  Stream rng = make_stream(opt.seed);
  for (int n = 1; n <= n_max; ++n) {
    const std::string tag = " N=" + std::to_string(n);
    const Operator id = Operator::identity(n);
    std::vector<std::vector<Operator>> sigma(3);
    for (Axis a : axes)
      for (int k = 0; k < n; ++k) sigma[static_cast<int>(a)].push_back(pauli_op(a, k, n));

    double sq = 0.0, herm = 0.0;
    for (const auto& row : sigma)
      for (const auto& s : row) {
        sq = std::max(sq, max_abs_diff(op_product(s, s), id));
        herm = std::max(herm, (s.matrix() - s.matrix().adjoint()).cwiseAbs().maxCoeff());
      }
    rep.checks.push_back(check_at_most("pauli squares to identity" + tag, sq, tol));
    rep.checks.push_back(check_at_most("pauli hermitian" + tag, herm, tol));

    double comm = 0.0, anti = 0.0;
    for (Axis a : axes)
      for (Axis b : axes)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l) {
            const Operator& sa = sigma[static_cast<int>(a)][k];
            const Operator& sb = sigma[static_cast<int>(b)][l];
            ComplexMatrix expected = ComplexMatrix::Zero(sa.dim(), sa.dim());
            if (k == l && a != b)
              expected = cplx(0.0, 2.0 * detail::levi_civita(a, b)) *
                         sigma[static_cast<int>(detail::third_axis(a, b))][k].matrix();
            comm = std::max(comm, (commutator(sa, sb).matrix() - expected).cwiseAbs().maxCoeff());
            if (k == l) {
              const ComplexMatrix ac = sa.matrix() * sb.matrix() + sb.matrix() * sa.matrix();
              const ComplexMatrix want = a == b ? ComplexMatrix(2.0 * id.matrix()) : ComplexMatrix::Zero(ac.rows(), ac.cols());
              anti = std::max(anti, (ac - want).cwiseAbs().maxCoeff());
            }
          }
    rep.checks.push_back(check_at_most("pauli commutators" + tag, comm, tol));
    rep.checks.push_back(check_at_most("pauli anticommutators" + tag, anti, tol));

    const Operator flip = global_flip(n);
    rep.checks.push_back(check_at_most("global flip unitary" + tag,
                                       (flip.matrix() * flip.matrix().adjoint() - id.matrix()).cwiseAbs().maxCoeff(),
                                       tol));
    double z2 = 0.0, z_odd = 0.0;
    for (int trial = 0; trial < 3; ++trial) {
      const auto sample = n >= 2 ? sample_couplings(DisorderSpec::gaussian(), n, rng) : CouplingSample::constant(1, 0.0);
      const Operator h_op = build_hamiltonian(ModelParams{n, 1.0, 0.7, 1.0}, sample);
      z2 = std::max(z2, max_abs_diff(op_product(h_op, flip), op_product(flip, h_op)));
      for (int k = 0; k < n; ++k) {
        const ComplexMatrix conj = flip.matrix() * sigma[2][k].matrix() * flip.matrix().adjoint();
        z_odd = std::max(z_odd, (conj + sigma[2][k].matrix()).cwiseAbs().maxCoeff());
      }
    }
    rep.checks.push_back(check_at_most("Z2 invariance of H" + tag, z2, tol));
    rep.checks.push_back(check_at_most("flip reverses sigma^z" + tag, z_odd, tol));

    if (n >= 2) {
      const auto sample = sample_couplings(DisorderSpec::gaussian(), n, rng);
      std::vector<int> eps(static_cast<std::size_t>(n));
      std::uniform_int_distribution<int> coin(0, 1);
      for (auto& e : eps) e = coin(rng) ? 1 : -1;
      const ModelParams p{n, 1.0, 0.7, 1.0};
      const RealVector e1 = eigenvalues_of(build_hamiltonian(p, sample));
      const RealVector e2 = eigenvalues_of(build_hamiltonian(p, gauge_transform(sample, eps)));
      rep.checks.push_back(check_at_most("gauge-transformed spectrum" + tag, (e1 - e2).cwiseAbs().maxCoeff(), 1e-9));
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// duhamel

namespace detail {

inline Operator random_observable(int n, Stream& rng) {
  std::uniform_int_distribution<int> site(0, n - 1);
  std::uniform_int_distribution<int> pick(0, n >= 2 ? 2 : 1);
  switch (pick(rng)) {
    case 0: return pauli_op(Axis::z, site(rng), n);
    case 1: return pauli_op(Axis::x, site(rng), n);
    default: {
      const int i = site(rng);
      int j = site(rng);
      while (j == i) j = site(rng);
      return zz_op(std::min(i, j), std::max(i, j), n);
    }
  }
}

/// beta^2 (A, A) - [d^2 log Z(H - xA)/dx^2 + beta^2 <A>^2] by a 5-point stencil.
inline double generating_residual(const Operator& h_op, const Operator& a_op, double beta) {
  const double s = 1e-3;
  auto f = [&](double x) { return log_partition_perturbed(h_op, a_op, x, beta); };
  const double second = (-f(2 * s) + 16 * f(s) - 30 * f(0) + 16 * f(-s) - f(-2 * s)) / (12 * s * s);
  const auto state = gibbs_state(h_op, beta);
  const double mean = gibbs_expectation_real(state, a_op);
  return std::abs(beta * beta * duhamel2(state, a_op, a_op) - (second + beta * beta * mean * mean));
}

}  // namespace detail

inline SuiteReport verify_duhamel(const VerifyOptions& opt = {}) {
  SuiteReport rep;
  rep.suite = "duhamel";
  Stream rng = make_stream(opt.seed);

  for (double bh : {0.01, 0.1, 1.0, 10.0}) {
    const Operator h_op = pauli_op(Axis::x, 0, 1).scaled(-bh);
    const auto state = gibbs_state(h_op, 1.0);
    const Operator sz = pauli_op(Axis::z, 0, 1);
    const double got = duhamel2(state, sz, sz);
    rep.checks.push_back(
        check_at_most("single spin tanh(x)/x at x=" + format_double(bh), std::abs(got - std::tanh(bh) / bh), 1e-10));
  }

  const int n_max = std::min(opt.n_sites.value_or(5), 5);
  std::uniform_int_distribution<int> size(1, n_max);
  std::uniform_real_distribution<double> beta_d(0.3, 3.0), h_d(0.0, 1.5), j_d(0.5, 1.5);
  double gen = 0.0, sym = 0.0, static_excess = -1.0, connected_min = 1.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = size(rng);
    const ModelParams p{n, beta_d(rng), h_d(rng), j_d(rng)};
    const auto sample = n >= 2 ? sample_couplings(DisorderSpec::gaussian(), n, rng) : CouplingSample::constant(1, 0.0);
    const Operator h_op = build_hamiltonian(p, sample);
    const Operator a_op = detail::random_observable(n, rng);
    const Operator b_op = detail::random_observable(n, rng);
    gen = std::max(gen, detail::generating_residual(h_op, a_op, p.beta));
    const auto state = gibbs_state(h_op, p.beta);
    sym = std::max(sym, std::abs(duhamel2(state, a_op, b_op) - duhamel2(state, b_op, a_op)));
    const double aa = duhamel2(state, a_op, a_op);
    static_excess = std::max(static_excess, aa - gibbs_expectation_real(state, op_product(a_op, a_op)));
    connected_min = std::min(connected_min, connected_duhamel2(state, a_op));
  }
  rep.checks.push_back(check_at_most("generating function second derivative (50 instances)", gen, 1e-6));
  rep.checks.push_back(check_at_most("symmetry (A,B) = (B,A)", sym, 1e-10));
  rep.checks.push_back(check_at_most("(A,A) <= <A^2>", static_excess, 1e-12));
  rep.checks.push_back(check_at_least("(A;A) >= 0", connected_min, -1e-12));

  double commuting = 0.0, third = 0.0, third_max = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 4;
    const ModelParams p{n, beta_d(rng), 0.0, 1.0};
    const auto sample = sample_couplings(DisorderSpec::gaussian(), n, rng);
    const Operator h_op = build_hamiltonian(p, sample);
    const auto state = gibbs_state(h_op, p.beta);
    for (auto [i, j] : site_pairs(n)) {
      const Operator a_op = zz_op(i, j, n);
      commuting = std::max(commuting, std::abs(duhamel2(state, a_op, a_op) - 1.0));
    }
    const Operator a_op = zz_op(0, 1, n);
    const double m = gibbs_expectation_real(state, a_op);
    const auto c3 = connected_duhamel3(h_op, a_op, p.beta);
    third = std::max(third, std::abs(c3.value - (2 * m * m * m - 2 * m)));
    third_max = std::max(third_max, std::abs(c3.value));
  }
  rep.checks.push_back(check_at_most("commuting case (A,A) = 1", commuting, 1e-10));
  rep.checks.push_back(check_at_most("third cumulant, commuting case", third, 1e-5));

  double deriv = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 3 + trial % 2;
    const ModelParams p{n, beta_d(rng), h_d(rng), 1.0};
    const auto sample = sample_couplings(DisorderSpec::gaussian(), n, rng);
    deriv = std::max(deriv, disorder_derivative_check(p, sample, 0, 1));
    const auto c3 = connected_duhamel3(build_hamiltonian(p, sample), zz_op(0, 1, n), p.beta);
    third_max = std::max(third_max, std::abs(c3.value));
  }
  rep.checks.push_back(check_at_most("d<A>/dgamma = (beta J/sqrt N)(A;A)", deriv, 1e-6));
  rep.checks.push_back(check_at_most("|(A;A;A)| <= 6", third_max, 6.0 + 1e-3));

  // Near-degenerate levels: the kernel must be continuous as the gap closes.
  double continuity = 0.0;
  for (double gap : {1e-6, 1e-9, 1e-13}) {
    RealVector d(2);
    d << 0.0, gap;
    const auto state = gibbs_state(Operator::diagonal(d) + pauli_op(Axis::x, 0, 1).scaled(1e-14), 2.0);
    continuity = std::max(continuity, std::abs(duhamel2(state, pauli_op(Axis::x, 0, 1), pauli_op(Axis::x, 0, 1)) -
                                               std::tanh(gap) / gap));
  }
  rep.checks.push_back(check_at_most("near-degenerate continuity", continuity, 1e-8));
  return rep;
}

// ---------------------------------------------------------------------------
// lemmas

inline EnsembleConfig lemmas_config(const VerifyOptions& opt) {
  EnsembleConfig c;
  c.params = ModelParams{opt.n_sites.value_or(4), opt.beta.value_or(1.0), opt.h.value_or(0.4), opt.j_coupling.value_or(1.0)};
  c.spec = DisorderSpec::from_name(opt.law.value_or("rademacher"));
  c.mode = opt.mode.value_or(c.spec.discrete() ? EnsembleMode::enumerate : EnsembleMode::monte_carlo);
  c.n_samples = opt.samples.value_or(200);
  c.master_seed = opt.seed;
  return c;
}

inline SuiteReport verify_lemmas(const VerifyOptions& opt = {}) {
  const EnsembleConfig cfg = lemmas_config(opt);
  validate(cfg);
  cfg.params.require_positive_j();
  SuiteReport rep;
  rep.suite = "lemmas";

  auto cube = [](double g) { return g * g * g; };
  auto cube_prime = [](double g) { return 3 * g * g; };
  rep.checks.push_back(check_at_most(
      "AIP synthetic rademacher gamma^3 = -2",
      std::abs(aip_remainder_synthetic(DisorderSpec::rademacher(), cube, cube_prime) + 2.0), 1e-14));
  rep.checks.push_back(check_at_most("AIP synthetic gaussian gamma^3 = 0",
                                     std::abs(aip_remainder_synthetic(DisorderSpec::gaussian(), cube, cube_prime)),
                                     1e-10));

  const EnsembleStats stats = run_ensemble(cfg, opt.workers);
  const auto& p = cfg.params;
  const int n = p.n_sites;

  if (stats.has("max_aip_ratio")) {
    rep.checks.push_back(check_at_most("AIP physical |Delta| / bound", stats.at("max_aip_ratio").max(), 1.0));
  } else {
    double worst = 0.0;
    const int probes = std::min(cfg.n_samples, 4);
    for (int k = 0; k < probes && cfg.spec.standard(); ++k) {
      const auto s = sample_couplings(cfg.spec, n, derive_seed(cfg.master_seed, static_cast<std::uint64_t>(k)));
      for (auto [i, j] : site_pairs(n)) {
        const auto r = aip_remainder(p, s, i, j, cfg.spec, cfg.quadrature_nodes);
        worst = std::max(worst, std::abs(r.delta_value) / r.bound_value);
      }
    }
    rep.checks.push_back(check_at_most("AIP physical |Delta| / bound (probe samples)", worst, 1.0));
  }

  double third = 0.0;
  for (int k = 0; k < 8; ++k) {
    const auto s = sample_couplings(cfg.spec, n, derive_seed(cfg.master_seed ^ 0x5bd1e995ULL, k));
    third = std::max(third, std::abs(connected_duhamel3(build_hamiltonian(p, s), zz_op(0, 1, n), p.beta).value));
  }
  rep.checks.push_back(check_at_most("|(A;A;A)| <= 6", third, 6.0 + 1e-3));

  const BoundReport rau = assemble_rau_identity(stats, p);
  rep.bounds.push_back(rau);
  rep.checks.push_back(check_at_most("overlap identity residual", std::abs(rau.lhs - rau.rhs),
                                     rau.context.at("tolerance").get<double>()));
  const auto [dn, src] = stats.delta_n();
  rep.checks.push_back(check_at_most("|Delta_N| <= bound (" + src + ")", std::abs(dn),
                                     delta_n_bound(p, cfg.spec.third_abs_moment())));
  rep.checks.push_back(check_at_least("Falk-Bruch chain margin", stats.at("fb_margin").min(), -bound_slack));
  rep.checks.push_back(check_at_least("<U> >= classical ground state", stats.at("variational_gap").min(), -1e-9));
  rep.checks.push_back(check_at_most("per-sample |<m>|",
                                     std::max(std::abs(stats.at("m1").min()), std::abs(stats.at("m1").max())), 1e-10));
  if (stats.exact) {
    rep.checks.push_back(check_at_most("E<sigma_1 sigma_2> = 0", std::abs(stats.mean("zz01")), 1e-12));
    rep.checks.push_back(check_at_most("E<m^2> = 1/N", std::abs(stats.mean("m2") - 1.0 / n), 1e-10));
    rep.checks.push_back(
        check_at_most("E<m^4> = (3N-2)/N^3", std::abs(stats.mean("m4") - (3.0 * n - 2.0) / (1.0 * n * n * n)), 1e-10));
  }
  rep.summary = to_json(stats);
  return rep;
}

// ---------------------------------------------------------------------------
// theorem

inline EnsembleConfig theorem_config(const VerifyOptions& opt) {
  EnsembleConfig c;
  c.params = ModelParams{opt.n_sites.value_or(8), opt.beta.value_or(20.0), opt.h.value_or(0.05), opt.j_coupling.value_or(1.0)};
  c.spec = DisorderSpec::from_name(opt.law.value_or("gaussian"));
  c.mode = opt.mode.value_or(EnsembleMode::monte_carlo);
  c.n_samples = opt.samples.value_or(200);
  c.master_seed = opt.seed;
  c.conditional_remainders = false;
  return c;
}

inline constexpr double theorem_min_variance = 0.05;

inline SuiteReport verify_theorem(const VerifyOptions& opt = {}) {
  const EnsembleConfig cfg = theorem_config(opt);
  validate(cfg);
  cfg.params.require_positive_j();
  SuiteReport rep;
  rep.suite = "theorem";
  const EnsembleStats stats = run_ensemble(cfg, opt.workers);
  const BoundReport chain = theorem_bound(cfg.params, stats);
  rep.bounds.push_back(chain);
  rep.checks.push_back(check_at_least("overlap variance", stats.overlap_variance(), theorem_min_variance));
  rep.checks.push_back(check_at_most("E<R_12>", std::abs(stats.mean("overlap_first")), 1e-12));
  rep.checks.push_back(check_at_least("finite-N chain margin", chain.margin, -bound_slack));
  rep.checks.push_back(check_at_least("Falk-Bruch chain margin", stats.at("fb_margin").min(), -bound_slack));
  rep.summary = to_json(stats);
  rep.summary["overlap_sq_mean"] = stats.mean("overlap_sq");
  rep.summary["finite_rhs"] = chain.rhs;
  rep.summary["asymptotic_rhs"] = chain.context.at("asymptotic_rhs");
  return rep;
}

inline SuiteReport run_suite(const std::string& name, const VerifyOptions& opt = {}) {
  if (name == "algebra") return verify_algebra(opt);
  if (name == "duhamel") return verify_duhamel(opt);
  if (name == "lemmas") return verify_lemmas(opt);
  if (name == "theorem") return verify_theorem(opt);
  throw invalid_argument("unknown suite '" + name + "' (expected algebra|duhamel|lemmas|theorem)");
}

}  // namespace qsklab
