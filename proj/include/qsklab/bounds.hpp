#pragma once

// Inequalities of the overlap lower-bound chain, each evaluated on concrete
// instances and reported with its margin.

#include <json.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "qsklab/hilbert.hpp"
#include "qsklab/model.hpp"
#include "qsklab/spectral.hpp"

namespace qsklab {

using json = nlohmann::json;

/// Ground-state energy density of the classical SK model with standard
/// Gaussian couplings (infinite volume), used as a cited constant.
inline constexpr double sk_ground_state_kappa = 0.763;

/// Slack applied to every inequality report.
inline constexpr double bound_slack = 1e-9;

struct BoundReport {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;
  bool satisfied = true;
  json context = json::object();
};

/// Report for lhs >= rhs.
inline BoundReport make_bound(std::string name, double lhs, double rhs, json context = json::object()) {
  BoundReport r{std::move(name), lhs, rhs, lhs - rhs, false, std::move(context)};
  r.satisfied = r.margin >= -bound_slack;
  return r;
}

/// Report for lhs == rhs within `tolerance`; margin = tolerance - |lhs - rhs|.
inline BoundReport make_identity(std::string name, double lhs, double rhs, double tolerance,
                                 json context = json::object()) {
  context["residual"] = lhs - rhs;
  context["tolerance"] = tolerance;
  context["relation"] = "equality";
  BoundReport r{std::move(name), lhs, rhs, tolerance - std::abs(lhs - rhs), false, std::move(context)};
  r.satisfied = r.margin >= -bound_slack && std::isfinite(lhs) && std::isfinite(rhs);
  return r;
}

inline json to_json(const BoundReport& r) {
  return json{{"kind", "bound"},       {"name", r.name},           {"lhs", r.lhs},
              {"rhs", r.rhs},          {"margin", r.margin},       {"satisfied", r.satisfied},
              {"context", r.context}};
}

// ---------------------------------------------------------------------------
// Phi and the Dyson-Lieb-Simon bound

/// Phi(t) defined implicitly by Phi(r tanh r) = tanh(r) / r, r >= 0.
/// The root of g(r) = r tanh r - t is found by Newton steps safeguarded by
/// bisection on [0, max(2, t + 1)].
inline double phi(double t) {
  if (!(t >= 0.0) || std::isnan(t)) throw invalid_argument("phi: t >= 0 required");
  if (t == 0.0) return 1.0;
  if (std::isinf(t)) return 0.0;
  double lo = 0.0, hi = std::max(2.0, t + 1.0);
  double r = t < 1.0 ? std::sqrt(t) : t;
  r = std::clamp(r, lo, hi);
  for (int it = 0; it < 200; ++it) {
    const double th = std::tanh(r);
    const double g = r * th - t;
    if (g == 0.0) break;
    if (g < 0.0) lo = r; else hi = r;
    const double dg = th + r * (1.0 - th * th);
    double next = r - g / dg;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - r) <= 4 * std::numeric_limits<double>::epsilon() * r) {
      r = next;
      break;
    }
    r = next;
  }
  if (std::abs(r * std::tanh(r) - t) > 1e-12 * std::max(1.0, t))
    throw numerical_failure("phi: root finding did not converge");
  return std::tanh(r) / r;
}

/// (1 - e^{-t}) / t, with value 1 at t = 0.
inline double dls_lower(double t) {
  if (!(t >= 0.0)) throw invalid_argument("dls_lower: t >= 0 required");
  if (t == 0.0) return 1.0;
  return -std::expm1(-t) / t;
}

// ---------------------------------------------------------------------------
// Falk-Bruch

/// [A, [H, A]].
inline Operator double_commutator(const Operator& h_op, const Operator& a_op) {
  if (h_op.dim() != a_op.dim()) throw invalid_argument("double_commutator: dimension mismatch");
  if (a_op.is_diagonal() && a_op.is_real()) {
    // [A,[H,A]]_bc = -(a_b - a_c)^2 H_bc for diagonal A.
    const RealVector a = a_op.diagonal_values();
    ComplexMatrix c = h_op.matrix();
    for (Eigen::Index col = 0; col < c.cols(); ++col)
      for (Eigen::Index row = 0; row < c.rows(); ++row) {
        const double d = a(row) - a(col);
        c(row, col) *= -d * d;
      }
    return Operator::from_matrix(std::move(c));
  }
  const Operator inner = commutator(h_op, a_op);
  return commutator(a_op, inner);
}

/// Sites and field strength that turn the double commutator of
/// A = sigma^z_a sigma^z_b into 4 h (sigma^x_a + sigma^x_b).
struct TransverseChain {
  double h = 0.0;
  int site_a = 0;
  int site_b = 1;
};

struct FalkBruchReport {
  double duhamel = 0.0;           // (A, A)
  double a_sq = 0.0;              // <A^2>
  double commutator_mean = 0.0;   // <[A, [H, A]]>
  BoundReport exact;              // (A,A) >= <A^2> Phi(beta <[A,[H,A]]> / (4 <A^2>))
  std::optional<BoundReport> x_weakened;  // (A,A) >= Phi(beta h <sigma^x_a + sigma^x_b>)
  std::optional<BoundReport> constant;    // (A,A) >= Phi(2 beta h)
  std::optional<BoundReport> dls;         // (A,A) >= (1 - e^{-2 beta h}) / (2 beta h)

  bool satisfied() const {
    bool ok = exact.satisfied;
    for (const auto* link : {&x_weakened, &constant, &dls})
      if (link->has_value()) ok = ok && (*link)->satisfied;
    return ok;
  }

  double min_margin() const {
    double m = exact.margin;
    for (const auto* link : {&x_weakened, &constant, &dls})
      if (link->has_value()) m = std::min(m, (*link)->margin);
    return m;
  }
};

namespace detail {

inline double nonnegative_argument(double t, double scale, const char* what) {
  if (t >= 0.0) return t;
  if (t > -1e-10 * std::max(1.0, scale)) return 0.0;
  throw numerical_failure(std::string(what) + ": negative Phi argument " + std::to_string(t));
}

}  // namespace detail

inline FalkBruchReport falk_bruch_check(const GibbsState& state, const Operator& h_op, const Operator& a_op,
                                        std::optional<TransverseChain> chain = std::nullopt) {
  detail::require_hermitian(a_op, "falk_bruch_check");
  const double beta = state.beta();
  FalkBruchReport r;
  r.duhamel = duhamel2(state, a_op, a_op);
  r.a_sq = gibbs_expectation_real(state, op_product(a_op, a_op));
  if (!(r.a_sq > 0.0)) throw invalid_argument("falk_bruch_check: <A^2> must be positive");
  r.commutator_mean = gibbs_expectation_real(state, double_commutator(h_op, a_op));
  const double t = detail::nonnegative_argument(beta * r.commutator_mean / (4.0 * r.a_sq), beta * h_op.max_abs(),
                                                "falk_bruch_check");
  json ctx{{"beta", beta}, {"a_sq", r.a_sq}, {"commutator_mean", r.commutator_mean}, {"phi_argument", t}};
  r.exact = make_bound("falk_bruch", r.duhamel, r.a_sq * phi(t), ctx);

  if (chain) {
    const int n = state.n_sites();
    const Operator xs = pauli_op(Axis::x, chain->site_a, n) + pauli_op(Axis::x, chain->site_b, n);
    const double x_sum = gibbs_expectation_real(state, xs);
    const double tx = detail::nonnegative_argument(beta * chain->h * x_sum, beta * chain->h, "falk_bruch_check");
    r.x_weakened = make_bound("falk_bruch_x_weakened", r.duhamel, phi(tx),
                              json{{"beta", beta}, {"h", chain->h}, {"x_sum", x_sum}, {"phi_argument", tx}});
    const double tc = 2.0 * beta * chain->h;
    r.constant = make_bound("falk_bruch_constant", r.duhamel, phi(tc), json{{"phi_argument", tc}});
    r.dls = make_bound("falk_bruch_dls", r.duhamel, dls_lower(tc), json{{"t", tc}});
  }
  return r;
}

// ---------------------------------------------------------------------------
// Approximate integration by parts

struct AipRemainder {
  int i = 0;
  int j = 1;
  double delta_value = 0.0;      // E gamma f(gamma) - E f'(gamma), other couplings frozen
  double bound_value = 0.0;      // (3/2) E|gamma|^3 sup_f2_estimate
  double sup_f2_estimate = 0.0;  // 6 beta^2 J^2 / N
  std::size_t nodes = 0;

  bool within_bound() const { return std::abs(delta_value) <= bound_value + bound_slack; }
};

/// Delta(f) = E gamma f(gamma) - E f'(gamma) for a synthetic f, integrated
/// with the law's single-coupling rule.
inline double aip_remainder_synthetic(const DisorderSpec& spec, const std::function<double(double)>& f,
                                      const std::function<double(double)>& f_prime,
                                      int n_nodes = default_quadrature_nodes) {
  const auto rule = quadrature_rule(spec, n_nodes);
  double acc = 0.0;
  for (std::size_t k = 0; k < rule.size(); ++k) {
    const double g = rule.nodes[k];
    acc += rule.weights[k] * (g * f(g) - f_prime(g));
  }
  return acc;
}

inline double aip_sup_f2(const ModelParams& params) {
  return 6.0 * params.beta * params.beta * params.j_coupling * params.j_coupling / params.n_sites;
}

/// Conditional remainder for f(gamma_ij) = <sigma^z_i sigma^z_j>, all other
/// couplings frozen at their values in `sample`; f' comes from the exact
/// disorder-derivative identity (beta J / sqrt N) (A; A).
inline AipRemainder aip_remainder(const ModelParams& params, const CouplingSample& sample, int i, int j,
                                  const DisorderSpec& spec, int n_nodes = default_quadrature_nodes) {
  params.validate();
  params.require_pairs();
  if (!spec.standard()) throw invalid_argument("aip_remainder: law must be symmetric with unit variance");
  const auto rule = quadrature_rule(spec, n_nodes);
  const auto a_op = zz_op(i, j, params.n_sites);
  const double scale = params.beta * params.j_coupling / std::sqrt(static_cast<double>(params.n_sites));
  AipRemainder r;
  r.i = i;
  r.j = j;
  r.nodes = rule.size();
  CouplingSample s = sample;
  double acc = 0.0;
  for (std::size_t k = 0; k < rule.size(); ++k) {
    const double g = rule.nodes[k];
    s.set(i, j, g);
    const auto state = gibbs_state(build_hamiltonian(params, s), params.beta);
    const double f = gibbs_expectation_real(state, a_op);
    const double f_prime = scale * (duhamel2(state, a_op, a_op) - f * f);
    acc += rule.weights[k] * (g * f - f_prime);
  }
  r.delta_value = acc;
  r.sup_f2_estimate = aip_sup_f2(params);
  r.bound_value = 1.5 * spec.third_abs_moment() * r.sup_f2_estimate;
  return r;
}

/// Upper bound on |Delta_N|: (3 beta^2 J^2 c3 / (4 sqrt N)) (1 - 1/N) E|gamma|^3 with c3 = 6.
inline double delta_n_bound(const ModelParams& params, double third_abs_moment) {
  const double n = params.n_sites;
  const double bj = params.beta * params.j_coupling;
  return 3.0 * bj * bj * 6.0 / (4.0 * std::sqrt(n)) * (1.0 - 1.0 / n) * third_abs_moment;
}

// ---------------------------------------------------------------------------
// Classical ground state

inline constexpr int default_ground_state_cap = 20;

struct GroundState {
  double energy = 0.0;
  std::uint64_t index = 0;   // basis index of the reported minimizer
  std::vector<int> spins;    // s_i in {+1, -1}
};

/// Exhaustive minimum of -(1/sqrt N) sum gamma_ij s_i s_j. The last spin is
/// pinned to +1 (global flip symmetry); ties go to the lowest index.
inline GroundState classical_ground_state(const CouplingSample& sample, int cap = default_ground_state_cap) {
  sample.validate();
  const int n = sample.n_sites;
  if (n > std::min(cap, 30)) {
    throw cap_exceeded("classical_ground_state: N = " + std::to_string(n) + " exceeds cap " +
                       std::to_string(std::min(cap, 30)));
  }
  const std::uint64_t count = std::uint64_t{1} << (n - 1);
  GroundState gs;
  gs.energy = std::numeric_limits<double>::infinity();
  for (std::uint64_t b = 0; b < count; ++b) {
    const double e = classical_energy(sample, b);
    if (e < gs.energy) {
      gs.energy = e;
      gs.index = b;
    }
  }
  gs.spins.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) gs.spins[i] = spin_of(gs.index, i);
  return gs;
}

// ---------------------------------------------------------------------------
// Overlap lower bound

/// E<R^2> against the finite-N chain
///   ((N-1)/N) (1 - e^{-2 beta h})/(2 beta h) + (2/(beta J)) e_gs
///     - (2/(beta J)) Delta_N_bound + 1/N,
/// with e_gs the mean classical ground-state energy density; the asymptotic
/// form (1 - e^{-2 beta h})/(2 beta h) - 2 kappa/(beta J) goes in the context.
inline BoundReport theorem_bound(const ModelParams& params, double overlap_sq_mean, double gs_mean_density,
                                 double third_abs_moment) {
  params.validate();
  params.require_pairs();
  params.require_positive_j();
  const double n = params.n_sites;
  const double bj = params.beta * params.j_coupling;
  const double dls = dls_lower(2.0 * params.beta * params.h);
  const double dn_bound = delta_n_bound(params, third_abs_moment);
  const double finite_rhs = (n - 1.0) / n * dls + 2.0 / bj * gs_mean_density - 2.0 / bj * dn_bound + 1.0 / n;
  const double asymptotic_rhs = dls - 2.0 * sk_ground_state_kappa / bj;
  json ctx{{"n", params.n_sites},
           {"beta", params.beta},
           {"h", params.h},
           {"j", params.j_coupling},
           {"dls", dls},
           {"gs_mean_density", gs_mean_density},
           {"delta_n_bound", dn_bound},
           {"kappa", sk_ground_state_kappa},
           {"asymptotic_rhs", asymptotic_rhs},
           {"asymptotic_margin", overlap_sq_mean - asymptotic_rhs}};
  return make_bound("overlap_lower_bound", overlap_sq_mean, finite_rhs, std::move(ctx));
}

}  // namespace qsklab
