#pragma once

// Per-realization observables. Two-replica quantities are computed on the
// single-copy space: in the product Gibbs state of two replicas sharing the
// couplings, <R_12^2> = (1/N^2) sum_ij <sigma^z_i sigma^z_j>^2.

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>

#include "qsklab/bounds.hpp"
#include "qsklab/hilbert.hpp"
#include "qsklab/model.hpp"
#include "qsklab/spectral.hpp"

namespace qsklab {

struct CorrelatorMatrix {
  int n_sites = 0;
  RealMatrix zz;      // <sigma^z_i sigma^z_j>, unit diagonal
  RealVector x_field; // <sigma^x_i>
  RealVector z_field; // <sigma^z_i>
};

inline CorrelatorMatrix correlator_matrix(const GibbsState& state, int n_sites) {
  check_site_count(n_sites);
  if (state.dim() != hilbert_dim(n_sites)) throw invalid_argument("correlator_matrix: dimension mismatch");
  const auto dim = state.dim();
  const RealVector& p = state.populations();
  CorrelatorMatrix c;
  c.n_sites = n_sites;
  c.zz = RealMatrix::Identity(n_sites, n_sites);
  c.z_field = RealVector::Zero(n_sites);
  c.x_field = RealVector::Zero(n_sites);
  for (Eigen::Index b = 0; b < dim; ++b) {
    const double pb = p(b);
    for (int i = 0; i < n_sites; ++i) {
      const int si = spin_of(b, i);
      c.z_field(i) += pb * si;
      for (int j = i + 1; j < n_sites; ++j) c.zz(i, j) += pb * si * spin_of(b, j);
    }
  }
  for (int i = 0; i < n_sites; ++i) {
    c.zz(i, i) = 1.0;
    for (int j = i + 1; j < n_sites; ++j) c.zz(j, i) = c.zz(i, j);
  }
  // <sigma^x_i> = 2 Re sum_{b: bit i = 0} rho(b, b ^ 2^i)
  const ComplexMatrix rho = density_matrix(state);
  for (int i = 0; i < n_sites; ++i) {
    const Eigen::Index mask = Eigen::Index{1} << i;
    double acc = 0.0;
    for (Eigen::Index b = 0; b < dim; ++b)
      if (!(b & mask)) acc += rho(b, b ^ mask).real();
    c.x_field(i) = 2.0 * acc;
  }
  return c;
}

/// <R_12^2> = (1/N^2) sum_ij zz_ij^2.
inline double overlap_square(const CorrelatorMatrix& corr) {
  const double n = corr.n_sites;
  return corr.zz.squaredNorm() / (n * n);
}

/// <R_12> = (1/N) sum_i <sigma^z_i>^2.
inline double overlap_first_moment(const CorrelatorMatrix& corr, const RealVector& magnetizations) {
  if (magnetizations.size() != corr.n_sites) throw invalid_argument("overlap_first_moment: size mismatch");
  return magnetizations.squaredNorm() / corr.n_sites;
}

struct MagnetizationMoments {
  double m1 = 0.0;
  double m2 = 0.0;
  double m4 = 0.0;
};

/// Moments of m = (1/N) sum_i sigma^z_i (diagonal in the z-basis).
inline MagnetizationMoments magnetization_moments(const GibbsState& state, int n_sites) {
  if (state.dim() != hilbert_dim(n_sites)) throw invalid_argument("magnetization_moments: dimension mismatch");
  MagnetizationMoments mm;
  const RealVector& p = state.populations();
  for (Eigen::Index b = 0; b < p.size(); ++b) {
    const int down = std::popcount(static_cast<std::uint64_t>(b));
    const double m = static_cast<double>(n_sites - 2 * down) / n_sites;
    const double m2 = m * m;
    mm.m1 += p(b) * m;
    mm.m2 += p(b) * m2;
    mm.m4 += p(b) * m2 * m2;
  }
  return mm;
}

inline double exchange_energy(const GibbsState& state, const Operator& u_op) {
  if (u_op.dim() != state.dim()) throw invalid_argument("exchange_energy: dimension mismatch");
  return gibbs_expectation_real(state, u_op);
}

/// <sigma^z_a sigma^z_b sigma^z_c sigma^z_d> for distinct sites.
inline double four_point_z(const GibbsState& state, int a, int b, int c, int d) {
  const RealVector& p = state.populations();
  double acc = 0.0;
  for (Eigen::Index s = 0; s < p.size(); ++s)
    acc += p(s) * spin_of(s, a) * spin_of(s, b) * spin_of(s, c) * spin_of(s, d);
  return acc;
}

struct Provenance {
  std::string law = "manual";
  bool symmetric_law = true;
  std::uint64_t master_seed = 0;
  std::uint64_t index = 0;
  std::uint64_t seed = 0;
  std::uint64_t sample_hash = 0;
};

struct SampleReport {
  ModelParams params;
  CorrelatorMatrix correlators;
  double overlap_sq = 0.0;
  double overlap_first = 0.0;
  double exchange_energy = 0.0;
  double m1 = 0.0, m2 = 0.0, m4 = 0.0;
  double four_point = std::numeric_limits<double>::quiet_NaN();  // sites 0..3, N >= 4
  double duhamel_aa = 0.0;   // (A, A), A = sigma^z_0 sigma^z_1
  double fb_lower = 0.0;     // exact Falk-Bruch right-hand side
  double fb_margin = 0.0;    // smallest margin over the Falk-Bruch chain
  double gs_energy = 0.0;    // classical ground-state energy of the couplings
  // Pair averages over all i < j (present when pair Duhamel functions are on).
  double duhamel_pair_mean = std::numeric_limits<double>::quiet_NaN();
  double zz_sq_pair_mean = 0.0;
  // -N^{-3/2} sum_ij [gamma_ij <A_ij> - (beta J / sqrt N)(A_ij; A_ij)], whose
  // disorder mean is Delta_N.
  double remainder_pointwise = std::numeric_limits<double>::quiet_NaN();
  // -N^{-3/2} sum_ij Delta_ij with the conditional single-coupling remainders.
  double remainder_conditional = std::numeric_limits<double>::quiet_NaN();
  double max_aip_ratio = std::numeric_limits<double>::quiet_NaN();  // max |Delta_ij| / bound
  double weight = 1.0;  // probability weight in enumeration runs
  Provenance provenance;
};

struct SampleOptions {
  bool pair_duhamels = true;
  bool conditional_remainders = false;
  std::optional<DisorderSpec> law;  // required for conditional remainders
  int quadrature_nodes = default_quadrature_nodes;
};

inline SampleReport sample_report(const ModelParams& params, const CouplingSample& sample,
                                  const SampleOptions& options = {}) {
  params.validate();
  params.require_pairs();
  if (sample.n_sites != params.n_sites) throw invalid_argument("sample_report: sample/params size mismatch");
  const int n = params.n_sites;
  const Operator u_op = exchange_operator(sample);
  const Operator h_op = build_hamiltonian(params, sample);
  const GibbsState state = gibbs_state(h_op, params.beta);

  SampleReport r;
  r.params = params;
  r.correlators = correlator_matrix(state, n);
  r.overlap_sq = overlap_square(r.correlators);
  r.overlap_first = overlap_first_moment(r.correlators, r.correlators.z_field);
  r.exchange_energy = exchange_energy(state, u_op);
  const auto mm = magnetization_moments(state, n);
  r.m1 = mm.m1;
  r.m2 = mm.m2;
  r.m4 = mm.m4;
  if (n >= 4) r.four_point = four_point_z(state, 0, 1, 2, 3);

  const Operator a01 = zz_op(0, 1, n);
  const auto fb = falk_bruch_check(state, h_op, a01, TransverseChain{params.h, 0, 1});
  r.duhamel_aa = fb.duhamel;
  r.fb_lower = fb.exact.rhs;
  r.fb_margin = fb.min_margin();
  r.gs_energy = classical_ground_state(sample, std::max(default_ground_state_cap, n)).energy;

  const auto pairs = site_pairs(n);
  double zz_sq = 0.0;
  for (auto [i, j] : pairs) zz_sq += r.correlators.zz(i, j) * r.correlators.zz(i, j);
  r.zz_sq_pair_mean = zz_sq / pairs.size();

  const double sqrt_n = std::sqrt(static_cast<double>(n));
  const double n32 = n * sqrt_n;
  if (options.pair_duhamels) {
    const double scale = params.beta * params.j_coupling / sqrt_n;
    double duh_sum = 0.0, pointwise = 0.0;
    for (auto [i, j] : pairs) {
      const double duh = (i == 0 && j == 1) ? r.duhamel_aa : duhamel2(state, zz_op(i, j, n), zz_op(i, j, n));
      const double zz = r.correlators.zz(i, j);
      duh_sum += duh;
      pointwise += sample.at(i, j) * zz - scale * (duh - zz * zz);
    }
    r.duhamel_pair_mean = duh_sum / pairs.size();
    r.remainder_pointwise = -pointwise / n32;
  }
  if (options.conditional_remainders) {
    if (!options.law) throw invalid_argument("sample_report: conditional remainders need the disorder law");
    double acc = 0.0, worst = 0.0;
    for (auto [i, j] : pairs) {
      const auto rem = aip_remainder(params, sample, i, j, *options.law, options.quadrature_nodes);
      acc += rem.delta_value;
      worst = std::max(worst, std::abs(rem.delta_value) / rem.bound_value);
    }
    r.remainder_conditional = -acc / n32;
    r.max_aip_ratio = worst;
  }
  r.provenance.law = sample.kind;
  r.provenance.seed = sample.seed;
  r.provenance.sample_hash = sample_hash(sample);
  return r;
}

inline std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline json to_json(const SampleReport& r, bool with_correlators = false) {
  json j{{"kind", "sample"},
         {"n", r.params.n_sites},
         {"beta", r.params.beta},
         {"h", r.params.h},
         {"j", r.params.j_coupling},
         {"overlap_sq", r.overlap_sq},
         {"exchange_energy", r.exchange_energy},
         {"m1", r.m1},
         {"m2", r.m2},
         {"m4", r.m4},
         {"duhamel_aa", r.duhamel_aa},
         {"fb_lower", r.fb_lower},
         {"seed", r.provenance.seed},
         {"sample_hash", hex64(r.provenance.sample_hash)},
         {"index", r.provenance.index},
         {"master_seed", r.provenance.master_seed},
         {"law", r.provenance.law},
         {"weight", r.weight},
         {"overlap_first", r.overlap_first},
         {"fb_margin", r.fb_margin},
         {"gs_energy", r.gs_energy},
         {"four_point", r.four_point},
         {"duhamel_pair_mean", r.duhamel_pair_mean},
         {"remainder_pointwise", r.remainder_pointwise},
         {"remainder_conditional", r.remainder_conditional}};
  if (with_correlators) {
    const auto& c = r.correlators;
    json zz = json::array();
    for (int i = 0; i < c.n_sites; ++i) {
      json row = json::array();
      for (int k = 0; k < c.n_sites; ++k) row.push_back(c.zz(i, k));
      zz.push_back(row);
    }
    j["zz"] = zz;
    j["x_field"] = std::vector<double>(c.x_field.data(), c.x_field.data() + c.x_field.size());
    j["z_field"] = std::vector<double>(c.z_field.data(), c.z_field.data() + c.z_field.size());
  }
  return j;
}

}  // namespace qsklab
