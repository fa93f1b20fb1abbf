#pragma once

// Disorder averaging.
//
// Sample k of a Monte Carlo run draws its couplings from the stream seeded by
// derive_seed(master_seed, k); grid point p of a sweep runs with master seed
// derive_seed(master_seed, p). Workers evaluate samples in any order, but
// results are reduced strictly in sample-index order, so statistics are
// bit-identical for every worker count.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "qsklab/bounds.hpp"
#include "qsklab/model.hpp"
#include "qsklab/observables.hpp"
#include "qsklab/rng.hpp"

namespace qsklab {

enum class EnsembleMode { monte_carlo, enumerate, gauge_paired };

inline std::string mode_name(EnsembleMode m) {
  switch (m) {
    case EnsembleMode::monte_carlo: return "monte_carlo";
    case EnsembleMode::enumerate: return "enumerate";
    case EnsembleMode::gauge_paired: return "gauge_paired";
  }
  return "?";
}

inline EnsembleMode mode_from_name(const std::string& s) {
  if (s == "monte_carlo") return EnsembleMode::monte_carlo;
  if (s == "enumerate") return EnsembleMode::enumerate;
  if (s == "gauge_paired") return EnsembleMode::gauge_paired;
  throw invalid_argument("unknown mode '" + s + "' (expected monte_carlo|enumerate|gauge_paired)");
}

inline constexpr std::uint64_t max_enumeration_size = std::uint64_t{1} << 24;

struct EnsembleConfig {
  ModelParams params;
  DisorderSpec spec = DisorderSpec::gaussian();
  int n_samples = 100;
  std::uint64_t master_seed = 0;
  EnsembleMode mode = EnsembleMode::monte_carlo;
  // Conditional single-coupling remainders per sample; unset means on in
  // enumerate mode and off otherwise.
  std::optional<bool> conditional_remainders;
  bool pair_duhamels = true;
  int quadrature_nodes = default_quadrature_nodes;

  bool use_conditional_remainders() const {
    return conditional_remainders.value_or(mode == EnsembleMode::enumerate);
  }
};

/// Number of coupling assignments an enumerate run visits (saturates past the cap).
inline std::uint64_t enumeration_size(const EnsembleConfig& c) {
  const std::uint64_t k = c.spec.support().size();
  std::uint64_t total = 1;
  for (int p = 0; p < CouplingSample::pair_count(c.params.n_sites); ++p) {
    if (total > max_enumeration_size) return max_enumeration_size + 1;
    total *= k;
  }
  return total;
}

inline void validate(const EnsembleConfig& c) {
  c.params.validate();
  c.params.require_pairs();
  check_site_count(c.params.n_sites);
  if (c.mode == EnsembleMode::enumerate) {
    if (!c.spec.discrete()) throw invalid_argument("enumerate mode requires a discrete law");
    if (enumeration_size(c) > max_enumeration_size)
      throw cap_exceeded("enumerate mode exceeds 2^24 coupling assignments");
  } else if (c.n_samples < 1) {
    throw invalid_argument("n_samples >= 1 required");
  }
  if (c.mode == EnsembleMode::gauge_paired && !c.spec.symmetric())
    throw invalid_argument("gauge_paired mode requires a symmetric law");
  if (c.use_conditional_remainders() && !c.spec.standard())
    throw invalid_argument("conditional remainders require a centered, unit-variance symmetric law");
}

/// Streaming weighted mean/variance (West's update of Welford's recurrence).
class RunningStat {
 public:
  void add(double x, double w = 1.0) {
    if (std::isnan(x)) return;
    ++n_;
    weight_ += w;
    const double delta = x - mean_;
    mean_ += (w / weight_) * delta;
    m2_ += w * delta * (x - mean_);
    min_ = std::min(min_, x);
    max_ = std::max(max_, x);
  }

  std::size_t n() const { return n_; }
  double mean() const { return n_ ? mean_ : std::numeric_limits<double>::quiet_NaN(); }
  /// Population variance for weighted (exact) runs, sample variance otherwise.
  double variance(bool exact) const {
    if (n_ == 0) return std::numeric_limits<double>::quiet_NaN();
    if (exact) return std::max(0.0, m2_ / weight_);
    if (n_ < 2) return 0.0;
    return std::max(0.0, m2_ / weight_ * n_ / (n_ - 1.0));
  }
  double std_error(bool exact) const {
    if (exact || n_ < 2) return 0.0;
    return std::sqrt(variance(false) / n_);
  }
  double min() const { return min_; }
  double max() const { return max_; }

 private:
  std::size_t n_ = 0;
  double weight_ = 0.0;
  double mean_ = 0.0;
  double m2_ = 0.0;
  double min_ = std::numeric_limits<double>::infinity();
  double max_ = -std::numeric_limits<double>::infinity();
};

struct EnsembleStats {
  EnsembleConfig config;
  bool exact = false;  // enumerate mode
  std::size_t samples = 0;
  std::map<std::string, RunningStat> observables;

  const RunningStat& at(const std::string& name) const {
    auto it = observables.find(name);
    if (it == observables.end()) throw invalid_argument("no observable '" + name + "' in ensemble stats");
    return it->second;
  }
  double mean(const std::string& name) const { return at(name).mean(); }
  double std_error(const std::string& name) const { return at(name).std_error(exact); }
  bool has(const std::string& name) const {
    auto it = observables.find(name);
    return it != observables.end() && it->second.n() > 0;
  }

  double overlap_variance() const {
    const double r1 = mean("overlap_first");
    return mean("overlap_sq") - r1 * r1;
  }
  /// Delta_N estimate and the route it came from.
  std::pair<double, std::string> delta_n() const {
    if (has("remainder_conditional")) return {mean("remainder_conditional"), "conditional"};
    if (has("remainder_pointwise")) return {mean("remainder_pointwise"), "pointwise"};
    return {std::numeric_limits<double>::quiet_NaN(), "none"};
  }
};

/// Gauge-orbit average of the two-point functions: for a symmetric law the
/// partial flips map zz_ij to eps_i eps_j zz_ij, so the orbit mean has zero
/// off-diagonal entries; <sigma^x_i> is flip invariant.
inline CorrelatorMatrix gauge_average_two_point(const SampleReport& report) {
  if (!report.provenance.symmetric_law) throw invalid_argument("gauge averaging requires a symmetric law");
  CorrelatorMatrix c = report.correlators;
  c.zz = RealMatrix::Identity(c.n_sites, c.n_sites);
  c.z_field = RealVector::Zero(c.n_sites);
  return c;
}

/// Report with every gauge-odd observable replaced by its orbit average.
inline SampleReport gauge_orbit_average(const SampleReport& report) {
  SampleReport r = report;
  const double n = r.params.n_sites;
  r.correlators = gauge_average_two_point(report);
  r.m1 = 0.0;
  r.overlap_first = 0.0;
  r.m2 = 1.0 / n;
  r.m4 = (3.0 * n - 2.0) / (n * n * n);
  if (!std::isnan(r.four_point)) r.four_point = 0.0;
  return r;
}

namespace detail {

inline CouplingSample enumerated_sample(const EnsembleConfig& c, std::uint64_t index, double& weight) {
  const auto& pts = c.spec.support();
  const auto& wts = c.spec.support_weights();
  const std::uint64_t k = pts.size();
  CouplingSample s;
  s.n_sites = c.params.n_sites;
  s.kind = c.spec.name();
  s.seed = index;
  s.gamma.resize(static_cast<std::size_t>(CouplingSample::pair_count(s.n_sites)));
  weight = 1.0;
  std::uint64_t rest = index;
  for (auto& g : s.gamma) {
    const auto digit = rest % k;
    rest /= k;
    g = pts[digit];
    weight *= wts[digit];
  }
  return s;
}

inline SampleReport evaluate_sample(const EnsembleConfig& c, std::uint64_t index) {
  double weight = 1.0;
  CouplingSample s;
  if (c.mode == EnsembleMode::enumerate) {
    s = enumerated_sample(c, index, weight);
  } else {
    const auto seed = derive_seed(c.master_seed, index);
    s = sample_couplings(c.spec, c.params.n_sites, seed);
  }
  SampleOptions opts;
  opts.pair_duhamels = c.pair_duhamels;
  opts.conditional_remainders = c.use_conditional_remainders();
  opts.quadrature_nodes = c.quadrature_nodes;
  if (opts.conditional_remainders) opts.law = c.spec;
  SampleReport r = sample_report(c.params, s, opts);
  r.weight = weight;
  r.provenance.law = c.spec.name();
  r.provenance.symmetric_law = c.spec.symmetric();
  r.provenance.master_seed = c.master_seed;
  r.provenance.index = index;
  if (c.mode == EnsembleMode::gauge_paired) r = gauge_orbit_average(r);
  return r;
}

/// Per-sample difference lhs - rhs of the overlap identity using the given
/// remainder; identically zero for the pointwise remainder.
inline double rau_difference(const SampleReport& r, double remainder) {
  const double n = r.params.n_sites;
  const double bj = r.params.beta * r.params.j_coupling;
  const double rhs = (n - 1) / n * r.duhamel_pair_mean + 2.0 / (bj * n) * r.exchange_energy -
                     2.0 / bj * remainder + 1.0 / n;
  return r.overlap_sq - rhs;
}

inline void record(EnsembleStats& stats, const SampleReport& r) {
  const double w = r.weight;
  const double n = r.params.n_sites;
  auto add = [&](const char* name, double x) { stats.observables[name].add(x, w); };
  add("overlap_sq", r.overlap_sq);
  add("overlap_first", r.overlap_first);
  add("exchange_energy", r.exchange_energy);
  add("exchange_density", r.exchange_energy / n);
  add("m1", r.m1);
  add("m2", r.m2);
  add("m4", r.m4);
  add("four_point", r.four_point);
  add("zz01", r.correlators.zz(0, 1));
  add("z0", r.correlators.z_field(0));
  add("zz_sq_pair_mean", r.zz_sq_pair_mean);
  add("duhamel_aa", r.duhamel_aa);
  add("duhamel_pair_mean", r.duhamel_pair_mean);
  add("fb_margin", r.fb_margin);
  add("gs_density", r.gs_energy / n);
  add("variational_gap", r.exchange_energy - r.gs_energy);
  add("remainder_pointwise", r.remainder_pointwise);
  add("remainder_conditional", r.remainder_conditional);
  add("max_aip_ratio", r.max_aip_ratio);
  if (r.params.j_coupling > 0.0 && !std::isnan(r.duhamel_pair_mean)) {
    const double rem = std::isnan(r.remainder_conditional) ? r.remainder_pointwise : r.remainder_conditional;
    add("rau_difference", rau_difference(r, rem));
  }
  ++stats.samples;
}

}  // namespace detail

using SampleSink = std::function<void(const SampleReport&)>;

inline EnsembleStats run_ensemble(const EnsembleConfig& config, int workers = 1, const SampleSink& sink = {}) {
  validate(config);
  const std::uint64_t total =
      config.mode == EnsembleMode::enumerate ? enumeration_size(config) : static_cast<std::uint64_t>(config.n_samples);
  EnsembleStats stats;
  stats.config = config;
  stats.exact = config.mode == EnsembleMode::enumerate;
  workers = std::max(1, workers);

  constexpr std::uint64_t chunk = 1024;
  std::vector<std::optional<SampleReport>> slots;
  for (std::uint64_t begin = 0; begin < total; begin += chunk) {
    const std::uint64_t end = std::min(total, begin + chunk);
    slots.assign(end - begin, std::nullopt);
    std::atomic<std::uint64_t> next{begin};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
      for (;;) {
        const auto idx = next.fetch_add(1);
        if (idx >= end) return;
        try {
          slots[idx - begin] = detail::evaluate_sample(config, idx);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = end;
        }
      }
    };
    const int n_threads = static_cast<int>(std::min<std::uint64_t>(workers, end - begin));
    if (n_threads <= 1) {
      work();
    } else {
      std::vector<std::thread> pool;
      pool.reserve(n_threads);
      for (int t = 0; t < n_threads; ++t) pool.emplace_back(work);
      for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
    for (auto& slot : slots) {
      detail::record(stats, *slot);
      if (sink) sink(*slot);
    }
  }
  return stats;
}

/// Overlap identity
///   E<R^2> = ((N-1)/N) E(A,A) + (2/(beta J N)) E<U> - (2/(beta J)) Delta_N + 1/N
/// assembled from ensemble means, with E(A,A) averaged over all site pairs.
/// Exact runs use tolerance 1e-8; Monte Carlo runs three standard errors of
/// the per-sample difference.
inline BoundReport assemble_rau_identity(const EnsembleStats& stats, const ModelParams& params) {
  params.require_positive_j();
  if (params.n_sites != stats.config.params.n_sites || params.beta != stats.config.params.beta ||
      params.h != stats.config.params.h || params.j_coupling != stats.config.params.j_coupling)
    throw invalid_argument("assemble_rau_identity: parameters do not match the ensemble");
  if (!stats.has("duhamel_pair_mean")) throw invalid_argument("assemble_rau_identity: pair Duhamel functions missing");
  const auto [delta_n, source] = stats.delta_n();
  const double n = params.n_sites;
  const double bj = params.beta * params.j_coupling;
  const double lhs = stats.mean("overlap_sq");
  const double rhs = (n - 1) / n * stats.mean("duhamel_pair_mean") + 2.0 / (bj * n) * stats.mean("exchange_energy") -
                     2.0 / bj * delta_n + 1.0 / n;
  const double se = stats.has("rau_difference") ? stats.std_error("rau_difference") : 0.0;
  const double tol = stats.exact ? 1e-8 : 3.0 * se + 1e-12;
  json ctx{{"delta_n", delta_n},
           {"delta_source", source},
           {"duhamel_pair_mean", stats.mean("duhamel_pair_mean")},
           {"exchange_energy_mean", stats.mean("exchange_energy")},
           {"difference_se", se},
           {"exact", stats.exact}};
  return make_identity("overlap_identity", lhs, rhs, tol, std::move(ctx));
}

inline BoundReport theorem_bound(const ModelParams& params, const EnsembleStats& stats) {
  if (params.n_sites != stats.config.params.n_sites) throw invalid_argument("theorem_bound: mismatched sample sets");
  return theorem_bound(params, stats.mean("overlap_sq"), stats.mean("gs_density"),
                       stats.config.spec.third_abs_moment());
}

inline json to_json(const EnsembleStats& stats) {
  json obs = json::object();
  for (const auto& [name, st] : stats.observables) {
    if (st.n() == 0) continue;
    obs[name] = json{{"mean", st.mean()},
                     {"variance", st.variance(stats.exact)},
                     {"std_error", st.std_error(stats.exact)},
                     {"n", st.n()},
                     {"min", st.min()},
                     {"max", st.max()}};
  }
  const auto& c = stats.config;
  json j{{"kind", "ensemble"},
         {"n", c.params.n_sites},
         {"beta", c.params.beta},
         {"h", c.params.h},
         {"j", c.params.j_coupling},
         {"law", c.spec.name()},
         {"mode", mode_name(c.mode)},
         {"master_seed", c.master_seed},
         {"samples", stats.samples},
         {"exact", stats.exact},
         {"observables", obs}};
  if (stats.has("overlap_sq")) j["overlap_variance"] = stats.overlap_variance();
  const auto [dn, src] = stats.delta_n();
  j["delta_n"] = dn;
  j["delta_n_source"] = src;
  return j;
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepRecord {
  EnsembleConfig config;
  std::optional<EnsembleStats> stats;
  std::string error;
};

inline std::vector<SweepRecord> sweep(const std::vector<EnsembleConfig>& configs, int workers = 1,
                                      const SampleSink& sink = {}) {
  if (configs.empty()) throw invalid_argument("sweep: empty grid");
  std::vector<SweepRecord> out;
  out.reserve(configs.size());
  for (std::size_t p = 0; p < configs.size(); ++p) {
    SweepRecord rec;
    rec.config = configs[p];
    rec.config.master_seed = derive_seed(configs[p].master_seed, p);
    try {
      rec.stats = run_ensemble(rec.config, workers, sink);
    } catch (const std::exception& e) {
      rec.error = e.what();
    }
    out.push_back(std::move(rec));
  }
  return out;
}

inline constexpr const char* sweep_csv_header =
    "beta,h,j,n,samples,overlap_sq_mean,overlap_sq_se,overlap_var,exchange_density_mean,fb_margin_min,rau_residual";

inline std::string sweep_csv_row(const SweepRecord& rec) {
  const auto& p = rec.config.params;
  std::string row = format_double(p.beta) + "," + format_double(p.h) + "," + format_double(p.j_coupling) + "," +
                    std::to_string(p.n_sites) + ",";
  if (!rec.stats) return row + "0,nan,nan,nan,nan,nan,nan";
  const auto& s = *rec.stats;
  double residual = std::numeric_limits<double>::quiet_NaN();
  if (p.j_coupling > 0.0 && s.has("duhamel_pair_mean"))
    residual = assemble_rau_identity(s, p).context.at("residual").get<double>();
  row += std::to_string(s.samples) + "," + format_double(s.mean("overlap_sq")) + "," +
         format_double(s.std_error("overlap_sq")) + "," + format_double(s.overlap_variance()) + "," +
         format_double(s.mean("exchange_density")) + "," + format_double(s.at("fb_margin").min()) + "," +
         format_double(residual);
  return row;
}

}  // namespace qsklab
