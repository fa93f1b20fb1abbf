#pragma once

// Disorder laws, coupling realizations and the transverse-field SK
// Hamiltonian
//
//   H = J U - h sum_j sigma^x_j,   U = -(1/sqrt N) sum_{i<j} gamma_ij sigma^z_i sigma^z_j.
//
// The 1/sqrt(N) factor lives in the exchange operator; couplings keep unit
// variance.

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "qsklab/error.hpp"
#include "qsklab/hilbert.hpp"
#include "qsklab/quadrature.hpp"
#include "qsklab/rng.hpp"

namespace qsklab {

enum class LawKind { gaussian, rademacher, uniform, table };

/// Nodes used when a continuous law has to be integrated over one coupling.
inline constexpr int default_quadrature_nodes = 48;

class DisorderSpec {
 public:
  static DisorderSpec gaussian() {
    DisorderSpec s(LawKind::gaussian, "gaussian");
    s.third_abs_moment_ = 2.0 * std::sqrt(2.0 / std::numbers::pi);
    return s;
  }

  static DisorderSpec rademacher() {
    DisorderSpec s(LawKind::rademacher, "rademacher");
    s.points_ = {-1.0, 1.0};
    s.weights_ = {0.5, 0.5};
    s.third_abs_moment_ = 1.0;
    return s;
  }

  /// Uniform on [-sqrt 3, sqrt 3].
  static DisorderSpec uniform() {
    DisorderSpec s(LawKind::uniform, "uniform");
    s.third_abs_moment_ = 3.0 * std::sqrt(3.0) / 4.0;
    return s;
  }

  /// Finite-support law. Moments are computed here; a law that is not
  /// centered with unit variance is rejected unless `allow_nonstandard`.
  static DisorderSpec table(std::vector<double> points, std::vector<double> weights,
                            bool allow_nonstandard = false, std::string name = "table") {
    if (points.empty() || points.size() != weights.size())
      throw invalid_argument("table law needs matching, non-empty points and weights");
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw invalid_argument("table weights must be finite and >= 0");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) throw invalid_argument("table weights must sum to 1");
    for (double x : points)
      if (!std::isfinite(x)) throw invalid_argument("table points must be finite");

    DisorderSpec s(LawKind::table, std::move(name));
    s.points_ = std::move(points);
    s.weights_ = std::move(weights);
    double mean = 0.0, second = 0.0, third = 0.0;
    for (std::size_t k = 0; k < s.points_.size(); ++k) {
      const double x = s.points_[k], w = s.weights_[k];
      mean += w * x;
      second += w * x * x;
      third += w * std::abs(x) * x * x;
    }
    s.mean_ = mean;
    s.variance_ = second - mean * mean;
    s.third_abs_moment_ = third;
    s.symmetric_ = is_mirror_symmetric(s.points_, s.weights_);
    s.nonstandard_ = allow_nonstandard;
    if (!allow_nonstandard) {
      if (std::abs(mean) > 1e-12 || std::abs(s.variance_ - 1.0) > 1e-10)
        throw invalid_argument("table law must have mean 0 and variance 1 (pass the override to allow)");
      if (!s.symmetric_) throw invalid_argument("table law must be symmetric (pass the override to allow)");
    }
    if (!(third > 0.0)) throw invalid_argument("table law must have a positive third absolute moment");
    return s;
  }

  /// The standard normal law replaced by its n-point Gauss-Hermite rule.
  static DisorderSpec gauss_hermite_table(int n_nodes) {
    auto rule = gauss_hermite(n_nodes);
    auto s = table(rule.nodes, rule.weights, true, "gauss_hermite" + std::to_string(n_nodes));
    if (std::abs(s.mean_) > 1e-12 || std::abs(s.variance_ - 1.0) > 1e-10 || !s.symmetric_)
      throw numerical_failure("Gauss-Hermite rule lost its moments");
    s.nonstandard_ = false;
    return s;
  }

  static DisorderSpec from_name(const std::string& name) {
    if (name == "gaussian") return gaussian();
    if (name == "rademacher") return rademacher();
    if (name == "uniform") return uniform();
    throw invalid_argument("unknown law '" + name + "' (expected gaussian|rademacher|uniform)");
  }

  LawKind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  double mean() const { return mean_; }
  double variance() const { return variance_; }
  double third_abs_moment() const { return third_abs_moment_; }
  bool symmetric() const { return symmetric_; }
  bool discrete() const { return kind_ == LawKind::rademacher || kind_ == LawKind::table; }
  /// Centered, unit variance, symmetric: the laws theorem checks accept.
  bool standard() const { return !nonstandard_ && symmetric_; }

  const std::vector<double>& support() const { return points_; }
  const std::vector<double>& support_weights() const { return weights_; }

  double draw(Stream& stream) const {
    switch (kind_) {
      case LawKind::gaussian: {
        std::normal_distribution<double> dist(0.0, 1.0);
        return dist(stream);
      }
      case LawKind::rademacher:
        return (stream() >> 63) ? -1.0 : 1.0;
      case LawKind::uniform: {
        const double a = std::sqrt(3.0);
        std::uniform_real_distribution<double> dist(-a, a);
        return dist(stream);
      }
      case LawKind::table: {
        std::uniform_real_distribution<double> dist(0.0, 1.0);
        double u = dist(stream), acc = 0.0;
        for (std::size_t k = 0; k < points_.size(); ++k) {
          acc += weights_[k];
          if (u < acc) return points_[k];
        }
        return points_.back();
      }
    }
    return 0.0;
  }

 private:
  DisorderSpec(LawKind kind, std::string name) : kind_(kind), name_(std::move(name)) {}

  static bool is_mirror_symmetric(const std::vector<double>& x, const std::vector<double>& w) {
    for (std::size_t k = 0; k < x.size(); ++k) {
      double mirrored = 0.0, here = 0.0;
      for (std::size_t l = 0; l < x.size(); ++l) {
        if (std::abs(x[l] + x[k]) <= 1e-14 * std::max(1.0, std::abs(x[k]))) mirrored += w[l];
        if (std::abs(x[l] - x[k]) <= 1e-14 * std::max(1.0, std::abs(x[k]))) here += w[l];
      }
      if (std::abs(mirrored - here) > 1e-14) return false;
    }
    return true;
  }

  LawKind kind_;
  std::string name_;
  double mean_ = 0.0;
  double variance_ = 1.0;
  double third_abs_moment_ = 0.0;
  bool symmetric_ = true;
  bool nonstandard_ = false;
  std::vector<double> points_;
  std::vector<double> weights_;
};

/// Rule integrating a function of one coupling against `spec`: the support
/// itself for discrete laws, a Gauss rule for continuous ones.
inline QuadratureRule quadrature_rule(const DisorderSpec& spec,
                                      int n_nodes = default_quadrature_nodes) {
  switch (spec.kind()) {
    case LawKind::rademacher:
    case LawKind::table:
      return {spec.support(), spec.support_weights()};
    case LawKind::gaussian:
      return gauss_hermite(n_nodes);
    case LawKind::uniform:
      return gauss_legendre(n_nodes, std::sqrt(3.0));
  }
  throw invalid_argument("unsupported law");
}

/// Upper-triangular couplings gamma_ij, i < j, stored in lexicographic pair
/// order (0,1), (0,2), ..., (N-2,N-1).
struct CouplingSample {
  int n_sites = 0;
  std::vector<double> gamma;
  std::string kind = "manual";
  std::uint64_t seed = 0;

  static int pair_count(int n) { return n * (n - 1) / 2; }

  static std::size_t pair_index(int i, int j, int n) {
    if (i > j) std::swap(i, j);
    if (i < 0 || j >= n || i == j) throw invalid_argument("invalid site pair");
    return static_cast<std::size_t>(i * (2 * n - i - 1) / 2 + (j - i - 1));
  }

  static CouplingSample constant(int n, double value) {
    CouplingSample s;
    s.n_sites = n;
    s.gamma.assign(static_cast<std::size_t>(pair_count(n)), value);
    return s;
  }

  int n_pairs() const { return pair_count(n_sites); }
  double at(int i, int j) const { return gamma.at(pair_index(i, j, n_sites)); }
  void set(int i, int j, double v) { gamma.at(pair_index(i, j, n_sites)) = v; }

  void validate() const {
    if (n_sites < 1) throw invalid_argument("coupling sample needs n_sites >= 1");
    if (static_cast<int>(gamma.size()) != pair_count(n_sites))
      throw invalid_argument("coupling sample must hold N(N-1)/2 entries");
    for (double g : gamma)
      if (!std::isfinite(g)) throw invalid_argument("couplings must be finite");
  }

  friend bool operator==(const CouplingSample&, const CouplingSample&) = default;
};

/// Site pairs in storage order.
inline std::vector<std::pair<int, int>> site_pairs(int n) {
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(static_cast<std::size_t>(CouplingSample::pair_count(n)));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  return pairs;
}

struct ModelParams {
  int n_sites = 2;
  double beta = 1.0;
  double h = 0.0;
  double j_coupling = 1.0;

  void validate() const {
    if (n_sites < 1) throw invalid_argument("n_sites must be >= 1");
    if (!(beta > 0.0) || !std::isfinite(beta)) throw invalid_argument("beta > 0 required");
    if (!(h >= 0.0) || !std::isfinite(h)) throw invalid_argument("h >= 0 required");
    if (!(j_coupling >= 0.0) || !std::isfinite(j_coupling)) throw invalid_argument("j >= 0 required");
  }

  void require_pairs() const {
    if (n_sites < 2) throw invalid_argument("n_sites >= 2 required: pairs required");
  }

  void require_positive_j() const {
    if (!(j_coupling > 0.0)) throw invalid_argument("j > 0 required");
  }
};

inline CouplingSample sample_couplings(const DisorderSpec& spec, int n_sites, Stream& stream,
                                       std::uint64_t seed = 0) {
  if (n_sites < 2) throw invalid_argument("sample_couplings: n_sites >= 2 required");
  CouplingSample s;
  s.n_sites = n_sites;
  s.kind = spec.name();
  s.seed = seed;
  s.gamma.resize(static_cast<std::size_t>(CouplingSample::pair_count(n_sites)));
  for (auto& g : s.gamma) g = spec.draw(stream);
  return s;
}

inline CouplingSample sample_couplings(const DisorderSpec& spec, int n_sites, std::uint64_t seed) {
  auto stream = make_stream(seed);
  return sample_couplings(spec, n_sites, stream, seed);
}

/// Classical exchange energy -(1/sqrt N) sum gamma_ij s_i s_j of basis state b.
inline double classical_energy(const CouplingSample& sample, std::uint64_t b) {
  const int n = sample.n_sites;
  double acc = 0.0;
  std::size_t k = 0;
  for (int i = 0; i < n; ++i) {
    const int si = spin_of(b, i);
    for (int j = i + 1; j < n; ++j, ++k) acc += sample.gamma[k] * si * spin_of(b, j);
  }
  return -acc / std::sqrt(static_cast<double>(n));
}

inline Operator exchange_operator(const CouplingSample& sample) {
  sample.validate();
  check_site_count(sample.n_sites);
  const auto dim = hilbert_dim(sample.n_sites);
  RealVector d(dim);
  for (std::int64_t b = 0; b < dim; ++b) d(b) = classical_energy(sample, static_cast<std::uint64_t>(b));
  return Operator::diagonal(d);
}

inline Operator build_hamiltonian(const ModelParams& params, const CouplingSample& sample) {
  params.validate();
  if (sample.n_sites != params.n_sites) throw invalid_argument("sample/params size mismatch");
  Operator h = exchange_operator(sample).scaled(params.j_coupling);
  if (params.h != 0.0) h = h - total_axis_sum(Axis::x, params.n_sites).scaled(params.h);
  return h;
}

/// gamma'_ij = eps_i eps_j gamma_ij.
inline CouplingSample gauge_transform(const CouplingSample& sample, const std::vector<int>& signs) {
  if (static_cast<int>(signs.size()) != sample.n_sites)
    throw invalid_argument("gauge_transform: sign vector must have length N");
  for (int e : signs)
    if (e != 1 && e != -1) throw invalid_argument("gauge_transform: signs must be +1 or -1");
  CouplingSample out = sample;
  std::size_t k = 0;
  for (int i = 0; i < sample.n_sites; ++i)
    for (int j = i + 1; j < sample.n_sites; ++j, ++k) out.gamma[k] = signs[i] * signs[j] * sample.gamma[k];
  return out;
}

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// Canonical text form: `N=<int> kind=<string> seed=<u64>` then `i j gamma`.
inline std::string serialize(const CouplingSample& s) {
  std::string out = "N=" + std::to_string(s.n_sites) + " kind=" + s.kind + " seed=" + std::to_string(s.seed) + "\n";
  std::size_t k = 0;
  for (int i = 0; i < s.n_sites; ++i)
    for (int j = i + 1; j < s.n_sites; ++j, ++k)
      out += std::to_string(i) + " " + std::to_string(j) + " " + format_double(s.gamma[k]) + "\n";
  return out;
}

inline CouplingSample parse_coupling_sample(const std::string& text) {
  std::istringstream in(text);
  std::string header;
  if (!std::getline(in, header)) throw invalid_argument("coupling sample: missing header");
  CouplingSample s;
  char kind_buf[128] = {0};
  unsigned long long seed = 0;
  int n = 0;
  if (std::sscanf(header.c_str(), "N=%d kind=%127s seed=%llu", &n, kind_buf, &seed) != 3)
    throw invalid_argument("coupling sample: malformed header '" + header + "'");
  s.n_sites = n;
  s.kind = kind_buf;
  s.seed = seed;
  s.gamma.assign(static_cast<std::size_t>(CouplingSample::pair_count(n)), 0.0);
  std::vector<bool> seen(s.gamma.size(), false);
  std::string line;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    int i = -1, j = -1;
    std::string value;
    if (!(ls >> i >> j >> value)) throw invalid_argument("coupling sample: malformed line " + std::to_string(line_no));
    auto k = CouplingSample::pair_index(i, j, n);
    if (seen[k]) throw invalid_argument("coupling sample: duplicate pair on line " + std::to_string(line_no));
    seen[k] = true;
    char* end = nullptr;
    s.gamma[k] = std::strtod(value.c_str(), &end);
    if (*end != '\0') throw invalid_argument("coupling sample: bad value on line " + std::to_string(line_no));
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end())
    throw invalid_argument("coupling sample: missing pairs");
  s.validate();
  return s;
}

inline std::uint64_t sample_hash(const CouplingSample& s) { return fnv1a(serialize(s)); }

}  // namespace qsklab
