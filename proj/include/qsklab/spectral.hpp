#pragma once

// Eigendecomposition, Gibbs states and Duhamel functions.
//
// The two-point Duhamel function is evaluated in closed form over eigenpairs,
//
//   (A, B) = sum_{m,n} A~_mn B~_nm K(E_m, E_n),
//   K(E_m, E_n) = (w_n - w_m) / (beta (E_m - E_n)),   K(E, E) = w,
//
// with A~ = V^dag A V. Connected functions of higher order are derivatives of
// the perturbed log-partition function log Tr exp(-beta (H - x A)).

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "qsklab/hilbert.hpp"
#include "qsklab/model.hpp"

namespace qsklab {

struct SpectralData {
  RealVector eigenvalues;               // ascending
  ComplexMatrix eigenvectors;           // columns, unitary
  std::optional<RealMatrix> real_basis;  // same vectors when the input was real symmetric

  Eigen::Index dim() const { return eigenvalues.size(); }
  bool is_real() const { return real_basis.has_value(); }
};

namespace detail {

inline void require_hermitian(const Operator& op, const char* what) {
  if (!op.hermitian()) throw invalid_argument(std::string(what) + ": operator must be Hermitian");
}

template <class Matrix>
RealVector eigensolve(Matrix& a, bool vectors) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a, vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw numerical_failure("Hermitian eigensolve did not converge");
  if (vectors) a = es.eigenvectors();
  return es.eigenvalues();
}

}  // namespace detail

/// Full eigendecomposition. Real symmetric inputs take the real solver and
/// keep a real copy of the eigenvectors for the fast transform paths.
inline SpectralData diagonalize(const Operator& h_op) {
  detail::require_hermitian(h_op, "diagonalize");
  SpectralData out;
  if (h_op.is_real()) {
    RealMatrix a = h_op.real_matrix();
    out.eigenvalues = detail::eigensolve(a, true);
    out.eigenvectors = a.cast<cplx>();
    out.real_basis = std::move(a);
  } else {
    ComplexMatrix a = h_op.matrix();
    out.eigenvalues = detail::eigensolve(a, true);
    out.eigenvectors = std::move(a);
  }
  return out;
}

inline RealVector eigenvalues_of(const Operator& h_op) {
  detail::require_hermitian(h_op, "eigenvalues_of");
  if (h_op.is_real()) {
    RealMatrix a = h_op.real_matrix();
    return detail::eigensolve(a, false);
  }
  ComplexMatrix a = h_op.matrix();
  return detail::eigensolve(a, false);
}

/// log sum_n exp(-beta E_n), shifted by the ground-state energy.
inline double log_partition(const RealVector& eigenvalues, double beta) {
  const double e0 = eigenvalues.minCoeff();
  double acc = 0.0;
  for (Eigen::Index n = 0; n < eigenvalues.size(); ++n) acc += std::exp(-beta * (eigenvalues(n) - e0));
  return -beta * e0 + std::log(acc);
}

/// Immutable Gibbs state exp(-beta H)/Z in the eigenbasis of H.
class GibbsState {
 public:
  const SpectralData& spectral() const { return spectral_; }
  double beta() const { return beta_; }
  double log_z() const { return log_z_; }
  const RealVector& weights() const { return weights_; }
  /// z-basis populations <b| rho |b>.
  const RealVector& populations() const { return populations_; }
  Eigen::Index dim() const { return spectral_.dim(); }
  int n_sites() const {
    int n = 0;
    while ((Eigen::Index{1} << n) < dim()) ++n;
    return n;
  }
  /// Degeneracy cutoff for the Duhamel kernel: 1e-12 * max(1, spectral width).
  double degeneracy_tolerance() const {
    const auto& e = spectral_.eigenvalues;
    return 1e-12 * std::max(1.0, e(e.size() - 1) - e(0));
  }

 private:
  friend GibbsState make_gibbs(SpectralData spectral, double beta);

  SpectralData spectral_;
  double beta_ = 1.0;
  double log_z_ = 0.0;
  RealVector weights_;
  RealVector populations_;
};

inline GibbsState make_gibbs(SpectralData spectral, double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw invalid_argument("make_gibbs: beta > 0 required");
  GibbsState s;
  s.beta_ = beta;
  s.log_z_ = log_partition(spectral.eigenvalues, beta);
  const auto d = spectral.dim();
  s.weights_.resize(d);
  for (Eigen::Index n = 0; n < d; ++n) s.weights_(n) = std::exp(-beta * spectral.eigenvalues(n) - s.log_z_);
  if (spectral.is_real()) {
    s.populations_ = spectral.real_basis->cwiseAbs2() * s.weights_;
  } else {
    s.populations_ = spectral.eigenvectors.cwiseAbs2() * s.weights_;
  }
  s.spectral_ = std::move(spectral);
  return s;
}

inline GibbsState gibbs_state(const Operator& h_op, double beta) { return make_gibbs(diagonalize(h_op), beta); }

/// Tr(rho A).
inline cplx gibbs_expectation(const GibbsState& state, const Operator& a_op) {
  if (a_op.dim() != state.dim()) throw invalid_argument("gibbs_expectation: dimension mismatch");
  const auto& w = state.weights();
  if (a_op.is_diagonal()) {
    const auto& d = a_op.matrix().diagonal();
    cplx acc{};
    for (Eigen::Index b = 0; b < d.size(); ++b) acc += state.populations()(b) * d(b);
    return acc;
  }
  const auto& sp = state.spectral();
  if (sp.is_real() && a_op.is_real()) {
    const RealMatrix& v = *sp.real_basis;
    RealMatrix av = a_op.real_matrix() * v;
    double acc = 0.0;
    for (Eigen::Index n = 0; n < w.size(); ++n) acc += w(n) * v.col(n).dot(av.col(n));
    return acc;
  }
  ComplexMatrix av = a_op.matrix() * sp.eigenvectors;
  cplx acc{};
  for (Eigen::Index n = 0; n < w.size(); ++n) acc += w(n) * sp.eigenvectors.col(n).dot(av.col(n));
  return acc;
}

inline double gibbs_expectation_real(const GibbsState& state, const Operator& a_op) {
  return gibbs_expectation(state, a_op).real();
}

/// Density matrix in the z-basis, V diag(w) V^dag.
inline ComplexMatrix density_matrix(const GibbsState& state) {
  const auto& sp = state.spectral();
  if (sp.is_real()) {
    const RealMatrix& v = *sp.real_basis;
    RealMatrix rho = v * state.weights().asDiagonal() * v.transpose();
    return rho.cast<cplx>();
  }
  return sp.eigenvectors * state.weights().asDiagonal() * sp.eigenvectors.adjoint();
}

/// Duhamel kernel between levels with energies e_m, e_n and weights w_m, w_n.
/// Symmetric in (m, n); evaluated from the lower level's weight with expm1 so
/// nearly degenerate pairs keep full precision.
inline double duhamel_kernel(double e_m, double e_n, double w_m, double w_n, double beta, double tol) {
  const double gap = std::abs(e_m - e_n);
  if (gap <= tol) return w_n;
  const double w_low = e_m < e_n ? w_m : w_n;
  const double x = beta * gap;
  return w_low * (-std::expm1(-x)) / x;
}

namespace detail {

template <typename Mat>
double duhamel_sum(const GibbsState& state, const Mat& a, const Mat& b) {
  const auto& e = state.spectral().eigenvalues;
  const auto& w = state.weights();
  const double beta = state.beta();
  const double tol = state.degeneracy_tolerance();
  const auto d = e.size();
  double acc = 0.0;
  for (Eigen::Index n = 0; n < d; ++n) {
    for (Eigen::Index m = 0; m < d; ++m) {
      const double k = duhamel_kernel(e(m), e(n), w(m), w(n), beta, tol);
      if constexpr (std::is_same_v<typename Mat::Scalar, double>) {
        acc += a(m, n) * b(n, m) * k;
      } else {
        acc += (a(m, n) * b(n, m)).real() * k;
      }
    }
  }
  return acc;
}

inline RealMatrix to_eigenbasis_real(const GibbsState& state, const Operator& op) {
  const RealMatrix& v = *state.spectral().real_basis;
  if (op.is_diagonal()) {
    RealMatrix scaled = op.diagonal_values().asDiagonal() * v;
    return v.transpose() * scaled;
  }
  return v.transpose() * (op.real_matrix() * v);
}

inline ComplexMatrix to_eigenbasis(const GibbsState& state, const Operator& op) {
  const ComplexMatrix& v = state.spectral().eigenvectors;
  return v.adjoint() * (op.matrix() * v);
}

}  // namespace detail

/// Operator in the eigenbasis, V^dag A V.
inline ComplexMatrix to_eigenbasis(const GibbsState& state, const Operator& op) {
  if (op.dim() != state.dim()) throw invalid_argument("to_eigenbasis: dimension mismatch");
  if (state.spectral().is_real() && op.is_real()) return detail::to_eigenbasis_real(state, op).cast<cplx>();
  return detail::to_eigenbasis(state, op);
}

/// Two-point Duhamel function (A, B) = int_0^1 dt <A(t) B>.
inline double duhamel2(const GibbsState& state, const Operator& a_op, const Operator& b_op) {
  detail::require_hermitian(a_op, "duhamel2");
  detail::require_hermitian(b_op, "duhamel2");
  if (a_op.dim() != state.dim() || b_op.dim() != state.dim())
    throw invalid_argument("duhamel2: dimension mismatch");
  const bool same = &a_op == &b_op || a_op == b_op;
  if (state.spectral().is_real() && a_op.is_real() && b_op.is_real()) {
    RealMatrix at = detail::to_eigenbasis_real(state, a_op);
    if (same) return detail::duhamel_sum(state, at, at);
    RealMatrix bt = detail::to_eigenbasis_real(state, b_op);
    return detail::duhamel_sum(state, at, bt);
  }
  ComplexMatrix at = detail::to_eigenbasis(state, a_op);
  if (same) return detail::duhamel_sum(state, at, at);
  ComplexMatrix bt = detail::to_eigenbasis(state, b_op);
  return detail::duhamel_sum(state, at, bt);
}

/// Connected two-point function (A; A) = (A, A) - <A>^2.
inline double connected_duhamel2(const GibbsState& state, const Operator& a_op) {
  const double mean = gibbs_expectation_real(state, a_op);
  return duhamel2(state, a_op, a_op) - mean * mean;
}

/// log Tr exp(-beta (H - x A)), by fresh diagonalization.
inline double log_partition_perturbed(const Operator& h_op, const Operator& a_op, double x, double beta) {
  detail::require_hermitian(h_op, "log_partition_perturbed");
  detail::require_hermitian(a_op, "log_partition_perturbed");
  if (!(beta > 0.0)) throw invalid_argument("log_partition_perturbed: beta > 0 required");
  if (x == 0.0) return log_partition(eigenvalues_of(h_op), beta);
  return log_partition(eigenvalues_of(h_op - a_op.scaled(x)), beta);
}

struct ThirdCumulant {
  double value = 0.0;    // Richardson-refined (A;A;A)
  double coarse = 0.0;   // stencil at step x0
  double fine = 0.0;     // stencil at step x0/2
  double step = 0.0;
  bool consistent = true;  // coarse and refined agree within 1e-4 relative
};

/// (A;A;A) = beta^-3 d^3/dx^3 log Z(x) at x = 0 from the 5-point central
/// stencil with step x0 = eps^(1/5) max(1, |H|_max / beta) and one Richardson
/// refinement.
inline ThirdCumulant connected_duhamel3(const Operator& h_op, const Operator& a_op, double beta) {
  detail::require_hermitian(h_op, "connected_duhamel3");
  detail::require_hermitian(a_op, "connected_duhamel3");
  if (!(beta > 0.0)) throw invalid_argument("connected_duhamel3: beta > 0 required");
  const double x0 = std::pow(std::numeric_limits<double>::epsilon(), 0.2) * std::max(1.0, h_op.max_abs() / beta);
  if (!(x0 > 0.0) || !std::isfinite(x0)) throw numerical_failure("connected_duhamel3: step underflow");
  auto f = [&](double x) { return log_partition_perturbed(h_op, a_op, x, beta); };
  auto stencil = [&](double s) {
    return (f(2 * s) - 2 * f(s) + 2 * f(-s) - f(-2 * s)) / (2 * s * s * s);
  };
  const double b3 = beta * beta * beta;
  ThirdCumulant out;
  out.step = x0;
  out.coarse = stencil(x0) / b3;
  out.fine = stencil(x0 / 2) / b3;
  if (!std::isfinite(out.coarse) || !std::isfinite(out.fine))
    throw numerical_failure("connected_duhamel3: stencil evaluation failed");
  out.value = (4.0 * out.fine - out.coarse) / 3.0;
  const double scale = std::max({std::abs(out.value), std::abs(out.coarse), 1e-300});
  out.consistent = std::abs(out.value - out.coarse) <= 1e-4 * std::max(scale, 1.0);
  return out;
}

/// |d<A>/d gamma_ij - (beta J / sqrt N) (A; A)| with A = sigma^z_i sigma^z_j,
/// the derivative taken by central difference in the coupling.
inline double disorder_derivative_check(const ModelParams& params, const CouplingSample& sample, int i, int j,
                                        double step = 1e-5) {
  params.validate();
  params.require_pairs();
  const auto a_op = zz_op(i, j, params.n_sites);
  const double g = sample.at(i, j);
  auto mean_at = [&](double value) {
    CouplingSample s = sample;
    s.set(i, j, value);
    return gibbs_expectation_real(gibbs_state(build_hamiltonian(params, s), params.beta), a_op);
  };
  const double fd = (mean_at(g + step) - mean_at(g - step)) / (2 * step);
  const auto state = gibbs_state(build_hamiltonian(params, sample), params.beta);
  const double predicted = params.beta * params.j_coupling / std::sqrt(static_cast<double>(params.n_sites)) *
                           connected_duhamel2(state, a_op);
  return std::abs(fd - predicted);
}

}  // namespace qsklab
