#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "qsklab/spectral.hpp"

using namespace qsklab;

namespace {

Operator random_hermitian(int n, Stream& rng, bool real) {
  std::normal_distribution<double> g(0.0, 1.0);
  const auto d = hilbert_dim(n);
  ComplexMatrix m(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = cplx(g(rng), real ? 0.0 : g(rng));
  return Operator::from_matrix(ComplexMatrix(0.5 * (m + m.adjoint())));
}

// exp(m) by scaling and squaring of a truncated Taylor series.
ComplexMatrix taylor_exp(const ComplexMatrix& m) {
  int squarings = 0;
  double norm = m.cwiseAbs().rowwise().sum().maxCoeff();
  while (norm > 0.1) {
    norm /= 2;
    ++squarings;
  }
  const ComplexMatrix x = m / std::pow(2.0, squarings);
  ComplexMatrix term = ComplexMatrix::Identity(m.rows(), m.cols()), sum = term;
  for (int k = 1; k <= 20; ++k) {
    term = term * x / static_cast<double>(k);
    sum += term;
  }
  for (int k = 0; k < squarings; ++k) sum = sum * sum;
  return sum;
}

// (A, B) = int_0^1 dt Tr(e^{-(1-t) beta H} A e^{-t beta H} B) / Z, composite Simpson.
double duhamel_by_quadrature(const Operator& h, const Operator& a, const Operator& b, double beta, int panels = 2000) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h.matrix());
  const RealVector e = es.eigenvalues();
  const ComplexMatrix v = es.eigenvectors();
  const ComplexMatrix at = v.adjoint() * a.matrix() * v;
  const ComplexMatrix bt = v.adjoint() * b.matrix() * v;
  const double e0 = e.minCoeff();
  double z = 0.0;
  for (Eigen::Index n = 0; n < e.size(); ++n) z += std::exp(-beta * (e(n) - e0));
  auto integrand = [&](double t) {
    double acc = 0.0;
    for (Eigen::Index m = 0; m < e.size(); ++m)
      for (Eigen::Index n = 0; n < e.size(); ++n)
        acc += (at(m, n) * bt(n, m)).real() * std::exp(-(1 - t) * beta * (e(m) - e0) - t * beta * (e(n) - e0));
    return acc / z;
  };
  const double hstep = 1.0 / panels;
  double s = integrand(0.0) + integrand(1.0);
  for (int k = 1; k < panels; ++k) s += (k % 2 ? 4.0 : 2.0) * integrand(k * hstep);
  return s * hstep / 3.0;
}

}  // namespace

TEST(Diagonalize, SpectralDecompositionOfRandomMatrices) {
  Stream rng = make_stream(1);
  for (int trial = 0; trial < 16; ++trial) {
    const bool real = trial % 2 == 0;
    const auto h = random_hermitian(1 + trial / 2, rng, real);
    const auto sp = diagonalize(h);
    EXPECT_EQ(sp.is_real(), real);
    ComplexMatrix power = ComplexMatrix::Identity(h.dim(), h.dim());
    for (int k = 1; k <= 4; ++k) {
      power = power * h.matrix();
      const double trace = power.trace().real();
      EXPECT_NEAR(sp.eigenvalues.array().pow(k).sum(), trace, 1e-10 * std::max(1.0, std::abs(trace))) << "k=" << k;
    }
    for (Eigen::Index k = 1; k < sp.dim(); ++k) EXPECT_LE(sp.eigenvalues(k - 1), sp.eigenvalues(k));
    const ComplexMatrix gram = sp.eigenvectors.adjoint() * sp.eigenvectors;
    EXPECT_LT((gram - ComplexMatrix::Identity(h.dim(), h.dim())).cwiseAbs().maxCoeff(), 1e-12);
    const ComplexMatrix recon = sp.eigenvectors * sp.eigenvalues.cast<cplx>().asDiagonal() * sp.eigenvectors.adjoint();
    EXPECT_LT((recon - h.matrix()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((eigenvalues_of(h) - sp.eigenvalues).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Diagonalize, RejectsNonHermitian) {
  ComplexMatrix m = ComplexMatrix::Zero(2, 2);
  m(0, 1) = 1.0;
  EXPECT_THROW(diagonalize(Operator::from_matrix(m)), Error);
}

TEST(Gibbs, LogPartitionMatchesDirectSum) {
  RealVector e(4);
  e << -1.0, 0.2, 0.2, 3.0;
  for (double beta : {0.1, 1.0, 5.0}) {
    double z = 0.0;
    for (int k = 0; k < 4; ++k) z += std::exp(-beta * e(k));
    EXPECT_NEAR(log_partition(e, beta), std::log(z), 1e-13);
  }
}

TEST(Gibbs, StableAtLargeBeta) {
  RealVector e(3);
  e << -500.0, -499.0, 10.0;
  const double lz = log_partition(e, 1000.0);
  EXPECT_TRUE(std::isfinite(lz));
  EXPECT_NEAR(lz, 500000.0 + std::log1p(std::exp(-1000.0)), 1e-9);
  RealVector d(4);
  d << -500.0, -499.0, 10.0, 20.0;
  const auto state = gibbs_state(Operator::diagonal(d), 1000.0);
  EXPECT_NEAR(state.weights().sum(), 1.0, 1e-14);
  EXPECT_NEAR(state.weights()(0), 1.0, 1e-14);
}

TEST(Gibbs, ExpectationsMatchExplicitDensityMatrix) {
  Stream rng = make_stream(2);
  for (int trial = 0; trial < 6; ++trial) {
    const int n = 1 + trial % 3;
    const auto h = random_hermitian(n, rng, trial % 2 == 0);
    const double beta = 0.7;
    const auto state = gibbs_state(h, beta);
    ComplexMatrix rho = taylor_exp(h.matrix() * (-beta));
    rho /= rho.trace();
    EXPECT_LT((density_matrix(state) - rho).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((state.populations() - rho.diagonal().real()).cwiseAbs().maxCoeff(), 1e-12);
    for (Axis a : {Axis::x, Axis::y, Axis::z}) {
      const auto op = pauli_op(a, n - 1, n);
      EXPECT_NEAR(gibbs_expectation_real(state, op), (rho * op.matrix()).trace().real(), 1e-12);
    }
  }
}

TEST(Duhamel, SingleSpinClosedForm) {
  for (double bh : {0.01, 0.1, 1.0, 10.0}) {
    for (double beta : {1.0, 2.5}) {
      const double h = bh / beta;
      const auto state = gibbs_state(pauli_op(Axis::x, 0, 1).scaled(-h), beta);
      const auto z = pauli_op(Axis::z, 0, 1);
      EXPECT_NEAR(duhamel2(state, z, z), std::tanh(bh) / bh, 1e-10) << "beta h = " << bh;
      EXPECT_NEAR(gibbs_expectation_real(state, pauli_op(Axis::x, 0, 1)), std::tanh(bh), 1e-12);
    }
  }
}

TEST(Duhamel, MatchesImaginaryTimeQuadrature) {
  Stream rng = make_stream(3);
  for (int trial = 0; trial < 6; ++trial) {
    const int n = 2;
    const auto h = random_hermitian(n, rng, trial % 2 == 0);
    const auto a = random_hermitian(n, rng, trial % 3 == 0);
    const auto b = random_hermitian(n, rng, true);
    const double beta = 0.9;
    const auto state = gibbs_state(h, beta);
    const double oracle = duhamel_by_quadrature(h, a, b, beta);
    EXPECT_NEAR(duhamel2(state, a, b), oracle, 1e-9 * std::max(1.0, std::abs(oracle)));
  }
}

TEST(Duhamel, CommutingCaseIsStaticCorrelation) {
  const auto s = sample_couplings(DisorderSpec::gaussian(), 4, 8);
  const auto state = gibbs_state(build_hamiltonian(ModelParams{4, 2.0, 0.0, 1.0}, s), 2.0);
  for (auto [i, j] : site_pairs(4)) {
    const auto a = zz_op(i, j, 4);
    EXPECT_NEAR(duhamel2(state, a, a), 1.0, 1e-12);
  }
  const auto z0 = pauli_op(Axis::z, 0, 4), z1 = pauli_op(Axis::z, 1, 4);
  EXPECT_NEAR(duhamel2(state, z0, z1), gibbs_expectation_real(state, zz_op(0, 1, 4)), 1e-12);
}

TEST(Duhamel, SymmetricAndBelowStaticCorrelation) {
  Stream rng = make_stream(4);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 4;
    const auto h = random_hermitian(n, rng, trial % 2 == 0);
    const auto a = random_hermitian(n, rng, false);
    const auto b = random_hermitian(n, rng, trial % 3 == 0);
    const auto state = gibbs_state(h, 1.3);
    EXPECT_NEAR(duhamel2(state, a, b), duhamel2(state, b, a), 1e-11);
    EXPECT_LE(duhamel2(state, a, a), gibbs_expectation_real(state, op_product(a, a)) + 1e-12);
    EXPECT_GE(connected_duhamel2(state, a), -1e-12);
  }
}

TEST(Duhamel, GeneratingFunctionSecondDerivative) {
  Stream rng = make_stream(5);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 1 + trial % 4;
    const auto h = random_hermitian(n, rng, trial % 2 == 0);
    const auto a = random_hermitian(n, rng, true);
    const double beta = 0.8, s = 1e-3;
    auto f = [&](double x) { return log_partition_perturbed(h, a, x, beta); };
    const double second = (-f(2 * s) + 16 * f(s) - 30 * f(0) + 16 * f(-s) - f(-2 * s)) / (12 * s * s);
    const auto state = gibbs_state(h, beta);
    const double mean = gibbs_expectation_real(state, a);
    EXPECT_NEAR(beta * beta * duhamel2(state, a, a), second + beta * beta * mean * mean, 1e-6);
  }
}

TEST(Duhamel, KernelContinuousAcrossDegeneracy) {
  for (double gap : {1e-3, 1e-8, 1e-11, 1e-13, 0.0}) {
    const double beta = 3.0;
    const double w0 = 1.0 / (1.0 + std::exp(-beta * gap)), w1 = 1.0 - w0;
    const double k = duhamel_kernel(0.0, gap, w0, w1, beta, 1e-12);
    const double expected = gap == 0.0 ? 0.5 : std::tanh(beta * gap / 2) / (beta * gap);
    EXPECT_NEAR(k, expected, 1e-10) << gap;
    EXPECT_NEAR(duhamel_kernel(0.0, gap, w0, w1, beta, 1e-12), duhamel_kernel(gap, 0.0, w1, w0, beta, 1e-12), 1e-12);
  }
}

TEST(ThirdCumulant, CommutingCaseIsClassicalCumulant) {
  const auto s = sample_couplings(DisorderSpec::gaussian(), 4, 9);
  for (double beta : {0.5, 1.0, 3.0}) {
    const auto h = build_hamiltonian(ModelParams{4, beta, 0.0, 1.0}, s);
    const auto a = zz_op(0, 1, 4);
    const double m = gibbs_expectation_real(gibbs_state(h, beta), a);
    const auto c3 = connected_duhamel3(h, a, beta);
    EXPECT_NEAR(c3.value, 2 * m * m * m - 2 * m, 1e-5);
    EXPECT_TRUE(c3.consistent);
  }
}

TEST(ThirdCumulant, BoundedBySix) {
  Stream rng = make_stream(6);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + trial % 3;
    const auto s = sample_couplings(DisorderSpec::gaussian(), n, rng);
    const ModelParams p{n, 0.5 + trial * 0.3, 0.2 * trial, 1.0};
    const auto c3 = connected_duhamel3(build_hamiltonian(p, s), zz_op(0, 1, n), p.beta);
    EXPECT_LE(std::abs(c3.value), 6.0 + 1e-3);
  }
}

TEST(DisorderDerivative, MatchesConnectedDuhamel) {
  Stream rng = make_stream(7);
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 3 + trial % 2;
    const auto s = sample_couplings(DisorderSpec::gaussian(), n, rng);
    const ModelParams p{n, 0.5 + 0.4 * trial, 0.3, 1.2};
    EXPECT_LT(disorder_derivative_check(p, s, 0, n - 1), 1e-6);
  }
}
