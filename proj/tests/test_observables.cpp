#include <gtest/gtest.h>

#include <cmath>

#include "qsklab/observables.hpp"

using namespace qsklab;

namespace {

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// <R_12^2> in the product state of two replicas, built on 2N sites.
double replica_overlap_square(const Operator& h, int n, double beta) {
  const auto d = h.dim();
  const ComplexMatrix id = ComplexMatrix::Identity(d, d);
  const ComplexMatrix h2 = kron(h.matrix(), id) + kron(id, h.matrix());
  const auto state = gibbs_state(Operator::from_matrix(h2), beta);
  ComplexMatrix r = ComplexMatrix::Zero(d * d, d * d);
  for (int i = 0; i < n; ++i) {
    const ComplexMatrix z = pauli_op(Axis::z, i, n).matrix();
    r += kron(z, z);
  }
  r /= static_cast<double>(n);
  return gibbs_expectation_real(state, Operator::from_matrix(r * r));
}

}  // namespace

TEST(Overlap, MatchesDoubledSpaceReplicas) {
  Stream rng = make_stream(21);
  for (int n = 2; n <= 4; ++n) {
    for (double h : {0.0, 0.4, 1.3}) {
      const auto s = sample_couplings(DisorderSpec::gaussian(), n, rng);
      const ModelParams p{n, 1.4, h, 1.0};
      const auto op = build_hamiltonian(p, s);
      const auto corr = correlator_matrix(gibbs_state(op, p.beta), n);
      EXPECT_NEAR(overlap_square(corr), replica_overlap_square(op, n, p.beta), 1e-11) << "N=" << n << " h=" << h;
    }
  }
}

TEST(Overlap, TwoSiteClosedForm) {
  for (double g : {-1.5, -0.2, 0.7, 2.0}) {
    for (double beta : {0.3, 1.0, 4.0}) {
      const auto s = CouplingSample::constant(2, g);
      const auto state = gibbs_state(build_hamiltonian(ModelParams{2, beta, 0.0, 1.0}, s), beta);
      const double t = std::tanh(beta * g / std::sqrt(2.0));
      const auto corr = correlator_matrix(state, 2);
      EXPECT_NEAR(corr.zz(0, 1), t, 1e-13);
      EXPECT_NEAR(overlap_square(corr), (1.0 + t * t) / 2.0, 1e-13);
    }
  }
}

TEST(Correlators, MatchOperatorExpectations) {
  const auto s = sample_couplings(DisorderSpec::uniform(), 4, 5);
  const auto state = gibbs_state(build_hamiltonian(ModelParams{4, 2.0, 0.7, 1.0}, s), 2.0);
  const auto c = correlator_matrix(state, 4);
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(c.x_field(i), gibbs_expectation_real(state, pauli_op(Axis::x, i, 4)), 1e-13);
    EXPECT_NEAR(c.z_field(i), gibbs_expectation_real(state, pauli_op(Axis::z, i, 4)), 1e-13);
    EXPECT_EQ(c.zz(i, i), 1.0);
    for (int j = i + 1; j < 4; ++j) {
      EXPECT_NEAR(c.zz(i, j), gibbs_expectation_real(state, zz_op(i, j, 4)), 1e-13);
      EXPECT_EQ(c.zz(i, j), c.zz(j, i));
    }
  }
}

TEST(Magnetization, MomentsMatchOperatorPowers) {
  const int n = 5;
  const auto s = sample_couplings(DisorderSpec::gaussian(), n, 6);
  const auto state = gibbs_state(build_hamiltonian(ModelParams{n, 1.5, 0.5, 1.0}, s), 1.5);
  const auto m = total_axis_sum(Axis::z, n).scaled(1.0 / n);
  const auto m2 = op_product(m, m);
  const auto mm = magnetization_moments(state, n);
  EXPECT_NEAR(mm.m1, gibbs_expectation_real(state, m), 1e-14);
  EXPECT_NEAR(mm.m2, gibbs_expectation_real(state, m2), 1e-14);
  EXPECT_NEAR(mm.m4, gibbs_expectation_real(state, op_product(m2, m2)), 1e-14);
}

TEST(Magnetization, ZeroPerSampleByGlobalFlip) {
  Stream rng = make_stream(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + trial % 5;
    const auto s = sample_couplings(DisorderSpec::gaussian(), n, rng);
    const ModelParams p{n, 0.5 + trial, 0.05 + 0.1 * trial, 1.0};
    const auto state = gibbs_state(build_hamiltonian(p, s), p.beta);
    EXPECT_LT(std::abs(magnetization_moments(state, n).m1), 1e-10);
    EXPECT_LT(correlator_matrix(state, n).z_field.cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Gauge, CorrelatorsTransformCovariantly) {
  Stream rng = make_stream(8);
  const int n = 5;
  const ModelParams p{n, 2.0, 0.3, 1.0};
  const auto s = sample_couplings(DisorderSpec::gaussian(), n, rng);
  const auto base = correlator_matrix(gibbs_state(build_hamiltonian(p, s), p.beta), n);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int> eps(n);
    for (auto& e : eps) e = (rng() & 1) ? 1 : -1;
    const auto c = correlator_matrix(gibbs_state(build_hamiltonian(p, gauge_transform(s, eps)), p.beta), n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) EXPECT_NEAR(c.zz(i, j), eps[i] * eps[j] * base.zz(i, j), 1e-9);
    EXPECT_LT((c.x_field - base.x_field).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(SampleReport, FieldsConsistent) {
  const int n = 4;
  const auto s = sample_couplings(DisorderSpec::gaussian(), n, 9);
  const ModelParams p{n, 1.0, 0.4, 1.0};
  SampleOptions opts;
  opts.conditional_remainders = true;
  opts.law = DisorderSpec::gaussian();
  opts.quadrature_nodes = 24;
  const auto r = sample_report(p, s, opts);
  const auto state = gibbs_state(build_hamiltonian(p, s), p.beta);
  EXPECT_NEAR(r.exchange_energy, gibbs_expectation_real(state, exchange_operator(s)), 1e-13);
  EXPECT_NEAR(r.duhamel_aa, duhamel2(state, zz_op(0, 1, n), zz_op(0, 1, n)), 1e-13);
  EXPECT_GE(r.exchange_energy, r.gs_energy - 1e-12);
  EXPECT_GE(r.fb_margin, -1e-9);
  EXPECT_LE(r.max_aip_ratio, 1.0);
  EXPECT_NEAR(r.four_point, gibbs_expectation_real(state, op_product(zz_op(0, 1, n), zz_op(2, 3, n))), 1e-13);
  EXPECT_EQ(r.provenance.sample_hash, sample_hash(s));

  const auto j = to_json(r, true);
  for (const char* key : {"n", "beta", "h", "j", "overlap_sq", "exchange_energy", "m1", "m2", "m4", "duhamel_aa",
                          "fb_lower", "seed", "sample_hash", "zz", "x_field", "z_field"})
    EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j["sample_hash"].get<std::string>().size(), 16u);
}

TEST(SampleReport, RejectsSingleSite) {
  EXPECT_THROW(sample_report(ModelParams{1, 1.0, 0.0, 1.0}, CouplingSample::constant(1, 0.0)), Error);
}
