#include <gtest/gtest.h>

#include <cmath>

#include "qsklab/bounds.hpp"

using namespace qsklab;

TEST(Phi, InvertsDefiningRelation) {
  for (double r : {1e-6, 0.01, 0.3, 1.0, 2.5, 7.0, 40.0}) {
    const double t = r * std::tanh(r);
    EXPECT_NEAR(phi(t), std::tanh(r) / r, 1e-12) << "r=" << r;
  }
  EXPECT_EQ(phi(0.0), 1.0);
  EXPECT_THROW(phi(-1.0), Error);
}

TEST(Phi, MonotoneAndAboveDlsOnGrid) {
  double prev = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double t = 0.01 * std::pow(10.0, 4.0 * k / 100.0);  // 0.01 .. 100
    const double p = phi(t);
    EXPECT_LE(p, prev);
    prev = p;
    EXPECT_GE(p - dls_lower(t), -1e-12) << "t=" << t;
  }
  EXPECT_NEAR(phi(1e4), 1e-4, 1e-8);
}

TEST(Dls, SmallArgumentLimit) {
  EXPECT_EQ(dls_lower(0.0), 1.0);
  EXPECT_NEAR(dls_lower(1e-12), 1.0, 1e-12);
  EXPECT_NEAR(dls_lower(2.0), (1 - std::exp(-2.0)) / 2.0, 1e-15);
}

TEST(DoubleCommutator, DiagonalFastPathMatchesGeneric) {
  const auto s = sample_couplings(DisorderSpec::gaussian(), 3, 2);
  const auto h = build_hamiltonian(ModelParams{3, 1.0, 0.8, 1.0}, s);
  const auto a = zz_op(0, 2, 3);
  const auto generic = commutator(a, commutator(h, a));
  EXPECT_LT(max_abs_diff(double_commutator(h, a), generic), 1e-13);
  // [A,[H,A]] = 4 h (sigma^x_a + sigma^x_b) for A = sigma^z_a sigma^z_b.
  const auto expected = (pauli_op(Axis::x, 0, 3) + pauli_op(Axis::x, 2, 3)).scaled(4 * 0.8);
  EXPECT_LT(max_abs_diff(generic, expected), 1e-13);
}

TEST(FalkBruch, TightForSingleSpin) {
  for (double bh : {0.05, 0.5, 2.0, 8.0}) {
    const double beta = 2.0, h = bh / beta;
    const auto hop = pauli_op(Axis::x, 0, 1).scaled(-h);
    const auto state = gibbs_state(hop, beta);
    const auto r = falk_bruch_check(state, hop, pauli_op(Axis::z, 0, 1));
    EXPECT_NEAR(r.duhamel, std::tanh(bh) / bh, 1e-12);
    EXPECT_NEAR(r.exact.rhs, r.duhamel, 1e-10);
    EXPECT_TRUE(r.satisfied());
  }
}

TEST(FalkBruch, ChainHoldsOnRandomSamples) {
  Stream rng = make_stream(4);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 2 + trial % 4;
    const auto s = sample_couplings(DisorderSpec::gaussian(), n, rng);
    const ModelParams p{n, 1.0 + trial, 0.05 + 0.05 * trial, 1.0};
    const auto hop = build_hamiltonian(p, s);
    const auto state = gibbs_state(hop, p.beta);
    const auto r = falk_bruch_check(state, hop, zz_op(0, 1, n), TransverseChain{p.h, 0, 1});
    ASSERT_TRUE(r.x_weakened && r.constant && r.dls);
    EXPECT_TRUE(r.satisfied()) << to_json(r.exact).dump();
    EXPECT_GE(r.exact.rhs, r.x_weakened->rhs - 1e-12);
    EXPECT_GE(r.x_weakened->rhs, r.constant->rhs - 1e-12);
    EXPECT_GE(r.constant->rhs, r.dls->rhs - 1e-12);
  }
}

TEST(FalkBruch, RejectsZeroOperator) {
  const auto hop = pauli_op(Axis::x, 0, 1);
  EXPECT_THROW(falk_bruch_check(gibbs_state(hop, 1.0), hop, Operator::zero(1)), Error);
}

TEST(Aip, SyntheticClosedForms) {
  auto cube = [](double g) { return g * g * g; };
  auto cube_p = [](double g) { return 3 * g * g; };
  auto sq = [](double g) { return g * g; };
  auto sq_p = [](double g) { return 2 * g; };
  // E g^4 - 3 E g^2: rademacher 1 - 3, gaussian 3 - 3, uniform 9/5 - 3.
  EXPECT_EQ(aip_remainder_synthetic(DisorderSpec::rademacher(), cube, cube_p), -2.0);
  EXPECT_NEAR(aip_remainder_synthetic(DisorderSpec::gaussian(), cube, cube_p), 0.0, 1e-10);
  EXPECT_NEAR(aip_remainder_synthetic(DisorderSpec::uniform(), cube, cube_p), -1.2, 1e-12);
  EXPECT_NEAR(aip_remainder_synthetic(DisorderSpec::gaussian(), sq, sq_p), 0.0, 1e-12);
  // Stein's identity for a non-polynomial f.
  auto th = [](double g) { return std::tanh(0.7 * g); };
  auto th_p = [](double g) { return 0.7 / (std::cosh(0.7 * g) * std::cosh(0.7 * g)); };
  EXPECT_NEAR(aip_remainder_synthetic(DisorderSpec::gaussian(), th, th_p), 0.0, 1e-10);
}

TEST(Aip, PhysicalRemainderWithinBound) {
  Stream rng = make_stream(5);
  for (const auto& spec : {DisorderSpec::rademacher(), DisorderSpec::uniform(), DisorderSpec::gaussian()}) {
    const auto s = sample_couplings(spec, 4, rng);
    const ModelParams p{4, 1.5, 0.3, 1.0};
    for (auto [i, j] : site_pairs(4)) {
      const auto r = aip_remainder(p, s, i, j, spec, 24);
      EXPECT_TRUE(r.within_bound()) << spec.name();
      EXPECT_NEAR(r.sup_f2_estimate, 6 * 1.5 * 1.5 / 4.0, 1e-15);
    }
  }
}

TEST(Aip, GaussianRemainderVanishesWithNodes) {
  const auto s = sample_couplings(DisorderSpec::gaussian(), 3, 6);
  const ModelParams p{3, 1.0, 0.4, 1.0};
  const auto r = aip_remainder(p, s, 0, 1, DisorderSpec::gaussian(), 48);
  EXPECT_LT(std::abs(r.delta_value), 1e-8);
}

TEST(Aip, RequiresStandardLaw) {
  const auto s = sample_couplings(DisorderSpec::gaussian(), 3, 6);
  const auto shifted = DisorderSpec::table({0.0, 2.0}, {0.5, 0.5}, true);
  EXPECT_THROW(aip_remainder(ModelParams{3, 1.0, 0.4, 1.0}, s, 0, 1, shifted), Error);
}

TEST(GroundState, MatchesFullEnumeration) {
  Stream rng = make_stream(7);
  for (int n = 2; n <= 10; ++n) {
    const auto s = sample_couplings(DisorderSpec::gaussian(), n, rng);
    double best = 1e300;
    for (std::uint64_t b = 0; b < (1ULL << n); ++b) {
      double e = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) e -= s.at(i, j) * spin_of(b, i) * spin_of(b, j);
      best = std::min(best, e / std::sqrt(static_cast<double>(n)));
    }
    const auto gs = classical_ground_state(s);
    EXPECT_NEAR(gs.energy, best, 1e-12);
    EXPECT_EQ(gs.spins[n - 1], 1);
    EXPECT_NEAR(classical_energy(s, gs.index), gs.energy, 0.0);
  }
}

TEST(GroundState, CapEnforced) {
  const auto s = sample_couplings(DisorderSpec::gaussian(), 8, 1);
  EXPECT_THROW(classical_ground_state(s, 6), Error);
}

TEST(TheoremBound, AsymptoticArithmetic) {
  const ModelParams p{8, 20.0, 0.05, 1.0};
  const auto r = theorem_bound(p, 0.5, -0.7, DisorderSpec::gaussian().third_abs_moment());
  const double dls = (1 - std::exp(-2.0)) / 2.0;
  EXPECT_NEAR(r.context["asymptotic_rhs"].get<double>(), dls - 2 * 0.763 / 20.0, 1e-15);
  EXPECT_NEAR(r.context["asymptotic_rhs"].get<double>(), 0.356, 5e-4);
  const double dnb = 3.0 * 400.0 * 6.0 / (4.0 * std::sqrt(8.0)) * (7.0 / 8.0) * DisorderSpec::gaussian().third_abs_moment();
  EXPECT_NEAR(r.context["delta_n_bound"].get<double>(), dnb, 1e-10);
  EXPECT_NEAR(r.rhs, 7.0 / 8.0 * dls + 2.0 / 20.0 * (-0.7) - 2.0 / 20.0 * dnb + 1.0 / 8.0, 1e-12);
  EXPECT_EQ(r.margin, r.lhs - r.rhs);
}

TEST(BoundReport, IdentityMargin) {
  const auto r = make_identity("x", 1.0, 1.0 + 1e-9, 1e-8);
  EXPECT_TRUE(r.satisfied);
  EXPECT_NEAR(r.margin, 1e-8 - 1e-9, 1e-15);
  EXPECT_FALSE(make_identity("x", 1.0, 1.1, 1e-8).satisfied);
}
