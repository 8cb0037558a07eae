#include <gtest/gtest.h>

#include <cmath>

#include "lqg/lqg.hpp"
#include "support/generators.hpp"

using namespace lqg;
using lqg::testing::Rng;

TEST(Canonicalize, PositiveCanonicalProfileIsAFixedPoint) {
  Rng rng(1);
  lqg::testing::CanonicalSpec spec;
  spec.n = 12;
  const CanonicalInfo c = lqg::testing::random_canonical(rng, spec, 1.4);
  const StandardizedInfo s = standardize(canonical_to_info(c, AgentGrid(12)));
  const AffineProfile prof{VectorXd::Zero(12), VectorXd::LinSpaced(12, 0.3, 2.0)};
  const CanonicalForm f = canonicalize(s, prof);
  EXPECT_LE((f.info.h - c.h).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LE((f.info.g - c.g).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LE((f.info.g_kernel_diag - c.g_kernel_diag).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LE((f.profile.phi - prof.phi).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Canonicalize, NegativeSlopesFlipExposure) {
  const CanonicalInfo c = make_canonical_info(VectorXd::Constant(4, 0.5), MatrixXd::Zero(4, 4), 1.0);
  const StandardizedInfo s = standardize(canonical_to_info(c, AgentGrid(4)));
  AffineProfile prof{VectorXd::Zero(4), MatrixXd(4, 1)};
  prof.phi << 1.0, -2.0, 0.5, -0.1;
  const CanonicalForm f = canonicalize(s, prof);
  for (Index i = 0; i < 4; ++i) {
    EXPECT_DOUBLE_EQ(f.info.h[i], prof.phi(i, 0) > 0 ? 0.5 : -0.5);
    EXPECT_DOUBLE_EQ(f.profile.phi(i, 0), std::abs(prof.phi(i, 0)));
  }
  const auto eq = verify_equivalence(s, prof, standardize(canonical_to_info(f.info, AgentGrid(4))), f.profile);
  EXPECT_TRUE(eq.pass) << eq.max_gap();
}

TEST(Canonicalize, TwoDimensionalSignalProjectsOntoSlope) {
  const double var = 2.0;
  const double p = 0.6;
  InformationStructure info;
  info.d = 2;
  info.prior = {0.0, var};
  info.means = MatrixXd::Zero(1, 2);
  info.own_cov = {MatrixXd::Identity(2, 2)};
  info.kernel = MatrixXd::Zero(2, 2);
  info.k_theta = VectorXd(2);
  info.k_theta << p * std::sqrt(var), 0.0;
  AffineProfile prof{VectorXd::Zero(1), MatrixXd(1, 2)};
  prof.phi << 1.0, 1.0;
  const CanonicalForm f = canonicalize(standardize(info), prof);
  EXPECT_NEAR(f.info.h[0], p / (std::sqrt(var) * std::sqrt(2.0)), 1e-15);
  EXPECT_NEAR(f.profile.phi(0, 0), std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(f.info.g(0, 0), 1.0 - p * p / 2.0, 1e-15);
}

TEST(Canonicalize, RejectsZeroSlope) {
  const StandardizedInfo s =
      standardize(canonical_to_info(make_canonical_info(VectorXd::Constant(3, 0.5), MatrixXd::Zero(3, 3), 1.0),
                                    AgentGrid(3)));
  AffineProfile prof{VectorXd::Zero(3), MatrixXd(3, 1)};
  prof.phi << 1.0, 0.0, 1.0;
  try {
    canonicalize(s, prof);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ZeroSlope);
  }
}

TEST(VerifyEquivalence, DetectsNegatedSlope) {
  Rng rng(4);
  const auto g = lqg::testing::random_game(rng, 10, 2);
  AffineProfile neg = g.prof;
  neg.phi.row(2) *= -1.0;
  EXPECT_EQ(verify_equivalence(g.std_info, g.prof, g.std_info, g.prof).max_gap(), 0.0);
  EXPECT_FALSE(verify_equivalence(g.std_info, g.prof, g.std_info, neg).pass);
}

TEST(VerifyCanonicalEquilibrium, DistinguishesEquilibriumFromOtherProfiles) {
  Rng rng(6);
  const auto g = lqg::testing::random_game(rng, 20, 2);
  const CanonicalForm f = canonicalize(g.std_info, g.prof);
  EXPECT_LE(verify_canonical_equilibrium(g.payoff, f.info, f.profile, g.grid, g.info.prior), 1e-8);
  AffineProfile other = f.profile;
  other.phi.array() += 0.5;
  EXPECT_GT(verify_canonical_equilibrium(g.payoff, f.info, other, g.grid, g.info.prior), 1e-3);
}

TEST(VerifyCanonicalEquilibrium, NoIncentiveGameHasZeroProfile) {
  const Index n = 6;
  PayoffStructure p{VectorXd::Zero(n), VectorXd::Zero(n), MatrixXd::Constant(n, n, 0.4)};
  const CanonicalInfo c = make_canonical_info(VectorXd::Constant(n, 0.5), MatrixXd::Zero(n, n), 1.0);
  const AffineProfile zero{VectorXd::Zero(n), MatrixXd::Zero(n, 1)};
  EXPECT_EQ(verify_canonical_equilibrium(p, c, zero, AgentGrid(n), Prior{}), 0.0);
}

TEST(CanonicalProperty, EquivalenceAndEquilibriumOnRandomGames) {
  Rng rng(99);
  for (int trial = 0; trial < 30; ++trial) {
    const auto g = lqg::testing::random_game(rng, 25, 1 + trial % 3);
    const CanonicalForm f = canonicalize(g.std_info, g.prof);
    const InformationStructure cinfo = canonical_to_info(f.info, g.grid, g.info.prior.mu);
    EXPECT_TRUE(validate_joint_psd(cinfo, default_psd_subsets(25, trial)).pass) << "trial " << trial;
    for (Index i = 0; i < 25; ++i) {
      EXPECT_LE(f.info.var_theta * f.info.h[i] * f.info.h[i], 1.0 + 1e-10);
      EXPECT_GE(f.profile.phi(i, 0), 0.0);
    }
    const auto eq = verify_equivalence(g.std_info, g.prof, standardize(cinfo), f.profile);
    EXPECT_LE(eq.max_gap(), 1e-10) << "trial " << trial;
    EXPECT_LE(verify_canonical_equilibrium(g.payoff, f.info, f.profile, g.grid, g.info.prior), 1e-8);
  }
}

TEST(CanonicalProperty, CanonicalizingTwiceChangesNothing) {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const auto g = lqg::testing::random_game(rng, 15, 3);
    const CanonicalForm once = canonicalize(g.std_info, g.prof);
    const CanonicalForm twice =
        canonicalize(standardize(canonical_to_info(once.info, g.grid, g.info.prior.mu)), once.profile);
    EXPECT_LE((twice.info.h - once.info.h).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((twice.info.g - once.info.g).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((twice.info.g_kernel_diag - once.info.g_kernel_diag).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((twice.profile.phi - once.profile.phi).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(CanonicalProperty, OneDimensionalSignalsOnlyChangeSigns) {
  // With d = 1 the canonical exposure is sign(phi) P_theta / sigma.
  Rng rng(30);
  for (int trial = 0; trial < 10; ++trial) {
    const auto g = lqg::testing::random_game(rng, 12, 1);
    const CanonicalForm f = canonicalize(g.std_info, g.prof);
    for (Index i = 0; i < 12; ++i) {
      const double sign = g.prof.phi(i, 0) > 0 ? 1.0 : -1.0;
      EXPECT_NEAR(f.info.h[i], sign * g.std_info.p_theta[i] / g.std_info.prior.sd(), 1e-13);
    }
  }
}
