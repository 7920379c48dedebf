#include <gtest/gtest.h>

#include "ddc/spectrum.hpp"
#include "oracles.hpp"

using namespace ddc;

namespace {

Params base(double eps, int J = 6, int K = 6) {
  Params p;
  p.R2 = 10;
  p.eps = eps;
  p.J = J;
  p.K = K;
  return p;
}

/// Eigenvalue of -A with largest real part.
cplx leading_of(const Eigen::MatrixXd& A) {
  const Eigen::VectorXcd ev = Eigen::EigenSolver<Eigen::MatrixXd>(-A, false).eigenvalues();
  cplx best = ev[0];
  for (int i = 1; i < ev.size(); ++i)
    if (ev[i].real() > best.real()) best = ev[i];
  return best;
}

}  // namespace

TEST(Critical, MatchesClosedFormIncompressible) {
  const Params p = base(0);
  const EigenData ed = critical_R1(p);
  const oracle::ClosedHopf ref = oracle::closed_form_hopf(p, 6, 6);
  EXPECT_NEAR(ed.R1_crit, ref.R1, 1e-8 * ref.R1);
  EXPECT_NEAR(ed.a, ref.a, 1e-7 * ref.a);
  EXPECT_EQ(ed.mode, ref.mode);
}

TEST(Critical, CompressibleOnsetIsNeutral) {
  const Params p = base(0.05);
  const EigenData ed = critical_R1(p);
  const cplx z = leading_of(oracle::mode_matrix_5(p.with_R1(ed.R1_crit), ed.mode));
  EXPECT_LE(std::abs(z.real()), 1e-8);
  EXPECT_NEAR(std::abs(z.imag()), ed.a, 1e-8 * ed.a);
  // Every other mode is damped at the same R1.
  for (int j = 0; j <= p.J; ++j)
    for (int k = 0; k <= p.K; ++k) {
      if ((j == 0 && k == 0) || ModeIndex{j, k} == ed.mode) continue;
      EXPECT_LT(leading_of(oracle::mode_matrix_5(p.with_R1(ed.R1_crit), {j, k})).real(), 0) << j << "," << k;
    }
}

TEST(Critical, EigenvectorsAndNormalization) {
  for (double eps : {0.0, 0.05}) {
    const Params p = base(eps);
    const EigenData ed = critical_R1(p);
    const GalerkinSystem sys(p.with_R1(ed.R1_crit));
    const Eigen::MatrixXcd L = sys.L().matrix.cast<cplx>(), Ls = sys.Lstar().matrix.cast<cplx>();
    EXPECT_LE((L * ed.up + ed.lambda_plus * ed.up).norm(), 1e-10 * std::abs(ed.lambda_plus) * ed.up.norm());
    EXPECT_LE((Ls * ed.upa + std::conj(ed.lambda_plus) * ed.upa).norm(), 1e-10 * std::abs(ed.lambda_plus) * ed.upa.norm());
    EXPECT_NEAR(std::abs(sys.inner(ed.up, ed.upa) - cplx(1)), 0, 1e-10);
    EXPECT_LE(std::abs(sys.inner(Eigen::VectorXcd(ed.up.conjugate()), ed.upa)), 1e-10);
    EXPECT_NEAR(norms(ed.u_plus, 0.0).l2_eps, 1.0, 1e-12);
    const cplx th = ed.u_plus(Var::theta, ed.mode.j, ed.mode.k);
    EXPECT_GT(th.real(), 0);
    EXPECT_LE(std::abs(th.imag()), 1e-14);
    // Conjugate vector belongs to the conjugate eigenvalue.
    const Eigen::VectorXcd uc = ed.up.conjugate();
    EXPECT_LE((L * uc + std::conj(ed.lambda_plus) * uc).norm(), 1e-10 * std::abs(ed.lambda_plus));
  }
}

TEST(Critical, TransversalityFormulaAgreesWithDifference) {
  for (double eps : {0.0, 0.05}) {
    const Params p = base(eps);
    const EigenData ed = critical_R1(p);
    const TransversalityCheck t = transversality_check(ed, p);
    EXPECT_GT(t.formula_value, 0);
    EXPECT_NEAR(t.fd_value, t.formula_value, 1e-5 * std::abs(t.formula_value));
  }
}

TEST(Critical, TruncationRobust) {
  const EigenData a = critical_R1(base(0, 6, 6)), b = critical_R1(base(0, 12, 12));
  EXPECT_EQ(a.mode, b.mode);
  EXPECT_NEAR(a.R1_crit, b.R1_crit, 1e-9 * a.R1_crit);
  EXPECT_NEAR(a.a, b.a, 1e-8 * a.a);
}

TEST(Critical, SpectralGapPositive) {
  for (double eps : {0.0, 0.05}) {
    const Params p = base(eps);
    const EigenData ed = critical_R1(p);
    EXPECT_GT(spectral_gap(GalerkinSystem(p.with_R1(ed.R1_crit)), ed), 0);
  }
}

TEST(Critical, SteadyOnsetWithoutSolute) {
  Params p = base(0);
  p.R2 = 0;
  try {
    critical_R1(p);
    FAIL() << "expected SteadyOnsetFirst";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SteadyOnsetFirst);
  }
}

TEST(Critical, AcousticModeLeadsAtLargeEps) {
  const Params p = base(0.2, 4, 4);
  const auto cs = mode_crossings(p);
  ASSERT_FALSE(cs.empty());
  EXPECT_EQ(cs.front().mode, (ModeIndex{0, 1}));
  EXPECT_TRUE(cs.front().hopf);
  bool found11 = false;
  for (const auto& c : cs)
    if (c.mode == ModeIndex{1, 1}) {
      found11 = true;
      EXPECT_GT(c.R1, cs.front().R1);
    }
  EXPECT_TRUE(found11);
}

TEST(Projection, IdempotentAndKillsConjugate) {
  const Params p = base(0.05);
  const EigenData ed = critical_R1(p);
  const Projection once = project_P_eps(ed.u_plus, ed);
  EXPECT_NEAR(std::abs(once.coefficient - cplx(1)), 0, 1e-10);
  const Projection pc = project_P_eps(conjugate(ed.u_plus), ed);
  EXPECT_LE(std::abs(pc.coefficient), 1e-10);
  ComplexField mix = ed.u_plus;
  mix *= cplx(0.3, -1.2);
  mix += conjugate(ed.u_plus);
  const Projection a = project_P_eps(mix, ed), b = project_P_eps(a.image, ed);
  EXPECT_LE((a.image.coeffs() - b.image.coeffs()).norm(), 1e-10 * a.image.coeffs().norm());
}
