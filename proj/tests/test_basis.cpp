#include <gtest/gtest.h>

#include <random>

#include "ddc/basis.hpp"
#include "oracles.hpp"

using namespace ddc;

namespace {

Params small(double eps = 0.3, int J = 5, int K = 4) {
  Params p;
  p.eps = eps;
  p.R1 = 20;
  p.R2 = 10;
  p.J = J;
  p.K = K;
  return p;
}

}  // namespace

TEST(Params, ValidateRejectsBadValues) {
  Params p;
  EXPECT_NO_THROW(p.validate());
  p.Pr = 0;
  EXPECT_THROW(p.validate(), Error);
  p = Params{};
  p.eps = -1;
  EXPECT_THROW(p.validate(), Error);
  p = Params{};
  p.J = 0;
  try {
    p.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidArgument);
  }
}

TEST(Params, PaperRegimeIsAdvisory) {
  Params p;
  EXPECT_TRUE(p.paper_regime());
  p.Pr = 0.5;
  EXPECT_FALSE(p.paper_regime());
  EXPECT_NO_THROW(p.validate());
}

TEST(ModeTable, CountsFollowAdmissibility) {
  for (auto [J, K] : {std::pair{1, 1}, {3, 5}, {12, 12}}) {
    const ModeTable t(J, K);
    EXPECT_EQ(t.count(Var::phi), (J + 1) * (K + 1) - 1);
    EXPECT_EQ(t.count(Var::w1), J * (K + 1));
    for (Var v : {Var::w2, Var::theta, Var::psi}) EXPECT_EQ(t.count(v), (J + 1) * K);
    EXPECT_LT(t.index(Var::phi, 0, 0), 0);
    EXPECT_LT(t.index(Var::w1, 0, 2), 0);
    EXPECT_LT(t.index(Var::theta, 2, 0), 0);
  }
  EXPECT_EQ(ModeTable(12, 12).size(), 792);
  EXPECT_THROW(ModeTable(0, 3), Error);
}

TEST(ModeTable, BlocksPartitionTheTable) {
  const ModeTable t(4, 3);
  std::vector<int> seen(t.size(), 0);
  for (const auto& b : t.blocks())
    for (int i : b.idx) {
      ++seen[i];
      EXPECT_EQ(t[i].mode, b.mode);
    }
  for (int s : seen) EXPECT_EQ(s, 1);
}

TEST(Basis, InnerProductMatchesQuadrature) {
  std::mt19937_64 rng(1);
  for (double eps : {0.0, 0.1, 1.0}) {
    const Params p = small(eps);
    for (int trial = 0; trial < 3; ++trial) {
      const RealField u = oracle::random_field(p, rng), v = oracle::random_field(p, rng);
      const double ref = oracle::inner_quadrature(u, v, eps);
      EXPECT_NEAR(inner_eps(u, v, eps), ref, 1e-10 * std::abs(ref) + 1e-12);
    }
  }
}

TEST(Basis, EvaluateMatchesPointSum) {
  std::mt19937_64 rng(2);
  const Params p = small();
  const RealField u = oracle::random_field(p, rng);
  for (Var v : kAllVars)
    for (double x : {0.1, 0.7, 2.3})
      for (double y : {0.05, 0.5, 0.93}) EXPECT_NEAR(evaluate(u, v, x, y), oracle::point(u, v, x, y).f, 1e-12);
}

TEST(Basis, SymmetryClassesInPhysicalSpace) {
  std::mt19937_64 rng(3);
  const Params p = small();
  const RealField u = oracle::random_field(p, rng);
  const double x = 0.4, y = 0.3;
  EXPECT_NEAR(evaluate(u, Var::w1, -x, y), -evaluate(u, Var::w1, x, y), 1e-12);
  for (Var v : {Var::phi, Var::w2, Var::theta, Var::psi}) EXPECT_NEAR(evaluate(u, v, -x, y), evaluate(u, v, x, y), 1e-12);
  // w2, theta, psi vanish on the plates; w1 is free-slip there.
  for (Var v : {Var::w2, Var::theta, Var::psi}) {
    EXPECT_NEAR(evaluate(u, v, x, 0.0), 0.0, 1e-12);
    EXPECT_NEAR(evaluate(u, v, x, 1.0), 0.0, 1e-12);
  }
}

TEST(Norms, InvariantsAndMonotonicity) {
  std::mt19937_64 rng(4);
  const Params p = small();
  const RealField u = oracle::random_field(p, rng);
  double prev = 0;
  for (double eps : {0.0, 0.01, 0.1, 0.5, 1.0, 2.0}) {
    const NormReport n = norms(u, eps);
    EXPECT_GE(n.l2_eps, prev);
    EXPECT_LE(n.l2_eps, n.x1_eps);
    EXPECT_GE(n.x1star, 0);
    EXPECT_GE(n.x1, 0);
    prev = n.l2_eps;
  }
}

TEST(Norms, DualNormIsAttained) {
  // sup_v (u, v)_0 / ||v||_X1 is reached at v = (-Laplacian)^-1 u and bounds every other v.
  std::mt19937_64 rng(5);
  const Params p = small(0.0);
  RealField u = oracle::random_field(p, rng);
  for (int i = 0; i < u.size(); ++i)
    if (u.table()[i].var == Var::phi) u.coeffs()[i] = 0;
  RealField v = u;
  for (int i = 0; i < v.size(); ++i) v.coeffs()[i] /= q2(v.table()[i].mode, p.alpha);
  const double dual = norms(u, 0).x1star;
  EXPECT_NEAR(oracle::inner_quadrature(u, v, 0) / norms(v, 0).x1, dual, 1e-10 * dual);
  for (int trial = 0; trial < 20; ++trial) {
    const RealField w = oracle::random_field(p, rng);
    EXPECT_LE(std::abs(inner_eps(u, w, 0.0)) / norms(w, 0).x1, dual * (1 + 1e-12));
  }
}

TEST(Helmholtz, IdempotentOrthogonalSolenoidal) {
  std::mt19937_64 rng(6);
  const Params p = small();
  for (int trial = 0; trial < 5; ++trial) {
    const RealField u = oracle::random_field(p, rng);
    const RealField Pu = helmholtz_project(u);
    const RealField PPu = helmholtz_project(Pu);
    EXPECT_LE((PPu.coeffs() - Pu.coeffs()).cwiseAbs().maxCoeff(), 1e-14 * u.coeffs().cwiseAbs().maxCoeff());
    EXPECT_LE(divergence_norm(Pu), 1e-12 * norms(u, 0).l2_eps);
    RealField wperp = u, wpar = Pu;
    wperp.coeffs() -= Pu.coeffs();
    for (RealField* f : {&wperp, &wpar})
      for (int i = 0; i < f->size(); ++i)
        if (f->table()[i].var != Var::w1 && f->table()[i].var != Var::w2) f->coeffs()[i] = 0;
    const double w2 = std::pow(norms(u, 0).l2_eps, 2);
    EXPECT_LE(std::abs(oracle::inner_quadrature(wpar, wperp, 0)), 1e-13 * w2);
  }
}

TEST(SpectralField, ComplexHelpers) {
  std::mt19937_64 rng(7);
  const Params p = small();
  const RealField a = oracle::random_field(p, rng), b = oracle::random_field(p, rng);
  Eigen::VectorXcd z(a.size());
  z.real() = a.coeffs();
  z.imag() = b.coeffs();
  const ComplexField c(p, z);
  EXPECT_EQ(real_part(c).coeffs(), a.coeffs());
  EXPECT_EQ(imag_part(c).coeffs(), b.coeffs());
  EXPECT_EQ(imag_part(conjugate(c)).coeffs(), Eigen::VectorXd(-b.coeffs()));
  EXPECT_THROW(ComplexField(p, Eigen::VectorXcd::Zero(3)), Error);
}
