#include <gtest/gtest.h>

#include <random>

#include "ddc/hopf_branch.hpp"

using namespace ddc;

namespace {

Params base(double eps = 0, int JK = 6) {
  Params p;
  p.R2 = 10;
  p.eps = eps;
  p.J = JK;
  p.K = JK;
  return p;
}

struct Fixture {
  Params p;
  EigenData ed;
  HopfProblem hp;
  explicit Fixture(double eps = 0, int M = 8) : p(base(eps)), ed(critical_R1(p)), hp(p, ed, M) {}
};

const Fixture& incomp() {
  static const Fixture f(0);
  return f;
}

Stack random_stack(const HopfProblem& hp, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Stack H = hp.zeros();
  for (int c = 0; c < H.cols(); ++c)
    for (int r = 0; r < H.rows(); ++r) H(r, c) = cplx(nd(rng), nd(rng));
  return H;
}

double rel(const Stack& a, const Stack& b) { return (a - b).norm() / std::max(1.0, b.norm()); }

}  // namespace

TEST(HopfAlgebra, KernelAndSplitting) {
  const HopfProblem& hp = incomp().hp;
  EXPECT_LE(hp.stack_norm(hp.apply_B(hp.z_plus(), 0.0)), 1e-10 * hp.a_eps());
  EXPECT_LE(hp.stack_norm(hp.apply_B(hp.z0(), 0.0)), 1e-10 * hp.a_eps());
  std::mt19937_64 rng(21);
  const Stack H = random_stack(hp, rng);
  EXPECT_LE(rel(hp.P(hp.P(H)), hp.P(H)), 1e-12);
  EXPECT_LE(std::abs(hp.bracket_plus(hp.Q(H))), 1e-12 * H.norm());
  EXPECT_NEAR(std::abs(hp.bracket_plus(hp.z0()) - cplx(1)), 0, 1e-12);
  const cplx lhs = hp.bracket_plus(hp.dt(H)), rhs = cplx(0, hp.a_base()) * hp.bracket_plus(H);
  EXPECT_LE(std::abs(lhs - rhs), 1e-12 * std::abs(rhs));
}

TEST(HopfAlgebra, SolveInvertsOnRange) {
  const HopfProblem& hp = incomp().hp;
  std::mt19937_64 rng(22);
  const Stack F = random_stack(hp, rng);
  for (double om : {0.0, 0.03}) {
    const Stack U = hp.solve_B(F, om);
    EXPECT_LE(std::abs(hp.bracket_plus(U)), 1e-12 * U.norm());
    EXPECT_LE(rel(hp.apply_B(U, om), hp.Q(F)), 1e-10);
  }
}

TEST(HopfAlgebra, ProductMatchesPointwiseSum) {
  // N of two single-harmonic stacks lands on the sum harmonic with the spatial product.
  const HopfProblem& hp = incomp().hp;
  std::mt19937_64 rng(23);
  std::normal_distribution<double> nd;
  Eigen::VectorXd x(hp.n()), y(hp.n());
  for (int i = 0; i < hp.n(); ++i) {
    x[i] = nd(rng);
    y[i] = nd(rng);
  }
  Stack A = hp.zeros(), B = hp.zeros();
  A.col(hp.M() + 0) = x.cast<cplx>();
  B.col(hp.M() + 0) = y.cast<cplx>();
  const Stack C = hp.N(A, B);
  const Eigen::VectorXd ref = hp.system().N(x, y);
  EXPECT_LE((C.col(hp.M()).real() - ref).norm(), 1e-12 * ref.norm());
  EXPECT_LE(C.col(hp.M() + 3).norm(), 1e-12 * ref.norm());
}

TEST(HopfBranch, FirstOrderHasNoCriticalComponent) {
  const HopfProblem& hp = incomp().hp;
  const HopfCoefficients c = hp.first_order();
  EXPECT_LE(std::abs(hp.bracket_plus(c.U0s)), 1e-12 * c.U0s.norm());
  EXPECT_LE(c.U0.reality_defect(), 1e-12);
  EXPECT_TRUE(std::isfinite(c.eta0));
}

TEST(HopfBranch, PicardSolvesTruncatedProblem) {
  const HopfProblem& hp = incomp().hp;
  const HopfBranchPoint bp = hp.picard(0.1);
  EXPECT_LE(bp.residual, 1e-9);
  EXPECT_LE(bp.bracket_U, 1e-10);
  EXPECT_LE(bp.orbit_U.reality_defect(), 1e-10);
  EXPECT_LT(bp.contraction, 1);
  EXPECT_NEAR(bp.eta, 0.01 * bp.eta_tilde, 1e-15);
  // Independent check of the residual: the real snapshots satisfy the ODE at random phases.
  const GalerkinSystem& sys = hp.system();
  const Eigen::MatrixXd A = sys.L().matrix + bp.eta * sys.K();
  const double speed = hp.a_eps() * (1 + bp.omega) / hp.a_base();
  for (double t : {0.17, 0.9, 1.3}) {
    auto state = [&](double s) {
      const RealField f = bp.orbit_U.at_time(s);
      const RealField z = hp.to_field(hp.z0()).at_time(s);
      return Eigen::VectorXd(sys.restrict(Eigen::VectorXd(0.1 * (z.coeffs() + 0.1 * f.coeffs()))));
    };
    const double h = 1e-4;
    const Eigen::VectorXd u = state(t), du = (state(t + h) - state(t - h)) / (2 * h);
    const Eigen::VectorXd r = speed * du + A * u + sys.N(u, u);
    EXPECT_LE(sys.norm(r), 1e-5 * sys.norm(A * u));
  }
}

TEST(HopfBranch, EvenInDelta) {
  const HopfProblem& hp = incomp().hp;
  const HopfBranchPoint a = hp.picard(0.1), b = hp.picard(-0.1);
  EXPECT_NEAR(a.eta, b.eta, 1e-12);
  EXPECT_NEAR(a.omega, b.omega, 1e-12);
}

TEST(HopfBranch, SecondOrderApproach) {
  const HopfProblem& hp = incomp().hp;
  const double e0 = hp.first_order().eta0;
  const double g1 = std::abs(hp.picard(0.2).eta_tilde - e0), g2 = std::abs(hp.picard(0.1).eta_tilde - e0);
  EXPECT_NEAR(g1 / g2, 4.0, 0.3);
}

TEST(HopfBranch, NewtonAgreesWithPicard) {
  const HopfProblem& hp = incomp().hp;
  BranchOptions o;
  o.newton = true;
  const HopfBranchPoint a = hp.picard(0.15), b = hp.picard(0.15, o);
  EXPECT_TRUE(b.newton);
  EXPECT_NEAR(a.eta_tilde, b.eta_tilde, 1e-9 * std::abs(a.eta_tilde));
  EXPECT_NEAR(a.omega_tilde, b.omega_tilde, 1e-9 * std::abs(a.omega_tilde) + 1e-12);
  EXPECT_LE(rel(a.U, b.U), 1e-9);
}

TEST(HopfBranch, HarmonicShareGuard) {
  const HopfProblem& hp = incomp().hp;
  BranchOptions o;
  o.max_last_share = 1e-300;
  try {
    hp.picard(0.1, o);
    FAIL() << "expected NotConverged";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotConverged);
  }
  EXPECT_THROW(HopfProblem(incomp().p, incomp().ed, 1), Error);
}

TEST(TimePeriodic, SnapshotsAndPairing) {
  const HopfProblem& hp = incomp().hp;
  const TimePeriodicField z = hp.to_field(hp.z0());
  const ComplexField& u = incomp().ed.u_plus;
  const double t = 0.37;
  const cplx e = std::exp(cplx(0, hp.a_base() * t));
  // u_plus carries the recovered pressure at eps = 0; the coordinate lift does not.
  RealField ref(u.params(), 2 * (e * u.coeffs()).real());
  ref.set_grid(Var::phi, Eigen::MatrixXd::Zero(u.params().J + 1, u.params().K + 1));
  EXPECT_LE((z.at_time(t).coeffs() - ref.coeffs()).norm(), 1e-12 * ref.coeffs().norm());
  EXPECT_NEAR(std::abs(bracket_plus(z, incomp().ed) - cplx(1)), 0, 1e-12);
  EXPECT_NEAR(tp_inner_eps(z, z, 0).real(), 2.0, 1e-12);
  const TimePeriodicField other = TimePeriodicField::zeros(incomp().p, 4, 1.0);
  EXPECT_THROW(tp_inner_eps(z, other, 0), Error);
}

TEST(Fit, LinearAndLogLog) {
  const FitResult f = linear_fit({{0, 1}, {1, 3}, {2, 5}});
  EXPECT_NEAR(f.slope, 2, 1e-14);
  EXPECT_NEAR(f.intercept, 1, 1e-14);
  EXPECT_NEAR(f.r_squared, 1, 1e-14);
  const FitResult g = loglog_fit({0.1, 0.2, 0.4}, {0.03, 0.12, 0.48});
  EXPECT_NEAR(g.slope, 2, 1e-12);
}

TEST(EpsStudy, GapsShrinkWithEps) {
  const EpsStudy st = eps_convergence_study(base(0, 4), {0.04, 0.02, 0.01}, 0.1, 6);
  ASSERT_EQ(st.rows.size(), 3u);
  for (const auto& r : st.rows) EXPECT_TRUE(r.error.empty()) << r.error;
  for (size_t i = 1; i < st.rows.size(); ++i) {
    EXPECT_LT(st.rows[i].eta_gap, st.rows[i - 1].eta_gap);
    EXPECT_LT(st.rows[i].velocity_gap, st.rows[i - 1].velocity_gap);
  }
  EXPECT_GT(st.eta_fit.slope, 1.5);
}
