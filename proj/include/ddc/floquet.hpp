#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "ddc/hopf_branch.hpp"

namespace ddc {

struct FloquetOptions {
  int steps0 = 512;
  double tol = 1e-12;
  int max_doublings = 5;
  bool hill = true;
  int hill_vectors = 6;
};

struct FloquetResult {
  double delta = 0;
  std::vector<cplx> multipliers;  // descending modulus
  double trivial_defect = 0;
  double trivial_overlap = 0;
  cplx lambda_delta{};
  double lambda_pred = 0;
  cplx lambda_hill{};
  double hill_agreement = 0;
  int hill_window_count = 0;
  double window = 0;
  double kappa1_estimate = 0;
  double Lambda = 0;  // -log(max other |mu|) / T_a
  double period = 0;  // T_a
  int steps = 0;
  double monodromy_error = 0;
  bool stable = false;
};

/// Linearization about a branch point in the rescaled time of period T_a = 2 pi / a:
/// v' = -c (L_eta v + A(t) v), c = (a / a^eps) / (1 + omega), A(t) = M(u(t), .).
class OrbitLinearization {
 public:
  OrbitLinearization(const HopfProblem& hp, const HopfBranchPoint& bp)
      : hp_(hp), delta_(bp.delta), eta_(bp.eta), omega_(bp.omega) {
    const GalerkinSystem& sys = hp.system();
    const int n = sys.dim(), M = hp.M();
    a_ = hp.a_base();
    c_ = (a_ / hp.a_eps()) / (1 + omega_);
    Leta_ = sys.L().matrix + eta_ * sys.K();
    u_ = bp.delta * (hp.z0() + bp.delta * bp.U);
    Ah_.assign(2 * M + 1, Eigen::MatrixXcd::Zero(n, n));
    for (int m = 0; m <= M; ++m) {
      const Eigen::VectorXd ur = u_.col(m + M).real(), ui = u_.col(m + M).imag();
      if (ur.norm() + ui.norm() == 0) continue;
      for (int i = 0; i < n; ++i) {
        Eigen::VectorXd e = Eigen::VectorXd::Unit(n, i);
        Ah_[m + M].col(i) = sys.M(ur, e).cast<cplx>() + cplx(0, 1) * sys.M(ui, e).cast<cplx>();
      }
      if (m > 0) Ah_[M - m] = Ah_[m + M].conjugate();
    }
  }

  double period() const { return 2 * kPi / a_; }
  double c() const { return c_; }
  const Eigen::MatrixXd& L_eta() const { return Leta_; }
  const Eigen::MatrixXcd& A_hat(int m) const { return Ah_.at(m + hp_.M()); }
  const Stack& orbit() const { return u_; }

  Eigen::MatrixXd A(double t) const {
    Eigen::MatrixXd out = Ah_[hp_.M()].real();
    for (int m = 1; m <= hp_.M(); ++m) out += 2 * (Ah_[m + hp_.M()] * std::exp(cplx(0, m * a_ * t))).real();
    return out;
  }

  /// Right-hand side of the linearized equation, v' = -c (L_eta + A(t)) v.
  Eigen::VectorXd rhs(double t, const Eigen::VectorXd& v) const { return -c_ * (Leta_ * v + A(t) * v); }

  /// Orbit state and its rescaled-time derivative at time t.
  Eigen::VectorXd state(double t, bool derivative = false) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(u_.rows());
    for (int m = -hp_.M(); m <= hp_.M(); ++m) {
      cplx f = std::exp(cplx(0, m * a_ * t));
      if (derivative) f *= cplx(0, m * a_);
      out += (u_.col(m + hp_.M()) * f).real();
    }
    return out;
  }

  /// exp(-c L_eta s) per mode block.
  struct BlockProp {
    std::vector<std::vector<int>> idx;
    std::vector<Eigen::MatrixXd> E;
    Eigen::MatrixXd apply(const Eigen::MatrixXd& X) const {
      Eigen::MatrixXd out(X.rows(), X.cols());
      for (size_t b = 0; b < idx.size(); ++b) {
        const int nb = static_cast<int>(idx[b].size());
        Eigen::MatrixXd xb(nb, X.cols());
        for (int r = 0; r < nb; ++r) xb.row(r) = X.row(idx[b][r]);
        xb = E[b] * xb;
        for (int r = 0; r < nb; ++r) out.row(idx[b][r]) = xb.row(r);
      }
      return out;
    }
  };
  BlockProp propagator(double s) const {
    BlockProp P;
    for (const auto& b : hp_.system().L().blocks) {
      const int nb = static_cast<int>(b.idx.size());
      Eigen::MatrixXd blk(nb, nb);
      for (int r = 0; r < nb; ++r)
        for (int q = 0; q < nb; ++q) blk(r, q) = Leta_(b.idx[r], b.idx[q]);
      P.idx.push_back(b.idx);
      P.E.push_back((-c_ * s * blk).exp());
    }
    return P;
  }

  /// Flow map over [0, t_end] by integrating-factor RK4 with a fixed number of steps.
  Eigen::MatrixXd flow(double t_end, int steps) const {
    const int n = hp_.n();
    const double h = t_end / steps;
    const BlockProp E = propagator(h), E2 = propagator(h / 2);
    Eigen::MatrixXd V = Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd A0 = -c_ * A(0);
    for (int s = 0; s < steps; ++s) {
      const double t = s * h;
      const Eigen::MatrixXd Am = -c_ * A(t + h / 2), A1 = -c_ * A(t + h);
      const Eigen::MatrixXd EV = E2.apply(V);
      const Eigen::MatrixXd k1 = A0 * V;
      const Eigen::MatrixXd k2 = Am * (EV + (h / 2) * E2.apply(k1));
      const Eigen::MatrixXd k3 = Am * (EV + (h / 2) * k2);
      const Eigen::MatrixXd k4 = A1 * (E2.apply(EV) + h * E2.apply(k3));
      A0 = A1;
      V = E2.apply(E2.apply(V + (h / 6) * k1) + (h / 3) * (k2 + k3)) + (h / 6) * k4;
    }
    return V;
  }
  Eigen::MatrixXd monodromy(int steps) const { return flow(period(), steps); }

  /// Step doubling until the Richardson estimate of the two multipliers nearest 1 and of the
  /// largest remaining modulus drops below tol.
  Eigen::MatrixXd monodromy_converged(const FloquetOptions& o, int& steps, double& err) const {
    auto key = [](const Eigen::MatrixXd& Phi) {
      Eigen::VectorXcd mu = Eigen::EigenSolver<Eigen::MatrixXd>(Phi, false).eigenvalues();
      std::vector<cplx> v(mu.data(), mu.data() + mu.size());
      std::sort(v.begin(), v.end(), [](cplx x, cplx y) { return std::abs(x - 1.0) < std::abs(y - 1.0); });
      double rest = 0;
      for (size_t i = 2; i < v.size(); ++i) rest = std::max(rest, std::abs(v[i]));
      return std::array<cplx, 3>{v[0], v[1], cplx(rest)};
    };
    steps = o.steps0;
    Eigen::MatrixXd prev = monodromy(steps);
    auto kp = key(prev);
    for (int k = 0; k < o.max_doublings; ++k) {
      Eigen::MatrixXd next = monodromy(2 * steps);
      steps *= 2;
      const auto kn = key(next);
      err = 0;
      for (int i = 0; i < 3; ++i) err = std::max(err, std::abs(kn[i] - kp[i]) / 15);
      prev = next;
      kp = kn;
      if (err <= o.tol) return prev;
    }
    if (err > 1e3 * o.tol)
      throw Error(ErrorCode::StepCollapse, "monodromy did not reach tolerance after step doubling");
    return prev;
  }

  /// Hill matrix of lambda + B: harmonic blocks i m a^eps + (L_eta + A_{m-k}) / (1 + omega).
  Eigen::MatrixXcd hill_matrix() const {
    const int n = hp_.n(), M = hp_.M(), N = (2 * M + 1) * n;
    Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(N, N);
    const double g = 1 / (1 + omega_);
    for (int m = -M; m <= M; ++m) {
      H.block((m + M) * n, (m + M) * n, n, n) = g * Leta_.cast<cplx>();
      H.block((m + M) * n, (m + M) * n, n, n).diagonal().array() += cplx(0, m * hp_.a_eps());
      for (int k = -M; k <= M; ++k)
        if (std::abs(m - k) <= M) H.block((m + M) * n, (k + M) * n, n, n) += g * Ah_[m - k + M];
    }
    return H;
  }

 private:
  const HopfProblem& hp_;
  double delta_, eta_, omega_;
  double a_ = 1, c_ = 1;
  Eigen::MatrixXd Leta_;
  Stack u_;
  std::vector<Eigen::MatrixXcd> Ah_;
};

/// Eigenvalues of -H nearest zero by shifted inverse subspace iteration (deterministic start).
/// The shift keeps the factorization away from the trivial exponent at zero. Only Ritz pairs
/// with residual below 1e-9 |H|_F are returned, so the result can hold fewer than p values.
inline std::vector<cplx> hill_eigenvalues_near_zero(const Eigen::MatrixXcd& H, int p, double shift, int iters = 40) {
  Eigen::MatrixXcd Hs = H;
  Hs.diagonal().array() += shift;
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(Hs);
  std::mt19937_64 rng(12345);
  std::normal_distribution<double> nd;
  Eigen::MatrixXcd X(H.rows(), p);
  for (int i = 0; i < X.size(); ++i) X.data()[i] = cplx(nd(rng), nd(rng));
  for (int it = 0; it < iters; ++it) {
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(lu.solve(X));
    X = qr.householderQ() * Eigen::MatrixXcd::Identity(H.rows(), p);
  }
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(X.adjoint() * H * X);
  const double tol = 1e-9 * H.norm();
  std::vector<cplx> out;
  for (int i = 0; i < p; ++i) {
    const cplx th = es.eigenvalues()[i];
    const Eigen::VectorXcd y = X * es.eigenvectors().col(i);
    if ((H * y - th * y).norm() <= tol * y.norm()) out.push_back(-th);
  }
  std::sort(out.begin(), out.end(), [](cplx a, cplx b) { return std::abs(a) < std::abs(b); });
  return out;
}

/// Decay rate of the Q-part at delta = 0 in the rescaled time: (a / a^eps) times the distance of
/// the rest of the spectrum of -L from the axis (the delta = 0 monodromy is exp(-(a/a^eps) L T_a)).
inline double kappa1(const HopfProblem& hp) {
  const EigenData& ed = hp.eigen();
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& b : hp.system().L().blocks) {
    Eigen::VectorXcd ev = eigenvalues_of_negated(b.A);
    for (int i = 0; i < ev.size(); ++i) {
      const cplx z = ev[i];
      if (b.mode == ed.mode && (std::abs(z - ed.lambda_plus) < 1e-6 * (1 + ed.a) ||
                                std::abs(z - std::conj(ed.lambda_plus)) < 1e-6 * (1 + ed.a)))
        continue;
      worst = std::max(worst, z.real());
    }
  }
  return -worst * hp.a_base() / hp.a_eps();
}

inline FloquetResult floquet_analysis(const HopfProblem& hp, const HopfBranchPoint& bp, const FloquetOptions& o = {}) {
  OrbitLinearization lin(hp, bp);
  FloquetResult r;
  r.delta = bp.delta;
  r.period = lin.period();
  const Eigen::MatrixXd Phi = lin.monodromy_converged(o, r.steps, r.monodromy_error);
  Eigen::EigenSolver<Eigen::MatrixXd> es(Phi, true);
  if (es.info() != Eigen::Success) throw Error(ErrorCode::EigenFailure, "monodromy eigensolver failed");
  const Eigen::VectorXcd mu = es.eigenvalues();
  std::vector<int> order(mu.size());
  for (int i = 0; i < mu.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int x, int y) {
    if (std::abs(mu[x]) != std::abs(mu[y])) return std::abs(mu[x]) > std::abs(mu[y]);
    return mu[x].imag() > mu[y].imag();
  });
  for (int i : order) r.multipliers.push_back(mu[i]);

  // Trivial multiplier: closest to 1; the nontrivial one: next closest to 1.
  std::vector<int> near = order;
  std::sort(near.begin(), near.end(), [&](int x, int y) { return std::abs(mu[x] - 1.0) < std::abs(mu[y] - 1.0); });
  const int i0 = near[0], i1 = near[1];
  r.trivial_defect = std::abs(mu[i0] - 1.0);
  const GalerkinSystem& sys = hp.system();
  const Eigen::VectorXcd v0 = es.eigenvectors().col(i0);
  const Eigen::VectorXcd du = lin.state(0, true).cast<cplx>();
  const double nv = sys.norm(v0), nd = sys.norm(du);
  r.trivial_overlap = (nv > 0 && nd > 0) ? std::abs(sys.inner(v0, du)) / (nv * nd) : 0;

  const double scale = (hp.a_base() / hp.a_eps()) * r.period;
  r.lambda_delta = std::log(mu[i1]) / scale;
  r.lambda_pred = 2 * bp.delta * bp.delta * hp.first_order().eta0 * hp.Kz0_plus().real();
  double other = 0;
  for (int i = 0; i < mu.size(); ++i)
    if (i != i0 && i != i1) other = std::max(other, std::abs(mu[i]));
  r.Lambda = other > 0 ? -std::log(other) / r.period : std::numeric_limits<double>::infinity();
  r.kappa1_estimate = kappa1(hp);

  if (o.hill) {
    r.window = std::min(std::max(4 * std::abs(r.lambda_pred), 0.5 * r.kappa1_estimate), 0.49 * hp.a_eps());
    const auto ev = hill_eigenvalues_near_zero(lin.hill_matrix(), o.hill_vectors, 0.5 * r.window);
    int count = 0;
    for (const cplx z : ev)
      if (std::abs(z) < r.window) ++count;
    r.hill_window_count = count;
    if (count != 2)
      throw Error(ErrorCode::WindowCount, "Hill window holds " + std::to_string(count) + " eigenvalues, expected 2");
    if (static_cast<int>(ev.size()) == count)
      throw Error(ErrorCode::WindowCount, "no converged Hill eigenvalue outside the window; raise hill_vectors");
    // ev[0] is the trivial exponent (0 up to truncation); ev[1] the nontrivial one.
    r.lambda_hill = std::abs(ev[0] - r.lambda_delta) < std::abs(ev[1] - r.lambda_delta) ? ev[0] : ev[1];
    r.hill_agreement = std::abs(r.lambda_hill - r.lambda_delta) / std::max(std::abs(r.lambda_delta), 1e-300);
  }
  r.stable = r.lambda_delta.real() < 0 && r.Lambda > 0 && r.trivial_defect <= 1e-6;
  return r;
}

/// log|det Phi(tau)| against the trace integral of the linearization (Liouville) on a short
/// interval tau where the fastest decay stays representable.
inline double liouville_defect(const HopfProblem& hp, const HopfBranchPoint& bp, int steps) {
  OrbitLinearization lin(hp, bp);
  double rate = 0;
  for (const auto& b : hp.system().L().blocks) rate = std::max(rate, b.A.cwiseAbs().rowwise().sum().maxCoeff());
  const double tau = std::min(lin.period(), 2.0 / (lin.c() * rate));
  const Eigen::MatrixXd Phi = lin.flow(tau, steps);
  const double logdet = Eigen::PartialPivLU<Eigen::MatrixXd>(Phi).matrixLU().diagonal().cwiseAbs().array().log().sum();
  // Integral of tr A over [0, tau] from its harmonics.
  double trA = lin.A_hat(0).trace().real() * tau;
  for (int m = 1; m <= hp.M(); ++m) {
    const cplx w(0, m * hp.a_base());
    trA += 2 * (lin.A_hat(m).trace() * (std::exp(w * tau) - 1.0) / w).real();
  }
  const double expected = -lin.c() * (lin.L_eta().trace() * tau + trA);
  return std::abs(logdet - expected) / std::max(1.0, std::abs(expected));
}

}  // namespace ddc
