#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ddc/fit.hpp"
#include "ddc/spectrum.hpp"

namespace ddc {

/// Truncated Fourier-in-time stack: harmonics[m + M] is the coefficient of e^{imat}.
struct TimePeriodicField {
  Params params;
  int M = 8;
  double a_base = 1;
  std::vector<ComplexField> harmonics;

  static TimePeriodicField zeros(const Params& p, int M, double a) {
    TimePeriodicField f;
    f.params = p;
    f.M = M;
    f.a_base = a;
    f.harmonics.assign(2 * M + 1, ComplexField(p));
    return f;
  }
  ComplexField& operator[](int m) { return harmonics.at(m + M); }
  const ComplexField& operator[](int m) const { return harmonics.at(m + M); }

  /// max_m |u_{-m} - conj(u_m)|.
  double reality_defect() const {
    double d = 0;
    for (int m = 0; m <= M; ++m)
      d = std::max(d, ((*this)[-m].coeffs() - (*this)[m].coeffs().conjugate()).cwiseAbs().maxCoeff());
    return d;
  }
  /// Real-space snapshot at phase a_base * t.
  RealField at_time(double t) const {
    Eigen::VectorXcd s = Eigen::VectorXcd::Zero(harmonics.front().size());
    for (int m = -M; m <= M; ++m) s += std::exp(cplx(0, m * a_base * t)) * (*this)[m].coeffs();
    return RealField(params, s.real());
  }
};

inline void require_match(const TimePeriodicField& u, const TimePeriodicField& v) {
  if (u.M != v.M || u.a_base != v.a_base || !u.params.same_space(v.params))
    throw Error(ErrorCode::Mismatch, "time-periodic fields differ in M, a or truncation");
}

/// <u,v>_eps = sum_m (u_m, v_m)_eps.
inline cplx tp_inner_eps(const TimePeriodicField& u, const TimePeriodicField& v, double eps) {
  require_match(u, v);
  cplx s = 0;
  for (int m = -u.M; m <= u.M; ++m) s += inner_eps(u[m], v[m], eps);
  return s;
}

/// [u]_{+,eps} = (u_1, u+*)_eps.
inline cplx bracket_plus(const TimePeriodicField& u, const EigenData& ed) {
  return inner_eps(u[1], ed.u_plus_adj, ed.eps);
}

/// Discrete analogue of the eps-weighted Y_a norm: sup over Nt phases of the X^1 norm plus
/// harmonic sums (Parseval, period 2 pi / a) for the integrated terms.
inline double tp_norm_Y_eps(const TimePeriodicField& u, double eps, int Nt = 64) {
  double sup = 0;
  for (int s = 0; s < Nt; ++s) {
    const double t = 2 * kPi / u.a_base * s / Nt;
    sup = std::max(sup, std::pow(norms(u.at_time(t), eps).x1_eps, 2));
  }
  const Params& p = u.params;
  const auto& tab = *shared_table(p.J, p.K);
  double integ = 0;
  for (int m = -u.M; m <= u.M; ++m) {
    const double om2 = std::pow(m * u.a_base, 2);
    const auto& c = u[m].coeffs();
    for (int i = 0; i < c.size(); ++i) {
      const double mu = measure(tab[i].mode, p.alpha), q = q2(tab[i].mode, p.alpha);
      const double w = var_weight(tab[i].var, p.Pr, eps), a2 = std::norm(c[i]);
      integ += mu * w * q * a2 + eps * eps * om2 * mu * w * a2;
      if (tab[i].var == Var::phi) integ += std::pow(eps, 6) * om2 * mu * q * a2;
      else integ += eps * eps * mu * var_weight(tab[i].var, p.Pr, 0) * q * q * a2;
    }
  }
  return std::sqrt(sup + 2 * kPi / u.a_base * integ);
}

using Stack = Eigen::MatrixXcd;  // system coordinates x (2M+1), column m+M

struct HopfCoefficients {
  double eta0 = 0;
  double omega0 = 0;
  TimePeriodicField U0;
  double eps = 0;
  Stack U0s;
  cplx Kz0_plus{};
  cplx MU0_plus{};
};

struct BranchOptions {
  double tol = 1e-12;
  int max_iter = 400;
  bool newton = false;
  double max_last_share = 1e-8;  // accept only if the top harmonic carries less energy than this
};

struct HopfBranchPoint {
  double delta = 0;
  double eta = 0;
  double omega = 0;
  double eta_tilde = 0;
  double omega_tilde = 0;
  TimePeriodicField orbit_U;
  Stack U;
  double residual = 0;
  int iterations = 0;
  double contraction = 0;
  double bracket_U = 0;
  std::vector<double> harmonic_energies;
  double last_harmonic_share = 0;
  bool newton = false;
};

/// Harmonic-balance realization of B^eps(omega), the splitting P/Q and the bifurcation
/// equations at R1 = R1c (eps = 0 runs the same algebra in solenoidal coordinates).
class HopfProblem {
 public:
  HopfProblem(const Params& p, const EigenData& ed, int M, double a_base = 0)
      : sys_(p.with_eps(ed.eps).with_R1(ed.R1_crit)), ed_(ed), M_(M), Nt_(3 * M + 1) {
    if (M < 2) throw Error(ErrorCode::InvalidArgument, "temporal truncation needs M >= 2");
    a_ = a_base > 0 ? a_base : ed.a;
    Kc_ = sys_.K().cast<cplx>();
    Ld_ = sys_.L().matrix.cast<cplx>();
    crit_block_ = detail::block_index(sys_.L(), ed.mode);
    E_.resize(2 * M + 1, Nt_);
    for (int m = -M; m <= M; ++m)
      for (int s = 0; s < Nt_; ++s) E_(m + M, s) = std::exp(cplx(0, 2 * kPi * m * s / Nt_));
    Kz_ = bracket_plus(apply_K(z0()));
    if (std::abs(Kz_.real()) < 1e-12)
      throw Error(ErrorCode::DegenerateTransversality, "Re[K z0]_+ vanishes");
  }

  const GalerkinSystem& system() const { return sys_; }
  const EigenData& eigen() const { return ed_; }
  int M() const { return M_; }
  int n() const { return sys_.dim(); }
  double a_eps() const { return ed_.a; }
  double a_base() const { return a_; }
  cplx Kz0_plus() const { return Kz_; }

  Stack zeros() const { return Stack::Zero(n(), 2 * M_ + 1); }
  Stack z_plus() const {
    Stack z = zeros();
    z.col(M_ + 1) = ed_.up;
    return z;
  }
  Stack z0() const {
    Stack z = zeros();
    z.col(M_ + 1) = ed_.up;
    z.col(M_ - 1) = ed_.up.conjugate();
    return z;
  }

  cplx bracket_plus(const Stack& H) const { return sys_.inner(Eigen::VectorXcd(H.col(M_ + 1)), ed_.upa); }
  cplx bracket_minus(const Stack& H) const {
    return sys_.inner(Eigen::VectorXcd(H.col(M_ - 1)), Eigen::VectorXcd(ed_.upa.conjugate()));
  }
  Stack P(const Stack& H) const {
    Stack out = zeros();
    out.col(M_ + 1) = bracket_plus(H) * ed_.up;
    out.col(M_ - 1) = bracket_minus(H) * ed_.up.conjugate();
    return out;
  }
  Stack Q(const Stack& H) const { return H - P(H); }
  Stack apply_K(const Stack& H) const { return Kc_ * H; }
  /// Time derivative in the rescaled time (period 2 pi / a).
  Stack dt(const Stack& H) const {
    Stack out = H;
    for (int m = -M_; m <= M_; ++m) out.col(m + M_) *= cplx(0, m * a_);
    return out;
  }

  /// Real samples at the Nt = 3M+1 phases 2 pi s / Nt.
  Eigen::MatrixXd samples(const Stack& H) const { return (H * E_).real(); }
  Stack from_samples(const Eigen::MatrixXd& S) const {
    return (S.cast<cplx>() * E_.adjoint()) / static_cast<double>(Nt_);
  }

  /// Harmonic-truncated product N(A, B); exact for |m| <= M since Nt > 3M.
  Stack N(const Stack& A, const Stack& B) const {
    const Eigen::MatrixXd SA = samples(A), SB = samples(B);
    Eigen::MatrixXd SC(n(), Nt_);
    for (int s = 0; s < Nt_; ++s) SC.col(s) = sys_.N(SA.col(s), SB.col(s));
    return from_samples(SC);
  }
  Stack Mb(const Stack& A, const Stack& B) const { return N(A, B) + N(B, A); }

  /// B(omega) U = (a^eps/a)(1+omega) dU/dt + L U, dense path.
  Stack apply_B(const Stack& U, double omega) const {
    Stack out = Ld_ * U;
    for (int m = -M_; m <= M_; ++m) out.col(m + M_) += cplx(0, m * ed_.a * (1 + omega)) * U.col(m + M_);
    return out;
  }

  /// Unique U in the Q-range with B(omega) U = Q F; bordered solve on the resonant harmonics.
  Stack solve_B(const Stack& F, double omega) const {
    const Stack G = Q(F);
    Stack U = zeros();
    for (int m = -M_; m <= M_; ++m) {
      const cplx shift(0, m * ed_.a * (1 + omega));
      for (size_t b = 0; b < sys_.L().blocks.size(); ++b) {
        const DenseBlock& blk = sys_.L().blocks[b];
        const int nb = static_cast<int>(blk.idx.size());
        Eigen::MatrixXcd A = blk.A.cast<cplx>();
        A.diagonal().array() += shift;
        Eigen::VectorXcd rhs(nb);
        for (int r = 0; r < nb; ++r) rhs[r] = G(blk.idx[r], m + M_);
        Eigen::VectorXcd x;
        if (static_cast<int>(b) == crit_block_ && std::abs(m) == 1) {
          Eigen::MatrixXcd Bd = Eigen::MatrixXcd::Zero(nb + 1, nb + 1);
          Bd.topLeftCorner(nb, nb) = A;
          for (int r = 0; r < nb; ++r) {
            const int i = blk.idx[r];
            const cplx u = m == 1 ? ed_.up[i] : std::conj(ed_.up[i]);
            const cplx us = m == 1 ? ed_.upa[i] : std::conj(ed_.upa[i]);
            Bd(r, nb) = u;
            Bd(nb, r) = sys_.weights()[i] * std::conj(us);
          }
          Eigen::VectorXcd rb = Eigen::VectorXcd::Zero(nb + 1);
          rb.head(nb) = rhs;
          Eigen::PartialPivLU<Eigen::MatrixXcd> lu(Bd);
          if (lu.rcond() < 1e-14) throw singular(m, blk.mode, lu.rcond());
          x = lu.solve(rb).head(nb);
        } else {
          Eigen::PartialPivLU<Eigen::MatrixXcd> lu(A);
          if (lu.rcond() < 1e-14) throw singular(m, blk.mode, lu.rcond());
          x = lu.solve(rhs);
        }
        for (int r = 0; r < nb; ++r) U(blk.idx[r], m + M_) = x[r];
      }
    }
    return U;
  }

  HopfCoefficients first_order() const {
    HopfCoefficients c;
    c.eps = ed_.eps;
    const Stack z = z0();
    c.U0s = -solve_B(N(z, z), 0.0);
    c.Kz0_plus = Kz_;
    c.MU0_plus = bracket_plus(Mb(z, c.U0s));
    c.eta0 = -c.MU0_plus.real() / Kz_.real();
    c.omega0 = -(Kz_.imag() * c.eta0 + c.MU0_plus.imag()) / ed_.a;
    c.U0 = to_field(c.U0s);
    return c;
  }

  /// One application of the fixed-point map (eta~, omega~, U) -> next iterate.
  void picard_map(double delta, double& eta, double& om, Stack& U) const {
    const Stack z = z0();
    const Stack uh = z + delta * U;
    Stack F = N(uh, uh);
    if (delta != 0) F += delta * eta * apply_K(uh);
    const Stack Un = -solve_B(F, delta * delta * om);
    cplx r = 0;
    if (delta != 0) r = delta * eta * bracket_plus(apply_K(U)) + delta * bracket_plus(N(U, U));
    const cplx mzu = bracket_plus(Mb(z, Un));
    const double etan = -(r.real() + mzu.real()) / Kz_.real();
    const double omn = -(r.imag() + Kz_.imag() * etan + mzu.imag()) / ed_.a;
    eta = etan;
    om = omn;
    U = Un;
  }

  HopfBranchPoint picard(double delta, const BranchOptions& o = {}) const {
    if (o.newton) return newton(delta, o);
    const HopfCoefficients c = first_order();
    double eta = c.eta0, om = c.omega0;
    Stack U = c.U0s;
    double prev = std::numeric_limits<double>::infinity();
    int bad = 0, it = 0;
    std::vector<double> ratios;
    for (it = 1; it <= o.max_iter; ++it) {
      const double e0 = eta, o0 = om;
      const Stack U0 = U;
      picard_map(delta, eta, om, U);
      const double diff = std::abs(eta - e0) + std::abs(om - o0) + stack_norm(U - U0);
      if (std::isfinite(prev) && prev > 0) {
        const double ratio = diff / prev;
        if (diff > 1e3 * o.tol) ratios.push_back(ratio);
        bad = ratio > 0.9 ? bad + 1 : 0;
        if (bad >= 3)
          throw Error(ErrorCode::NoContraction, "difference ratio above 0.9 for 3 iterations at delta = " +
                                                    std::to_string(delta));
      }
      if (!std::isfinite(diff)) throw Error(ErrorCode::NoContraction, "iteration diverged");
      prev = diff;
      if (diff <= o.tol) break;
    }
    if (it > o.max_iter) throw Error(ErrorCode::MaxIter, "Picard did not reach tol at delta = " + std::to_string(delta));
    HopfBranchPoint bp = finish(delta, eta, om, U, std::min(it, o.max_iter));
    check_truncation(bp, o);
    if (!ratios.empty()) {
      std::sort(ratios.begin(), ratios.end());
      bp.contraction = ratios[ratios.size() / 2];
    }
    return bp;
  }

  /// Newton-GMRES on x - Phi(x) = 0 with Phi the Picard map (off the default path).
  HopfBranchPoint newton(double delta, const BranchOptions& o) const {
    const HopfCoefficients c = first_order();
    Eigen::VectorXd x = pack(c.eta0, c.omega0, c.U0s);
    auto Fx = [&](const Eigen::VectorXd& y) {
      double e, w;
      Stack U;
      unpack(y, e, w, U);
      picard_map(delta, e, w, U);
      return Eigen::VectorXd(y - pack(e, w, U));
    };
    int it = 0;
    for (it = 1; it <= std::min(o.max_iter, 50); ++it) {
      const Eigen::VectorXd f = Fx(x);
      if (f.norm() <= o.tol) break;
      const double h = 1e-7 * std::max(1.0, x.norm());
      auto Jv = [&](const Eigen::VectorXd& v) { return Eigen::VectorXd((Fx(x + h * v) - f) / h); };
      x -= gmres(Jv, f, 1e-3 * o.tol / std::max(f.norm(), 1e-300) + 1e-10, 60);
    }
    if (it > std::min(o.max_iter, 50)) throw Error(ErrorCode::MaxIter, "Newton did not converge");
    double e, w;
    Stack U;
    unpack(x, e, w, U);
    HopfBranchPoint bp = finish(delta, e, w, U, it);
    bp.newton = true;
    check_truncation(bp, o);
    return bp;
  }

  /// Residual of (a^eps/a)(1+omega) du/dt + L u + eta K u + N(u) for u = delta(z0 + delta U),
  /// evaluated by direct time synthesis with the dense operator.
  double residual(double delta, double eta, double omega, const Stack& U) const {
    const Stack uh = delta * (z0() + delta * U);
    const int Nt = 3 * M_ + 2;
    const Eigen::MatrixXd Ld = sys_.L().matrix + eta * sys_.K();
    std::vector<Eigen::VectorXcd> R(2 * M_ + 1, Eigen::VectorXcd::Zero(n()));
    for (int s = 0; s < Nt; ++s) {
      const double th = 2 * kPi * s / Nt;
      Eigen::VectorXd u = uh.col(M_).real(), du = Eigen::VectorXd::Zero(n());
      for (int m = 1; m <= M_; ++m) {
        const cplx e(std::cos(m * th), std::sin(m * th));
        u += 2 * (uh.col(m + M_) * e).real();
        du += 2 * (uh.col(m + M_) * (e * cplx(0, m * ed_.a * (1 + omega)))).real();
      }
      const Eigen::VectorXd r = du + Ld * u + sys_.N(u, u);
      for (int m = -M_; m <= M_; ++m) R[m + M_] += r.cast<cplx>() * std::exp(cplx(0, -m * th)) / double(Nt);
    }
    double s2 = 0;
    for (const auto& r : R) s2 += sys_.weights().dot(r.cwiseAbs2());
    return std::sqrt(s2);
  }

  double stack_norm(const Stack& H) const {
    double s = 0;
    for (int c = 0; c < H.cols(); ++c) s += sys_.weights().dot(H.col(c).cwiseAbs2());
    return std::sqrt(s);
  }

  TimePeriodicField to_field(const Stack& H) const {
    TimePeriodicField f = TimePeriodicField::zeros(sys_.params(), M_, a_);
    for (int m = -M_; m <= M_; ++m) f[m] = sys_.field(Eigen::VectorXcd(H.col(m + M_)));
    return f;
  }

 private:
  void check_truncation(const HopfBranchPoint& bp, const BranchOptions& o) const {
    if (bp.last_harmonic_share >= o.max_last_share)
      throw Error(ErrorCode::NotConverged, "harmonic " + std::to_string(M_) + " holds energy share " +
                                               std::to_string(bp.last_harmonic_share) + "; raise M");
  }

  Error singular(int m, ModeIndex md, double rc) const {
    return Error(ErrorCode::SingularBlock, "harmonic " + std::to_string(m) + " block (" + std::to_string(md.j) +
                                               "," + std::to_string(md.k) + ") rcond " + std::to_string(rc));
  }

  HopfBranchPoint finish(double delta, double eta, double om, const Stack& U, int iters) const {
    HopfBranchPoint bp;
    bp.delta = delta;
    bp.eta_tilde = eta;
    bp.omega_tilde = om;
    bp.eta = delta * delta * eta;
    bp.omega = delta * delta * om;
    bp.U = U;
    bp.orbit_U = to_field(U);
    bp.iterations = iters;
    bp.bracket_U = std::abs(bracket_plus(U));
    bp.residual = residual(delta, bp.eta, bp.omega, U);
    const Stack u = delta == 0 ? z0() : Stack(delta * (z0() + delta * U));
    double tot = 0;
    for (int m = 0; m <= M_; ++m) {
      const double e = sys_.weights().dot(u.col(m + M_).cwiseAbs2());
      bp.harmonic_energies.push_back(e);
      tot += (m == 0 ? 1 : 2) * e;
    }
    bp.last_harmonic_share = tot > 0 ? 2 * bp.harmonic_energies.back() / tot : 0;
    return bp;
  }

  Eigen::VectorXd pack(double e, double w, const Stack& U) const {
    Eigen::VectorXd x(2 + 2 * n() * (M_ + 1));
    x[0] = e;
    x[1] = w;
    for (int m = 0; m <= M_; ++m) {
      x.segment(2 + 2 * m * n(), n()) = U.col(m + M_).real();
      x.segment(2 + (2 * m + 1) * n(), n()) = U.col(m + M_).imag();
    }
    return x;
  }
  void unpack(const Eigen::VectorXd& x, double& e, double& w, Stack& U) const {
    e = x[0];
    w = x[1];
    U = zeros();
    for (int m = 0; m <= M_; ++m) {
      Eigen::VectorXcd c(n());
      c.real() = x.segment(2 + 2 * m * n(), n());
      c.imag() = x.segment(2 + (2 * m + 1) * n(), n());
      U.col(m + M_) = c;
      if (m > 0) U.col(M_ - m) = c.conjugate();
    }
  }

  static Eigen::VectorXd gmres(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& A,
                               const Eigen::VectorXd& b, double rtol, int kmax) {
    const double beta = b.norm();
    if (beta == 0) return Eigen::VectorXd::Zero(b.size());
    std::vector<Eigen::VectorXd> V{b / beta};
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(kmax + 1, kmax);
    Eigen::VectorXd y;
    int k = 0;
    for (k = 0; k < kmax; ++k) {
      Eigen::VectorXd w = A(V[k]);
      for (int i = 0; i <= k; ++i) {
        H(i, k) = w.dot(V[i]);
        w -= H(i, k) * V[i];
      }
      H(k + 1, k) = w.norm();
      Eigen::VectorXd g = Eigen::VectorXd::Zero(k + 2);
      g[0] = beta;
      y = H.topLeftCorner(k + 2, k + 1).colPivHouseholderQr().solve(g);
      const double res = (g - H.topLeftCorner(k + 2, k + 1) * y).norm();
      if (res <= rtol * beta || H(k + 1, k) < 1e-14) {
        ++k;
        break;
      }
      V.push_back(w / H(k + 1, k));
    }
    Eigen::VectorXd x = Eigen::VectorXd::Zero(b.size());
    for (int i = 0; i < y.size(); ++i) x += y[i] * V[i];
    return x;
  }

  GalerkinSystem sys_;
  EigenData ed_;
  int M_;
  int Nt_;
  double a_ = 1;
  Eigen::MatrixXcd Kc_, Ld_, E_;
  int crit_block_ = -1;
  cplx Kz_{};
};

struct DeltaMax {
  double delta_max = 0;   // largest delta at which the iteration converged
  double failed_at = 0;   // smallest delta seen to fail
  double ratio_half = 0;  // contraction ratio at delta_max / 2
  int probes = 0;
};

/// Doubling from `start` until the iteration fails, then bisection of the bracket.
inline DeltaMax estimate_delta_max(const HopfProblem& hp, double start = 0.32, int bisections = 6,
                                   const BranchOptions& o = {}, double cap = 16) {
  DeltaMax r;
  auto ok = [&](double d) {
    ++r.probes;
    try {
      hp.picard(d, o);
      return true;
    } catch (const Error&) {
      return false;
    }
  };
  double lo = 0, hi = start;
  while (hi <= cap && ok(hi)) {
    lo = hi;
    hi *= 2;
  }
  if (hi > cap) throw Error(ErrorCode::InvalidArgument, "iteration converges up to delta = " + std::to_string(lo));
  for (int i = 0; i < bisections; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (ok(mid)) lo = mid;
    else hi = mid;
  }
  if (lo == 0) throw Error(ErrorCode::NoContraction, "no converging delta below " + std::to_string(hi));
  r.delta_max = lo;
  r.failed_at = hi;
  r.ratio_half = hp.picard(0.5 * lo, o).contraction;
  return r;
}

/// Pressure of an incompressible orbit u (table layout, solenoidal velocity) from the gradient
/// part of the momentum residual: Pr grad phi = -(dw/dt + momentum rows + eta K_w u + N_w(u,u)).
inline TimePeriodicField recover_pressure(const TimePeriodicField& orbit, double R1, double eta, double omega,
                                          double a) {
  const Params p = orbit.params.with_R1(R1).with_eps(0);
  const int M = orbit.M, Nt = 3 * M + 1, nf = orbit[0].size();
  Eigen::MatrixXcd E(2 * M + 1, Nt);
  for (int m = -M; m <= M; ++m)
    for (int s = 0; s < Nt; ++s) E(m + M, s) = std::exp(cplx(0, 2 * kPi * m * s / Nt));
  Eigen::MatrixXcd H(nf, 2 * M + 1);
  for (int m = -M; m <= M; ++m) H.col(m + M) = orbit[m].coeffs();
  const Eigen::MatrixXd S = (H * E).real();
  Eigen::MatrixXd NS(nf, Nt);
  for (int s = 0; s < Nt; ++s) {
    RealField u(p, S.col(s));
    NS.col(s) = nonlinear_N(u, u).coeffs();
  }
  const Eigen::MatrixXcd Nh = (NS.cast<cplx>() * E.adjoint()) / double(Nt);
  TimePeriodicField out = orbit;
  for (int m = -M; m <= M; ++m) {
    ComplexField u(p, orbit[m].coeffs());
    u.set_grid(Var::phi, MatT<cplx>::Zero(p.J + 1, p.K + 1));
    ComplexField g = momentum_rows(u, false);
    g += ComplexField(p, Nh.col(m + M));
    ComplexField ku = apply_K(u);
    ku *= eta;
    g += ku;
    ComplexField dw = u;
    dw *= cplx(0, m * a * (1 + omega));
    g += dw;
    g *= -1.0;
    out[m].set_grid(Var::phi, pressure_from_gradient(g));
  }
  return out;
}

struct EpsGapRow {
  double eps = 0;
  double R1_crit = 0;
  double a = 0;
  double eta0 = 0;
  double omega0 = 0;
  double eta = 0;
  double omega = 0;
  double eta0_gap = 0;
  double eta_gap = 0;
  double omega_gap = 0;
  double velocity_gap = 0;  // (w, theta, psi) part, time-averaged L^2
  double orbit_gap = 0;     // (w, theta, psi) part, Y-type norm
  double y_eps_gap = 0;     // full difference, eps-weighted Y norm
  double pressure_gap = 0;  // L^2-in-time H^1 norm of the pressure difference
  int iterations = 0;
  std::string error;  // non-empty when the row failed
};

struct EpsStudy {
  double delta = 0;
  double eta0_incomp = 0;
  double eta_incomp = 0;
  double omega_incomp = 0;
  std::vector<EpsGapRow> rows;
  FitResult eta0_fit, eta_fit, omega_fit, velocity_fit, orbit_fit;
};

/// Incompressible branch point shared by every row of an eps study.
struct EpsReference {
  Params base;
  double delta = 0;
  int M = 8;
  BranchOptions opts;
  EigenData e0;
  HopfBranchPoint b0;
  double eta0 = 0;
  TimePeriodicField orbit;  // with recovered pressure
};

inline EpsReference eps_reference(const Params& base, double delta, int M, const BranchOptions& o = {}) {
  EpsReference ref;
  ref.base = base;
  ref.delta = delta;
  ref.M = M;
  ref.opts = o;
  const Params p0 = base.with_eps(0);
  ref.e0 = critical_R1(p0);
  HopfProblem h0(p0, ref.e0, M);
  ref.b0 = h0.picard(delta, o);
  ref.eta0 = h0.first_order().eta0;
  const Stack u0s = delta * (h0.z0() + delta * ref.b0.U);
  ref.orbit = recover_pressure(h0.to_field(u0s), ref.e0.R1_crit, ref.b0.eta, ref.b0.omega, ref.e0.a);
  return ref;
}

/// Branch point at eps compared with the reference on the common period 2 pi / a.
inline EpsGapRow eps_gap_row(const EpsReference& ref, double eps) {
  const Params& base = ref.base;
  const int M = ref.M;
  const double delta = ref.delta;
  EpsGapRow r;
  r.eps = eps;
  std::optional<HopfProblem> hopt;
  HopfBranchPoint be;
  try {
    if (!(eps > 0)) throw Error(ErrorCode::InvalidArgument, "eps must be positive in a convergence row");
    const Params pe = base.with_eps(eps);
    hopt.emplace(pe, critical_R1(pe), M, ref.e0.a);
    be = hopt->picard(delta, ref.opts);
  } catch (const Error& e) {
    r.error = e.what();
    return r;
  }
  const HopfProblem& he = *hopt;
  const EigenData& ee = he.eigen();
  r.R1_crit = ee.R1_crit;
  r.a = ee.a;
  const HopfCoefficients c = he.first_order();
  r.eta0 = c.eta0;
  r.omega0 = c.omega0;
  r.eta = be.eta;
  r.omega = be.omega;
  r.eta0_gap = std::abs(c.eta0 - ref.eta0);
  r.eta_gap = std::abs(be.eta - ref.b0.eta);
  r.omega_gap = std::abs(be.omega - ref.b0.omega);
  r.iterations = be.iterations;
  TimePeriodicField diff = he.to_field(Stack(delta * (he.z0() + delta * be.U)));
  for (int m = -M; m <= M; ++m) diff[m] -= ref.orbit[m];
  r.orbit_gap = tp_norm_Y_eps(diff, 0.0);
  r.y_eps_gap = tp_norm_Y_eps(diff, eps);
  double vg = 0;
  for (int m = -M; m <= M; ++m) vg += std::norm(norms(diff[m], 0.0).l2_eps);
  r.velocity_gap = std::sqrt(vg);
  double pg = 0;
  const auto& tab = *shared_table(base.J, base.K);
  for (int m = -M; m <= M; ++m)
    for (int i = 0; i < diff[m].size(); ++i)
      if (tab[i].var == Var::phi)
        pg += measure(tab[i].mode, base.alpha) * (1 + q2(tab[i].mode, base.alpha)) * std::norm(diff[m].coeffs()[i]);
  r.pressure_gap = std::sqrt(2 * kPi / ref.e0.a * pg);
  return r;
}

/// Log-log fits of the gaps over the rows without errors (needs at least three).
inline void fit_eps_study(EpsStudy& st) {
  if (std::count_if(st.rows.begin(), st.rows.end(), [](const EpsGapRow& r) { return r.error.empty(); }) < 3) return;
  std::vector<double> x, g0, ge, go, gv, gu;
  for (const auto& r : st.rows) {
    if (!r.error.empty()) continue;
    x.push_back(r.eps);
    g0.push_back(r.eta0_gap);
    ge.push_back(r.eta_gap);
    go.push_back(r.omega_gap);
    gv.push_back(r.velocity_gap);
    gu.push_back(r.orbit_gap);
  }
  st.velocity_fit = loglog_fit(x, gv);
  st.eta0_fit = loglog_fit(x, g0);
  st.eta_fit = loglog_fit(x, ge);
  st.omega_fit = loglog_fit(x, go);
  st.orbit_fit = loglog_fit(x, gu);
}

inline EpsStudy eps_convergence_study(const Params& base, const std::vector<double>& eps_list, double delta, int M,
                                      const BranchOptions& o = {}) {
  const EpsReference ref = eps_reference(base, delta, M, o);
  EpsStudy st;
  st.delta = delta;
  st.eta0_incomp = ref.eta0;
  st.eta_incomp = ref.b0.eta;
  st.omega_incomp = ref.b0.omega;
  for (double eps : eps_list) st.rows.push_back(eps_gap_row(ref, eps));
  fit_eps_study(st);
  return st;
}

}  // namespace ddc
