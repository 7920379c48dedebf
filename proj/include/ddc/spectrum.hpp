#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <limits>
#include <optional>
#include <vector>

#include "ddc/system.hpp"

namespace ddc {

struct EigenPair {
  cplx value;
  Eigen::VectorXcd vector;
};

/// Eigenpairs of -A, sorted by descending real part, ties by descending imaginary part.
inline std::vector<EigenPair> eig_all(const Eigen::MatrixXd& A) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(-A, true);
  if (es.info() != Eigen::Success) throw Error(ErrorCode::EigenFailure, "dense eigensolver did not converge");
  std::vector<EigenPair> out;
  for (int i = 0; i < A.rows(); ++i) out.push_back({es.eigenvalues()[i], es.eigenvectors().col(i)});
  std::stable_sort(out.begin(), out.end(), [](const EigenPair& x, const EigenPair& y) {
    if (x.value.real() != y.value.real()) return x.value.real() > y.value.real();
    return x.value.imag() > y.value.imag();
  });
  return out;
}

inline std::vector<EigenPair> eig_leading(const LinearOperator& op, int count) {
  if (count < 0 || count > op.dim())
    throw Error(ErrorCode::InvalidArgument, "eig_leading: count exceeds the dimension");
  auto all = eig_all(op.matrix);
  all.resize(count);
  return all;
}

inline Eigen::VectorXcd eigenvalues_of_negated(const Eigen::MatrixXd& A) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(-A, false);
  if (es.info() != Eigen::Success) throw Error(ErrorCode::EigenFailure, "block eigensolver did not converge");
  return es.eigenvalues();
}

/// Critical eigenpair and its adjoint, biorthonormalized in the eps-weighted pairing.
struct EigenData {
  cplx lambda_plus{};
  double a = 0;
  ComplexField u_plus;
  ComplexField u_plus_adj;
  double eps = 0;
  double R1_crit = 0;
  double transversality = 0;
  ModeIndex mode{};
  Eigen::VectorXcd up;   // system coordinates
  Eigen::VectorXcd upa;  // system coordinates
};

namespace detail {

/// -(block of the linear operator) at mode m for the flavour selected by p.eps.
inline Eigen::MatrixXd neg_block(const Params& p, ModeIndex m) {
  if (p.eps > 0) return mode_matrix_ac(p, m);
  if (m.j >= 1) return mode_matrix_incomp(p, m);
  const double q = q2(m, p.alpha);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2, 2);
  A(0, 0) = -q;
  A(1, 1) = -p.d * q;
  return A;
}

inline cplx leading(const Eigen::MatrixXd& negA) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(negA, false);
  if (es.info() != Eigen::Success) throw Error(ErrorCode::EigenFailure, "mode eigensolver did not converge");
  cplx best = es.eigenvalues()[0];
  for (int i = 1; i < negA.rows(); ++i) {
    cplx z = es.eigenvalues()[i];
    if (z.real() > best.real() || (z.real() == best.real() && z.imag() > best.imag())) best = z;
  }
  return best;
}

inline int block_index(const LinearOperator& op, ModeIndex m) {
  for (size_t b = 0; b < op.blocks.size(); ++b)
    if (op.blocks[b].mode == m) return static_cast<int>(b);
  return -1;
}

}  // namespace detail

/// First crossing of the leading real part on one mode.
struct ModeCrossing {
  ModeIndex mode;
  double R1 = 0;
  bool hopf = false;
  double a = 0;
};

/// Upper end of the R1 bracket: 4 x the smallest incompressible steady-onset value.
inline double steady_estimate(const Params& p) {
  double best = std::numeric_limits<double>::infinity();
  for (int j = 1; j <= std::min(p.J, 8); ++j)
    for (int k = 1; k <= std::min(p.K, 8); ++k) {
      const double q = q2({j, k}, p.alpha), s = p.alpha * p.alpha * j * j / q;
      best = std::min(best, std::sqrt(q * q / s + p.R2 * p.R2 / p.d));
    }
  return best;
}

/// Leading-eigenvalue crossing on a single mode: grid scan, bisection to 1e-10
/// relative, then regula falsi polish of the real part.
inline std::optional<ModeCrossing> mode_crossing(const Params& p, ModeIndex m, double Rmax, int nscan = 240) {
  auto f = [&](double r) { return detail::leading(detail::neg_block(p.with_R1(r), m)).real(); };
  double lo = 0, flo = f(0);
  if (flo >= 0) return std::nullopt;
  double hi = -1, fhi = 0;
  for (int i = 1; i <= nscan; ++i) {
    const double r = Rmax * i / nscan, fr = f(r);
    if (fr >= 0) {
      hi = r;
      fhi = fr;
      break;
    }
    lo = r;
    flo = fr;
  }
  if (hi < 0) return std::nullopt;
  while (hi - lo > 1e-10 * hi) {
    const double mid = 0.5 * (lo + hi), fm = f(mid);
    if (fm >= 0) {
      hi = mid;
      fhi = fm;
    } else {
      lo = mid;
      flo = fm;
    }
  }
  int side = 0;
  for (int it = 0; it < 60 && hi > lo; ++it) {
    const double r = (lo * fhi - hi * flo) / (fhi - flo), fr = f(r);
    if (fr == 0 || std::abs(fr) < 1e-15) {
      lo = hi = r;
      break;
    }
    if (fr > 0) {
      hi = r;
      fhi = fr;
      if (side == 1) flo *= 0.5;
      side = 1;
    } else {
      lo = r;
      flo = fr;
      if (side == -1) fhi *= 0.5;
      side = -1;
    }
  }
  const double r = std::abs(flo) < std::abs(fhi) ? lo : hi;
  const cplx z = detail::leading(detail::neg_block(p.with_R1(r), m));
  ModeCrossing c;
  c.mode = m;
  c.R1 = r;
  c.hopf = std::abs(z.imag()) > 1e-7 * (1 + std::abs(z));
  c.a = std::abs(z.imag());
  return c;
}

/// Crossings of every scanned mode (j,k <= min(J,K,8)), sorted by R1.
inline std::vector<ModeCrossing> mode_crossings(const Params& p) {
  p.validate();
  const double Rmax = 4 * steady_estimate(p);
  std::vector<ModeCrossing> out;
  const int jm = std::min({p.J, p.K, 8});
  for (int j = 0; j <= jm; ++j)
    for (int k = 1; k <= jm; ++k) {
      if (j == 0 && p.eps == 0) continue;
      if (auto c = mode_crossing(p, {j, k}, Rmax)) out.push_back(*c);
    }
  std::sort(out.begin(), out.end(), [](const ModeCrossing& a, const ModeCrossing& b) {
    if (a.R1 != b.R1) return a.R1 < b.R1;
    return a.mode < b.mode;
  });
  return out;
}

/// Velocity rows of the linear operator without the pressure term.
template <class T>
SpectralField<T> momentum_rows(const SpectralField<T>& u, bool adjoint) {
  const Params& p = u.params();
  SpectralField<T> out(p);
  MatT<T> lap(p.J + 1, p.K + 1);
  for (int j = 0; j <= p.J; ++j)
    for (int k = 0; k <= p.K; ++k) lap(j, k) = q2({j, k}, p.alpha);
  out.set_grid(Var::w1, p.Pr * lap.cwiseProduct(u.grid(Var::w1)));
  out.set_grid(Var::w2, p.Pr * lap.cwiseProduct(u.grid(Var::w2)) - p.Pr * p.R1 * u.grid(Var::theta) +
                            (adjoint ? -1.0 : 1.0) * p.Pr * p.R2 * u.grid(Var::psi));
  return out;
}

/// Pressure phi whose Pr*grad phi is the mode-wise least-squares fit of the velocity part of G.
template <class T>
MatT<T> pressure_from_gradient(const SpectralField<T>& G) {
  const Params& p = G.params();
  MatT<T> phi = MatT<T>::Zero(p.J + 1, p.K + 1);
  for (int j = 0; j <= p.J; ++j)
    for (int k = 0; k <= p.K; ++k) {
      if (j == 0 && k == 0) continue;
      phi(j, k) = -(p.alpha * j * G(Var::w1, j, k) + kPi * k * G(Var::w2, j, k)) / (p.Pr * q2({j, k}, p.alpha));
    }
  return phi;
}

namespace detail {

inline EigenData build_eigen_data(const GalerkinSystem& sys, ModeIndex m) {
  const Params& p = sys.params();
  const int b = block_index(sys.L(), m);
  if (b < 0) throw Error(ErrorCode::EigenTracking, "critical mode outside the truncation");
  const DenseBlock& blk = sys.L().blocks[b];
  const DenseBlock& blks = sys.Lstar().blocks[b];
  Eigen::EigenSolver<Eigen::MatrixXd> es(-blk.A, true), ea(-blks.A, true);
  if (es.info() != Eigen::Success || ea.info() != Eigen::Success)
    throw Error(ErrorCode::EigenFailure, "critical block eigensolver failed");
  int ip = -1;
  for (int i = 0; i < blk.A.rows(); ++i) {
    const cplx z = es.eigenvalues()[i];
    if (z.imag() <= 0) continue;
    if (ip < 0 || z.real() > es.eigenvalues()[ip].real()) ip = i;
  }
  if (ip < 0) throw Error(ErrorCode::EigenTracking, "no eigenvalue with positive imaginary part at the critical mode");
  const cplx lam = es.eigenvalues()[ip];
  int ia = 0;
  for (int i = 1; i < blks.A.rows(); ++i)
    if (std::abs(ea.eigenvalues()[i] - std::conj(lam)) < std::abs(ea.eigenvalues()[ia] - std::conj(lam))) ia = i;
  if (std::abs(ea.eigenvalues()[ia] - std::conj(lam)) > 1e-8 * (1 + std::abs(lam)))
    throw Error(ErrorCode::EigenTracking, "adjoint spectrum does not contain conj(lambda_plus)");

  EigenData ed;
  ed.lambda_plus = lam;
  ed.a = lam.imag();
  ed.eps = p.eps;
  ed.R1_crit = p.R1;
  ed.mode = m;
  ed.up = Eigen::VectorXcd::Zero(sys.dim());
  ed.upa = Eigen::VectorXcd::Zero(sys.dim());
  for (size_t r = 0; r < blk.idx.size(); ++r) {
    ed.up[blk.idx[r]] = es.eigenvectors()(r, ip);
    ed.upa[blk.idx[r]] = ea.eigenvectors()(r, ia);
  }
  // |(w,theta,psi) part| = 1 and theta at the critical mode real positive.
  ComplexField f = sys.field(ed.up);
  const double nrm = norms(f, 0.0).l2_eps;
  const cplx th = f(Var::theta, m.j, m.k);
  if (std::abs(th) == 0) throw Error(ErrorCode::EigenTracking, "critical eigenvector has no theta component");
  ed.up *= std::conj(th) / std::abs(th) / nrm;
  const cplx pair = sys.inner(ed.up, ed.upa);
  ed.upa /= std::conj(pair);

  ed.u_plus = sys.field(ed.up);
  ed.u_plus_adj = sys.field(ed.upa);
  if (sys.incompressible()) {
    // Associated pressures from the gradient part of the momentum rows.
    ComplexField g = ed.u_plus;
    g *= -lam;
    g -= momentum_rows(ed.u_plus, false);
    ed.u_plus.set_grid(Var::phi, pressure_from_gradient(g));
    ComplexField ga = momentum_rows(ed.u_plus_adj, true);
    ComplexField wa = ed.u_plus_adj;
    wa *= std::conj(lam);
    ga += wa;
    ed.u_plus_adj.set_grid(Var::phi, pressure_from_gradient(ga));
  }
  ed.transversality = -sys.inner(Eigen::VectorXcd(sys.K().cast<cplx>() * ed.up), ed.upa).real();
  return ed;
}

}  // namespace detail

/// Smallest R1 at which a complex pair crosses; normalized eigen data there.
inline EigenData critical_R1(const Params& p) {
  auto cs = mode_crossings(p);
  if (cs.empty()) throw Error(ErrorCode::NoCrossing, "no crossing below R1 = " + std::to_string(4 * steady_estimate(p)));
  const ModeCrossing& c = cs.front();
  if (!c.hopf)
    throw Error(ErrorCode::SteadyOnsetFirst,
                "real eigenvalue crosses first at R1 = " + std::to_string(c.R1) + " on mode (" +
                    std::to_string(c.mode.j) + "," + std::to_string(c.mode.k) + ")");
  return detail::build_eigen_data(GalerkinSystem(p.with_R1(c.R1)), c.mode);
}

/// Eigen data of the critical mode at an arbitrary R1 (used off criticality).
inline EigenData eigen_data_at(const Params& p, ModeIndex m) {
  return detail::build_eigen_data(GalerkinSystem(p), m);
}

struct TransversalityCheck {
  double fd_value = 0;
  double formula_value = 0;
};

/// Centered difference of Re(lambda_plus) in R1 (step 1e-5 R1c) against -Re(K u+, u+*).
inline TransversalityCheck transversality_check(const EigenData& ed, const Params& p) {
  const double h = 1e-5 * ed.R1_crit;
  auto track = [&](double r) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(detail::neg_block(p.with_eps(ed.eps).with_R1(r), ed.mode), false);
    if (es.info() != Eigen::Success) throw Error(ErrorCode::EigenFailure, "block eigensolver did not converge");
    const Eigen::VectorXcd ev = es.eigenvalues();
    std::vector<double> dist(ev.size());
    for (int i = 0; i < ev.size(); ++i) dist[i] = std::abs(ev[i] - ed.lambda_plus);
    std::vector<int> ord(ev.size());
    for (int i = 0; i < ev.size(); ++i) ord[i] = i;
    std::sort(ord.begin(), ord.end(), [&](int x, int y) { return dist[x] < dist[y]; });
    if (ev.size() > 1 && dist[ord[1]] < 10 * dist[ord[0]] + 1e-12)
      throw Error(ErrorCode::EigenTracking, "ambiguous eigenvalue tracking at R1 = " + std::to_string(r));
    return ev[ord[0]].real();
  };
  TransversalityCheck t;
  t.fd_value = (track(ed.R1_crit + h) - track(ed.R1_crit - h)) / (2 * h);
  t.formula_value = ed.transversality;
  return t;
}

struct Projection {
  cplx coefficient;
  ComplexField image;
};

/// P u = (u, u+*)_eps u+.
inline Projection project_P_eps(const ComplexField& u, const EigenData& ed) {
  Projection pr;
  pr.coefficient = inner_eps(u, ed.u_plus_adj, ed.eps);
  pr.image = ed.u_plus;
  pr.image *= pr.coefficient;
  return pr;
}

/// -max Re over the spectrum minus the critical pair, restricted to |Im| <= 2a.
inline double spectral_gap(const GalerkinSystem& sys, const EigenData& ed) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& b : sys.L().blocks) {
    Eigen::VectorXcd ev = eigenvalues_of_negated(b.A);
    for (int i = 0; i < ev.size(); ++i) {
      const cplx z = ev[i];
      if (b.mode == ed.mode &&
          (std::abs(z - ed.lambda_plus) < 1e-6 * (1 + ed.a) || std::abs(z - std::conj(ed.lambda_plus)) < 1e-6 * (1 + ed.a)))
        continue;
      if (std::abs(z.imag()) <= 2 * ed.a) worst = std::max(worst, z.real());
    }
  }
  return -worst;
}

struct NeutralPoint {
  double alpha = 0;
  double R1 = 0;
  double a = 0;
  bool hopf = false;
  ModeIndex mode{};
};

/// First crossing over the scanned modes as a function of alpha.
inline std::vector<NeutralPoint> neutral_curve(const Params& p, const std::vector<double>& alphas) {
  std::vector<NeutralPoint> out;
  for (double al : alphas) {
    Params q = p;
    q.alpha = al;
    auto cs = mode_crossings(q);
    if (cs.empty()) continue;
    out.push_back({al, cs.front().R1, cs.front().a, cs.front().hopf, cs.front().mode});
  }
  return out;
}

struct R2ScanPoint {
  double R2 = 0;
  double R1_first = 0;
  bool hopf_first = false;
  double a = 0;
  ModeIndex mode{};
};

inline std::vector<R2ScanPoint> scan_R2(const Params& p, const std::vector<double>& R2s) {
  std::vector<R2ScanPoint> out;
  for (double r2 : R2s) {
    Params q = p;
    q.R2 = r2;
    auto cs = mode_crossings(q);
    if (cs.empty()) continue;
    out.push_back({r2, cs.front().R1, cs.front().hopf, cs.front().a, cs.front().mode});
  }
  return out;
}

}  // namespace ddc
