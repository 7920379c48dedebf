#pragma once

#include <Eigen/Dense>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <string>
#include <vector>

#include "ddc/basis.hpp"
#include "ddc/transform.hpp"

namespace ddc {

enum class OperatorKind { L_eps, L_eps_adjoint, L_incompressible, L_incompressible_adjoint, K_coupling };

/// One diagonal block of a mode-decoupled operator, in the operator's own coordinates.
struct DenseBlock {
  ModeIndex mode;
  std::vector<int> idx;
  Eigen::MatrixXd A;
};

struct LinearOperator {
  Eigen::MatrixXd matrix;
  Params params;
  double eps = 0;
  OperatorKind kind = OperatorKind::L_eps;
  std::vector<DenseBlock> blocks;

  int dim() const { return static_cast<int>(matrix.rows()); }
};

inline void require_eps(const Params& p, const char* who) {
  p.validate();
  if (!(p.eps > 0)) throw Error(ErrorCode::InvalidArgument, std::string(who) + " needs eps > 0");
}

/// -(mode block of L^eps) over the variables present at this mode, ordered phi, w1, w2, theta, psi.
inline Eigen::MatrixXd mode_matrix_ac(const Params& p, ModeIndex m) {
  require_eps(p, "mode_matrix_ac");
  if (!admissible(Var::phi, m)) throw Error(ErrorCode::InvalidArgument, "mode (0,0) carries no unknowns");
  const double aj = p.alpha * m.j, kp = kPi * m.k, q = q2(m, p.alpha), e2 = p.eps * p.eps;
  std::vector<Var> vars;
  for (Var v : kAllVars)
    if (admissible(v, m)) vars.push_back(v);
  auto pos = [&](Var v) {
    for (size_t i = 0; i < vars.size(); ++i)
      if (vars[i] == v) return static_cast<int>(i);
    return -1;
  };
  const int n = static_cast<int>(vars.size());
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
  const int f = pos(Var::phi), a = pos(Var::w1), b = pos(Var::w2), t = pos(Var::theta), s = pos(Var::psi);
  if (a >= 0) {
    L(f, a) = aj / e2;
    L(a, f) = -p.Pr * aj;
    L(a, a) = p.Pr * q;
  }
  if (b >= 0) {
    L(f, b) = kp / e2;
    L(b, f) = -p.Pr * kp;
    L(b, b) = p.Pr * q;
    L(b, t) = -p.Pr * p.R1;
    L(b, s) = p.Pr * p.R2;
    L(t, b) = -p.R1;
    L(t, t) = q;
    L(s, b) = -p.R2;
    L(s, s) = p.d * q;
  }
  return -L;
}

/// -(mode block of the solenoidal operator) on (velocity amplitude, theta, psi); j,k >= 1.
inline Eigen::Matrix3d mode_matrix_incomp(const Params& p, ModeIndex m) {
  p.validate();
  if (m.j < 1 || m.k < 1)
    throw Error(ErrorCode::InvalidArgument, "mode_matrix_incomp needs j >= 1 and k >= 1");
  const double q = q2(m, p.alpha), s = p.alpha * p.alpha * m.j * m.j / q;
  Eigen::Matrix3d A;
  A << -p.Pr * q, p.Pr * p.R1 * s, -p.Pr * p.R2 * s,
       p.R1, -q, 0,
       p.R2, 0, -p.d * q;
  return A;
}

namespace detail {

inline void finish_blocks(LinearOperator& op, const std::vector<std::pair<ModeIndex, std::vector<int>>>& groups) {
  for (const auto& [mode, idx] : groups) {
    DenseBlock b;
    b.mode = mode;
    b.idx = idx;
    const int n = static_cast<int>(idx.size());
    b.A.resize(n, n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) b.A(r, c) = op.matrix(idx[r], idx[c]);
    op.blocks.push_back(std::move(b));
  }
}

inline std::vector<std::pair<ModeIndex, std::vector<int>>> table_groups(const ModeTable& t) {
  std::vector<std::pair<ModeIndex, std::vector<int>>> g;
  for (const auto& b : t.blocks()) g.emplace_back(b.mode, b.idx);
  return g;
}

inline LinearOperator assemble_full(const Params& p, bool adjoint) {
  require_eps(p, adjoint ? "assemble_L_adjoint" : "assemble_L");
  auto tp = shared_table(p.J, p.K);
  const ModeTable& t = *tp;
  LinearOperator op;
  op.params = p;
  op.eps = p.eps;
  op.kind = adjoint ? OperatorKind::L_eps_adjoint : OperatorKind::L_eps;
  op.matrix = Eigen::MatrixXd::Zero(t.size(), t.size());
  const double e2 = p.eps * p.eps, sg = adjoint ? -1.0 : 1.0;
  for (int r = 0; r < t.size(); ++r) {
    const auto [v, m] = t[r];
    const double aj = p.alpha * m.j, kp = kPi * m.k, q = q2(m, p.alpha);
    auto set = [&](Var c, double val) {
      const int i = t.index(c, m.j, m.k);
      if (i >= 0) op.matrix(r, i) = val;
    };
    switch (v) {
      case Var::phi:
        set(Var::w1, sg * aj / e2);
        set(Var::w2, sg * kp / e2);
        break;
      case Var::w1:
        set(Var::phi, -sg * p.Pr * aj);
        set(Var::w1, p.Pr * q);
        break;
      case Var::w2:
        set(Var::phi, -sg * p.Pr * kp);
        set(Var::w2, p.Pr * q);
        set(Var::theta, -p.Pr * p.R1);
        set(Var::psi, adjoint ? -p.Pr * p.R2 : p.Pr * p.R2);
        break;
      case Var::theta:
        set(Var::w2, -p.R1);
        set(Var::theta, q);
        break;
      case Var::psi:
        set(Var::w2, adjoint ? p.R2 : -p.R2);
        set(Var::psi, p.d * q);
        break;
    }
  }
  finish_blocks(op, table_groups(t));
  return op;
}

}  // namespace detail

/// L^eps in table coordinates.
inline LinearOperator assemble_L(const Params& p) { return detail::assemble_full(p, false); }

/// L^{eps*}, written from its own operator form (not by transposition).
inline LinearOperator assemble_L_adjoint(const Params& p) { return detail::assemble_full(p, true); }

/// Field-level action of L^eps built from divergence/gradient/Laplacian pieces.
template <class T>
SpectralField<T> apply_L(const SpectralField<T>& u) {
  const Params& p = u.params();
  require_eps(p, "apply_L");
  SpectralField<T> out(p);
  MatT<T> lap(p.J + 1, p.K + 1);
  for (int j = 0; j <= p.J; ++j)
    for (int k = 0; k <= p.K; ++k) lap(j, k) = q2({j, k}, p.alpha);
  MatT<T> dx(p.J + 1, p.K + 1), dy(p.J + 1, p.K + 1);
  for (int j = 0; j <= p.J; ++j)
    for (int k = 0; k <= p.K; ++k) {
      dx(j, k) = p.alpha * j;
      dy(j, k) = kPi * k;
    }
  const MatT<T> phi = u.grid(Var::phi), w1 = u.grid(Var::w1), w2 = u.grid(Var::w2);
  const MatT<T> th = u.grid(Var::theta), ps = u.grid(Var::psi);
  out.set_grid(Var::phi, divergence(u) / (p.eps * p.eps));
  out.set_grid(Var::w1, -p.Pr * dx.cwiseProduct(phi) + p.Pr * lap.cwiseProduct(w1));
  out.set_grid(Var::w2, -p.Pr * dy.cwiseProduct(phi) + p.Pr * lap.cwiseProduct(w2) - p.Pr * p.R1 * th +
                            p.Pr * p.R2 * ps);
  out.set_grid(Var::theta, -p.R1 * w2 + lap.cwiseProduct(th));
  out.set_grid(Var::psi, -p.R2 * w2 + p.d * lap.cwiseProduct(ps));
  return out;
}

/// Coordinates on the solenoidal subspace: one velocity amplitude v per mode with j,k >= 1
/// (w2 = v, w1 = -kp v/(aj)), plus theta and psi. Modes (j,0) and (0,k) carry no solenoidal
/// velocity: their velocity fields are pure gradients.
class SolenoidalCoords {
 public:
  enum class RVar { v = 0, theta = 1, psi = 2 };
  struct Entry {
    RVar var;
    ModeIndex mode;
  };

  explicit SolenoidalCoords(const Params& p) : p_(p), table_(shared_table(p.J, p.K)) {
    for (RVar rv : {RVar::v, RVar::theta, RVar::psi})
      for (int j = 0; j <= p.J; ++j)
        for (int k = 1; k <= p.K; ++k) {
          if (rv == RVar::v && j == 0) continue;
          entries_.push_back({rv, {j, k}});
        }
    const int n = size();
    full_of_.resize(n);
    weight_.resize(n);
    for (int i = 0; i < n; ++i) {
      const auto& e = entries_[i];
      const double mu = measure(e.mode, p.alpha);
      Var fv = e.var == RVar::v ? Var::w2 : (e.var == RVar::theta ? Var::theta : Var::psi);
      full_of_[i] = table_->index(fv, e.mode.j, e.mode.k);
      weight_[i] = e.var == RVar::v ? mu / (p.Pr * shape(e.mode)) : mu;
    }
    for (int j = 0; j <= p.J; ++j)
      for (int k = 1; k <= p.K; ++k) {
        std::vector<int> idx;
        for (int i = 0; i < n; ++i)
          if (entries_[i].mode.j == j && entries_[i].mode.k == k) idx.push_back(i);
        groups_.emplace_back(ModeIndex{j, k}, idx);
      }
  }

  int size() const { return static_cast<int>(entries_.size()); }
  const Entry& operator[](int i) const { return entries_[i]; }
  const Params& params() const { return p_; }
  const std::vector<std::pair<ModeIndex, std::vector<int>>>& groups() const { return groups_; }
  /// Weights making the embedding an isometry for the eps = 0 pairing.
  const Eigen::VectorXd& weights() const { return weight_; }
  int index(RVar rv, int j, int k) const {
    for (int i = 0; i < size(); ++i)
      if (entries_[i].var == rv && entries_[i].mode.j == j && entries_[i].mode.k == k) return i;
    return -1;
  }

  /// s = a^2 j^2 / q^2, the e2 component of the solenoidal projection of e2.
  double shape(ModeIndex m) const { return p_.alpha * p_.alpha * m.j * m.j / q2(m, p_.alpha); }

  template <class T>
  VecT<T> lift(const VecT<T>& x) const {
    VecT<T> u = VecT<T>::Zero(table_->size());
    for (int i = 0; i < size(); ++i) {
      u[full_of_[i]] = x[i];
      if (entries_[i].var == RVar::v) {
        const auto m = entries_[i].mode;
        u[table_->index(Var::w1, m.j, m.k)] = -kPi * m.k / (p_.alpha * m.j) * x[i];
      }
    }
    return u;
  }

  /// Solenoidal projection followed by extraction of the reduced coordinates.
  template <class T>
  VecT<T> restrict(const VecT<T>& u) const {
    VecT<T> x(size());
    for (int i = 0; i < size(); ++i) {
      if (entries_[i].var != RVar::v) {
        x[i] = u[full_of_[i]];
        continue;
      }
      const auto m = entries_[i].mode;
      const double q = q2(m, p_.alpha);
      x[i] = shape(m) * u[full_of_[i]] -
             p_.alpha * m.j * kPi * m.k / q * u[table_->index(Var::w1, m.j, m.k)];
    }
    return x;
  }

 private:
  Params p_;
  std::shared_ptr<const ModeTable> table_;
  std::vector<Entry> entries_;
  std::vector<int> full_of_;
  Eigen::VectorXd weight_;
  std::vector<std::pair<ModeIndex, std::vector<int>>> groups_;
};

namespace detail {

inline LinearOperator assemble_incomp(const Params& p, bool adjoint) {
  p.validate();
  SolenoidalCoords sc(p);
  LinearOperator op;
  op.params = p;
  op.eps = 0;
  op.kind = adjoint ? OperatorKind::L_incompressible_adjoint : OperatorKind::L_incompressible;
  op.matrix = Eigen::MatrixXd::Zero(sc.size(), sc.size());
  using RV = SolenoidalCoords::RVar;
  for (int r = 0; r < sc.size(); ++r) {
    const auto e = sc[r];
    const double q = q2(e.mode, p.alpha);
    const int iv = sc.index(RV::v, e.mode.j, e.mode.k);
    const int it = sc.index(RV::theta, e.mode.j, e.mode.k);
    const int is = sc.index(RV::psi, e.mode.j, e.mode.k);
    switch (e.var) {
      case RV::v: {
        const double s = sc.shape(e.mode);
        op.matrix(r, iv) = p.Pr * q;
        op.matrix(r, it) = -p.Pr * p.R1 * s;
        op.matrix(r, is) = (adjoint ? -1.0 : 1.0) * p.Pr * p.R2 * s;
        break;
      }
      case RV::theta:
        op.matrix(r, it) = q;
        if (iv >= 0) op.matrix(r, iv) = -p.R1;
        break;
      case RV::psi:
        op.matrix(r, is) = p.d * q;
        if (iv >= 0) op.matrix(r, iv) = adjoint ? p.R2 : -p.R2;
        break;
    }
  }
  finish_blocks(op, sc.groups());
  return op;
}

}  // namespace detail

/// Solenoidal operator in reduced coordinates (eps ignored).
inline LinearOperator assemble_L_incomp(const Params& p) { return detail::assemble_incomp(p, false); }
inline LinearOperator assemble_L_incomp_adjoint(const Params& p) { return detail::assemble_incomp(p, true); }

/// K u: w2 <- -Pr theta, theta <- -w2, everything else zero.
template <class T>
SpectralField<T> apply_K(const SpectralField<T>& u) {
  const Params& p = u.params();
  SpectralField<T> out(p);
  out.set_grid(Var::w2, -p.Pr * u.grid(Var::theta));
  out.set_grid(Var::theta, -u.grid(Var::w2));
  return out;
}

inline Eigen::MatrixXd assemble_K(const Params& p) {
  auto t = shared_table(p.J, p.K);
  Eigen::MatrixXd Km = Eigen::MatrixXd::Zero(t->size(), t->size());
  for (int j = 0; j <= p.J; ++j)
    for (int k = 1; k <= p.K; ++k) {
      const int iw = t->index(Var::w2, j, k), it = t->index(Var::theta, j, k);
      Km(iw, it) = -p.Pr;
      Km(it, iw) = -1.0;
    }
  return Km;
}

/// Solenoidal projection of K in reduced coordinates.
inline Eigen::MatrixXd assemble_K_incomp(const Params& p) {
  SolenoidalCoords sc(p);
  using RV = SolenoidalCoords::RVar;
  Eigen::MatrixXd Km = Eigen::MatrixXd::Zero(sc.size(), sc.size());
  for (int j = 1; j <= p.J; ++j)
    for (int k = 1; k <= p.K; ++k) {
      const int iv = sc.index(RV::v, j, k), it = sc.index(RV::theta, j, k);
      Km(iv, it) = -p.Pr * sc.shape({j, k});
      Km(it, iv) = -1.0;
    }
  return Km;
}

/// N(u1,u2) = (0, w1.grad w2, w1.grad theta2, w1.grad psi2), Galerkin-projected exactly.
inline RealField nonlinear_N(const RealField& u1, const RealField& u2) {
  require_same_space(u1, u2);
  const Params& p = u1.params();
  auto cp = shared_collocation(p.J, p.K, p.alpha);
  const Collocation& c = *cp;
  using enum Trig;
  const Eigen::MatrixXd A1 = c.synth(u1.grid(Var::w1), Sin, Cos);
  const Eigen::MatrixXd A2 = c.synth(u1.grid(Var::w2), Cos, Sin);
  RealField out(p);
  {
    const Eigen::MatrixXd b = u2.grid(Var::w1);
    Eigen::MatrixXd g = A1.cwiseProduct(c.synth(c.dx_scale(b, 1.0), Cos, Cos)) +
                        A2.cwiseProduct(c.synth(c.dy_scale(b, -1.0), Sin, Sin));
    out.set_grid(Var::w1, c.analyze(g, Sin, Cos));
  }
  for (Var v : {Var::w2, Var::theta, Var::psi}) {
    const Eigen::MatrixXd b = u2.grid(v);
    Eigen::MatrixXd g = A1.cwiseProduct(c.synth(c.dx_scale(b, -1.0), Sin, Sin)) +
                        A2.cwiseProduct(c.synth(c.dy_scale(b, 1.0), Cos, Cos));
    out.set_grid(v, c.analyze(g, Cos, Sin));
  }
  return out;
}

/// Bilinear extension to complex arguments (no conjugation).
inline ComplexField nonlinear_N(const ComplexField& u1, const ComplexField& u2) {
  const RealField a = real_part(u1), b = imag_part(u1), c = real_part(u2), d = imag_part(u2);
  const Eigen::VectorXd re = nonlinear_N(a, c).coeffs() - nonlinear_N(b, d).coeffs();
  const Eigen::VectorXd im = nonlinear_N(a, d).coeffs() + nonlinear_N(b, c).coeffs();
  Eigen::VectorXcd z(re.size());
  z.real() = re;
  z.imag() = im;
  return {u1.params(), z};
}

template <class T>
SpectralField<T> bilinear_M(const SpectralField<T>& u1, const SpectralField<T>& u2) {
  return nonlinear_N(u1, u2) + nonlinear_N(u2, u1);
}

/// Coordinate-format Matrix Market dump of a dense operator.
inline void write_matrix_market(const Eigen::MatrixXd& A, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorCode::Io, "cannot open " + path);
  int nnz = 0;
  for (int j = 0; j < A.cols(); ++j)
    for (int i = 0; i < A.rows(); ++i) nnz += (A(i, j) != 0.0);
  f << "%%MatrixMarket matrix coordinate real general\n";
  f << A.rows() << " " << A.cols() << " " << nnz << "\n";
  f << std::setprecision(17);
  for (int j = 0; j < A.cols(); ++j)
    for (int i = 0; i < A.rows(); ++i)
      if (A(i, j) != 0.0) f << i + 1 << " " << j + 1 << " " << A(i, j) << "\n";
}

}  // namespace ddc
