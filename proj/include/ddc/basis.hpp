#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <type_traits>
#include <utility>
#include <vector>

#include "ddc/params.hpp"

namespace ddc {

using cplx = std::complex<double>;
inline constexpr double kPi = std::numbers::pi;

enum class Var : int { phi = 0, w1 = 1, w2 = 2, theta = 3, psi = 4 };
inline constexpr int kNumVars = 5;
inline constexpr std::array<Var, kNumVars> kAllVars{Var::phi, Var::w1, Var::w2, Var::theta, Var::psi};

inline const char* var_name(Var v) {
  switch (v) {
    case Var::phi: return "phi";
    case Var::w1: return "w1";
    case Var::w2: return "w2";
    case Var::theta: return "theta";
    case Var::psi: return "psi";
  }
  return "?";
}

struct ModeIndex {
  int j = 0;
  int k = 0;
  friend auto operator<=>(const ModeIndex&, const ModeIndex&) = default;
};

/// w1 ~ sin(ajx)cos(kpy); w2, theta, psi ~ cos(ajx)sin(kpy); phi ~ cos(ajx)cos(kpy), zero mean.
inline bool admissible(Var v, ModeIndex m) {
  if (m.j < 0 || m.k < 0) return false;
  switch (v) {
    case Var::phi: return !(m.j == 0 && m.k == 0);
    case Var::w1: return m.j >= 1;
    default: return m.k >= 1;
  }
}

struct TableEntry {
  Var var;
  ModeIndex mode;
};

/// Entries sharing one (j,k); the linear operators never couple different blocks.
struct ModeBlock {
  ModeIndex mode;
  std::vector<int> idx;                // global positions, ordered phi, w1, w2, theta, psi
  std::array<int, kNumVars> local{};   // position of each variable inside idx, or -1
};

/// Flattening of the admissible coefficients: variable-major, then j, then k.
class ModeTable {
 public:
  ModeTable(int J, int K) : J_(J), K_(K) {
    if (J < 1 || K < 1)
      throw Error(ErrorCode::InvalidArgument, "mode table needs J,K >= 1");
    lookup_.assign(static_cast<size_t>(kNumVars) * (J + 1) * (K + 1), -1);
    for (Var v : kAllVars)
      for (int j = 0; j <= J; ++j)
        for (int k = 0; k <= K; ++k)
          if (admissible(v, {j, k})) {
            lookup_[slot(v, j, k)] = static_cast<int>(entries_.size());
            entries_.push_back({v, {j, k}});
          }
    block_of_.assign(entries_.size(), -1);
    for (int j = 0; j <= J; ++j)
      for (int k = 0; k <= K; ++k) {
        if (j == 0 && k == 0) continue;
        ModeBlock b;
        b.mode = {j, k};
        b.local.fill(-1);
        for (Var v : kAllVars) {
          int i = index(v, j, k);
          if (i < 0) continue;
          b.local[static_cast<int>(v)] = static_cast<int>(b.idx.size());
          b.idx.push_back(i);
          block_of_[i] = static_cast<int>(blocks_.size());
        }
        blocks_.push_back(std::move(b));
      }
  }

  int J() const { return J_; }
  int K() const { return K_; }
  int size() const { return static_cast<int>(entries_.size()); }
  const TableEntry& operator[](int i) const { return entries_[i]; }
  const std::vector<TableEntry>& entries() const { return entries_; }
  const std::vector<ModeBlock>& blocks() const { return blocks_; }
  int block_of(int i) const { return block_of_[i]; }

  /// -1 when (v,j,k) is inadmissible or outside the truncation.
  int index(Var v, int j, int k) const {
    if (j < 0 || k < 0 || j > J_ || k > K_) return -1;
    return lookup_[slot(v, j, k)];
  }
  int count(Var v) const {
    int n = 0;
    for (const auto& e : entries_) n += (e.var == v);
    return n;
  }

 private:
  size_t slot(Var v, int j, int k) const {
    return (static_cast<size_t>(v) * (J_ + 1) + j) * (K_ + 1) + k;
  }
  int J_, K_;
  std::vector<TableEntry> entries_;
  std::vector<int> lookup_;
  std::vector<ModeBlock> blocks_;
  std::vector<int> block_of_;
};

inline std::vector<TableEntry> mode_table(int J, int K) { return ModeTable(J, K).entries(); }

inline std::shared_ptr<const ModeTable> shared_table(int J, int K) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::shared_ptr<const ModeTable>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[{J, K}];
  if (!slot) slot = std::make_shared<const ModeTable>(J, K);
  return slot;
}

/// Integral over the cell of the squared basis function; identical for every variable at (j,k).
inline double measure(ModeIndex m, double alpha) {
  double mx = (m.j == 0 ? 2.0 : 1.0) * kPi / alpha;
  double my = (m.k == 0 ? 1.0 : 0.5);
  return mx * my;
}

inline double q2(ModeIndex m, double alpha) {
  return alpha * alpha * m.j * m.j + kPi * kPi * m.k * m.k;
}

inline double var_weight(Var v, double Pr, double eps) {
  switch (v) {
    case Var::phi: return eps * eps;
    case Var::w1:
    case Var::w2: return 1.0 / Pr;
    default: return 1.0;
  }
}

/// Diagonal of the eps-weighted L2 pairing in table coordinates.
inline Eigen::VectorXd eps_weights(const Params& p, double eps) {
  auto t = shared_table(p.J, p.K);
  Eigen::VectorXd w(t->size());
  for (int i = 0; i < t->size(); ++i)
    w[i] = measure((*t)[i].mode, p.alpha) * var_weight((*t)[i].var, p.Pr, eps);
  return w;
}

inline Eigen::VectorXd q2_vector(const Params& p) {
  auto t = shared_table(p.J, p.K);
  Eigen::VectorXd q(t->size());
  for (int i = 0; i < t->size(); ++i) q[i] = q2((*t)[i].mode, p.alpha);
  return q;
}

template <class T>
using VecT = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <class T>
using MatT = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

template <class T>
inline T conj_if(const T& x) {
  if constexpr (std::is_same_v<T, cplx>) return std::conj(x);
  else return x;
}

/// Coefficients of (phi, w1, w2, theta, psi) in the symmetry-adapted basis.
template <class T>
class SpectralField {
 public:
  using Scalar = T;
  using Vec = VecT<T>;

  SpectralField() = default;
  explicit SpectralField(const Params& p)
      : params_(p), table_(shared_table(p.J, p.K)), c_(Vec::Zero(table_->size())) {}
  SpectralField(const Params& p, Vec c) : params_(p), table_(shared_table(p.J, p.K)), c_(std::move(c)) {
    if (c_.size() != table_->size())
      throw Error(ErrorCode::Mismatch, "coefficient vector length does not match the mode table");
  }

  const Params& params() const { return params_; }
  const ModeTable& table() const { return *table_; }
  int size() const { return static_cast<int>(c_.size()); }
  Vec& coeffs() { return c_; }
  const Vec& coeffs() const { return c_; }

  T& at(Var v, int j, int k) {
    int i = table_->index(v, j, k);
    if (i < 0) throw Error(ErrorCode::InvalidArgument, "inadmissible coefficient");
    return c_[i];
  }
  T operator()(Var v, int j, int k) const {
    int i = table_->index(v, j, k);
    return i < 0 ? T(0) : c_[i];
  }

  /// (J+1)x(K+1) array of one variable's coefficients, zero where inadmissible.
  MatT<T> grid(Var v) const {
    MatT<T> g = MatT<T>::Zero(params_.J + 1, params_.K + 1);
    for (int j = 0; j <= params_.J; ++j)
      for (int k = 0; k <= params_.K; ++k) {
        int i = table_->index(v, j, k);
        if (i >= 0) g(j, k) = c_[i];
      }
    return g;
  }
  void set_grid(Var v, const MatT<T>& g) {
    for (int j = 0; j <= params_.J; ++j)
      for (int k = 0; k <= params_.K; ++k) {
        int i = table_->index(v, j, k);
        if (i >= 0) c_[i] = g(j, k);
      }
  }

  SpectralField& operator+=(const SpectralField& o) { c_ += o.c_; return *this; }
  SpectralField& operator-=(const SpectralField& o) { c_ -= o.c_; return *this; }
  SpectralField& operator*=(T s) { c_ *= s; return *this; }
  friend SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
  friend SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
  friend SpectralField operator*(T s, SpectralField a) { return a *= s; }

  SpectralField<cplx> complexified() const { return {params_, c_.template cast<cplx>()}; }

 private:
  Params params_{};
  std::shared_ptr<const ModeTable> table_;
  Vec c_;
};

using RealField = SpectralField<double>;
using ComplexField = SpectralField<cplx>;

inline RealField real_part(const ComplexField& u) { return {u.params(), u.coeffs().real()}; }
inline RealField imag_part(const ComplexField& u) { return {u.params(), u.coeffs().imag()}; }
inline ComplexField conjugate(const ComplexField& u) { return {u.params(), u.coeffs().conjugate()}; }

template <class A, class B>
inline void require_same_space(const SpectralField<A>& u, const SpectralField<B>& v) {
  if (!u.params().same_space(v.params()))
    throw Error(ErrorCode::Mismatch, "fields live on different truncations or parameters");
}

/// (u,v)_eps = eps^2(phi,phi') + Pr^-1(w,w') + (theta,theta') + (psi,psi'), conjugate on v.
template <class T>
T inner_eps(const SpectralField<T>& u, const SpectralField<T>& v, double eps) {
  require_same_space(u, v);
  Eigen::VectorXd w = eps_weights(u.params(), eps);
  T s(0);
  for (int i = 0; i < u.size(); ++i) s += w[i] * u.coeffs()[i] * conj_if(v.coeffs()[i]);
  return s;
}

struct NormReport {
  double l2_eps = 0;
  double x1_eps = 0;
  double x1star = 0;
  double x1 = 0;
};

template <class T>
NormReport norms(const SpectralField<T>& u, double eps) {
  const auto& t = u.table();
  const Params& p = u.params();
  double l2 = 0, grad = 0, x1 = 0, x1s = 0;
  for (int i = 0; i < u.size(); ++i) {
    double a2 = std::norm(cplx(u.coeffs()[i]));
    double mu = measure(t[i].mode, p.alpha);
    double q = q2(t[i].mode, p.alpha);
    double w = var_weight(t[i].var, p.Pr, eps);
    l2 += mu * w * a2;
    grad += mu * w * q * a2;
    if (t[i].var != Var::phi) {
      double w0 = var_weight(t[i].var, p.Pr, 0.0);
      x1 += mu * w0 * q * a2;
      x1s += mu * w0 * a2 / q;
    }
  }
  return {std::sqrt(l2), std::sqrt(l2 + eps * eps * grad), std::sqrt(x1s), std::sqrt(x1)};
}

/// ||f||^2 in L2 for one variable.
template <class T>
double l2_sq(const SpectralField<T>& u, Var v) {
  double s = 0;
  const auto& t = u.table();
  for (int i = 0; i < u.size(); ++i)
    if (t[i].var == v) s += measure(t[i].mode, u.params().alpha) * std::norm(cplx(u.coeffs()[i]));
  return s;
}

/// ||grad f||^2 in L2 for one variable.
template <class T>
double dirichlet_sq(const SpectralField<T>& u, Var v) {
  double s = 0;
  const auto& t = u.table();
  const double a = u.params().alpha;
  for (int i = 0; i < u.size(); ++i)
    if (t[i].var == v) s += measure(t[i].mode, a) * q2(t[i].mode, a) * std::norm(cplx(u.coeffs()[i]));
  return s;
}

/// Plain L2 pairing of two variables sharing the cos(ajx)sin(kpy) basis (e.g. theta and w2).
template <class T>
T l2_pair(const SpectralField<T>& u, Var a, const SpectralField<T>& v, Var b) {
  const Params& p = u.params();
  T s(0);
  for (int j = 0; j <= p.J; ++j)
    for (int k = 0; k <= p.K; ++k) {
      if (!admissible(a, {j, k}) || !admissible(b, {j, k})) continue;
      s += measure({j, k}, p.alpha) * u(a, j, k) * conj_if(v(b, j, k));
    }
  return s;
}

/// Coefficients of div w in the cos(ajx)cos(kpy) basis, indexed (j,k).
template <class T>
MatT<T> divergence(const SpectralField<T>& u) {
  const Params& p = u.params();
  MatT<T> d = MatT<T>::Zero(p.J + 1, p.K + 1);
  for (int j = 0; j <= p.J; ++j)
    for (int k = 0; k <= p.K; ++k)
      d(j, k) = p.alpha * j * u(Var::w1, j, k) + kPi * k * u(Var::w2, j, k);
  return d;
}

/// L2 norm of div w.
template <class T>
double divergence_norm(const SpectralField<T>& u) {
  MatT<T> d = divergence(u);
  double s = 0;
  for (int j = 0; j < d.rows(); ++j)
    for (int k = 0; k < d.cols(); ++k) s += measure({j, k}, u.params().alpha) * std::norm(cplx(d(j, k)));
  return std::sqrt(s);
}

/// Solenoidal projection: per mode, orthogonal projection onto aj*x + kp*y = 0.
template <class T>
SpectralField<T> helmholtz_project(const SpectralField<T>& u) {
  SpectralField<T> out = u;
  const Params& p = u.params();
  const auto& t = u.table();
  for (int j = 0; j <= p.J; ++j)
    for (int k = 0; k <= p.K; ++k) {
      int i1 = t.index(Var::w1, j, k), i2 = t.index(Var::w2, j, k);
      if (i1 < 0 && i2 < 0) continue;
      double d1 = kPi * k, d2 = -p.alpha * j;
      double n2 = d1 * d1 + d2 * d2;
      T a = i1 >= 0 ? u.coeffs()[i1] : T(0);
      T b = i2 >= 0 ? u.coeffs()[i2] : T(0);
      T s = (d1 * a + d2 * b) / n2;
      if (i1 >= 0) out.coeffs()[i1] = s * d1;
      if (i2 >= 0) out.coeffs()[i2] = s * d2;
    }
  return out;
}

/// Point value of one variable at (x, y).
template <class T>
T evaluate(const SpectralField<T>& u, Var v, double x, double y) {
  const Params& p = u.params();
  const auto& t = u.table();
  T s(0);
  for (int i = 0; i < u.size(); ++i) {
    if (t[i].var != v) continue;
    int j = t[i].mode.j, k = t[i].mode.k;
    double bx = (v == Var::w1) ? std::sin(p.alpha * j * x) : std::cos(p.alpha * j * x);
    double by = (v == Var::phi || v == Var::w1) ? std::cos(kPi * k * y) : std::sin(kPi * k * y);
    s += u.coeffs()[i] * (bx * by);
  }
  return s;
}

}  // namespace ddc
