#pragma once

#include <Eigen/Dense>

#include <memory>
#include <optional>

#include "ddc/operators.hpp"

namespace ddc {

/// Linear part, coupling K, nonlinearity and pairing of one Galerkin system, in the
/// coordinates the solvers work in: table coordinates for eps > 0, solenoidal
/// coordinates for eps = 0 (where K and N carry the solenoidal projection).
class GalerkinSystem {
 public:
  explicit GalerkinSystem(const Params& p) : p_(p) {
    p.validate();
    if (p.eps > 0) {
      L_ = assemble_L(p);
      Lstar_ = assemble_L_adjoint(p);
      K_ = assemble_K(p);
      W_ = eps_weights(p, p.eps);
    } else {
      sc_ = std::make_shared<const SolenoidalCoords>(p);
      L_ = assemble_L_incomp(p);
      Lstar_ = assemble_L_incomp_adjoint(p);
      K_ = assemble_K_incomp(p);
      W_ = sc_->weights();
    }
  }

  const Params& params() const { return p_; }
  double eps() const { return p_.eps; }
  bool incompressible() const { return p_.eps == 0; }
  int dim() const { return static_cast<int>(W_.size()); }
  const LinearOperator& L() const { return L_; }
  const LinearOperator& Lstar() const { return Lstar_; }
  const Eigen::MatrixXd& K() const { return K_; }
  const Eigen::VectorXd& weights() const { return W_; }
  const SolenoidalCoords* solenoidal() const { return sc_.get(); }

  GalerkinSystem with_R1(double r) const { return GalerkinSystem(p_.with_R1(r)); }

  /// Coordinates -> table coefficients (pressure zero in the solenoidal case).
  template <class T>
  VecT<T> lift(const VecT<T>& x) const {
    return sc_ ? sc_->lift(x) : x;
  }
  template <class T>
  VecT<T> restrict(const VecT<T>& u) const {
    return sc_ ? sc_->restrict(u) : u;
  }
  template <class T>
  SpectralField<T> field(const VecT<T>& x) const {
    return SpectralField<T>(p_, lift(x));
  }

  /// sum W x conj(y).
  cplx inner(const Eigen::VectorXcd& x, const Eigen::VectorXcd& y) const {
    cplx s = 0;
    for (int i = 0; i < dim(); ++i) s += W_[i] * x[i] * std::conj(y[i]);
    return s;
  }
  double inner(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const { return W_.dot(x.cwiseProduct(y)); }
  template <class D>
  double norm(const Eigen::MatrixBase<D>& x) const {
    return std::sqrt(W_.dot(x.cwiseAbs2()));
  }

  /// N(x, y) in coordinates.
  Eigen::VectorXd N(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
    RealField a(p_, lift(x)), b(p_, lift(y));
    return restrict(nonlinear_N(a, b).coeffs());
  }
  Eigen::VectorXd M(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const { return N(x, y) + N(y, x); }

 private:
  Params p_;
  std::shared_ptr<const SolenoidalCoords> sc_;
  LinearOperator L_, Lstar_;
  Eigen::MatrixXd K_;
  Eigen::VectorXd W_;
};

}  // namespace ddc
