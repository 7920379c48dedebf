#pragma once

#include <Eigen/Dense>

#include <map>
#include <memory>
#include <mutex>
#include <tuple>

#include "ddc/basis.hpp"

namespace ddc {

enum class Trig { Sin, Cos };

/// Tensor collocation grid used only to evaluate quadratic products.
/// x: Nx uniform points on the period, y: Ny midpoints on (0,1). With Nx > 3J and
/// 2Ny > 3K the Galerkin projection of any product of two truncated fields is exact.
class Collocation {
 public:
  Collocation(int J, int K, double alpha)
      : J_(J), K_(K), alpha_(alpha), Nx_(3 * J + 3), Ny_(3 * K + 3) {
    const double Lx = 2 * kPi / alpha;
    sx_.resize(J + 1, Nx_);
    cx_.resize(J + 1, Nx_);
    for (int j = 0; j <= J; ++j)
      for (int i = 0; i < Nx_; ++i) {
        double x = Lx * i / Nx_;
        sx_(j, i) = std::sin(alpha * j * x);
        cx_(j, i) = std::cos(alpha * j * x);
      }
    sy_.resize(K + 1, Ny_);
    cy_.resize(K + 1, Ny_);
    for (int k = 0; k <= K; ++k)
      for (int l = 0; l < Ny_; ++l) {
        double y = (l + 0.5) / Ny_;
        sy_(k, l) = std::sin(kPi * k * y);
        cy_(k, l) = std::cos(kPi * k * y);
      }
    inv_mu_.resize(J + 1, K + 1);
    const double dA = (Lx / Nx_) * (1.0 / Ny_);
    for (int j = 0; j <= J; ++j)
      for (int k = 0; k <= K; ++k) inv_mu_(j, k) = dA / measure({j, k}, alpha);
  }

  int nx() const { return Nx_; }
  int ny() const { return Ny_; }

  /// Grid values (Nx x Ny) of sum_jk C(j,k) X_j(x) Y_k(y).
  Eigen::MatrixXd synth(const Eigen::MatrixXd& C, Trig xs, Trig ys) const {
    return X(xs).transpose() * (C * Y(ys));
  }

  /// Galerkin coefficients of grid data G against X_j(x) Y_k(y).
  Eigen::MatrixXd analyze(const Eigen::MatrixXd& G, Trig xs, Trig ys) const {
    Eigen::MatrixXd c = X(xs) * (G * Y(ys).transpose());
    return c.cwiseProduct(inv_mu_);
  }

  /// Multiply row j by alpha*j*s (x-derivative factor).
  Eigen::MatrixXd dx_scale(const Eigen::MatrixXd& C, double s) const {
    Eigen::MatrixXd out = C;
    for (int j = 0; j <= J_; ++j) out.row(j) *= s * alpha_ * j;
    return out;
  }
  /// Multiply column k by pi*k*s (y-derivative factor).
  Eigen::MatrixXd dy_scale(const Eigen::MatrixXd& C, double s) const {
    Eigen::MatrixXd out = C;
    for (int k = 0; k <= K_; ++k) out.col(k) *= s * kPi * k;
    return out;
  }

 private:
  const Eigen::MatrixXd& X(Trig t) const { return t == Trig::Sin ? sx_ : cx_; }
  const Eigen::MatrixXd& Y(Trig t) const { return t == Trig::Sin ? sy_ : cy_; }

  int J_, K_;
  double alpha_;
  int Nx_, Ny_;
  Eigen::MatrixXd sx_, cx_, sy_, cy_, inv_mu_;
};

inline std::shared_ptr<const Collocation> shared_collocation(int J, int K, double alpha) {
  static std::mutex mu;
  static std::map<std::tuple<int, int, double>, std::shared_ptr<const Collocation>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[{J, K, alpha}];
  if (!slot) slot = std::make_shared<const Collocation>(J, K, alpha);
  return slot;
}

}  // namespace ddc
