#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace ddc {

inline constexpr const char* kVersion = "0.3.1";

enum class ErrorCode {
  InvalidArgument,
  Mismatch,
  SteadyOnsetFirst,
  NoCrossing,
  EigenTracking,
  EigenFailure,
  SingularBlock,
  DegenerateTransversality,
  NoContraction,
  MaxIter,
  StepCollapse,
  WindowCount,
  BlowUp,
  NotConverged,
  Io,
};

inline const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Mismatch: return "Mismatch";
    case ErrorCode::SteadyOnsetFirst: return "SteadyOnsetFirst";
    case ErrorCode::NoCrossing: return "NoCrossing";
    case ErrorCode::EigenTracking: return "EigenTracking";
    case ErrorCode::EigenFailure: return "EigenFailure";
    case ErrorCode::SingularBlock: return "SingularBlock";
    case ErrorCode::DegenerateTransversality: return "DegenerateTransversality";
    case ErrorCode::NoContraction: return "NoContraction";
    case ErrorCode::MaxIter: return "MaxIter";
    case ErrorCode::StepCollapse: return "StepCollapse";
    case ErrorCode::WindowCount: return "WindowCount";
    case ErrorCode::BlowUp: return "BlowUp";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Exception carrying a machine-readable code; the message names the offending values.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Physical and discretization parameters. R1 and R2 are the square roots of the
/// thermal and solutal Rayleigh numbers; eps = 0 selects the incompressible system.
struct Params {
  double Pr = 2.0;
  double d = 0.1;
  double R1 = 0.0;
  double R2 = 0.0;
  double alpha = std::numbers::pi / std::numbers::sqrt2;
  double eps = 0.0;
  int J = 12;
  int K = 12;

  void validate() const {
    if (!(Pr > 0) || !(d > 0) || !(alpha > 0))
      throw Error(ErrorCode::InvalidArgument, "Pr, d and alpha must be positive");
    if (!(eps >= 0) || !(R1 >= 0) || !(R2 >= 0))
      throw Error(ErrorCode::InvalidArgument, "eps, R1 and R2 must be non-negative");
    if (J < 1 || K < 1)
      throw Error(ErrorCode::InvalidArgument,
                  "truncation needs J,K >= 1 (got " + std::to_string(J) + "," + std::to_string(K) + ")");
  }

  /// Advisory only: Pr > 1 and 0 < d < 1.
  bool paper_regime() const { return Pr > 1 && d > 0 && d < 1; }

  /// Same spatial discretization and inner-product weights (R1, R2, eps may differ).
  bool same_space(const Params& o) const { return J == o.J && K == o.K && alpha == o.alpha && Pr == o.Pr; }

  Params with_R1(double r) const {
    Params p = *this;
    p.R1 = r;
    return p;
  }
  Params with_eps(double e) const {
    Params p = *this;
    p.eps = e;
    return p;
  }
  Params with_truncation(int j, int k) const {
    Params p = *this;
    p.J = j;
    p.K = k;
    return p;
  }
};

}  // namespace ddc
