#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "ddc/params.hpp"

namespace ddc {

struct FitResult {
  double slope = 0;
  double intercept = 0;
  double r_squared = 0;
  std::vector<std::pair<double, double>> points;
};

/// Least-squares line through (x, y).
inline FitResult linear_fit(const std::vector<std::pair<double, double>>& pts) {
  if (pts.size() < 3) throw Error(ErrorCode::InvalidArgument, "a fit needs at least 3 points");
  const double n = static_cast<double>(pts.size());
  double mx = 0, my = 0;
  for (auto [x, y] : pts) {
    mx += x / n;
    my += y / n;
  }
  double sxx = 0, sxy = 0, syy = 0;
  for (auto [x, y] : pts) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
    syy += (y - my) * (y - my);
  }
  FitResult f;
  f.points = pts;
  f.slope = sxx > 0 ? sxy / sxx : 0;
  f.intercept = my - f.slope * mx;
  f.r_squared = (sxx > 0 && syy > 0) ? std::min(1.0, sxy * sxy / (sxx * syy)) : 1.0;
  return f;
}

/// Slope of log|y| against log x. Points keep the raw (x, y) values.
inline FitResult loglog_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw Error(ErrorCode::InvalidArgument, "fit inputs differ in length");
  std::vector<std::pair<double, double>> lp;
  for (size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0) || !(std::abs(y[i]) > 0)) throw Error(ErrorCode::InvalidArgument, "log-log fit needs nonzero data");
    lp.emplace_back(std::log(x[i]), std::log(std::abs(y[i])));
  }
  FitResult f = linear_fit(lp);
  f.points.clear();
  for (size_t i = 0; i < x.size(); ++i) f.points.emplace_back(x[i], y[i]);
  return f;
}

}  // namespace ddc
