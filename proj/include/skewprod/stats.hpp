#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "skewprod/errors.hpp"

namespace skewprod {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t points = 0;
};

/// Ordinary least squares y = slope * x + intercept.
inline LineFit fit_line(std::span<const double> xs, std::span<const double> ys) {
  require(xs.size() == ys.size(), "fit_line: size mismatch");
  const std::size_t n = xs.size();
  if (n < 2) fail(ErrorKind::degenerate_fit, "fit_line: fewer than two points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= double(n);
  my /= double(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx <= 0.0) fail(ErrorKind::degenerate_fit, "fit_line: abscissae coincide");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  fit.points = n;
  return fit;
}

inline double median(std::vector<double> values) {
  require(!values.empty(), "median of empty sample");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  double m = values[mid];
  if (values.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(values.begin(), values.begin() + mid));
  }
  return m;
}

}  // namespace skewprod
