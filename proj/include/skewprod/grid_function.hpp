#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <span>
#include <string>
#include <vector>

#include "skewprod/base_dynamics.hpp"
#include "skewprod/errors.hpp"

namespace skewprod {

/// Periodic function on the fiber circle sampled at nodes j/N, N a power of two >= 16.
/// Represents exp(log_offset) * (piecewise-linear interpolant of values).
class GridFn {
 public:
  GridFn() = default;

  explicit GridFn(std::size_t n, double fill = 1.0) : values_(n, fill) {
    if (n < 16 || !std::has_single_bit(n)) {
      fail(ErrorKind::invalid_argument, "GridFn: size must be a power of two >= 16");
    }
  }

  template <class Fn>
  static GridFn sample(std::size_t n, Fn&& fn) {
    GridFn g(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) g.values_[j] = fn(g.node(j));
    return g;
  }

  std::size_t size() const noexcept { return values_.size(); }
  double node(std::size_t j) const noexcept { return double(j) / double(values_.size()); }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t j) const noexcept { return values_[j]; }
  double& operator[](std::size_t j) noexcept { return values_[j]; }

  double log_offset = 0.0;

  /// Interpolated shape at y (log_offset not applied).
  double interp(double y) const noexcept {
    const std::size_t n = values_.size();
    const double t = wrap_unit(y) * double(n);
    std::size_t i = static_cast<std::size_t>(t);
    const double frac = t - double(i);
    if (i >= n) i = n - 1;
    return values_[i] * (1.0 - frac) + values_[(i + 1) & (n - 1)] * frac;
  }

  /// Represented value at y.
  double value_at(double y) const { return std::exp(log_offset) * interp(y); }
  double log_value_at(double y) const { return log_offset + std::log(interp(y)); }

  double min() const noexcept {
    double m = values_.front();
    for (double v : values_) m = std::min(m, v);
    return m;
  }
  double max() const noexcept {
    double m = values_.front();
    for (double v : values_) m = std::max(m, v);
    return m;
  }
  double mean() const noexcept {
    double s = 0.0;
    for (double v : values_) s += v;
    return s / double(values_.size());
  }

  /// Rescales so that max |values| = 1, moving the factor into log_offset.
  void normalize() {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::fabs(v));
    if (m == 0.0 || !std::isfinite(m)) {
      fail(ErrorKind::nonpositive_function, "GridFn::normalize: zero or non-finite function");
    }
    for (double& v : values_) v /= m;
    log_offset += std::log(m);
  }

  /// Every (N/m)-th node; m must divide N.
  GridFn downsample(std::size_t m) const {
    require(m <= values_.size() && values_.size() % m == 0, "GridFn::downsample: bad size");
    GridFn g(m, 0.0);
    const std::size_t stride = values_.size() / m;
    for (std::size_t j = 0; j < m; ++j) g.values_[j] = values_[j * stride];
    g.log_offset = log_offset;
    return g;
  }

  /// CSV with columns node,value,log_offset.
  void write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::config, "cannot write " + path);
    out << "node,value,log_offset\n" << std::setprecision(15);
    for (std::size_t j = 0; j < values_.size(); ++j) {
      out << node(j) << ',' << values_[j] << ',' << log_offset << '\n';
    }
  }

 private:
  std::vector<double> values_;
};

/// Function on the torus sampled at (i/NX, j/NY); values are stored x-major.
class GridFn2D {
 public:
  GridFn2D() = default;

  GridFn2D(std::size_t nx, std::size_t ny, double fill = 1.0)
      : nx_(nx), ny_(ny), values_(nx * ny, fill) {
    if (nx < 16 || ny < 16 || !std::has_single_bit(nx) || !std::has_single_bit(ny)) {
      fail(ErrorKind::invalid_argument, "GridFn2D: sizes must be powers of two >= 16");
    }
  }

  template <class Fn>
  static GridFn2D sample(std::size_t nx, std::size_t ny, Fn&& fn) {
    GridFn2D g(nx, ny, 0.0);
    for (std::size_t i = 0; i < nx; ++i) {
      for (std::size_t j = 0; j < ny; ++j) g.at(i, j) = fn(double(i) / nx, double(j) / ny);
    }
    return g;
  }

  std::size_t nx() const noexcept { return nx_; }
  std::size_t ny() const noexcept { return ny_; }
  std::size_t size() const noexcept { return values_.size(); }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  double& at(std::size_t i, std::size_t j) noexcept { return values_[i * ny_ + j]; }
  double at(std::size_t i, std::size_t j) const noexcept { return values_[i * ny_ + j]; }

  double log_offset = 0.0;

  /// Bilinear periodic interpolation of the shape.
  double interp(double x, double y) const noexcept {
    const double tx = wrap_unit(x) * double(nx_), ty = wrap_unit(y) * double(ny_);
    std::size_t i = static_cast<std::size_t>(tx), j = static_cast<std::size_t>(ty);
    const double fx = tx - double(i), fy = ty - double(j);
    if (i >= nx_) i = nx_ - 1;
    if (j >= ny_) j = ny_ - 1;
    const std::size_t i1 = (i + 1) & (nx_ - 1), j1 = (j + 1) & (ny_ - 1);
    return (1.0 - fx) * ((1.0 - fy) * at(i, j) + fy * at(i, j1)) +
           fx * ((1.0 - fy) * at(i1, j) + fy * at(i1, j1));
  }

  /// Fiber slice at base coordinate x (linear in x between columns), on the native y grid.
  GridFn fiber(double x) const {
    GridFn g(ny_, 0.0);
    const double tx = wrap_unit(x) * double(nx_);
    std::size_t i = static_cast<std::size_t>(tx);
    const double fx = tx - double(i);
    if (i >= nx_) i = nx_ - 1;
    const std::size_t i1 = (i + 1) & (nx_ - 1);
    for (std::size_t j = 0; j < ny_; ++j) g[j] = (1.0 - fx) * at(i, j) + fx * at(i1, j);
    g.log_offset = log_offset;
    return g;
  }

  void normalize() {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::fabs(v));
    if (m == 0.0 || !std::isfinite(m)) {
      fail(ErrorKind::nonpositive_function, "GridFn2D::normalize: zero or non-finite function");
    }
    for (double& v : values_) v /= m;
    log_offset += std::log(m);
  }

 private:
  std::size_t nx_ = 0;
  std::size_t ny_ = 0;
  std::vector<double> values_;
};

}  // namespace skewprod
