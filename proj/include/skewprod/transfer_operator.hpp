#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "skewprod/base_dynamics.hpp"
#include "skewprod/errors.hpp"
#include "skewprod/fiber_dynamics.hpp"
#include "skewprod/grid_function.hpp"
#include "skewprod/parallel.hpp"
#include "skewprod/potential.hpp"

namespace skewprod {

/// One inverse branch seen from an output node: the preimage sits between nodes `index` and
/// `index + 1` (mod N) at fraction `frac`, and carries the weight e^{phi(x, preimage)}.
struct BranchTap {
  std::uint32_t index = 0;
  double frac = 0.0;
  double weight = 0.0;
  double preimage = 0.0;
};

inline BranchTap make_tap(double preimage, double weight, std::size_t n) {
  const double t = wrap_unit(preimage) * double(n);
  auto i = static_cast<std::size_t>(t);
  double frac = t - double(i);
  if (i >= n) {
    i = n - 1;
    frac = 1.0;
  }
  return {static_cast<std::uint32_t>(i), frac, weight, preimage};
}

/// The fiberwise operator L_x discretised on an N-node fiber grid: for every output node y_j on
/// Y_{fx}, the d = 2 preimages under g_x with their weights.
class FiberKernel {
 public:
  FiberKernel(const TrigPotential& phi, const MpFamily& family, double x, std::size_t n)
      : x_(x), n_(n), taps_(2 * n) {
    require(n >= 16 && std::has_single_bit(n), "FiberKernel: grid must be a power of two >= 16");
    const double p = family.exponent(x);
    const double c = mp::boundary(p, family.root_tol);
    for (std::size_t j = 0; j < n; ++j) {
      const auto pre = mp::inverse(p, double(j) / double(n), c, family.root_tol);
      for (int b = 0; b < 2; ++b) {
        taps_[2 * j + b] = make_tap(pre[b], std::exp(phi(x, pre[b])), n);
      }
    }
  }

  double x() const noexcept { return x_; }
  std::size_t size() const noexcept { return n_; }
  std::span<const BranchTap> taps(std::size_t j) const { return {taps_.data() + 2 * j, 2}; }

  /// out_j = sum_b weight_b * interp(in, preimage_b). If `positive_inputs`, interpolated input
  /// values at preimages must be > 0.
  void apply(std::span<const double> in, std::span<double> out,
             bool positive_inputs = false) const {
    const std::size_t mask = n_ - 1;
    for (std::size_t j = 0; j < n_; ++j) {
      double acc = 0.0;
      for (int b = 0; b < 2; ++b) {
        const BranchTap& t = taps_[2 * j + b];
        const double v = in[t.index] * (1.0 - t.frac) + in[(t.index + 1) & mask] * t.frac;
        if (positive_inputs && !(v > 0.0)) {
          fail(ErrorKind::nonpositive_function, "fiber operator: input not positive at preimage");
        }
        acc += t.weight * v;
      }
      out[j] = acc;
    }
  }

 private:
  double x_;
  std::size_t n_;
  std::vector<BranchTap> taps_;
};

/// L_x psi, renormalised. The result lives on the fiber over f(x).
inline GridFn apply_fiber_operator(const TrigPotential& phi, const MpFamily& family,
                                   const BasePoint& x, const GridFn& psi,
                                   bool cone_semantics = false) {
  if (x.capacity() < 1) fail(ErrorKind::capacity_exhausted, "apply_fiber_operator: capacity 0");
  FiberKernel kernel(phi, family, x.value(), psi.size());
  GridFn out(psi.size(), 0.0);
  kernel.apply(psi.values(), out.values(), cone_semantics);
  out.log_offset = psi.log_offset;
  out.normalize();
  return out;
}

/// Walks the base orbit x, f(x), f^2(x), ... applying L_{f^k x} to a set of fiber functions in
/// lockstep so that branch evaluations are shared.
class FiberCascade {
 public:
  FiberCascade(const TrigPotential& phi, const MpFamily& family, BasePoint x, std::size_t n)
      : phi_(phi), family_(family), position_(std::move(x)), n_(n), scratch_(n) {}

  const BasePoint& position() const noexcept { return position_; }
  std::size_t steps() const noexcept { return steps_; }

  void advance(std::span<GridFn* const> fns, bool cone_semantics = false) {
    if (position_.capacity() < 1) {
      fail(ErrorKind::capacity_exhausted, "FiberCascade: base point capacity exhausted");
    }
    FiberKernel kernel(phi_, family_, position_.value(), n_);
    for (GridFn* g : fns) {
      require(g->size() == n_, "FiberCascade: grid size mismatch");
      kernel.apply(g->values(), scratch_, cone_semantics);
      std::copy(scratch_.begin(), scratch_.end(), g->values().begin());
      g->normalize();
    }
    position_ = position_.forward(1);
    ++steps_;
  }

  void advance(GridFn& g, bool cone_semantics = false) {
    GridFn* one[] = {&g};
    advance(std::span<GridFn* const>(one), cone_semantics);
  }

 private:
  TrigPotential phi_;
  MpFamily family_;
  BasePoint position_;
  std::size_t n_;
  std::size_t steps_ = 0;
  std::vector<double> scratch_;
};

/// L_x^n psi = L_{f^{n-1}x} o ... o L_x psi.
inline GridFn iterate_cascade(const TrigPotential& phi, const MpFamily& family,
                              const BasePoint& x, GridFn psi, std::size_t n) {
  if (x.capacity() < n) fail(ErrorKind::capacity_exhausted, "iterate_cascade: capacity < n");
  FiberCascade cascade(phi, family, x, psi.size());
  for (std::size_t k = 0; k < n; ++k) cascade.advance(psi);
  return psi;
}

// ---------------------------------------------------------------------------
// Sparse row storage shared by the base and full operators.
// ---------------------------------------------------------------------------

struct SparseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_start{0};
  std::vector<std::uint32_t> col;
  std::vector<double> val;

  void multiply(std::span<const double> in, std::span<double> out) const {
    parallel_for(rows, [&](std::size_t r) {
      double acc = 0.0;
      for (std::size_t k = row_start[r]; k < row_start[r + 1]; ++k) acc += val[k] * in[col[k]];
      out[r] = acc;
    });
  }

  SparseMatrix transpose() const {
    SparseMatrix t;
    t.rows = cols;
    t.cols = rows;
    t.row_start.assign(cols + 1, 0);
    for (auto c : col) ++t.row_start[c + 1];
    for (std::size_t c = 0; c < cols; ++c) t.row_start[c + 1] += t.row_start[c];
    t.col.resize(col.size());
    t.val.resize(val.size());
    std::vector<std::size_t> fill(t.row_start.begin(), t.row_start.end() - 1);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t k = row_start[r]; k < row_start[r + 1]; ++k) {
        const std::size_t dst = fill[col[k]]++;
        t.col[dst] = static_cast<std::uint32_t>(r);
        t.val[dst] = val[k];
      }
    }
    return t;
  }

  /// Column sums (total weight each input node contributes).
  std::vector<double> column_sums() const {
    std::vector<double> s(cols, 0.0);
    for (std::size_t k = 0; k < col.size(); ++k) s[col[k]] += val[k];
    return s;
  }
};

/// Discretised full operator L_phi on the NX x NY torus grid: at each node the dbar = 4
/// preimages (two base branches, two fiber branches computed at each base preimage),
/// interpolated bilinearly. Keeps the transpose for adjoint iteration.
class FullTransferOperator {
 public:
  FullTransferOperator(const TrigPotential& phi, const MpFamily& family, std::size_t nx,
                       std::size_t ny)
      : nx_(nx), ny_(ny) {
    GridFn2D probe(nx, ny);  // validates sizes
    require(nx * ny <= (std::size_t{1} << 20), "FullTransferOperator: grid exceeds 2^20 nodes");
    // Fiber preimage tables per base preimage xb = m / (2 nx), m = i + b nx.
    const std::size_t base_pre = 2 * nx;
    std::vector<std::array<double, 2>> fiber_pre(base_pre * ny);
    parallel_for(base_pre, [&](std::size_t m) {
      const double xb = double(m) / double(base_pre);
      const double p = family.exponent(xb);
      const double c = mp::boundary(p, family.root_tol);
      for (std::size_t j = 0; j < ny; ++j) {
        fiber_pre[m * ny + j] = mp::inverse(p, double(j) / double(ny), c, family.root_tol);
      }
    });
    forward_.rows = forward_.cols = nx * ny;
    forward_.row_start.assign(nx * ny + 1, 0);
    forward_.col.reserve(nx * ny * 16);
    forward_.val.reserve(nx * ny * 16);
    for (std::size_t i = 0; i < nx; ++i) {
      for (std::size_t j = 0; j < ny; ++j) {
        for (std::size_t b = 0; b < 2; ++b) {
          const std::size_t m = i + b * nx;
          const double xb = double(m) / double(base_pre);
          // xb * nx = m / 2: a node when m is even, a midpoint otherwise.
          const std::size_t ix = m / 2;
          const double fx = (m % 2 == 0) ? 0.0 : 0.5;
          for (int k = 0; k < 2; ++k) {
            const double yb = fiber_pre[m * ny + j][k];
            const double w = std::exp(phi(xb, yb));
            const BranchTap ty = make_tap(yb, 1.0, ny);
            const std::size_t ix1 = (ix + 1) & (nx - 1), iy = ty.index, iy1 = (iy + 1) & (ny - 1);
            push(ix * ny + iy, w * (1.0 - fx) * (1.0 - ty.frac));
            push(ix * ny + iy1, w * (1.0 - fx) * ty.frac);
            if (fx > 0.0) {
              push(ix1 * ny + iy, w * fx * (1.0 - ty.frac));
              push(ix1 * ny + iy1, w * fx * ty.frac);
            }
          }
        }
        forward_.row_start[i * ny + j + 1] = forward_.col.size();
      }
    }
    adjoint_ = forward_.transpose();
  }

  std::size_t nx() const noexcept { return nx_; }
  std::size_t ny() const noexcept { return ny_; }
  const SparseMatrix& matrix() const noexcept { return forward_; }
  const SparseMatrix& adjoint_matrix() const noexcept { return adjoint_; }

  GridFn2D apply(const GridFn2D& psi) const {
    require(psi.nx() == nx_ && psi.ny() == ny_, "FullTransferOperator: grid mismatch");
    GridFn2D out(nx_, ny_, 0.0);
    forward_.multiply(psi.values(), out.values());
    out.log_offset = psi.log_offset;
    out.normalize();
    return out;
  }

 private:
  void push(std::size_t c, double w) {
    if (w == 0.0) return;
    forward_.col.push_back(static_cast<std::uint32_t>(c));
    forward_.val.push_back(w);
  }

  std::size_t nx_, ny_;
  SparseMatrix forward_;
  SparseMatrix adjoint_;
};

inline GridFn2D apply_full_operator(const TrigPotential& phi, const MpFamily& family,
                                    const GridFn2D& psi) {
  return FullTransferOperator(phi, family, psi.nx(), psi.ny()).apply(psi);
}

/// Discretised base operator L_Phi xi(x) = sum_{xb in f^{-1}x} e^{Phi(xb)} xi(xb) on N nodes.
/// `phi_refined[m]` holds Phi(m / 2N); the preimages of node i are refined nodes i and i + N.
class BaseTransferOperator {
 public:
  explicit BaseTransferOperator(std::vector<double> phi_refined)
      : phi_refined_(std::move(phi_refined)) {
    const std::size_t n = phi_refined_.size() / 2;
    require(n >= 16 && std::has_single_bit(n) && phi_refined_.size() == 2 * n,
            "BaseTransferOperator: need Phi on 2N refined nodes, N a power of two >= 16");
    n_ = n;
    forward_.rows = forward_.cols = n;
    forward_.row_start.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t b = 0; b < 2; ++b) {
        const std::size_t m = i + b * n;
        const double w = std::exp(phi_refined_[m]);
        if (m % 2 == 0) {
          forward_.col.push_back(static_cast<std::uint32_t>(m / 2));
          forward_.val.push_back(w);
        } else {
          forward_.col.push_back(static_cast<std::uint32_t>(m / 2));
          forward_.val.push_back(0.5 * w);
          forward_.col.push_back(static_cast<std::uint32_t>((m / 2 + 1) & (n - 1)));
          forward_.val.push_back(0.5 * w);
        }
      }
      forward_.row_start[i + 1] = forward_.col.size();
    }
    adjoint_ = forward_.transpose();
  }

  /// Evaluates Phi at the 2N preimage points (as exact base points) through `phi_eval`.
  template <class PhiEval>
  static BaseTransferOperator from_function(std::size_t n, PhiEval&& phi_eval,
                                            std::size_t capacity = BasePoint::kDefaultCapacity) {
    require(n >= 16 && std::has_single_bit(n), "BaseTransferOperator: N must be a power of two");
    const unsigned bits = static_cast<unsigned>(std::countr_zero(n)) + 1;
    std::vector<double> refined(2 * n);
    parallel_for(2 * n, [&](std::size_t m) {
      refined[m] = phi_eval(BasePoint::dyadic(m, bits, capacity));
    });
    return BaseTransferOperator(std::move(refined));
  }

  std::size_t size() const noexcept { return n_; }
  std::span<const double> phi_refined() const noexcept { return phi_refined_; }
  const SparseMatrix& matrix() const noexcept { return forward_; }
  const SparseMatrix& adjoint_matrix() const noexcept { return adjoint_; }

  GridFn apply(const GridFn& xi) const {
    require(xi.size() == n_, "BaseTransferOperator: grid mismatch");
    GridFn out(n_, 0.0);
    forward_.multiply(xi.values(), out.values());
    out.log_offset = xi.log_offset;
    out.normalize();
    return out;
  }

 private:
  std::vector<double> phi_refined_;
  std::size_t n_ = 0;
  SparseMatrix forward_;
  SparseMatrix adjoint_;
};

/// L_Phi xi with Phi supplied as a callable on base points (evaluated at both preimages of
/// every node).
template <class PhiEval>
GridFn apply_base_operator(PhiEval&& phi_eval, const GridFn& xi) {
  return BaseTransferOperator::from_function(xi.size(), std::forward<PhiEval>(phi_eval)).apply(xi);
}

}  // namespace skewprod
