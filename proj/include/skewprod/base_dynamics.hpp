#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "skewprod/errors.hpp"

namespace skewprod {

/// A point of the base circle stored as its binary expansion x = 0.b1 b2 b3 ... (base 2).
///
/// The doubling map f(x) = 2x mod 1 drops the leading digit, so forward orbits are exact for
/// as many iterates as there are stored digits. `capacity()` is that count; digits past the
/// capacity are unknown and read as zero by `value()`.
class BasePoint {
 public:
  static constexpr std::size_t kDefaultCapacity = 128;

  /// The fixed point x = 0.
  explicit BasePoint(std::size_t capacity = kDefaultCapacity) : digits_(capacity, 0) {}

  /// Digits given most significant first as '0'/'1'. Padded with zeros up to `capacity`.
  static BasePoint from_bits(std::string_view bits, std::size_t capacity = kDefaultCapacity) {
    BasePoint p(std::max(capacity, bits.size()));
    for (std::size_t i = 0; i < bits.size(); ++i) {
      if (bits[i] != '0' && bits[i] != '1') {
        fail(ErrorKind::invalid_argument, "BasePoint: digit string must contain only 0/1");
      }
      p.digits_[i] = static_cast<std::uint8_t>(bits[i] - '0');
    }
    return p;
  }

  /// Eventually periodic expansion: `prefix` then `period` repeated until `capacity` digits.
  static BasePoint periodic(std::string_view prefix, std::string_view period,
                            std::size_t capacity = kDefaultCapacity) {
    require(!period.empty(), "BasePoint::periodic: empty period");
    std::string bits(prefix);
    while (bits.size() < capacity) bits += period;
    bits.resize(std::max(capacity, prefix.size()));
    return from_bits(bits, capacity);
  }

  /// numerator / 2^log2_denominator, numerator < 2^log2_denominator.
  static BasePoint dyadic(std::uint64_t numerator, unsigned log2_denominator,
                          std::size_t capacity = kDefaultCapacity) {
    require(log2_denominator <= 63 && numerator < (std::uint64_t{1} << log2_denominator),
            "BasePoint::dyadic: numerator out of range");
    BasePoint p(std::max<std::size_t>(capacity, log2_denominator));
    for (unsigned i = 0; i < log2_denominator; ++i) {
      p.digits_[i] = static_cast<std::uint8_t>((numerator >> (log2_denominator - 1 - i)) & 1u);
    }
    return p;
  }

  template <class Rng>
  static BasePoint random(Rng& rng, std::size_t capacity = kDefaultCapacity) {
    BasePoint p(capacity);
    std::uniform_int_distribution<int> bit(0, 1);
    for (auto& d : p.digits_) d = static_cast<std::uint8_t>(bit(rng));
    return p;
  }

  std::size_t capacity() const noexcept { return digits_.size(); }
  int digit(std::size_t i) const { return digits_.at(i); }

  /// Nearest double below the true value (first 53 digits; never rounds up to 1).
  double value() const noexcept {
    const std::size_t used = std::min<std::size_t>(53, digits_.size());
    std::uint64_t mantissa = 0;
    for (std::size_t i = 0; i < used; ++i) mantissa = (mantissa << 1) | digits_[i];
    return std::ldexp(static_cast<double>(mantissa), -static_cast<int>(used));
  }

  /// f^n(x). Exact; consumes n digits.
  BasePoint forward(std::size_t n = 1) const {
    if (n > digits_.size()) {
      fail(ErrorKind::capacity_exhausted,
           "BasePoint::forward: " + std::to_string(n) + " iterates requested, capacity " +
               std::to_string(digits_.size()));
    }
    BasePoint p(0);
    p.digits_.assign(digits_.begin() + static_cast<std::ptrdiff_t>(n), digits_.end());
    return p;
  }

  /// {x/2, (x+1)/2}: branch 0 prepends digit 0, branch 1 prepends digit 1.
  std::array<BasePoint, 2> preimages() const {
    std::array<BasePoint, 2> out{BasePoint(0), BasePoint(0)};
    for (std::uint8_t b = 0; b < 2; ++b) {
      out[b].digits_.reserve(digits_.size() + 1);
      out[b].digits_.push_back(b);
      out[b].digits_.insert(out[b].digits_.end(), digits_.begin(), digits_.end());
    }
    return out;
  }

  /// x + 2^{-k} mod 1, exact.
  BasePoint shifted(std::size_t k) const {
    require(k >= 1 && k <= digits_.size(), "BasePoint::shifted: exponent outside stored digits");
    BasePoint p = *this;
    for (std::size_t i = k; i-- > 0;) {
      if (p.digits_[i] == 0) {
        p.digits_[i] = 1;
        return p;
      }
      p.digits_[i] = 0;
    }
    return p;  // carried out of the unit interval: wrapped mod 1
  }

  std::string to_string() const {
    std::string s(digits_.size(), '0');
    for (std::size_t i = 0; i < digits_.size(); ++i) s[i] = static_cast<char>('0' + digits_[i]);
    return s;
  }

  /// Digit string with the zero tail removed; identifies the point independent of capacity.
  std::string key() const {
    std::string s = to_string();
    const auto last = s.find_last_of('1');
    return last == std::string::npos ? std::string() : s.substr(0, last + 1);
  }

  friend bool operator==(const BasePoint&, const BasePoint&) = default;

 private:
  std::vector<std::uint8_t> digits_;
};

inline BasePoint base_forward(const BasePoint& x, std::size_t n) { return x.forward(n); }

inline std::array<BasePoint, 2> base_preimages(const BasePoint& x) { return x.preimages(); }

/// Values of x, f(x), ..., f^n(x).
inline std::vector<double> base_orbit_values(const BasePoint& x, std::size_t n) {
  if (n > x.capacity()) {
    fail(ErrorKind::capacity_exhausted, "base orbit longer than point capacity");
  }
  std::vector<double> out;
  out.reserve(n + 1);
  BasePoint p = x;
  out.push_back(p.value());
  for (std::size_t k = 0; k < n; ++k) {
    p = p.forward(1);
    out.push_back(p.value());
  }
  return out;
}

/// Arc-length distance on R/Z.
inline double circle_distance(double a, double b) noexcept {
  double d = std::fabs(a - b);
  d -= std::floor(d);
  return std::min(d, 1.0 - d);
}

/// Reduces a real to [0, 1).
inline double wrap_unit(double y) noexcept {
  double r = y - std::floor(y);
  return r >= 1.0 ? 0.0 : r;
}

}  // namespace skewprod
