#pragma once
#include <cmath>
#include <cstdint>

// Counter-based pseudo-random streams with cheap child-stream derivation.
// Every consumer (subject, replicate, draw slot) gets its own stream, so the
// number of variates one component consumes can never shift another's.

namespace lbaft {

namespace detail {

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace detail

// standard normal CDF
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * 0.7071067811865475244); }

// standard normal density
inline double normal_pdf(double x) { return 0.39894228040143267794 * std::exp(-0.5 * x * x); }

// Inverse standard normal CDF: rational initial guess refined by one Halley
// step against erfc, accurate to ~1e-15 over (0,1).
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) return p <= 0.0 ? -INFINITY : INFINITY;
  static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                              -2.759285104469687e+02, 1.383577518672690e+02,
                              -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                              -1.556989798598866e+02, 6.680131188771972e+01,
                              -1.328068155288572e+01};
  static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                              -2.400758277161838e+00, -2.549732539343734e+00,
                              4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                              2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley refinement
  double e = normal_cdf(x) - p;
  double u = e * 2.5066282746310002 * std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

class RngStream {
 public:
  RngStream() : key_(0), ctr_(0) {}
  explicit RngStream(std::uint64_t seed) : key_(seed), ctr_(0) {}

  std::uint64_t next_u64() {
    ctr_ += 0x9e3779b97f4a7c15ull;
    return detail::mix64(key_ ^ ctr_);
  }

  // uniform on the open interval (0,1)
  double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  double normal() { return normal_quantile(uniform()); }

  double exponential(double rate) { return -std::log(uniform()) / rate; }

  // independent derived stream for a fixed slot; same slot -> same stream
  RngStream child(std::uint64_t slot) const {
    return RngStream(detail::mix64(key_ ^ detail::mix64(slot ^ 0x632be59bd9b4e019ull)));
  }

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t ctr_;
};

// order-sensitive combination of seeds into one stream key
inline std::uint64_t combine_seeds(std::uint64_t a, std::uint64_t b) {
  return detail::mix64(detail::mix64(a ^ 0x8f51571a5ba4a3b1ull) ^ b);
}
inline std::uint64_t combine_seeds(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return combine_seeds(combine_seeds(a, b), c);
}

}  // namespace lbaft
