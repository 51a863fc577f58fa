#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

#include "huo/linalg.hpp"

namespace huo {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Sub-stream seed for (root, module, index). Independent streams for
/// independent work items keep results reproducible regardless of order.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view module, std::uint64_t index = 0) {
  return splitmix64(splitmix64(root ^ fnv1a64(module)) + index);
}

/// mt19937_64 with portable uniform/normal sampling (std distributions are
/// implementation-defined, which would break golden outputs across toolchains).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = 0;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  /// Standard normal via Box-Muller; the spare value is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(kTwoPi * u2);
    has_spare_ = true;
    return r * std::cos(kTwoPi * u2);
  }

  /// Complex Gaussian with E|z|^2 = 1.
  Complex complex_normal() {
    const double re = normal();
    const double im = normal();
    return Complex(re, im) * std::sqrt(0.5);
  }

  double phase() { return kTwoPi * uniform(); }

  CVector random_state(Index dim) {
    CVector v(dim);
    for (Index i = 0; i < dim; ++i) v(i) = complex_normal();
    return v / v.norm();
  }

  CMatrix gaussian_matrix(Index rows, Index cols) {
    CMatrix m(rows, cols);
    for (Index c = 0; c < cols; ++c)
      for (Index r = 0; r < rows; ++r) m(r, c) = complex_normal();
    return m;
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Haar-random unitary: QR of a complex Gaussian matrix with the phases of
/// R's diagonal absorbed into Q.
inline CMatrix haar_unitary(Index dim, Rng& rng) {
  const CMatrix z = rng.gaussian_matrix(dim, dim);
  Eigen::HouseholderQR<CMatrix> qr(z);
  CMatrix q = qr.householderQ() * CMatrix::Identity(dim, dim);
  const CMatrix& r = qr.matrixQR();
  for (Index i = 0; i < dim; ++i) {
    const Complex d = r(i, i);
    const double mag = std::abs(d);
    if (mag > 0.0) q.col(i) *= d / mag;
  }
  return q;
}

}  // namespace huo
