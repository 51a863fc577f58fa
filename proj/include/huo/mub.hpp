#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <vector>

#include "huo/linalg.hpp"

namespace huo {

/// Orthonormal basis stored column-wise.
class Basis {
 public:
  explicit Basis(CMatrix columns, double tol = 1e-12) : columns_(std::move(columns)) {
    if (columns_.rows() != columns_.cols() || columns_.rows() < 1) {
      throw ValidationError("Basis: matrix must be square with dim >= 1");
    }
    const double err = orthonormality_error(columns_);
    if (err > tol) {
      throw ValidationError("Basis: ||B^dagger B - I||_max = " + std::to_string(err) + " exceeds tolerance");
    }
  }

  Index dim() const noexcept { return columns_.rows(); }
  const CMatrix& columns() const noexcept { return columns_; }
  auto vector(Index i) const { return columns_.col(i); }

 private:
  CMatrix columns_;
};

/// max_{i,j} | |<v_i|w_j>|^2 - 1/D |
inline double unbiasedness_deviation(const CMatrix& b1, const CMatrix& b2) {
  if (b1.rows() != b2.rows() || b1.cols() != b2.cols()) {
    throw ValidationError("unbiasedness_deviation: dimension mismatch");
  }
  const double inv_dim = 1.0 / static_cast<double>(b1.rows());
  return ((b1.adjoint() * b2).cwiseAbs2().array() - inv_dim).abs().maxCoeff();
}

inline double unbiasedness_deviation(const Basis& b1, const Basis& b2) {
  return unbiasedness_deviation(b1.columns(), b2.columns());
}

/// F(m, k) = exp(2 pi i m k / D) / sqrt(D); column k is the k-th vector.
inline CMatrix fourier_matrix(Index dim) {
  if (dim < 1) throw ValidationError("fourier_basis: dim must be >= 1");
  require_within_cap(static_cast<std::size_t>(dim), "fourier_basis");
  const double norm = 1.0 / std::sqrt(static_cast<double>(dim));
  CMatrix f(dim, dim);
  for (Index m = 0; m < dim; ++m)
    for (Index k = 0; k < dim; ++k)
      f(m, k) = std::polar(norm, kTwoPi * static_cast<double>((m * k) % dim) / static_cast<double>(dim));
  return f;
}

inline Basis fourier_basis(Index dim) { return Basis(fourier_matrix(dim)); }

namespace gf2 {

/// Irreducible polynomials over GF(2) (bit i = coefficient of x^i), N = 1..12.
inline constexpr std::array<std::uint32_t, 13> kIrreducible = {
    0x0, 0x3, 0x7, 0xB, 0x13, 0x25, 0x43, 0x83, 0x11D, 0x211, 0x409, 0x805, 0x1053};

inline std::uint32_t mul_mod(std::uint32_t a, std::uint32_t b, unsigned n, std::uint32_t poly) {
  std::uint32_t r = 0;
  while (b) {
    if (b & 1u) r ^= a;
    b >>= 1;
    a <<= 1;
    if ((a >> n) & 1u) a ^= poly;
  }
  return r;
}

/// Absolute trace GF(2^n) -> GF(2): z + z^2 + z^4 + ... + z^(2^(n-1)).
inline unsigned trace(std::uint32_t z, unsigned n, std::uint32_t poly) {
  std::uint32_t s = 0;
  std::uint32_t y = z;
  for (unsigned i = 0; i < n; ++i) {
    s ^= y;
    y = mul_mod(y, y, n, poly);
  }
  if (s > 1) throw NumericError("gf2::trace: result outside GF(2); modulus is not irreducible");
  return s;
}

}  // namespace gf2

enum class MubKind { prime, power_of_two };

/// Complete family of D+1 mutually unbiased bases. Basis 0 is the
/// computational basis; the others are evaluated lazily from closed forms,
/// so components and single overlaps are cheap even for D = 4096.
///
/// prime D:  basis a+1, vector m has components w^(a k^2 + m k) / sqrt(D).
/// D = 2^N:  basis a+1 (a in GF(2^N)) is the joint eigenbasis of one class
///           of commuting Pauli strings; vector m has components
///           i^(q_a(x)) (-1)^(m.x) / sqrt(D), where q_a is the Z4 lift of the
///           symmetric form A_a[i][j] = tr(a e_i e_j).
class MubFamily {
 public:
  Index dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(dim_) + 1; }
  MubKind kind() const noexcept { return kind_; }

  /// <k | v^{basis}_{vector}>
  Complex component(std::size_t basis, Index vector, Index k) const {
    if (basis == 0) return vector == k ? Complex(1.0, 0.0) : Complex(0.0, 0.0);
    const std::size_t a = basis - 1;
    if (kind_ == MubKind::prime) {
      const auto p = static_cast<std::uint64_t>(dim_);
      const auto uk = static_cast<std::uint64_t>(k);
      const std::uint64_t e = (a * ((uk * uk) % p) + static_cast<std::uint64_t>(vector) * uk) % p;
      return std::polar(norm_, kTwoPi * static_cast<double>(e) / static_cast<double>(p));
    }
    const unsigned q = quadratic_form(a, static_cast<std::uint32_t>(k));
    const int sign_bits = std::popcount(static_cast<std::uint32_t>(vector & k)) & 1;
    const unsigned total = (q + 2u * static_cast<unsigned>(sign_bits)) & 3u;
    static constexpr std::array<Complex, 4> kPowersOfI = {Complex(1, 0), Complex(0, 1), Complex(-1, 0),
                                                          Complex(0, -1)};
    return kPowersOfI[total] * norm_;
  }

  CMatrix basis_matrix(std::size_t basis) const {
    if (basis >= size()) throw ValidationError("MubFamily: basis index out of range");
    CMatrix b(dim_, dim_);
    for (Index v = 0; v < dim_; ++v)
      for (Index k = 0; k < dim_; ++k) b(k, v) = component(basis, v, k);
    return b;
  }

  Basis basis(std::size_t index) const { return Basis(basis_matrix(index)); }

  /// <v^{b1}_{i} | v^{b2}_{j}>, O(D).
  Complex overlap(std::size_t b1, Index i, std::size_t b2, Index j) const {
    Complex s(0.0, 0.0);
    for (Index k = 0; k < dim_; ++k) s += std::conj(component(b1, i, k)) * component(b2, j, k);
    return s;
  }

  friend MubFamily generate_mub_family(Index dim);

 private:
  unsigned quadratic_form(std::size_t a, std::uint32_t x) const {
    const auto& coeffs = forms_[a];
    unsigned q = 0;
    for (unsigned i = 0; i < bits_; ++i) {
      if (!((x >> i) & 1u)) continue;
      q += coeffs[i * bits_ + i];
      for (unsigned j = i + 1; j < bits_; ++j)
        if ((x >> j) & 1u) q += 2u * coeffs[i * bits_ + j];
    }
    return q & 3u;
  }

  Index dim_ = 1;
  MubKind kind_ = MubKind::power_of_two;
  unsigned bits_ = 0;
  double norm_ = 1.0;
  std::vector<std::vector<std::uint8_t>> forms_;
};

inline bool is_prime(Index n) {
  if (n < 2) return false;
  for (Index d = 2; d * d <= n; ++d)
    if (n % d == 0) return false;
  return true;
}

/// D must be prime or 2^N with N <= 12; anything else has no known complete
/// family and is refused.
inline MubFamily generate_mub_family(Index dim) {
  if (dim < 1) throw ValidationError("generate_mub_family: dim must be >= 1");
  MubFamily fam;
  fam.dim_ = dim;
  fam.norm_ = 1.0 / std::sqrt(static_cast<double>(dim));
  const bool power_of_two = std::has_single_bit(static_cast<std::uint64_t>(dim));
  if (power_of_two) {
    const auto n = static_cast<unsigned>(std::countr_zero(static_cast<std::uint64_t>(dim)));
    if (n > 12) {
      throw UnsupportedDimensionError("generate_mub_family: 2^" + std::to_string(n) + " exceeds N <= 12");
    }
    require_within_cap(static_cast<std::size_t>(dim), "generate_mub_family");
    fam.kind_ = MubKind::power_of_two;
    fam.bits_ = n;
    if (n == 0) {
      fam.forms_.assign(1, {});
      return fam;
    }
    const std::uint32_t poly = gf2::kIrreducible[n];
    // t[m] = tr(x^m) for every power needed by A_a[i][j] = sum_k a_k t[i+j+k].
    std::vector<unsigned> t(3 * n);
    std::uint32_t xm = 1;
    for (unsigned m = 0; m < 3 * n; ++m) {
      t[m] = gf2::trace(xm, n, poly);
      xm = gf2::mul_mod(xm, 2u, n, poly);
    }
    fam.forms_.resize(static_cast<std::size_t>(dim));
    for (std::uint32_t a = 0; a < static_cast<std::uint32_t>(dim); ++a) {
      auto& form = fam.forms_[a];
      form.assign(n * n, 0);
      for (unsigned i = 0; i < n; ++i)
        for (unsigned j = 0; j < n; ++j) {
          unsigned bit = 0;
          for (unsigned k = 0; k < n; ++k)
            if ((a >> k) & 1u) bit ^= t[i + j + k];
          form[i * n + j] = static_cast<std::uint8_t>(bit);
        }
    }
    return fam;
  }
  if (!is_prime(dim)) {
    throw UnsupportedDimensionError("generate_mub_family: D = " + std::to_string(dim) +
                                    " is neither prime nor a power of two");
  }
  require_within_cap(static_cast<std::size_t>(dim), "generate_mub_family");
  fam.kind_ = MubKind::prime;
  return fam;
}

}  // namespace huo
