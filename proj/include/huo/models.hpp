#pragma once

#include <cstdint>
#include <string>
#include <variant>

#include "huo/linalg.hpp"
#include "huo/rng.hpp"

namespace huo {

// Spin chains use one bit per site (site i <-> bit i of the basis index);
// sigma^z is +1 on bit 0 and -1 on bit 1. All chains have open boundaries.

/// H = -J sum_i Z_i Z_{i+1} - h sum_i X_i - g sum_i Z_i
struct IsingChain {
  unsigned sites = 1;
  double coupling = 1.0;
  double field = 1.0;
  double longitudinal = 0.0;
};

/// H = J sum_i (X_i X_{i+1} + Y_i Y_{i+1} + anisotropy Z_i Z_{i+1}) + h sum_i Z_i
struct XxzChain {
  unsigned sites = 1;
  double coupling = 1.0;
  double anisotropy = 1.0;
  double field = 0.0;
};

/// (G + G^dagger) / sqrt(2D) with G complex standard Gaussian, so every
/// entry has E|H_ij|^2 = 1/D and the spectrum fills the semicircle [-2, 2].
struct RandomHermitian {
  std::size_t dim = 2;
  std::uint64_t seed = 0;
};

using ModelSpec = std::variant<IsingChain, XxzChain, RandomHermitian>;

inline std::size_t model_dimension(const ModelSpec& spec) {
  return std::visit(
      [](const auto& m) -> std::size_t {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, RandomHermitian>) {
          return m.dim;
        } else {
          if (m.sites >= 8 * sizeof(std::size_t) - 1) return SIZE_MAX;
          return std::size_t{1} << m.sites;
        }
      },
      spec);
}

inline std::string model_name(const ModelSpec& spec) {
  return std::visit(
      [](const auto& m) -> std::string {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, IsingChain>) return "ising";
        else if constexpr (std::is_same_v<M, XxzChain>) return "xxz";
        else return "random";
      },
      spec);
}

namespace detail {

inline double z_sign(std::size_t state, unsigned site) { return ((state >> site) & 1u) ? -1.0 : 1.0; }

inline CMatrix ising_matrix(const IsingChain& m) {
  const Index dim = Index{1} << m.sites;
  CMatrix h = CMatrix::Zero(dim, dim);
  for (Index s = 0; s < dim; ++s) {
    const auto us = static_cast<std::size_t>(s);
    double diag = 0.0;
    for (unsigned i = 0; i + 1 < m.sites; ++i) diag -= m.coupling * z_sign(us, i) * z_sign(us, i + 1);
    for (unsigned i = 0; i < m.sites; ++i) {
      diag -= m.longitudinal * z_sign(us, i);
      h(static_cast<Index>(us ^ (std::size_t{1} << i)), s) -= m.field;
    }
    h(s, s) += diag;
  }
  return h;
}

inline CMatrix xxz_matrix(const XxzChain& m) {
  const Index dim = Index{1} << m.sites;
  CMatrix h = CMatrix::Zero(dim, dim);
  for (Index s = 0; s < dim; ++s) {
    const auto us = static_cast<std::size_t>(s);
    double diag = 0.0;
    for (unsigned i = 0; i + 1 < m.sites; ++i) {
      const double zz = z_sign(us, i) * z_sign(us, i + 1);
      diag += m.coupling * m.anisotropy * zz;
      // XX + YY flips an anti-aligned pair with amplitude 2.
      if (zz < 0.0) {
        const auto flipped = us ^ (std::size_t{3} << i);
        h(static_cast<Index>(flipped), s) += 2.0 * m.coupling;
      }
    }
    for (unsigned i = 0; i < m.sites; ++i) diag += m.field * z_sign(us, i);
    h(s, s) += diag;
  }
  return h;
}

inline CMatrix random_hermitian_matrix(const RandomHermitian& m) {
  const auto dim = static_cast<Index>(m.dim);
  Rng rng(derive_seed(m.seed, "models.random_hermitian"));
  const CMatrix g = rng.gaussian_matrix(dim, dim);
  CMatrix h = (g + g.adjoint()) / std::sqrt(2.0 * static_cast<double>(dim));
  for (Index i = 0; i < dim; ++i) h(i, i) = Complex(h(i, i).real(), 0.0);
  return h;
}

}  // namespace detail

/// Builds the dense Hamiltonian, refusing (before allocation) anything above
/// the dimension cap.
inline HermitianOperator build_hamiltonian(const ModelSpec& spec) {
  const std::size_t dim = model_dimension(spec);
  if (dim < 1) throw ValidationError("build_hamiltonian: dimension must be >= 1");
  require_within_cap(dim, "build_hamiltonian(" + model_name(spec) + ")");
  return std::visit(
      [](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, IsingChain>) {
          if (m.sites < 1) throw ValidationError("ising: sites must be >= 1");
          return HermitianOperator(detail::ising_matrix(m));
        } else if constexpr (std::is_same_v<M, XxzChain>) {
          if (m.sites < 1) throw ValidationError("xxz: sites must be >= 1");
          return HermitianOperator(detail::xxz_matrix(m));
        } else {
          return HermitianOperator(detail::random_hermitian_matrix(m));
        }
      },
      spec);
}

}  // namespace huo
