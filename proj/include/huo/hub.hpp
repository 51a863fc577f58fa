#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "huo/linalg.hpp"
#include "huo/mub.hpp"
#include "huo/rng.hpp"
#include "huo/spectral.hpp"
#include "huo/state.hpp"

namespace huo {

// ---------------------------------------------------------------------------
// Construction methods. Every method produces a complex Hadamard matrix H
// (|H_{ak}|^2 = 1/D); the HUB is then V_E * H with V_E the energy eigenbasis.

struct FourierMethod {};

/// Basis `index` (1..D) of the complete MUB family; index 0 is the
/// computational basis, i.e. the energy basis itself, and is rejected.
struct MubFamilyMethod {
  std::size_t index = 1;
};

/// Fourier matrix dressed with random row and column phases and a random
/// column order.
struct RandomHadamardMethod {
  std::uint64_t seed = 0;
};

using HubMethod = std::variant<FourierMethod, MubFamilyMethod, RandomHadamardMethod>;

inline std::string method_name(const HubMethod& m) {
  return std::visit(
      [](const auto& v) -> std::string {
        using M = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<M, FourierMethod>) return "fourier";
        else if constexpr (std::is_same_v<M, MubFamilyMethod>) return "mub:" + std::to_string(v.index);
        else return "random-hadamard:" + std::to_string(v.seed);
      },
      m);
}

/// P_r diag(phases) F P_c with random permutations P_r, P_c; column phases
/// are then normalized.
inline CMatrix random_hadamard_matrix(Index dim, std::uint64_t seed) {
  require_within_cap(static_cast<std::size_t>(dim), "random_hadamard_matrix");
  Rng rng(derive_seed(seed, "hub.random_hadamard"));
  auto shuffled = [&rng, dim] {
    std::vector<Index> perm(static_cast<std::size_t>(dim));
    std::iota(perm.begin(), perm.end(), Index{0});
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    return perm;
  };
  const CMatrix f = fourier_matrix(dim);
  const auto row_perm = shuffled();
  const auto col_perm = shuffled();
  CMatrix out(dim, dim);
  for (Index r = 0; r < dim; ++r) {
    const Complex phase = std::polar(1.0, rng.phase());
    for (Index k = 0; k < dim; ++k) out(r, k) = phase * f(row_perm[static_cast<std::size_t>(r)], col_perm[static_cast<std::size_t>(k)]);
  }
  fix_column_phases(out);
  return out;
}

/// Complex Hadamard partner (unbiased to the computational basis).
inline CMatrix hadamard_partner(Index dim, const HubMethod& method) {
  return std::visit(
      [dim](const auto& v) -> CMatrix {
        using M = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<M, FourierMethod>) {
          return fourier_matrix(dim);
        } else if constexpr (std::is_same_v<M, MubFamilyMethod>) {
          const MubFamily fam = generate_mub_family(dim);
          if (v.index == 0 || v.index >= fam.size()) {
            throw ValidationError("mub_family method: index must be in [1, " + std::to_string(fam.size() - 1) +
                                  "]");
          }
          return fam.basis_matrix(v.index);
        } else {
          return random_hadamard_matrix(dim, v.seed);
        }
      },
      method);
}

/// Basis mutually unbiased with a Hamiltonian's eigenbasis.
struct HubBasis {
  CMatrix columns;
  std::string hamiltonian_id;
  std::string method;

  Index dim() const noexcept { return columns.rows(); }
};

/// max_{js, alpha} | |<j,s|E_alpha>|^2 - 1/D |
inline double hub_deviation(const CMatrix& hub_columns, const SpectralDecomposition& spec) {
  return unbiasedness_deviation(spec.eigenvectors, hub_columns);
}

inline HubBasis hub_from_hamiltonian(const SpectralDecomposition& spec, const HubMethod& method,
                                     std::string hamiltonian_id = {}) {
  const Index dim = spec.dim();
  HubBasis hub{spec.eigenvectors * hadamard_partner(dim, method), std::move(hamiltonian_id), method_name(method)};
  const double dev = hub_deviation(hub.columns, spec);
  if (dev > 1e-10) {
    throw NumericError("hub_from_hamiltonian: constructed basis deviates from unbiasedness by " +
                       std::to_string(dev));
  }
  return hub;
}

// ---------------------------------------------------------------------------

/// Eigenvalues assigned to consecutive blocks of HUB columns.
struct SpectrumAssignment {
  enum class Mode { nondegenerate, degenerate, custom };

  Mode mode = Mode::nondegenerate;
  std::vector<double> values;
  std::vector<Index> multiplicities;

  Index total() const { return std::accumulate(multiplicities.begin(), multiplicities.end(), Index{0}); }

  /// Symmetric integers 2j - (n-1): {-3,-1,1,3} for n = 4.
  static std::vector<double> symmetric_integers(Index n) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (Index j = 0; j < n; ++j) v[static_cast<std::size_t>(j)] = 2.0 * static_cast<double>(j) - static_cast<double>(n - 1);
    return v;
  }

  static SpectrumAssignment nondegenerate(Index dim, std::vector<double> values = {}) {
    if (values.empty()) values = symmetric_integers(dim);
    if (static_cast<Index>(values.size()) != dim) {
      throw ValidationError("nondegenerate spectrum: need exactly D values");
    }
    return {Mode::nondegenerate, std::move(values), std::vector<Index>(static_cast<std::size_t>(dim), 1)};
  }

  /// D1 distinct values, each with multiplicity D2 = D / D1.
  static SpectrumAssignment degenerate(Index dim, Index sectors, std::vector<double> values = {}) {
    if (sectors < 1 || dim % sectors != 0) {
      throw ValidationError("degenerate spectrum: D1 = " + std::to_string(sectors) + " must divide D = " +
                            std::to_string(dim));
    }
    if (values.empty()) values = symmetric_integers(sectors);
    if (static_cast<Index>(values.size()) != sectors) {
      throw ValidationError("degenerate spectrum: need exactly D1 values");
    }
    return {Mode::degenerate, std::move(values), std::vector<Index>(static_cast<std::size_t>(sectors), dim / sectors)};
  }

  static SpectrumAssignment custom(std::vector<double> values, std::vector<Index> multiplicities) {
    if (values.size() != multiplicities.size() || values.empty()) {
      throw ValidationError("custom spectrum: values and multiplicities must have equal nonzero length");
    }
    return {Mode::custom, std::move(values), std::move(multiplicities)};
  }

  /// Sectors of the degenerate mode (D1); 0 for other modes.
  Index degenerate_sectors() const { return mode == Mode::degenerate ? static_cast<Index>(values.size()) : 0; }
};

/// Observable diagonal in `basis` with the given spectrum. Column blocks are
/// taken in order; sectors are then sorted by value and equal values merged.
inline Observable make_huo(const CMatrix& basis, const SpectrumAssignment& spectrum) {
  const Index dim = basis.cols();
  if (spectrum.total() != dim) {
    throw ValidationError("make_huo: multiplicities sum to " + std::to_string(spectrum.total()) +
                          " but D = " + std::to_string(dim));
  }
  struct Block {
    double value;
    Index begin;
    Index size;
  };
  std::vector<Block> blocks;
  Index offset = 0;
  for (std::size_t i = 0; i < spectrum.values.size(); ++i) {
    if (spectrum.multiplicities[i] < 1) throw ValidationError("make_huo: multiplicity must be >= 1");
    blocks.push_back({spectrum.values[i], offset, spectrum.multiplicities[i]});
    offset += spectrum.multiplicities[i];
  }
  std::stable_sort(blocks.begin(), blocks.end(), [](const Block& a, const Block& b) { return a.value < b.value; });

  std::vector<double> values;
  std::vector<Index> mult;
  CMatrix ordered(basis.rows(), dim);
  Index col = 0;
  for (const auto& b : blocks) {
    if (values.empty() || b.value != values.back()) {
      values.push_back(b.value);
      mult.push_back(0);
    }
    mult.back() += b.size;
    ordered.middleCols(col, b.size) = basis.middleCols(b.begin, b.size);
    col += b.size;
  }
  return Observable(Eigen::Map<const RVector>(values.data(), static_cast<Index>(values.size())), std::move(mult),
                    std::move(ordered));
}

inline Observable make_huo(const HubBasis& basis, const SpectrumAssignment& spectrum) {
  return make_huo(basis.columns, spectrum);
}

// ---------------------------------------------------------------------------

/// theta_{js,alpha} = arg(sqrt(D) <j,s|E_alpha>), rows js (basis column
/// order), columns alpha.
struct PhaseTable {
  RMatrix theta;

  Index dim() const noexcept { return theta.rows(); }

  double omega(Index js, Index alpha, Index beta) const { return wrap_phase(theta(js, beta) - theta(js, alpha)); }

  RVector omegas(Index alpha, Index beta) const {
    RVector w(dim());
    for (Index k = 0; k < dim(); ++k) w(k) = omega(k, alpha, beta);
    return w;
  }
};

inline PhaseTable phase_table(const CMatrix& basis_columns, const SpectralDecomposition& spec) {
  require_same_dim(basis_columns.rows(), spec.dim(), "phase_table");
  const CMatrix ov = basis_columns.adjoint() * spec.eigenvectors;
  const double dev = (ov.cwiseAbs2().array() - 1.0 / static_cast<double>(spec.dim())).abs().maxCoeff();
  if (dev > 1e-8) {
    throw NotUnbiasedError("phase_table: | |<j,s|E_alpha>|^2 - 1/D | reaches " + std::to_string(dev) +
                           " (> 1e-8)");
  }
  PhaseTable t{RMatrix(ov.rows(), ov.cols())};
  for (Index a = 0; a < ov.cols(); ++a)
    for (Index k = 0; k < ov.rows(); ++k) t.theta(k, a) = wrap_phase(std::arg(ov(k, a)));
  return t;
}

inline PhaseTable phase_table(const HubBasis& hub, const SpectralDecomposition& spec) {
  return phase_table(hub.columns, spec);
}

/// O_{alpha beta} = (1/D) sum_{js} lambda_j exp(i omega_{js}^{alpha beta}),
/// evaluated from phases only.
inline CMatrix reconstruct_from_phases(const PhaseTable& phases, const RVector& column_values) {
  const Index dim = phases.dim();
  require_same_dim(dim, column_values.size(), "reconstruct_from_phases");
  CMatrix e(dim, dim);
  for (Index a = 0; a < dim; ++a)
    for (Index k = 0; k < dim; ++k) e(k, a) = std::polar(1.0, phases.theta(k, a));
  return (e.adjoint() * column_values.cast<Complex>().asDiagonal() * e) / static_cast<double>(dim);
}

}  // namespace huo
