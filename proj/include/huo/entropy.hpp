#pragma once

#include <cstdint>
#include <limits>
#include <span>

#include "huo/hub.hpp"
#include "huo/mub.hpp"
#include "huo/rng.hpp"
#include "huo/spectral.hpp"
#include "huo/state.hpp"

namespace huo {

/// Lower clamp on the argument of log; p <= 0 contributes nothing (0 log 0 = 0).
inline constexpr double kProbabilityFloor = 1e-12;

/// -sum p log p in nats.
inline double shannon_entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(std::max(v, kProbabilityFloor));
  return h;
}

inline double shannon_entropy(const RVector& p) { return shannon_entropy(std::span<const double>(p.data(), static_cast<std::size_t>(p.size()))); }

inline double shannon_entropy(const EigenvalueDistribution& d) { return shannon_entropy(d.probabilities); }

/// Entropy of the outcome distribution of a measurement in `basis`.
inline double basis_entropy(const QuantumState& state, const CMatrix& basis) {
  return shannon_entropy(basis_outcome_weights(state, basis));
}

inline double nats_to_bits(double nats) { return nats / std::log(2.0); }

/// -sum q log q over the state's spectrum. Eigenvalues in [-1e-10, 0) are
/// clamped; anything more negative is an invalid state.
inline double von_neumann_entropy(const QuantumState& state) {
  if (state.weights().minCoeff() < -1e-10) {
    throw ValidationError("von_neumann_entropy: state has eigenvalue < -1e-10");
  }
  return shannon_entropy(state.weights().cwiseMax(0.0));
}

/// Entropy of every Hamiltonian-unbiased resolution equals that of the
/// distribution over its columns, i.e. the nondegenerate HUO.
inline double energy_entropy(const QuantumState& state, const SpectralDecomposition& spec) {
  return basis_entropy(state, spec.eigenvectors);
}

// ---------------------------------------------------------------------------

struct MinEntropyReport {
  double von_neumann = 0.0;
  double eigenbasis_entropy = 0.0;
  double min_sampled = std::numeric_limits<double>::infinity();
  double margin = 0.0;  // min_sampled - von_neumann
  std::size_t trials = 0;
  bool eigenbasis_matches = false;  // |H_eig - S_vN| <= 1e-10
  bool bound_holds = false;         // every sampled H >= S_vN - 1e-10
};

/// Shannon entropy in the state's eigenbasis against entropies in Haar-random
/// bases; the former must equal S_vN and none of the latter may fall below.
inline MinEntropyReport min_entropy_identity_check(const QuantumState& state, std::size_t trials, std::uint64_t seed) {
  MinEntropyReport r;
  r.von_neumann = von_neumann_entropy(state);
  // Measure in a complete eigenbasis of rho (pure states only store one column).
  const CMatrix rho = state.density_matrix();
  const auto eig = spectral_decompose(HermitianOperator(0.5 * (rho + rho.adjoint())));
  r.eigenbasis_entropy = basis_entropy(state, eig.eigenvectors);
  r.trials = trials;
  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng(derive_seed(seed, "entropy.min_identity", t));
    const double h = basis_entropy(state, haar_unitary(state.dim(), rng));
    r.min_sampled = std::min(r.min_sampled, h);
  }
  r.margin = trials ? r.min_sampled - r.von_neumann : 0.0;
  r.eigenbasis_matches = std::abs(r.eigenbasis_entropy - r.von_neumann) <= 1e-10;
  r.bound_holds = trials == 0 || r.min_sampled >= r.von_neumann - 1e-10;
  return r;
}

// ---------------------------------------------------------------------------

/// rho_G = exp(-beta T) / Z.
struct GibbsState {
  double beta = 0.0;
  double log_partition = 0.0;
  double energy = 0.0;  // Tr(rho_G T)
  QuantumState state;
};

inline GibbsState gibbs_state(const SpectralDecomposition& spec, double beta) {
  if (!std::isfinite(beta)) throw ValidationError("gibbs_state: beta must be finite");
  const RVector& e = spec.eigenvalues;
  // Shift by the dominant eigenvalue so that every exponent is <= 0.
  const double ref = beta >= 0.0 ? e.minCoeff() : e.maxCoeff();
  RVector w = (-beta * (e.array() - ref)).exp().matrix();
  const double z_shifted = w.sum();
  w /= z_shifted;
  GibbsState g{beta, std::log(z_shifted) - beta * ref, w.dot(e), QuantumState::ensemble(w, spec.eigenvectors)};
  return g;
}

inline GibbsState gibbs_state(const HermitianOperator& hamiltonian, double beta) {
  return gibbs_state(spectral_decompose(hamiltonian), beta);
}

// ---------------------------------------------------------------------------

struct UncertaintyResult {
  double h1 = 0.0;
  double h2 = 0.0;
  double slack = 0.0;  // h1 + h2 - log D
};

/// H_B1 + H_B2 >= log D for a pure state and a mutually unbiased pair.
inline UncertaintyResult entropic_uncertainty_check(const QuantumState& psi, const CMatrix& b1, const CMatrix& b2) {
  if (!psi.is_pure()) throw PreconditionError("entropic_uncertainty_check: state must be pure");
  const double dev = unbiasedness_deviation(b1, b2);
  if (dev > 1e-8) {
    throw PreconditionError("entropic_uncertainty_check: bases are not mutually unbiased (deviation " +
                            std::to_string(dev) + ")");
  }
  UncertaintyResult r;
  r.h1 = basis_entropy(psi, b1);
  r.h2 = basis_entropy(psi, b2);
  r.slack = r.h1 + r.h2 - std::log(static_cast<double>(psi.dim()));
  return r;
}

inline UncertaintyResult entropic_uncertainty_check(const QuantumState& psi, const Basis& b1, const Basis& b2) {
  return entropic_uncertainty_check(psi, b1.columns(), b2.columns());
}

struct NarrowEnergyReport {
  double energy_entropy = 0.0;  // H_T
  double hub_entropy = 0.0;     // H_HUB
  double bound = 0.0;           // log D - H_T
  bool bound_holds = false;     // H_HUB >= bound - 1e-10
  bool narrow_regime = false;   // H_T <= 0.1 log D
};

inline NarrowEnergyReport narrow_energy_entropy_bound(const QuantumState& psi, const SpectralDecomposition& spec,
                                                      const CMatrix& hub_columns) {
  NarrowEnergyReport r;
  const double log_d = std::log(static_cast<double>(spec.dim()));
  r.energy_entropy = energy_entropy(psi, spec);
  r.hub_entropy = basis_entropy(psi, hub_columns);
  r.bound = log_d - r.energy_entropy;
  r.bound_holds = r.hub_entropy >= r.bound - 1e-10;
  r.narrow_regime = r.energy_entropy <= 0.1 * log_d;
  return r;
}

inline NarrowEnergyReport narrow_energy_entropy_bound(const QuantumState& psi, const SpectralDecomposition& spec,
                                                      const HubBasis& hub) {
  return narrow_energy_entropy_bound(psi, spec, hub.columns);
}

}  // namespace huo
