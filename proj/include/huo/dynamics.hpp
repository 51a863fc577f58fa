#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "huo/entropy.hpp"
#include "huo/equilibrium.hpp"
#include "huo/rng.hpp"
#include "huo/spectral.hpp"
#include "huo/state.hpp"

namespace huo {

/// Caches c_alpha = <E_alpha|psi0>; psi(t) = sum_alpha c_alpha e^{-i E_alpha t} |E_alpha>.
class Evolver {
 public:
  Evolver(const SpectralDecomposition& spec, const CVector& psi0) : spec_(&spec) {
    require_same_dim(spec.dim(), psi0.size(), "evolve");
    coeffs_ = spec.eigenvectors.adjoint() * psi0;
  }

  const CVector& energy_coefficients() const noexcept { return coeffs_; }

  /// Coefficients in the energy basis at time t.
  CVector coefficients_at(double t) const {
    CVector c(coeffs_.size());
    for (Index a = 0; a < c.size(); ++a) c(a) = coeffs_(a) * std::polar(1.0, -spec_->eigenvalues(a) * t);
    return c;
  }

  CVector at(double t) const { return spec_->eigenvectors * coefficients_at(t); }

 private:
  const SpectralDecomposition* spec_;
  CVector coeffs_;
};

inline QuantumState evolve(const QuantumState& psi0, const SpectralDecomposition& spec, double t) {
  return QuantumState::pure_normalized(Evolver(spec, psi0.vector()).at(t));
}

// ---------------------------------------------------------------------------

struct UniformPhaseProfile {};

struct GaussianProfile {
  double sigma = 1.0;
};

using ShellProfile = std::variant<UniformPhaseProfile, GaussianProfile>;

struct NarrowEnergyState {
  QuantumState state;
  RVector weights;  // |c_alpha|^2 over the full spectrum
  double energy_entropy = 0.0;
};

/// Pure state supported on the shell members with weights set by the profile
/// (flat, or Gaussian in E - E0) and independent uniform phases.
inline NarrowEnergyState narrow_energy_state(const SpectralDecomposition& spec, const EnergyShell& shell,
                                             const ShellProfile& profile, std::uint64_t seed) {
  if (shell.members.empty()) throw ValidationError("narrow_energy_state: empty shell");
  RVector w = RVector::Zero(spec.dim());
  for (Index a : shell.members) {
    if (a < 0 || a >= spec.dim()) throw ValidationError("narrow_energy_state: shell member out of range");
    if (const auto* g = std::get_if<GaussianProfile>(&profile)) {
      if (!(g->sigma > 0.0)) throw ValidationError("narrow_energy_state: sigma must be positive");
      const double x = (spec.eigenvalues(a) - shell.center) / g->sigma;
      w(a) = std::exp(-0.5 * x * x);
    } else {
      w(a) = 1.0;
    }
  }
  if (!(w.sum() > 0.0)) throw NumericError("narrow_energy_state: profile vanishes on every member");
  w /= w.sum();
  Rng rng(derive_seed(seed, "dynamics.narrow_state"));
  CVector c = CVector::Zero(spec.dim());
  for (Index a : shell.members) c(a) = std::polar(std::sqrt(w(a)), rng.phase());
  CVector psi = spec.eigenvectors * c;
  NarrowEnergyState out{QuantumState::pure_normalized(psi), w, shannon_entropy(w)};
  return out;
}

struct MicrocanonicalState {
  EnergyShell shell;
  QuantumState state;
};

inline MicrocanonicalState microcanonical_state(const SpectralDecomposition& spec, const EnergyShell& shell) {
  const auto k = static_cast<Index>(shell.members.size());
  if (k == 0) throw ValidationError("microcanonical_state: empty shell");
  CMatrix v(spec.dim(), k);
  for (Index i = 0; i < k; ++i) v.col(i) = spec.eigenvectors.col(shell.members[static_cast<std::size_t>(i)]);
  return {shell, QuantumState::ensemble(RVector::Constant(k, 1.0 / static_cast<double>(k)), std::move(v))};
}

inline MicrocanonicalState microcanonical_state(const SpectralDecomposition& spec, double e0,
                                                std::optional<double> width = std::nullopt,
                                                std::size_t min_levels = 3) {
  return microcanonical_state(spec, make_energy_shell(spec, e0, width, min_levels));
}

struct DiagonalEnsemble {
  RVector weights;  // |c_alpha|^2
  QuantumState state;
};

inline DiagonalEnsemble diagonal_ensemble(const CVector& psi0, const SpectralDecomposition& spec) {
  require_same_dim(psi0.size(), spec.dim(), "diagonal_ensemble");
  RVector w = (spec.eigenvectors.adjoint() * psi0).cwiseAbs2();
  if (std::abs(w.sum() - 1.0) > 1e-10) throw ValidationError("diagonal_ensemble: initial state is not normalized");
  w /= w.sum();
  return {w, QuantumState::ensemble(w, spec.eigenvectors)};
}

/// Tr(O rho_DE) from the energy-basis diagonal of O.
inline double diagonal_ensemble_value(const RVector& weights, const CMatrix& energy_basis_matrix) {
  return weights.dot(energy_basis_matrix.diagonal().real());
}

/// Infinite-time average of <O(t)> including cross terms between degenerate
/// levels, which the diagonal ensemble alone would drop.
inline double infinite_time_average(const CVector& psi0, const SpectralDecomposition& spec,
                                    const CMatrix& energy_basis_matrix) {
  const CVector c = spec.eigenvectors.adjoint() * psi0;
  Complex total(0.0, 0.0);
  for (const auto& g : spec.groups)
    for (Index a : g)
      for (Index b : g) total += std::conj(c(a)) * c(b) * energy_basis_matrix(a, b);
  return total.real();
}

/// O_{alpha beta} = <E_alpha|O|E_beta>.
inline CMatrix energy_basis_matrix(const Observable& obs, const SpectralDecomposition& spec) {
  require_same_dim(obs.dim(), spec.dim(), "energy_basis_matrix");
  const CMatrix m = obs.basis().adjoint() * spec.eigenvectors;
  CMatrix o = m.adjoint() * obs.column_values().cast<Complex>().asDiagonal() * m;
  return 0.5 * (o + o.adjoint());
}

struct DeMcReport {
  double diagonal_ensemble = 0.0;  // Tr(O rho_DE)
  double microcanonical = 0.0;     // Tr(O rho_mc)
  double trace_over_dim = 0.0;     // Tr O / D
  double gap = 0.0;                // |DE - MC|
  double diagonal_constancy = 0.0;
  bool equal = false;              // gap <= 1e-10
};

inline DeMcReport de_equals_mc_for_huo(const CVector& psi0, const SpectralDecomposition& spec, const Observable& obs,
                                       const EnergyShell& shell) {
  const CMatrix o = energy_basis_matrix(obs, spec);
  DeMcReport r;
  r.trace_over_dim = obs.trace() / static_cast<double>(obs.dim());
  r.diagonal_constancy = (o.diagonal().real().array() - r.trace_over_dim).abs().maxCoeff();
  if (r.diagonal_constancy > 1e-8) {
    throw PreconditionError("de_equals_mc_for_huo: observable is not unbiased to the energy basis (diagonal spread " +
                            std::to_string(r.diagonal_constancy) + ")");
  }
  r.diagonal_ensemble = diagonal_ensemble_value(diagonal_ensemble(psi0, spec).weights, o);
  double mc = 0.0;
  for (Index a : shell.members) mc += o(a, a).real();
  r.microcanonical = mc / static_cast<double>(shell.members.size());
  r.gap = std::abs(r.diagonal_ensemble - r.microcanonical);
  r.equal = r.gap <= 1e-10;
  return r;
}

/// Shell centred on <psi0|T|psi0> with the default width (see shell_around).
inline DeMcReport de_equals_mc_for_huo(const CVector& psi0, const SpectralDecomposition& spec, const Observable& obs) {
  const double e = diagonal_ensemble(psi0, spec).weights.dot(spec.eigenvalues);
  return de_equals_mc_for_huo(psi0, spec, obs, shell_around(spec, e));
}

// ---------------------------------------------------------------------------

/// `points` logarithmically spaced times in [t_min, t_max] * unit.
inline std::vector<double> log_time_grid(std::size_t points = 200, double t_min = 1e-2, double t_max = 1e4,
                                         double unit = 1.0) {
  if (points < 2 || !(t_min > 0.0) || !(t_max > t_min)) {
    throw ValidationError("log_time_grid: need >= 2 points and 0 < t_min < t_max");
  }
  std::vector<double> t(points);
  const double a = std::log(t_min);
  const double b = std::log(t_max);
  for (std::size_t i = 0; i < points; ++i)
    t[i] = unit * std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(points - 1));
  return t;
}

struct ThermalizationTrace {
  std::vector<double> times;
  std::vector<double> expectation;  // <O(t)>
  std::vector<double> entropy;      // H_O(t)
  std::vector<double> tv_distance;  // TV(p(t), p_mc)
  std::vector<double> hub_entropy;  // H in the supplied HUB; empty if none given
  RVector microcanonical_distribution;
  double microcanonical_expectation = 0.0;
};

/// Expectation, entropy and distance from the microcanonical distribution of
/// O along the exact evolution of psi0.
inline ThermalizationTrace thermalization_trace(const CVector& psi0, const SpectralDecomposition& spec,
                                                const Observable& obs, const std::vector<double>& times,
                                                const EnergyShell& shell,
                                                const std::optional<CMatrix>& hub_columns = std::nullopt) {
  require_same_dim(psi0.size(), spec.dim(), "thermalization_trace");
  require_same_dim(obs.dim(), spec.dim(), "thermalization_trace");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1])) throw ValidationError("thermalization_trace: time grid must be strictly increasing");

  const Evolver ev(spec, psi0);
  const CMatrix m = obs.basis().adjoint() * spec.eigenvectors;
  std::optional<CMatrix> g;
  if (hub_columns) {
    require_same_dim(hub_columns->rows(), spec.dim(), "thermalization_trace");
    g = hub_columns->adjoint() * spec.eigenvectors;
  }
  const RVector lambda = obs.column_values();
  const auto mc = microcanonical_state(spec, shell);

  ThermalizationTrace tr;
  tr.times = times;
  tr.microcanonical_distribution = eigenvalue_distribution(mc.state, obs).probabilities;
  tr.microcanonical_expectation = tr.microcanonical_distribution.dot(obs.values());
  for (double t : times) {
    const CVector c = ev.coefficients_at(t);
    const RVector w = (m * c).cwiseAbs2();
    RVector p(obs.sector_count());
    for (Index j = 0; j < obs.sector_count(); ++j) p(j) = w.segment(obs.sector_begin(j), obs.multiplicity(j)).sum();
    tr.expectation.push_back(w.dot(lambda));
    tr.entropy.push_back(shannon_entropy(p));
    tr.tv_distance.push_back(0.5 * (p - tr.microcanonical_distribution).cwiseAbs().sum());
    if (g) tr.hub_entropy.push_back(shannon_entropy(RVector((*g * c).cwiseAbs2())));
  }
  return tr;
}

inline ThermalizationTrace thermalization_trace(const CVector& psi0, const SpectralDecomposition& spec,
                                                const Observable& obs, const std::vector<double>& times,
                                                const std::optional<CMatrix>& hub_columns = std::nullopt) {
  const double e = (spec.eigenvectors.adjoint() * psi0).cwiseAbs2().dot(spec.eigenvalues);
  return thermalization_trace(psi0, spec, obs, times, shell_around(spec, e), hub_columns);
}

/// Mean of <O(t)> over `samples` equally spaced times in [0, t_max).
inline double sampled_time_average(const CVector& psi0, const SpectralDecomposition& spec,
                                   const CMatrix& energy_basis_matrix, double t_max, std::size_t samples) {
  if (samples == 0) throw ValidationError("sampled_time_average: need at least one sample");
  const Evolver ev(spec, psi0);
  double total = 0.0;
  for (std::size_t k = 0; k < samples; ++k) {
    const CVector c = ev.coefficients_at(t_max * static_cast<double>(k) / static_cast<double>(samples));
    total += c.dot(energy_basis_matrix * c).real();
  }
  return total / static_cast<double>(samples);
}

}  // namespace huo
