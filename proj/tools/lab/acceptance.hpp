#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdint>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "huo/huo.hpp"

namespace huo::lab {

struct Metric {
  std::string name;
  double value = 0.0;
};

struct CheckResult {
  int id = 0;
  std::string name;
  bool pass = false;
  double seconds = 0.0;
  double time_limit = 0.0;
  std::string detail;
  std::vector<Metric> metrics;
};

struct AcceptanceContext {
  std::uint64_t seed = 20240611;
  std::map<std::string, double> tol;

  double t(const std::string& name) const {
    const auto it = tol.find(name);
    if (it == tol.end()) throw ValidationError("unknown tolerance '" + name + "'");
    return it->second;
  }
  std::uint64_t sub(std::string_view name, std::uint64_t index = 0) const { return derive_seed(seed, name, index); }
};

namespace acceptance_detail {

inline std::string fmt(double x) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << x;
  return os.str();
}

/// Chaotic Ising parameters (transverse plus longitudinal field).
inline IsingChain chaotic_ising(unsigned sites) { return IsingChain{sites, 1.0, 0.9045, 0.8090}; }

inline CMatrix pauli_x() {
  CMatrix m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}
inline CMatrix pauli_z() {
  CMatrix m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

/// Pure state with <T> = e0 exactly: a path between a state below and one
/// above e0, bisected on the mixing angle.
inline CVector feasible_state(const SpectralDecomposition& spec, const CMatrix& t, double e0, Rng& rng) {
  const Index d = spec.dim();
  const double scale = std::max(spec.spectral_range(), 1e-12);
  auto tilted = [&](double sign) {
    for (double kappa = 0.5;; kappa *= 2.0) {
      CVector c(d);
      for (Index a = 0; a < d; ++a) c(a) = rng.complex_normal() * std::exp(-sign * kappa * (spec.eigenvalues(a) - e0) / scale);
      c.normalize();
      const double e = c.cwiseAbs2().dot(spec.eigenvalues);
      if ((sign > 0 && e < e0) || (sign < 0 && e > e0)) return CVector(spec.eigenvectors * c);
      if (kappa > 1e6) throw NumericError("feasible_state: cannot bracket E0");
    }
  };
  const CVector a = tilted(1.0);
  const CVector b = tilted(-1.0) * std::polar(1.0, rng.phase());
  auto energy = [&](double th) {
    CVector x = std::cos(th) * a + std::sin(th) * b;
    x.normalize();
    return std::pair{x.dot(t * x).real(), x};
  };
  double lo = 0.0;
  double hi = 0.5 * kPi;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (energy(mid).first < e0) lo = mid;
    else hi = mid;
  }
  return energy(0.5 * (lo + hi)).second;
}

inline RVector evolved_distribution(const QuantumState& state, const SpectralDecomposition& spec,
                                    const Observable& obs, double t) {
  CMatrix comps(state.dim(), state.components().cols());
  for (Index n = 0; n < comps.cols(); ++n) comps.col(n) = Evolver(spec, state.components().col(n)).at(t);
  const RVector w = (obs.basis().adjoint() * comps).cwiseAbs2() * state.weights();
  RVector p(obs.sector_count());
  for (Index j = 0; j < obs.sector_count(); ++j) p(j) = w.segment(obs.sector_begin(j), obs.multiplicity(j)).sum();
  return p;
}

inline Observable random_observable(Index d, Rng& rng) {
  const CMatrix basis = haar_unitary(d, rng);
  const Index sectors = 2 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(d - 1)));
  std::vector<Index> mult(static_cast<std::size_t>(sectors), 1);
  for (Index extra = d - sectors; extra > 0; --extra) mult[rng.below(static_cast<std::uint64_t>(sectors))] += 1;
  std::vector<double> values;
  for (Index j = 0; j < sectors; ++j) values.push_back(rng.normal());
  return make_huo(basis, SpectrumAssignment::custom(values, mult));
}

inline QuantumState random_mixed_state(Index d, Index rank, Rng& rng) {
  const CMatrix g = rng.gaussian_matrix(d, rank);
  CMatrix rho = g * g.adjoint();
  rho /= rho.trace().real();
  rho = 0.5 * (rho + rho.adjoint());
  return QuantumState::mixed(rho);
}

}  // namespace acceptance_detail

// ---------------------------------------------------------------------------

inline CheckResult check_mub_completeness(const AcceptanceContext& ctx) {
  CheckResult r{1, "mub_family_completeness"};
  r.time_limit = 5.0;
  double worst = 0.0;
  bool sizes_ok = true;
  for (Index d : {2, 3, 4, 5, 7, 8, 16}) {
    const auto fam = generate_mub_family(d);
    if (fam.size() != static_cast<std::size_t>(d) + 1) sizes_ok = false;
    std::vector<CMatrix> bases;
    for (std::size_t i = 0; i < fam.size(); ++i) bases.push_back(fam.basis_matrix(i));
    for (std::size_t i = 0; i < bases.size(); ++i)
      for (std::size_t j = i + 1; j < bases.size(); ++j) worst = std::max(worst, unbiasedness_deviation(bases[i], bases[j]));
  }
  r.metrics = {{"max_deviation", worst}};
  r.pass = sizes_ok && worst <= ctx.t("mub_deviation");
  r.detail = "max pairwise deviation " + acceptance_detail::fmt(worst) + (sizes_ok ? "" : ", wrong family size");
  return r;
}

inline CheckResult check_diagonal_constancy(const AcceptanceContext& ctx) {
  CheckResult r{2, "huo_diagonal_constancy"};
  r.time_limit = 30.0;
  double worst = 0.0;
  auto run = [&](const HermitianOperator& h) {
    const auto spec = spectral_decompose(h);
    const auto hub = hub_from_hamiltonian(spec, FourierMethod{});
    const auto obs = make_huo(hub, SpectrumAssignment::degenerate(spec.dim(), std::min<Index>(4, spec.dim())));
    worst = std::max(worst, diagonal_constancy(matrix_elements(obs, spec), obs).max_deviation);
  };
  for (unsigned n = 3; n <= 8; ++n) run(build_hamiltonian(acceptance_detail::chaotic_ising(n)));
  for (std::size_t d : {64, 256, 1024}) run(build_hamiltonian(RandomHermitian{d, ctx.sub("acceptance.2", d)}));
  r.metrics = {{"max_deviation", worst}};
  r.pass = worst <= ctx.t("diagonal_constancy");
  r.detail = "max |O_aa - Tr O/D| = " + acceptance_detail::fmt(worst);
  return r;
}

inline CheckResult check_offdiag_scaling(const AcceptanceContext& ctx) {
  CheckResult r{3, "offdiag_scaling"};
  r.time_limit = 120.0;
  const std::vector<Index> dims = {64, 128, 256, 512, 1024, 2048};
  const auto fit = offdiag_scaling(
      dims, [&](Index d) { return build_hamiltonian(RandomHermitian{static_cast<std::size_t>(d), ctx.sub("acceptance.3", static_cast<std::uint64_t>(d))}); },
      [](Index d) { return SpectrumAssignment::degenerate(d, 4); }, RandomHadamardMethod{ctx.sub("acceptance.3.hub")},
      ctx.sub("acceptance.3.pairs"));
  double worst_rel = 0.0;
  for (const auto& p : fit.points) {
    worst_rel = std::max({worst_rel, std::abs(p.std_re / p.predicted - 1.0), std::abs(p.std_im / p.predicted - 1.0)});
    r.metrics.push_back({"std_re/pred@" + std::to_string(p.dim), p.std_re / p.predicted});
    r.metrics.push_back({"std_im/pred@" + std::to_string(p.dim), p.std_im / p.predicted});
  }
  r.metrics.push_back({"slope", fit.fit.slope});
  r.metrics.push_back({"worst_relative_std_error", worst_rel});
  r.pass = !fit.degenerate_data && fit.fit.slope >= -0.6 && fit.fit.slope <= -0.4 && worst_rel <= ctx.t("std_relative");
  r.detail = "slope " + acceptance_detail::fmt(fit.fit.slope) + ", worst |std/pred - 1| = " + acceptance_detail::fmt(worst_rel);
  return r;
}

inline CheckResult check_phase_uniformity(const AcceptanceContext& ctx) {
  CheckResult r{4, "phase_uniformity"};
  r.time_limit = 30.0;
  const auto spec = spectral_decompose(build_hamiltonian(RandomHermitian{256, ctx.sub("acceptance.4")}));
  const auto hub = hub_from_hamiltonian(spec, FourierMethod{});
  const auto rep = phase_uniformity(phase_table(hub, spec), random_pairs(256, 100, ctx.sub("acceptance.4.pairs")));
  r.metrics = {{"pass_fraction", rep.pass_fraction}};
  r.pass = rep.pass;
  r.detail = "KS pass fraction " + acceptance_detail::fmt(rep.pass_fraction) + " over 100 pairs";
  return r;
}

inline CheckResult check_entropic_uncertainty(const AcceptanceContext& ctx) {
  CheckResult r{5, "entropic_uncertainty"};
  r.time_limit = 30.0;
  double min_slack = 1e300;
  double min_ratio = 1e300;
  std::size_t narrow = 0;
  for (Index d : {4, 16, 64}) {
    const auto spec = spectral_decompose(build_hamiltonian(RandomHermitian{static_cast<std::size_t>(d), ctx.sub("acceptance.5", static_cast<std::uint64_t>(d))}));
    const auto hub = hub_from_hamiltonian(spec, FourierMethod{});
    Rng rng(ctx.sub("acceptance.5.states", static_cast<std::uint64_t>(d)));
    for (int k = 0; k < 1000; ++k) {
      const auto psi = QuantumState::pure_normalized(rng.random_state(d));
      min_slack = std::min(min_slack, entropic_uncertainty_check(psi, spec.eigenvectors, hub.columns).slack);
    }
    // Near-eigenstates: dominant weight on one level, random admixture.
    const double log_d = std::log(static_cast<double>(d));
    for (int k = 0; k < 200; ++k) {
      const Index alpha = static_cast<Index>(rng.below(static_cast<std::uint64_t>(d)));
      CVector c = rng.random_state(d);
      c(alpha) = 0.0;
      c.normalize();
      const double eta = std::pow(10.0, -1.0 - 5.0 * rng.uniform());
      c *= std::sqrt(eta);
      c(alpha) = std::sqrt(1.0 - eta);
      const auto psi = QuantumState::pure_normalized(spec.eigenvectors * c);
      const auto rep = narrow_energy_entropy_bound(psi, spec, hub);
      if (!rep.narrow_regime) continue;
      ++narrow;
      min_ratio = std::min(min_ratio, rep.hub_entropy / log_d);
    }
  }
  r.metrics = {{"min_slack", min_slack}, {"min_hub_entropy_ratio", min_ratio}, {"narrow_states", static_cast<double>(narrow)}};
  r.pass = min_slack >= -ctx.t("uncertainty") && narrow > 0 && min_ratio >= 0.9;
  r.detail = "min slack " + acceptance_detail::fmt(min_slack) + ", min H_HUB/log D " + acceptance_detail::fmt(min_ratio) +
             " over " + std::to_string(narrow) + " narrow states";
  return r;
}

inline CheckResult check_equilibrium_eigenstate(const AcceptanceContext& ctx) {
  CheckResult r{6, "equilibrium_at_eigenstate"};
  r.time_limit = 10.0;
  const auto t = build_hamiltonian(acceptance_detail::chaotic_ising(4));
  const auto spec = spectral_decompose(t);
  const auto obs = make_huo(hub_from_hamiltonian(spec, FourierMethod{}), SpectrumAssignment::degenerate(16, 4));
  double ee1 = 0.0;
  double ee2 = 0.0;
  double uniform = 0.0;
  for (Index a = 0; a < spec.dim(); ++a) {
    const auto psi = QuantumState::pure_normalized(spec.eigenvectors.col(a));
    const auto rep = ee_residuals(psi, obs, t);
    ee1 = std::max(ee1, rep.ee1_residual);
    ee2 = std::max(ee2, rep.ee2_max);
    const auto cd = constant_distribution_check(spec.eigenvectors.col(a), t, obs);
    for (Index j = 0; j < obs.sector_count(); ++j)
      uniform = std::max(uniform, std::abs(cd.distribution.probabilities(j) - 1.0 / static_cast<double>(obs.sector_count())));
  }
  r.metrics = {{"ee1", ee1}, {"ee2", ee2}, {"uniform_deviation", uniform}};
  r.pass = ee1 <= ctx.t("ee1") && ee2 <= ctx.t("ee2") && uniform <= ctx.t("uniform_sectors");
  r.detail = "ee1 " + acceptance_detail::fmt(ee1) + ", ee2 " + acceptance_detail::fmt(ee2) + ", |p - 1/D1| " +
             acceptance_detail::fmt(uniform);
  return r;
}

inline CheckResult check_stationarity(const AcceptanceContext& ctx) {
  using namespace acceptance_detail;
  CheckResult r{7, "stationarity_derivative"};
  r.time_limit = 20.0;
  double worst_rel = 0.0;
  double worst_commuting = 0.0;
  const double h = 1e-6;
  const Index dims[] = {4, 8, 16, 32, 64};
  for (int i = 0; i < 50; ++i) {
    const Index d = dims[i % 5];
    Rng rng(ctx.sub("acceptance.7", static_cast<std::uint64_t>(i)));
    const auto t = build_hamiltonian(RandomHermitian{static_cast<std::size_t>(d), ctx.sub("acceptance.7.h", static_cast<std::uint64_t>(i))});
    const auto spec = spectral_decompose(t);
    const auto obs = random_observable(d, rng);
    const QuantumState state = (i % 2 == 0) ? QuantumState::pure_normalized(rng.random_state(d))
                                            : random_mixed_state(d, 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(d))), rng);
    const RVector analytic = distribution_time_derivative(state, obs, t);
    const RVector fd = (evolved_distribution(state, spec, obs, h) - evolved_distribution(state, spec, obs, -h)) / (2.0 * h);
    const double scale = std::max(analytic.cwiseAbs().maxCoeff(), 1e-12);
    worst_rel = std::max(worst_rel, (analytic - fd).cwiseAbs().maxCoeff() / scale);

    // Dephased version of the same state commutes with T.
    const RVector w = (spec.eigenvectors.adjoint() * state.components()).cwiseAbs2() * state.weights();
    const auto dephased = QuantumState::ensemble(w / w.sum(), spec.eigenvectors);
    worst_commuting = std::max(worst_commuting, distribution_time_derivative(dephased, obs, t).cwiseAbs().maxCoeff());
  }
  r.metrics = {{"worst_relative_error", worst_rel}, {"worst_commuting_derivative", worst_commuting}};
  r.pass = worst_rel <= ctx.t("derivative_relative") && worst_commuting <= ctx.t("commuting_derivative");
  r.detail = "max rel. error " + fmt(worst_rel) + ", max |dp/dt| for [rho,T]=0: " + fmt(worst_commuting);
  return r;
}

inline CheckResult check_maximizer(const AcceptanceContext& ctx) {
  using namespace acceptance_detail;
  CheckResult r{8, "maximizer_linear_relation"};
  r.time_limit = 120.0;
  // Single qubit, T = sigma_z: the feasible set at energy E0 is one circle of
  // the Bloch sphere, scanned with 10^4 points.
  struct QubitCase {
    double tilt;  // O = cos(tilt) Z + sin(tilt) X
    double e0;
  };
  const QubitCase cases[] = {{0.5 * kPi, 0.0}, {0.0, -1.0}, {0.5 * kPi, -1.0}, {0.7, 0.3}, {1.2, -0.45}};
  const HermitianOperator tz(pauli_z());
  double worst_oracle = 0.0;
  for (const auto& c : cases) {
    const HermitianOperator o_op(std::cos(c.tilt) * pauli_z() + std::sin(c.tilt) * pauli_x());
    const auto obs = Observable::from_operator(o_op);
    const auto res = maximize_entropy(obs, tz, c.e0, MaximizeOptions{.seed = ctx.sub("acceptance.8.qubit")});
    const double theta = std::acos(std::clamp(c.e0, -1.0, 1.0));
    double best = 0.0;
    for (int k = 0; k < 10000; ++k) {
      const double phi = kTwoPi * k / 10000.0;
      CVector psi(2);
      psi << std::cos(0.5 * theta), std::polar(std::sin(0.5 * theta), phi);
      best = std::max(best, shannon_entropy(eigenvalue_distribution(QuantumState::pure(psi), obs)));
    }
    worst_oracle = std::max(worst_oracle, std::abs(res.entropy - best));
  }

  const auto t = build_hamiltonian(chaotic_ising(4));
  const auto spec = spectral_decompose(t);
  const auto obs = make_huo(hub_from_hamiltonian(spec, FourierMethod{}), SpectrumAssignment::nondegenerate(16));
  double worst_gap = 0.0;
  double worst_excess = -1e300;
  double worst_constraint = 0.0;
  for (int k = 0; k < 5; ++k) {
    const double e0 = spec.eigenvalues(0) + spec.spectral_range() * (k + 1) / 6.0;
    const auto res = maximize_entropy(obs, t, e0, MaximizeOptions{.seed = ctx.sub("acceptance.8.ising", static_cast<std::uint64_t>(k))});
    worst_gap = std::max(worst_gap, res.report.linear_relation_gap);
    worst_constraint = std::max({worst_constraint, std::abs(res.constraints.energy), std::abs(res.constraints.normalization)});
    Rng rng(ctx.sub("acceptance.8.feasible", static_cast<std::uint64_t>(k)));
    for (int s = 0; s < 200; ++s) {
      const CVector x = feasible_state(spec, t.matrix(), e0, rng);
      const double h = shannon_entropy(eigenvalue_distribution(QuantumState::pure_normalized(x), obs));
      worst_excess = std::max(worst_excess, h - res.entropy);
    }
  }
  r.metrics = {{"worst_oracle_gap", worst_oracle}, {"worst_linear_gap", worst_gap}, {"worst_sample_excess", worst_excess},
               {"worst_constraint", worst_constraint}};
  r.pass = worst_oracle <= ctx.t("entropy_oracle") && worst_gap <= ctx.t("linear_gap") &&
           worst_excess <= ctx.t("maximality") && worst_constraint <= 1e-8;
  r.detail = "oracle gap " + fmt(worst_oracle) + ", linear gap " + fmt(worst_gap) + ", best sample excess " + fmt(worst_excess);
  return r;
}

inline CheckResult check_min_entropy(const AcceptanceContext& ctx) {
  CheckResult r{9, "min_entropy_identity"};
  r.time_limit = 20.0;
  double worst_eq = 0.0;
  double worst_margin = 1e300;
  for (Index d : {4, 8, 16}) {
    for (int k = 0; k < 5; ++k) {
      Rng rng(ctx.sub("acceptance.9", static_cast<std::uint64_t>(d * 100 + k)));
      const auto state = acceptance_detail::random_mixed_state(d, 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(d))), rng);
      const auto rep = min_entropy_identity_check(state, 200, ctx.sub("acceptance.9.bases", static_cast<std::uint64_t>(d * 100 + k)));
      worst_eq = std::max(worst_eq, std::abs(rep.eigenbasis_entropy - rep.von_neumann));
      worst_margin = std::min(worst_margin, rep.margin);
    }
  }
  r.metrics = {{"eigenbasis_gap", worst_eq}, {"min_margin", worst_margin}};
  r.pass = worst_eq <= ctx.t("entropy_identity") && worst_margin >= -ctx.t("entropy_identity");
  r.detail = "|H_eig - S_vN| " + acceptance_detail::fmt(worst_eq) + ", min(H_random - S_vN) " + acceptance_detail::fmt(worst_margin);
  return r;
}

inline CheckResult check_gibbs(const AcceptanceContext& ctx) {
  CheckResult r{10, "gibbs_identity"};
  r.time_limit = 5.0;
  double worst = 0.0;
  for (std::size_t d : {2, 8, 64}) {
    const auto spec = spectral_decompose(build_hamiltonian(RandomHermitian{d, ctx.sub("acceptance.10", d)}));
    for (double beta : {0.0, 0.1, 1.0, 10.0}) {
      const auto g = gibbs_state(spec, beta);
      worst = std::max(worst, std::abs(von_neumann_entropy(g.state) - (g.log_partition + beta * g.energy)));
    }
  }
  r.metrics = {{"max_gap", worst}};
  r.pass = worst <= ctx.t("gibbs");
  r.detail = "max |S_vN - log Z - beta E0| = " + acceptance_detail::fmt(worst);
  return r;
}

inline CheckResult check_thermalization(const AcceptanceContext& ctx) {
  using namespace acceptance_detail;
  CheckResult r{11, "thermalization_dynamics"};
  r.time_limit = 180.0;
  const auto t = build_hamiltonian(chaotic_ising(8));
  const auto spec = spectral_decompose(t);
  const Index d = spec.dim();
  const auto hub = hub_from_hamiltonian(spec, RandomHadamardMethod{ctx.sub("acceptance.11.hub")});
  const auto obs = make_huo(hub, SpectrumAssignment::degenerate(d, 4, {1.0, 2.0, 3.0, 4.0}));
  const double center = 0.5 * (spec.eigenvalues(0) + spec.eigenvalues(d - 1));
  const auto shell = make_energy_shell(spec, center, std::nullopt, 15);
  const auto psi1 = narrow_energy_state(spec, shell, UniformPhaseProfile{}, ctx.sub("acceptance.11.psi", 1));
  const auto psi2 = narrow_energy_state(spec, shell, GaussianProfile{shell.width / 4.0}, ctx.sub("acceptance.11.psi", 2));
  const CMatrix o = energy_basis_matrix(obs, spec);
  const auto de1 = de_equals_mc_for_huo(psi1.state.vector(), spec, obs, shell);
  const auto de2 = de_equals_mc_for_huo(psi2.state.vector(), spec, obs, shell);

  // Uniform time average over [1e2, 1e4].
  const Evolver ev(spec, psi1.state.vector());
  const std::size_t samples = 4000;
  double avg = 0.0;
  for (std::size_t k = 0; k < samples; ++k) {
    const double tt = 1e2 + (1e4 - 1e2) * static_cast<double>(k) / static_cast<double>(samples - 1);
    const CVector c = ev.coefficients_at(tt);
    avg += c.dot(o * c).real();
  }
  avg /= static_cast<double>(samples);
  const double rel = std::abs(avg - de1.microcanonical) / std::abs(de1.microcanonical);

  std::vector<double> grid = {0.0};
  for (double x : log_time_grid()) grid.push_back(x);
  double min_hub = 1e300;
  double min_obs = 1e300;
  for (const auto* psi : {&psi1, &psi2}) {
    const auto tr = thermalization_trace(psi->state.vector(), spec, obs, grid, shell, hub.columns);
    min_hub = std::min(min_hub, *std::min_element(tr.hub_entropy.begin(), tr.hub_entropy.end()));
    min_obs = std::min(min_obs, *std::min_element(tr.entropy.begin(), tr.entropy.end()));
  }
  const double log_d = std::log(static_cast<double>(d));
  const double log_d1 = std::log(4.0);
  const double de_gap = std::max(de1.gap, de2.gap);
  const double pair_gap = std::abs(de1.diagonal_ensemble - de2.diagonal_ensemble);
  r.metrics = {{"shell_levels", static_cast<double>(shell.size())},
               {"time_average_relative_error", rel},
               {"de_mc_gap", de_gap},
               {"initial_state_gap", pair_gap},
               {"min_hub_entropy_ratio", min_hub / log_d},
               {"min_observable_entropy_ratio", min_obs / log_d1}};
  r.pass = rel <= ctx.t("time_average_relative") && de_gap <= ctx.t("de_mc") && pair_gap <= ctx.t("de_mc") &&
           min_hub >= 0.9 * log_d && min_obs >= 0.9 * log_d1;
  r.detail = std::to_string(shell.size()) + " shell levels, time-average rel. error " + fmt(rel) + ", DE-MC gap " + fmt(de_gap) +
             ", min H_HUB/log D " + fmt(min_hub / log_d) + ", min H_O/log D1 " + fmt(min_obs / log_d1);
  return r;
}

inline CheckResult check_negative_controls(const AcceptanceContext& ctx) {
  CheckResult r{12, "negative_controls"};
  r.time_limit = 5.0;
  // Diagonal Hamiltonian on 6 qubits with a nondegenerate random spectrum, and
  // sigma^z of site 0, which is diagonal in the same basis.
  const Index d = 64;
  Rng rng(ctx.sub("acceptance.12"));
  CMatrix h = CMatrix::Zero(d, d);
  for (Index i = 0; i < d; ++i) h(i, i) = rng.normal();
  const auto spec = spectral_decompose(HermitianOperator(h));
  CMatrix z = CMatrix::Zero(d, d);
  for (Index i = 0; i < d; ++i) z(i, i) = (i & 1) ? -1.0 : 1.0;
  const auto obs = Observable::from_operator(HermitianOperator(z));
  const auto dc = diagonal_constancy(matrix_elements(obs, spec), obs);
  const auto pu = phase_uniformity_unchecked(obs.basis(), spec, random_pairs(d, 100, ctx.sub("acceptance.12.pairs")));
  r.metrics = {{"diagonal_max_deviation", dc.max_deviation}, {"phase_pass_fraction", pu.pass_fraction}};
  r.pass = !dc.pass && !pu.pass;
  r.detail = std::string("diagonal constancy ") + (dc.pass ? "passed (unexpected)" : "failed as required") +
             " (max dev " + acceptance_detail::fmt(dc.max_deviation) + "), phase uniformity " +
             (pu.pass ? "passed (unexpected)" : "failed as required");
  return r;
}

// ---------------------------------------------------------------------------

using CheckFn = CheckResult (*)(const AcceptanceContext&);

inline const std::vector<CheckFn>& acceptance_checks() {
  static const std::vector<CheckFn> checks = {
      check_mub_completeness, check_diagonal_constancy, check_offdiag_scaling, check_phase_uniformity,
      check_entropic_uncertainty, check_equilibrium_eigenstate, check_stationarity, check_maximizer,
      check_min_entropy, check_gibbs, check_thermalization, check_negative_controls};
  return checks;
}

/// Runs one criterion (1-based), timing it; exceptions become failures.
inline CheckResult run_check(int id, const AcceptanceContext& ctx) {
  const auto& checks = acceptance_checks();
  if (id < 1 || id > static_cast<int>(checks.size())) throw ValidationError("no acceptance criterion " + std::to_string(id));
  const auto start = std::chrono::steady_clock::now();
  CheckResult r;
  try {
    r = checks[static_cast<std::size_t>(id - 1)](ctx);
  } catch (const std::exception& e) {
    r.id = id;
    r.name = "criterion_" + std::to_string(id);
    r.pass = false;
    r.detail = std::string("error: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (r.time_limit > 0.0 && r.seconds > r.time_limit) {
    r.pass = false;
    r.detail += "; runtime " + acceptance_detail::fmt(r.seconds) + " s exceeds " + acceptance_detail::fmt(r.time_limit) + " s";
  }
  return r;
}

inline std::string format_check_line(const CheckResult& r) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "[%s] #%-2d %-28s %7.2fs  ", r.pass ? "PASS" : "FAIL", r.id, r.name.c_str(), r.seconds);
  return buf + r.detail;
}

}  // namespace huo::lab
