#pragma once

#include <Eigen/QR>

#include <algorithm>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <vector>

#include "huo/entropy.hpp"
#include "huo/rng.hpp"
#include "huo/spectral.hpp"
#include "huo/state.hpp"

namespace huo {

/// E_n(j,s) = <psi_n| Pi_{js} T |psi_n>; rows are (j,s) columns of the
/// observable's basis, columns are the state's eigenvectors n.
struct SectorEnergy {
  CMatrix values;

  /// sum_{j,s} E_n(j,s), which equals <psi_n|T|psi_n>.
  Complex total(Index n) const { return values.col(n).sum(); }
};

inline SectorEnergy sector_energies(const QuantumState& state, const Observable& obs, const HermitianOperator& t) {
  require_same_dim(state.dim(), obs.dim(), "sector_energies");
  require_same_dim(state.dim(), t.dim(), "sector_energies");
  const CMatrix d = obs.basis().adjoint() * state.components();
  const CMatrix td = obs.basis().adjoint() * (t.matrix() * state.components());
  return SectorEnergy{d.conjugate().cwiseProduct(td)};
}

struct LagrangeMultipliers {
  double normalization = 0.0;  // lambda_N
  double energy = 0.0;         // lambda_E
};

struct SupportEntry {
  Index n = 0;
  Index js = 0;
  double residual = 0.0;
};

struct EquilibriumReport {
  double ee1_residual = 0.0;             // max |Im E_n(j,s)| over the support
  std::vector<SupportEntry> ee2;         // one entry per support element
  double ee2_max = 0.0;
  LagrangeMultipliers multipliers;
  double entropy = 0.0;                  // H_O
  double energy = 0.0;                   // Tr(rho T)
  double linear_relation_gap = 0.0;      // |H_O - (1 - lambda_N) + lambda_E E0|
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> support_mask;  // rows js, cols n
};

/// Entries with weight q_n |D_js^(n)|^2 below this are outside the support.
inline constexpr double kSupportFloor = 1e-14;

namespace detail {

struct EquilibriumTerms {
  CMatrix amplitudes;  // D_js^(n)
  SectorEnergy energies;
  RVector sector_p;    // p(lambda_j)
  RVector column_p;    // p(lambda_j) repeated per (j,s)
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> support;
};

inline EquilibriumTerms equilibrium_terms(const QuantumState& state, const Observable& obs, const HermitianOperator& t) {
  EquilibriumTerms e;
  e.amplitudes = obs.basis().adjoint() * state.components();
  e.energies = sector_energies(state, obs, t);
  e.sector_p = eigenvalue_distribution(state, obs).probabilities;
  e.column_p.resize(obs.dim());
  for (Index j = 0; j < obs.sector_count(); ++j)
    e.column_p.segment(obs.sector_begin(j), obs.multiplicity(j)).setConstant(e.sector_p(j));
  const RVector& q = state.weights();
  e.support.resize(e.amplitudes.rows(), e.amplitudes.cols());
  for (Index n = 0; n < e.amplitudes.cols(); ++n)
    for (Index k = 0; k < e.amplitudes.rows(); ++k)
      e.support(k, n) = q(n) > kSupportFloor && std::norm(e.amplitudes(k, n)) > kSupportFloor;
  for (Index n = 0; n < e.amplitudes.cols(); ++n)
    for (Index k = 0; k < e.amplitudes.rows(); ++k)
      if (e.support(k, n) && !(e.column_p(k) > 0.0)) {
        throw NumericError("equilibrium: p(lambda) <= 0 on the support at row " + std::to_string(k));
      }
  return e;
}

}  // namespace detail

/// Least-squares fit of -|D|^2 log p = (1 - lambda_N)|D|^2 - lambda_E Re E
/// across the support. Rank-deficient systems get the minimum-norm solution.
inline LagrangeMultipliers fit_multipliers(const QuantumState& state, const Observable& obs, const HermitianOperator& t) {
  const auto e = detail::equilibrium_terms(state, obs, t);
  const Index rows = e.support.count();
  if (rows == 0) return {};
  Eigen::MatrixXd a(rows, 2);
  RVector b(rows);
  Index r = 0;
  for (Index n = 0; n < e.support.cols(); ++n)
    for (Index k = 0; k < e.support.rows(); ++k) {
      if (!e.support(k, n)) continue;
      const double w = std::norm(e.amplitudes(k, n));
      a(r, 0) = w;
      a(r, 1) = -e.energies.values(k, n).real();
      b(r) = -w * std::log(e.column_p(k));
      ++r;
    }
  const RVector x = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(a).solve(b);
  return {1.0 - x(0), x(1)};
}

inline double linear_relation_gap(double entropy, const LagrangeMultipliers& m, double energy) {
  return std::abs(entropy - (1.0 - m.normalization) + m.energy * energy);
}

inline EquilibriumReport ee_residuals(const QuantumState& state, const Observable& obs, const HermitianOperator& t,
                                      const LagrangeMultipliers& m) {
  const auto e = detail::equilibrium_terms(state, obs, t);
  EquilibriumReport rep;
  rep.multipliers = m;
  rep.support_mask = e.support;
  for (Index n = 0; n < e.support.cols(); ++n)
    for (Index k = 0; k < e.support.rows(); ++k) {
      if (!e.support(k, n)) continue;
      const double w = std::norm(e.amplitudes(k, n));
      const Complex en = e.energies.values(k, n);
      const double res = std::abs(-w * std::log(e.column_p(k)) - (1.0 - m.normalization) * w + m.energy * en);
      rep.ee1_residual = std::max(rep.ee1_residual, std::abs(en.imag()));
      rep.ee2.push_back({n, k, res});
      rep.ee2_max = std::max(rep.ee2_max, res);
    }
  rep.entropy = shannon_entropy(e.sector_p);
  rep.energy = expectation(state, t);
  rep.linear_relation_gap = linear_relation_gap(rep.entropy, m, rep.energy);
  return rep;
}

/// Multipliers fitted from the state itself, then residuals.
inline EquilibriumReport ee_residuals(const QuantumState& state, const Observable& obs, const HermitianOperator& t) {
  return ee_residuals(state, obs, t, fit_multipliers(state, obs, t));
}

/// dp(lambda_j)/dt = 2 sum_{n,s} q_n Im E_n(j,s), aligned with obs.values().
inline RVector distribution_time_derivative(const QuantumState& state, const Observable& obs,
                                            const HermitianOperator& t) {
  const SectorEnergy e = sector_energies(state, obs, t);
  const RVector per_column = e.values.imag() * state.weights();
  RVector out(obs.sector_count());
  for (Index j = 0; j < obs.sector_count(); ++j)
    out(j) = 2.0 * per_column.segment(obs.sector_begin(j), obs.multiplicity(j)).sum();
  return out;
}

// ---------------------------------------------------------------------------

/// Energy window I_0 = [E0 - delta/2, E0 + delta/2] and the levels inside it.
struct EnergyShell {
  double center = 0.0;
  double width = 0.0;
  std::vector<Index> members;

  std::size_t size() const noexcept { return members.size(); }
};

inline double default_shell_width(const SpectralDecomposition& spec) { return 0.05 * spec.spectral_range(); }

inline EnergyShell make_energy_shell(const SpectralDecomposition& spec, double center,
                                     std::optional<double> width = std::nullopt, std::size_t min_levels = 3) {
  const double w = width.value_or(default_shell_width(spec));
  if (!(w > 0.0)) throw ValidationError("energy shell: delta must be positive");
  EnergyShell shell{center, w, {}};
  const double slack = 1e-12 * std::max(1.0, spec.eigenvalues.cwiseAbs().maxCoeff());
  for (Index a = 0; a < spec.dim(); ++a)
    if (std::abs(spec.eigenvalues(a) - center) <= 0.5 * w + slack) shell.members.push_back(a);
  if (shell.members.size() < std::max<std::size_t>(min_levels, 1)) {
    throw ValidationError("energy shell: " + std::to_string(shell.members.size()) + " levels in [" +
                          std::to_string(center - 0.5 * w) + ", " + std::to_string(center + 0.5 * w) +
                          "], need at least " + std::to_string(std::max<std::size_t>(min_levels, 1)));
  }
  return shell;
}

/// Default-width shell around `center`, widened if needed to reach the
/// nearest level.
inline EnergyShell shell_around(const SpectralDecomposition& spec, double center) {
  const double nearest = (spec.eigenvalues.array() - center).abs().minCoeff();
  const double w = std::max(default_shell_width(spec), 2.0 * nearest * (1.0 + 1e-9));
  return make_energy_shell(spec, center, w > 0.0 ? w : 1.0, 1);
}

// ---------------------------------------------------------------------------

struct MaximizeOptions {
  std::size_t starts = 4;
  std::uint64_t seed = 0;
  std::size_t max_iterations = 100000;  // total inner iterations per start
  double gradient_tol = 1e-9;
  double constraint_tol = 1e-8;
  std::size_t history = 12;
};

struct MaximizeResult {
  QuantumState state;
  LagrangeMultipliers multipliers;
  EquilibriumReport report;
  EigenvalueDistribution distribution;
  ConstraintValues constraints;
  double entropy = 0.0;
  double penalty_multiplier = 0.0;  // final augmented-Lagrangian estimate (= -lambda_E)
  double gradient_norm = 0.0;
  std::size_t iterations = 0;
  bool support_collapse = false;
  std::vector<double> start_entropies;  // converged starts only
  double multistart_spread = 0.0;
  bool multistart_disagreement = false;  // spread > 1e-8
  double mixed_ansatz_entropy = 0.0;     // H_O of the Gibbs state with the same energy
};

namespace detail {

inline double rdot(const CVector& a, const CVector& b) { return a.dot(b).real(); }

/// Pure-state entropy problem in coordinates z: x = W z / |z| in the observable
/// basis, with an optional energy constraint handled by an augmented penalty.
struct EntropyProblem {
  const Observable* obs = nullptr;
  CMatrix w;   // D x k, orthonormal columns
  CMatrix tw;  // W^dagger T~ W, T~ = B^dagger T B
  CMatrix tt;  // T~
  double target = 0.0;
  bool constrained = true;

  double mu = 0.0;
  double rho = 10.0;

  struct Eval {
    double f = 0.0;
    double entropy = 0.0;
    double constraint = 0.0;
    CVector grad;
  };

  Eval operator()(const CVector& z) const {
    Eval ev;
    const double nz = z.norm();
    const CVector u = z / nz;
    const CVector x = w * u;
    RVector p = RVector::Zero(obs->sector_count());
    for (Index j = 0; j < obs->sector_count(); ++j)
      p(j) = x.segment(obs->sector_begin(j), obs->multiplicity(j)).squaredNorm();
    ev.entropy = shannon_entropy(p);
    CVector gx(x.size());
    for (Index j = 0; j < obs->sector_count(); ++j) {
      const double lg = std::log(std::max(p(j), 1e-300)) + 1.0;
      gx.segment(obs->sector_begin(j), obs->multiplicity(j)) = 2.0 * lg * x.segment(obs->sector_begin(j), obs->multiplicity(j));
    }
    CVector gu = w.adjoint() * gx;
    ev.f = -ev.entropy;
    if (constrained) {
      const CVector tu = tw * u;
      ev.constraint = rdot(u, tu) - target;
      ev.f += mu * ev.constraint + 0.5 * rho * ev.constraint * ev.constraint;
      gu += 2.0 * (mu + rho * ev.constraint) * tu;
    }
    ev.grad = (gu - u * rdot(u, gu)) / nz;
    return ev;
  }
};

struct InnerOutcome {
  std::size_t iterations = 0;
  double gradient_norm = 0.0;
};

/// L-BFGS with backtracking on the problem's current penalty parameters.
inline InnerOutcome lbfgs(const EntropyProblem& prob, CVector& z, double tol, std::size_t budget, std::size_t history) {
  std::deque<std::pair<CVector, CVector>> mem;
  auto ev = prob(z);
  InnerOutcome out;
  const double eps = std::numeric_limits<double>::epsilon();
  while (out.iterations < budget) {
    const double gnorm = ev.grad.norm();
    out.gradient_norm = gnorm;
    if (gnorm <= tol) break;

    CVector d = -ev.grad;
    if (!mem.empty()) {
      std::vector<double> alpha(mem.size());
      CVector q = ev.grad;
      for (std::size_t i = mem.size(); i-- > 0;) {
        const auto& [s, y] = mem[i];
        alpha[i] = rdot(s, q) / rdot(y, s);
        q -= alpha[i] * y;
      }
      const auto& [s_last, y_last] = mem.back();
      q *= rdot(s_last, y_last) / y_last.squaredNorm();
      for (std::size_t i = 0; i < mem.size(); ++i) {
        const auto& [s, y] = mem[i];
        const double beta = rdot(y, q) / rdot(y, s);
        q += (alpha[i] - beta) * s;
      }
      d = -q;
      if (rdot(d, ev.grad) >= 0.0) {
        mem.clear();
        d = -ev.grad;
      }
    }
    const double slope = rdot(ev.grad, d);
    double step = mem.empty() ? std::min(1.0, 0.1 * z.norm() / gnorm) : 1.0;
    bool accepted = false;
    EntropyProblem::Eval trial;
    CVector zt;
    for (int k = 0; k < 60; ++k) {
      zt = z + step * d;
      trial = prob(zt);
      const bool armijo = trial.f <= ev.f + 1e-4 * step * slope;
      // At the rounding floor f no longer resolves progress; fall back to
      // gradient decrease.
      const bool flat = trial.f - ev.f <= 16.0 * eps * (std::abs(ev.f) + 1.0) && trial.grad.norm() < gnorm;
      if (std::isfinite(trial.f) && (armijo || flat)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    ++out.iterations;
    if (!accepted) {
      if (mem.empty()) break;
      mem.clear();
      continue;
    }
    const CVector s = zt - z;
    const CVector y = trial.grad - ev.grad;
    if (rdot(s, y) > 1e-14 * s.norm() * y.norm()) {
      mem.emplace_back(s, y);
      if (mem.size() > history) mem.pop_front();
    }
    z = zt;
    ev = std::move(trial);
    const double nz = z.norm();
    if (nz > 4.0 || nz < 0.25) {
      z /= nz;
      ev = prob(z);
      mem.clear();
    }
  }
  out.gradient_norm = ev.grad.norm();
  return out;
}

struct StartOutcome {
  CVector x;
  double entropy = 0.0;
  double constraint = 0.0;
  double gradient_norm = 0.0;
  double mu = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

inline StartOutcome solve_from(EntropyProblem prob, CVector z, const MaximizeOptions& opt) {
  StartOutcome res;
  z /= z.norm();
  double prev_violation = std::numeric_limits<double>::infinity();
  const double inner_constraint_tol = 1e-2 * opt.constraint_tol;
  while (res.iterations < opt.max_iterations) {
    const auto inner = lbfgs(prob, z, opt.gradient_tol, opt.max_iterations - res.iterations, opt.history);
    res.iterations += std::max<std::size_t>(inner.iterations, 1);
    z /= z.norm();
    const auto ev = prob(z);
    res.gradient_norm = ev.grad.norm();
    res.constraint = ev.constraint;
    res.entropy = ev.entropy;
    if (!prob.constrained) {
      res.converged = res.gradient_norm <= opt.gradient_tol;
      break;
    }
    const double viol = std::abs(ev.constraint);
    if (viol <= inner_constraint_tol && res.gradient_norm <= opt.gradient_tol) {
      res.converged = true;
      break;
    }
    prob.mu += prob.rho * ev.constraint;
    if (viol > 0.25 * prev_violation) prob.rho = std::min(prob.rho * 10.0, 1e10);
    prev_violation = viol;
  }
  if (!res.converged && prob.constrained) {
    // The penalty loop may stop with a tight gradient but a marginally looser
    // constraint; accept anything within the public tolerance.
    res.converged = std::abs(res.constraint) <= opt.constraint_tol && res.gradient_norm <= opt.gradient_tol;
  }
  res.mu = prob.mu + prob.rho * res.constraint;
  res.x = prob.w * (z / z.norm());
  return res;
}

/// Gibbs weights over the spectrum with mean energy e0 (bisection in beta).
inline RVector gibbs_weights_at(const SpectralDecomposition& spec, double e0) {
  const double range = spec.spectral_range();
  if (range <= 0.0) return RVector::Constant(spec.dim(), 1.0 / static_cast<double>(spec.dim()));
  double lo = -2000.0 / range;
  double hi = 2000.0 / range;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (gibbs_state(spec, mid).energy > e0) lo = mid;
    else hi = mid;
  }
  return gibbs_state(spec, 0.5 * (lo + hi)).state.weights();
}

}  // namespace detail

/// Maximizes H_O over pure states with Tr rho = 1 and Tr(rho T) = E0.
inline MaximizeResult maximize_entropy(const Observable& obs, const HermitianOperator& t, double e0,
                                       const MaximizeOptions& opt = {}) {
  require_same_dim(obs.dim(), t.dim(), "maximize_entropy");
  if (opt.starts < 1) throw ValidationError("maximize_entropy: need at least one start");
  const auto spec = spectral_decompose(t);
  const double emin = spec.eigenvalues(0);
  const double emax = spec.eigenvalues(spec.dim() - 1);
  const double etol = 1e-10 * std::max(1.0, std::max(std::abs(emin), std::abs(emax)));
  if (!std::isfinite(e0) || e0 < emin - etol || e0 > emax + etol) {
    throw ValidationError("maximize_entropy: E0 = " + std::to_string(e0) + " outside the spectrum [" +
                          std::to_string(emin) + ", " + std::to_string(emax) + "]");
  }
  const Index dim = obs.dim();
  const CMatrix& b = obs.basis();
  detail::EntropyProblem prob;
  prob.obs = &obs;
  prob.tt = b.adjoint() * t.matrix() * b;
  prob.target = e0;

  // At an extreme of the spectrum the constraint pins the state to one
  // eigenspace; optimize inside it without the penalty.
  const bool at_bottom = e0 <= emin + etol;
  const bool at_top = e0 >= emax - etol;
  bool collapse = false;
  if (at_bottom || at_top || spec.spectral_range() <= etol) {
    collapse = true;
    std::vector<Index> idx;
    for (Index a = 0; a < spec.dim(); ++a)
      if (std::abs(spec.eigenvalues(a) - (at_top && !at_bottom ? emax : emin)) <= std::max(etol, spec.degeneracy_tol))
        idx.push_back(a);
    prob.w.resize(dim, static_cast<Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) prob.w.col(static_cast<Index>(i)) = b.adjoint() * spec.eigenvectors.col(idx[i]);
    prob.constrained = false;
  } else {
    prob.w = CMatrix::Identity(dim, dim);
  }
  prob.tw = prob.w.adjoint() * prob.tt * prob.w;
  const Index k = prob.w.cols();

  const RVector gibbs_w = detail::gibbs_weights_at(spec, std::clamp(e0, emin, emax));
  std::vector<detail::StartOutcome> outcomes;
  for (std::size_t s = 0; s < opt.starts; ++s) {
    Rng rng(derive_seed(opt.seed, "equilibrium.start", s));
    CVector z;
    if (s == 0 && !collapse) {
      // Diagonal-ensemble ansatz: Gibbs amplitudes at E0 with random phases.
      CVector psi(dim);
      for (Index a = 0; a < dim; ++a) psi(a) = std::sqrt(gibbs_w(a)) * std::polar(1.0, rng.phase());
      z = prob.w.adjoint() * (b.adjoint() * (spec.eigenvectors * psi));
    } else {
      z = rng.random_state(k);
    }
    if (z.norm() < 1e-300) z = rng.random_state(k);
    if (k == 1) {
      z = CVector::Ones(1);
    }
    outcomes.push_back(detail::solve_from(prob, z, opt));
    if (k == 1) break;
  }

  const detail::StartOutcome* best = nullptr;
  const detail::StartOutcome* closest = &outcomes.front();
  std::vector<double> hs;
  for (const auto& o : outcomes) {
    if (o.converged) {
      hs.push_back(o.entropy);
      if (!best || o.entropy > best->entropy) best = &o;
    }
    if (std::abs(o.constraint) + o.gradient_norm < std::abs(closest->constraint) + closest->gradient_norm) closest = &o;
  }
  if (!best) {
    throw ConvergenceError("maximize_entropy: no start converged (best |C_E| = " +
                               std::to_string(std::abs(closest->constraint)) +
                               ", gradient = " + std::to_string(closest->gradient_norm) + ")",
                           std::abs(closest->constraint), closest->gradient_norm);
  }

  const CVector psi = b * best->x;
  auto state = QuantumState::pure_normalized(psi);
  MaximizeResult res{state, fit_multipliers(state, obs, t), {}, eigenvalue_distribution(state, obs),
                     constraints_eval(state, t, e0)};
  res.report = ee_residuals(state, obs, t, res.multipliers);
  res.entropy = shannon_entropy(res.distribution);
  res.penalty_multiplier = best->mu;
  res.gradient_norm = best->gradient_norm;
  res.iterations = best->iterations;
  res.support_collapse = collapse;
  res.start_entropies = hs;
  const auto [lo, hi] = std::minmax_element(hs.begin(), hs.end());
  res.multistart_spread = *hi - *lo;
  res.multistart_disagreement = res.multistart_spread > 1e-8;
  const auto gibbs = QuantumState::ensemble(gibbs_w, spec.eigenvectors);
  res.mixed_ansatz_entropy = shannon_entropy(eigenvalue_distribution(gibbs, obs));
  return res;
}

// ---------------------------------------------------------------------------

struct ConstantDistributionReport {
  double energy = 0.0;
  double eigen_residual = 0.0;   // |T psi - E psi|
  Index support_size = 0;        // d_alpha: (j,s) columns with weight > 1e-12
  double max_deviation = 0.0;    // max over support of | |<j,s|psi>|^2 - 1/d_alpha |
  bool constant = false;         // max_deviation <= 1e-8
  EigenvalueDistribution distribution;
  std::vector<Index> support_sectors;  // j with p(lambda_j) > 1e-12
  RVector predicted;             // (support columns in sector j) / d_alpha
  double microcanonical_gap = 0.0;  // max_j |p(lambda_j) - m_j / D|
};

inline ConstantDistributionReport constant_distribution_check(const CVector& psi, const HermitianOperator& t,
                                                              const Observable& obs) {
  require_same_dim(psi.size(), t.dim(), "constant_distribution_check");
  require_same_dim(psi.size(), obs.dim(), "constant_distribution_check");
  const auto state = QuantumState::pure_normalized(psi);
  const CVector v = state.vector();
  const CVector tv = t.matrix() * v;
  ConstantDistributionReport r;
  r.energy = v.dot(tv).real();
  r.eigen_residual = (tv - r.energy * v).norm();
  if (r.eigen_residual > 1e-8) {
    throw PreconditionError("constant_distribution_check: state is not an energy eigenstate (residual " +
                            std::to_string(r.eigen_residual) + ")");
  }
  const RVector w = (obs.basis().adjoint() * v).cwiseAbs2();
  for (Index k = 0; k < w.size(); ++k)
    if (w(k) > 1e-12) ++r.support_size;
  const double level = 1.0 / static_cast<double>(r.support_size);
  for (Index k = 0; k < w.size(); ++k)
    if (w(k) > 1e-12) r.max_deviation = std::max(r.max_deviation, std::abs(w(k) - level));
  r.constant = r.max_deviation <= 1e-8;
  r.distribution = eigenvalue_distribution(state, obs);
  r.predicted = RVector::Zero(obs.sector_count());
  const double dim = static_cast<double>(obs.dim());
  for (Index j = 0; j < obs.sector_count(); ++j) {
    if (r.distribution.probabilities(j) > 1e-12) r.support_sectors.push_back(j);
    for (Index s = 0; s < obs.multiplicity(j); ++s)
      if (w(obs.sector_begin(j) + s) > 1e-12) r.predicted(j) += level;
    r.microcanonical_gap = std::max(r.microcanonical_gap, std::abs(r.distribution.probabilities(j) -
                                                                   static_cast<double>(obs.multiplicity(j)) / dim));
  }
  return r;
}

}  // namespace huo
