#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <unordered_set>
#include <utility>
#include <vector>

#include "huo/dynamics.hpp"
#include "huo/hub.hpp"
#include "huo/rng.hpp"
#include "huo/spectral.hpp"
#include "huo/state.hpp"
#include "huo/stats.hpp"

namespace huo {

/// O_{alpha beta} = <E_alpha|O|E_beta> with the energies for Ebar and omega.
struct MatrixElementTable {
  CMatrix values;
  RVector energies;

  Index dim() const noexcept { return values.rows(); }
  Complex operator()(Index a, Index b) const { return values(a, b); }
  double ebar(Index a, Index b) const { return 0.5 * (energies(a) + energies(b)); }
  double omega(Index a, Index b) const { return energies(a) - energies(b); }
  double hermiticity_error() const { return huo::hermiticity_error(values); }
};

inline MatrixElementTable matrix_elements(const Observable& obs, const SpectralDecomposition& spec) {
  return {energy_basis_matrix(obs, spec), spec.eigenvalues};
}

struct DiagonalConstancyReport {
  double trace_over_dim = 0.0;
  RVector deviations;  // O_aa - Tr O / D
  double max_deviation = 0.0;
  double mean_deviation = 0.0;
  bool pass = false;  // max_deviation <= 1e-10
};

inline DiagonalConstancyReport diagonal_constancy(const MatrixElementTable& table, const Observable& obs) {
  require_same_dim(table.dim(), obs.dim(), "diagonal_constancy");
  DiagonalConstancyReport r;
  r.trace_over_dim = obs.trace() / static_cast<double>(obs.dim());
  r.deviations = table.values.diagonal().real().array() - r.trace_over_dim;
  r.max_deviation = r.deviations.cwiseAbs().maxCoeff();
  r.mean_deviation = r.deviations.cwiseAbs().mean();
  r.pass = r.max_deviation <= 1e-10;
  return r;
}

// ---------------------------------------------------------------------------

using Pair = std::pair<Index, Index>;

/// Unordered pairs alpha < beta: all of them when D <= full_scan_limit or when
/// `count` covers them, otherwise `count` pairs drawn without replacement.
inline std::vector<Pair> sample_pairs(Index dim, std::size_t count, std::uint64_t seed,
                                      Index full_scan_limit = 256) {
  if (dim < 2) return {};
  const auto total = static_cast<std::uint64_t>(dim) * static_cast<std::uint64_t>(dim - 1) / 2;
  std::vector<Pair> out;
  if (dim <= full_scan_limit || count >= total) {
    out.reserve(total);
    for (Index a = 0; a < dim; ++a)
      for (Index b = a + 1; b < dim; ++b) out.emplace_back(a, b);
    return out;
  }
  Rng rng(derive_seed(seed, "eth.pairs"));
  std::unordered_set<std::uint64_t> seen;
  out.reserve(count);
  while (out.size() < count) {
    auto a = static_cast<Index>(rng.below(static_cast<std::uint64_t>(dim)));
    auto b = static_cast<Index>(rng.below(static_cast<std::uint64_t>(dim)));
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    if (seen.insert(static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(dim) + static_cast<std::uint64_t>(b)).second)
      out.emplace_back(a, b);
  }
  return out;
}

/// Ordered sample without the full-scan shortcut, used where a fixed count of
/// pairs is requested regardless of D.
inline std::vector<Pair> random_pairs(Index dim, std::size_t count, std::uint64_t seed) {
  return sample_pairs(dim, count, seed, 0);
}

struct PairUniformity {
  Index alpha = 0;
  Index beta = 0;
  double ks_statistic = 0.0;
  double p_value = 0.0;
  double mean_cos = 0.0;
  double mean_sin = 0.0;
  double mean_cos2 = 0.0;
  double mean_sin2 = 0.0;
};

struct PhaseUniformityReport {
  std::vector<PairUniformity> pairs;
  double pass_fraction = 0.0;  // pairs with p >= 0.01
  bool asymptotic = false;     // D >= 64
  bool unbiased = true;
  bool pass = false;           // asymptotic and pass_fraction >= 0.95
};

namespace detail {

inline PhaseUniformityReport phase_uniformity_from_theta(const RMatrix& theta, const std::vector<Pair>& pairs) {
  PhaseUniformityReport r;
  const Index dim = theta.rows();
  r.asymptotic = dim >= 64;
  std::size_t passed = 0;
  for (const auto& [a, b] : pairs) {
    if (a == b) throw ValidationError("phase_uniformity: alpha == beta gives identically zero phases");
    if (a < 0 || b < 0 || a >= theta.cols() || b >= theta.cols()) {
      throw ValidationError("phase_uniformity: pair index out of range");
    }
    std::vector<double> w(static_cast<std::size_t>(dim));
    PairUniformity pu{a, b};
    for (Index k = 0; k < dim; ++k) {
      const double om = wrap_phase(theta(k, b) - theta(k, a));
      w[static_cast<std::size_t>(k)] = om;
      pu.mean_cos += std::cos(om);
      pu.mean_sin += std::sin(om);
      pu.mean_cos2 += std::cos(2.0 * om);
      pu.mean_sin2 += std::sin(2.0 * om);
    }
    const double n = static_cast<double>(dim);
    pu.mean_cos /= n;
    pu.mean_sin /= n;
    pu.mean_cos2 /= n;
    pu.mean_sin2 /= n;
    const auto ks = stats::ks_uniform(std::move(w), -kPi, kPi);
    pu.ks_statistic = ks.statistic;
    pu.p_value = ks.p_value;
    if (ks.p_value >= 0.01) ++passed;
    r.pairs.push_back(pu);
  }
  r.pass_fraction = pairs.empty() ? 0.0 : static_cast<double>(passed) / static_cast<double>(pairs.size());
  r.pass = r.asymptotic && !pairs.empty() && r.pass_fraction >= 0.95;
  return r;
}

}  // namespace detail

/// KS test of {omega_js^{alpha beta}} against Uniform(-pi, pi] per pair.
inline PhaseUniformityReport phase_uniformity(const PhaseTable& phases, const std::vector<Pair>& pairs) {
  return detail::phase_uniformity_from_theta(phases.theta, pairs);
}

/// Same test on an arbitrary basis; no unbiasedness precondition. Phases of
/// vanishing overlaps are taken as 0.
inline PhaseUniformityReport phase_uniformity_unchecked(const CMatrix& basis_columns, const SpectralDecomposition& spec,
                                                        const std::vector<Pair>& pairs) {
  require_same_dim(basis_columns.rows(), spec.dim(), "phase_uniformity");
  const CMatrix ov = basis_columns.adjoint() * spec.eigenvectors;
  RMatrix theta(ov.rows(), ov.cols());
  for (Index a = 0; a < ov.cols(); ++a)
    for (Index k = 0; k < ov.rows(); ++k) theta(k, a) = std::abs(ov(k, a)) > 1e-12 ? std::arg(ov(k, a)) : 0.0;
  auto r = detail::phase_uniformity_from_theta(theta, pairs);
  r.unbiased = unbiasedness_deviation(basis_columns, spec.eigenvectors) <= 1e-8;
  return r;
}

// ---------------------------------------------------------------------------

/// Closed-form per-component std of off-diagonal HUO elements for uniform,
/// independent phases: sum_js (lambda_js - mean)^2 / (2 D^2).
inline double predicted_offdiag_std(const Observable& obs) {
  const RVector l = obs.column_values();
  const double mean = l.mean();
  const double d = static_cast<double>(obs.dim());
  return std::sqrt((l.array() - mean).square().sum() / (2.0 * d * d));
}

struct ScalingPoint {
  Index dim = 0;
  double std_re = 0.0;
  double std_im = 0.0;
  double std_combined = 0.0;  // sqrt((std_re^2 + std_im^2) / 2)
  double predicted = 0.0;
  std::size_t pairs = 0;
};

inline ScalingPoint scaling_point(const MatrixElementTable& table, const Observable& obs, std::uint64_t seed,
                                  std::size_t max_pairs = 10000) {
  const auto pairs = sample_pairs(table.dim(), max_pairs, derive_seed(seed, "eth.scaling", static_cast<std::uint64_t>(table.dim())));
  std::vector<double> re;
  std::vector<double> im;
  re.reserve(pairs.size());
  im.reserve(pairs.size());
  for (const auto& [a, b] : pairs) {
    re.push_back(table(a, b).real());
    im.push_back(table(a, b).imag());
  }
  ScalingPoint p;
  p.dim = table.dim();
  p.pairs = pairs.size();
  p.std_re = std::sqrt(stats::moments(re).variance);
  p.std_im = std::sqrt(stats::moments(im).variance);
  p.std_combined = std::sqrt(0.5 * (p.std_re * p.std_re + p.std_im * p.std_im));
  p.predicted = predicted_offdiag_std(obs);
  return p;
}

struct ScalingFit {
  std::vector<ScalingPoint> points;
  stats::LinearFit fit;  // log std_combined = intercept + slope log D
  bool degenerate_data = false;
};

inline ScalingFit fit_scaling(std::vector<ScalingPoint> points) {
  if (points.size() < 4) throw ValidationError("offdiag_scaling: need at least 4 dimensions");
  ScalingFit f;
  f.points = std::move(points);
  std::vector<double> x;
  std::vector<double> y;
  for (const auto& p : f.points) {
    if (!(p.std_combined > 1e-300)) {
      f.degenerate_data = true;
      return f;
    }
    x.push_back(std::log(static_cast<double>(p.dim)));
    y.push_back(std::log(p.std_combined));
  }
  f.fit = stats::linear_fit(x, y);
  return f;
}

/// HUO of the given spectrum shape over `dims`, one Hamiltonian per D.
inline ScalingFit offdiag_scaling(const std::vector<Index>& dims,
                                  const std::function<HermitianOperator(Index)>& hamiltonian_for_dim,
                                  const std::function<SpectrumAssignment(Index)>& spectrum_for_dim,
                                  const HubMethod& method, std::uint64_t seed, std::size_t max_pairs = 10000) {
  if (dims.size() < 4) throw ValidationError("offdiag_scaling: need at least 4 dimensions");
  std::vector<ScalingPoint> points;
  for (Index d : dims) {
    const auto spec = spectral_decompose(hamiltonian_for_dim(d));
    const auto hub = hub_from_hamiltonian(spec, method);
    const auto obs = make_huo(hub, spectrum_for_dim(d));
    points.push_back(scaling_point(matrix_elements(obs, spec), obs, seed, max_pairs));
  }
  return fit_scaling(std::move(points));
}

// ---------------------------------------------------------------------------

struct CltReport {
  bool applicable = false;  // equal multiplicities with D2 >= 64 D1
  bool degenerate = false;  // closed-form std is zero
  double sigma = 0.0;
  std::size_t pairs = 0;
  stats::Moments moments;   // of standardized Re and Im parts, pooled
  bool mean_ok = false;     // |mean| <= 0.05
  bool variance_ok = false; // |var - 1| <= 0.1
  bool kurtosis_ok = false; // |kurt - 3| <= 0.5
  bool pass = false;
};

inline CltReport clt_residual_test(const MatrixElementTable& table, const Observable& obs, std::uint64_t seed,
                                   std::size_t pair_count = 10000) {
  require_same_dim(table.dim(), obs.dim(), "clt_residual_test");
  if (pair_count < 10000) throw ValidationError("clt_residual_test: need at least 10^4 pairs");
  const Index dim = table.dim();
  const auto total = static_cast<std::uint64_t>(dim) * static_cast<std::uint64_t>(dim - 1) / 2;
  if (total < pair_count) {
    throw ValidationError("clt_residual_test: D = " + std::to_string(dim) + " has only " + std::to_string(total) +
                          " off-diagonal pairs");
  }
  CltReport r;
  const Index d1 = obs.sector_count();
  const auto& mult = obs.multiplicities();
  const bool equal = std::all_of(mult.begin(), mult.end(), [&](Index m) { return m == mult.front(); });
  r.applicable = d1 > 1 && equal && mult.front() >= 64 * d1;
  r.sigma = predicted_offdiag_std(obs);
  r.degenerate = !(r.sigma > 0.0);
  if (!r.applicable || r.degenerate) return r;
  const auto pairs = random_pairs(dim, pair_count, derive_seed(seed, "eth.clt"));
  std::vector<double> z;
  z.reserve(2 * pairs.size());
  for (const auto& [a, b] : pairs) {
    z.push_back(table(a, b).real() / r.sigma);
    z.push_back(table(a, b).imag() / r.sigma);
  }
  r.pairs = pairs.size();
  r.moments = stats::moments(z);
  r.mean_ok = std::abs(r.moments.mean) <= 0.05;
  r.variance_ok = std::abs(r.moments.variance - 1.0) <= 0.1;
  r.kurtosis_ok = std::abs(r.moments.kurtosis - 3.0) <= 0.5;
  r.pass = r.mean_ok && r.variance_ok && r.kurtosis_ok;
  return r;
}

// ---------------------------------------------------------------------------

struct FactorizationPair {
  Index alpha = 0;
  Index beta = 0;
  double corr_cos = 0.0;  // corr({lambda_js}, {cos omega_js})
  double corr_sin = 0.0;
  double magnitude = 0.0;  // |O_ab|
};

struct FactorizationReport {
  double max_offdiag = 0.0;
  double offdiag_limit = 0.0;  // 10 / sqrt(D) max |lambda|
  double correlation_limit = 0.0;  // 3 / sqrt(D)
  double diagonal_gap = 0.0;       // max |O_aa - Tr O / D|
  double uncorrelated_fraction = 0.0;
  std::vector<FactorizationPair> pairs;
  bool pass = false;
};

inline FactorizationReport uncorrelated_factorization_check(const Observable& obs, const SpectralDecomposition& spec,
                                                            std::uint64_t seed, std::size_t max_pairs = 10000) {
  const PhaseTable phases = phase_table(obs.basis(), spec);
  const MatrixElementTable table = matrix_elements(obs, spec);
  const RVector lambda = obs.column_values();
  const Index dim = obs.dim();
  const double sd = std::sqrt(static_cast<double>(dim));
  FactorizationReport r;
  r.offdiag_limit = 10.0 / sd * obs.values().cwiseAbs().maxCoeff();
  r.correlation_limit = 3.0 / sd;
  r.diagonal_gap = diagonal_constancy(table, obs).max_deviation;
  for (Index a = 0; a < dim; ++a)
    for (Index b = 0; b < dim; ++b)
      if (a != b) r.max_offdiag = std::max(r.max_offdiag, std::abs(table(a, b)));

  const auto pairs = sample_pairs(dim, max_pairs, derive_seed(seed, "eth.factorization"));
  std::vector<double> lam(lambda.data(), lambda.data() + dim);
  std::vector<double> c(static_cast<std::size_t>(dim));
  std::vector<double> s(static_cast<std::size_t>(dim));
  std::size_t ok = 0;
  for (const auto& [a, b] : pairs) {
    for (Index k = 0; k < dim; ++k) {
      const double om = phases.omega(k, a, b);
      c[static_cast<std::size_t>(k)] = std::cos(om);
      s[static_cast<std::size_t>(k)] = std::sin(om);
    }
    FactorizationPair fp{a, b, stats::pearson(lam, c), stats::pearson(lam, s), std::abs(table(a, b))};
    if (std::abs(fp.corr_cos) <= r.correlation_limit && std::abs(fp.corr_sin) <= r.correlation_limit) ++ok;
    r.pairs.push_back(fp);
  }
  r.uncorrelated_fraction = pairs.empty() ? 0.0 : static_cast<double>(ok) / static_cast<double>(pairs.size());
  r.pass = r.max_offdiag <= r.offdiag_limit && !pairs.empty() && r.uncorrelated_fraction >= 0.95;
  return r;
}

// ---------------------------------------------------------------------------

struct EthAnsatzStats {
  double trace_over_dim = 0.0;
  double diagonal_mean = 0.0;
  double diagonal_max_deviation = 0.0;
  double smearing = 0.0;
  std::vector<double> f1_centers;  // mean energy of each equal-population bin
  std::vector<double> f1;          // mean O_aa per bin
  RVector entropy_density;         // S(E_alpha), same order as the spectrum
  std::vector<double> ebar_edges;  // 17 edges
  std::vector<double> omega_edges; // 17 edges
  RMatrix f2;                      // binned RMS of e^{S/2}|O_ab|; NaN where empty
  Eigen::MatrixXi f2_counts;
  stats::Moments residual_moments;
  std::size_t pairs = 0;
  bool insufficient_statistics = false;
};

/// S(E) = log sum_beta exp(-(E - E_beta)^2 / (2 eps^2)).
inline double smeared_level_entropy(const RVector& energies, double e, double eps) {
  double mx = -std::numeric_limits<double>::infinity();
  RVector z = (-(energies.array() - e).square() / (2.0 * eps * eps)).matrix();
  mx = z.maxCoeff();
  return mx + std::log((z.array() - mx).exp().sum());
}

inline EthAnsatzStats eth_ansatz_summary(const MatrixElementTable& table, const SpectralDecomposition& spec,
                                         std::optional<double> smearing, std::uint64_t seed,
                                         std::size_t max_pairs = 10000) {
  constexpr int kBins = 16;
  require_same_dim(table.dim(), spec.dim(), "eth_ansatz_summary");
  const Index dim = table.dim();
  const double eps = smearing.value_or(spec.spectral_range() / 50.0);
  if (!(eps > 0.0)) throw ValidationError("eth_ansatz_summary: smearing width must be positive");
  EthAnsatzStats st;
  st.smearing = eps;
  const RVector diag = table.values.diagonal().real();
  st.trace_over_dim = diag.mean();
  st.diagonal_mean = diag.mean();
  st.diagonal_max_deviation = (diag.array() - st.trace_over_dim).abs().maxCoeff();
  st.insufficient_statistics = dim < 2 * kBins;

  for (int b = 0; b < kBins; ++b) {
    const Index lo = dim * b / kBins;
    const Index hi = dim * (b + 1) / kBins;
    if (hi <= lo) continue;
    st.f1_centers.push_back(spec.eigenvalues.segment(lo, hi - lo).mean());
    st.f1.push_back(diag.segment(lo, hi - lo).mean());
  }

  st.entropy_density.resize(dim);
  for (Index a = 0; a < dim; ++a) st.entropy_density(a) = smeared_level_entropy(spec.eigenvalues, spec.eigenvalues(a), eps);

  const auto pairs = sample_pairs(dim, max_pairs, derive_seed(seed, "eth.ansatz"));
  st.pairs = pairs.size();
  st.f2 = RMatrix::Constant(kBins, kBins, std::numeric_limits<double>::quiet_NaN());
  st.f2_counts = Eigen::MatrixXi::Zero(kBins, kBins);
  if (pairs.empty()) {
    st.insufficient_statistics = true;
    return st;
  }
  std::vector<double> ebar;
  std::vector<double> omega;
  std::vector<Complex> scaled;
  for (const auto& [a, b] : pairs) {
    const double e = table.ebar(a, b);
    ebar.push_back(e);
    omega.push_back(table.omega(a, b));
    scaled.push_back(std::exp(0.5 * smeared_level_entropy(spec.eigenvalues, e, eps)) * table(a, b));
  }
  std::vector<double> sorted_e = ebar;
  std::sort(sorted_e.begin(), sorted_e.end());
  const auto [wmin, wmax] = std::minmax_element(omega.begin(), omega.end());
  const std::size_t n = sorted_e.size();
  for (int b = 0; b <= kBins; ++b) {
    st.ebar_edges.push_back(b == kBins ? sorted_e.back() : sorted_e[n * static_cast<std::size_t>(b) / kBins]);
    st.omega_edges.push_back(*wmin + (*wmax - *wmin) * b / kBins);
  }
  auto ebin = [&](double e) {
    const auto it = std::upper_bound(st.ebar_edges.begin() + 1, st.ebar_edges.end() - 1, e);
    return static_cast<int>(it - (st.ebar_edges.begin() + 1));
  };
  auto wbin = [&](double w) {
    if (*wmax <= *wmin) return 0;
    return std::clamp(static_cast<int>((w - *wmin) / (*wmax - *wmin) * kBins), 0, kBins - 1);
  };
  RMatrix sumsq = RMatrix::Zero(kBins, kBins);
  std::vector<std::pair<int, int>> bin_of(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const int be = ebin(ebar[i]);
    const int bw = wbin(omega[i]);
    bin_of[i] = {be, bw};
    sumsq(be, bw) += std::norm(scaled[i]);
    st.f2_counts(be, bw) += 1;
  }
  for (int i = 0; i < kBins; ++i)
    for (int j = 0; j < kBins; ++j)
      if (st.f2_counts(i, j) > 0) st.f2(i, j) = std::sqrt(sumsq(i, j) / st.f2_counts(i, j));

  std::vector<double> residuals;
  residuals.reserve(2 * pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const double f = st.f2(bin_of[i].first, bin_of[i].second);
    if (!(f > 0.0) || st.f2_counts(bin_of[i].first, bin_of[i].second) < 2) continue;
    // Each component of a circular complex residual carries half the variance.
    residuals.push_back(std::sqrt(2.0) * scaled[i].real() / f);
    residuals.push_back(std::sqrt(2.0) * scaled[i].imag() / f);
  }
  st.residual_moments = stats::moments(residuals);
  if (residuals.empty()) st.insufficient_statistics = true;
  return st;
}

}  // namespace huo
