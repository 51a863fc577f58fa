#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <gtest/gtest.h>

#include "huo/huo.hpp"
#include "oracles.hpp"

using namespace huo;

namespace {

double log_d(Index d) { return std::log(static_cast<double>(d)); }

SpectralDecomposition ising_spec(unsigned n, double j = 1.0, double h = 0.5, double g = 0.0) {
  return spectral_decompose(build_hamiltonian(IsingChain{n, j, h, g}));
}

CVector basis_vector(Index dim, Index k) {
  CVector v = CVector::Zero(dim);
  v(k) = 1.0;
  return v;
}

}  // namespace

// ---------------------------------------------------------------- linalg

TEST(Linalg, HermitianOperatorRejectsNonHermitian) {
  CMatrix m(2, 2);
  m << 1, 2, 3, 4;
  EXPECT_THROW(HermitianOperator{m}, ValidationError);
  EXPECT_THROW(HermitianOperator{CMatrix(2, 3)}, ValidationError);
}

TEST(Linalg, DimensionCapRefusesBeforeAllocation) {
  EXPECT_THROW(require_within_cap(dimension_cap() + 1, "test"), ResourceError);
  EXPECT_THROW(build_hamiltonian(IsingChain{13, 1.0, 1.0, 0.0}), ResourceError);
  EXPECT_THROW(build_hamiltonian(RandomHermitian{5000, 1}), ResourceError);
  EXPECT_NO_THROW(require_within_cap(dimension_cap(), "test"));
}

TEST(Linalg, WrapPhaseRange) {
  EXPECT_NEAR(wrap_phase(kPi), kPi, 1e-15);
  EXPECT_NEAR(wrap_phase(-kPi), kPi, 1e-15);
  EXPECT_NEAR(wrap_phase(3 * kPi), kPi, 1e-12);
  EXPECT_NEAR(wrap_phase(0.25 + 4 * kPi), 0.25, 1e-12);
}

TEST(Linalg, MatrixDumpRoundTrip) {
  Rng rng(5);
  const CMatrix m = rng.gaussian_matrix(5, 5);
  std::stringstream ss;
  write_matrix_dump(ss, m);
  const CMatrix back = read_matrix_dump(ss);
  EXPECT_EQ(max_abs(back - m), 0.0);
}

// ---------------------------------------------------------------- rng

TEST(Rng, DerivedSeedsAreDeterministicAndDistinct) {
  EXPECT_EQ(derive_seed(1, "a", 0), derive_seed(1, "a", 0));
  EXPECT_NE(derive_seed(1, "a", 0), derive_seed(1, "b", 0));
  EXPECT_NE(derive_seed(1, "a", 0), derive_seed(1, "a", 1));
  EXPECT_NE(derive_seed(1, "a", 0), derive_seed(2, "a", 0));
  Rng a(9);
  Rng b(9);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, HaarUnitaryIsUnitary) {
  Rng rng(3);
  const CMatrix u = haar_unitary(16, rng);
  EXPECT_LE(orthonormality_error(u), 1e-12);
}

TEST(Rng, UniformMomentsAndBelowRange) {
  Rng rng(11);
  double sum = 0.0;
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) {
    sum += rng.uniform();
    ++counts[static_cast<std::size_t>(rng.below(7))];
  }
  EXPECT_NEAR(sum / 70000, 0.5, 0.01);
  for (int c : counts) EXPECT_NEAR(c, 10000, 500);
}

// ---------------------------------------------------------------- models

TEST(Models, SingleSpinInField) {
  const auto spec = spectral_decompose(build_hamiltonian(IsingChain{1, 0.0, 1.0, 0.0}));
  EXPECT_NEAR(spec.eigenvalues(0), -1.0, 1e-14);
  EXPECT_NEAR(spec.eigenvalues(1), 1.0, 1e-14);
}

TEST(Models, ClassicalIsingPairIsDiagonal) {
  const auto h = build_hamiltonian(IsingChain{2, 1.0, 0.0, 0.0});
  const CMatrix& m = h.matrix();
  EXPECT_EQ(max_abs(m - CMatrix(m.diagonal().asDiagonal())), 0.0);
  const auto spec = spectral_decompose(h);
  const std::vector<double> expected = {-1, -1, 1, 1};
  for (Index i = 0; i < 4; ++i) EXPECT_NEAR(spec.eigenvalues(i), expected[static_cast<std::size_t>(i)], 1e-14);
}

TEST(Models, IsingMatchesKroneckerConstruction) {
  for (unsigned n : {2u, 3u, 4u, 5u}) {
    const auto h = build_hamiltonian(IsingChain{n, 0.8, 0.6, 0.3});
    EXPECT_LE(max_abs(h.matrix() - oracle::ising(n, 0.8, 0.6, 0.3)), 1e-14) << "N=" << n;
  }
}

TEST(Models, XxzMatchesKroneckerConstruction) {
  for (unsigned n : {2u, 3u, 4u}) {
    const auto h = build_hamiltonian(XxzChain{n, 1.1, 0.7, 0.4});
    EXPECT_LE(max_abs(h.matrix() - oracle::xxz(n, 1.1, 0.7, 0.4)), 1e-14) << "N=" << n;
  }
}

TEST(Models, RandomHermitianSemicircleAgainstIndependentSampler) {
  const auto spec = spectral_decompose(build_hamiltonian(RandomHermitian{64, 7}));
  std::vector<double> ours(spec.eigenvalues.data(), spec.eigenvalues.data() + 64);
  // Pool several independent draws on the reference side for a sharper test.
  std::vector<double> ref;
  for (unsigned s = 0; s < 8; ++s) {
    const auto e = oracle::gue_eigenvalues(64, 1000 + s);
    ref.insert(ref.end(), e.begin(), e.end());
  }
  EXPECT_GE(stats::ks_two_sample(ours, ref).p_value, 0.01);
  EXPECT_GT(spec.eigenvalues(0), -2.5);
  EXPECT_LT(spec.eigenvalues(63), 2.5);
}

TEST(Models, RandomHermitianIsSeedDeterministic) {
  const auto a = build_hamiltonian(RandomHermitian{16, 3});
  const auto b = build_hamiltonian(RandomHermitian{16, 3});
  const auto c = build_hamiltonian(RandomHermitian{16, 4});
  EXPECT_EQ(max_abs(a.matrix() - b.matrix()), 0.0);
  EXPECT_GT(max_abs(a.matrix() - c.matrix()), 0.1);
}

// ---------------------------------------------------------------- spectral

TEST(Spectral, IdentityIsOneGroup) {
  const auto spec = spectral_decompose(HermitianOperator::identity(4));
  ASSERT_EQ(spec.groups.size(), 1u);
  EXPECT_EQ(spec.groups[0].size(), 4u);
  EXPECT_NEAR(spec.eigenvalues(0), 1.0, 1e-15);
}

TEST(Spectral, GroupsFollowTolerance) {
  CMatrix m = CMatrix::Zero(3, 3);
  m(0, 0) = 1.0;
  m(1, 1) = 1.0 + 1e-12;
  m(2, 2) = 2.0;
  const auto spec = spectral_decompose(HermitianOperator(m), 1e-9);
  ASSERT_EQ(spec.groups.size(), 2u);
  EXPECT_EQ(spec.groups[0], (std::vector<Index>{0, 1}));
  EXPECT_EQ(spec.groups[1], (std::vector<Index>{2}));
  EXPECT_THROW(spectral_decompose(HermitianOperator(m), 0.0), ValidationError);
}

TEST(Spectral, IsingEigenvaluesMatchBisectionOracle) {
  const auto h = build_hamiltonian(IsingChain{3, 1.0, 0.5, 0.0});
  const auto spec = spectral_decompose(h);
  EXPECT_LE(max_abs(spec.reconstruct() - h.matrix()), 1e-10);
  EXPECT_LE(orthonormality_error(spec.eigenvectors), 1e-12);
  const auto roots = oracle::eigenvalues_by_bisection(oracle::ising(3, 1.0, 0.5, 0.0), -10.0, 10.0);
  for (Index i = 0; i < 8; ++i) EXPECT_NEAR(spec.eigenvalues(i), roots[static_cast<std::size_t>(i)], 1e-9);
  for (Index i = 1; i < 8; ++i) EXPECT_LE(spec.eigenvalues(i - 1), spec.eigenvalues(i));
}

TEST(Spectral, DegenerateSectorsAreOrthonormal) {
  const auto spec = spectral_decompose(build_hamiltonian(XxzChain{4, 1.0, 1.0, 0.0}));
  EXPECT_LT(spec.groups.size(), 16u);
  EXPECT_LE(orthonormality_error(spec.eigenvectors), 1e-12);
}

// ---------------------------------------------------------------- state

TEST(State, PureStateMustBeNormalized) {
  CVector v(2);
  v << 1.0, 1.0;
  EXPECT_THROW(QuantumState::pure(v), ValidationError);
  EXPECT_NO_THROW(QuantumState::pure_normalized(v));
}

TEST(State, MixedStateValidation) {
  CMatrix rho = CMatrix::Identity(2, 2);
  EXPECT_THROW(QuantumState::mixed(rho), ValidationError);  // trace 2
  CMatrix neg(2, 2);
  neg << 1.5, 0, 0, -0.5;
  EXPECT_THROW(QuantumState::mixed(neg), ValidationError);
  EXPECT_NO_THROW(QuantumState::mixed(rho / 2.0));
}

TEST(State, DistributionOfSectorBasisState) {
  const auto spec = ising_spec(3);
  const auto hub = hub_from_hamiltonian(spec, FourierMethod{});
  const auto obs = make_huo(hub, SpectrumAssignment::degenerate(8, 4));
  const auto psi = QuantumState::pure(obs.basis().col(0));
  const auto d = eigenvalue_distribution(psi, obs);
  EXPECT_NEAR(d.probabilities(0), 1.0, 1e-12);
  for (Index j = 1; j < d.size(); ++j) EXPECT_NEAR(d.probabilities(j), 0.0, 1e-12);
}

TEST(State, MaximallyMixedGivesMultiplicityFractions) {
  Rng rng(2);
  const CMatrix u = haar_unitary(6, rng);
  const Observable obs(RVector::LinSpaced(3, -1.0, 1.0), {1, 2, 3}, u);
  const auto d = eigenvalue_distribution(QuantumState::mixed(CMatrix::Identity(6, 6) / 6.0), obs);
  EXPECT_NEAR(d.probabilities(0), 1.0 / 6.0, 1e-12);
  EXPECT_NEAR(d.probabilities(1), 2.0 / 6.0, 1e-12);
  EXPECT_NEAR(d.probabilities(2), 3.0 / 6.0, 1e-12);
}

TEST(State, SigmaXDistributionByExplicitArithmetic) {
  const auto sx = Observable::from_operator(HermitianOperator(oracle::pauli_x()));
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const CVector v = rng.random_state(2);
    const auto d = eigenvalue_distribution(QuantumState::pure(v), sx);
    const Complex plus = (v(0) + v(1)) / std::sqrt(2.0);
    const Complex minus = (v(0) - v(1)) / std::sqrt(2.0);
    EXPECT_NEAR(d.values(0), -1.0, 1e-14);
    EXPECT_NEAR(d.probabilities(0), std::norm(minus), 1e-12);
    EXPECT_NEAR(d.probabilities(1), std::norm(plus), 1e-12);
  }
}

TEST(State, ExpectationExamples) {
  const auto spec = ising_spec(3);
  const auto t = build_hamiltonian(IsingChain{3, 1.0, 0.5, 0.0});
  Rng rng(4);
  const auto psi = QuantumState::pure(rng.random_state(8));
  EXPECT_NEAR(expectation(psi, HermitianOperator::identity(8)), 1.0, 1e-12);
  for (Index a = 0; a < 8; ++a) {
    EXPECT_NEAR(expectation(QuantumState::pure(spec.eigenvectors.col(a)), t), spec.eigenvalues(a), 1e-12);
  }
  EXPECT_THROW(expectation(psi, HermitianOperator::identity(4)), ValidationError);
}

TEST(State, GibbsExpectationByExplicitSum) {
  const std::vector<double> e = {-1.5, -0.2, 0.4, 2.0};
  CMatrix m = CMatrix::Zero(4, 4);
  for (Index i = 0; i < 4; ++i) m(i, i) = e[static_cast<std::size_t>(i)];
  const double beta = 0.7;
  double z = 0.0;
  double num = 0.0;
  for (double x : e) {
    z += std::exp(-beta * x);
    num += x * std::exp(-beta * x);
  }
  const auto g = gibbs_state(HermitianOperator(m), beta);
  EXPECT_NEAR(expectation(g.state, HermitianOperator(m)), num / z, 1e-12);
  EXPECT_NEAR(g.log_partition, std::log(z), 1e-12);
}

TEST(State, ConstraintExamples) {
  const auto t = build_hamiltonian(IsingChain{2, 1.0, 0.7, 0.0});
  Rng rng(6);
  const auto psi = QuantumState::pure(rng.random_state(4));
  const auto c = constraints_eval(psi, t, expectation(psi, t));
  EXPECT_NEAR(c.normalization, 0.0, 1e-12);
  EXPECT_NEAR(c.energy, 0.0, 1e-12);
  const auto raw = constraints_eval(2.0 * psi.density_matrix(), t, 0.0);
  EXPECT_NEAR(raw.normalization, 1.0, 1e-12);

  CMatrix d = CMatrix::Zero(3, 3);
  d(0, 0) = 1.0;
  d(1, 1) = 2.0;
  d(2, 2) = 3.0;
  const auto spec = spectral_decompose(HermitianOperator(d));
  const auto mc = microcanonical_state(spec, EnergyShell{2.0, 1.5, {0, 1, 2}});
  EXPECT_NEAR(constraints_eval(mc.state, HermitianOperator(d), 2.0).energy, 0.0, 1e-12);
}

TEST(State, DistributionSumsToOneAndMatchesExpectation) {
  Rng rng(21);
  for (int trial = 0; trial < 25; ++trial) {
    const Index dim = 2 + static_cast<Index>(rng.below(10));
    const CMatrix u = haar_unitary(dim, rng);
    const Index sectors = 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(dim)));
    std::vector<Index> mult(static_cast<std::size_t>(sectors), 1);
    for (Index k = sectors; k < dim; ++k) ++mult[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(sectors)))];
    RVector vals(sectors);
    for (Index j = 0; j < sectors; ++j) vals(j) = static_cast<double>(j) + rng.uniform();
    const Observable obs(vals, mult, u);
    const CMatrix g = rng.gaussian_matrix(dim, dim);
    CMatrix rho = g * g.adjoint();
    rho /= rho.trace().real();
    const auto state = QuantumState::mixed(rho);
    const auto d = eigenvalue_distribution(state, obs);
    EXPECT_NEAR(d.total(), 1.0, 1e-10);
    EXPECT_NEAR(expectation(state, obs.as_operator()), d.values.dot(d.probabilities), 1e-10);
  }
}

TEST(State, ObservableProjectorsResolveIdentity) {
  Rng rng(8);
  const Observable obs(RVector::LinSpaced(3, 0.0, 2.0), {2, 1, 3}, haar_unitary(6, rng));
  CMatrix sum = CMatrix::Zero(6, 6);
  for (Index j = 0; j < 3; ++j) {
    const CMatrix p = obs.projector(j);
    EXPECT_LE(max_abs(p * p - p), 1e-12);
    sum += p;
  }
  EXPECT_LE(max_abs(sum - CMatrix::Identity(6, 6)), 1e-12);
  EXPECT_LE(max_abs(obs.projector(0) * obs.projector(2)), 1e-12);
}

TEST(State, OverlapRowsAreUnitNorm) {
  Rng rng(9);
  const Observable obs(RVector::LinSpaced(2, 0.0, 1.0), {2, 2}, haar_unitary(4, rng));
  const auto ov = overlaps(QuantumState::pure(rng.random_state(4)), obs);
  EXPECT_NEAR(ov.row_norms_by_state()(0), 1.0, 1e-12);
}

// ---------------------------------------------------------------- mub

TEST(Mub, QubitFamilyIsPauliEigenbases) {
  const auto fam = generate_mub_family(2);
  ASSERT_EQ(fam.size(), 3u);
  const std::vector<CMatrix> paulis = {oracle::pauli_z(), oracle::pauli_x(), oracle::pauli_y()};
  std::vector<bool> used(3, false);
  for (std::size_t b = 0; b < 3; ++b) {
    const CMatrix v = fam.basis_matrix(b);
    bool found = false;
    for (std::size_t p = 0; p < 3 && !found; ++p) {
      const CMatrix d = v.adjoint() * paulis[p] * v;
      if (std::abs(d(0, 1)) < 1e-12 && std::abs(std::abs(d(0, 0).real()) - 1.0) < 1e-12 && !used[p]) {
        used[p] = true;
        found = true;
      }
    }
    EXPECT_TRUE(found) << "basis " << b;
  }
}

TEST(Mub, FamiliesAreCompleteAndUnbiased) {
  for (Index d : {2, 3, 4, 5, 7, 8, 16, 32}) {
    const auto fam = generate_mub_family(d);
    ASSERT_EQ(fam.size(), static_cast<std::size_t>(d + 1));
    std::vector<CMatrix> bases;
    for (std::size_t b = 0; b < fam.size(); ++b) {
      bases.push_back(fam.basis_matrix(b));
      EXPECT_LE(orthonormality_error(bases.back()), 1e-12);
    }
    for (std::size_t a = 0; a < bases.size(); ++a)
      for (std::size_t b = a + 1; b < bases.size(); ++b)
        EXPECT_LE(oracle::mub_scan(bases[a], bases[b]), 1e-10) << "D=" << d << " pair " << a << "," << b;
  }
}

TEST(Mub, QutritFamilyBruteForce) {
  const auto fam = generate_mub_family(3);
  ASSERT_EQ(fam.size(), 4u);
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t b = a + 1; b < 4; ++b)
      for (Index i = 0; i < 3; ++i)
        for (Index j = 0; j < 3; ++j) EXPECT_NEAR(std::norm(fam.overlap(a, i, b, j)), 1.0 / 3.0, 1e-12);
}

TEST(Mub, LargePowerOfTwoSampledOverlaps) {
  const auto fam = generate_mub_family(1024);
  Rng rng(1);
  double dev = 0.0;
  for (int k = 0; k < 2000; ++k) {
    const auto a = static_cast<std::size_t>(rng.below(fam.size()));
    auto b = static_cast<std::size_t>(rng.below(fam.size()));
    if (a == b) b = (b + 1) % fam.size();
    const auto i = static_cast<Index>(rng.below(1024));
    const auto j = static_cast<Index>(rng.below(1024));
    dev = std::max(dev, std::abs(std::norm(fam.overlap(a, i, b, j)) - 1.0 / 1024.0));
  }
  EXPECT_LE(dev, 1e-10);
}

TEST(Mub, UnsupportedDimensions) {
  EXPECT_THROW(generate_mub_family(6), UnsupportedDimensionError);
  EXPECT_THROW(generate_mub_family(12), UnsupportedDimensionError);
  EXPECT_THROW(generate_mub_family(8192), UnsupportedDimensionError);
  EXPECT_THROW(generate_mub_family(0), ValidationError);
}

TEST(Mub, DeviationExamples) {
  const CMatrix id2 = CMatrix::Identity(2, 2);
  EXPECT_LE(unbiasedness_deviation(id2, fourier_matrix(2)), 1e-15);
  const CMatrix id5 = CMatrix::Identity(5, 5);
  EXPECT_NEAR(unbiasedness_deviation(id5, id5), 1.0 - 1.0 / 5.0, 1e-15);
  EXPECT_LE(unbiasedness_deviation(CMatrix::Identity(6, 6), fourier_matrix(6)), 1e-12);
}

TEST(Mub, FourierBasisExamples) {
  EXPECT_NEAR(std::abs(fourier_matrix(1)(0, 0) - 1.0), 0.0, 1e-15);
  CMatrix h(2, 2);
  h << 1, 1, 1, -1;
  EXPECT_LE(max_abs(fourier_matrix(2) - h / std::sqrt(2.0)), 1e-15);
  EXPECT_LE(unbiasedness_deviation(CMatrix::Identity(5, 5), fourier_basis(5).columns()), 1e-12);
}

// ---------------------------------------------------------------- hub-huo

TEST(Hub, SigmaZFourierGivesPlusMinus) {
  const auto spec = spectral_decompose(HermitianOperator(oracle::pauli_z()));
  const auto hub = hub_from_hamiltonian(spec, FourierMethod{});
  for (Index a = 0; a < 2; ++a)
    for (Index k = 0; k < 2; ++k) EXPECT_NEAR(std::norm(hub.columns.col(k).dot(spec.eigenvectors.col(a))), 0.5, 1e-14);
  // Each column is an eigenvector of sigma^x.
  for (Index k = 0; k < 2; ++k) {
    const CVector v = hub.columns.col(k);
    const CVector xv = oracle::pauli_x() * v;
    EXPECT_NEAR(std::abs(std::abs(v.dot(xv)) - 1.0), 0.0, 1e-14);
  }
}

TEST(Hub, ExhaustiveScansForEveryMethod) {
  const auto ising = ising_spec(3);
  EXPECT_LE(oracle::mub_scan(hub_from_hamiltonian(ising, FourierMethod{}).columns, ising.eigenvectors), 1e-10);
  const auto rnd = spectral_decompose(build_hamiltonian(RandomHermitian{4, 17}));
  EXPECT_LE(oracle::mub_scan(hub_from_hamiltonian(rnd, MubFamilyMethod{2}).columns, rnd.eigenvectors), 1e-10);
  const auto big = ising_spec(6, 1.0, 0.9, 0.3);
  EXPECT_LE(oracle::mub_scan(hub_from_hamiltonian(big, RandomHadamardMethod{5}).columns, big.eigenvectors), 1e-10);
}

TEST(Hub, MubIndexZeroAndOutOfRangeRejected) {
  const auto spec = ising_spec(2);
  EXPECT_ANY_THROW(hub_from_hamiltonian(spec, MubFamilyMethod{0}));
  EXPECT_ANY_THROW(hub_from_hamiltonian(spec, MubFamilyMethod{5}));
  const auto six = spectral_decompose(build_hamiltonian(RandomHermitian{6, 1}));
  EXPECT_THROW(hub_from_hamiltonian(six, MubFamilyMethod{1}), UnsupportedDimensionError);
}

TEST(Hub, RandomHadamardIsSeeded) {
  EXPECT_EQ(max_abs(random_hadamard_matrix(16, 3) - random_hadamard_matrix(16, 3)), 0.0);
  EXPECT_GT(max_abs(random_hadamard_matrix(16, 3) - random_hadamard_matrix(16, 4)), 1e-3);
  const CMatrix h = random_hadamard_matrix(12, 2);
  EXPECT_LE(orthonormality_error(h), 1e-12);
  EXPECT_LE(unbiasedness_deviation(CMatrix::Identity(12, 12), h), 1e-12);
}

TEST(Hub, QubitHuoIsSigmaX) {
  const auto spec = spectral_decompose(HermitianOperator(oracle::pauli_z()));
  const auto obs = make_huo(hub_from_hamiltonian(spec, FourierMethod{}), SpectrumAssignment::custom({1.0, -1.0}, {1, 1}));
  const CMatrix o = obs.matrix();
  EXPECT_NEAR(std::abs(o(0, 0)), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(o(1, 1)), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(o(0, 1)), 1.0, 1e-14);
  EXPECT_LE(hermiticity_error(o), 1e-14);
  // The Fourier partner has real entries here, so O is exactly +-sigma^x.
  EXPECT_LE(std::min(max_abs(o - oracle::pauli_x()), max_abs(o + oracle::pauli_x())), 1e-14);
}

TEST(Hub, SpectrumArithmetic) {
  const auto spec = ising_spec(3);
  const auto hub = hub_from_hamiltonian(spec, FourierMethod{});
  const auto o = make_huo(hub, SpectrumAssignment::degenerate(8, 2, {0.0, 1.0}));
  EXPECT_NEAR(o.trace(), 4.0, 1e-12);
  EXPECT_NEAR(o.matrix().trace().real(), 4.0, 1e-12);
  const auto c = make_huo(hub, SpectrumAssignment::custom({2.5}, {8}));
  EXPECT_LE(max_abs(c.matrix() - 2.5 * CMatrix::Identity(8, 8)), 1e-12);
  EXPECT_THROW(SpectrumAssignment::degenerate(8, 3), ValidationError);
  EXPECT_THROW(make_huo(hub, SpectrumAssignment::custom({1.0}, {7})), ValidationError);
}

TEST(Hub, SectorsAreSortedAndMerged) {
  const auto spec = ising_spec(2);
  const auto hub = hub_from_hamiltonian(spec, FourierMethod{});
  const auto o = make_huo(hub, SpectrumAssignment::custom({3.0, -1.0, 3.0}, {1, 2, 1}));
  ASSERT_EQ(o.sector_count(), 2);
  EXPECT_EQ(o.values()(0), -1.0);
  EXPECT_EQ(o.multiplicity(0), 2);
  EXPECT_EQ(o.multiplicity(1), 2);
}

TEST(Hub, PhaseTableExamples) {
  const auto spec = ising_spec(3);
  const auto hub = hub_from_hamiltonian(spec, FourierMethod{});
  const auto pt = phase_table(hub, spec);
  for (Index a = 0; a < 8; ++a)
    for (Index k = 0; k < 8; ++k) EXPECT_EQ(pt.omega(k, a, a), 0.0);

  const auto z = spectral_decompose(HermitianOperator(oracle::pauli_z()));
  const auto qt = phase_table(hub_from_hamiltonian(z, FourierMethod{}), z);
  for (Index k = 0; k < 2; ++k)
    for (Index a = 0; a < 2; ++a) EXPECT_NEAR(std::sin(qt.theta(k, a)), 0.0, 1e-14);

  Rng rng(1);
  EXPECT_THROW(phase_table(haar_unitary(8, rng), spec), NotUnbiasedError);
}

TEST(Hub, PhaseReconstructionMatchesConjugation) {
  const auto spec = ising_spec(3);
  const auto hub = hub_from_hamiltonian(spec, FourierMethod{});
  const auto obs = make_huo(hub, SpectrumAssignment::degenerate(8, 4));
  const CMatrix direct = spec.eigenvectors.adjoint() * obs.matrix() * spec.eigenvectors;
  const CMatrix via_phases = reconstruct_from_phases(phase_table(hub, spec), obs.column_values());
  EXPECT_LE(max_abs(direct - via_phases), 1e-10);
}

TEST(Hub, DiagonalIsTraceOverDimForEveryConstruction) {
  const auto spec = ising_spec(4, 1.0, 0.9, 0.4);
  for (const HubMethod& m : std::vector<HubMethod>{FourierMethod{}, MubFamilyMethod{3}, RandomHadamardMethod{9}}) {
    const auto obs = make_huo(hub_from_hamiltonian(spec, m), SpectrumAssignment::custom({-0.3, 1.7, 4.0}, {5, 3, 8}));
    const CMatrix e = spec.eigenvectors.adjoint() * obs.matrix() * spec.eigenvectors;
    for (Index a = 0; a < 16; ++a) EXPECT_NEAR(e(a, a).real(), obs.trace() / 16.0, 1e-10) << method_name(m);
  }
}

// ---------------------------------------------------------------- entropy

TEST(Entropy, ShannonExamples) {
  const std::vector<double> uniform(4, 0.25);
  EXPECT_NEAR(shannon_entropy(uniform), std::log(4.0), 1e-15);
  const std::vector<double> delta = {0.0, 1.0, 0.0};
  EXPECT_EQ(shannon_entropy(delta), 0.0);
  const std::vector<double> p = {0.5, 0.25, 0.25};
  EXPECT_NEAR(shannon_entropy(p), 1.5 * std::log(2.0), 1e-15);
  EXPECT_NEAR(nats_to_bits(shannon_entropy(p)), 1.5, 1e-15);
}

TEST(Entropy, ShannonPermutationInvariantAndBounded) {
  Rng rng(31);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> p(9);
    for (auto& v : p) v = rng.uniform();
    const double s = std::accumulate(p.begin(), p.end(), 0.0);
    for (auto& v : p) v /= s;
    const double h = shannon_entropy(p);
    EXPECT_NEAR(h, oracle::shannon(p), 1e-12);
    std::reverse(p.begin(), p.end());
    EXPECT_NEAR(shannon_entropy(p), h, 1e-12);
    EXPECT_LE(h, std::log(9.0) + 1e-12);
  }
}

TEST(Entropy, TinyProbabilitiesAreClamped) {
  const std::vector<double> p = {1.0 - 1e-20, 1e-20};
  const double h = shannon_entropy(p);
  EXPECT_GE(h, 0.0);
  EXPECT_LE(h, 1e-18);
}

TEST(Entropy, VonNeumannExamples) {
  Rng rng(2);
  EXPECT_NEAR(von_neumann_entropy(QuantumState::pure(rng.random_state(5))), 0.0, 1e-12);
  EXPECT_NEAR(von_neumann_entropy(QuantumState::mixed(CMatrix::Identity(6, 6) / 6.0)), std::log(6.0), 1e-12);
  const auto g = gibbs_state(HermitianOperator(oracle::pauli_z()), 1.0);
  const double e = std::exp(1.0);
  const double q1 = e / (e + 1.0 / e);
  const double q2 = (1.0 / e) / (e + 1.0 / e);
  EXPECT_NEAR(von_neumann_entropy(g.state), -q1 * std::log(q1) - q2 * std::log(q2), 1e-12);
}

TEST(Entropy, MinEntropyIdentity) {
  Rng rng(3);
  const auto pure = min_entropy_identity_check(QuantumState::pure(rng.random_state(4)), 20, 1);
  EXPECT_NEAR(pure.eigenbasis_entropy, 0.0, 1e-10);
  EXPECT_TRUE(pure.eigenbasis_matches);
  const auto flat = min_entropy_identity_check(QuantumState::mixed(CMatrix::Identity(4, 4) / 4.0), 20, 1);
  EXPECT_NEAR(flat.min_sampled, std::log(4.0), 1e-10);

  const CMatrix u = haar_unitary(8, rng);
  RVector w = RVector::Zero(3);
  w << 0.5, 0.3, 0.2;
  const auto rank3 = QuantumState::ensemble(w, u.leftCols(3));
  const auto rep = min_entropy_identity_check(rank3, 200, 7);
  EXPECT_TRUE(rep.eigenbasis_matches);
  EXPECT_TRUE(rep.bound_holds);
  EXPECT_GT(rep.margin, 1e-6);
}

TEST(Entropy, GibbsExamples) {
  const auto t = build_hamiltonian(IsingChain{3, 1.0, 0.5, 0.1});
  const auto g0 = gibbs_state(t, 0.0);
  EXPECT_LE(max_abs(g0.state.density_matrix() - CMatrix::Identity(8, 8) / 8.0), 1e-12);
  EXPECT_NEAR(g0.log_partition, std::log(8.0), 1e-12);
  const auto cold = gibbs_state(t, 1e3);
  EXPECT_LE(von_neumann_entropy(cold.state), 1e-3);
  const auto g = gibbs_state(HermitianOperator(oracle::pauli_z()), 1.0);
  EXPECT_NEAR(von_neumann_entropy(g.state), g.log_partition + g.beta * g.energy, 1e-10);
  EXPECT_THROW(gibbs_state(t, std::numeric_limits<double>::infinity()), ValidationError);
  EXPECT_NO_THROW(gibbs_state(t, 1e6));
}

TEST(Entropy, UncertaintyExamples) {
  const auto fam = generate_mub_family(4);
  const CMatrix b1 = fam.basis_matrix(1);
  const CMatrix b2 = fam.basis_matrix(2);
  const auto r0 = entropic_uncertainty_check(QuantumState::pure(b1.col(2)), b1, b2);
  EXPECT_NEAR(r0.h1, 0.0, 1e-12);
  EXPECT_NEAR(r0.h2, std::log(4.0), 1e-12);
  EXPECT_NEAR(r0.slack, 0.0, 1e-12);
  const auto r1 = entropic_uncertainty_check(QuantumState::pure(b1 * CVector::Constant(4, 0.5)), b1, b2);
  EXPECT_NEAR(r1.h1, std::log(4.0), 1e-12);
  EXPECT_GE(r1.slack, -1e-10);

  const auto f16 = generate_mub_family(16);
  Rng rng(5);
  for (int t = 0; t < 500; ++t) {
    const auto r = entropic_uncertainty_check(QuantumState::pure(rng.random_state(16)), f16.basis_matrix(0),
                                              f16.basis_matrix(7));
    ASSERT_GE(r.slack, -1e-10);
  }
}

TEST(Entropy, UncertaintyPreconditions) {
  const auto fam = generate_mub_family(4);
  Rng rng(5);
  const auto mixed = QuantumState::mixed(CMatrix::Identity(4, 4) / 4.0);
  EXPECT_THROW(entropic_uncertainty_check(mixed, fam.basis_matrix(0), fam.basis_matrix(1)), PreconditionError);
  const auto psi = QuantumState::pure(rng.random_state(4));
  EXPECT_THROW(entropic_uncertainty_check(psi, fam.basis_matrix(0), haar_unitary(4, rng)), PreconditionError);
}

TEST(Entropy, NarrowEnergyBoundExamples) {
  const auto spec = spectral_decompose(build_hamiltonian(RandomHermitian{64, 3}));
  const auto hub = hub_from_hamiltonian(spec, FourierMethod{});
  const auto eig = narrow_energy_entropy_bound(QuantumState::pure(spec.eigenvectors.col(10)), spec, hub);
  EXPECT_NEAR(eig.energy_entropy, 0.0, 1e-12);
  EXPECT_NEAR(eig.hub_entropy, log_d(64), 1e-10);
  EXPECT_TRUE(eig.narrow_regime);

  const CVector two = (spec.eigenvectors.col(5) + spec.eigenvectors.col(40)) / std::sqrt(2.0);
  const auto r2 = narrow_energy_entropy_bound(QuantumState::pure(two), spec, hub);
  EXPECT_LE(r2.energy_entropy, std::log(2.0) + 1e-12);
  EXPECT_GE(r2.hub_entropy, log_d(64) - std::log(2.0) - 1e-10);
  EXPECT_TRUE(r2.bound_holds);
}

TEST(Entropy, NarrowGaussianShellAtD256) {
  const auto spec = spectral_decompose(build_hamiltonian(RandomHermitian{256, 12}));
  const auto hub = hub_from_hamiltonian(spec, RandomHadamardMethod{4});
  const double mid = spec.eigenvalues(128);
  const double width = 2.5 * (spec.eigenvalues(130) - spec.eigenvalues(126)) / 4.0;
  EnergyShell shell{mid, width, {126, 127, 128, 129, 130}};
  const auto ns = narrow_energy_state(spec, shell, GaussianProfile{width / 2.0}, 5);
  const auto r = narrow_energy_entropy_bound(ns.state, spec, hub);
  EXPECT_GE(r.hub_entropy / log_d(256), 0.9);
  EXPECT_TRUE(r.bound_holds);
}
