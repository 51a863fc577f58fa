#pragma once

#include <optional>
#include <sstream>
#include <utility>
#include <vector>

#include "huo/linalg.hpp"
#include "huo/spectral.hpp"

namespace huo {

/// Pure vector or density matrix, stored in spectral form: weights q_n and
/// orthonormal eigenvectors psi_n as columns.
class QuantumState {
 public:
  static QuantumState pure(CVector psi) {
    if (psi.size() < 1) throw ValidationError("QuantumState: empty vector");
    const double norm = psi.norm();
    if (std::abs(norm - 1.0) > 1e-12) {
      std::ostringstream os;
      os << "QuantumState: pure state norm " << norm << " differs from 1 by more than 1e-12";
      throw ValidationError(os.str());
    }
    QuantumState s;
    s.weights_ = RVector::Ones(1);
    s.components_ = std::move(psi);
    s.pure_ = true;
    return s;
  }

  /// Normalizes first; zero vectors are rejected.
  static QuantumState pure_normalized(const CVector& psi) {
    const double norm = psi.norm();
    if (!(norm > 0.0)) throw ValidationError("QuantumState: cannot normalize a zero vector");
    return pure(psi / norm);
  }

  static QuantumState mixed(const CMatrix& rho) {
    if (rho.rows() != rho.cols() || rho.rows() < 1) {
      throw ValidationError("QuantumState: density matrix must be square");
    }
    const Complex tr = rho.trace();
    if (std::abs(tr - Complex(1.0, 0.0)) > 1e-12) {
      std::ostringstream os;
      os << "QuantumState: trace " << tr.real() << "+" << tr.imag() << "i differs from 1";
      throw ValidationError(os.str());
    }
    if (hermiticity_error(rho) > 1e-12) {
      throw ValidationError("QuantumState: density matrix not Hermitian to 1e-12");
    }
    const CMatrix sym = 0.5 * (rho + rho.adjoint());
    auto spec = spectral_decompose(HermitianOperator(sym));
    if (spec.eigenvalues(0) < -1e-10) {
      std::ostringstream os;
      os << "QuantumState: density matrix has eigenvalue " << spec.eigenvalues(0) << " < -1e-10";
      throw ValidationError(os.str());
    }
    QuantumState s;
    s.weights_ = spec.eigenvalues.cwiseMax(0.0);
    s.components_ = std::move(spec.eigenvectors);
    s.pure_ = false;
    return s;
  }

  /// Mixture sum_n q_n |psi_n><psi_n| of orthonormal columns.
  static QuantumState ensemble(RVector weights, CMatrix components) {
    if (weights.size() != components.cols() || weights.size() < 1) {
      throw ValidationError("QuantumState: weights/components size mismatch");
    }
    if (weights.minCoeff() < -1e-10) throw ValidationError("QuantumState: negative weight");
    if (std::abs(weights.sum() - 1.0) > 1e-12) {
      throw ValidationError("QuantumState: ensemble weights must sum to 1 within 1e-12");
    }
    if (orthonormality_error(components) > 1e-10) {
      throw ValidationError("QuantumState: ensemble components are not orthonormal");
    }
    QuantumState s;
    s.weights_ = weights.cwiseMax(0.0);
    s.components_ = std::move(components);
    s.pure_ = s.weights_.size() == 1;
    return s;
  }

  Index dim() const noexcept { return components_.rows(); }
  bool is_pure() const noexcept { return pure_; }
  const RVector& weights() const noexcept { return weights_; }
  const CMatrix& components() const noexcept { return components_; }

  CVector vector() const {
    if (!pure_) throw ValidationError("QuantumState: vector() requested from a mixed state");
    return components_.col(0);
  }

  CMatrix density_matrix() const {
    return components_ * weights_.cast<Complex>().asDiagonal() * components_.adjoint();
  }

 private:
  QuantumState() = default;

  RVector weights_;
  CMatrix components_;
  bool pure_ = true;
};

/// O = sum_j lambda_j Pi_j with the sector basis |j,s> stored column-wise,
/// sector j occupying a contiguous block of columns.
class Observable {
 public:
  Observable(RVector values, std::vector<Index> multiplicities, CMatrix basis)
      : values_(std::move(values)), multiplicities_(std::move(multiplicities)), basis_(std::move(basis)) {
    if (values_.size() < 1 || static_cast<std::size_t>(values_.size()) != multiplicities_.size()) {
      throw ValidationError("Observable: need one multiplicity per distinct eigenvalue");
    }
    if (basis_.rows() != basis_.cols()) throw ValidationError("Observable: basis must be square");
    Index total = 0;
    for (std::size_t j = 0; j < multiplicities_.size(); ++j) {
      if (multiplicities_[j] < 1) throw ValidationError("Observable: multiplicities must be >= 1");
      offsets_.push_back(total);
      total += multiplicities_[j];
      if (j > 0 && !(values_(static_cast<Index>(j)) > values_(static_cast<Index>(j) - 1))) {
        throw ValidationError("Observable: distinct eigenvalues must be strictly increasing");
      }
    }
    if (total != basis_.cols()) {
      throw ValidationError("Observable: multiplicities sum to " + std::to_string(total) +
                            " but dimension is " + std::to_string(basis_.cols()));
    }
    if (orthonormality_error(basis_) > 1e-10) {
      throw ValidationError("Observable: sector basis is not orthonormal to 1e-10");
    }
  }

  /// Eigen-decomposes a Hermitian matrix and groups degenerate eigenvalues.
  static Observable from_operator(const HermitianOperator& op, std::optional<double> tol = std::nullopt) {
    const auto spec = spectral_decompose(op, tol);
    RVector values(static_cast<Index>(spec.groups.size()));
    std::vector<Index> mult;
    for (std::size_t g = 0; g < spec.groups.size(); ++g) {
      double mean = 0.0;
      for (Index i : spec.groups[g]) mean += spec.eigenvalues(i);
      values(static_cast<Index>(g)) = mean / static_cast<double>(spec.groups[g].size());
      mult.push_back(static_cast<Index>(spec.groups[g].size()));
    }
    return Observable(std::move(values), std::move(mult), spec.eigenvectors);
  }

  Index dim() const noexcept { return basis_.rows(); }
  Index sector_count() const noexcept { return values_.size(); }
  const RVector& values() const noexcept { return values_; }
  const std::vector<Index>& multiplicities() const noexcept { return multiplicities_; }
  const CMatrix& basis() const noexcept { return basis_; }
  Index sector_begin(Index j) const { return offsets_[static_cast<std::size_t>(j)]; }
  Index multiplicity(Index j) const { return multiplicities_[static_cast<std::size_t>(j)]; }

  /// lambda for every basis column (j,s), in column order.
  RVector column_values() const {
    RVector out(dim());
    for (Index j = 0; j < sector_count(); ++j) out.segment(sector_begin(j), multiplicity(j)).setConstant(values_(j));
    return out;
  }

  double trace() const {
    double t = 0.0;
    for (Index j = 0; j < sector_count(); ++j) t += values_(j) * static_cast<double>(multiplicity(j));
    return t;
  }

  CMatrix projector(Index j) const {
    const auto block = basis_.middleCols(sector_begin(j), multiplicity(j));
    return block * block.adjoint();
  }

  CMatrix matrix() const {
    return basis_ * column_values().cast<Complex>().asDiagonal() * basis_.adjoint();
  }

  HermitianOperator as_operator() const {
    const CMatrix m = matrix();
    return HermitianOperator(0.5 * (m + m.adjoint()));
  }

 private:
  RVector values_;
  std::vector<Index> multiplicities_;
  std::vector<Index> offsets_;
  CMatrix basis_;
};

/// p(lambda_j) = Tr(rho Pi_j), aligned with Observable::values().
struct EigenvalueDistribution {
  RVector values;
  RVector probabilities;

  Index size() const noexcept { return probabilities.size(); }
  double total() const { return probabilities.sum(); }
};

/// D_{js}^{(n)} = <j,s|psi_n>: rows are sector-basis labels, columns are
/// the state's eigenvectors.
struct OverlapTable {
  CMatrix amplitudes;

  RVector row_norms_by_state() const { return amplitudes.colwise().squaredNorm().transpose(); }
};

inline void require_same_dim(Index a, Index b, const char* what) {
  if (a != b) {
    throw ValidationError(std::string(what) + ": dimension mismatch (" + std::to_string(a) + " vs " +
                          std::to_string(b) + ")");
  }
}

inline OverlapTable overlaps(const QuantumState& state, const Observable& obs) {
  require_same_dim(state.dim(), obs.dim(), "overlaps");
  return OverlapTable{obs.basis().adjoint() * state.components()};
}

/// Outcome weights per basis column: sum_n q_n |<b_k|psi_n>|^2.
inline RVector basis_outcome_weights(const QuantumState& state, const CMatrix& basis) {
  require_same_dim(state.dim(), basis.rows(), "basis_outcome_weights");
  const CMatrix amp = basis.adjoint() * state.components();
  return amp.cwiseAbs2() * state.weights();
}

inline EigenvalueDistribution eigenvalue_distribution(const QuantumState& state, const Observable& obs) {
  const RVector per_column = basis_outcome_weights(state, obs.basis());
  EigenvalueDistribution d{obs.values(), RVector(obs.sector_count())};
  for (Index j = 0; j < obs.sector_count(); ++j) {
    d.probabilities(j) = per_column.segment(obs.sector_begin(j), obs.multiplicity(j)).sum();
  }
  return d;
}

/// Tr(rho M).
inline double expectation(const QuantumState& state, const HermitianOperator& m) {
  require_same_dim(state.dim(), m.dim(), "expectation");
  const CMatrix& psi = state.components();
  const CMatrix mpsi = m.matrix() * psi;
  double total = 0.0;
  for (Index n = 0; n < psi.cols(); ++n) total += state.weights()(n) * psi.col(n).dot(mpsi.col(n)).real();
  return total;
}

struct ConstraintValues {
  double normalization = 0.0;  // C_N = Tr rho - 1
  double energy = 0.0;         // C_E = Tr(rho T) - E0
};

/// Raw-matrix variant; accepts unnormalized rho.
inline ConstraintValues constraints_eval(const CMatrix& rho, const HermitianOperator& hamiltonian, double target_energy) {
  require_same_dim(rho.rows(), hamiltonian.dim(), "constraints_eval");
  const double tr = rho.trace().real();
  const double energy = (rho * hamiltonian.matrix()).trace().real();
  return {tr - 1.0, energy - target_energy};
}

inline ConstraintValues constraints_eval(const QuantumState& state, const HermitianOperator& hamiltonian,
                                         double target_energy) {
  require_same_dim(state.dim(), hamiltonian.dim(), "constraints_eval");
  return {state.weights().sum() - 1.0, expectation(state, hamiltonian) - target_energy};
}

}  // namespace huo
