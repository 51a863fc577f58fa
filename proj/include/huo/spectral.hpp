#pragma once

#include <Eigen/Eigenvalues>

#include <numeric>
#include <optional>
#include <sstream>
#include <vector>

#include "huo/linalg.hpp"

namespace huo {

/// Eigenvalues ascending, orthonormal eigenvectors as columns, and a
/// partition of the indices into degenerate sectors.
struct SpectralDecomposition {
  RVector eigenvalues;
  CMatrix eigenvectors;
  std::vector<std::vector<Index>> groups;
  double degeneracy_tol = 0.0;

  Index dim() const noexcept { return eigenvalues.size(); }
  double energy(Index alpha) const { return eigenvalues(alpha); }
  auto eigenvector(Index alpha) const { return eigenvectors.col(alpha); }
  double spectral_range() const {
    return dim() == 0 ? 0.0 : eigenvalues(dim() - 1) - eigenvalues(0);
  }
  CMatrix reconstruct() const {
    return eigenvectors * eigenvalues.cast<Complex>().asDiagonal() * eigenvectors.adjoint();
  }
  bool nondegenerate() const { return static_cast<Index>(groups.size()) == dim(); }
};

/// Splits sorted values into maximal runs whose consecutive gaps are <= tol.
inline std::vector<std::vector<Index>> group_degenerate(const RVector& sorted, double tol) {
  std::vector<std::vector<Index>> groups;
  for (Index i = 0; i < sorted.size(); ++i) {
    if (i == 0 || sorted(i) - sorted(i - 1) > tol) groups.emplace_back();
    groups.back().push_back(i);
  }
  return groups;
}

inline double default_degeneracy_tol(const RVector& sorted) {
  if (sorted.size() == 0) return 1e-9;
  const double range = sorted(sorted.size() - 1) - sorted(0);
  const double scale = range > 0.0 ? range : std::max(1.0, sorted.cwiseAbs().maxCoeff());
  return 1e-9 * scale;
}

/// Dense Hermitian eigendecomposition. Each eigenvector's first significant
/// component is made real positive; equal eigenvalues keep solver order.
inline SpectralDecomposition spectral_decompose(const HermitianOperator& op,
                                                std::optional<double> degeneracy_tol = std::nullopt) {
  if (degeneracy_tol && !(*degeneracy_tol > 0.0)) {
    throw ValidationError("spectral_decompose: degeneracy_tol must be positive");
  }
  const CMatrix& m = op.matrix();
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(m);
  if (solver.info() != Eigen::Success) {
    std::ostringstream os;
    os << "spectral_decompose: eigensolver did not converge (dim=" << m.rows()
       << ", max|M|=" << max_abs(m) << ", ||M||_F=" << m.norm() << ")";
    throw NumericError(os.str());
  }
  const RVector& raw_values = solver.eigenvalues();
  std::vector<Index> order(static_cast<std::size_t>(raw_values.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return raw_values(a) < raw_values(b); });

  SpectralDecomposition out;
  out.eigenvalues.resize(raw_values.size());
  out.eigenvectors.resize(m.rows(), m.cols());
  for (std::size_t k = 0; k < order.size(); ++k) {
    out.eigenvalues(static_cast<Index>(k)) = raw_values(order[k]);
    out.eigenvectors.col(static_cast<Index>(k)) = solver.eigenvectors().col(order[k]);
  }
  fix_column_phases(out.eigenvectors);
  out.degeneracy_tol = degeneracy_tol.value_or(default_degeneracy_tol(out.eigenvalues));
  out.groups = group_degenerate(out.eigenvalues, out.degeneracy_tol);
  return out;
}

}  // namespace huo
