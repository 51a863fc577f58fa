#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

#include "huo/errors.hpp"

namespace huo {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Largest Hilbert-space dimension any constructor will allocate.
/// Dense D x D complex storage is 16 D^2 bytes; 4096 -> 256 MiB per matrix.
inline std::size_t& dimension_cap() {
  static std::size_t cap = 4096;
  return cap;
}

inline void require_within_cap(std::size_t dim, const std::string& what) {
  if (dim > dimension_cap()) {
    throw ResourceError(what + ": dimension " + std::to_string(dim) + " exceeds cap " +
                        std::to_string(dimension_cap()));
  }
}

inline double max_abs(const CMatrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

inline double hermiticity_error(const CMatrix& m) { return max_abs(m - m.adjoint()); }

/// max |B^dagger B - I|
inline double orthonormality_error(const CMatrix& b) {
  return max_abs(b.adjoint() * b - CMatrix::Identity(b.cols(), b.cols()));
}

/// Wraps an angle into (-pi, pi].
inline double wrap_phase(double x) {
  double w = std::remainder(x, kTwoPi);
  if (w <= -kPi) w += kTwoPi;
  return w;
}

/// Multiplies every column by a unit phase so that its first component of
/// magnitude above `threshold` is real and positive.
inline void fix_column_phases(CMatrix& m, double threshold = 1e-8) {
  for (Index c = 0; c < m.cols(); ++c) {
    for (Index r = 0; r < m.rows(); ++r) {
      const double mag = std::abs(m(r, c));
      if (mag > threshold) {
        m.col(c) *= std::conj(m(r, c)) / mag;
        m(r, c) = Complex(mag, 0.0);
        break;
      }
    }
  }
}

/// Dense self-adjoint matrix. The constructor enforces Hermiticity to
/// 1e-12 relative to the largest entry.
class HermitianOperator {
 public:
  explicit HermitianOperator(CMatrix m) : m_(std::move(m)) {
    if (m_.rows() != m_.cols() || m_.rows() < 1) {
      throw ValidationError("HermitianOperator: matrix must be square with dim >= 1, got " +
                            std::to_string(m_.rows()) + "x" + std::to_string(m_.cols()));
    }
    require_within_cap(static_cast<std::size_t>(m_.rows()), "HermitianOperator");
    const double scale = max_abs(m_);
    const double err = hermiticity_error(m_);
    if (err > 1e-12 * std::max(scale, 1e-300) && err > 0.0) {
      std::ostringstream os;
      os << "HermitianOperator: max |M - M^dagger| = " << err << " exceeds 1e-12 * " << scale;
      throw ValidationError(os.str());
    }
  }

  static HermitianOperator identity(Index dim) {
    return HermitianOperator(CMatrix::Identity(dim, dim));
  }

  Index dim() const noexcept { return m_.rows(); }
  const CMatrix& matrix() const noexcept { return m_; }

 private:
  CMatrix m_;
};

// ---------------------------------------------------------------------------
// Matrix dump format: "dim=D" then D*D lines "row col re im", row-major.

inline void write_matrix_dump(std::ostream& os, const CMatrix& m) {
  if (m.rows() != m.cols()) throw ValidationError("matrix dump: matrix must be square");
  os << "dim=" << m.rows() << '\n';
  char buf[96];
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%ld %ld %.16e %.16e\n", static_cast<long>(r),
                    static_cast<long>(c), m(r, c).real(), m(r, c).imag());
      os << buf;
    }
  }
}

inline CMatrix read_matrix_dump(std::istream& is) {
  std::string header;
  if (!std::getline(is, header) || header.rfind("dim=", 0) != 0) {
    throw ValidationError("matrix dump: missing 'dim=D' header");
  }
  long dim = 0;
  try {
    dim = std::stol(header.substr(4));
  } catch (const std::exception&) {
    throw ValidationError("matrix dump: bad header '" + header + "'");
  }
  if (dim < 1) throw ValidationError("matrix dump: dim must be >= 1");
  require_within_cap(static_cast<std::size_t>(dim), "matrix dump");
  CMatrix m(dim, dim);
  for (long r = 0; r < dim; ++r) {
    for (long c = 0; c < dim; ++c) {
      long rr = -1;
      long cc = -1;
      double re = 0.0;
      double im = 0.0;
      if (!(is >> rr >> cc >> re >> im)) {
        throw ValidationError("matrix dump: truncated at entry " + std::to_string(r * dim + c));
      }
      if (rr != r || cc != c) {
        throw ValidationError("matrix dump: expected entry (" + std::to_string(r) + "," +
                              std::to_string(c) + "), found (" + std::to_string(rr) + "," +
                              std::to_string(cc) + ")");
      }
      m(r, c) = Complex(re, im);
    }
  }
  return m;
}

}  // namespace huo
