#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>

namespace cavityctl {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

inline constexpr cplx I{0.0, 1.0};

inline Matrix commutator(const Matrix& a, const Matrix& b) { return a * b - b * a; }

inline bool is_hermitian(const Matrix& m, double tol = 1e-12) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

/// Tr[A B] without forming the product.
inline cplx trace_product(const Matrix& a, const Matrix& b) {
  return (a.transpose().array() * b.array()).sum();
}

/// Cached spectral decomposition of a Hermitian matrix H = V diag(w) V^dagger.
///
/// Every unitary the propagators need is exp(-i t H) for a fixed H and many t,
/// so the decomposition is done once and each exponential costs one product.
class HermitianSpectrum {
 public:
  HermitianSpectrum() = default;
  explicit HermitianSpectrum(const Matrix& h) {
    if (!is_hermitian(h, 1e-10 * std::max(1.0, h.cwiseAbs().maxCoeff())))
      throw std::invalid_argument("HermitianSpectrum: matrix is not Hermitian");
    Eigen::SelfAdjointEigenSolver<Matrix> es(h);
    if (es.info() != Eigen::Success) throw std::runtime_error("HermitianSpectrum: eigensolver failed");
    values_ = es.eigenvalues();
    vectors_ = es.eigenvectors();
  }

  /// exp(-i t H)
  Matrix unitary(double t) const {
    Vector phase(values_.size());
    for (Eigen::Index k = 0; k < values_.size(); ++k) phase(k) = std::exp(-I * (t * values_(k)));
    return vectors_ * phase.asDiagonal() * vectors_.adjoint();
  }

  /// exp(-i t H) psi without forming the unitary.
  Vector apply(double t, const Vector& psi) const {
    Vector c = vectors_.adjoint() * psi;
    for (Eigen::Index k = 0; k < values_.size(); ++k) c(k) *= std::exp(-I * (t * values_(k)));
    return vectors_ * c;
  }

  template <typename F>
  Matrix apply_function(F&& f) const {
    Vector d(values_.size());
    for (Eigen::Index k = 0; k < values_.size(); ++k) d(k) = f(values_(k));
    return vectors_ * d.asDiagonal() * vectors_.adjoint();
  }

  const RealVector& values() const { return values_; }
  const Matrix& vectors() const { return vectors_; }
  Eigen::Index size() const { return values_.size(); }

 private:
  RealVector values_;
  Matrix vectors_;
};

/// Principal square root of a positive semidefinite Hermitian matrix.
/// Eigenvalues in [-clip, 0) are treated as numerical noise and set to zero.
inline Matrix psd_sqrt(const Matrix& m, double clip = 1e-8) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.adjoint()));
  RealVector w = es.eigenvalues();
  for (Eigen::Index k = 0; k < w.size(); ++k) {
    if (w(k) < -clip) throw std::invalid_argument("psd_sqrt: matrix has a significantly negative eigenvalue");
    w(k) = w(k) > 0 ? std::sqrt(w(k)) : 0.0;
  }
  return es.eigenvectors() * w.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace cavityctl
