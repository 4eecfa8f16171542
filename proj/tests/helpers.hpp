#pragma once

#include "cavityctl/cavityctl.hpp"

#include <random>

namespace testing_helpers {

using namespace cavityctl;

inline Vector random_ket(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Vector v(n);
  for (Eigen::Index k = 0; k < n; ++k) v(k) = cplx(nd(rng), nd(rng));
  return v / v.norm();
}

/// Random full-rank mixed state (Ginibre ensemble).
inline Matrix random_density(Eigen::Index n, std::mt19937_64& rng, Eigen::Index rank = -1) {
  if (rank < 0) rank = n;
  std::normal_distribution<double> nd;
  Matrix g(n, rank);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < rank; ++j) g(i, j) = cplx(nd(rng), nd(rng));
  Matrix r = g * g.adjoint();
  return r / r.trace();
}

inline Matrix random_hermitian(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Matrix g(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) g(i, j) = cplx(nd(rng), nd(rng));
  return 0.5 * (g + g.adjoint());
}

inline Matrix random_unitary(Eigen::Index n, std::mt19937_64& rng) {
  return HermitianSpectrum(random_hermitian(n, rng)).unitary(1.0);
}

/// Tensor product of single-spin 2x2 states; spin 1 is the most significant factor.
inline Matrix spin_product(const std::vector<Matrix>& singles) {
  Matrix out = Matrix::Identity(1, 1);
  for (const auto& s : singles) out = detail::kron(out, s);
  return out;
}

inline double trace_distance(const Matrix& a, const Matrix& b) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a - b, Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

}  // namespace testing_helpers
