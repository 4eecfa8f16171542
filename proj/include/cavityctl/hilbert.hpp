#pragma once

// Truncated Hilbert space of N spin-1/2 particles coupled to one bosonic mode.
//
// Composite index = fock_index * spin_dim + spin_index.
// FullProduct: spin_index is a bit string, spin 1 is the most significant bit,
//              bit value 1 means |up>.
// DickeSymmetricReduced: spin_index = number of excited spins in the
//              symmetric multiplet J = N/2 (0 is |G>, N is |E>).

#include "cavityctl/linalg.hpp"

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cavityctl {

enum class SpinBasis { FullProduct, DickeSymmetricReduced };

inline std::string to_string(SpinBasis b) {
  return b == SpinBasis::FullProduct ? "full" : "dicke";
}

inline SpinBasis spin_basis_from_string(const std::string& s) {
  if (s == "full") return SpinBasis::FullProduct;
  if (s == "dicke") return SpinBasis::DickeSymmetricReduced;
  throw std::invalid_argument("unknown spin basis '" + s + "' (expected full|dicke)");
}

struct SpaceSpec {
  int n_spins = 1;
  int fock_cutoff = 1;  ///< largest photon number kept
  SpinBasis spin_basis = SpinBasis::FullProduct;

  Eigen::Index fock_dim() const { return fock_cutoff + 1; }
  Eigen::Index spin_dim() const {
    return spin_basis == SpinBasis::FullProduct ? (Eigen::Index{1} << n_spins) : n_spins + 1;
  }
  Eigen::Index dim() const { return fock_dim() * spin_dim(); }
  Eigen::Index index(Eigen::Index fock, Eigen::Index spin) const { return fock * spin_dim() + spin; }

  void validate() const {
    if (n_spins < 0) throw std::invalid_argument("SpaceSpec: n_spins must be >= 0");
    if (fock_cutoff < 0) throw std::invalid_argument("SpaceSpec: fock_cutoff must be >= 0");
    if (spin_basis == SpinBasis::FullProduct && n_spins > 12)
      throw std::invalid_argument("SpaceSpec: more than 12 spins in the product basis is not supported");
  }

  friend bool operator==(const SpaceSpec&, const SpaceSpec&) = default;
};

struct SystemParams {
  double g = 1.0;
  double kappa = 0.0;
  std::vector<double> deltas;  ///< one detuning per spin, units of g

  void validate(const SpaceSpec& spec) const {
    if (!(g > 0)) throw std::invalid_argument("SystemParams: g must be > 0");
    if (!(kappa >= 0)) throw std::invalid_argument("SystemParams: kappa must be >= 0");
    if (static_cast<int>(deltas.size()) != spec.n_spins)
      throw std::invalid_argument("SystemParams: deltas has " + std::to_string(deltas.size()) +
                                  " entries, expected n_spins = " + std::to_string(spec.n_spins));
  }

  bool resonant_degenerate() const {
    for (double d : deltas)
      if (d != deltas.front()) return false;
    return true;
  }

  friend bool operator==(const SystemParams&, const SystemParams&) = default;
};

struct Operator {
  SpaceSpec space;
  Matrix matrix;

  Operator adjoint() const { return {space, matrix.adjoint()}; }
  bool hermitian(double tol = 1e-12) const { return is_hermitian(matrix, tol); }
};

inline Operator operator+(const Operator& a, const Operator& b) { return {a.space, a.matrix + b.matrix}; }
inline Operator operator-(const Operator& a, const Operator& b) { return {a.space, a.matrix - b.matrix}; }
inline Operator operator*(const Operator& a, const Operator& b) { return {a.space, a.matrix * b.matrix}; }
inline Operator operator*(cplx c, const Operator& a) { return {a.space, c * a.matrix}; }
inline Operator commutator(const Operator& a, const Operator& b) { return {a.space, commutator(a.matrix, b.matrix)}; }

class DensityMatrix {
 public:
  DensityMatrix() = default;
  DensityMatrix(SpaceSpec space, Matrix m) : space_(space), m_(std::move(m)) {
    if (m_.rows() != space_.dim() || m_.cols() != space_.dim())
      throw std::invalid_argument("DensityMatrix: matrix size does not match the space");
  }

  static DensityMatrix pure(const SpaceSpec& space, const Vector& psi) {
    if (psi.size() != space.dim()) throw std::invalid_argument("DensityMatrix::pure: state size mismatch");
    Vector v = psi / psi.norm();
    return {space, v * v.adjoint()};
  }

  const SpaceSpec& space() const { return space_; }
  const Matrix& matrix() const { return m_; }
  Matrix& matrix() { return m_; }
  Eigen::Index dim() const { return m_.rows(); }

  double trace() const { return m_.trace().real(); }
  double purity() const { return trace_product(m_, m_).real(); }
  double min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m_ + m_.adjoint()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  }

  /// Throws if Hermiticity, unit trace or positivity are violated.
  void validate(double herm_tol = 1e-10, double trace_tol = 1e-10, double neg_tol = 1e-8) const {
    if (!is_hermitian(m_, herm_tol)) throw std::invalid_argument("DensityMatrix: not Hermitian");
    if (std::abs(trace() - 1.0) > trace_tol) throw std::invalid_argument("DensityMatrix: trace != 1");
    if (min_eigenvalue() < -neg_tol) throw std::invalid_argument("DensityMatrix: negative eigenvalue");
  }

 private:
  SpaceSpec space_;
  Matrix m_;
};

namespace detail {

inline Matrix annihilation(Eigen::Index fock_dim) {
  Matrix a = Matrix::Zero(fock_dim, fock_dim);
  for (Eigen::Index n = 1; n < fock_dim; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline Matrix on_spins(const SpaceSpec& spec, const Matrix& spin_op) {
  return kron(Matrix::Identity(spec.fock_dim(), spec.fock_dim()), spin_op);
}

inline Matrix on_mode(const SpaceSpec& spec, const Matrix& mode_op) {
  return kron(mode_op, Matrix::Identity(spec.spin_dim(), spec.spin_dim()));
}

/// Bit of spin n (0-based) inside a product-basis spin index.
inline int spin_bit(const SpaceSpec& spec, int n) { return spec.n_spins - 1 - n; }

/// Raising operator of the symmetric multiplet, J+ |k> = sqrt((k+1)(N-k)) |k+1>.
inline Matrix dicke_raising(int n_spins) {
  Matrix jp = Matrix::Zero(n_spins + 1, n_spins + 1);
  for (int k = 0; k < n_spins; ++k) jp(k + 1, k) = std::sqrt(static_cast<double>((k + 1) * (n_spins - k)));
  return jp;
}

inline Matrix spin_single(const SpaceSpec& spec, int n, const Matrix& op2) {
  const Eigen::Index d = spec.spin_dim();
  const int bit = spin_bit(spec, n);
  Matrix out = Matrix::Zero(d, d);
  for (Eigen::Index col = 0; col < d; ++col) {
    const int b = static_cast<int>((col >> bit) & 1);
    for (int b2 = 0; b2 < 2; ++b2) {
      const cplx amp = op2(b2, b);
      if (amp == cplx{}) continue;
      const Eigen::Index row = (col & ~(Eigen::Index{1} << bit)) | (Eigen::Index{b2} << bit);
      out(row, col) += amp;
    }
  }
  return out;
}

}  // namespace detail

/// (a, a^dagger) on the composite space.
inline std::pair<Operator, Operator> build_mode_ops(const SpaceSpec& spec) {
  spec.validate();
  Matrix a = detail::on_mode(spec, detail::annihilation(spec.fock_dim()));
  return {Operator{spec, a}, Operator{spec, a.adjoint()}};
}

inline Operator build_number_op(const SpaceSpec& spec) {
  auto [a, ad] = build_mode_ops(spec);
  return ad * a;
}

struct SpinOps {
  Operator plus, minus, z;
};

/// sigma_+, sigma_-, sigma_z of spin n (1-based).
inline SpinOps build_spin_ops(const SpaceSpec& spec, int n) {
  spec.validate();
  if (spec.spin_basis != SpinBasis::FullProduct)
    throw std::invalid_argument("build_spin_ops: individual spins are not addressable in the Dicke basis");
  if (n < 1 || n > spec.n_spins) throw std::out_of_range("build_spin_ops: spin index out of range");
  Matrix sp2(2, 2), sz2(2, 2);
  sp2 << 0, 0, 1, 0;  // |1><0| with 1 = up
  sz2 << -1, 0, 0, 1;
  Matrix sp = detail::spin_single(spec, n - 1, sp2);
  Matrix sz = detail::spin_single(spec, n - 1, sz2);
  return {Operator{spec, detail::on_spins(spec, sp)}, Operator{spec, detail::on_spins(spec, sp.adjoint())},
          Operator{spec, detail::on_spins(spec, sz)}};
}

struct CollectiveOps {
  Operator jx, jy, jz, jplus, jminus;
};

/// Collective Pauli sums: J+ = sum sigma_+, Jx = J+ + J-, Jy = -i (J+ - J-), Jz = sum sigma_z.
inline CollectiveOps build_collective(const SpaceSpec& spec) {
  spec.validate();
  const Eigen::Index d = spec.spin_dim();
  Matrix jp = Matrix::Zero(d, d), jz = Matrix::Zero(d, d);
  if (spec.spin_basis == SpinBasis::FullProduct) {
    Matrix sp2(2, 2), sz2(2, 2);
    sp2 << 0, 0, 1, 0;
    sz2 << -1, 0, 0, 1;
    for (int n = 0; n < spec.n_spins; ++n) {
      jp += detail::spin_single(spec, n, sp2);
      jz += detail::spin_single(spec, n, sz2);
    }
  } else {
    jp = detail::dicke_raising(spec.n_spins);
    for (int k = 0; k <= spec.n_spins; ++k) jz(k, k) = 2.0 * k - spec.n_spins;
  }
  Matrix jpf = detail::on_spins(spec, jp);
  Matrix jmf = jpf.adjoint();
  return {Operator{spec, jpf + jmf}, Operator{spec, -I * (jpf - jmf)}, Operator{spec, detail::on_spins(spec, jz)},
          Operator{spec, jpf}, Operator{spec, jmf}};
}

/// Total excitation number a^dagger a + sum (sigma_z + 1)/2.
inline Operator build_excitation_number(const SpaceSpec& spec) {
  auto col = build_collective(spec);
  Matrix id = Matrix::Identity(spec.dim(), spec.dim());
  return {spec, build_number_op(spec).matrix + 0.5 * (col.jz.matrix + spec.n_spins * id)};
}

/// H0 = sum_n (Delta_n / 2) sigma_z^(n) + g sum_n (a^dagger sigma_-^(n) + a sigma_+^(n)), hbar = 1.
inline Operator build_h0(const SpaceSpec& spec, const SystemParams& params) {
  params.validate(spec);
  auto [a, ad] = build_mode_ops(spec);
  auto col = build_collective(spec);
  Matrix h = params.g * (ad.matrix * col.jminus.matrix + a.matrix * col.jplus.matrix);
  if (spec.spin_basis == SpinBasis::FullProduct) {
    for (int n = 1; n <= spec.n_spins; ++n)
      if (params.deltas[n - 1] != 0.0) h += 0.5 * params.deltas[n - 1] * build_spin_ops(spec, n).z.matrix;
  } else if (spec.n_spins > 0) {
    if (!params.resonant_degenerate())
      throw std::invalid_argument("build_h0: the Dicke basis requires equal detunings");
    h += 0.5 * params.deltas.front() * col.jz.matrix;
  }
  return {spec, h};
}

/// Squeezing generator V_s = (i/2) [(a^dagger)^2 - a^2]; exp(-i s V_s) is the squeeze kick.
inline Operator build_squeeze_generator(const SpaceSpec& spec) {
  auto [a, ad] = build_mode_ops(spec);
  return {spec, 0.5 * I * (ad.matrix * ad.matrix - a.matrix * a.matrix)};
}

/// Rotation generators V_x = Jx / 2, V_y = Jy / 2.
inline std::pair<Operator, Operator> build_rotation_generators(const SpaceSpec& spec) {
  auto col = build_collective(spec);
  return {cplx{0.5} * col.jx, cplx{0.5} * col.jy};
}

// ---------------------------------------------------------------------------
// Named states

/// Spin-space kets for the collective basis states.
///
/// |A> is the staggered symmetric state prod_{n even} sigma_z^(n) |S>: for two
/// spins this is the singlet (|ud> - |du>)/sqrt(2); for four spins it is the
/// two-excitation state (1/sqrt 6) sum_{i<j} (-1)^(i+j) |u_i u_j>, the
/// "totally antisymmetric" state with cumulant -1/3. It does not exist in the
/// Dicke basis.
struct NamedSpinStates {
  Vector G, E, S;
  std::optional<Vector> A;
};

inline NamedSpinStates dicke_states(const SpaceSpec& spec) {
  spec.validate();
  const int n = spec.n_spins;
  if (n < 2 || n % 2 != 0) throw std::invalid_argument("dicke_states: n_spins must be even and >= 2");
  const Eigen::Index d = spec.spin_dim();
  NamedSpinStates out;
  out.G = Vector::Zero(d);
  out.E = Vector::Zero(d);
  out.S = Vector::Zero(d);
  if (spec.spin_basis == SpinBasis::DickeSymmetricReduced) {
    out.G(0) = 1;
    out.E(n) = 1;
    out.S(n / 2) = 1;
    return out;
  }
  out.G(0) = 1;
  out.E(d - 1) = 1;
  Vector a = Vector::Zero(d);
  for (Eigen::Index s = 0; s < d; ++s) {
    if (__builtin_popcountll(static_cast<unsigned long long>(s)) != n / 2) continue;
    out.S(s) = 1;
    int parity = 0;  // number of excited spins with even 1-based label
    for (int k = 0; k < n; ++k)
      if (((s >> detail::spin_bit(spec, k)) & 1) && (k + 1) % 2 == 0) ++parity;
    a(s) = parity % 2 ? -1.0 : 1.0;
  }
  out.S /= out.S.norm();
  a /= a.norm();
  out.A = a;
  return out;
}

/// Product of single-spin singlets (spins 1-2, 3-4, ...): a J = 0 state.
inline Vector singlet_pairs_state(const SpaceSpec& spec) {
  if (spec.spin_basis != SpinBasis::FullProduct || spec.n_spins % 2 != 0 || spec.n_spins < 2)
    throw std::invalid_argument("singlet_pairs_state: needs an even number of spins in the product basis");
  const Eigen::Index d = spec.spin_dim();
  Vector v = Vector::Zero(d);
  const int pairs = spec.n_spins / 2;
  for (int mask = 0; mask < (1 << pairs); ++mask) {
    Eigen::Index s = 0;
    double sign = 1.0;
    for (int p = 0; p < pairs; ++p) {
      const bool first_up = (mask >> p) & 1;  // (|ud> - |du>) per pair
      const int up = first_up ? 2 * p : 2 * p + 1;
      if (!first_up) sign = -sign;
      s |= Eigen::Index{1} << detail::spin_bit(spec, up);
    }
    v(s) = sign;
  }
  return v / v.norm();
}

/// |n> (x) |spin> on the composite space.
inline Vector product_ket(const SpaceSpec& spec, int photons, const Vector& spin) {
  if (photons < 0 || photons > spec.fock_cutoff) throw std::out_of_range("product_ket: photon number outside truncation");
  if (spin.size() != spec.spin_dim()) throw std::invalid_argument("product_ket: spin state size mismatch");
  Vector v = Vector::Zero(spec.dim());
  v.segment(photons * spec.spin_dim(), spec.spin_dim()) = spin;
  return v;
}

inline DensityMatrix product_state(const SpaceSpec& spec, int photons, const Vector& spin) {
  return DensityMatrix::pure(spec, product_ket(spec, photons, spin));
}

/// Projector |n, spin><n, spin|.
inline Operator labeled_projector(const SpaceSpec& spec, int photons, const Vector& spin) {
  Vector v = product_ket(spec, photons, spin);
  v /= v.norm();
  return {spec, v * v.adjoint()};
}

/// Look up a named collective spin state: G, E, S, A.
inline Vector named_spin_state(const SpaceSpec& spec, const std::string& name) {
  auto st = dicke_states(spec);
  if (name == "G") return st.G;
  if (name == "E") return st.E;
  if (name == "S") return st.S;
  if (name == "A") {
    if (!st.A) throw std::invalid_argument("state |A> is not available in the Dicke basis");
    return *st.A;
  }
  throw std::invalid_argument("unknown named spin state '" + name + "'");
}

// ---------------------------------------------------------------------------

/// Reduced spin state Tr_cavity(rho).
inline Matrix partial_trace_cavity(const DensityMatrix& rho) {
  const auto& spec = rho.space();
  const Eigen::Index d = spec.spin_dim();
  Matrix out = Matrix::Zero(d, d);
  for (Eigen::Index n = 0; n < spec.fock_dim(); ++n) out += rho.matrix().block(n * d, n * d, d, d);
  return out;
}

/// Reduced cavity state Tr_spins(rho).
inline Matrix partial_trace_spins(const DensityMatrix& rho) {
  const auto& spec = rho.space();
  const Eigen::Index d = spec.spin_dim(), f = spec.fock_dim();
  Matrix out(f, f);
  for (Eigen::Index m = 0; m < f; ++m)
    for (Eigen::Index n = 0; n < f; ++n) out(m, n) = rho.matrix().block(m * d, n * d, d, d).trace();
  return out;
}

inline cplx expectation(const DensityMatrix& rho, const Matrix& op) {
  if (op.rows() != rho.dim() || op.cols() != rho.dim()) throw std::invalid_argument("expectation: dimension mismatch");
  return trace_product(op, rho.matrix());
}

inline cplx expectation(const DensityMatrix& rho, const Operator& op) {
  if (!(op.space == rho.space())) throw std::invalid_argument("expectation: operator and state live on different spaces");
  return expectation(rho, op.matrix);
}

/// Population of the top two Fock levels. The vacuum never counts, so this is
/// zero for fock_cutoff == 0 and the n = 1 population for fock_cutoff == 1.
inline double fock_leakage(const DensityMatrix& rho) {
  const auto& spec = rho.space();
  const Eigen::Index d = spec.spin_dim();
  if (spec.fock_cutoff == 0) return 0.0;
  const Eigen::Index first = std::max<Eigen::Index>(1, spec.fock_cutoff - 1);
  double p = 0;
  for (Eigen::Index i = first * d; i < spec.dim(); ++i) p += rho.matrix()(i, i).real();
  return p;
}

}  // namespace cavityctl
