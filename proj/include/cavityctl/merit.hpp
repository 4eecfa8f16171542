#pragma once

// Figures of merit: Uhlmann fidelity, the cumulant measure C, dipole
// correlators, photon statistics and the cooperativity parameter.

#include "cavityctl/hilbert.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

namespace cavityctl {

/// Labels C above this value as beyond the semi-classical regime.
inline constexpr double kSemiClassicalThreshold = 0.15;

/// Uhlmann fidelity (Tr sqrt(sqrt(sigma) rho sqrt(sigma)))^2 between two density matrices.
inline double fidelity(const Matrix& rho, const Matrix& target) {
  if (rho.rows() != target.rows() || rho.cols() != target.cols())
    throw std::invalid_argument("fidelity: dimension mismatch");
  const double pt = trace_product(target, target).real();
  const double tt = target.trace().real();
  if (std::abs(pt - tt * tt) < 1e-12) {
    // Pure target: F = <psi|rho|psi>.
    const double f = trace_product(target, rho).real() / tt;
    return std::clamp(f, 0.0, 1.0);
  }
  Matrix st = psd_sqrt(target);
  Matrix m = st * rho * st;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.adjoint()), Eigen::EigenvaluesOnly);
  double s = 0;
  for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
    const double w = es.eigenvalues()(k);
    if (w < -1e-8) throw std::invalid_argument("fidelity: inputs are not positive semidefinite");
    if (w > 0) s += std::sqrt(w);
  }
  return std::clamp(s * s, 0.0, 1.0);
}

inline double fidelity(const DensityMatrix& rho, const DensityMatrix& target) {
  if (!(rho.space() == target.space())) throw std::invalid_argument("fidelity: states live on different spaces");
  return fidelity(rho.matrix(), target.matrix());
}

namespace detail {

inline void require_product_basis(const SpaceSpec& spec, const char* who) {
  if (spec.spin_basis != SpinBasis::FullProduct)
    throw std::invalid_argument(std::string(who) + ": requires the full product spin basis");
}

/// <sigma_+^(n) sigma_-^(m)> on a reduced spin matrix (0-based spins, n != m).
inline cplx raise_lower(const SpaceSpec& spec, const Matrix& rs, int n, int m) {
  const Eigen::Index bn = Eigen::Index{1} << spin_bit(spec, n);
  const Eigen::Index bm = Eigen::Index{1} << spin_bit(spec, m);
  cplx acc{};
  for (Eigen::Index s = 0; s < rs.rows(); ++s) {
    if (!(s & bm) || (s & bn)) continue;
    const Eigen::Index t = (s & ~bm) | bn;  // sigma_+^n sigma_-^m |s> = |t>
    acc += rs(s, t);
  }
  return acc;
}

/// <sigma_+^(n)> on a reduced spin matrix.
inline cplx raise(const SpaceSpec& spec, const Matrix& rs, int n) {
  const Eigen::Index bn = Eigen::Index{1} << spin_bit(spec, n);
  cplx acc{};
  for (Eigen::Index s = 0; s < rs.rows(); ++s)
    if (!(s & bn)) acc += rs(s, s | bn);
  return acc;
}

inline double excited_population_sum(const SpaceSpec& spec, const Matrix& rs) {
  double acc = 0;
  for (Eigen::Index s = 0; s < rs.rows(); ++s) {
    const int ups = spec.spin_basis == SpinBasis::FullProduct
                        ? __builtin_popcountll(static_cast<unsigned long long>(s))
                        : static_cast<int>(s);
    acc += ups * rs(s, s).real();
  }
  return acc;
}

}  // namespace detail

/// Cumulant measure C = (8 / N^2) Re sum_{n > m} <sigma_+^(n) sigma_-^(m)>_c.
///
/// Only distinct pairs enter: with the diagonal m = n terms the symmetric
/// Dicke state |N/2, 0> would give 2 instead of 1.
inline double cumulant_measure_spins(const SpaceSpec& spec, const Matrix& rs) {
  detail::require_product_basis(spec, "cumulant_measure");
  const int ns = spec.n_spins;
  if (ns < 2) return 0.0;
  std::vector<cplx> plus(ns);
  for (int n = 0; n < ns; ++n) plus[n] = detail::raise(spec, rs, n);
  cplx acc{};
  for (int n = 0; n < ns; ++n)
    for (int m = 0; m < n; ++m) acc += detail::raise_lower(spec, rs, n, m) - plus[n] * std::conj(plus[m]);
  return 8.0 / (static_cast<double>(ns) * ns) * acc.real();
}

inline double cumulant_measure(const DensityMatrix& rho) {
  detail::require_product_basis(rho.space(), "cumulant_measure");
  return cumulant_measure_spins(rho.space(), partial_trace_cavity(rho));
}

/// <J+ J-> on a reduced spin matrix (either basis).
inline double jpjm_spins(const SpaceSpec& spec, const Matrix& rs) {
  if (spec.spin_basis == SpinBasis::DickeSymmetricReduced) {
    Matrix jp = detail::dicke_raising(spec.n_spins);
    return trace_product(jp * jp.adjoint(), rs).real();
  }
  double acc = detail::excited_population_sum(spec, rs);
  for (int n = 0; n < spec.n_spins; ++n)
    for (int m = 0; m < spec.n_spins; ++m)
      if (n != m) acc += detail::raise_lower(spec, rs, n, m).real();
  return acc;
}

inline double jpjm(const DensityMatrix& rho) { return jpjm_spins(rho.space(), partial_trace_cavity(rho)); }

/// <J+ J->_corr = <J+ J-> - sum_n <sigma_+^(n) sigma_-^(n)>.
inline double jpjm_corr(const DensityMatrix& rho) {
  Matrix rs = partial_trace_cavity(rho);
  return jpjm_spins(rho.space(), rs) - detail::excited_population_sum(rho.space(), rs);
}

/// Normalizations used for reporting (four-spin maxima).
inline constexpr double kJpJmNorm = 6.0;
inline constexpr double kJpJmCorrNorm = 4.0;

inline double photon_number(const DensityMatrix& rho) {
  Matrix rc = partial_trace_spins(rho);
  double n = 0;
  for (Eigen::Index k = 0; k < rc.rows(); ++k) n += k * rc(k, k).real();
  return n;
}

/// g2 = <a^dag a^dag a a> / <a^dag a>^2, or nullopt when <a^dag a> <= 1e-12.
inline std::optional<double> g2(const DensityMatrix& rho) {
  Matrix rc = partial_trace_spins(rho);
  double n1 = 0, n2 = 0;
  for (Eigen::Index k = 0; k < rc.rows(); ++k) {
    const double p = rc(k, k).real();
    n1 += k * p;
    n2 += k * (k - 1.0) * p;
  }
  if (n1 <= 1e-12) return std::nullopt;
  return n2 / (n1 * n1);
}

/// Cooperativity 2 g^2 N / (kappa Omega), Omega the full width of the offsets;
/// +infinity when kappa or Omega vanish.
inline double cooperativity(const SystemParams& params) {
  if (params.deltas.empty()) return std::numeric_limits<double>::infinity();
  const auto [lo, hi] = std::minmax_element(params.deltas.begin(), params.deltas.end());
  const double omega = *hi - *lo;
  if (!(params.kappa > 0) || !(omega > 0)) return std::numeric_limits<double>::infinity();
  return 2.0 * params.g * params.g * static_cast<double>(params.deltas.size()) / (params.kappa * omega);
}

// ---------------------------------------------------------------------------

enum class MeritKind { Fidelity, Cumulant, Custom };

/// What an optimization maximizes, evaluated on the final state.
struct MeritSpec {
  MeritKind kind = MeritKind::Fidelity;
  /// Full-space target, or spin-only target when trace_out_cavity is set.
  Matrix target;
  bool trace_out_cavity = false;
  int sign = 1;  ///< Cumulant: maximize sign * C
  std::function<double(const DensityMatrix&)> custom;

  static MeritSpec fidelity_to(const Matrix& target, bool trace_out_cavity = false) {
    if (std::abs(target.trace().real() - 1.0) > 1e-10) throw std::invalid_argument("MeritSpec: target trace must be 1");
    MeritSpec m;
    m.kind = MeritKind::Fidelity;
    m.target = target;
    m.trace_out_cavity = trace_out_cavity;
    return m;
  }
  static MeritSpec cumulant(int sign = 1) {
    if (sign != 1 && sign != -1) throw std::invalid_argument("MeritSpec: cumulant sign must be +1 or -1");
    MeritSpec m;
    m.kind = MeritKind::Cumulant;
    m.sign = sign;
    return m;
  }
  static MeritSpec custom_fn(std::function<double(const DensityMatrix&)> f) {
    MeritSpec m;
    m.kind = MeritKind::Custom;
    m.custom = std::move(f);
    return m;
  }

  double evaluate(const DensityMatrix& rho) const {
    switch (kind) {
      case MeritKind::Fidelity:
        return trace_out_cavity ? fidelity(partial_trace_cavity(rho), target) : fidelity(rho.matrix(), target);
      case MeritKind::Cumulant:
        return sign * cumulant_measure(rho);
      case MeritKind::Custom:
        return custom(rho);
    }
    return 0;
  }
};

struct MeritReport {
  std::optional<double> F, C, jpjm_norm, jpjm_corr_norm, g2, cooperativity;

  bool beyond_semi_classical() const { return C && *C > kSemiClassicalThreshold; }
};

/// Everything computable on `rho`; F only when a fidelity target is supplied.
inline MeritReport merit_report(const DensityMatrix& rho, const SystemParams& params,
                                const MeritSpec* fidelity_spec = nullptr) {
  MeritReport r;
  if (fidelity_spec && fidelity_spec->kind == MeritKind::Fidelity) r.F = fidelity_spec->evaluate(rho);
  if (rho.space().spin_basis == SpinBasis::FullProduct && rho.space().n_spins >= 2) r.C = cumulant_measure(rho);
  if (rho.space().n_spins > 0) {
    r.jpjm_norm = jpjm(rho) / kJpJmNorm;
    r.jpjm_corr_norm = jpjm_corr(rho) / kJpJmCorrNorm;
  }
  r.g2 = g2(rho);
  if (!params.deltas.empty()) r.cooperativity = cooperativity(params);
  return r;
}

}  // namespace cavityctl
