#pragma once

// Bump-pulse realization of an instantaneous collective rotation, and a
// time-resolved simulation of the driven cavity used to validate the
// delta-pulse idealization.

#include "cavityctl/dynamics.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace cavityctl {

/// C_p = sqrt(pi/e) W_{-1/2,1/2}(1) = 2 * integral_0^1 exp(-1/(4u(1-u))) du.
inline constexpr double kBumpCp = 0.443993816168079;

struct BumpPulseSpec {
  double theta = 0;  ///< target flip angle, rad
  double T = 0.01;   ///< duration, units of 1/g
  double kappa = 0;  ///< damping rate the waveform is shaped for, units of g
  Axis axis = Axis::X;

  void validate() const {
    if (!(T > 0)) throw std::invalid_argument("BumpPulseSpec: T must be > 0");
    if (!(kappa >= 0)) throw std::invalid_argument("BumpPulseSpec: kappa must be >= 0");
  }
  /// Non-fatal advisories (short-pulse limit not met).
  std::vector<std::string> warnings(double g = 1.0) const {
    std::vector<std::string> w;
    if (g * T > 0.1) w.push_back("bump pulse: g*T = " + std::to_string(g * T) + " > 0.1, short-pulse limit not met");
    return w;
  }
};

/// f(t) = exp(-T^2 / (4 t (T - t))) on (0, T), zero elsewhere.
inline double bump_envelope(double T, double t) {
  if (!(t > 0) || !(t < T)) return 0.0;
  return std::exp(-T * T / (4.0 * t * (T - t)));
}

/// f'(t) = f(t) T^2 (T - 2t) / (4 t^2 (t - T)^2).
inline double bump_envelope_derivative(double T, double t) {
  const double f = bump_envelope(T, t);
  if (f == 0.0) return 0.0;
  return f * T * T * (T - 2.0 * t) / (4.0 * t * t * (t - T) * (t - T));
}

namespace detail {
inline cplx axis_phase(Axis a) { return a == Axis::X ? cplx{1, 0} : cplx{0, -1}; }
inline double bump_gain(const BumpPulseSpec& b, double g) { return 2.0 * b.theta / (g * b.T * kBumpCp); }
}  // namespace detail

/// Drive amplitude alpha(t) = K [kappa/2 f(t) + f'(t)], K = 2 theta / (g T C_p),
/// times 1 (x) or -i (y). Solves A(T) = 0 and integral A = theta / g.
inline cplx bump_waveform(const BumpPulseSpec& b, double t, double g = 1.0) {
  b.validate();
  const double k = detail::bump_gain(b, g);
  const double a = k * (0.5 * b.kappa * bump_envelope(b.T, t) + bump_envelope_derivative(b.T, t));
  return detail::axis_phase(b.axis) * a;
}

/// Filtered response A(t) = integral_0^t exp(-kappa (t - t') / 2) alpha(t') dt' in closed form: K f(t).
inline cplx bump_response(const BumpPulseSpec& b, double t, double g = 1.0) {
  b.validate();
  return detail::axis_phase(b.axis) * (detail::bump_gain(b, g) * bump_envelope(b.T, t));
}

struct BumpConditions {
  double A_T_rel = 0;         ///< |A(T)| / max_t |A(t)|
  double area_rel_err = 0;    ///< |g integral A - theta| / |theta|
};

/// Checks the two pulse conditions by adaptive Gauss-Kronrod quadrature of alpha itself:
/// A(T) = int e^{-kappa (T - t)/2} alpha dt and, swapping the order of integration,
/// int A dt = int alpha(t) w(t) dt with w = (2/kappa)(1 - e^{-kappa (T - t)/2}) (w = T - t at kappa = 0).
inline BumpConditions check_bump_conditions(const BumpPulseSpec& b, double g = 1.0) {
  b.validate();
  using boost::math::quadrature::gauss_kronrod;
  auto alpha = [&](double t) { return (std::conj(detail::axis_phase(b.axis)) * bump_waveform(b, t, g)).real(); };
  auto filt = [&](double t) { return std::exp(-0.5 * b.kappa * (b.T - t)); };
  auto weight = [&](double t) {
    const double x = b.T - t;
    return b.kappa > 0 ? (2.0 / b.kappa) * (1.0 - std::exp(-0.5 * b.kappa * x)) : x;
  };
  const double a_T = gauss_kronrod<double, 61>::integrate([&](double t) { return filt(t) * alpha(t); }, 0.0, b.T, 8, 1e-12);
  const double area = gauss_kronrod<double, 61>::integrate([&](double t) { return weight(t) * alpha(t); }, 0.0, b.T, 8, 1e-12);
  const double peak = std::abs(detail::bump_gain(b, g)) * std::exp(-1.0);
  BumpConditions c;
  c.A_T_rel = peak > 0 ? std::abs(a_T) / peak : std::abs(a_T);
  c.area_rel_err = b.theta != 0 ? std::abs(g * area - b.theta) / std::abs(b.theta) : std::abs(g * area);
  return c;
}

struct BumpSimulation {
  DensityMatrix state;  ///< at t = T (lab and displaced frames coincide)
  double x_quadrature_0 = 0;  ///< <a + a^dagger> at t = 0
  double x_quadrature_T = 0;  ///< at t = T
  int steps = 0;
  std::vector<std::string> warnings;
};

/// Full Lindblad propagation of H0 + i(alpha_d a^dagger - alpha_d^* a) over [0, T].
///
/// The drive alpha_d = alpha / 2 sets the mean field beta(t) = A(t) / 2, so that
/// the spins see the rotation angle theta. The mode is simulated in the frame
/// displaced by beta(t), where the coherent part is removed and the spins feel
/// g (beta^* J- + beta J+); the displacement vanishes at t = T. Midpoint
/// exponentials with a Strang-split exact decay step, dt = T / steps.
inline BumpSimulation simulate_bump_pulse(const DensityMatrix& rho0, const BumpPulseSpec& b, const SystemParams& params,
                                          int steps = 2000) {
  b.validate();
  if (steps < 1000) throw std::invalid_argument("simulate_bump_pulse: steps must be >= 1000 (dt <= T/1000)");
  const SpaceSpec& spec = rho0.space();
  params.validate(spec);
  BumpSimulation out;
  out.warnings = b.warnings(params.g);
  out.steps = steps;

  const Matrix h0 = build_h0(spec, params).matrix;
  const auto coll = build_collective(spec);
  const auto [a, ad] = build_mode_ops(spec);
  const Matrix xq = a.matrix + ad.matrix;
  out.x_quadrature_0 = expectation(rho0, xq).real();

  const double h = b.T / steps;
  const DecayMap decay(spec, params.kappa * h);
  Matrix rho = rho0.matrix();
  for (int k = 0; k < steps; ++k) {
    const double tm = (k + 0.5) * h;
    const cplx beta = 0.5 * bump_response(b, tm, params.g);
    Matrix ht = h0 + params.g * (std::conj(beta) * coll.jminus.matrix + beta * coll.jplus.matrix);
    ht = 0.5 * (ht + ht.adjoint()).eval();
    const HermitianSpectrum sp(ht);
    if (params.kappa == 0.0) {
      const Matrix u = sp.unitary(h);
      rho = u * rho * u.adjoint();
    } else {
      const Matrix u = sp.unitary(h / 2);
      rho = u * rho * u.adjoint();
      rho = decay.apply(rho);
      rho = u * rho * u.adjoint();
    }
  }
  out.state = DensityMatrix(spec, 0.5 * (rho + rho.adjoint()));
  out.x_quadrature_T = expectation(out.state, xq).real() + 2.0 * (0.5 * bump_response(b, b.T, params.g)).real();
  return out;
}

/// Idealized counterpart: free(T/2), instantaneous rotation, free(T/2).
inline DensityMatrix delta_pulse_reference(const DensityMatrix& rho0, const BumpPulseSpec& b, const SystemParams& params,
                                           double dt = 1e-4) {
  PropagationOptions o;
  o.dt = dt;
  Propagator p(rho0.space(), params, o);
  return p.free_evolve(p.rotate(p.free_evolve(rho0, b.T / 2), b.axis, b.theta), b.T / 2);
}

}  // namespace cavityctl
