#pragma once

// Pulse-package propagation of the cavity master equation
//   d rho/dt = -i [H0, rho] + kappa (a rho a^dagger - {a^dagger a, rho} / 2)
// interleaved with instantaneous collective rotations and squeezing kicks.

#include "cavityctl/hilbert.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cavityctl {

struct TruncationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Axis { X, Y };

inline Axis axis_from_string(const std::string& s) {
  if (s == "x") return Axis::X;
  if (s == "y") return Axis::Y;
  throw std::invalid_argument("unknown axis '" + s + "' (expected x|y)");
}

inline std::string to_string(Axis a) { return a == Axis::X ? "x" : "y"; }

struct PulsePackage {
  double theta_x = 0;  ///< rad
  double theta_y = 0;  ///< rad
  double s = 0;        ///< squeezing integral
  double t_free = 0;   ///< free evolution after the kicks, units of 1/g

  friend bool operator==(const PulsePackage&, const PulsePackage&) = default;
};

struct PulseSequence {
  std::vector<PulsePackage> packages;

  std::size_t size() const { return packages.size(); }
  bool empty() const { return packages.empty(); }
  double total_time() const {
    double t = 0;
    for (const auto& p : packages) t += p.t_free;
    return t;
  }

  /// Flat parameter layout [theta_x, theta_y, s, t_free] per package.
  std::vector<double> flatten() const {
    std::vector<double> x;
    x.reserve(4 * packages.size());
    for (const auto& p : packages) x.insert(x.end(), {p.theta_x, p.theta_y, p.s, p.t_free});
    return x;
  }

  static PulseSequence unflatten(const std::vector<double>& x) {
    if (x.size() % 4 != 0) throw std::invalid_argument("PulseSequence::unflatten: length must be a multiple of 4");
    PulseSequence seq;
    for (std::size_t k = 0; k < x.size(); k += 4) seq.packages.push_back({x[k], x[k + 1], x[k + 2], x[k + 3]});
    return seq;
  }

  friend bool operator==(const PulseSequence&, const PulseSequence&) = default;
};

struct PropagationOptions {
  double dt = 1e-3;  ///< split-operator step, units of 1/g
  /// Sampling interval for trajectories; <= 0 records only package boundaries.
  double sample_dt = 0.0;
  double trailing_free = 0.0;  ///< optional free evolution after the last package
  double leakage_warn = 1e-6;
  double leakage_error = 1e-3;  ///< hard limit checked after every squeeze kick
  bool check_convergence = false;
  double convergence_tol = 1e-7;
  int max_halvings = 6;
  bool keep_snapshots = false;
  bool monitor_positivity = false;

  friend bool operator==(const PropagationOptions&, const PropagationOptions&) = default;
};

/// Named scalar functionals recorded along a trajectory.
using Observable = std::function<double(const DensityMatrix&)>;
using ObservableSet = std::vector<std::pair<std::string, Observable>>;

struct Trajectory {
  std::vector<double> times;  ///< g t
  std::vector<std::string> names;
  std::vector<std::vector<double>> values;  ///< values[sample][observable]
  std::vector<double> leakage;
  std::vector<double> trace;
  std::vector<double> min_eigenvalue;  ///< filled when positivity is monitored
  std::vector<DensityMatrix> snapshots;
  std::vector<std::string> warnings;
  DensityMatrix final_state;

  double max_leakage() const {
    double m = 0;
    for (double l : leakage) m = std::max(m, l);
    return m;
  }

  std::vector<double> series(const std::string& name) const {
    for (std::size_t k = 0; k < names.size(); ++k)
      if (names[k] == name) {
        std::vector<double> out;
        out.reserve(values.size());
        for (const auto& row : values) out.push_back(row[k]);
        return out;
      }
    throw std::invalid_argument("Trajectory: no observable named '" + name + "'");
  }
};

/// Exact amplitude-damping channel of the mode for decay factor eta = exp(-kappa t).
///
/// E_k |n> = sqrt(C(n,k) eta^(n-k) (1-eta)^k) |n-k>. The annihilation operator
/// maps the truncated ladder into itself, so this solves the truncated
/// dissipator exactly.
class DecayMap {
 public:
  DecayMap() = default;
  DecayMap(const SpaceSpec& spec, double kappa_t) : spec_(spec) {
    const Eigen::Index f = spec.fock_dim();
    const double eta = std::exp(-kappa_t);
    coeff_.assign(f * f, 0.0);
    for (Eigen::Index n = 0; n < f; ++n)
      for (Eigen::Index k = 0; k <= n; ++k) {
        const double logc = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
        const double pk = k == 0 ? 1.0 : std::pow(1.0 - eta, static_cast<double>(k));
        coeff_[n * f + k] = std::sqrt(std::exp(logc) * std::pow(eta, static_cast<double>(n - k)) * pk);
      }
  }

  Matrix apply(const Matrix& rho) const {
    const Eigen::Index f = spec_.fock_dim(), d = spec_.spin_dim();
    Matrix out = Matrix::Zero(rho.rows(), rho.cols());
    for (Eigen::Index m = 0; m < f; ++m)
      for (Eigen::Index n = 0; n < f; ++n)
        for (Eigen::Index k = 0; m + k < f && n + k < f; ++k) {
          const double w = coeff_[(m + k) * f + k] * coeff_[(n + k) * f + k];
          if (w == 0.0) continue;
          out.block(m * d, n * d, d, d) += w * rho.block((m + k) * d, (n + k) * d, d, d);
        }
    return out;
  }

 private:
  SpaceSpec spec_;
  std::vector<double> coeff_;
};

/// First-order Magnus coupling factor 2 sin(Delta t / 2) / Delta, with the Delta -> 0 limit t.
inline double effective_coupling_first_order(double delta, double t) {
  const double x = delta * t;
  if (std::abs(x) < 1e-4) return t * (1.0 - x * x / 24.0);
  return 2.0 * std::sin(0.5 * x) / delta;
}

/// Operator cache and stepping for one (space, params) pair.
///
/// Pure: no method modifies the input state; the cache is read-only after
/// construction, so one Propagator may be shared across threads.
class Propagator {
 public:
  Propagator(const SpaceSpec& spec, const SystemParams& params, PropagationOptions opts = {})
      : spec_(spec), params_(params), opts_(opts) {
    params.validate(spec);
    if (!(opts.dt > 0)) throw std::invalid_argument("PropagationOptions: dt must be > 0");
    h0_ = build_h0(spec, params).matrix;
    h0_spec_ = HermitianSpectrum(h0_);
    auto [vx, vy] = build_rotation_generators(spec);
    vx_spec_ = HermitianSpectrum(vx.matrix);
    vy_spec_ = HermitianSpectrum(vy.matrix);
    vs_spec_ = HermitianSpectrum(build_squeeze_generator(spec).matrix);
  }

  const SpaceSpec& space() const { return spec_; }
  const SystemParams& params() const { return params_; }
  const PropagationOptions& options() const { return opts_; }
  const Matrix& h0() const { return h0_; }

  Matrix rotation_unitary(Axis axis, double theta) const {
    return (axis == Axis::X ? vx_spec_ : vy_spec_).unitary(theta);
  }
  Matrix squeeze_unitary(double s) const { return vs_spec_.unitary(s); }
  Matrix free_unitary(double t) const { return h0_spec_.unitary(t); }

  DensityMatrix rotate(const DensityMatrix& rho, Axis axis, double theta) const {
    check_space(rho);
    if (theta == 0.0) return rho;
    Matrix u = rotation_unitary(axis, theta);
    return {spec_, u * rho.matrix() * u.adjoint()};
  }

  /// Squeeze kick; throws TruncationError if the resulting leakage exceeds the hard limit.
  DensityMatrix squeeze(const DensityMatrix& rho, double s, std::vector<std::string>* warnings = nullptr) const {
    check_space(rho);
    if (s == 0.0) return rho;
    Matrix u = squeeze_unitary(s);
    DensityMatrix out{spec_, u * rho.matrix() * u.adjoint()};
    const double leak = fock_leakage(out);
    if (leak > opts_.leakage_error)
      throw TruncationError("squeeze kick s=" + std::to_string(s) + " pushes " + std::to_string(leak) +
                            " population into the top Fock levels (cutoff " + std::to_string(spec_.fock_cutoff) +
                            "); increase fock_cutoff");
    if (warnings && leak > opts_.leakage_warn)
      warnings->push_back("leakage " + std::to_string(leak) + " after squeeze s=" + std::to_string(s));
    return out;
  }

  /// Free evolution for `duration` (units of 1/g).
  DensityMatrix free_evolve(const DensityMatrix& rho, double duration) const {
    check_space(rho);
    if (duration < 0) throw std::invalid_argument("free_evolve: negative duration");
    if (duration == 0.0) return rho;
    if (params_.kappa == 0.0) {
      Matrix u = free_unitary(duration);
      return {spec_, u * rho.matrix() * u.adjoint()};
    }
    if (!opts_.check_convergence) return {spec_, strang(rho.matrix(), duration, opts_.dt)};

    double dt = opts_.dt;
    Matrix coarse = strang(rho.matrix(), duration, dt);
    for (int h = 0; h < opts_.max_halvings; ++h) {
      Matrix fine = strang(rho.matrix(), duration, dt / 2);
      if ((fine - coarse).norm() < opts_.convergence_tol) return {spec_, fine};
      dt /= 2;
      coarse = std::move(fine);
    }
    throw ConvergenceError("free_evolve: step halving limit reached without meeting tolerance " +
                           std::to_string(opts_.convergence_tol));
  }

  /// One package: rotation about x, rotation about y, squeeze, then free evolution.
  DensityMatrix apply_package(const DensityMatrix& rho, const PulsePackage& p,
                              std::vector<std::string>* warnings = nullptr) const {
    return free_evolve(kick(rho, p, warnings), p.t_free);
  }

  DensityMatrix kick(const DensityMatrix& rho, const PulsePackage& p, std::vector<std::string>* warnings = nullptr) const {
    return squeeze(rotate(rotate(rho, Axis::X, p.theta_x), Axis::Y, p.theta_y), p.s, warnings);
  }

  /// Final state only.
  DensityMatrix final_state(const DensityMatrix& rho0, const PulseSequence& seq,
                            std::vector<std::string>* warnings = nullptr) const {
    DensityMatrix rho = rho0;
    for (const auto& p : seq.packages) rho = apply_package(rho, p, warnings);
    if (opts_.trailing_free > 0) rho = free_evolve(rho, opts_.trailing_free);
    return rho;
  }

  /// Final ket for closed (kappa = 0) evolution of a pure state.
  Vector final_ket(const Vector& psi0, const PulseSequence& seq) const {
    if (params_.kappa != 0.0) throw std::logic_error("final_ket: only valid for kappa = 0");
    if (psi0.size() != spec_.dim()) throw std::invalid_argument("final_ket: state size mismatch");
    Vector psi = psi0;
    for (const auto& p : seq.packages) {
      if (p.theta_x != 0.0) psi = vx_spec_.apply(p.theta_x, psi);
      if (p.theta_y != 0.0) psi = vy_spec_.apply(p.theta_y, psi);
      if (p.s != 0.0) psi = vs_spec_.apply(p.s, psi);
      if (p.t_free != 0.0) psi = h0_spec_.apply(p.t_free, psi);
    }
    if (opts_.trailing_free > 0) psi = h0_spec_.apply(opts_.trailing_free, psi);
    return psi;
  }

  /// Full trajectory with observables sampled after every kick and every sample_dt of free evolution.
  Trajectory run(const DensityMatrix& rho0, const PulseSequence& seq, const ObservableSet& obs = {}) const {
    check_space(rho0);
    Trajectory tr;
    for (const auto& [name, f] : obs) tr.names.push_back(name);
    double t = 0;
    DensityMatrix rho = rho0;
    record(tr, t, rho, obs);
    auto free_segment = [&](double duration) {
      if (duration <= 0) return;
      if (opts_.sample_dt <= 0) {
        rho = free_evolve(rho, duration);
        t += duration;
        record(tr, t, rho, obs);
        return;
      }
      const int n = std::max(1, static_cast<int>(std::ceil(duration / opts_.sample_dt - 1e-9)));
      const double h = duration / n;
      for (int k = 0; k < n; ++k) {
        rho = free_evolve(rho, h);
        t += h;
        record(tr, t, rho, obs);
      }
    };
    for (const auto& p : seq.packages) {
      rho = kick(rho, p, &tr.warnings);
      record(tr, t, rho, obs);
      free_segment(p.t_free);
    }
    free_segment(opts_.trailing_free);
    for (double l : tr.leakage)
      if (l > opts_.leakage_warn) {
        tr.warnings.push_back("Fock leakage reached " + std::to_string(tr.max_leakage()));
        break;
      }
    tr.final_state = rho;
    return tr;
  }

 private:
  void check_space(const DensityMatrix& rho) const {
    if (!(rho.space() == spec_)) throw std::invalid_argument("Propagator: state lives on a different space");
  }

  void record(Trajectory& tr, double t, const DensityMatrix& rho, const ObservableSet& obs) const {
    tr.times.push_back(t);
    std::vector<double> row;
    row.reserve(obs.size());
    for (const auto& [name, f] : obs) row.push_back(f(rho));
    tr.values.push_back(std::move(row));
    tr.leakage.push_back(fock_leakage(rho));
    tr.trace.push_back(rho.trace());
    if (opts_.monitor_positivity) tr.min_eigenvalue.push_back(rho.min_eigenvalue());
    if (opts_.keep_snapshots) tr.snapshots.push_back(rho);
  }

  // Strang splitting: U(h/2) D(h) U(h/2) per step; interior half steps are merged.
  Matrix strang(const Matrix& rho0, double duration, double dt) const {
    const int n = std::max(1, static_cast<int>(std::ceil(duration / dt - 1e-12)));
    const double h = duration / n;
    const Matrix u_half = h0_spec_.unitary(h / 2);
    const Matrix u_full = u_half * u_half;
    const DecayMap decay(spec_, params_.kappa * h);
    Matrix rho = u_half * rho0 * u_half.adjoint();
    for (int k = 0; k < n; ++k) {
      rho = decay.apply(rho);
      const Matrix& u = (k + 1 < n) ? u_full : u_half;
      rho = u * rho * u.adjoint();
    }
    return rho;
  }

  SpaceSpec spec_;
  SystemParams params_;
  PropagationOptions opts_;
  Matrix h0_;
  HermitianSpectrum h0_spec_, vx_spec_, vy_spec_, vs_spec_;
};

// ---------------------------------------------------------------------------
// Free-function interface

/// rho -> U rho U^dagger with U = exp(-i theta J_axis / 2).
inline DensityMatrix apply_rotation(const DensityMatrix& rho, Axis axis, double theta) {
  const auto& spec = rho.space();
  auto [vx, vy] = build_rotation_generators(spec);
  Matrix u = HermitianSpectrum(axis == Axis::X ? vx.matrix : vy.matrix).unitary(theta);
  return {spec, u * rho.matrix() * u.adjoint()};
}

/// rho -> S rho S^dagger with S = exp(s [(a^dagger)^2 - a^2] / 2).
inline DensityMatrix apply_squeeze(const DensityMatrix& rho, double s, double leakage_error = 1e-3) {
  if (s == 0.0) return rho;
  const auto& spec = rho.space();
  Matrix u = HermitianSpectrum(build_squeeze_generator(spec).matrix).unitary(s);
  DensityMatrix out{spec, u * rho.matrix() * u.adjoint()};
  const double leak = fock_leakage(out);
  if (leak > leakage_error)
    throw TruncationError("apply_squeeze: leakage " + std::to_string(leak) + " exceeds " + std::to_string(leakage_error));
  return out;
}

inline DensityMatrix free_evolve(const DensityMatrix& rho, double duration, const SystemParams& params,
                                 double dt = 1e-3) {
  PropagationOptions o;
  o.dt = dt;
  return Propagator(rho.space(), params, o).free_evolve(rho, duration);
}

inline Trajectory propagate_sequence(const DensityMatrix& rho0, const PulseSequence& seq, const SystemParams& params,
                                     const PropagationOptions& opts = {}, const ObservableSet& obs = {}) {
  return Propagator(rho0.space(), params, opts).run(rho0, seq, obs);
}

}  // namespace cavityctl
