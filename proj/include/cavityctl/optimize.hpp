#pragma once

// Pulse-sequence optimization: projected gradient ascent for pre-optimization,
// the JAYA population algorithm, kappa continuation and robustness scans.

#include "cavityctl/dynamics.hpp"
#include "cavityctl/merit.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace cavityctl {

/// Merit of a candidate sequence; must be safe to call concurrently.
using Objective = std::function<double(const PulseSequence&)>;

struct Bounds {
  int packages = 5;
  double theta_min = 0.0;
  double theta_max = 2.0 * std::numbers::pi;
  double s_max = 0.5;
  double t_max = 2.0 * std::numbers::pi;  ///< bound on the total free time, units of 1/g
  bool use_theta_y = true;
  bool use_squeeze = true;

  static Bounds extended_theta(Bounds b) {
    b.theta_min = -2.0 * std::numbers::pi;
    return b;
  }

  void validate() const {
    if (packages < 1) throw std::invalid_argument("Bounds: packages must be >= 1");
    if (!(theta_max > theta_min)) throw std::invalid_argument("Bounds: theta_max must exceed theta_min");
    if (!(s_max >= 0)) throw std::invalid_argument("Bounds: s_max must be >= 0");
    if (!(t_max >= 0)) throw std::invalid_argument("Bounds: t_max must be >= 0");
  }

  std::size_t size() const { return 4 * static_cast<std::size_t>(packages); }

  std::vector<double> lower() const {
    std::vector<double> v;
    for (int k = 0; k < packages; ++k)
      v.insert(v.end(), {theta_min, use_theta_y ? theta_min : 0.0, use_squeeze ? -s_max : 0.0, 0.0});
    return v;
  }
  std::vector<double> upper() const {
    std::vector<double> v;
    for (int k = 0; k < packages; ++k)
      v.insert(v.end(), {theta_max, use_theta_y ? theta_max : 0.0, use_squeeze ? s_max : 0.0, t_max});
    return v;
  }

  /// Clips every coordinate and rescales the free times uniformly when their sum exceeds t_max.
  void project(std::vector<double>& x) const {
    if (x.size() != size()) throw std::invalid_argument("Bounds::project: expected " + std::to_string(size()) + " parameters");
    const auto lo = lower(), hi = upper();
    double tsum = 0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      x[j] = std::clamp(x[j], lo[j], hi[j]);
      if (j % 4 == 3) tsum += x[j];
    }
    if (tsum > t_max && tsum > 0) {
      const double f = t_max / tsum;
      for (std::size_t j = 3; j < x.size(); j += 4) x[j] *= f;
    }
  }

  bool contains(const std::vector<double>& x, double tol = 1e-12) const {
    if (x.size() != size()) return false;
    const auto lo = lower(), hi = upper();
    double tsum = 0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (x[j] < lo[j] - tol || x[j] > hi[j] + tol) return false;
      if (j % 4 == 3) tsum += x[j];
    }
    return tsum <= t_max * (1 + 1e-12) + tol;
  }

  /// Pads or truncates `seq` to `packages` entries and projects it.
  std::vector<double> feasible(const PulseSequence& seq) const {
    PulseSequence s = seq;
    s.packages.resize(packages);
    std::vector<double> x = s.flatten();
    project(x);
    return x;
  }

  friend bool operator==(const Bounds&, const Bounds&) = default;
};

struct PreOptConfig {
  bool enabled = false;
  int restarts = 100;
  int packages = 5;
  int max_steps = 200;   ///< gradient steps per restart
  double fd_step = 1e-4;  ///< central-difference step
  double grad_tol = 1e-8;

  friend bool operator==(const PreOptConfig&, const PreOptConfig&) = default;
};

struct OptimizerConfig {
  int population = 300;
  int iterations = 1000;
  int workers = 1;
  std::uint64_t rng_seed = 0;
  PreOptConfig pre_opt;
  int jaya_restarts = 1;  ///< independent JAYA runs; the best is kept
  int stagnation_window = 5000;
  double stagnation_tol = 1e-8;
  double init_spread = 0.1;  ///< half-width of the seeded population, fraction of each bound interval

  void validate() const {
    if (population < 4) throw std::invalid_argument("OptimizerConfig: population must be >= 4");
    if (workers < 1) throw std::invalid_argument("OptimizerConfig: workers must be >= 1");
    if (iterations < 0) throw std::invalid_argument("OptimizerConfig: iterations must be >= 0");
    if (jaya_restarts < 1) throw std::invalid_argument("OptimizerConfig: jaya_restarts must be >= 1");
    if (stagnation_window < 1) throw std::invalid_argument("OptimizerConfig: stagnation_window must be >= 1");
    if (pre_opt.restarts < 1 || pre_opt.packages < 1)
      throw std::invalid_argument("OptimizerConfig: pre_opt restarts and packages must be >= 1");
  }

  friend bool operator==(const OptimizerConfig&, const OptimizerConfig&) = default;
};

struct OptRun {
  PulseSequence best_params;
  double best_merit = -std::numeric_limits<double>::infinity();
  std::vector<double> merit_history;  ///< best merit after each iteration; entry 0 is the initial best
  std::size_t evaluations = 0;
  double wall_time = 0;  ///< seconds
  int iterations_run = 0;
  std::string stop_reason;
};

/// Complete JAYA state, enough to resume a run bit-for-bit.
struct JayaState {
  std::vector<std::vector<double>> population;
  std::vector<double> fitness;
  std::vector<std::mt19937_64> rngs;  ///< one stream per member
  int iteration = 0;
  int last_improvement = 0;
  double improvement_mark = -std::numeric_limits<double>::infinity();
  std::vector<double> merit_history;
  std::size_t evaluations = 0;

  std::string rng_state(std::size_t k) const {
    std::ostringstream os;
    os << rngs[k];
    return os.str();
  }
  void set_rng_state(std::size_t k, const std::string& s) {
    std::istringstream is(s);
    is >> rngs[k];
    if (!is) throw std::invalid_argument("JayaState: malformed RNG state");
  }
};

namespace detail {

/// Stream for a member, seeded from (seed, index) only.
inline std::mt19937_64 member_stream(std::uint64_t seed, std::uint64_t index, std::uint64_t salt = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    static_cast<std::uint32_t>(salt)};
  return std::mt19937_64(seq);
}

inline double uniform01(std::mt19937_64& r) { return std::uniform_real_distribution<double>(0.0, 1.0)(r); }

/// Failed evaluations (e.g. truncation errors) rank below everything.
inline double safe_eval(const Objective& f, const std::vector<double>& x) {
  try {
    const double v = f(PulseSequence::unflatten(x));
    return std::isnan(v) ? -std::numeric_limits<double>::infinity() : v;
  } catch (const std::exception&) {
    return -std::numeric_limits<double>::infinity();
  }
}

/// Evaluates every point; results are stored by index so the worker count never matters.
inline std::vector<double> evaluate_all(const Objective& f, const std::vector<std::vector<double>>& xs, int workers) {
  std::vector<double> out(xs.size());
  const int nw = std::max(1, std::min<int>(workers, static_cast<int>(xs.size())));
  if (nw == 1) {
    for (std::size_t k = 0; k < xs.size(); ++k) out[k] = safe_eval(f, xs[k]);
    return out;
  }
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t k = next++; k < xs.size(); k = next++) out[k] = safe_eval(f, xs[k]);
  };
  {
    std::vector<std::jthread> pool;
    for (int w = 1; w < nw; ++w) pool.emplace_back(work);
    work();
  }
  return out;
}

inline std::size_t argbest(const std::vector<double>& v) {
  std::size_t b = 0;
  for (std::size_t k = 1; k < v.size(); ++k)
    if (v[k] > v[b]) b = k;
  return b;
}

inline std::size_t argworst(const std::vector<double>& v) {
  std::size_t w = 0;
  for (std::size_t k = 1; k < v.size(); ++k)
    if (v[k] < v[w]) w = k;
  return w;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Pre-optimization

/// Best of `restarts` projected gradient ascents from uniform random starts.
///
/// Gradients are central differences with step fd_step; each step runs a
/// backtracking line search (Armijo, factor 1/2) on the projected update.
/// merit_history records the running best after each restart.
inline OptRun preoptimize(const Objective& objective, const Bounds& bounds, const OptimizerConfig& config) {
  bounds.validate();
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const auto lo = bounds.lower(), hi = bounds.upper();
  const std::size_t n = bounds.size();
  const auto& pc = config.pre_opt;
  OptRun run;
  std::vector<double> best_x;

  for (int r = 0; r < pc.restarts; ++r) {
    auto rng = detail::member_stream(config.rng_seed, static_cast<std::uint64_t>(r), 0x9a5);
    std::vector<double> x(n);
    for (std::size_t j = 0; j < n; ++j) x[j] = lo[j] + (hi[j] - lo[j]) * detail::uniform01(rng);
    bounds.project(x);
    double fx = detail::safe_eval(objective, x);
    ++run.evaluations;
    double step = 1.0;

    for (int it = 0; it < pc.max_steps; ++it) {
      std::vector<std::vector<double>> probes;
      probes.reserve(2 * n);
      for (std::size_t j = 0; j < n; ++j) {
        for (double sgn : {1.0, -1.0}) {
          std::vector<double> p = x;
          p[j] += sgn * pc.fd_step;
          probes.push_back(std::move(p));
        }
      }
      const auto fp = detail::evaluate_all(objective, probes, config.workers);
      run.evaluations += probes.size();
      std::vector<double> grad(n, 0.0);
      double gnorm2 = 0;
      for (std::size_t j = 0; j < n; ++j) {
        if (hi[j] == lo[j] || !std::isfinite(fp[2 * j]) || !std::isfinite(fp[2 * j + 1])) continue;
        grad[j] = (fp[2 * j] - fp[2 * j + 1]) / (2 * pc.fd_step);
        gnorm2 += grad[j] * grad[j];
      }
      if (std::sqrt(gnorm2) < pc.grad_tol) break;

      bool accepted = false;
      double a = std::min(1.0, 2.0 * step) / std::sqrt(gnorm2);
      for (int ls = 0; ls < 30; ++ls, a *= 0.5) {
        std::vector<double> y = x;
        for (std::size_t j = 0; j < n; ++j) y[j] += a * grad[j];
        bounds.project(y);
        double dir = 0;
        for (std::size_t j = 0; j < n; ++j) dir += grad[j] * (y[j] - x[j]);
        if (dir <= 0) continue;
        const double fy = detail::safe_eval(objective, y);
        ++run.evaluations;
        if (fy >= fx + 1e-4 * dir && fy > fx) {
          x = std::move(y);
          fx = fy;
          step = a * std::sqrt(gnorm2);
          accepted = true;
          break;
        }
      }
      if (!accepted) break;
    }
    if (fx > run.best_merit || best_x.empty()) {
      run.best_merit = fx;
      best_x = x;
    }
    run.merit_history.push_back(run.best_merit);
  }
  run.best_params = PulseSequence::unflatten(best_x);
  run.iterations_run = pc.restarts;
  run.stop_reason = "restarts exhausted";
  run.wall_time = detail::seconds_since(t0);
  return run;
}

// ---------------------------------------------------------------------------
// JAYA

struct JayaHooks {
  /// Called after every iteration with the current state; return false to stop.
  std::function<bool(const JayaState&)> on_iteration;
  /// Resume from a saved state instead of sampling a fresh population.
  const JayaState* resume = nullptr;
};

/// Initial population: uniform over the bounds, or uniform within
/// +-init_spread of each bound interval around `init` (member 0 is `init` itself).
inline JayaState jaya_initial_state(const Objective& objective, const Bounds& bounds, const OptimizerConfig& config,
                                    const std::optional<PulseSequence>& init, std::uint64_t restart = 0) {
  const auto lo = bounds.lower(), hi = bounds.upper();
  const std::size_t n = bounds.size();
  JayaState st;
  const std::uint64_t seed = config.rng_seed + 0x9e3779b97f4a7c15ULL * restart;
  std::vector<double> center;
  if (init) center = bounds.feasible(*init);
  for (int m = 0; m < config.population; ++m) {
    st.rngs.push_back(detail::member_stream(seed, static_cast<std::uint64_t>(m)));
    auto& rng = st.rngs.back();
    std::vector<double> x(n);
    for (std::size_t j = 0; j < n; ++j) {
      const double u = detail::uniform01(rng);
      if (init) {
        const double half = config.init_spread * (hi[j] - lo[j]);
        x[j] = center[j] + (2 * u - 1) * half;
      } else {
        x[j] = lo[j] + (hi[j] - lo[j]) * u;
      }
    }
    if (init && m == 0) x = center;
    bounds.project(x);
    st.population.push_back(std::move(x));
  }
  st.fitness = detail::evaluate_all(objective, st.population, config.workers);
  st.evaluations = st.population.size();
  st.improvement_mark = st.fitness[detail::argbest(st.fitness)];
  st.merit_history.push_back(st.improvement_mark);
  return st;
}

/// One synchronous JAYA generation.
///
/// For every member x and coordinate j, x'_j = x_j + r1 (best_j - |x_j|) - r2 (worst_j - |x_j|)
/// with r1, r2 drawn from the member's own stream; best and worst are fixed at the
/// start of the generation. x' is projected onto the bounds and replaces x only if
/// it scores strictly higher.
inline void jaya_step(const Objective& objective, const Bounds& bounds, const OptimizerConfig& config, JayaState& st) {
  const std::size_t n = bounds.size();
  const auto best = st.population[detail::argbest(st.fitness)];
  const auto worst = st.population[detail::argworst(st.fitness)];
  std::vector<std::vector<double>> cand(st.population.size());
  for (std::size_t m = 0; m < st.population.size(); ++m) {
    const auto& x = st.population[m];
    auto& rng = st.rngs[m];
    std::vector<double> y(n);
    for (std::size_t j = 0; j < n; ++j) {
      const double r1 = detail::uniform01(rng), r2 = detail::uniform01(rng);
      y[j] = x[j] + r1 * (best[j] - std::abs(x[j])) - r2 * (worst[j] - std::abs(x[j]));
    }
    bounds.project(y);
    cand[m] = std::move(y);
  }
  const auto fc = detail::evaluate_all(objective, cand, config.workers);
  st.evaluations += cand.size();
  for (std::size_t m = 0; m < cand.size(); ++m)
    if (fc[m] > st.fitness[m]) {
      st.population[m] = std::move(cand[m]);
      st.fitness[m] = fc[m];
    }
  ++st.iteration;
  const double b = st.fitness[detail::argbest(st.fitness)];
  st.merit_history.push_back(b);
  if (b > st.improvement_mark + config.stagnation_tol) {
    st.improvement_mark = b;
    st.last_improvement = st.iteration;
  }
}

inline OptRun jaya_optimize(const Objective& objective, const Bounds& bounds, const OptimizerConfig& config,
                            const std::optional<PulseSequence>& init = std::nullopt, const JayaHooks& hooks = {}) {
  bounds.validate();
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  OptRun best_run;
  for (int r = 0; r < config.jaya_restarts; ++r) {
    JayaState st = (hooks.resume && r == 0) ? *hooks.resume
                                            : jaya_initial_state(objective, bounds, config, init, static_cast<std::uint64_t>(r));
    if (st.population.size() != static_cast<std::size_t>(config.population) || st.rngs.size() != st.population.size())
      throw std::invalid_argument("jaya_optimize: resume state does not match the configured population");
    std::string reason = "iteration budget";
    while (st.iteration < config.iterations) {
      if (st.iteration - st.last_improvement >= config.stagnation_window) {
        reason = "stagnation";
        break;
      }
      jaya_step(objective, bounds, config, st);
      if (hooks.on_iteration && !hooks.on_iteration(st)) {
        reason = "stopped by hook";
        break;
      }
    }
    if (st.iteration - st.last_improvement >= config.stagnation_window) reason = "stagnation";
    const std::size_t b = detail::argbest(st.fitness);
    if (r == 0 || st.fitness[b] > best_run.best_merit) {
      best_run.best_merit = st.fitness[b];
      best_run.best_params = PulseSequence::unflatten(st.population[b]);
      best_run.merit_history = st.merit_history;
      best_run.iterations_run = st.iteration;
      best_run.stop_reason = reason;
    }
    best_run.evaluations += st.evaluations;
  }
  best_run.wall_time = detail::seconds_since(t0);
  return best_run;
}

// ---------------------------------------------------------------------------
// Continuation and robustness

using ObjectiveFamily = std::function<Objective(double kappa)>;

/// JAYA at each kappa in ascending order, each stage seeded around the previous best.
inline std::vector<OptRun> kappa_continuation(const ObjectiveFamily& family, const std::vector<double>& kappas,
                                              const Bounds& bounds, const OptimizerConfig& config,
                                              const std::optional<PulseSequence>& anchor = std::nullopt) {
  if (kappas.empty()) throw std::invalid_argument("kappa_continuation: empty kappa list");
  if (!std::is_sorted(kappas.begin(), kappas.end()))
    throw std::invalid_argument("kappa_continuation: kappas must be ascending");
  if (kappas.front() != 0.0 && !anchor)
    throw std::invalid_argument("kappa_continuation: kappas[0] must be 0 unless an anchor sequence is given");
  std::vector<OptRun> runs;
  std::optional<PulseSequence> seed = anchor;
  for (double k : kappas) {
    runs.push_back(jaya_optimize(family(k), bounds, config, seed));
    seed = runs.back().best_params;
  }
  return runs;
}

struct ScanAxes {
  std::vector<double> dg_rel;       ///< g -> g (1 + dg)
  std::vector<double> ddelta_abs;   ///< Delta_n -> Delta_n + d (common shift, units of g)
  std::vector<double> ddelta_rel;   ///< Delta_n -> Delta_n (1 + d) (spread scaling)
  std::vector<double> dkappa_rel;   ///< kappa -> kappa (1 + d)

  friend bool operator==(const ScanAxes&, const ScanAxes&) = default;
};

struct ScanPoint {
  double dg_rel = 0, ddelta_abs = 0, ddelta_rel = 0, dkappa_rel = 0;
  double merit = 0;
};

struct ScanResult {
  double nominal = 0;
  std::vector<ScanPoint> points;  ///< Cartesian product, dkappa fastest

  double max_merit() const {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& p : points) m = std::max(m, p.merit);
    return m;
  }
};

inline SystemParams perturb(const SystemParams& p, double dg_rel, double ddelta_abs, double ddelta_rel,
                            double dkappa_rel) {
  SystemParams q = p;
  q.g = p.g * (1 + dg_rel);
  for (auto& d : q.deltas) d = d * (1 + ddelta_rel) + ddelta_abs;
  q.kappa = p.kappa * (1 + dkappa_rel);
  return q;
}

/// Re-propagates `seq` from rho0 under every perturbation in the grid. Empty axes mean {0}.
inline ScanResult robustness_scan(const PulseSequence& seq, const DensityMatrix& rho0, const SystemParams& params,
                                  const ScanAxes& axes, const MeritSpec& merit, const PropagationOptions& opts = {},
                                  int workers = 1) {
  auto or_zero = [](const std::vector<double>& v) { return v.empty() ? std::vector<double>{0.0} : v; };
  const auto g = or_zero(axes.dg_rel), da = or_zero(axes.ddelta_abs), dr = or_zero(axes.ddelta_rel),
             dk = or_zero(axes.dkappa_rel);
  ScanResult res;
  res.nominal = merit.evaluate(Propagator(rho0.space(), params, opts).final_state(rho0, seq));
  for (double a : g)
    for (double b : da)
      for (double c : dr)
        for (double d : dk) res.points.push_back({a, b, c, d, 0.0});
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t k = next++; k < res.points.size(); k = next++) {
      auto& pt = res.points[k];
      const SystemParams q = perturb(params, pt.dg_rel, pt.ddelta_abs, pt.ddelta_rel, pt.dkappa_rel);
      pt.merit = merit.evaluate(Propagator(rho0.space(), q, opts).final_state(rho0, seq));
    }
  };
  {
    std::vector<std::jthread> pool;
    for (int w = 1; w < std::max(1, workers); ++w) pool.emplace_back(work);
    work();
  }
  return res;
}

// ---------------------------------------------------------------------------
// Objectives

/// Merit of the final state reached from rho0; uses pure-state propagation when kappa = 0.
inline Objective make_state_objective(const SpaceSpec& spec, const SystemParams& params, const DensityMatrix& rho0,
                                      const MeritSpec& merit, const PropagationOptions& opts = {}) {
  auto prop = std::make_shared<const Propagator>(spec, params, opts);
  std::optional<Vector> ket;
  if (params.kappa == 0.0 && std::abs(rho0.purity() - 1.0) < 1e-12) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(rho0.matrix());
    ket = es.eigenvectors().col(es.eigenvalues().size() - 1);
  }
  return [prop, ket, rho0, merit](const PulseSequence& seq) {
    if (ket) {
      const Vector psi = prop->final_ket(*ket, seq);
      const DensityMatrix rho = DensityMatrix::pure(prop->space(), psi);
      if (fock_leakage(rho) > prop->options().leakage_error)
        throw TruncationError("objective: final state leaks into the top Fock levels");
      return merit.evaluate(rho);
    }
    return merit.evaluate(prop->final_state(rho0, seq));
  };
}

}  // namespace cavityctl
