#include "helpers.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace cavityctl;
using namespace testing_helpers;
using std::numbers::pi;

namespace {

const std::vector<double> kCenter{1.0, 2.0, 0.1, 1.0, 3.0, 4.0, -0.2, 2.0};

double sphere(const PulseSequence& seq) {
  const auto x = seq.flatten();
  double acc = 0;
  for (std::size_t j = 0; j < x.size(); ++j) acc += (x[j] - kCenter[j]) * (x[j] - kCenter[j]);
  return -acc;
}

Bounds sphere_bounds() {
  Bounds b;
  b.packages = 2;
  b.t_max = 2 * pi;
  return b;
}

OptimizerConfig small_config(int population, int iterations, std::uint64_t seed = 3) {
  OptimizerConfig c;
  c.population = population;
  c.iterations = iterations;
  c.rng_seed = seed;
  return c;
}

}  // namespace

TEST(Bounds, ProjectionRespectsBoxAndTimeBudget) {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> n(0, 8);
  Bounds b;
  b.packages = 4;
  b.t_max = 3.0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> x(b.size());
    for (double& v : x) v = n(rng);
    b.project(x);
    EXPECT_TRUE(b.contains(x));
    double t = 0;
    for (std::size_t j = 3; j < x.size(); j += 4) t += x[j];
    EXPECT_LE(t, 3.0 + 1e-12);
  }
  b.use_squeeze = false;
  b.use_theta_y = false;
  const auto hi = b.upper();
  EXPECT_EQ(hi[1], 0.0);
  EXPECT_EQ(hi[2], 0.0);
  std::vector<double> wrong(3);
  EXPECT_THROW(b.project(wrong), std::invalid_argument);
  Bounds bad;
  bad.theta_max = bad.theta_min;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Jaya, ConvergesOnSphere) {
  const OptRun r = jaya_optimize(sphere, sphere_bounds(), small_config(30, 3000));
  const auto x = r.best_params.flatten();
  for (std::size_t j = 0; j < x.size(); ++j) EXPECT_NEAR(x[j], kCenter[j], 1e-3) << "coordinate " << j;
  EXPECT_EQ(r.merit_history.size(), static_cast<std::size_t>(r.iterations_run) + 1);
  EXPECT_EQ(r.evaluations, 30u * 3001u);
}

TEST(Jaya, BestMeritNeverDegrades) {
  const OptRun r = jaya_optimize(sphere, sphere_bounds(), small_config(10, 100));
  for (std::size_t k = 1; k < r.merit_history.size(); ++k) EXPECT_GE(r.merit_history[k], r.merit_history[k - 1]);
  EXPECT_EQ(r.best_merit, r.merit_history.back());
}

TEST(Jaya, IndependentOfWorkerCount) {
  auto c1 = small_config(12, 40), c3 = c1;
  c3.workers = 3;
  const OptRun a = jaya_optimize(sphere, sphere_bounds(), c1), b = jaya_optimize(sphere, sphere_bounds(), c3);
  EXPECT_EQ(a.best_params.flatten(), b.best_params.flatten());
  EXPECT_EQ(a.merit_history, b.merit_history);
}

TEST(Jaya, SeedChangesTheRun) {
  const OptRun a = jaya_optimize(sphere, sphere_bounds(), small_config(12, 5, 1));
  const OptRun b = jaya_optimize(sphere, sphere_bounds(), small_config(12, 5, 2));
  EXPECT_NE(a.best_params.flatten(), b.best_params.flatten());
}

TEST(Jaya, InvariantUnderMonotoneTransform) {
  const auto c = small_config(10, 60);
  const Objective expo = [](const PulseSequence& s) { return std::exp(0.1 * sphere(s)); };
  JayaState a = jaya_initial_state(sphere, sphere_bounds(), c, std::nullopt);
  JayaState b = jaya_initial_state(expo, sphere_bounds(), c, std::nullopt);
  for (int k = 0; k < 60; ++k) {
    jaya_step(sphere, sphere_bounds(), c, a);
    jaya_step(expo, sphere_bounds(), c, b);
  }
  EXPECT_EQ(a.population, b.population);
}

TEST(Jaya, StaysFeasible) {
  Bounds b = sphere_bounds();
  b.t_max = 1.0;  // the sphere center violates the budget
  const auto c = small_config(10, 50);
  JayaState st = jaya_initial_state(sphere, b, c, std::nullopt);
  for (int k = 0; k < 50; ++k) {
    jaya_step(sphere, b, c, st);
    for (const auto& x : st.population) ASSERT_TRUE(b.contains(x));
  }
}

TEST(Jaya, SeededPopulation) {
  auto c = small_config(10, 0);
  PulseSequence init{{{1.0, 1.0, 0.0, 1.0}, {2.0, 2.0, 0.0, 1.0}}};
  const JayaState st = jaya_initial_state(sphere, sphere_bounds(), c, init);
  EXPECT_EQ(st.population[0], init.flatten());
  for (const auto& x : st.population)
    for (std::size_t j = 0; j < x.size(); j += 4) EXPECT_LE(std::abs(x[j] - init.flatten()[j]), 0.1 * 2 * pi + 1e-12);
  const OptRun r = jaya_optimize(sphere, sphere_bounds(), c, init);
  EXPECT_EQ(r.iterations_run, 0);
  EXPECT_EQ(r.merit_history.size(), 1u);
}

TEST(Jaya, FailedEvaluationsRankLast) {
  const Objective flaky = [](const PulseSequence& s) {
    if (s.packages[0].theta_x > pi) throw TruncationError("leak");
    return sphere(s);
  };
  const OptRun r = jaya_optimize(flaky, sphere_bounds(), small_config(12, 100));
  EXPECT_TRUE(std::isfinite(r.best_merit));
  EXPECT_LE(r.best_params.packages[0].theta_x, pi);
}

TEST(Jaya, StagnationStop) {
  auto c = small_config(8, 1000);
  c.stagnation_window = 20;
  const OptRun r = jaya_optimize([](const PulseSequence&) { return 1.0; }, sphere_bounds(), c);
  EXPECT_EQ(r.stop_reason, "stagnation");
  EXPECT_EQ(r.iterations_run, 20);
}

TEST(Jaya, CheckpointResumeIsBitIdentical) {
  const auto c = small_config(10, 30);
  const OptRun straight = jaya_optimize(sphere, sphere_bounds(), c);

  std::optional<JayaState> saved;
  JayaHooks stop;
  stop.on_iteration = [&](const JayaState& st) {
    if (st.iteration == 12) {
      saved = jaya_state_from_json(json::parse(to_json(st).dump()));
      return false;
    }
    return true;
  };
  const OptRun first = jaya_optimize(sphere, sphere_bounds(), c, std::nullopt, stop);
  EXPECT_EQ(first.stop_reason, "stopped by hook");
  ASSERT_TRUE(saved.has_value());

  JayaHooks resume;
  resume.resume = &*saved;
  const OptRun resumed = jaya_optimize(sphere, sphere_bounds(), c, std::nullopt, resume);
  EXPECT_EQ(resumed.best_params.flatten(), straight.best_params.flatten());
  EXPECT_EQ(resumed.merit_history, straight.merit_history);
  EXPECT_EQ(resumed.best_merit, straight.best_merit);

  auto other = c;
  other.population = 11;
  EXPECT_THROW(jaya_optimize(sphere, sphere_bounds(), other, std::nullopt, resume), std::invalid_argument);
}

TEST(Jaya, RestartsKeepTheBest) {
  auto c = small_config(8, 10);
  const OptRun one = jaya_optimize(sphere, sphere_bounds(), c);
  c.jaya_restarts = 3;
  const OptRun three = jaya_optimize(sphere, sphere_bounds(), c);
  EXPECT_GE(three.best_merit, one.best_merit);
  EXPECT_EQ(three.evaluations, 3 * one.evaluations);
}

TEST(PreOptimize, RecoversPiPulse) {
  SpaceSpec s{1, 0};
  SystemParams p{1.0, 0.0, {0.0}};
  const DensityMatrix rho0 = product_state(s, 0, Vector::Unit(2, 0));
  const Objective obj =
      make_state_objective(s, p, rho0, MeritSpec::fidelity_to(product_state(s, 0, Vector::Unit(2, 1)).matrix()));
  Bounds b;
  b.packages = 1;
  b.t_max = 0;
  b.use_theta_y = false;
  b.use_squeeze = false;
  auto c = small_config(4, 0);
  c.pre_opt.enabled = true;
  c.pre_opt.restarts = 5;
  const OptRun r = preoptimize(obj, b, c);
  EXPECT_NEAR(r.best_params.packages[0].theta_x, pi, 0.01);
  EXPECT_NEAR(r.best_merit, 1.0, 1e-6);
  EXPECT_EQ(r.merit_history.size(), 5u);
}

TEST(PreOptimize, ConstantObjectiveStopsImmediately) {
  auto c = small_config(4, 0);
  c.pre_opt.restarts = 2;
  const OptRun r = preoptimize([](const PulseSequence&) { return 0.5; }, sphere_bounds(), c);
  EXPECT_EQ(r.best_merit, 0.5);
  EXPECT_EQ(r.evaluations, 2u * (1 + 2 * sphere_bounds().size()));
}

TEST(KappaContinuation, StagesAndValidation) {
  const ObjectiveFamily fam = [](double kappa) {
    return Objective([kappa](const PulseSequence& s) { return sphere(s) - kappa; });
  };
  const auto c = small_config(8, 20);
  const auto runs = kappa_continuation(fam, {0.0, 0.5, 1.0}, sphere_bounds(), c);
  ASSERT_EQ(runs.size(), 3u);
  // Each stage starts from the previous best, so it can only improve on it.
  EXPECT_GE(runs[1].best_merit, runs[0].best_merit - 0.5);
  EXPECT_GE(runs[2].best_merit, runs[1].best_merit - 0.5);
  EXPECT_EQ(kappa_continuation(fam, {0.0}, sphere_bounds(), c).size(), 1u);
  EXPECT_THROW(kappa_continuation(fam, {}, sphere_bounds(), c), std::invalid_argument);
  EXPECT_THROW(kappa_continuation(fam, {0.5, 0.1}, sphere_bounds(), c), std::invalid_argument);
  EXPECT_THROW(kappa_continuation(fam, {0.5}, sphere_bounds(), c), std::invalid_argument);
}

TEST(RobustnessScan, ZeroPerturbationReproducesNominal) {
  SpaceSpec s{2, 4};
  SystemParams p{1.0, 0.1, {-0.5, 0.5}};
  auto st = dicke_states(s);
  const DensityMatrix rho0 = product_state(s, 0, st.G);
  const MeritSpec merit = MeritSpec::fidelity_to(product_state(s, 0, st.S).matrix());
  const PulseSequence seq{{{pi / 2, 0.3, 0.0, 0.8}, {0.4, 1.2, 0.0, 0.5}}};
  ScanAxes axes;
  axes.dg_rel = {-0.1, 0.0, 0.1};
  axes.dkappa_rel = {0.0, 1.0};
  const ScanResult a = robustness_scan(seq, rho0, p, axes, merit, {}, 1);
  const ScanResult b = robustness_scan(seq, rho0, p, axes, merit, {}, 3);
  ASSERT_EQ(a.points.size(), 6u);
  EXPECT_NEAR(a.points[2].merit, a.nominal, 1e-14);
  for (std::size_t k = 0; k < a.points.size(); ++k) EXPECT_EQ(a.points[k].merit, b.points[k].merit);
  EXPECT_GE(a.max_merit(), a.nominal);
  const SystemParams q = perturb(p, 0.1, 0.2, 1.0, 1.0);
  EXPECT_NEAR(q.g, 1.1, 1e-15);
  EXPECT_NEAR(q.deltas[0], -0.8, 1e-15);
  EXPECT_NEAR(q.kappa, 0.2, 1e-15);
}

TEST(StateObjective, KetAndDensityPathsAgree) {
  SpaceSpec s{2, 6};
  SystemParams p{1.0, 0.0, {-1.0, 1.0}};
  auto st = dicke_states(s);
  const DensityMatrix rho0 = product_state(s, 0, st.G);
  const MeritSpec merit = MeritSpec::fidelity_to(product_state(s, 0, *st.A).matrix());
  const Objective fast = make_state_objective(s, p, rho0, merit);
  const PulseSequence seq{{{2.49, 4.69, 0, 2.40}, {3.06, 3.16, 0, 4.83}}};
  EXPECT_NEAR(fast(seq), merit.evaluate(Propagator(s, p).final_state(rho0, seq)), 1e-10);
  const PulseSequence heavy{{{0, 0, 2.0, 0.0}}};
  EXPECT_THROW(fast(heavy), TruncationError);
  EXPECT_EQ(detail::safe_eval(fast, heavy.flatten()), -std::numeric_limits<double>::infinity());
}
