#pragma once

// Batch workflows behind the command-line front end. Each run_* function
// writes its files into the output directory, followed by manifest.json, and
// returns the summary it wrote.

#include "cavityctl/io.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace cavityctl {

struct RunContext {
  std::filesystem::path out_dir = "out";
  std::ostream* log = nullptr;  ///< progress messages; null for quiet runs
};

struct WorkflowResult {
  json summary;
  std::vector<std::string> outputs;
};

namespace detail {

class OutputSink {
 public:
  OutputSink(const ExperimentConfig& c, const RunContext& ctx) : config_(c), ctx_(ctx) {
    std::filesystem::create_directories(ctx.out_dir);
  }

  std::filesystem::path path(const std::string& name) {
    result_.outputs.push_back(name);
    return ctx_.out_dir / name;
  }
  bool csv() const { return config_.output.wants("csv"); }
  bool json_out() const { return config_.output.wants("json"); }

  void log(const std::string& msg) const {
    if (ctx_.log) *ctx_.log << msg << '\n';
  }

  WorkflowResult finish(json summary) {
    if (json_out()) write_json(path("summary.json"), summary);
    result_.summary = std::move(summary);
    write_json(ctx_.out_dir / "manifest.json", make_manifest(config_, result_.outputs));
    return result_;
  }

 private:
  const ExperimentConfig& config_;
  const RunContext& ctx_;
  WorkflowResult result_;
};

inline double spin_population(const DensityMatrix& rho, const Vector& spin) {
  const Matrix rs = partial_trace_cavity(rho);
  return (spin.adjoint() * rs * spin)(0, 0).real() / spin.squaredNorm();
}

/// Observables recorded along trajectories of the propagate workflow.
inline ObservableSet standard_observables(const ExperimentConfig& c, const MeritSpec* fid) {
  ObservableSet obs;
  for (const auto& name : c.projections) {
    const Vector v = named_spin_state(c.space, name);
    obs.push_back({"P_" + name, [v](const DensityMatrix& r) { return spin_population(r, v); }});
  }
  if (fid) {
    MeritSpec m = *fid;
    obs.push_back({"F", [m](const DensityMatrix& r) { return m.evaluate(r); }});
  }
  if (c.space.spin_basis == SpinBasis::FullProduct && c.space.n_spins >= 2)
    obs.push_back({"C", [](const DensityMatrix& r) { return cumulant_measure(r); }});
  if (c.space.n_spins > 0) obs.push_back({"jpjm_norm", [](const DensityMatrix& r) { return jpjm(r) / kJpJmNorm; }});
  obs.push_back({"photon_number", [](const DensityMatrix& r) { return photon_number(r); }});
  return obs;
}

inline json warnings_json(const std::vector<std::string>& w) { return json(w); }

}  // namespace detail

// ---------------------------------------------------------------------------

inline WorkflowResult run_propagate(const ExperimentConfig& c, const RunContext& ctx = {}) {
  detail::OutputSink sink(c, ctx);
  const DensityMatrix rho0 = build_state(c.space, c.initial);
  std::optional<MeritSpec> fid;
  if (c.merit && c.merit->kind == "fidelity") fid = build_merit(c);
  const auto obs = detail::standard_observables(c, fid ? &*fid : nullptr);
  const PulseSequence seq = c.sequence.value_or(PulseSequence{});
  const Trajectory tr = Propagator(c.space, c.params, c.propagation).run(rho0, seq, obs);
  if (sink.csv()) write_trajectory(sink.path("trajectory.csv"), tr);
  json s;
  s["final_time"] = tr.times.back();
  s["packages"] = seq.size();
  s["merit"] = to_json(merit_report(tr.final_state, c.params, fid ? &*fid : nullptr));
  if (c.merit && c.merit->kind == "cumulant") s["merit"]["objective"] = build_merit(c).evaluate(tr.final_state);
  s["max_leakage"] = tr.max_leakage();
  s["photon_number"] = photon_number(tr.final_state);
  s["warnings"] = tr.warnings;
  sink.log("propagate: " + std::to_string(seq.size()) + " packages, final g t = " + format_number(tr.times.back()));
  return sink.finish(s);
}

struct FreeDecayMaxima {
  double kappa = 0;
  double max_C = -std::numeric_limits<double>::infinity();
  double t_max_C = 0;
  double max_jpjm_norm = 0, max_jpjm_corr_norm = 0;
  std::optional<double> max_g2;
  Trajectory trajectory;
};

/// Rotation by theta about x, then free evolution over [0, t_max] sampled every sample_dt.
inline FreeDecayMaxima free_decay_reference(const SpaceSpec& space, SystemParams params, const FreeDecayBlock& b,
                                            double kappa, const StateSpec& initial = {}, PropagationOptions opts = {}) {
  params.kappa = kappa;
  opts.sample_dt = b.sample_dt;
  PulseSequence seq;
  seq.packages.push_back({b.theta, 0.0, 0.0, b.t_max});
  ObservableSet obs;
  obs.push_back({"C", [](const DensityMatrix& r) { return cumulant_measure(r); }});
  obs.push_back({"jpjm_norm", [](const DensityMatrix& r) { return jpjm(r) / kJpJmNorm; }});
  obs.push_back({"jpjm_corr_norm", [](const DensityMatrix& r) { return jpjm_corr(r) / kJpJmCorrNorm; }});
  obs.push_back({"g2", [](const DensityMatrix& r) { return g2(r).value_or(std::numeric_limits<double>::quiet_NaN()); }});
  obs.push_back({"photon_number", [](const DensityMatrix& r) { return photon_number(r); }});
  FreeDecayMaxima m;
  m.kappa = kappa;
  m.trajectory = Propagator(space, params, opts).run(build_state(space, initial), seq, obs);
  const auto& tr = m.trajectory;
  for (std::size_t k = 0; k < tr.times.size(); ++k) {
    const auto& v = tr.values[k];
    if (v[0] > m.max_C) {
      m.max_C = v[0];
      m.t_max_C = tr.times[k];
    }
    m.max_jpjm_norm = std::max(m.max_jpjm_norm, v[1]);
    m.max_jpjm_corr_norm = std::max(m.max_jpjm_corr_norm, v[2]);
    if (!std::isnan(v[3])) m.max_g2 = std::max(m.max_g2.value_or(v[3]), v[3]);
  }
  return m;
}

inline WorkflowResult run_free_decay_reference(const ExperimentConfig& c, const RunContext& ctx = {}) {
  detail::OutputSink sink(c, ctx);
  const auto& b = *c.free_decay;
  json rows = json::array();
  for (std::size_t k = 0; k < b.kappas.size(); ++k) {
    const auto m = free_decay_reference(c.space, c.params, b, b.kappas[k], c.initial, c.propagation);
    if (sink.csv()) write_trajectory(sink.path("free_decay_" + std::to_string(k) + ".csv"), m.trajectory);
    SystemParams p = c.params;
    p.kappa = b.kappas[k];
    const double coop = cooperativity(p);
    rows.push_back(json{{"kappa", b.kappas[k]},
                        {"max_C", m.max_C},
                        {"t_at_max_C", m.t_max_C},
                        {"max_jpjm_norm", m.max_jpjm_norm},
                        {"max_jpjm_corr_norm", m.max_jpjm_corr_norm},
                        {"max_g2", number_or_null(m.max_g2)},
                        {"cooperativity", std::isinf(coop) ? json("inf") : json(coop)}});
    sink.log("free-decay: kappa/g = " + format_number(b.kappas[k]) + ", max C = " + format_number(m.max_C));
  }
  if (sink.csv()) {
    CsvWriter w(sink.path("free_decay_maxima.csv"), {"kappa", "max_C", "t_at_max_C", "max_jpjm_norm", "max_jpjm_corr_norm", "max_g2"});
    for (const auto& r : rows)
      w.row({r["kappa"].get<double>(), r["max_C"].get<double>(), r["t_at_max_C"].get<double>(),
             r["max_jpjm_norm"].get<double>(), r["max_jpjm_corr_norm"].get<double>(),
             r["max_g2"].is_null() ? std::numeric_limits<double>::quiet_NaN() : r["max_g2"].get<double>()});
  }
  return sink.finish(json{{"t_max", b.t_max}, {"theta", b.theta}, {"runs", rows}});
}

inline WorkflowResult run_controllability(const ExperimentConfig& c, const RunContext& ctx = {}) {
  detail::OutputSink sink(c, ctx);
  const auto& b = *c.controllability;
  std::vector<std::string> labels;
  std::vector<AlgebraGrowth> growth;
  json sets = json::array();
  std::ostringstream verdict;
  for (const auto& names : b.generator_sets) {
    std::string label;
    for (const auto& n : names) label += (label.empty() ? "" : "+") + n;
    const auto g = build_generator_set(c.space, c.params, names);
    growth.push_back(lie_algebra_growth(g, b.max_order, b.rank_tol, b.rule));
    labels.push_back(label);
    const auto& gr = growth.back();
    verdict << label << ": dims";
    for (int d : gr.dims) verdict << ' ' << d;
    verdict << " -> " << (gr.converged ? "controllable" : "not controllable") << " (" << gr.final_dim() << " of "
            << gr.target_dim << ")\n";
    sets.push_back(json{{"generators", names}, {"dims", gr.dims}, {"converged", gr.converged}, {"target_dim", gr.target_dim}});
  }
  if (sink.csv()) write_growth(sink.path("growth.csv"), labels, growth);
  {
    std::ofstream v(sink.path("verdict.txt"));
    v << verdict.str();
  }
  sink.log(verdict.str());
  return sink.finish(json{{"dimension", c.space.dim()}, {"rule", to_string(b.rule)}, {"sets", sets}});
}

inline WorkflowResult run_scan(const ExperimentConfig& c, const RunContext& ctx = {}) {
  detail::OutputSink sink(c, ctx);
  const auto res = robustness_scan(*c.sequence, build_state(c.space, c.initial), c.params, *c.scan, build_merit(c),
                                   c.propagation, c.optimize ? c.optimize->optimizer.workers : 1);
  if (sink.csv()) {
    CsvWriter w(sink.path("scan.csv"), {"dg_rel", "ddelta_abs", "ddelta_rel", "dkappa_rel", "merit"});
    for (const auto& p : res.points) w.row({p.dg_rel, p.ddelta_abs, p.ddelta_rel, p.dkappa_rel, p.merit});
  }
  sink.log("scan: " + std::to_string(res.points.size()) + " points, nominal " + format_number(res.nominal) + ", max " +
           format_number(res.max_merit()));
  return sink.finish(json{{"nominal", res.nominal}, {"max", res.max_merit()}, {"points", res.points.size()}});
}

inline WorkflowResult run_bump_validate(const ExperimentConfig& c, const RunContext& ctx = {}) {
  detail::OutputSink sink(c, ctx);
  const auto& b = *c.bump;
  const DensityMatrix rho0 = build_state(c.space, c.initial);
  json rows = json::array();
  std::vector<std::vector<std::string>> table;
  double worst_fid = 1.0, worst_cond = 0.0;
  for (const auto& ax : b.axes)
    for (double kappa : b.kappas)
      for (double theta : b.thetas) {
        BumpPulseSpec spec{theta, b.T, kappa, axis_from_string(ax)};
        SystemParams p = c.params;
        p.kappa = kappa;
        const auto cond = check_bump_conditions(spec, p.g);
        const auto sim = simulate_bump_pulse(rho0, spec, p, b.steps);
        const double f = fidelity(sim.state.matrix(), delta_pulse_reference(rho0, spec, p).matrix());
        const double dx = sim.x_quadrature_T - sim.x_quadrature_0;
        worst_fid = std::min(worst_fid, f);
        worst_cond = std::max({worst_cond, cond.A_T_rel, cond.area_rel_err});
        rows.push_back(json{{"axis", ax},
                            {"theta", theta},
                            {"kappa", kappa},
                            {"A_T_rel", cond.A_T_rel},
                            {"area_rel_err", cond.area_rel_err},
                            {"fidelity_vs_delta", f},
                            {"dX", dx},
                            {"warnings", sim.warnings}});
        table.push_back({ax, format_number(theta), format_number(kappa), format_number(cond.A_T_rel),
                         format_number(cond.area_rel_err), format_number(f), format_number(dx)});
      }
  if (sink.csv()) {
    CsvWriter w(sink.path("bump.csv"), {"axis", "theta", "kappa", "A_T_rel", "area_rel_err", "fidelity_vs_delta", "dX"});
    for (const auto& r : table) w.row_strings(r);
  }
  sink.log("bump: worst fidelity " + format_number(worst_fid) + ", worst condition residual " + format_number(worst_cond));
  return sink.finish(json{{"T", b.T}, {"steps", b.steps}, {"worst_fidelity", worst_fid}, {"worst_condition", worst_cond}, {"runs", rows}});
}

inline WorkflowResult run_optimize(const ExperimentConfig& c, const RunContext& ctx = {}) {
  detail::OutputSink sink(c, ctx);
  const auto& ob = *c.optimize;
  const DensityMatrix rho0 = build_state(c.space, c.initial);
  const MeritSpec merit = build_merit(c);
  auto family = [&](double kappa) {
    SystemParams p = c.params;
    p.kappa = kappa;
    return make_state_objective(c.space, p, rho0, merit, c.propagation);
  };
  json s;

  std::optional<PulseSequence> init;
  if (ob.init_from_sequence) init = *c.sequence;
  if (ob.optimizer.pre_opt.enabled) {
    Bounds pb = ob.bounds;
    pb.packages = std::min(ob.optimizer.pre_opt.packages, ob.bounds.packages);
    pb.use_squeeze = false;
    const OptRun pre = preoptimize(family(0.0), pb, ob.optimizer);
    sink.log("pre-optimization: best merit " + format_number(pre.best_merit));
    if (sink.json_out()) write_json(sink.path("pre_opt.json"), to_json(pre));
    s["pre_opt_merit"] = number_or_null(pre.best_merit);
    if (!init) init = pre.best_params;
  }

  auto report = [&](const OptRun& r, double kappa) {
    SystemParams p = c.params;
    p.kappa = kappa;
    const DensityMatrix fin = Propagator(c.space, p, c.propagation).final_state(rho0, r.best_params);
    return to_json(merit_report(fin, p, merit.kind == MeritKind::Fidelity ? &merit : nullptr));
  };

  if (!ob.kappas.empty()) {
    const auto runs = kappa_continuation(family, ob.kappas, ob.bounds, ob.optimizer, init);
    json stages = json::array();
    for (std::size_t k = 0; k < runs.size(); ++k) {
      const std::string tag = "_" + std::to_string(k);
      if (sink.json_out()) write_json(sink.path("opt_run" + tag + ".json"), to_json(runs[k]));
      if (sink.csv()) write_merit_history(sink.path("merit_history" + tag + ".csv"), runs[k]);
      stages.push_back(json{{"kappa", ob.kappas[k]}, {"best_merit", number_or_null(runs[k].best_merit)},
                            {"report", report(runs[k], ob.kappas[k])}});
      sink.log("kappa/g = " + format_number(ob.kappas[k]) + ": best merit " + format_number(runs[k].best_merit) +
               " (" + format_number(runs[k].wall_time) + " s)");
    }
    s["stages"] = stages;
    return sink.finish(s);
  }

  JayaHooks hooks;
  std::optional<JayaState> resumed;
  // Relative checkpoint paths live in the output directory.
  std::filesystem::path checkpoint = ob.checkpoint;
  if (!checkpoint.empty() && checkpoint.is_relative()) checkpoint = sink.path(ob.checkpoint);
  if (ob.resume && !checkpoint.empty() && std::filesystem::exists(checkpoint)) {
    resumed = load_checkpoint(checkpoint);
    hooks.resume = &*resumed;
    sink.log("resuming from " + checkpoint.string() + " at iteration " + std::to_string(resumed->iteration));
  }
  if (!checkpoint.empty() && ob.checkpoint_every > 0) {
    hooks.on_iteration = [&](const JayaState& st) {
      if (st.iteration % ob.checkpoint_every == 0) save_checkpoint(checkpoint, st);
      return true;
    };
  }
  const OptRun run = jaya_optimize(family(c.params.kappa), ob.bounds, ob.optimizer, init, hooks);
  if (sink.json_out()) write_json(sink.path("opt_run.json"), to_json(run));
  if (sink.csv()) write_merit_history(sink.path("merit_history.csv"), run);
  sink.log("jaya: best merit " + format_number(run.best_merit) + " after " + std::to_string(run.iterations_run) +
           " iterations (" + run.stop_reason + ", " + format_number(run.wall_time) + " s)");
  s["best_merit"] = number_or_null(run.best_merit);
  s["best_params"] = detail::dump_sequence(run.best_params);
  s["report"] = report(run, c.params.kappa);
  s["iterations_run"] = run.iterations_run;
  s["stop_reason"] = run.stop_reason;
  return sink.finish(s);
}

inline WorkflowResult run_workflow(const ExperimentConfig& c, const RunContext& ctx = {}) {
  switch (c.workflow) {
    case Workflow::Propagate: return run_propagate(c, ctx);
    case Workflow::Optimize: return run_optimize(c, ctx);
    case Workflow::Controllability: return run_controllability(c, ctx);
    case Workflow::Scan: return run_scan(c, ctx);
    case Workflow::BumpValidate: return run_bump_validate(c, ctx);
    case Workflow::FreeDecayReference: return run_free_decay_reference(c, ctx);
  }
  throw ConfigError("workflow: unsupported");
}

}  // namespace cavityctl
