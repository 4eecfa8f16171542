#pragma once

// Experiment configuration: a JSON document validated against a fixed schema.
// Unknown keys are errors; serialization is canonical so parse -> dump -> parse
// is the identity.

#include "cavityctl/bump.hpp"
#include "cavityctl/controllability.hpp"
#include "cavityctl/optimize.hpp"

#include <json.hpp>

#include <fstream>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cavityctl {

using json = nlohmann::ordered_json;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Workflow { Propagate, Optimize, Controllability, Scan, BumpValidate, FreeDecayReference };

inline std::string to_string(Workflow w) {
  switch (w) {
    case Workflow::Propagate: return "propagate";
    case Workflow::Optimize: return "optimize";
    case Workflow::Controllability: return "controllability";
    case Workflow::Scan: return "scan";
    case Workflow::BumpValidate: return "bump";
    case Workflow::FreeDecayReference: return "free-decay";
  }
  return "?";
}

inline Workflow workflow_from_string(const std::string& s) {
  for (Workflow w : {Workflow::Propagate, Workflow::Optimize, Workflow::Controllability, Workflow::Scan,
                     Workflow::BumpValidate, Workflow::FreeDecayReference})
    if (to_string(w) == s) return w;
  throw ConfigError("workflow: unknown value '" + s + "'");
}

/// |photons> (x) named spin state.
struct StateSpec {
  int photons = 0;
  std::string spins = "G";

  friend bool operator==(const StateSpec&, const StateSpec&) = default;
};

struct MeritConfig {
  std::string kind = "fidelity";  ///< fidelity | cumulant
  StateSpec target{0, "S"};
  bool trace_out_cavity = false;
  int sign = 1;

  friend bool operator==(const MeritConfig&, const MeritConfig&) = default;
};

struct OptimizeBlock {
  OptimizerConfig optimizer;
  Bounds bounds;
  bool init_from_sequence = false;  ///< seed JAYA around the config's sequence
  std::vector<double> kappas;       ///< non-empty: kappa continuation
  std::string checkpoint;           ///< path; empty disables
  int checkpoint_every = 0;
  bool resume = false;

  friend bool operator==(const OptimizeBlock&, const OptimizeBlock&) = default;
};

struct ControllabilityBlock {
  std::vector<std::vector<std::string>> generator_sets{{"H0", "Vx"}, {"H0", "Vx", "Vy"}, {"H0", "Vx", "Vy", "Vs"}};
  int max_order = 6;
  double rank_tol = 1e-9;
  NestingRule rule = NestingRule::NewestAgainstAll;

  friend bool operator==(const ControllabilityBlock&, const ControllabilityBlock&) = default;
};

struct BumpBlock {
  std::vector<double> thetas{std::numbers::pi / 4, std::numbers::pi / 2, std::numbers::pi};
  std::vector<double> kappas{0.0, 1.0};
  std::vector<std::string> axes{"x"};
  double T = 0.01;
  int steps = 2000;

  friend bool operator==(const BumpBlock&, const BumpBlock&) = default;
};

struct FreeDecayBlock {
  double t_max = std::numbers::pi / 2;
  std::vector<double> kappas{0.0, 1.0, 10.0};
  double theta = std::numbers::pi;
  double sample_dt = 0.005;

  friend bool operator==(const FreeDecayBlock&, const FreeDecayBlock&) = default;
};

struct OutputConfig {
  std::string dir = "out";
  std::vector<std::string> formats{"csv", "json"};

  bool wants(const std::string& f) const {
    for (const auto& x : formats)
      if (x == f) return true;
    return false;
  }
  friend bool operator==(const OutputConfig&, const OutputConfig&) = default;
};

struct ExperimentConfig {
  Workflow workflow = Workflow::Propagate;
  SpaceSpec space;
  SystemParams params;
  StateSpec initial;
  std::optional<PulseSequence> sequence;
  std::optional<MeritConfig> merit;
  PropagationOptions propagation;
  std::vector<std::string> projections;
  std::optional<OptimizeBlock> optimize;
  std::optional<ControllabilityBlock> controllability;
  std::optional<ScanAxes> scan;
  std::optional<BumpBlock> bump;
  std::optional<FreeDecayBlock> free_decay;
  OutputConfig output;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

/// Wraps one JSON object; every key read is recorded and leftovers are rejected.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  bool has(const std::string& k) const { return j_.contains(k); }

  const json& raw(const std::string& k) {
    if (!j_.contains(k)) throw ConfigError(field(k) + ": required field missing");
    seen_.insert(k);
    return j_.at(k);
  }

  template <typename T>
  T get(const std::string& k) {
    const json& v = raw(k);
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw ConfigError(field(k) + ": expected a number");
      } else if constexpr (std::is_same_v<T, int> || std::is_same_v<T, std::uint64_t>) {
        if (!v.is_number_integer()) throw ConfigError(field(k) + ": expected an integer");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(field(k) + ": expected true or false");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError(field(k) + ": expected a string");
      }
      return v.get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(field(k) + ": " + e.what());
    }
  }

  template <typename T>
  void opt(const std::string& k, T& out) {
    if (has(k)) out = get<T>(k);
  }

  template <typename T>
  void opt_list(const std::string& k, std::vector<T>& out) {
    if (!has(k)) return;
    const json& v = raw(k);
    if (!v.is_array()) throw ConfigError(field(k) + ": expected an array");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const json& e = v[i];
      const std::string f = field(k) + "[" + std::to_string(i) + "]";
      if constexpr (std::is_same_v<T, double>) {
        if (!e.is_number()) throw ConfigError(f + ": expected a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!e.is_string()) throw ConfigError(f + ": expected a string");
      }
      out.push_back(e.get<T>());
    }
  }

  ObjectReader child(const std::string& k) { return ObjectReader(raw(k), field(k)); }

  std::string field(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }
  std::string where() const { return path_.empty() ? "config" : path_; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(field(it.key()) + ": unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline StateSpec parse_state(ObjectReader r) {
  StateSpec s;
  r.opt("photons", s.photons);
  r.opt("spins", s.spins);
  r.finish();
  if (s.photons < 0) throw ConfigError(r.field("photons") + ": must be >= 0");
  if (s.spins != "G" && s.spins != "E" && s.spins != "S" && s.spins != "A")
    throw ConfigError(r.field("spins") + ": expected one of G, E, S, A");
  return s;
}

inline json dump_state(const StateSpec& s) { return json{{"photons", s.photons}, {"spins", s.spins}}; }

inline PulseSequence parse_sequence(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path + ": expected an array of packages");
  PulseSequence seq;
  for (std::size_t i = 0; i < j.size(); ++i) {
    ObjectReader r(j[i], path + "[" + std::to_string(i) + "]");
    PulsePackage p;
    r.opt("theta_x", p.theta_x);
    r.opt("theta_y", p.theta_y);
    r.opt("s", p.s);
    r.opt("t_free", p.t_free);
    r.finish();
    if (p.t_free < 0) throw ConfigError(r.field("t_free") + ": must be >= 0");
    seq.packages.push_back(p);
  }
  return seq;
}

inline json dump_sequence(const PulseSequence& seq) {
  json a = json::array();
  for (const auto& p : seq.packages)
    a.push_back(json{{"theta_x", p.theta_x}, {"theta_y", p.theta_y}, {"s", p.s}, {"t_free", p.t_free}});
  return a;
}

}  // namespace detail

/// Parses and validates a config document; throws ConfigError naming the offending field.
inline ExperimentConfig parse_config(const json& j) {
  using detail::ObjectReader;
  ExperimentConfig c;
  ObjectReader r(j, "");
  c.workflow = workflow_from_string(r.get<std::string>("workflow"));

  {
    ObjectReader s = r.child("system");
    s.opt("n_spins", c.space.n_spins);
    s.opt("fock_cutoff", c.space.fock_cutoff);
    if (s.has("spin_basis")) {
      try {
        c.space.spin_basis = spin_basis_from_string(s.get<std::string>("spin_basis"));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(s.field("spin_basis") + ": " + e.what());
      }
    }
    s.opt("g", c.params.g);
    s.opt("kappa", c.params.kappa);
    c.params.deltas.assign(c.space.n_spins, 0.0);
    s.opt_list("deltas", c.params.deltas);
    s.finish();
    try {
      c.space.validate();
      c.params.validate(c.space);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("system: ") + e.what());
    }
    if (c.space.spin_basis == SpinBasis::DickeSymmetricReduced && !c.params.resonant_degenerate())
      throw ConfigError("system.deltas: the dicke basis requires identical offsets");
  }

  if (r.has("initial_state")) c.initial = detail::parse_state(r.child("initial_state"));
  if (r.has("sequence")) c.sequence = detail::parse_sequence(r.raw("sequence"), "sequence");

  if (r.has("merit")) {
    ObjectReader m = r.child("merit");
    MeritConfig mc;
    m.opt("kind", mc.kind);
    if (mc.kind != "fidelity" && mc.kind != "cumulant") throw ConfigError("merit.kind: expected fidelity or cumulant");
    if (m.has("target")) mc.target = detail::parse_state(m.child("target"));
    m.opt("trace_out_cavity", mc.trace_out_cavity);
    m.opt("sign", mc.sign);
    if (mc.sign != 1 && mc.sign != -1) throw ConfigError("merit.sign: expected 1 or -1");
    m.finish();
    c.merit = mc;
  }

  if (r.has("propagation")) {
    ObjectReader p = r.child("propagation");
    auto& o = c.propagation;
    p.opt("dt", o.dt);
    p.opt("sample_dt", o.sample_dt);
    p.opt("trailing_free", o.trailing_free);
    p.opt("leakage_warn", o.leakage_warn);
    p.opt("leakage_error", o.leakage_error);
    p.opt("check_convergence", o.check_convergence);
    p.opt("convergence_tol", o.convergence_tol);
    p.opt("max_halvings", o.max_halvings);
    p.opt("monitor_positivity", o.monitor_positivity);
    p.finish();
    if (!(o.dt > 0)) throw ConfigError("propagation.dt: must be > 0");
    if (o.trailing_free < 0) throw ConfigError("propagation.trailing_free: must be >= 0");
  }
  r.opt_list("projections", c.projections);
  for (const auto& name : c.projections)
    if (name != "G" && name != "E" && name != "S" && name != "A")
      throw ConfigError("projections: unknown state '" + name + "'");

  if (r.has("optimize")) {
    ObjectReader o = r.child("optimize");
    OptimizeBlock b;
    auto& oc = b.optimizer;
    o.opt("population", oc.population);
    o.opt("iterations", oc.iterations);
    o.opt("workers", oc.workers);
    o.opt("seed", oc.rng_seed);
    o.opt("jaya_restarts", oc.jaya_restarts);
    o.opt("stagnation_window", oc.stagnation_window);
    o.opt("stagnation_tol", oc.stagnation_tol);
    o.opt("init_spread", oc.init_spread);
    if (o.has("pre_opt")) {
      ObjectReader p = o.child("pre_opt");
      p.opt("enabled", oc.pre_opt.enabled);
      p.opt("restarts", oc.pre_opt.restarts);
      p.opt("packages", oc.pre_opt.packages);
      p.opt("max_steps", oc.pre_opt.max_steps);
      p.opt("fd_step", oc.pre_opt.fd_step);
      p.finish();
    }
    if (o.has("bounds")) {
      ObjectReader p = o.child("bounds");
      p.opt("packages", b.bounds.packages);
      p.opt("theta_min", b.bounds.theta_min);
      p.opt("theta_max", b.bounds.theta_max);
      p.opt("s_max", b.bounds.s_max);
      p.opt("t_max", b.bounds.t_max);
      p.opt("use_theta_y", b.bounds.use_theta_y);
      p.opt("use_squeeze", b.bounds.use_squeeze);
      p.finish();
    }
    o.opt("init_from_sequence", b.init_from_sequence);
    o.opt_list("kappas", b.kappas);
    o.opt("checkpoint", b.checkpoint);
    o.opt("checkpoint_every", b.checkpoint_every);
    o.opt("resume", b.resume);
    o.finish();
    try {
      oc.validate();
      b.bounds.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("optimize: ") + e.what());
    }
    c.optimize = b;
  }

  if (r.has("controllability")) {
    ObjectReader o = r.child("controllability");
    ControllabilityBlock b;
    if (o.has("generator_sets")) {
      const json& gs = o.raw("generator_sets");
      if (!gs.is_array()) throw ConfigError("controllability.generator_sets: expected an array of arrays");
      b.generator_sets.clear();
      for (const auto& set : gs) {
        if (!set.is_array()) throw ConfigError("controllability.generator_sets: expected an array of arrays");
        std::vector<std::string> names;
        for (const auto& n : set) {
          if (!n.is_string()) throw ConfigError("controllability.generator_sets: names must be strings");
          const auto s = n.get<std::string>();
          if (s != "H0" && s != "Vx" && s != "Vy" && s != "Vs")
            throw ConfigError("controllability.generator_sets: unknown generator '" + s + "'");
          names.push_back(s);
        }
        b.generator_sets.push_back(names);
      }
    }
    o.opt("max_order", b.max_order);
    o.opt("rank_tol", b.rank_tol);
    if (o.has("rule")) {
      try {
        b.rule = nesting_rule_from_string(o.get<std::string>("rule"));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("controllability.rule: ") + e.what());
      }
    }
    o.finish();
    if (b.max_order < 0) throw ConfigError("controllability.max_order: must be >= 0");
    c.controllability = b;
  }

  if (r.has("scan")) {
    ObjectReader o = r.child("scan");
    ScanAxes a;
    o.opt_list("dg_rel", a.dg_rel);
    o.opt_list("ddelta_abs", a.ddelta_abs);
    o.opt_list("ddelta_rel", a.ddelta_rel);
    o.opt_list("dkappa_rel", a.dkappa_rel);
    o.finish();
    c.scan = a;
  }

  if (r.has("bump")) {
    ObjectReader o = r.child("bump");
    BumpBlock b;
    o.opt_list("thetas", b.thetas);
    o.opt_list("kappas", b.kappas);
    o.opt_list("axes", b.axes);
    o.opt("T", b.T);
    o.opt("steps", b.steps);
    o.finish();
    for (const auto& a : b.axes)
      if (a != "x" && a != "y") throw ConfigError("bump.axes: expected x or y");
    if (!(b.T > 0)) throw ConfigError("bump.T: must be > 0");
    if (b.steps < 1000) throw ConfigError("bump.steps: must be >= 1000");
    c.bump = b;
  }

  if (r.has("free_decay")) {
    ObjectReader o = r.child("free_decay");
    FreeDecayBlock b;
    o.opt("t_max", b.t_max);
    o.opt_list("kappas", b.kappas);
    o.opt("theta", b.theta);
    o.opt("sample_dt", b.sample_dt);
    o.finish();
    if (!(b.t_max > 0)) throw ConfigError("free_decay.t_max: must be > 0");
    if (!(b.sample_dt > 0)) throw ConfigError("free_decay.sample_dt: must be > 0");
    c.free_decay = b;
  }

  if (r.has("output")) {
    ObjectReader o = r.child("output");
    o.opt("dir", c.output.dir);
    o.opt_list("formats", c.output.formats);
    o.finish();
    for (const auto& f : c.output.formats)
      if (f != "csv" && f != "json") throw ConfigError("output.formats: expected csv or json");
  }
  r.finish();

  // Workflow-specific requirements.
  switch (c.workflow) {
    case Workflow::Propagate:
      if (!c.sequence) throw ConfigError("sequence: required for the propagate workflow");
      break;
    case Workflow::Optimize:
      if (!c.optimize) throw ConfigError("optimize: required for the optimize workflow");
      if (!c.merit) throw ConfigError("merit: required for the optimize workflow");
      if (c.optimize->init_from_sequence && !c.sequence)
        throw ConfigError("sequence: required when optimize.init_from_sequence is set");
      break;
    case Workflow::Controllability:
      if (!c.controllability) c.controllability = ControllabilityBlock{};
      break;
    case Workflow::Scan:
      if (!c.sequence) throw ConfigError("sequence: required for the scan workflow");
      if (!c.merit) throw ConfigError("merit: required for the scan workflow");
      if (!c.scan) c.scan = ScanAxes{};
      break;
    case Workflow::BumpValidate:
      if (!c.bump) c.bump = BumpBlock{};
      break;
    case Workflow::FreeDecayReference:
      if (!c.free_decay) c.free_decay = FreeDecayBlock{};
      break;
  }
  return c;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config: malformed JSON: ") + e.what());
  }
  return parse_config(j);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

/// Canonical JSON form: every field explicit, fixed key order.
inline json to_json(const ExperimentConfig& c) {
  json j;
  j["workflow"] = to_string(c.workflow);
  j["system"] = json{{"n_spins", c.space.n_spins},
                     {"fock_cutoff", c.space.fock_cutoff},
                     {"spin_basis", to_string(c.space.spin_basis)},
                     {"g", c.params.g},
                     {"kappa", c.params.kappa},
                     {"deltas", c.params.deltas}};
  j["initial_state"] = detail::dump_state(c.initial);
  if (c.sequence) j["sequence"] = detail::dump_sequence(*c.sequence);
  if (c.merit)
    j["merit"] = json{{"kind", c.merit->kind},
                      {"target", detail::dump_state(c.merit->target)},
                      {"trace_out_cavity", c.merit->trace_out_cavity},
                      {"sign", c.merit->sign}};
  const auto& o = c.propagation;
  j["propagation"] = json{{"dt", o.dt},
                          {"sample_dt", o.sample_dt},
                          {"trailing_free", o.trailing_free},
                          {"leakage_warn", o.leakage_warn},
                          {"leakage_error", o.leakage_error},
                          {"check_convergence", o.check_convergence},
                          {"convergence_tol", o.convergence_tol},
                          {"max_halvings", o.max_halvings},
                          {"monitor_positivity", o.monitor_positivity}};
  j["projections"] = c.projections;
  if (c.optimize) {
    const auto& b = *c.optimize;
    const auto& oc = b.optimizer;
    j["optimize"] = json{{"population", oc.population},
                         {"iterations", oc.iterations},
                         {"workers", oc.workers},
                         {"seed", oc.rng_seed},
                         {"jaya_restarts", oc.jaya_restarts},
                         {"stagnation_window", oc.stagnation_window},
                         {"stagnation_tol", oc.stagnation_tol},
                         {"init_spread", oc.init_spread},
                         {"pre_opt", json{{"enabled", oc.pre_opt.enabled},
                                          {"restarts", oc.pre_opt.restarts},
                                          {"packages", oc.pre_opt.packages},
                                          {"max_steps", oc.pre_opt.max_steps},
                                          {"fd_step", oc.pre_opt.fd_step}}},
                         {"bounds", json{{"packages", b.bounds.packages},
                                         {"theta_min", b.bounds.theta_min},
                                         {"theta_max", b.bounds.theta_max},
                                         {"s_max", b.bounds.s_max},
                                         {"t_max", b.bounds.t_max},
                                         {"use_theta_y", b.bounds.use_theta_y},
                                         {"use_squeeze", b.bounds.use_squeeze}}},
                         {"init_from_sequence", b.init_from_sequence},
                         {"kappas", b.kappas},
                         {"checkpoint", b.checkpoint},
                         {"checkpoint_every", b.checkpoint_every},
                         {"resume", b.resume}};
  }
  if (c.controllability)
    j["controllability"] = json{{"generator_sets", c.controllability->generator_sets},
                                {"max_order", c.controllability->max_order},
                                {"rank_tol", c.controllability->rank_tol},
                                {"rule", to_string(c.controllability->rule)}};
  if (c.scan)
    j["scan"] = json{{"dg_rel", c.scan->dg_rel},
                     {"ddelta_abs", c.scan->ddelta_abs},
                     {"ddelta_rel", c.scan->ddelta_rel},
                     {"dkappa_rel", c.scan->dkappa_rel}};
  if (c.bump)
    j["bump"] = json{{"thetas", c.bump->thetas},
                     {"kappas", c.bump->kappas},
                     {"axes", c.bump->axes},
                     {"T", c.bump->T},
                     {"steps", c.bump->steps}};
  if (c.free_decay)
    j["free_decay"] = json{{"t_max", c.free_decay->t_max},
                           {"kappas", c.free_decay->kappas},
                           {"theta", c.free_decay->theta},
                           {"sample_dt", c.free_decay->sample_dt}};
  j["output"] = json{{"dir", c.output.dir}, {"formats", c.output.formats}};
  return j;
}

// ---------------------------------------------------------------------------
// Builders from config entries

inline DensityMatrix build_state(const SpaceSpec& space, const StateSpec& s) {
  return product_state(space, s.photons, named_spin_state(space, s.spins));
}

inline MeritSpec build_merit(const ExperimentConfig& c) {
  if (!c.merit) throw ConfigError("merit: not configured");
  const auto& m = *c.merit;
  if (m.kind == "cumulant") return MeritSpec::cumulant(m.sign);
  if (m.trace_out_cavity) {
    const Vector v = named_spin_state(c.space, m.target.spins);
    return MeritSpec::fidelity_to(v * v.adjoint() / v.squaredNorm(), true);
  }
  return MeritSpec::fidelity_to(build_state(c.space, m.target).matrix());
}

inline GeneratorSet build_generator_set(const SpaceSpec& space, const SystemParams& params,
                                        const std::vector<std::string>& names) {
  GeneratorSet g;
  g.space = space;
  const auto [vx, vy] = build_rotation_generators(space);
  for (const auto& n : names) {
    if (n == "H0") g.generators.push_back(build_h0(space, params).matrix);
    else if (n == "Vx") g.generators.push_back(vx.matrix);
    else if (n == "Vy") g.generators.push_back(vy.matrix);
    else if (n == "Vs") g.generators.push_back(build_squeeze_generator(space).matrix);
    else throw ConfigError("unknown generator '" + n + "'");
    g.labels.push_back(n);
  }
  return g;
}

}  // namespace cavityctl
