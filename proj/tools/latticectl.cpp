#include "latticectl/io.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

using namespace latticectl;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kDefaultSeed = 20240601;

enum Exit { kOk = 0, kVerdictFail = 1, kUsage = 2, kNumerical = 3 };

struct Common {
  std::string config;
  std::uint64_t seed = kDefaultSeed;
  std::string out = ".";
};

Config load_config(const Common& c) {
  if (c.config.empty()) throw ConfigError("--config is required for this command");
  return Config::load(c.config);
}

IntegratorPolicy policy_from_config(const Config& cfg) {
  IntegratorPolicy pol;
  const std::string m = cfg.get("integrator.method", "yoshida4");
  if (m == "yoshida4")
    pol.method = Method::yoshida4;
  else if (m == "verlet")
    pol.method = Method::verlet;
  else if (m == "reference")
    pol.method = Method::reference;
  else
    cfg.fail("integrator.method", "expected yoshida4, verlet or reference");
  pol.step = cfg.number("integrator.step", pol.step);
  if (!(pol.step > 0.0)) cfg.fail("integrator.step", "must be > 0");
  pol.sample_every = cfg.integer("integrator.sample_every", pol.sample_every);
  if (pol.sample_every < 1) cfg.fail("integrator.sample_every", "must be >= 1");
  if (cfg.has("integrator.clamp")) pol.control_clamp = cfg.number("integrator.clamp");
  return pol;
}

State random_state(std::uint64_t seed, int n, bool zero_momentum) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  State x = State::zero(n);
  for (int k = 0; k < n; ++k) x.q[k] = u(rng);
  for (int k = 0; k < n; ++k) x.p[k] = u(rng);
  if (zero_momentum) x.p.array() -= x.p.mean();
  return x;
}

/// Start state from q/p keys, or a seeded random point.
State start_state(const Config& cfg, const LatticeSystem& sys, std::uint64_t seed, bool zero_momentum = false) {
  if (cfg.has("q") || cfg.has("p")) return state_from_config(cfg, sys.n());
  return random_state(seed, sys.n(), zero_momentum);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

void write_csv(const fs::path& path, const Trajectory& tr) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  write_trajectory_csv(out, tr);
}

int emit(const Common& c, const std::string& name, Json report) {
  const std::string verdict = report.value("verdict", "fail");
  const std::string text = report.dump(2) + "\n";
  std::cout << text;
  write_text(fs::path(c.out) / (name + ".json"), text);
  return verdict == "pass" ? kOk : kVerdictFail;
}

Json header(const std::string& command, const Common& c, const Config* cfg) {
  Json j{{"command", command}, {"seed", c.seed}};
  j["config"] = cfg ? cfg->echo() : Json::object();
  return j;
}

// ---------------------------------------------------------------------------

int cmd_simulate(const Common& c, const std::string& control_path, double horizon_flag) {
  const Config cfg = load_config(c);
  const LatticeSystem sys = system_from_config(cfg);
  const IntegratorPolicy pol = policy_from_config(cfg);
  const State x0 = state_from_config(cfg, sys.n());
  ControlSignal sig;
  if (!control_path.empty()) {
    std::ifstream in(control_path);
    if (!in) throw ConfigError(control_path + ": cannot open control file");
    std::stringstream ss;
    ss << in.rdbuf();
    sig = parse_control(ss.str(), sys.control_sites().size(), control_path);
  } else {
    const double T = horizon_flag > 0.0 ? horizon_flag : cfg.number("T", 10.0);
    if (!(T > 0.0)) cfg.fail("T", "horizon must be > 0");
    sig = ControlSignal::constant(cfg.number("u", 0.0), T, sys.control_sites().size());
  }
  const Trajectory tr = controlled_flow(x0, sig, sys, pol);
  write_csv(fs::path(c.out) / "trajectory.csv", tr);
  Json j = header("simulate", c, &cfg);
  j["system"] = to_json(sys);
  j["horizon"] = sig.horizon();
  j["control"] = to_json(sig);
  j["final"] = to_json(tr.final());
  j["conservation"] = to_json(conservation_report(tr, sys));
  j["verdict"] = "pass";
  return emit(c, "simulate", j);
}

int cmd_rank(const Common& c) {
  const Config cfg = load_config(c);
  const LatticeSystem sys = system_from_config(cfg);
  const State x = start_state(cfg, sys, c.seed);
  const RankReport r = lie_rank(x, sys, cfg.integer("depth", 0), cfg.number("tol", 1e-8));
  const int expected = cfg.integer("expect_rank", sys.dim());
  Json j = header("rank", c, &cfg);
  j["system"] = to_json(sys);
  j["report"] = to_json(r);
  if (sys.potential().linear_force()) j["kalman_rank"] = kalman_rank(sys, sys.control_sites().front());
  j["expected_rank"] = expected;
  j["verdict"] = r.rank == expected ? "pass" : "fail";
  return emit(c, "rank", j);
}

int cmd_generic(const Common& c) {
  const Config cfg = load_config(c);
  const Potential pot = potential_from_config(cfg);
  ScanGrid grid;
  grid.lo = cfg.number("grid.lo", grid.lo);
  grid.hi = cfg.number("grid.hi", grid.hi);
  grid.points = cfg.integer("grid.points", grid.points);
  const DegeneracyReport r = degeneracy_scan(pot, grid);
  Json j = header("generic-check", c, &cfg);
  j["potential"] = pot.name();
  j["report"] = to_json(r);
  j["determinant_at_origin"] = genericity_determinant(pot, 0.0, 0.0);
  j["verdict"] = r.classification == Degeneracy::generic ? "pass" : "fail";
  return emit(c, "generic-check", j);
}

int cmd_counterexample(const Common& c, const std::string& which, double horizon) {
  Counterexample ce = [&] {
    if (which == "periodic-quartic" || which == "toda-negative") return build_periodic_degenerate_trimer({{0, 0, 0, 1}}, 0.0);
    if (which == "periodic-harmonic") return build_periodic_degenerate_trimer({{0, 1}}, 0.0);
    if (which == "open-harmonic") return build_nonperiodic_trimer({{0, 1}}, 0.0);
    if (which == "open-cubic") return build_nonperiodic_trimer({{0, 0, 0, 1}}, 0.5);
    throw ConfigError("unknown --case '" + which +
                      "' (periodic-quartic, periodic-harmonic, open-harmonic, open-cubic, toda-negative)");
  }();
  const bool negative = which == "toda-negative";
  const LatticeSystem sys = negative ? LatticeSystem(ce.system.config(), Potential::toda()) : ce.system;
  State x0 = State::zero(3);
  if (sys.topology() == Topology::periodic) {
    x0.q << 0.5, -0.2, -0.2;
    x0.p << 0.1, 0.3, 0.3;
    x0.q[2] = x0.q[1] + ce.plane.constraints[1].offset;
  } else {
    x0.q << 0.3, -0.4, 0.3 + ce.plane.constraints[0].offset;
    x0.p << 0.2, -0.1, 0.2;
  }
  std::mt19937_64 rng(c.seed);
  const ControlSignal u = negative ? ControlSignal::constant(0.0, horizon, 1) : random_control(rng, horizon, 8, 2.0, 1);
  const InvariantPlaneResult r = invariant_plane_residual(sys, ce.plane, x0, u, horizon);
  Json j = header("counterexample", c, nullptr);
  j["case"] = which;
  j["system"] = to_json(sys);
  j["plane"] = to_json(ce.plane);
  j["initial"] = to_json(x0);
  j["control"] = to_json(fit_horizon(u, horizon));
  j["horizon"] = horizon;
  j["result"] = to_json(r);
  j["expect_invariant"] = !negative;
  const bool ok = negative ? r.residual > 1e-3 : r.invariant();
  j["verdict"] = ok ? "pass" : "fail";
  return emit(c, "counterexample", j);
}

int cmd_steer(const Common& c) {
  const Config cfg = load_config(c);
  const LatticeSystem sys = system_from_config(cfg);
  const IntegratorPolicy pol = policy_from_config(cfg);
  const State start = start_state(cfg, sys, c.seed, true);
  const State goal = (cfg.has("goal.q") || cfg.has("goal.p")) ? state_from_config(cfg, sys.n(), "goal.") : start;
  PlannerOptions opt;
  const std::string mode = cfg.get("mode", "idealized");
  if (mode == "admissible")
    opt.mode = PlanMode::admissible;
  else if (mode != "idealized")
    cfg.fail("mode", "expected idealized or admissible");
  opt.theta = cfg.number("theta", opt.theta);
  opt.evaluation_budget = static_cast<long>(cfg.number("budget", double(opt.evaluation_budget)));
  opt.beam_width = cfg.integer("beam_width", opt.beam_width);
  opt.max_length = cfg.integer("max_length", opt.max_length);
  const double tol = cfg.number("tol", 1e-2);
  const SteeringPlan plan = plan_steering(start, goal, tol, sys, opt, pol);
  const PlanExecution run = execute_plan(start, plan, sys, pol);
  write_csv(fs::path(c.out) / "trajectory.csv", run.trajectory);
  Json j = header("steer", c, &cfg);
  j["system"] = to_json(sys);
  j["start"] = to_json(start);
  j["goal"] = to_json(goal);
  j["tolerance"] = tol;
  j["plan"] = to_json(plan);
  j["final"] = to_json(run.final);
  j["executed_distance"] = distance(run.final, goal);
  if (run.control) {
    j["control"] = to_json(*run.control);
    std::ostringstream ctl;
    for (const auto& seg : run.control->sites[0]) ctl << format_number(seg.duration) << ',' << format_number(seg.value) << '\n';
    write_text(fs::path(c.out) / "control.csv", ctl.str());
  }
  j["verdict"] = plan.reached ? "pass" : "fail";
  return emit(c, "steer", j);
}

int cmd_recurrence(const Common& c) {
  const Config cfg = load_config(c);
  const LatticeSystem sys = system_from_config(cfg);
  const IntegratorPolicy pol = policy_from_config(cfg);
  const State x = start_state(cfg, sys, c.seed, true);
  const double eps = cfg.number("eps", 0.05), tmin = cfg.number("tmin", 1.0), tmax = cfg.number("tmax", 500.0);
  const RecurrenceResult r = recurrence_search(x, eps, tmin, tmax, sys, pol);
  Json j = header("recurrence", c, &cfg);
  j["system"] = to_json(sys);
  j["state"] = to_json(x);
  j["eps"] = eps, j["tmin"] = tmin, j["tmax"] = tmax;
  j["result"] = to_json(r);
  j["verdict"] = r.found ? "pass" : "not-found";
  return emit(c, "recurrence", j);
}

int cmd_bounds(const Common& c, bool write_samples) {
  const Config cfg = load_config(c);
  const Potential pot = potential_from_config(cfg);
  const int n = cfg.integer("n", 3);
  const double energy = cfg.number("c");
  const double Q = cfg.number("Q", 0.0);
  const long samples = static_cast<long>(cfg.number("samples", 10000));
  const EnergyBox box = lebesgue_bound(pot, energy, n);
  Json j = header("bounds", c, &cfg);
  j["potential"] = pot.name();
  j["box"] = to_json(box, Q);
  if (box.empty) {
    j["verdict"] = "pass";
    return emit(c, "bounds", j);
  }
  std::vector<State> accepted;
  const CompactnessReport rep = verify_compactness(pot, energy, Q, n, samples, c.seed, write_samples ? &accepted : nullptr);
  j["sampling"] = to_json(rep);
  if (write_samples) {
    Trajectory t;
    for (std::size_t i = 0; i < accepted.size(); ++i) t.push(double(i), accepted[i], {});
    write_csv(fs::path(c.out) / "samples.csv", t);
  }
  j["verdict"] = rep.violations() == 0 && !rep.starved ? "pass" : "fail";
  return emit(c, "bounds", j);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"latticectl: controllability toolkit for forced particle chains"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "system config file (key=value)");
    sub->add_option("--seed", common.seed, "RNG seed")->capture_default_str();
    sub->add_option("--out", common.out, "output directory")->capture_default_str();
  };

  std::string control_path;
  double horizon = 0.0;
  auto* simulate = app.add_subcommand("simulate", "integrate the controlled system, write trajectory.csv");
  add_common(simulate);
  simulate->add_option("--control", control_path, "control file: duration,u1[,u2...] per line");
  simulate->add_option("--horizon", horizon, "horizon when no control file is given");

  auto* rank = app.add_subcommand("rank", "Lie-algebra rank at a point");
  add_common(rank);
  auto* generic = app.add_subcommand("generic-check", "degeneracy classification of the potential");
  add_common(generic);

  std::string which = "periodic-quartic";
  double ce_horizon = 10.0;
  auto* ce = app.add_subcommand("counterexample", "invariant-plane check for the degenerate trimers");
  add_common(ce);
  ce->add_option("--case", which, "periodic-quartic | periodic-harmonic | open-harmonic | open-cubic | toda-negative")
      ->capture_default_str();
  ce->add_option("--horizon", ce_horizon, "horizon")->capture_default_str();

  auto* steer = app.add_subcommand("steer", "plan and execute a steering manoeuvre");
  add_common(steer);
  auto* recurrence = app.add_subcommand("recurrence", "search for a near-return of the free flow");
  add_common(recurrence);
  bool write_samples = false;
  auto* bounds = app.add_subcommand("bounds", "energy-box bounds and their Monte Carlo check");
  add_common(bounds);
  bounds->add_flag("--samples-csv", write_samples, "also write accepted samples to samples.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    std::error_code ec;
    fs::create_directories(common.out, ec);
    if (ec) throw ConfigError("cannot create output directory " + common.out);
    if (*simulate) return cmd_simulate(common, control_path, horizon);
    if (*rank) return cmd_rank(common);
    if (*generic) return cmd_generic(common);
    if (*ce) return cmd_counterexample(common, which, ce_horizon);
    if (*steer) return cmd_steer(common);
    if (*recurrence) return cmd_recurrence(common);
    if (*bounds) return cmd_bounds(common, write_samples);
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}
