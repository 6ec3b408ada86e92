#pragma once

#include "latticectl/analysis.hpp"
#include "latticectl/counterexamples.hpp"
#include "latticectl/dynamics.hpp"
#include "latticectl/lie.hpp"
#include "latticectl/steering.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace latticectl {

class ConfigError : public ContractError {
 public:
  using ContractError::ContractError;
};

/// Flat key=value file with # comments. Keys remember their line for messages.
class Config {
 public:
  static Config parse(const std::string& text, const std::string& source = "<config>") {
    Config cfg;
    cfg.source_ = source;
    std::istringstream in(text);
    std::string line;
    int no = 0;
    while (std::getline(in, line)) {
      ++no;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError(source + ":" + std::to_string(no) + ": expected key=value");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty()) throw ConfigError(source + ":" + std::to_string(no) + ": empty key");
      if (cfg.entries_.count(key))
        throw ConfigError(source + ":" + std::to_string(no) + ": duplicate key '" + key + "' (first on line " +
                          std::to_string(cfg.entries_.at(key).line) + ")");
      cfg.entries_[key] = {value, no};
      cfg.order_.push_back(key);
    }
    cfg.last_line_ = no;
    return cfg;
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open config file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
  }

  bool has(const std::string& key) const { return entries_.count(key) != 0; }

  std::string get(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end())
      throw ConfigError(source_ + ":" + std::to_string(last_line_ + 1) + ": missing required key '" + key + "'");
    return it->second.value;
  }
  std::string get(const std::string& key, const std::string& fallback) const { return has(key) ? get(key) : fallback; }

  double number(const std::string& key) const { return to_number(key, get(key)); }
  double number(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }
  int integer(const std::string& key) const {
    const double v = number(key);
    if (v != std::floor(v)) fail(key, "expected an integer");
    return static_cast<int>(v);
  }
  int integer(const std::string& key, int fallback) const { return has(key) ? integer(key) : fallback; }
  std::vector<double> list(const std::string& key) const {
    std::vector<double> out;
    std::stringstream ss(get(key));
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_number(key, trim(item)));
    return out;
  }

  void set(const std::string& key, const std::string& value) {
    if (!has(key)) order_.push_back(key);
    entries_[key] = {value, 0};
  }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    const auto it = entries_.find(key);
    const int line = it == entries_.end() ? last_line_ + 1 : it->second.line;
    throw ConfigError(source_ + ":" + std::to_string(line) + ": " + key + ": " + msg);
  }

  const std::string& source() const { return source_; }

  nlohmann::ordered_json echo() const {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& k : order_) j[k] = entries_.at(k).value;
    return j;
  }

 private:
  struct Entry {
    std::string value;
    int line = 0;
  };

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  double to_number(const std::string& key, const std::string& text) const {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(text, &used);
    } catch (const std::logic_error&) {
      fail(key, "not a number: '" + text + "'");
    }
    if (used != text.size()) fail(key, "trailing characters in number '" + text + "'");
    return v;
  }

  std::map<std::string, Entry> entries_;
  std::vector<std::string> order_;
  std::string source_;
  int last_line_ = 0;
};

/// potential = toda | harmonic | quartic | polynomial | shifted-odd, with
/// param.coeffs / param.odd / param.b / param.linear / param.phi_shift /
/// param.lower_bound as appropriate.
inline Potential potential_from_config(const Config& cfg) {
  const std::string kind = cfg.get("potential");
  Potential pot = Potential::toda();
  if (kind == "toda") {
    pot = Potential::toda();
  } else if (kind == "harmonic") {
    pot = Potential::harmonic();
  } else if (kind == "quartic") {
    pot = Potential::quartic();
  } else if (kind == "polynomial") {
    pot = Potential::polynomial(cfg.list("param.coeffs"), cfg.number("param.b", 0.0), cfg.number("param.linear", 0.0));
  } else if (kind == "odd-force") {
    pot = Potential::from_odd_force(cfg.list("param.odd"), cfg.number("param.b", 0.0), cfg.number("param.phi_shift", 0.0));
  } else if (kind == "shifted-odd") {
    pot = Potential::shifted_odd(cfg.list("param.odd"), cfg.number("param.b", 0.0), cfg.number("param.phi_shift", 0.0));
  } else {
    cfg.fail("potential", "unknown potential '" + kind + "'");
  }
  if (cfg.has("param.lower_bound")) pot.declare_lower_bound(cfg.number("param.lower_bound"));
  return pot;
}

inline LatticeSystem system_from_config(const Config& cfg) {
  LatticeConfig lc;
  lc.n = cfg.integer("n");
  const std::string topo = cfg.get("topology", "periodic");
  if (topo == "periodic")
    lc.topology = Topology::periodic;
  else if (topo == "open")
    lc.topology = Topology::open;
  else
    cfg.fail("topology", "expected periodic or open");
  if (cfg.has("control_sites")) {
    lc.control_sites.clear();
    for (double s : cfg.list("control_sites")) {
      if (s != std::floor(s)) cfg.fail("control_sites", "site indices must be integers");
      lc.control_sites.push_back(static_cast<int>(s));
    }
  }
  try {
    lc.validate();
  } catch (const ContractError& e) {
    cfg.fail(cfg.has("control_sites") ? "control_sites" : "n", e.what());
  }
  return LatticeSystem(lc, potential_from_config(cfg));
}

/// State from keys q=... and p=... (comma lists); zeros when absent.
inline State state_from_config(const Config& cfg, int n, const std::string& prefix = "") {
  State x = State::zero(n);
  for (const char* part : {"q", "p"}) {
    const std::string key = prefix + part;
    if (!cfg.has(key)) continue;
    const auto v = cfg.list(key);
    if (static_cast<int>(v.size()) != n) cfg.fail(key, "expected " + std::to_string(n) + " values");
    for (int k = 0; k < n; ++k) (part[0] == 'q' ? x.q : x.p)[k] = v[k];
  }
  return x;
}

/// Control file: one segment per line, `duration,u1[,u2...]`, # comments.
inline ControlSignal parse_control(const std::string& text, std::size_t site_count, const std::string& source = "<control>") {
  ControlSignal sig;
  sig.sites.assign(site_count, {});
  std::istringstream in(text);
  std::string line;
  int no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string item;
    try {
      while (std::getline(ss, item, ',')) vals.push_back(std::stod(item));
    } catch (const std::logic_error&) {
      throw ConfigError(source + ":" + std::to_string(no) + ": not a number");
    }
    if (vals.size() != site_count + 1)
      throw ConfigError(source + ":" + std::to_string(no) + ": expected duration and " + std::to_string(site_count) +
                        " control value(s)");
    if (!(vals[0] > 0.0)) throw ConfigError(source + ":" + std::to_string(no) + ": duration must be > 0");
    for (std::size_t i = 0; i < site_count; ++i) sig.sites[i].push_back({vals[0], vals[i + 1]});
  }
  if (sig.sites.empty() || sig.sites[0].empty()) throw ConfigError(source + ": control file has no segments");
  return sig;
}

// ---------------------------------------------------------------------------
// CSV

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_trajectory_csv(std::ostream& out, const Trajectory& tr) {
  const int n = tr.states.empty() ? 0 : tr.states.front().n();
  const std::size_t m = tr.controls.empty() ? 0 : tr.controls.front().size();
  out << 't';
  for (int k = 1; k <= n; ++k) out << ",q" << k;
  for (int k = 1; k <= n; ++k) out << ",p" << k;
  for (std::size_t k = 1; k <= m; ++k) out << ",u" << k;
  out << '\n';
  for (std::size_t i = 0; i < tr.size(); ++i) {
    out << format_number(tr.times[i]);
    for (int k = 0; k < n; ++k) out << ',' << format_number(tr.states[i].q[k]);
    for (int k = 0; k < n; ++k) out << ',' << format_number(tr.states[i].p[k]);
    for (double u : tr.controls[i]) out << ',' << format_number(u);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// JSON

using Json = nlohmann::ordered_json;

inline Json to_json(const Vector& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

inline Json to_json(const State& x) { return Json{{"q", to_json(x.q)}, {"p", to_json(x.p)}}; }

inline Json to_json(const LatticeSystem& sys) {
  Json pot{{"kind", sys.potential().name()}};
  for (const auto& [k, v] : sys.potential().params()) pot["params"][k] = v;
  pot["lower_bound"] = sys.potential().bounded_below() ? Json(sys.potential().lower_bound()) : Json(nullptr);
  return Json{{"n", sys.n()},
              {"topology", to_string(sys.topology())},
              {"control_sites", sys.control_sites()},
              {"potential", pot}};
}

inline Json to_json(const RankReport& r) {
  return Json{{"point", to_json(r.point)},        {"family", r.family},
              {"singular_values", r.singular_values}, {"rank", r.rank},
              {"rank_with_drift", r.rank_with_drift}, {"tolerance", r.tolerance}};
}

inline Json to_json(const DegeneracyReport& r) {
  return Json{{"classification", to_string(r.classification)},
              {"shift", r.shift},
              {"sign", r.sign},
              {"residual", r.residual},
              {"even_residual", r.even_residual},
              {"odd_residual", r.odd_residual}};
}

inline Json to_json(const Plane& plane) {
  Json cs = Json::array();
  for (const auto& c : plane.constraints) cs.push_back(Json{{"coeffs", to_json(c.coeffs)}, {"offset", c.offset}});
  return Json{{"label", plane.label}, {"constraints", cs}};
}

inline Json to_json(const ControlSignal& sig) {
  Json sites = Json::array();
  for (const auto& segs : sig.sites) {
    Json s = Json::array();
    for (const auto& seg : segs) s.push_back(Json{{"duration", seg.duration}, {"value", seg.value}});
    sites.push_back(s);
  }
  return sites;
}

inline Json to_json(const Primitive& prim) {
  return std::visit(overloaded{
                        [](const FreeFlow& v) { return Json{{"type", "FreeFlow"}, {"t", v.t}}; },
                        [](const ConjugatedFlow& v) {
                          return Json{{"type", "ConjugatedFlow"}, {"sign", v.sign > 0 ? "+" : "-"}, {"t", v.t}};
                        },
                        [](const GShift& v) { return Json{{"type", "GShift"}, {"amount", v.amount}}; },
                        [](const Pulse& v) {
                          return Json{{"type", "Pulse"}, {"sign", v.sign > 0 ? "+" : "-"}, {"theta", v.theta}};
                        },
                        [](const ConstantLeg& v) {
                          return Json{{"type", "ConstantLeg"}, {"u", v.u}, {"duration", v.duration}};
                        },
                    },
                    prim);
}

inline Json to_json(const SteeringPlan& plan) {
  Json steps = Json::array();
  for (const auto& s : plan.steps) steps.push_back(to_json(s));
  return Json{{"mode", to_string(plan.mode)},
              {"theta", plan.theta},
              {"steps", steps},
              {"achieved_distance", plan.achieved_distance},
              {"reached", plan.reached},
              {"evaluations", plan.evaluations}};
}

inline Json to_json(const RecurrenceResult& r) {
  Json j{{"found", r.found}};
  if (r.found) j["tau"] = r.tau, j["distance"] = r.distance;
  j["best_tau"] = r.best_tau;
  j["best_distance"] = std::isfinite(r.best_distance) ? Json(r.best_distance) : Json(nullptr);
  return j;
}

inline Json to_json(const EnergyBox& b, double Q) {
  Json j{{"c", b.c}, {"n", b.n}, {"lower_bound", b.lower_bound}, {"empty", b.empty}};
  if (!b.empty) {
    j["bond_bound"] = b.bond_bound;
    j["momentum_sq_bound"] = b.momentum_sq_bound;
    j["Q"] = Q;
    j["q_interval"] = {b.lower(Q), b.upper(Q)};
  }
  return j;
}

inline Json to_json(const CompactnessReport& r) {
  return Json{{"requested", r.requested},
              {"accepted", r.accepted},
              {"attempts", r.attempts},
              {"acceptance_rate", r.acceptance_rate()},
              {"box_violations", r.box_violations},
              {"momentum_violations", r.momentum_violations},
              {"starved", r.starved}};
}

inline Json to_json(const ConservationReport& r) {
  return Json{{"samples", r.samples},
              {"horizon", r.horizon},
              {"initial_energy", r.initial_energy},
              {"max_energy_drift", r.max_energy_drift},
              {"max_relative_energy_drift", r.max_relative_energy_drift},
              {"max_step_energy_change", r.max_step_energy_change},
              {"momentum_change", r.momentum_change},
              {"control_integral", r.control_integral},
              {"max_momentum_error", r.max_momentum_error}};
}

inline Json to_json(const InvariantPlaneResult& r) {
  return Json{{"residual", r.residual}, {"error_estimate", r.error_estimate}, {"threshold", r.threshold}};
}

}  // namespace latticectl
