#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "smooth_cbf/constraints.hpp"
#include "smooth_cbf/dynamics.hpp"
#include "smooth_cbf/errors.hpp"
#include "smooth_cbf/geometry.hpp"
#include "smooth_cbf/scheduler.hpp"

namespace smooth_cbf {

inline constexpr const char* kScenarioSchema = "smooth-cbf-scenario/1";

enum class Mode { kSmooth, kDiscrete };

enum class SystemKind {
  kSingleIntegrator,
  kUnicycleNid,     ///< QP over the off-center point's planar velocity
  kUnicycleDirect,  ///< QP over (v, omega) with the unicycle g(x)
};

struct NamedBarrier {
  std::string name;
  Barrier barrier;
};

/// Validated simulation setup. Barriers are ordered with the finite-time
/// (target) barriers first, followed by the safety barriers.
struct Scenario {
  std::string name;
  SystemKind system = SystemKind::kSingleIntegrator;
  int dim = 2;  // single integrator only
  NidConfig nid;

  Eigen::VectorXd workspace_lower;
  Eigen::VectorXd workspace_upper;

  std::vector<NamedBarrier> reach_barriers;
  std::vector<NamedBarrier> safety_barriers;
  std::vector<std::string> target_names;
  std::vector<IndexSet> target_sets;  // indices into reach_barriers
  std::vector<std::size_t> task_targets;

  FcbfParams fcbf;
  ClassKappa zcbf = ClassKappa::cubic(1.0);
  double composite_gamma = 1.0;
  SoftminIndexSet softmin_set = SoftminIndexSet::kAll;
  double transition_duration = std::numbers::pi / 2.0;
  double box = 10.0;

  double dt = 1e-2;
  double t_max = 30.0;
  double tail = 1.0;
  Integrator integrator = Integrator::kRk4;
  Mode mode = Mode::kSmooth;
  bool slack_on_infeasible = false;

  Eigen::VectorXd initial_state;

  [[nodiscard]] ControlAffineSystem plant() const {
    return system == SystemKind::kSingleIntegrator ? single_integrator(dim) : unicycle();
  }

  /// The system the QP rows are built against.
  [[nodiscard]] ControlAffineSystem control_model() const {
    switch (system) {
      case SystemKind::kSingleIntegrator: return single_integrator(dim);
      case SystemKind::kUnicycleNid: return single_integrator(2);
      case SystemKind::kUnicycleDirect: return unicycle();
    }
    return single_integrator(dim);
  }

  /// State at which barriers are evaluated: the plant state, or the NID point.
  [[nodiscard]] Eigen::VectorXd barrier_state(const Eigen::VectorXd& plant_state) const {
    if (system == SystemKind::kUnicycleNid) return nid_point(plant_state, nid);
    return plant_state;
  }

  [[nodiscard]] std::vector<Barrier> reach_barrier_list() const {
    std::vector<Barrier> out;
    for (const auto& b : reach_barriers) out.push_back(b.barrier);
    return out;
  }
  [[nodiscard]] std::vector<Barrier> safety_barrier_list() const {
    std::vector<Barrier> out;
    for (const auto& b : safety_barriers) out.push_back(b.barrier);
    return out;
  }
  [[nodiscard]] ReachabilityMap reachability_map() const {
    return ReachabilityMap(target_sets, reach_barriers.size());
  }
  [[nodiscard]] TaskSequence task_sequence() const {
    IndexSet safety(safety_barriers.size());
    for (std::size_t i = 0; i < safety.size(); ++i) safety[i] = i;
    std::vector<Task> tasks;
    for (auto target : task_targets) tasks.push_back({target, safety});
    return TaskSequence(std::move(tasks), reachability_map());
  }
  [[nodiscard]] TransitionFunctions transition_functions() const {
    return TransitionFunctions::sine_squared(transition_duration);
  }

  /// Checks cross-field invariants; throws ConfigError naming the violation.
  void validate() const;
};

namespace detail {

using nlohmann::json;

class JsonReader {
 public:
  JsonReader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) fail("expected an object");
  }

  void allow_only(std::initializer_list<const char*> keys) const {
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [key, value] : node_.items()) {
      if (!allowed.contains(key)) fail("unknown key '" + key + "'");
    }
  }

  [[nodiscard]] bool has(const char* key) const { return node_.contains(key); }

  [[nodiscard]] const json& at(const char* key) const {
    if (!node_.contains(key)) fail("missing required key '" + std::string(key) + "'");
    return node_.at(key);
  }

  [[nodiscard]] std::string child(const char* key) const { return path_ + "." + key; }

  [[nodiscard]] double number(const char* key) const {
    const json& v = at(key);
    if (!v.is_number()) fail_at(key, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail_at(key, "expected a finite number");
    return d;
  }
  [[nodiscard]] double number_or(const char* key, double fallback) const {
    return has(key) ? number(key) : fallback;
  }
  [[nodiscard]] int integer(const char* key) const {
    const json& v = at(key);
    if (!v.is_number_integer()) fail_at(key, "expected an integer");
    return v.get<int>();
  }
  [[nodiscard]] std::string string(const char* key) const {
    const json& v = at(key);
    if (!v.is_string()) fail_at(key, "expected a string");
    return v.get<std::string>();
  }
  [[nodiscard]] std::string string_or(const char* key, std::string fallback) const {
    return has(key) ? string(key) : fallback;
  }
  [[nodiscard]] bool boolean_or(const char* key, bool fallback) const {
    if (!has(key)) return fallback;
    const json& v = at(key);
    if (!v.is_boolean()) fail_at(key, "expected a boolean");
    return v.get<bool>();
  }
  [[nodiscard]] Eigen::VectorXd vector(const char* key, std::optional<int> size = {}) const {
    const json& v = at(key);
    if (!v.is_array()) fail_at(key, "expected an array of numbers");
    if (size && static_cast<int>(v.size()) != *size) {
      fail_at(key, "expected " + std::to_string(*size) + " entries");
    }
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number() || !std::isfinite(v[i].get<double>())) {
        fail_at(key, "entry " + std::to_string(i) + " is not a finite number");
      }
      out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
    }
    return out;
  }
  [[nodiscard]] std::vector<std::string> strings(const char* key) const {
    const json& v = at(key);
    if (!v.is_array()) fail_at(key, "expected an array of strings");
    std::vector<std::string> out;
    for (const auto& e : v) {
      if (!e.is_string()) fail_at(key, "expected an array of strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  }

  [[noreturn]] void fail(const std::string& what) const { throw ConfigError(path_ + ": " + what); }
  [[noreturn]] void fail_at(const char* key, const std::string& what) const {
    throw ConfigError(child(key) + ": " + what);
  }

 private:
  const json& node_;
  std::string path_;
};

// Rethrows construction errors with the field path prepended.
template <typename Fn>
auto with_path(const std::string& path, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline Barrier parse_barrier(const JsonReader& r, const std::string& path) {
  const std::string type = r.string("type");
  if (type == "ellipsoid") {
    r.allow_only({"name", "type", "center", "semi_axes"});
    const Eigen::Vector2d center = r.vector("center", 2);
    const Eigen::Vector2d axes = r.vector("semi_axes", 2);
    return with_path(path, [&] { return Barrier(EllipsoidBarrier(center, axes)); });
  }
  if (type == "superellipse") {
    r.allow_only({"name", "type", "center", "sigma", "rotation", "exponent", "offset"});
    const Eigen::Vector2d center = r.vector("center", 2);
    const Eigen::Vector2d sigma = r.vector("sigma", 2);
    const double rotation = r.number_or("rotation", 0.0);
    const int exponent = r.integer("exponent");
    const double offset = r.number_or("offset", 1.0);
    return with_path(path, [&] {
      return Barrier(SuperellipseObstacleBarrier(center, sigma, rotation, exponent, offset));
    });
  }
  if (type == "affine") {
    r.allow_only({"name", "type", "weights", "offset"});
    Eigen::VectorXd weights = r.vector("weights");
    const double offset = r.number("offset");
    return with_path(path, [&] { return Barrier(AffineBarrier(std::move(weights), offset)); });
  }
  r.fail_at("type", "unknown barrier type '" + type + "'");
}

}  // namespace detail

inline void Scenario::validate() const {
  const ControlAffineSystem p = plant();
  if (initial_state.size() != p.state_dim()) {
    throw ConfigError("initial_state: expected " + std::to_string(p.state_dim()) + " entries");
  }
  if (!initial_state.allFinite()) throw ConfigError("initial_state: entries must be finite");
  const int position_dim = system == SystemKind::kSingleIntegrator ? dim : 2;
  if (workspace_lower.size() != position_dim || workspace_upper.size() != position_dim) {
    throw ConfigError("workspace: bounds must have " + std::to_string(position_dim) + " entries");
  }
  if (!(workspace_lower.array() < workspace_upper.array()).all()) {
    throw ConfigError("workspace: lower bound must be strictly below upper bound");
  }
  const Eigen::VectorXd position = barrier_state(initial_state).head(position_dim);
  if ((position.array() < workspace_lower.array()).any() ||
      (position.array() > workspace_upper.array()).any()) {
    throw ConfigError("initial_state: position lies outside the workspace");
  }
  if (reach_barriers.empty()) throw ConfigError("targets: at least one target barrier is required");
  if (task_targets.empty()) throw ConfigError("tasks: at least one task is required");
  fcbf.validate();
  if (!(composite_gamma > 0.0)) throw ConfigError("composite.gamma must be positive");
  if (!(transition_duration > 0.0)) throw ConfigError("transition.duration must be positive");
  if (!(box > 0.0)) throw ConfigError("box must be positive");
  if (!(dt > 0.0)) throw ConfigError("simulation.dt must be positive");
  if (!(t_max > 0.0)) throw ConfigError("simulation.t_max must be positive");
  if (!(tail >= 0.0)) throw ConfigError("simulation.tail must be nonnegative");
  if (system == SystemKind::kUnicycleNid) nid.validate();
  // Barrier / state compatibility: evaluate everything once at the start.
  const Eigen::VectorXd bx = barrier_state(initial_state);
  const ControlAffineSystem model = control_model();
  for (const auto& list : {&reach_barriers, &safety_barriers}) {
    for (const auto& nb : *list) {
      try {
        (void)lie_derivatives(nb.barrier, model, bx);
      } catch (const ConfigError& e) {
        throw ConfigError("barriers." + nb.name + ": " + e.what());
      }
    }
  }
  (void)task_sequence();
}

/// Parses and validates a scenario document. Unknown keys are rejected.
inline Scenario parse_scenario(const nlohmann::json& doc) {
  using detail::JsonReader;
  const JsonReader root(doc, "scenario");
  root.allow_only({"schema", "name", "system", "workspace", "barriers", "targets", "tasks", "safety",
                   "fcbf", "zcbf", "composite", "transition", "box", "simulation",
                   "initial_state"});
  if (root.string("schema") != kScenarioSchema) {
    root.fail_at("schema", "unsupported schema (expected '" + std::string(kScenarioSchema) + "')");
  }

  Scenario s;
  s.name = root.string_or("name", "unnamed");

  {
    const JsonReader sys(root.at("system"), root.child("system"));
    const std::string type = sys.string("type");
    if (type == "single_integrator") {
      sys.allow_only({"type", "dim"});
      s.system = SystemKind::kSingleIntegrator;
      s.dim = sys.has("dim") ? sys.integer("dim") : 2;
      if (s.dim < 1 || s.dim > 3) sys.fail_at("dim", "must be 1, 2 or 3");
    } else if (type == "unicycle") {
      sys.allow_only({"type", "control", "lookahead"});
      const std::string control = sys.string_or("control", "nid");
      if (control == "nid") {
        s.system = SystemKind::kUnicycleNid;
      } else if (control == "direct") {
        s.system = SystemKind::kUnicycleDirect;
      } else {
        sys.fail_at("control", "expected 'nid' or 'direct'");
      }
      s.nid.lookahead = sys.number_or("lookahead", s.nid.lookahead);
    } else {
      sys.fail_at("type", "expected 'single_integrator' or 'unicycle'");
    }
  }

  {
    const JsonReader ws(root.at("workspace"), root.child("workspace"));
    ws.allow_only({"lower", "upper"});
    s.workspace_lower = ws.vector("lower");
    s.workspace_upper = ws.vector("upper");
  }

  // Barriers by name, in file order.
  std::vector<std::pair<std::string, Barrier>> all;
  std::map<std::string, std::size_t> by_name;
  {
    const auto& list = root.at("barriers");
    if (!list.is_array()) root.fail_at("barriers", "expected an array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string path = "scenario.barriers[" + std::to_string(i) + "]";
      const JsonReader br(list[i], path);
      const std::string name = br.string("name");
      if (by_name.contains(name)) br.fail_at("name", "duplicate barrier name '" + name + "'");
      by_name[name] = all.size();
      all.emplace_back(name, detail::parse_barrier(br, path));
    }
  }
  const auto lookup = [&](const std::string& name, const std::string& path) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw ConfigError(path + ": unknown barrier '" + name + "'");
    return it->second;
  };

  // Targets define the finite-time barrier set; its order follows the file.
  std::vector<std::vector<std::size_t>> target_members;
  {
    const auto& list = root.at("targets");
    if (!list.is_array()) root.fail_at("targets", "expected an array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string path = "scenario.targets[" + std::to_string(i) + "]";
      const JsonReader tr(list[i], path);
      tr.allow_only({"name", "barriers"});
      const std::string name = tr.string("name");
      if (std::find(s.target_names.begin(), s.target_names.end(), name) != s.target_names.end()) {
        tr.fail_at("name", "duplicate target name '" + name + "'");
      }
      std::vector<std::size_t> members;
      for (const auto& b : tr.strings("barriers")) members.push_back(lookup(b, tr.child("barriers")));
      if (members.empty()) tr.fail_at("barriers", "must name at least one barrier");
      s.target_names.push_back(name);
      target_members.push_back(std::move(members));
    }
  }
  std::vector<std::size_t> safety_members;
  if (root.has("safety")) {
    for (const auto& b : root.strings("safety")) safety_members.push_back(lookup(b, "scenario.safety"));
  }

  std::vector<long> reach_slot(all.size(), -1);
  for (std::size_t i = 0; i < all.size(); ++i) {
    bool is_reach = false;
    for (const auto& members : target_members) {
      if (std::find(members.begin(), members.end(), i) != members.end()) is_reach = true;
    }
    const bool is_safety =
        std::find(safety_members.begin(), safety_members.end(), i) != safety_members.end();
    if (is_reach && is_safety) {
      throw ConfigError("scenario.safety: barrier '" + all[i].first +
                        "' cannot be both a target and a safety barrier");
    }
    if (is_reach) {
      reach_slot[i] = static_cast<long>(s.reach_barriers.size());
      s.reach_barriers.push_back({all[i].first, all[i].second});
    }
  }
  for (auto i : safety_members) s.safety_barriers.push_back({all[i].first, all[i].second});
  for (const auto& members : target_members) {
    IndexSet set;
    for (auto i : members) set.push_back(static_cast<std::size_t>(reach_slot[i]));
    s.target_sets.push_back(std::move(set));
  }

  for (const auto& t : root.strings("tasks")) {
    auto it = std::find(s.target_names.begin(), s.target_names.end(), t);
    if (it == s.target_names.end()) throw ConfigError("scenario.tasks: unknown target '" + t + "'");
    s.task_targets.push_back(static_cast<std::size_t>(it - s.target_names.begin()));
  }

  if (root.has("fcbf")) {
    const JsonReader r(root.at("fcbf"), root.child("fcbf"));
    r.allow_only({"gamma", "rho"});
    s.fcbf.gamma = r.number_or("gamma", s.fcbf.gamma);
    s.fcbf.rho = r.number_or("rho", s.fcbf.rho);
  }
  if (root.has("zcbf")) {
    const JsonReader r(root.at("zcbf"), root.child("zcbf"));
    r.allow_only({"kind", "gamma", "exponent"});
    const std::string kind = r.string_or("kind", "cubic");
    const double gamma = r.number_or("gamma", 1.0);
    s.zcbf = detail::with_path(root.child("zcbf"), [&] {
      if (kind == "linear") return ClassKappa::linear(gamma);
      if (kind == "cubic") return ClassKappa::cubic(gamma);
      if (kind == "power") return ClassKappa::odd_power(gamma, r.integer("exponent"));
      throw ConfigError("kind: expected 'linear', 'cubic' or 'power'");
    });
  }
  if (root.has("composite")) {
    const JsonReader r(root.at("composite"), root.child("composite"));
    r.allow_only({"gamma", "softmin"});
    s.composite_gamma = r.number_or("gamma", s.composite_gamma);
    const std::string set = r.string_or("softmin", "all");
    if (set == "all") {
      s.softmin_set = SoftminIndexSet::kAll;
    } else if (set == "active_only") {
      s.softmin_set = SoftminIndexSet::kActiveOnly;
    } else {
      r.fail_at("softmin", "expected 'all' or 'active_only'");
    }
  }
  if (root.has("transition")) {
    const JsonReader r(root.at("transition"), root.child("transition"));
    r.allow_only({"profile", "duration"});
    if (r.string_or("profile", "sin2") != "sin2") r.fail_at("profile", "only 'sin2' is supported");
    s.transition_duration = r.number_or("duration", s.transition_duration);
  }
  s.box = root.number_or("box", s.box);
  if (root.has("simulation")) {
    const JsonReader r(root.at("simulation"), root.child("simulation"));
    r.allow_only({"dt", "t_max", "tail", "integrator", "mode", "slack_on_infeasible"});
    s.dt = r.number_or("dt", s.dt);
    s.t_max = r.number_or("t_max", s.t_max);
    s.tail = r.number_or("tail", s.tail);
    const std::string integ = r.string_or("integrator", "rk4");
    if (integ == "rk4") {
      s.integrator = Integrator::kRk4;
    } else if (integ == "euler") {
      s.integrator = Integrator::kEuler;
    } else {
      r.fail_at("integrator", "expected 'rk4' or 'euler'");
    }
    const std::string mode = r.string_or("mode", "smooth");
    if (mode == "smooth") {
      s.mode = Mode::kSmooth;
    } else if (mode == "discrete") {
      s.mode = Mode::kDiscrete;
    } else {
      r.fail_at("mode", "expected 'smooth' or 'discrete'");
    }
    s.slack_on_infeasible = r.boolean_or("slack_on_infeasible", false);
  }
  s.initial_state = root.vector("initial_state");
  s.validate();
  return s;
}

inline Scenario parse_scenario_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("scenario parse error: ") + e.what());
  }
  return parse_scenario(doc);
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_scenario_text(buffer.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace smooth_cbf
