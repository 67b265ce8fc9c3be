#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "smooth_cbf/errors.hpp"
#include "smooth_cbf/geometry.hpp"

namespace smooth_cbf {

using IndexSet = std::vector<std::size_t>;

/// Target -> indices of the finite-time barriers whose superlevel sets
/// intersect to that target.
class ReachabilityMap {
 public:
  ReachabilityMap(std::vector<IndexSet> targets, std::size_t barrier_count)
      : targets_(std::move(targets)), barrier_count_(barrier_count) {
    if (barrier_count_ == 0) throw ConfigError("reachability map needs at least one barrier");
    for (auto& set : targets_) {
      if (set.empty()) throw ConfigError("every target must map to at least one barrier");
      for (auto j : set) {
        if (j >= barrier_count_) throw ConfigError("target references barrier index out of range");
      }
      std::sort(set.begin(), set.end());
      set.erase(std::unique(set.begin(), set.end()), set.end());
    }
  }

  [[nodiscard]] std::size_t target_count() const { return targets_.size(); }
  [[nodiscard]] std::size_t barrier_count() const { return barrier_count_; }
  [[nodiscard]] const IndexSet& indices(std::size_t target) const { return targets_.at(target); }

 private:
  std::vector<IndexSet> targets_;
  std::size_t barrier_count_;
};

/// Reach one target while staying in the (global) safety set.
struct Task {
  std::size_t target_index = 0;
  IndexSet safety_indices;
};

class TaskSequence {
 public:
  TaskSequence(std::vector<Task> tasks, const ReachabilityMap& map) : tasks_(std::move(tasks)) {
    if (tasks_.empty()) throw ConfigError("task sequence is empty");
    for (std::size_t i = 0; i < tasks_.size(); ++i) {
      if (tasks_[i].target_index >= map.target_count()) {
        throw ConfigError("task " + std::to_string(i) + " references an unknown target");
      }
      if (i > 0 && tasks_[i].target_index == tasks_[i - 1].target_index) {
        throw ConfigError("consecutive tasks must have distinct targets");
      }
    }
  }

  [[nodiscard]] std::size_t size() const { return tasks_.size(); }
  [[nodiscard]] const Task& operator[](std::size_t i) const { return tasks_.at(i); }

 private:
  std::vector<Task> tasks_;
};

/// Ramp-in / ramp-out profiles kappa_up, kappa_down on [0, duration] with
/// their derivatives. Outside that interval the profiles hold their end values.
class TransitionFunctions {
 public:
  using Profile = std::function<double(double)>;

  TransitionFunctions(Profile up, Profile up_dot, Profile down, Profile down_dot, double duration)
      : up_(std::move(up)),
        up_dot_(std::move(up_dot)),
        down_(std::move(down)),
        down_dot_(std::move(down_dot)),
        duration_(duration) {
    if (!(duration_ > 0.0) || !std::isfinite(duration_)) {
      throw ConfigError("transition duration must be positive");
    }
  }

  /// kappa_up = sin^2, kappa_down = cos^2, time-scaled to finish at `duration`
  /// (pi / 2 reproduces the unscaled pair).
  static TransitionFunctions sine_squared(double duration = std::numbers::pi / 2.0) {
    const double rate = std::numbers::pi / (2.0 * duration);
    return TransitionFunctions(
        [rate](double tau) { return std::pow(std::sin(rate * tau), 2); },
        [rate](double tau) { return rate * std::sin(2.0 * rate * tau); },
        [rate](double tau) { return std::pow(std::cos(rate * tau), 2); },
        [rate](double tau) { return -rate * std::sin(2.0 * rate * tau); }, duration);
  }

  [[nodiscard]] double duration() const { return duration_; }
  [[nodiscard]] double up(double tau) const { return up_(clamp(tau)); }
  [[nodiscard]] double down(double tau) const { return down_(clamp(tau)); }
  [[nodiscard]] double up_dot(double tau) const { return inside(tau) ? up_dot_(tau) : 0.0; }
  [[nodiscard]] double down_dot(double tau) const { return inside(tau) ? down_dot_(tau) : 0.0; }

 private:
  [[nodiscard]] double clamp(double tau) const { return std::clamp(tau, 0.0, duration_); }
  [[nodiscard]] bool inside(double tau) const { return tau >= 0.0 && tau <= duration_; }

  Profile up_;
  Profile up_dot_;
  Profile down_;
  Profile down_dot_;
  double duration_;
};

enum class Phase { kReach, kTransition, kDone };

struct PhaseState {
  std::size_t task_index = 0;
  Phase phase = Phase::kReach;
  double arrival_time = 0.0;
  Eigen::VectorXd alpha;
  Eigen::VectorXd alpha_dot;
};

struct AlphaValues {
  Eigen::VectorXd alpha;
  Eigen::VectorXd alpha_dot;
};

namespace detail {

inline bool contains(const IndexSet& set, std::size_t j) {
  return std::binary_search(set.begin(), set.end(), j);
}

}  // namespace detail

/// Transition weights at time t. Indices shared by the current and the next
/// target take the ramp-in value.
inline AlphaValues compute_alpha(double t, const PhaseState& state, const TaskSequence& tasks,
                                 const ReachabilityMap& map, const TransitionFunctions& tf) {
  const auto m = static_cast<Eigen::Index>(map.barrier_count());
  AlphaValues out{Eigen::VectorXd::Zero(m), Eigen::VectorXd::Zero(m)};
  const IndexSet& current = map.indices(tasks[state.task_index].target_index);

  if (state.phase == Phase::kReach || state.phase == Phase::kDone) {
    for (auto j : current) out.alpha[static_cast<Eigen::Index>(j)] = 1.0;
    return out;
  }
  if (state.task_index + 1 >= tasks.size()) {
    throw SequencingError("transition requested after the final task");
  }
  const IndexSet& next = map.indices(tasks[state.task_index + 1].target_index);
  const double tau = t - state.arrival_time;
  for (auto j : current) {
    out.alpha[static_cast<Eigen::Index>(j)] = tf.down(tau);
    out.alpha_dot[static_cast<Eigen::Index>(j)] = tf.down_dot(tau);
  }
  for (auto l : next) {
    out.alpha[static_cast<Eigen::Index>(l)] = tf.up(tau);
    out.alpha_dot[static_cast<Eigen::Index>(l)] = tf.up_dot(tau);
  }
  return out;
}

/// True once every incoming weight reached 1 and every outgoing weight
/// (indices not also incoming) reached 0.
inline bool transition_complete(const Eigen::VectorXd& alpha, const IndexSet& current,
                                const IndexSet& next) {
  constexpr double kEps = 1e-12;
  for (auto k : next) {
    if (alpha[static_cast<Eigen::Index>(k)] < 1.0 - kEps) return false;
  }
  for (auto j : current) {
    if (std::find(next.begin(), next.end(), j) != next.end()) continue;
    if (alpha[static_cast<Eigen::Index>(j)] > kEps) return false;
  }
  return true;
}

inline PhaseState initial_phase(const TaskSequence& tasks, const ReachabilityMap& map,
                                 const TransitionFunctions& tf) {
  PhaseState state;
  auto values = compute_alpha(0.0, state, tasks, map, tf);
  state.alpha = std::move(values.alpha);
  state.alpha_dot = std::move(values.alpha_dot);
  return state;
}

/// True when every barrier of the target is nonnegative at x.
inline bool in_target(std::span<const Barrier> barriers, const IndexSet& target,
                      const Eigen::VectorXd& x) {
  return std::all_of(target.begin(), target.end(),
                     [&](std::size_t j) { return in_superlevel_set(barriers[j], x); });
}

/// One pass of the reach / transition state machine at time t.
///
/// Reach: entering the current target records the arrival time and starts the
/// transition (or finishes the run after the last task). Transition: once the
/// weights have fully exchanged, the next task's reach phase starts. Phases
/// that complete immediately (already inside the next target) chain within
/// the same call. The returned state carries alpha at t.
inline PhaseState advance_phase(PhaseState state, const Eigen::VectorXd& x, double t,
                                const TaskSequence& tasks, const ReachabilityMap& map,
                                std::span<const Barrier> barriers, const TransitionFunctions& tf) {
  if (barriers.size() != map.barrier_count()) {
    throw ConfigError("barrier list does not match the reachability map");
  }
  // Each task contributes at most two phase changes.
  for (std::size_t guard = 0; guard <= 2 * tasks.size(); ++guard) {
    const IndexSet& current = map.indices(tasks[state.task_index].target_index);
    bool changed = false;
    if (state.phase == Phase::kReach && in_target(barriers, current, x)) {
      state.arrival_time = t;
      state.phase = state.task_index + 1 < tasks.size() ? Phase::kTransition : Phase::kDone;
      changed = true;
    } else if (state.phase == Phase::kTransition) {
      const IndexSet& next = map.indices(tasks[state.task_index + 1].target_index);
      const AlphaValues values = compute_alpha(t, state, tasks, map, tf);
      if (transition_complete(values.alpha, current, next)) {
        ++state.task_index;
        state.phase = Phase::kReach;
        changed = true;
      }
    }
    if (!changed) break;
  }
  AlphaValues values = compute_alpha(t, state, tasks, map, tf);
  state.alpha = std::move(values.alpha);
  state.alpha_dot = std::move(values.alpha_dot);
  return state;
}

}  // namespace smooth_cbf
