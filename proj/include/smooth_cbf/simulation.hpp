#pragma once

#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "smooth_cbf/constraints.hpp"
#include "smooth_cbf/dynamics.hpp"
#include "smooth_cbf/qp.hpp"
#include "smooth_cbf/scenario.hpp"
#include "smooth_cbf/scheduler.hpp"

namespace smooth_cbf {

struct StepRecord {
  double t = 0.0;
  Eigen::VectorXd state;    ///< plant state
  Eigen::VectorXd u;        ///< QP decision variable
  Eigen::VectorXd applied;  ///< input applied to the plant (differs from u under NID)
  Eigen::VectorXd alpha;
  Eigen::VectorXd alpha_dot;
  Eigen::VectorXd h;  ///< target barriers, then safety barriers
  double softmin = 0.0;
  std::vector<std::string> active_set;
  double qp_us = 0.0;
};

struct ArrivalEvent {
  std::size_t task = 0;
  std::string target;
  double time = 0.0;
};

struct TransitionEndEvent {
  std::size_t task = 0;
  double time = 0.0;
};

struct InfeasibilityEvent {
  double time = 0.0;
  Eigen::VectorXd state;
  std::vector<HalfplaneConstraint> rows;
  /// Set when slack_on_infeasible relaxed the reachability rows by this amount.
  std::optional<double> relaxation;
};

enum class RunStatus { kCompleted, kInfeasible, kTimeout };

struct TrajectoryLog {
  std::string scenario;
  Mode mode = Mode::kSmooth;
  double dt = 0.0;
  std::vector<StepRecord> steps;
  std::vector<ArrivalEvent> arrivals;
  std::vector<TransitionEndEvent> transition_ends;
  std::vector<InfeasibilityEvent> infeasibilities;
  RunStatus status = RunStatus::kTimeout;
};

inline const char* to_string(Mode mode) { return mode == Mode::kSmooth ? "smooth" : "discrete"; }

inline const char* to_string(RunStatus status) {
  switch (status) {
    case RunStatus::kCompleted: return "completed";
    case RunStatus::kInfeasible: return "infeasible";
    case RunStatus::kTimeout: return "timeout";
  }
  return "unknown";
}

namespace detail {

// Smallest shift d >= 0 such that lowering every reachability row's b by d
// makes the problem feasible, then the min-norm solution at that shift.
inline std::optional<std::pair<QpSolution, double>> solve_relaxed(QpProblem problem,
                                                                  std::size_t reach_rows) {
  QpProblem safety_only = problem;
  safety_only.constraints.erase(safety_only.constraints.begin(),
                                safety_only.constraints.begin() + static_cast<long>(reach_rows));
  if (!solve_min_norm(safety_only)) return std::nullopt;

  double hi = 0.0;
  for (std::size_t i = 0; i < reach_rows; ++i) {
    const auto& c = problem.constraints[i];
    hi = std::max(hi, c.b + c.a.lpNorm<1>() * problem.box + 1.0);
  }
  const auto shifted = [&](double d) {
    QpProblem p = problem;
    for (std::size_t i = 0; i < reach_rows; ++i) p.constraints[i].b -= d;
    return p;
  };
  double lo = 0.0;
  for (int iter = 0; iter < 100 && hi - lo > 1e-12 * std::max(1.0, hi); ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (solve_min_norm(shifted(mid))) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  auto solution = solve_min_norm(shifted(hi));
  if (!solution) return std::nullopt;
  return std::make_pair(std::move(*solution), hi);
}

}  // namespace detail

/// Fixed-step closed loop. Smooth mode runs the reach / transition scheduler
/// with the composite row; discrete mode switches one finite-time row per task
/// at the first sample inside the current target. Both add a zeroing row per
/// safety barrier and stop at t_max or `tail` seconds after the last arrival.
inline TrajectoryLog run(const Scenario& scenario, Mode mode) {
  scenario.validate();
  const ControlAffineSystem plant = scenario.plant();
  const ControlAffineSystem model = scenario.control_model();
  const std::vector<Barrier> reach = scenario.reach_barrier_list();
  const std::vector<Barrier> safety = scenario.safety_barrier_list();
  const ReachabilityMap map = scenario.reachability_map();
  const TaskSequence tasks = scenario.task_sequence();
  const TransitionFunctions tf = scenario.transition_functions();
  const double dt = scenario.dt;

  TrajectoryLog log;
  log.scenario = scenario.name;
  log.mode = mode;
  log.dt = dt;
  log.steps.reserve(static_cast<std::size_t>(scenario.t_max / dt) + 2);

  PhaseState phase = initial_phase(tasks, map, tf);
  std::optional<double> done_time;
  Eigen::VectorXd x = scenario.initial_state;

  const auto record_arrival = [&](std::size_t task, double t) {
    log.arrivals.push_back({task, scenario.target_names[tasks[task].target_index], t});
  };

  const auto steps = static_cast<long long>(std::floor(scenario.t_max / dt + 1e-9));
  for (long long k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    const Eigen::VectorXd bx = scenario.barrier_state(x);

    // Scheduler update.
    const PhaseState before = phase;
    if (mode == Mode::kSmooth) {
      phase = advance_phase(phase, bx, t, tasks, map, reach, tf);
      for (std::size_t i = before.task_index; i < phase.task_index; ++i) {
        if (i > before.task_index || before.phase == Phase::kReach) record_arrival(i, t);
        log.transition_ends.push_back({i, t});
      }
      if (phase.phase != Phase::kReach &&
          (phase.task_index != before.task_index || before.phase == Phase::kReach)) {
        record_arrival(phase.task_index, phase.arrival_time);
      }
    } else {
      while (phase.phase == Phase::kReach &&
             in_target(reach, map.indices(tasks[phase.task_index].target_index), bx)) {
        record_arrival(phase.task_index, t);
        phase.arrival_time = t;
        if (phase.task_index + 1 < tasks.size()) {
          ++phase.task_index;
        } else {
          phase.phase = Phase::kDone;
        }
      }
      AlphaValues values = compute_alpha(t, phase, tasks, map, tf);
      phase.alpha = std::move(values.alpha);
      phase.alpha_dot = std::move(values.alpha_dot);
    }
    if (phase.phase == Phase::kDone && !done_time) done_time = t;

    // Constraint rows: reachability first, then safety.
    QpProblem problem;
    problem.box = scenario.box;
    problem.dim = model.input_dim();
    const CompositeContext ctx{reach, phase.alpha, phase.alpha_dot, scenario.composite_gamma,
                               scenario.softmin_set};
    if (mode == Mode::kSmooth) {
      problem.constraints.push_back(composite_row(ctx, model, bx));
    } else {
      for (auto j : map.indices(tasks[phase.task_index].target_index)) {
        problem.constraints.push_back(
            fcbf_row(reach[j], model, bx, scenario.fcbf, "fcbf:" + scenario.reach_barriers[j].name));
      }
    }
    const std::size_t reach_rows = problem.constraints.size();
    for (std::size_t i = 0; i < safety.size(); ++i) {
      problem.constraints.push_back(
          zcbf_row(safety[i], model, bx, scenario.zcbf, "zcbf:" + scenario.safety_barriers[i].name));
    }

    const auto start = std::chrono::steady_clock::now();
    std::optional<QpSolution> solution = solve_min_norm(problem);
    const auto stop = std::chrono::steady_clock::now();
    double qp_us = std::chrono::duration<double, std::micro>(stop - start).count();

    if (!solution) {
      InfeasibilityEvent event{t, x, problem.constraints, std::nullopt};
      if (scenario.slack_on_infeasible) {
        const auto relax_start = std::chrono::steady_clock::now();
        auto relaxed = detail::solve_relaxed(problem, reach_rows);
        qp_us += std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() -
                                                           relax_start)
                     .count();
        if (relaxed) {
          event.relaxation = relaxed->second;
          solution = std::move(relaxed->first);
        }
      }
      log.infeasibilities.push_back(std::move(event));
      if (!solution) {
        // Every task was already reached; the hold just ends early.
        log.status = done_time ? RunStatus::kCompleted : RunStatus::kInfeasible;
        return log;
      }
    }

    StepRecord rec;
    rec.t = t;
    rec.state = x;
    rec.u = solution->u;
    rec.alpha = phase.alpha;
    rec.alpha_dot = phase.alpha_dot;
    rec.h.resize(static_cast<Eigen::Index>(reach.size() + safety.size()));
    std::vector<double> reach_h(reach.size());
    for (std::size_t i = 0; i < reach.size(); ++i) {
      reach_h[i] = eval(reach[i], bx).value;
      rec.h[static_cast<Eigen::Index>(i)] = reach_h[i];
    }
    for (std::size_t i = 0; i < safety.size(); ++i) {
      rec.h[static_cast<Eigen::Index>(reach.size() + i)] = eval(safety[i], bx).value;
    }
    rec.softmin = composite_softmin(ctx, reach_h);
    rec.active_set = solution->active_set;
    rec.qp_us = qp_us;
    if (scenario.system == SystemKind::kUnicycleNid) {
      rec.applied = nid_to_unicycle(solution->u, x[2], scenario.nid);
    } else {
      rec.applied = solution->u;
    }
    log.steps.push_back(rec);

    if (done_time && t >= *done_time + scenario.tail - 1e-9) {
      log.status = RunStatus::kCompleted;
      return log;
    }
    if (k < steps) x = integrate(plant, x, rec.applied, dt, scenario.integrator);
  }
  log.status = done_time ? RunStatus::kCompleted : RunStatus::kTimeout;
  return log;
}

/// Largest step-to-step change of the QP input.
struct ContinuityReport {
  double max_jump = 0.0;
  double max_jump_time = 0.0;
  /// Times (of the later sample) where the step change reached `threshold`.
  std::vector<double> jump_times;
  double threshold = 0.0;
};

inline ContinuityReport continuity_metric(const TrajectoryLog& log, double threshold = 0.1) {
  if (log.steps.empty()) throw ConfigError("continuity metric of an empty log");
  ContinuityReport report;
  report.threshold = threshold;
  for (std::size_t k = 1; k < log.steps.size(); ++k) {
    const double jump = (log.steps[k].u - log.steps[k - 1].u).lpNorm<Eigen::Infinity>();
    if (jump > report.max_jump) {
      report.max_jump = jump;
      report.max_jump_time = log.steps[k].t;
    }
    if (jump >= threshold) report.jump_times.push_back(log.steps[k].t);
  }
  return report;
}

}  // namespace smooth_cbf
