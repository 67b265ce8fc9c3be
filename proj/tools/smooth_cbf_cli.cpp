// Command-line driver: runs a scenario file and writes trajectory, events and plots.
//
//   smooth_cbf run <scenario.json> [--mode smooth|discrete] [--dt F] [--tmax F]
//                  [--out DIR] [--active-only-softmin] [--slack-on-infeasible] [--timing]
//
// Exit codes: 0 all tasks completed, 1 bad input or I/O failure, 2 QP
// infeasible, 3 t_max reached before completion.

#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "smooth_cbf/smooth_cbf.hpp"

namespace {

constexpr int kExitCompleted = 0;
constexpr int kExitError = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitTimeout = 3;

struct RunArgs {
  std::string scenario;
  std::optional<std::string> mode;
  std::optional<double> dt;
  std::optional<double> t_max;
  std::string out = "out";
  bool active_only_softmin = false;
  bool slack_on_infeasible = false;
  bool timing = false;
};

int run_command(const RunArgs& args) {
  using namespace smooth_cbf;
  Scenario scenario = load_scenario(args.scenario);
  if (args.mode) scenario.mode = *args.mode == "discrete" ? Mode::kDiscrete : Mode::kSmooth;
  if (args.dt) scenario.dt = *args.dt;
  if (args.t_max) scenario.t_max = *args.t_max;
  if (args.active_only_softmin) scenario.softmin_set = SoftminIndexSet::kActiveOnly;
  if (args.slack_on_infeasible) scenario.slack_on_infeasible = true;
  scenario.validate();

  const TrajectoryLog log = run(scenario, scenario.mode);
  const ContinuityReport report = continuity_metric(log);
  emit_outputs(scenario, log, report, args.out, OutputOptions{args.timing});

  std::cout << "scenario: " << scenario.name << " (" << to_string(scenario.mode) << ")\n"
            << "status:   " << to_string(log.status) << "\n"
            << "steps:    " << log.steps.size() << "\n";
  for (const auto& a : log.arrivals) {
    std::cout << "arrival:  task " << a.task << " target " << a.target << " at t = " << a.time
              << "\n";
  }
  std::cout << "max |du|: " << report.max_jump << " at t = " << report.max_jump_time << "\n"
            << "output:   " << args.out << "\n";

  switch (log.status) {
    case RunStatus::kCompleted: return kExitCompleted;
    case RunStatus::kInfeasible: {
      const auto& e = log.infeasibilities.back();
      std::cerr << "QP infeasible at t = " << e.time << "\n";
      return kExitInfeasible;
    }
    case RunStatus::kTimeout: return kExitTimeout;
  }
  return kExitError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequential reachability with smooth task transitions"};
  app.require_subcommand(1);

  RunArgs args;
  auto* run = app.add_subcommand("run", "Simulate a scenario file");
  run->add_option("scenario", args.scenario, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  run->add_option("--mode", args.mode, "Controller: smooth (composite row) or discrete (switched rows)")
      ->check(CLI::IsMember({"smooth", "discrete"}));
  run->add_option("--dt", args.dt, "Sample period [s]")->check(CLI::PositiveNumber);
  run->add_option("--tmax", args.t_max, "Simulated horizon [s]")->check(CLI::PositiveNumber);
  run->add_option("--out", args.out, "Output directory")->capture_default_str();
  run->add_flag("--active-only-softmin", args.active_only_softmin,
                "Soft minimum over barriers with nonzero weight only");
  run->add_flag("--slack-on-infeasible", args.slack_on_infeasible,
                "Relax the reachability row (never safety) when the QP is infeasible");
  run->add_flag("--timing", args.timing, "Record QP solve times in the trajectory CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    return run_command(args);
  } catch (const smooth_cbf::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
  } catch (const smooth_cbf::OutputError& e) {
    std::cerr << "output error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
  }
  return kExitError;
}
