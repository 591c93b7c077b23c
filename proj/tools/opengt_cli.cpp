// opengt: run Open-GT scenarios and write CSV traces.
//
//   opengt run --scenario s.json --out results/ [--seed N] [--oracle-check] [--validate-only]
//   opengt diameter --scenario s.json
//   opengt default-scenario path/to/scenario.json
//
// Exit codes: 0 ok, 1 invalid scenario or arguments, 2 runtime failure,
// 3 engine/oracle mismatch.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "opengt/opengt.hpp"

namespace {

constexpr double kOracleTolerance = 1e-12;

int cmd_run(const std::string& scenario_path, const std::string& out_dir, std::optional<std::uint64_t> seed,
            bool oracle_check, bool validate_only) {
  std::vector<std::string> warnings;
  const auto scenario = opengt::load_scenario(scenario_path, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';

  if (validate_only) {
    std::cout << "ok: " << scenario.nodes << " agents, " << scenario.edges.size() << " edges, Λ=" << *scenario.diameter_bound
              << ", gamma=" << opengt::format_real(*scenario.gamma) << (scenario.gamma_auto ? " (auto)" : "")
              << ", rounds=" << scenario.rounds << ", events=" << scenario.events.size() << '\n';
    return 0;
  }
  if (out_dir.empty()) {
    std::cerr << "error: --out is required unless --validate-only is given\n";
    return 1;
  }

  const auto schedule = opengt::resolve_schedule(scenario, seed);
  const auto trace = opengt::run(schedule);

  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  opengt::emit_trace(trace, (dir / "trace.csv").string());
  opengt::emit_metrics(trace, (dir / "metrics.csv").string());
  opengt::emit_meta(trace, (dir / "meta.json").string());

  const auto& last = trace.rounds.back();
  std::cout << "ran " << trace.rounds.size() << " rounds (seed " << trace.seed << ", gamma "
            << opengt::format_real(trace.gamma) << ", Λ=" << trace.lambda << ")\n";
  for (const auto& c : last.clusters) {
    std::cout << "  final cluster " << c.index << ": size " << c.members.size() << ", minimizer "
              << opengt::format_real(c.minimizer) << ", error " << opengt::format_real(c.error) << '\n';
  }

  double worst_residual = 0;
  for (const auto& rec : trace.rounds)
    for (const auto& c : rec.clusters) worst_residual = std::max(worst_residual, c.lemma1_residual);
  std::cout << "  max lemma1_residual " << opengt::format_real(worst_residual) << '\n';

  if (oracle_check) {
    const auto stacked = opengt::simulate_stacked(schedule, schedule.rounds);
    const auto dev = opengt::max_deviation(trace, stacked);
    std::cout << "  oracle check: max |engine - stacked| = " << opengt::format_real(dev.max_abs) << " (round "
              << dev.round << ", " << opengt::node_label(dev.agent) << ")\n";
    if (!(dev.max_abs <= kOracleTolerance)) {
      std::cerr << "error: engine and stacked form disagree beyond " << kOracleTolerance << '\n';
      return 3;
    }
  }
  std::cout << "wrote " << (dir / "trace.csv").string() << ", " << (dir / "metrics.csv").string() << ", "
            << (dir / "meta.json").string() << '\n';
  return 0;
}

int cmd_diameter(const std::string& scenario_path) {
  const auto s = opengt::parse_scenario(opengt::read_text_file(scenario_path));
  const opengt::MaximalDigraph g(s.nodes, s.edges, s.diameter_bound.value_or(s.nodes));
  std::cout << opengt::exact_diameter(g) << '\n';
  return 0;
}

int cmd_default_scenario(const std::string& path) {
  if (const auto parent = std::filesystem::path(path).parent_path(); !parent.empty())
    std::filesystem::create_directories(parent);
  opengt::save_scenario(opengt::default_scenario(), path);
  std::cout << "wrote " << path << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Open-GT distributed optimization simulator"};
  app.require_subcommand(1);

  std::string scenario_path, out_dir, default_path;
  std::optional<std::uint64_t> seed;
  bool oracle_check = false, validate_only = false;

  auto* run = app.add_subcommand("run", "Run a scenario and write trace.csv, metrics.csv and meta.json");
  run->add_option("--scenario", scenario_path, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_flag("--oracle-check", oracle_check, "Cross-check the engine against the stacked matrix form");
  run->add_flag("--validate-only", validate_only, "Validate the scenario and exit");

  auto* diameter = app.add_subcommand("diameter", "Print the exact diameter of a scenario's graph");
  diameter->add_option("--scenario", scenario_path, "Scenario JSON file")->required()->check(CLI::ExistingFile);

  auto* def = app.add_subcommand("default-scenario", "Write the shipped seven-agent scenario");
  def->add_option("path", default_path, "Destination file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(scenario_path, out_dir, seed, oracle_check, validate_only);
    if (*diameter) return cmd_diameter(scenario_path);
    if (*def) return cmd_default_scenario(default_path);
  } catch (const opengt::ScenarioError& e) {
    std::cerr << "error: invalid scenario " << scenario_path << '\n';
    for (const auto& d : e.diagnostics()) std::cerr << "  - " << d << '\n';
    return 1;
  } catch (const opengt::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
