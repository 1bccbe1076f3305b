#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "vesflow/collision.hpp"
#include "vesflow/sim.hpp"

namespace {

// --out and --seed beat the values in the config file
void apply_overrides(vesflow::RunConfig& cfg, const CLI::Option* out_opt,
                     const std::string& out_dir, const CLI::Option* seed_opt,
                     std::uint64_t seed) {
  if (out_opt->count()) cfg.output.directory = out_dir;
  if (seed_opt->count()) cfg.scenario.seed = seed;
}

int cmd_run(const std::string& config_path, bool dump,
            const vesflow::RunConfig& cfg) {
  vesflow::RunConfig run_cfg = cfg;
  run_cfg.dump_linear_system = run_cfg.dump_linear_system || dump;
  vesflow::RunResult res = vesflow::simulate(run_cfg, run_cfg.output.directory);
  const vesflow::DiagnosticsRecord* last = nullptr;
  for (const auto& d : res.diag)
    if (d.collision_events == 0) last = &d;
  std::cout << "config:    " << config_path << "\n"
            << "artifacts: " << run_cfg.output.directory << "\n"
            << "status:    " << res.message << "\n";
  if (last)
    std::cout << "final:     e_A = " << last->e_area
              << ", e_L = " << last->e_length << "\n";
  return res.exit_code;
}

int cmd_converge(const vesflow::RunConfig& cfg, int levels) {
  vesflow::ConvergenceTable tab = vesflow::run_convergence(cfg, levels);
  std::filesystem::create_directories(cfg.output.directory);
  const std::string path = cfg.output.directory + "/convergence.csv";
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  vesflow::write_convergence_csv(tab, f);
  vesflow::write_convergence_csv(tab, std::cout);
  if (!tab.all_completed) {
    std::cerr << "warning: a level failed; table in " << path
              << " is partial\n";
    return 4;
  }
  std::cout << "table written to " << path << "\n";
  return 0;
}

int cmd_check(const std::string& snapshot_path) {
  vesflow::SystemState state = vesflow::read_snapshot(snapshot_path);
  vesflow::CollisionReport rep = vesflow::detect_collisions(state);
  std::cout << "{\"collided\":" << (rep.collided ? "true" : "false")
            << ",\"max_deviation\":" << rep.max_deviation << ",\"events\":[";
  for (size_t i = 0; i < rep.events.size(); ++i) {
    const vesflow::CollisionEvent& e = rep.events[i];
    std::cout << (i ? "," : "") << "{\"vesicle\":" << e.vesicle
              << ",\"node\":" << e.node << ",\"indicator\":" << e.indicator
              << ",\"expected\":" << e.expected << "}";
  }
  std::cout << "]}\n";
  return rep.collided ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "vesflow: a boundary-integral simulator for inextensible vesicle "
      "suspensions in 2D Stokes flow"};
  app.require_subcommand(1);

  std::string config_path, snapshot_path, out_dir;
  std::uint64_t seed = 0;
  int levels = 3;
  bool dump = false;

  CLI::App* run = app.add_subcommand("run", "time-step a configured scenario");
  run->add_option("config", config_path, "run configuration file")
      ->required()
      ->check(CLI::ExistingFile);
  CLI::Option* run_out =
      run->add_option("--out", out_dir, "override the output directory");
  CLI::Option* run_seed =
      run->add_option("--seed", seed, "override the placement seed");
  run->add_flag("--dump-linear-system", dump,
                "write the frozen operator and right-hand side of the first "
                "step as matrix.csv / rhs.csv");

  CLI::App* conv = app.add_subcommand(
      "converge", "refinement study: (N, dt), (2N, dt/2), ...");
  conv->add_option("config", config_path, "run configuration file")
      ->required()
      ->check(CLI::ExistingFile);
  conv->add_option("--levels", levels, "number of refinement levels")
      ->check(CLI::Range(2, 8));
  CLI::Option* conv_out =
      conv->add_option("--out", out_dir, "override the output directory");
  CLI::Option* conv_seed =
      conv->add_option("--seed", seed, "override the placement seed");

  CLI::App* chk =
      app.add_subcommand("check", "collision-check a snapshot CSV");
  chk->add_option("snapshot", snapshot_path, "snapshot file")
      ->required()
      ->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      vesflow::RunConfig cfg = vesflow::load_run_config(config_path);
      apply_overrides(cfg, run_out, out_dir, run_seed, seed);
      return cmd_run(config_path, dump, cfg);
    }
    if (conv->parsed()) {
      vesflow::RunConfig cfg = vesflow::load_run_config(config_path);
      apply_overrides(cfg, conv_out, out_dir, conv_seed, seed);
      return cmd_converge(cfg, levels);
    }
    return cmd_check(snapshot_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
