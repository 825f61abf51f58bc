// Command-line front end: probabilistic deadline analysis, Monte Carlo
// simulation and budget optimization for CPU-reservation scheduled tasks.
//
// Exit codes: 0 success, 2 infeasible optimization, 3 config error,
// 4 numerical failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "resprob/report.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string solver;
  std::string out_path;
  std::string csv_path;
  std::string dump_chain_path;
  std::int64_t seed = -1;
  double truncate_below = -1.0;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_dump) {
  cmd->add_option("--config", args.config_path, "configuration file")->required();
  cmd->add_option("--solver", args.solver,
                  "solver: analytic | companion | cyclic-reduction");
  cmd->add_option("--out", args.out_path, "write the JSON report here");
  cmd->add_option("--csv", args.csv_path, "write the CSV export here");
  cmd->add_option("--seed", args.seed, "override the RNG seed");
  cmd->add_option("--truncate-below", args.truncate_below,
                  "drop distribution masses below this value and renormalize");
  if (with_dump)
    cmd->add_option("--dump-chain", args.dump_chain_path,
                    "dump the built chains as JSON lines");
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw resprob::ConfigError("cannot open output file: " + path);
  out << content;
}

int run_mode(resprob::RunMode mode, const CommonArgs& args) {
  resprob::RunConfig cfg = resprob::load_config(args.config_path);
  if (cfg.mode && *cfg.mode != mode)
    throw resprob::ConfigError("config requests mode '" + to_token(*cfg.mode) +
                               "' but the subcommand is '" + to_token(mode) + "'");
  if (!args.solver.empty()) cfg.solver = resprob::solver_from_token(args.solver);
  if (args.seed >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed);
  if (!args.out_path.empty()) cfg.out_path = args.out_path;
  if (!args.csv_path.empty()) cfg.csv_path = args.csv_path;
  if (args.truncate_below >= 0.0)
    for (auto& task : cfg.tasks) task.truncate_below = args.truncate_below;

  const std::string config_dir =
      std::filesystem::path(args.config_path).parent_path().string();
  const resprob::RunOutput out =
      resprob::run(cfg, mode, config_dir, !args.dump_chain_path.empty());

  std::cout << out.text;
  if (!cfg.out_path.empty()) write_file(cfg.out_path, out.report.dump(2) + "\n");
  if (!cfg.csv_path.empty()) write_file(cfg.csv_path, out.csv);
  if (!args.dump_chain_path.empty()) write_file(args.dump_chain_path, out.chain_dump);
  return out.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"probabilistic deadline analysis for CPU reservations"};
  app.require_subcommand(1);

  CommonArgs analyze_args, simulate_args, optimize_args;
  CLI::App* analyze = app.add_subcommand("analyze", "solve configured reservations");
  add_common(analyze, analyze_args, /*with_dump=*/true);
  CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo backlog simulation");
  add_common(simulate, simulate_args, /*with_dump=*/false);
  CLI::App* optimize = app.add_subcommand("optimize", "max-min quality budget allocation");
  add_common(optimize, optimize_args, /*with_dump=*/false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (analyze->parsed()) return run_mode(resprob::RunMode::Analyze, analyze_args);
    if (simulate->parsed()) return run_mode(resprob::RunMode::Simulate, simulate_args);
    return run_mode(resprob::RunMode::Optimize, optimize_args);
  } catch (const resprob::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
}
