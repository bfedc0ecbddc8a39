// Command line front end for the full pipeline:
//   collect -> train -> rollout -> graph -> distill -> eval
// plus `run` (everything) and `report` (aggregate stats files).

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "backtrack/config.hpp"
#include "backtrack/error.hpp"
#include "backtrack/eval.hpp"
#include "backtrack/pipeline.hpp"

namespace {

using backtrack::EvalReport;
using backtrack::PipelineConfig;

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::string mode;
  long long seed = -1;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "config file (key = value lines)");
  cmd->add_option("--seed", flags.seed, "override the master seed");
  cmd->add_option("--out", flags.out_dir, "override the output directory");
  cmd->add_option("--mode", flags.mode, "override the mode: learned|oracle")
      ->check(CLI::IsMember({"learned", "oracle"}));
}

PipelineConfig make_config(const CommonFlags& flags) {
  PipelineConfig cfg =
      flags.config_path.empty() ? PipelineConfig{} : backtrack::load_config(flags.config_path);
  if (flags.seed >= 0) cfg.seed = static_cast<std::uint64_t>(flags.seed);
  if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
  if (flags.mode == "learned") cfg.mode = backtrack::PipelineMode::kLearned;
  if (flags.mode == "oracle") cfg.mode = backtrack::PipelineMode::kOracle;
  return cfg;
}

void print_report_summary(const EvalReport& report) {
  std::cout << "return positions: "
            << backtrack::format_return_positions(report.return_positions, report.free_cell_count)
            << "\n";
  if (report.goal_cells.size() > 1) {
    std::cout << "went to closest goal: " << report.closest_goal_positions << " / "
              << report.return_positions << "\n";
  }
}

// Rebuilds the fields report_table() needs from a stats file.
EvalReport report_from_stats(const std::string& path) {
  EvalReport r;
  for (const auto& [key, value] : backtrack::read_stats_tsv(path)) {
    if (key == "maze_size") r.maze_size = std::stoi(value);
    else if (key == "free_cells") r.free_cell_count = std::stoi(value);
    else if (key == "return_positions") r.return_positions = std::stoi(value);
    else if (key == "closest_goal_positions") r.closest_goal_positions = std::stoi(value);
    else if (key == "goal_count") r.goal_cells.resize(static_cast<std::size_t>(std::stoi(value)));
    else if (key == "trials") r.trials = std::stoi(value);
  }
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"backtrack: goal-reaching maze policies distilled from backward rollouts"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::vector<std::string> stats_files;

  CLI::App* collect = app.add_subcommand("collect", "generate random forward episodes");
  CLI::App* train = app.add_subcommand("train", "train encoder, decoder and backward model");
  CLI::App* rollout = app.add_subcommand("rollout", "generate goal-rooted backward rollouts");
  CLI::App* graph = app.add_subcommand("graph", "build the goal graph and SPE-filtered dataset");
  CLI::App* distill = app.add_subcommand("distill", "imitation-train the policy from the dataset");
  CLI::App* eval = app.add_subcommand("eval", "evaluate the policy from every free cell");
  CLI::App* run = app.add_subcommand("run", "run the whole pipeline");
  CLI::App* report = app.add_subcommand("report", "aggregate stats files into a table");
  for (CLI::App* cmd : {collect, train, rollout, graph, distill, eval, run}) {
    add_common(cmd, flags);
  }
  report->add_option("stats", stats_files, "stats-*.tsv files from previous runs")->required();

  try {
    app.parse(argc, argv);

    if (report->parsed()) {
      std::vector<EvalReport> reports;
      for (const std::string& path : stats_files) reports.push_back(report_from_stats(path));
      std::cout << backtrack::report_table(reports);
      return 0;
    }

    const PipelineConfig cfg = make_config(flags);
    backtrack::OutputLock lock(cfg.out_dir);
    backtrack::Pipeline pipeline(cfg);

    if (collect->parsed()) {
      pipeline.collect();
      std::cout << "episodes: " << pipeline.episodes_path() << "\n";
    } else if (train->parsed()) {
      pipeline.train();
      if (cfg.mode == backtrack::PipelineMode::kLearned) {
        std::cout << "models: " << pipeline.repr_path() << ", " << pipeline.wm_path() << "\n";
      } else {
        std::cout << "oracle mode: nothing to train\n";
      }
    } else if (rollout->parsed()) {
      pipeline.rollout();
      std::cout << "archive: " << pipeline.archive_path() << "\n";
    } else if (graph->parsed()) {
      pipeline.graph();
      std::cout << "graph: " << pipeline.graph_text_path() << "\n";
      std::cout << "dataset: " << pipeline.dataset_path() << "\n";
    } else if (distill->parsed()) {
      pipeline.distill();
      std::cout << "policy: " << pipeline.policy_path() << "\n";
    } else if (eval->parsed() || run->parsed()) {
      const EvalReport rep = pipeline.eval();
      print_report_summary(rep);
      std::cout << "report: " << pipeline.report_path() << "\n";
      std::cout << "stats: " << pipeline.stats_path() << "\n";
      std::cout << "heatmap: " << pipeline.heatmap_path() << "\n";
    }
    return 0;
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const backtrack::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
