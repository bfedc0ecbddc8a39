#pragma once

#include <functional>
#include <string>
#include <vector>

#include "backtrack/graph.hpp"
#include "backtrack/maze.hpp"
#include "backtrack/policy.hpp"

namespace backtrack {

using CodeEncoder = std::function<LatentCode(const Observation&)>;

// Outcome of placing the agent at every free cell `trials` times with a step
// budget of ceil(slack * true shortest distance).
struct EvalReport {
  int maze_size = 0;
  std::uint64_t maze_seed = 0;
  std::vector<int> goal_cells;
  int trials = 0;
  double slack = 1.5;

  std::vector<int> cells;          // free cells, ascending
  std::vector<int> success;        // per cell, 0..trials
  std::vector<int> reached_goal;   // per cell: goal cell reached (modal), or -1
  std::vector<int> budget;         // per cell step budget

  int free_cell_count = 0;
  int return_positions = 0;        // cells where every trial succeeded
  double return_fraction = 0.0;
  int closest_goal_positions = 0;  // returned cells that ended at a true closest goal
  double closest_goal_fraction = 0.0;  // over returned cells (1.0 when none returned)
  std::vector<int> per_goal_returns;   // aligned with goal_cells
  double mean_success_steps = 0.0;
};

// Paper-style evaluation protocol: for every free cell run `trials`
// episodes of encode -> greedy action -> step within the slack budget. Goal
// cells count as trivially successful with zero steps.
EvalReport evaluate_policy(const Maze& maze, const CodeEncoder& encoder, PolicyNet& policy,
                           const std::vector<int>& goal_cells, int trials, double slack);

// "207.1 / 234 (88%)" with one decimal for the numerator.
std::string format_return_positions(double numerator, int denominator);

// Aggregated table over runs: mean and sample standard deviation of return
// positions plus the closest-goal column for multi-goal reports.
std::string report_table(const std::vector<EvalReport>& reports);

// Plain-text report (header lines + per-goal breakdown + totals).
void write_report_text(const std::string& path, const EvalReport& report,
                       const std::vector<std::string>& header_lines);

// Line-oriented machine-readable stats: `key<TAB>value`.
void write_stats_tsv(const std::string& path, const EvalReport& report,
                     const std::vector<std::pair<std::string, std::string>>& extra);

// Reads a stats file back into key/value pairs (used by the report verb).
std::vector<std::pair<std::string, std::string>> read_stats_tsv(const std::string& path);

}  // namespace backtrack
