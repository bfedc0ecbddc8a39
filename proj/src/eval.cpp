#include "backtrack/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "backtrack/error.hpp"

namespace backtrack {

EvalReport evaluate_policy(const Maze& maze, const CodeEncoder& encoder, PolicyNet& policy,
                           const std::vector<int>& goal_cells, int trials, double slack) {
  if (goal_cells.empty()) throw ContractViolation("evaluate_policy: no goals");
  if (trials < 1) throw ContractViolation("evaluate_policy: trials must be >= 1");
  if (slack < 1.0) throw ContractViolation("evaluate_policy: slack must be >= 1");

  EvalReport report;
  report.maze_size = maze.width();
  report.maze_seed = maze.seed();
  report.goal_cells = goal_cells;
  report.trials = trials;
  report.slack = slack;
  report.per_goal_returns.assign(goal_cells.size(), 0);

  const std::vector<int> dist = maze.distances_to(goal_cells);
  // Distances per goal decide which goals count as "closest" from a cell.
  std::vector<std::vector<int>> per_goal_dist;
  per_goal_dist.reserve(goal_cells.size());
  for (int g : goal_cells) per_goal_dist.push_back(maze.distances_to({g}));

  auto is_goal = [&](int cell) {
    return std::find(goal_cells.begin(), goal_cells.end(), cell) != goal_cells.end();
  };

  long long success_steps_total = 0;
  long long success_episodes = 0;

  for (int cell : maze.free_cells()) {
    const int d = dist[static_cast<std::size_t>(cell)];
    const int step_budget = static_cast<int>(std::ceil(slack * d));
    report.cells.push_back(cell);
    report.budget.push_back(step_budget);

    int successes = 0;
    int reached = -1;
    for (int trial = 0; trial < trials; ++trial) {
      int pos = cell;
      int steps = 0;
      bool ok = is_goal(pos);
      while (!ok && steps < step_budget) {
        const LatentCode code = encoder(maze.render(pos));
        const int action = policy.act(code, ActionMode::kGreedy);
        pos = maze.step(pos, action);
        ++steps;
        ok = is_goal(pos);
      }
      if (ok) {
        ++successes;
        reached = pos;
        success_steps_total += steps;
        ++success_episodes;
      }
    }
    report.success.push_back(successes);
    report.reached_goal.push_back(successes > 0 ? reached : -1);

    if (successes == trials) {
      report.return_positions += 1;
      const auto goal_it = std::find(goal_cells.begin(), goal_cells.end(), reached);
      const auto goal_idx = static_cast<std::size_t>(goal_it - goal_cells.begin());
      report.per_goal_returns[goal_idx] += 1;
      // Ties count as closest.
      if (per_goal_dist[goal_idx][static_cast<std::size_t>(cell)] == d) {
        report.closest_goal_positions += 1;
      }
    }
  }

  report.free_cell_count = static_cast<int>(report.cells.size());
  report.return_fraction =
      static_cast<double>(report.return_positions) / static_cast<double>(report.free_cell_count);
  report.closest_goal_fraction =
      report.return_positions == 0
          ? 1.0
          : static_cast<double>(report.closest_goal_positions) / report.return_positions;
  report.mean_success_steps =
      success_episodes == 0 ? 0.0
                            : static_cast<double>(success_steps_total) / static_cast<double>(success_episodes);
  return report;
}

std::string format_return_positions(double numerator, int denominator) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(1);
  os << numerator << " / " << denominator;
  const int pct = static_cast<int>(std::lround(100.0 * numerator / denominator));
  os << " (" << pct << "%)";
  return os.str();
}

std::string report_table(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw ContractViolation("report_table: no reports");
  const EvalReport& first = reports.front();

  double sum_ret = 0.0, sum_ret_sq = 0.0;
  double sum_closest = 0.0;
  for (const EvalReport& r : reports) {
    sum_ret += r.return_positions;
    sum_ret_sq += static_cast<double>(r.return_positions) * r.return_positions;
    sum_closest += r.closest_goal_positions;
  }
  const double n = static_cast<double>(reports.size());
  const double mean_ret = sum_ret / n;
  const double var_ret = n > 1 ? std::max(0.0, (sum_ret_sq - n * mean_ret * mean_ret) / (n - 1)) : 0.0;
  const double mean_closest = sum_closest / n;

  std::ostringstream os;
  os.setf(std::ios::fixed);
  os << "runs  maze    goals  return positions";
  const bool multi = first.goal_cells.size() > 1;
  if (multi) os << "          went to closest goal";
  os << "\n";
  os << reports.size() << "     " << first.maze_size << "x" << first.maze_size << "   "
     << first.goal_cells.size() << "      " << format_return_positions(mean_ret, first.free_cell_count);
  if (reports.size() > 1) {
    os.precision(1);
    os << " s=" << std::sqrt(var_ret);
  }
  if (multi) {
    os << "   ";
    if (mean_ret > 0.0) {
      std::ostringstream cg;
      cg.setf(std::ios::fixed);
      cg.precision(1);
      cg << mean_closest << " / " << mean_ret << " ("
         << static_cast<int>(std::lround(100.0 * mean_closest / mean_ret)) << "%)";
      os << cg.str();
    } else {
      os << "-";
    }
  }
  os << "\n";
  return os.str();
}

void write_report_text(const std::string& path, const EvalReport& report,
                       const std::vector<std::string>& header_lines) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  for (const std::string& line : header_lines) out << "# " << line << "\n";
  out << "maze: " << report.maze_size << "x" << report.maze_size << " seed " << report.maze_seed
      << "\n";
  out << "goals:";
  for (int g : report.goal_cells) out << " (" << g % report.maze_size << "," << g / report.maze_size << ")";
  out << "\n";
  out << "trials per cell: " << report.trials << ", slack: " << report.slack << "\n";
  out << "return positions: "
      << format_return_positions(report.return_positions, report.free_cell_count) << "\n";
  if (report.goal_cells.size() > 1) {
    std::ostringstream cg;
    cg.setf(std::ios::fixed);
    cg.precision(1);
    if (report.return_positions > 0) {
      cg << static_cast<double>(report.closest_goal_positions) << " / "
         << static_cast<double>(report.return_positions) << " ("
         << static_cast<int>(std::lround(100.0 * report.closest_goal_positions /
                                         report.return_positions))
         << "%)";
    } else {
      cg << "-";
    }
    out << "went to closest goal: " << cg.str() << "\n";
    for (std::size_t i = 0; i < report.goal_cells.size(); ++i) {
      const int g = report.goal_cells[i];
      out << "  goal (" << g % report.maze_size << "," << g / report.maze_size
          << "): " << report.per_goal_returns[i] << " positions\n";
    }
  }
  out.setf(std::ios::fixed);
  out.precision(2);
  out << "mean successful episode length: " << report.mean_success_steps << "\n";
  out << "per-cell successes:\n";
  for (std::size_t i = 0; i < report.cells.size(); ++i) {
    const int c = report.cells[i];
    out << "  (" << c % report.maze_size << "," << c / report.maze_size << ") "
        << report.success[i] << "/" << report.trials << " budget " << report.budget[i] << "\n";
  }
  if (!out) throw IoError("write to '" + path + "' failed");
}

void write_stats_tsv(const std::string& path, const EvalReport& report,
                     const std::vector<std::pair<std::string, std::string>>& extra) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.setf(std::ios::fixed);
  out.precision(6);
  out << "maze_size\t" << report.maze_size << "\n";
  out << "maze_seed\t" << report.maze_seed << "\n";
  out << "goal_count\t" << report.goal_cells.size() << "\n";
  out << "free_cells\t" << report.free_cell_count << "\n";
  out << "trials\t" << report.trials << "\n";
  out << "slack\t" << report.slack << "\n";
  out << "return_positions\t" << report.return_positions << "\n";
  out << "return_fraction\t" << report.return_fraction << "\n";
  out << "closest_goal_positions\t" << report.closest_goal_positions << "\n";
  out << "closest_goal_fraction\t" << report.closest_goal_fraction << "\n";
  out << "mean_success_steps\t" << report.mean_success_steps << "\n";
  for (const auto& [k, v] : extra) out << k << '\t' << v << "\n";
  if (!out) throw IoError("write to '" + path + "' failed");
}

std::vector<std::pair<std::string, std::string>> read_stats_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open stats file '" + path + "'");
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw IoError("stats file '" + path + "': missing tab in line");
    out.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return out;
}

}  // namespace backtrack
