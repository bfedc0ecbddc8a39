#include "backtrack/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "backtrack/error.hpp"

namespace backtrack {
namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

long parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': cannot parse integer from '" + value + "'");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': cannot parse number from '" + value + "'");
  }
}

// Cell lists look like "1,1; 9,9".
std::vector<std::pair<int, int>> parse_cells(const std::string& key, const std::string& value) {
  std::vector<std::pair<int, int>> cells;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ';')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto comma = item.find(',');
    if (comma == std::string::npos) {
      throw ConfigError("key '" + key + "': expected 'x,y' but got '" + item + "'");
    }
    cells.emplace_back(static_cast<int>(parse_int(key, trim(item.substr(0, comma)))),
                       static_cast<int>(parse_int(key, trim(item.substr(comma + 1)))));
  }
  return cells;
}

std::string render_cells(const std::vector<std::pair<int, int>>& cells) {
  std::ostringstream os;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) os << "; ";
    os << cells[i].first << ',' << cells[i].second;
  }
  return os.str();
}

std::string render_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void apply_key(PipelineConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_int(key, value));
  else if (key == "mode") {
    if (value == "learned") cfg.mode = PipelineMode::kLearned;
    else if (value == "oracle") cfg.mode = PipelineMode::kOracle;
    else throw ConfigError("mode must be 'learned' or 'oracle', got '" + value + "'");
  }
  else if (key == "out") cfg.out_dir = value;
  else if (key == "maze.size") cfg.maze_size = static_cast<int>(parse_int(key, value));
  else if (key == "maze.seed") cfg.maze_seed = static_cast<std::uint64_t>(parse_int(key, value));
  else if (key == "data.episodes") cfg.data_episodes = static_cast<int>(parse_int(key, value));
  else if (key == "data.steps") cfg.data_steps = static_cast<int>(parse_int(key, value));
  else if (key == "latent.g") cfg.latent.groups = static_cast<int>(parse_int(key, value));
  else if (key == "latent.c") cfg.latent.classes = static_cast<int>(parse_int(key, value));
  else if (key == "repr.entropy_weight") cfg.repr_entropy_weight = parse_double(key, value);
  else if (key == "repr.entropy_floor") cfg.repr_entropy_floor = parse_double(key, value);
  else if (key == "repr.phase_fraction") cfg.repr_phase_fraction = parse_double(key, value);
  else if (key == "repr.epochs") cfg.repr_epochs = static_cast<int>(parse_int(key, value));
  else if (key == "repr.lr") cfg.repr_lr = parse_double(key, value);
  else if (key == "repr.hidden") cfg.repr_hidden = static_cast<int>(parse_int(key, value));
  else if (key == "repr.batch") cfg.repr_batch = static_cast<int>(parse_int(key, value));
  else if (key == "wm.w_wm") cfg.wm_w = parse_double(key, value);
  else if (key == "wm.rollouts") cfg.wm_rollouts = static_cast<int>(parse_int(key, value));
  else if (key == "wm.horizon") cfg.wm_horizon = static_cast<int>(parse_int(key, value));
  else if (key == "wm.hidden") cfg.wm_hidden = static_cast<int>(parse_int(key, value));
  else if (key == "wm.lr") cfg.wm_lr = parse_double(key, value);
  else if (key == "policy.c1") cfg.policy_c1 = parse_double(key, value);
  else if (key == "policy.epochs") cfg.policy_epochs = static_cast<int>(parse_int(key, value));
  else if (key == "policy.lr") cfg.policy_lr = parse_double(key, value);
  else if (key == "policy.hidden") cfg.policy_hidden = static_cast<int>(parse_int(key, value));
  else if (key == "policy.avoid_weight") cfg.policy_avoid_weight = parse_double(key, value);
  else if (key == "policy.batch") cfg.policy_batch = static_cast<int>(parse_int(key, value));
  else if (key == "goals") cfg.goals = parse_cells(key, value);
  else if (key == "negative_goals") cfg.negative_goals = parse_cells(key, value);
  else if (key == "eval.trials") cfg.eval_trials = static_cast<int>(parse_int(key, value));
  else if (key == "eval.slack") cfg.eval_slack = parse_double(key, value);
  else throw ConfigError("unknown config key '" + key + "'");
}

void validate(const PipelineConfig& cfg) {
  if (cfg.maze_size < 5 || cfg.maze_size % 2 == 0) {
    throw ConfigError("maze.size must be odd and at least 5");
  }
  if (cfg.data_episodes < 1) throw ConfigError("data.episodes must be >= 1");
  if (cfg.data_steps < 1) throw ConfigError("data.steps must be >= 1");
  if (cfg.latent.groups < 1 || cfg.latent.classes < 2) {
    throw ConfigError("latent shape needs g >= 1 and c >= 2");
  }
  if (cfg.latent.classes > 256) throw ConfigError("latent.c must be <= 256 (codes are bytes)");
  if (cfg.repr_phase_fraction <= 0.0 || cfg.repr_phase_fraction >= 1.0) {
    throw ConfigError("repr.phase_fraction must be in (0, 1)");
  }
  if (cfg.repr_entropy_weight < 0.0) throw ConfigError("repr.entropy_weight must be >= 0");
  if (cfg.wm_w <= 0.0) throw ConfigError("wm.w_wm must be > 0");
  if (cfg.wm_rollouts < 1 || cfg.wm_horizon < 1) {
    throw ConfigError("wm.rollouts and wm.horizon must be >= 1");
  }
  if (cfg.policy_c1 < 0.0) throw ConfigError("policy.c1 must be >= 0");
  if (cfg.goals.empty()) throw ConfigError("at least one goal is required");
  if (cfg.eval_trials < 1) throw ConfigError("eval.trials must be >= 1");
  if (cfg.eval_slack < 1.0) throw ConfigError("eval.slack must be >= 1");
  for (int v : {cfg.repr_epochs, cfg.repr_hidden, cfg.repr_batch, cfg.wm_hidden,
                cfg.policy_epochs, cfg.policy_hidden, cfg.policy_batch}) {
    if (v < 1) throw ConfigError("epoch/hidden/batch settings must be >= 1");
  }
}

}  // namespace

PipelineConfig parse_config_text(const std::string& text) {
  PipelineConfig cfg;
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    apply_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  validate(cfg);
  return cfg;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string canonical_config(const PipelineConfig& cfg) {
  std::ostringstream os;
  os << "data.episodes = " << cfg.data_episodes << "\n";
  os << "data.steps = " << cfg.data_steps << "\n";
  os << "eval.slack = " << render_double(cfg.eval_slack) << "\n";
  os << "eval.trials = " << cfg.eval_trials << "\n";
  os << "goals = " << render_cells(cfg.goals) << "\n";
  os << "latent.c = " << cfg.latent.classes << "\n";
  os << "latent.g = " << cfg.latent.groups << "\n";
  os << "maze.seed = " << cfg.maze_seed << "\n";
  os << "maze.size = " << cfg.maze_size << "\n";
  os << "mode = " << mode_name(cfg.mode) << "\n";
  os << "negative_goals = " << render_cells(cfg.negative_goals) << "\n";
  os << "policy.avoid_weight = " << render_double(cfg.policy_avoid_weight) << "\n";
  os << "policy.batch = " << cfg.policy_batch << "\n";
  os << "policy.c1 = " << render_double(cfg.policy_c1) << "\n";
  os << "policy.epochs = " << cfg.policy_epochs << "\n";
  os << "policy.hidden = " << cfg.policy_hidden << "\n";
  os << "policy.lr = " << render_double(cfg.policy_lr) << "\n";
  os << "repr.batch = " << cfg.repr_batch << "\n";
  os << "repr.entropy_floor = " << render_double(cfg.repr_entropy_floor) << "\n";
  os << "repr.entropy_weight = " << render_double(cfg.repr_entropy_weight) << "\n";
  os << "repr.epochs = " << cfg.repr_epochs << "\n";
  os << "repr.hidden = " << cfg.repr_hidden << "\n";
  os << "repr.lr = " << render_double(cfg.repr_lr) << "\n";
  os << "repr.phase_fraction = " << render_double(cfg.repr_phase_fraction) << "\n";
  os << "seed = " << cfg.seed << "\n";
  os << "wm.horizon = " << cfg.wm_horizon << "\n";
  os << "wm.hidden = " << cfg.wm_hidden << "\n";
  os << "wm.lr = " << render_double(cfg.wm_lr) << "\n";
  os << "wm.rollouts = " << cfg.wm_rollouts << "\n";
  os << "wm.w_wm = " << render_double(cfg.wm_w) << "\n";
  return os.str();
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

StageHashes stage_hashes(const PipelineConfig& cfg) {
  std::ostringstream collect;
  collect << "collect|" << cfg.maze_size << '|' << cfg.maze_seed << '|' << cfg.data_episodes << '|'
          << cfg.data_steps << '|' << cfg.seed;
  StageHashes h;
  h.collect = hash_hex(fnv1a64(collect.str()));

  std::ostringstream train;
  train << "train|" << h.collect << '|' << mode_name(cfg.mode) << '|' << cfg.latent.groups << 'x'
        << cfg.latent.classes << '|' << render_double(cfg.repr_entropy_weight) << '|'
        << render_double(cfg.repr_entropy_floor) << '|' << render_double(cfg.repr_phase_fraction)
        << '|' << cfg.repr_epochs << '|' << render_double(cfg.repr_lr) << '|' << cfg.repr_hidden
        << '|' << cfg.repr_batch << '|' << render_double(cfg.wm_w) << '|' << cfg.wm_hidden << '|'
        << render_double(cfg.wm_lr);
  h.train = hash_hex(fnv1a64(train.str()));

  std::ostringstream rollout;
  rollout << "rollout|" << h.train << '|' << cfg.wm_rollouts << '|' << cfg.wm_horizon << '|'
          << render_cells(cfg.goals) << '|' << render_cells(cfg.negative_goals);
  h.rollout = hash_hex(fnv1a64(rollout.str()));

  h.graph = hash_hex(fnv1a64("graph|" + h.rollout));

  std::ostringstream distill;
  distill << "distill|" << h.graph << '|' << render_double(cfg.policy_c1) << '|'
          << cfg.policy_epochs << '|' << render_double(cfg.policy_lr) << '|' << cfg.policy_hidden
          << '|' << render_double(cfg.policy_avoid_weight) << '|' << cfg.policy_batch;
  h.distill = hash_hex(fnv1a64(distill.str()));

  std::ostringstream eval;
  eval << "eval|" << h.distill << '|' << cfg.eval_trials << '|' << render_double(cfg.eval_slack);
  h.eval = hash_hex(fnv1a64(eval.str()));
  return h;
}

const char* mode_name(PipelineMode mode) {
  return mode == PipelineMode::kLearned ? "learned" : "oracle";
}

}  // namespace backtrack
