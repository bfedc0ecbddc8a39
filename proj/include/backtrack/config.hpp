#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "backtrack/latent.hpp"

namespace backtrack {

enum class PipelineMode { kLearned, kOracle };

// Full pipeline configuration. File format: flat UTF-8 `key = value` lines
// with `#` comments; dotted keys group stages. Unknown keys are errors so
// typos never silently fall back to defaults.
struct PipelineConfig {
  std::uint64_t seed = 1;
  PipelineMode mode = PipelineMode::kLearned;
  std::string out_dir = "out";

  int maze_size = 11;
  std::uint64_t maze_seed = 7;

  int data_episodes = 300;
  int data_steps = 20;

  LatentShape latent;  // 16 x 16

  double repr_entropy_weight = 5e-6;
  double repr_entropy_floor = 0.05;
  double repr_phase_fraction = 0.9;
  int repr_epochs = 60;
  double repr_lr = 1e-3;
  int repr_hidden = 256;
  int repr_batch = 64;

  double wm_w = 0.0025;
  int wm_rollouts = 2000;
  int wm_horizon = 50;
  int wm_hidden = 256;
  double wm_lr = 1e-3;

  double policy_c1 = 0.01;
  int policy_epochs = 200;
  double policy_lr = 3e-3;
  int policy_hidden = 256;
  double policy_avoid_weight = 1.0;
  int policy_batch = 64;

  std::vector<std::pair<int, int>> goals = {{1, 1}};  // cell coordinates (x, y)
  std::vector<std::pair<int, int>> negative_goals;

  int eval_trials = 5;
  double eval_slack = 1.5;
};

PipelineConfig parse_config_text(const std::string& text);
PipelineConfig load_config(const std::string& path);

// Canonical `key = value` rendering with sorted keys; the hashing and report
// echo both use it so identical configs always collide.
std::string canonical_config(const PipelineConfig& cfg);

std::uint64_t fnv1a64(const std::string& text);
std::string hash_hex(std::uint64_t h);

// Per-stage content hashes. Each stage hashes its own inputs plus the hash
// of the stage it consumes, so editing a late-stage key never invalidates
// early artifacts.
struct StageHashes {
  std::string collect;
  std::string train;
  std::string rollout;
  std::string graph;
  std::string distill;
  std::string eval;
};

StageHashes stage_hashes(const PipelineConfig& cfg);

const char* mode_name(PipelineMode mode);

}  // namespace backtrack
