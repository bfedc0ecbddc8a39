#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "backtrack/backward.hpp"
#include "backtrack/config.hpp"
#include "backtrack/eval.hpp"
#include "backtrack/graph.hpp"
#include "backtrack/heatmap.hpp"
#include "backtrack/maze.hpp"
#include "backtrack/policy.hpp"
#include "backtrack/repr.hpp"

namespace backtrack {

// One pipeline instance per output directory, enforced with a lock file.
class OutputLock {
 public:
  explicit OutputLock(const std::string& out_dir);
  ~OutputLock();
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  std::string path_;
};

// End-to-end orchestration. Stage artifacts are content-addressed by stage
// hash, so rerunning after an interruption loads everything already on disk
// and recomputes only what is missing.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig cfg);

  const PipelineConfig& config() const { return cfg_; }
  const StageHashes& hashes() const { return hashes_; }
  const Maze& maze() const { return maze_; }

  // CLI verbs. Each ensures its upstream stages.
  void collect();
  void train();
  void rollout();
  void graph();
  void distill();
  EvalReport eval();
  EvalReport run() { return eval(); }

  std::string episodes_path() const;
  std::string repr_path() const;
  std::string wm_path() const;
  std::string archive_path() const;
  std::string graph_text_path() const;
  std::string dataset_path() const;
  std::string dataset_avoid_path() const;
  std::string policy_path() const;
  std::string report_path() const;
  std::string stats_path() const;
  std::string heatmap_path() const;

  std::vector<int> goal_cells() const;
  std::vector<int> negative_goal_cells() const;

  // Latent codes the graph roots at; depends on the encoder in use.
  std::vector<LatentCode> goal_codes();
  std::vector<LatentCode> negative_goal_codes();

  CodeEncoder make_encoder();

 private:
  void ensure_episodes();
  void ensure_models();
  void ensure_archive();
  void ensure_graph();
  void ensure_policy();

  std::vector<int> cells_from_pairs(const std::vector<std::pair<int, int>>& coords,
                                    const char* what) const;
  LatentCode code_for_cell(int cell);

  PipelineConfig cfg_;
  StageHashes hashes_;
  Maze maze_;

  std::optional<std::vector<EpisodeLog>> episodes_;
  std::unique_ptr<ReprModel> repr_;
  std::unique_ptr<BackwardModel> wm_;
  std::unique_ptr<OracleCodec> codec_;
  std::unique_ptr<TabularBackwardModel> tabular_;
  std::optional<RolloutArchive> archive_;
  std::optional<GoalGraph> graph_;
  std::optional<SpeMap> spe_;
  std::optional<ImitationDataset> dataset_;
  std::unique_ptr<PolicyNet> policy_;
};

}  // namespace backtrack
