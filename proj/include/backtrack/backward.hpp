#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "backtrack/latent.hpp"
#include "backtrack/maze.hpp"
#include "backtrack/repr.hpp"

namespace backtrack {

// Anything that can propose a predecessor code for (code, action). The
// neural model always answers; the tabular oracle may decline when the pair
// never occurred in the data, which ends the rollout early.
class PrevSampler {
 public:
  virtual ~PrevSampler() = default;
  virtual std::optional<LatentCode> sample_prev(const LatentCode& code, int action, Rng& rng) const = 0;
  virtual int action_count() const = 0;
};

struct BackwardModelConfig {
  LatentShape latent;
  int actions = kActionCount;
  int hidden = 256;
  int hidden_layers = 2;
};

// Backward latent dynamics: (z_t, a_{t-1}) -> distribution over z_{t-1},
// where a_{t-1} is the action that produced z_t.
class BackwardModel : public PrevSampler {
 public:
  BackwardModel(const BackwardModelConfig& cfg, Rng& rng);

  LatentDistribution predict_prev(const LatentCode& code, int action);
  std::optional<LatentCode> sample_prev(const LatentCode& code, int action, Rng& rng) const override;
  int action_count() const override { return cfg_.actions; }
  const LatentShape& latent() const { return cfg_.latent; }

  Tape::VarId logits_on_tape(Tape& tape, Tape::VarId input);  // [B x (g*c + actions)] -> [B x g*c]

  std::vector<Parameter*> parameters() { return net_.parameters(); }
  void save(const std::string& path) const;
  void load(const std::string& path);

 private:
  BackwardModelConfig cfg_;
  Mlp net_;
};

// Count-based inversion of logged forward transitions; the brute-force
// oracle for the rollout/graph/policy stages. P(prev | cur, action) is the
// empirical distribution of logged (prev, action, cur) triples.
class TabularBackwardModel : public PrevSampler {
 public:
  TabularBackwardModel(const Maze& maze, const OracleCodec& codec,
                       const std::vector<EpisodeLog>& episodes);

  std::optional<LatentCode> sample_prev(const LatentCode& code, int action, Rng& rng) const override;
  int action_count() const override { return kActionCount; }

  // Shannon entropy (nats) of the empirical predecessor distribution.
  double predecessor_entropy(int cell, int action) const;
  int predecessor_count(int cell, int action) const;

 private:
  struct Outcome {
    std::vector<int> prev_cells;
    std::vector<double> counts;
  };

  const OracleCodec* codec_;
  std::unordered_map<std::uint64_t, Outcome> table_;  // key = cell * kActionCount + action
};

// Visit-counted union of all backward rollouts. Transitions are stored in
// FORWARD orientation: step(src, action) landed on dst.
struct RolloutArchive {
  struct Transition {
    std::uint32_t src;
    std::uint8_t action;
    std::uint32_t dst;
  };

  LatentShape latent;
  std::vector<LatentCode> codes;  // dense index, insertion order
  std::unordered_map<LatentCode, std::uint32_t, LatentCodeHash> index;
  std::vector<std::uint32_t> visits;
  std::vector<Transition> transitions;

  std::uint32_t intern(const LatentCode& code);
  bool contains(const LatentCode& code) const { return index.contains(code); }
};

void save_archive(const std::string& path, const RolloutArchive& archive);
RolloutArchive load_archive(const std::string& path);

// Go-Explore style backward rollouts: each rollout restarts from an archived
// code drawn with weight 1/(visits+1), walks `horizon` steps into the past
// under uniform random actions, and records every transition.
RolloutArchive backward_rollouts(const PrevSampler& sampler, const LatentShape& latent,
                                 const std::vector<LatentCode>& goals, int count, int horizon,
                                 Rng& rng);

struct TransitionBatch {
  std::vector<int> prev_cells;
  std::vector<int> actions;
  std::vector<int> cur_cells;

  std::size_t size() const { return actions.size(); }
};

// KL between the world model's prediction and the encoder's distribution for
// the previous observation, built on an existing tape. `cur_onehot` carries
// straight-through gradients back into the encoder.
Tape::VarId wm_kl_on_tape(Tape& tape, BackwardModel& model, Tape::VarId cur_onehot,
                          const std::vector<int>& actions, Tape::VarId prev_prob_rows);

// Standalone world-model loss over a transition batch: forward + backward,
// gradients into both the world model and the encoder. Returns the loss.
double wm_loss(BackwardModel& model, ReprModel& encoder, const PooledObsCache& cache,
               const TransitionBatch& batch, Rng& rng, SampleMode mode = SampleMode::kSample);

struct JointTrainConfig {
  double w_wm = 0.0025;
  int epochs = 30;
  int batch = 64;
  double repr_lr = 1e-3;
  double wm_lr = 1e-3;
};

struct LossCurves {
  std::vector<double> total;  // per-epoch means
  std::vector<double> repr;
  std::vector<double> wm;
};

// Minimizes L_repr + w_wm * L_wm jointly over shuffled transition
// minibatches. The entropy schedule's terminal epoch is cfg.epochs.
LossCurves joint_train(ReprModel& repr, BackwardModel& wm, const Maze& maze,
                       const std::vector<EpisodeLog>& episodes, const JointTrainConfig& cfg,
                       const EntropySchedule& schedule, Rng& rng);

TransitionBatch flatten_episodes(const std::vector<EpisodeLog>& episodes);

}  // namespace backtrack
