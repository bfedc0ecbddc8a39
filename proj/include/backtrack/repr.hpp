#pragma once

#include <span>
#include <string>
#include <vector>

#include "backtrack/autodiff.hpp"
#include "backtrack/latent.hpp"
#include "backtrack/maze.hpp"
#include "backtrack/nn.hpp"

namespace backtrack {

// Observations are projected to a 16x16 mean-pooled grayscale grid before the
// encoder; the decoder reconstructs the same grid.
inline constexpr int kPooledSide = 16;
inline constexpr int kPooledDim = kPooledSide * kPooledSide;

Tensor pooled_observation(const Observation& obs);  // [1 x kPooledDim], values in [0, 1]

// Lazily renders and pools one row per agent cell; observations of a fixed
// maze only differ by the agent marker, so the cache is small.
class PooledObsCache {
 public:
  explicit PooledObsCache(const Maze& maze);
  const Tensor& row(int cell) const;
  Tensor batch(std::span<const int> cells) const;  // [B x kPooledDim]

 private:
  const Maze* maze_;
  mutable std::vector<Tensor> rows_;
};

// Annealed weight for the latent entropy term: zero for the first
// phase_fraction of training, late_weight afterwards.
struct EntropySchedule {
  int terminal_epoch = 30;     // e_T
  double late_weight = 5e-6;   // alpha once annealing starts
  double phase_fraction = 0.9;
  double entropy_floor = 0.05;

  double alpha(int epoch) const {
    return (static_cast<double>(epoch) < phase_fraction * terminal_epoch) ? 0.0 : late_weight;
  }
};

struct ReprConfig {
  LatentShape latent;
  int hidden = 256;
  int hidden_layers = 2;
  double lr = 1e-3;
  int batch = 64;
  int epochs = 30;
  EntropySchedule schedule;  // terminal_epoch kept in sync with epochs
};

// kSample draws one-hots (training), kArgmax takes deterministic one-hots,
// kSoft skips discretization and feeds probabilities through. Finite
// difference checks use kSoft: the straight-through surrogate is exact there,
// while FD through a frozen one-hot would measure zero by construction.
enum class SampleMode { kSample, kArgmax, kSoft };

// Categorical-latent encoder/decoder pair with straight-through sampling.
class ReprModel {
 public:
  ReprModel(const ReprConfig& cfg, Rng& rng);

  const LatentShape& latent() const { return cfg_.latent; }
  const ReprConfig& config() const { return cfg_; }

  // Deterministic; all stochasticity lives in code sampling.
  LatentDistribution encode(const Observation& obs);
  LatentDistribution encode_pooled(const Tensor& pooled_row);
  LatentCode encode_code(const Observation& obs);  // argmax code

  // Reconstruction probabilities in (0, 1), shape [1 x kPooledDim].
  Tensor decode(const LatentCode& code);

  // Tape-level pieces shared by standalone and joint training.
  Tape::VarId encoder_logits(Tape& tape, Tape::VarId pooled);   // [B x flat]
  Tape::VarId decoder_logits(Tape& tape, Tape::VarId onehots);  // [B x kPooledDim]

  std::vector<Parameter*> parameters();
  std::vector<std::pair<std::string, const Tensor*>> named_tensors() const;
  void save(const std::string& path) const;
  void load(const std::string& path);

 private:
  ReprConfig cfg_;
  Mlp encoder_;
  Mlp decoder_;
};

struct ReprLossParts {
  Tape::VarId loss;        // scalar: reconstruction + annealed entropy term
  Tape::VarId prob_rows;   // [B*g x c] encoder softmax rows
  Tape::VarId onehot_flat; // [B x g*c] straight-through one-hots
};

// Builds the representation loss on an existing tape. `pooled` is a constant
// [B x kPooledDim] batch; it is both encoder input and reconstruction target.
ReprLossParts repr_loss_on_tape(Tape& tape, ReprModel& model, Tape::VarId pooled,
                                const EntropySchedule& schedule, int epoch, Rng* rng,
                                SampleMode mode);

// Convenience wrapper: forward + backward for one observation; gradients are
// accumulated into the model parameters. Returns the loss value.
double repr_loss(ReprModel& model, const Observation& obs, const EntropySchedule& schedule,
                 int epoch, Rng& rng, SampleMode mode = SampleMode::kSample);

// Index of the free cell whose pooled rendering best explains `recon`
// (lowest cross entropy). Used to check that reconstructions identify the
// agent position.
int match_cell(const Maze& maze, const PooledObsCache& cache, const Tensor& recon);

}  // namespace backtrack
