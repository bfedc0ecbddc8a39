#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "backtrack/graph.hpp"
#include "backtrack/latent.hpp"
#include "backtrack/nn.hpp"

namespace backtrack {

struct PolicyConfig {
  double c1 = 0.01;          // action entropy bonus weight
  double avoid_weight = 1.0;
  int hidden = 256;
  int hidden_layers = 2;
  double lr = 1e-3;
  int batch = 64;
  int epochs = 60;
};

enum class ActionMode { kGreedy, kSample };

// Latent-code policy head: g*c one-hot in, action logits out.
class PolicyNet {
 public:
  PolicyNet(const LatentShape& latent, int actions, const PolicyConfig& cfg, Rng& rng);

  Tensor action_probs(const LatentCode& code);
  int act(const LatentCode& code, ActionMode mode, Rng* rng = nullptr);

  Tape::VarId logits_on_tape(Tape& tape, Tape::VarId onehot_batch);
  const LatentShape& latent() const { return latent_; }
  int action_count() const { return actions_; }

  std::vector<Parameter*> parameters() { return net_.parameters(); }
  void save(const std::string& path) const;
  void load(const std::string& path);

 private:
  LatentShape latent_;
  int actions_;
  Mlp net_;
};

// Imitation loss over positive pairs plus repulsion on avoid pairs:
//   mean_w[-log pi(a|z)] - c1 * mean_w[H(pi(.|z))]
//   + avoid_weight * mean_w[log max(pi(a|z), 1/(10*actions))]
// Sample weights are provenance counts, normalized within the batch. The
// clamp inside the avoid term caps the per-sample repulsion at ln(10*actions).
Tape::VarId policy_loss_on_tape(Tape& tape, PolicyNet& net,
                                std::span<const ImitationDataset::Pair> positives,
                                std::span<const ImitationDataset::Pair> avoid,
                                const PolicyConfig& cfg);

// Standalone forward + backward; gradients land in the net's parameters.
double policy_loss(PolicyNet& net, std::span<const ImitationDataset::Pair> positives,
                   std::span<const ImitationDataset::Pair> avoid, const PolicyConfig& cfg);

// Minibatch Adam over shuffled dataset pairs. Avoid pairs ride along with
// every batch (they are few). Throws ConfigError on an empty dataset.
std::vector<double> train_policy(PolicyNet& net, const ImitationDataset& dataset,
                                 const PolicyConfig& cfg, Rng& rng);

}  // namespace backtrack
