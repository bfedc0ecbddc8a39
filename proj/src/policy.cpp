#include "backtrack/policy.hpp"

#include <algorithm>
#include <cmath>

#include "backtrack/error.hpp"
#include "backtrack/optim.hpp"
#include "backtrack/serialize.hpp"

namespace backtrack {
namespace {

Tensor onehot_batch(std::span<const ImitationDataset::Pair> pairs, const LatentShape& latent) {
  Tensor t({static_cast<int>(pairs.size()), latent.flat()});
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const LatentCode& code = pairs[i].code;
    if (code.size() != latent.groups) throw DimensionError("policy batch: code length mismatch");
    for (int gi = 0; gi < latent.groups; ++gi) {
      t[i * static_cast<std::size_t>(latent.flat()) +
        static_cast<std::size_t>(gi * latent.classes + code.digits[static_cast<std::size_t>(gi)])] = 1.0;
    }
  }
  return t;
}

Tensor normalized_weights(std::span<const ImitationDataset::Pair> pairs) {
  Tensor w({static_cast<int>(pairs.size())});
  double total = 0.0;
  for (const auto& p : pairs) total += p.count;
  for (std::size_t i = 0; i < pairs.size(); ++i) w[i] = pairs[i].count / total;
  return w;
}

}  // namespace

PolicyNet::PolicyNet(const LatentShape& latent, int actions, const PolicyConfig& cfg, Rng& rng)
    : latent_(latent), actions_(actions) {
  MlpConfig net;
  net.input = latent.flat();
  net.output = actions;
  net.hidden = cfg.hidden;
  net.hidden_layers = cfg.hidden_layers;
  net_ = Mlp("policy", net, rng);
}

Tape::VarId PolicyNet::logits_on_tape(Tape& tape, Tape::VarId onehot_batch) {
  return net_.forward(tape, onehot_batch);
}

Tensor PolicyNet::action_probs(const LatentCode& code) {
  Tape tape;
  const Tape::VarId logits = logits_on_tape(tape, tape.constant(code.onehot(latent_)));
  return tape.value(tape.softmax_rows(logits));
}

int PolicyNet::act(const LatentCode& code, ActionMode mode, Rng* rng) {
  const Tensor probs = action_probs(code);
  if (mode == ActionMode::kGreedy) {
    int best = 0;
    for (int a = 1; a < actions_; ++a) {
      if (probs[static_cast<std::size_t>(a)] > probs[static_cast<std::size_t>(best)]) best = a;
    }
    return best;
  }
  if (rng == nullptr) throw ContractViolation("act: sampling requires an rng");
  return rng->categorical(std::span<const double>(probs.data(), static_cast<std::size_t>(actions_)));
}

void PolicyNet::save(const std::string& path) const { save_tensors(path, net_.named_tensors()); }

void PolicyNet::load(const std::string& path) { net_.load_tensors(load_tensors(path)); }

Tape::VarId policy_loss_on_tape(Tape& tape, PolicyNet& net,
                                std::span<const ImitationDataset::Pair> positives,
                                std::span<const ImitationDataset::Pair> avoid,
                                const PolicyConfig& cfg) {
  if (positives.empty()) throw ContractViolation("policy_loss: empty positive batch");
  const LatentShape& latent = net.latent();

  const Tape::VarId x = tape.constant(onehot_batch(positives, latent));
  const Tape::VarId probs = tape.softmax_rows(net.logits_on_tape(tape, x));
  const Tape::VarId logp = tape.log_clamped(probs);

  std::vector<int> actions(positives.size());
  for (std::size_t i = 0; i < positives.size(); ++i) actions[i] = positives[i].action;
  const Tape::VarId weights = tape.constant(normalized_weights(positives));

  const Tape::VarId nll =
      tape.neg(tape.sum(tape.mul(tape.gather_rows(logp, std::move(actions)), weights)));
  // Weighted sum of p log p rows equals minus the weighted mean entropy, so
  // adding c1 * that term maximizes entropy.
  const Tape::VarId neg_entropy =
      tape.sum(tape.mul_colvec(tape.mul(probs, logp), weights));
  Tape::VarId loss = tape.add(nll, tape.scale(neg_entropy, cfg.c1));

  if (!avoid.empty()) {
    const double cap = 1.0 / (10.0 * net.action_count());
    const Tape::VarId xa = tape.constant(onehot_batch(avoid, latent));
    const Tape::VarId probs_a = tape.softmax_rows(net.logits_on_tape(tape, xa));
    std::vector<int> avoid_actions(avoid.size());
    for (std::size_t i = 0; i < avoid.size(); ++i) avoid_actions[i] = avoid[i].action;
    const Tape::VarId picked =
        tape.clamp_min(tape.gather_rows(probs_a, std::move(avoid_actions)), cap);
    const Tape::VarId wa = tape.constant(normalized_weights(avoid));
    const Tape::VarId repel = tape.sum(tape.mul(tape.log_clamped(picked), wa));
    loss = tape.add(loss, tape.scale(repel, cfg.avoid_weight));
  }
  if (!std::isfinite(tape.value(loss).item())) throw TrainingError("non-finite policy loss");
  return loss;
}

double policy_loss(PolicyNet& net, std::span<const ImitationDataset::Pair> positives,
                   std::span<const ImitationDataset::Pair> avoid, const PolicyConfig& cfg) {
  Tape tape;
  const Tape::VarId loss = policy_loss_on_tape(tape, net, positives, avoid, cfg);
  tape.backward(loss);
  return tape.value(loss).item();
}

std::vector<double> train_policy(PolicyNet& net, const ImitationDataset& dataset,
                                 const PolicyConfig& cfg, Rng& rng) {
  if (dataset.pairs.empty()) {
    throw ConfigError("no transitions passed the SPE filter; cannot train a policy");
  }
  Adam opt(net.parameters(), AdamConfig{.lr = cfg.lr});
  std::vector<std::size_t> order(dataset.pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<double> epoch_losses;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(i)))]);
    }
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
      std::vector<ImitationDataset::Pair> batch;
      batch.reserve(end - start);
      for (std::size_t k = start; k < end; ++k) batch.push_back(dataset.pairs[order[k]]);

      opt.zero_grad();
      total += policy_loss(net, batch, dataset.avoid, cfg);
      opt.step();
      ++batches;
    }
    epoch_losses.push_back(total / static_cast<double>(batches));
  }
  return epoch_losses;
}

}  // namespace backtrack
