#include "backtrack/backward.hpp"

#include <algorithm>
#include <cmath>

#include "backtrack/error.hpp"
#include "backtrack/io.hpp"
#include "backtrack/optim.hpp"
#include "backtrack/serialize.hpp"

namespace backtrack {
namespace {

Tensor action_onehots(const std::vector<int>& actions, int action_count) {
  Tensor t({static_cast<int>(actions.size()), action_count});
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const int a = actions[i];
    if (a < 0 || a >= action_count) throw ContractViolation("action id out of range");
    t[i * static_cast<std::size_t>(action_count) + static_cast<std::size_t>(a)] = 1.0;
  }
  return t;
}

}  // namespace

BackwardModel::BackwardModel(const BackwardModelConfig& cfg, Rng& rng) : cfg_(cfg) {
  MlpConfig net;
  net.input = cfg.latent.flat() + cfg.actions;
  net.output = cfg.latent.flat();
  net.hidden = cfg.hidden;
  net.hidden_layers = cfg.hidden_layers;
  net_ = Mlp("wm", net, rng);
}

Tape::VarId BackwardModel::logits_on_tape(Tape& tape, Tape::VarId input) {
  Tape::VarId logits = net_.forward(tape, input);
  if (!tape.value(logits).all_finite()) throw TrainingError("backward model produced non-finite logits");
  return logits;
}

LatentDistribution BackwardModel::predict_prev(const LatentCode& code, int action) {
  Tape tape;
  Tensor input({1, cfg_.latent.flat() + cfg_.actions});
  const Tensor onehot = code.onehot(cfg_.latent);
  std::copy(onehot.data(), onehot.data() + onehot.size(), input.data());
  if (action < 0 || action >= cfg_.actions) throw ContractViolation("predict_prev: bad action");
  input[static_cast<std::size_t>(cfg_.latent.flat() + action)] = 1.0;
  const Tape::VarId logits = logits_on_tape(tape, tape.constant(std::move(input)));
  const Tape::VarId rows =
      tape.softmax_rows(tape.reshape(logits, {cfg_.latent.groups, cfg_.latent.classes}));
  return LatentDistribution{cfg_.latent, tape.value(rows)};
}

std::optional<LatentCode> BackwardModel::sample_prev(const LatentCode& code, int action,
                                                     Rng& rng) const {
  // predict_prev only runs forward passes; the tape it builds is local.
  auto* self = const_cast<BackwardModel*>(this);
  return self->predict_prev(code, action).sample(rng);
}

void BackwardModel::save(const std::string& path) const { save_tensors(path, net_.named_tensors()); }

void BackwardModel::load(const std::string& path) { net_.load_tensors(load_tensors(path)); }

TabularBackwardModel::TabularBackwardModel(const Maze& maze, const OracleCodec& codec,
                                           const std::vector<EpisodeLog>& episodes)
    : codec_(&codec) {
  for (const EpisodeLog& ep : episodes) {
    for (const EpisodeStep& s : ep.steps) {
      const std::uint64_t key =
          static_cast<std::uint64_t>(s.to) * kActionCount + s.action;
      Outcome& out = table_[key];
      const int prev = s.from;
      bool found = false;
      for (std::size_t i = 0; i < out.prev_cells.size(); ++i) {
        if (out.prev_cells[i] == prev) {
          out.counts[i] += 1.0;
          found = true;
          break;
        }
      }
      if (!found) {
        out.prev_cells.push_back(prev);
        out.counts.push_back(1.0);
      }
    }
  }
  (void)maze;
}

std::optional<LatentCode> TabularBackwardModel::sample_prev(const LatentCode& code, int action,
                                                            Rng& rng) const {
  const auto cell = codec_->cell_for_code(code);
  if (!cell) return std::nullopt;
  const auto it = table_.find(static_cast<std::uint64_t>(*cell) * kActionCount +
                              static_cast<std::uint64_t>(action));
  if (it == table_.end()) return std::nullopt;
  const Outcome& out = it->second;
  const int pick = rng.weighted(out.counts);
  return codec_->code_for_cell(out.prev_cells[static_cast<std::size_t>(pick)]);
}

double TabularBackwardModel::predecessor_entropy(int cell, int action) const {
  const auto it = table_.find(static_cast<std::uint64_t>(cell) * kActionCount +
                              static_cast<std::uint64_t>(action));
  if (it == table_.end()) return 0.0;
  double total = 0.0;
  for (double c : it->second.counts) total += c;
  double h = 0.0;
  for (double c : it->second.counts) {
    const double p = c / total;
    h -= p * std::log(p);
  }
  return h;
}

int TabularBackwardModel::predecessor_count(int cell, int action) const {
  const auto it = table_.find(static_cast<std::uint64_t>(cell) * kActionCount +
                              static_cast<std::uint64_t>(action));
  return it == table_.end() ? 0 : static_cast<int>(it->second.prev_cells.size());
}

std::uint32_t RolloutArchive::intern(const LatentCode& code) {
  const auto it = index.find(code);
  if (it != index.end()) return it->second;
  const auto id = static_cast<std::uint32_t>(codes.size());
  index.emplace(code, id);
  codes.push_back(code);
  visits.push_back(0);
  return id;
}

void save_archive(const std::string& path, const RolloutArchive& archive) {
  if (archive.latent.classes > 256) throw IoError("archive format requires c <= 256");
  BinaryWriter w(path);
  w.magic("BTA1");
  w.u32(static_cast<std::uint32_t>(archive.latent.groups));
  w.u32(static_cast<std::uint32_t>(archive.latent.classes));
  w.u32(static_cast<std::uint32_t>(archive.codes.size()));
  for (const LatentCode& code : archive.codes) {
    w.bytes(code.digits.data(), code.digits.size());
  }
  w.u32(static_cast<std::uint32_t>(archive.transitions.size()));
  for (const RolloutArchive::Transition& t : archive.transitions) {
    w.u32(t.src);
    w.u8(t.action);
    w.u32(t.dst);
  }
  w.close();
}

RolloutArchive load_archive(const std::string& path) {
  BinaryReader r(path);
  r.expect_magic("BTA1");
  RolloutArchive archive;
  archive.latent.groups = static_cast<int>(r.u32());
  archive.latent.classes = static_cast<int>(r.u32());
  const std::uint32_t code_count = r.u32();
  for (std::uint32_t i = 0; i < code_count; ++i) {
    std::vector<std::uint8_t> digits(static_cast<std::size_t>(archive.latent.groups));
    r.read(digits.data(), digits.size());
    archive.intern(LatentCode(std::move(digits)));
  }
  const std::uint32_t transition_count = r.u32();
  archive.transitions.resize(transition_count);
  for (std::uint32_t i = 0; i < transition_count; ++i) {
    archive.transitions[i].src = r.u32();
    archive.transitions[i].action = r.u8();
    archive.transitions[i].dst = r.u32();
  }
  return archive;
}

RolloutArchive backward_rollouts(const PrevSampler& sampler, const LatentShape& latent,
                                 const std::vector<LatentCode>& goals, int count, int horizon,
                                 Rng& rng) {
  if (goals.empty()) throw ContractViolation("backward_rollouts: no goals");
  if (count < 1 || horizon < 1) throw ContractViolation("backward_rollouts: count and horizon must be >= 1");

  RolloutArchive archive;
  archive.latent = latent;
  for (const LatentCode& g : goals) archive.intern(g);  // seeded with visit count 0

  std::vector<double> weights;
  for (int r = 0; r < count; ++r) {
    weights.resize(archive.codes.size());
    for (std::size_t i = 0; i < weights.size(); ++i) {
      weights[i] = 1.0 / (1.0 + archive.visits[i]);
    }
    std::uint32_t cur = static_cast<std::uint32_t>(rng.weighted(weights));
    archive.visits[cur] += 1;
    for (int t = 0; t < horizon; ++t) {
      const int action = rng.uniform_int(sampler.action_count());
      const auto prev = sampler.sample_prev(archive.codes[cur], action, rng);
      if (!prev) break;
      const std::uint32_t prev_id = archive.intern(*prev);
      archive.transitions.push_back({prev_id, static_cast<std::uint8_t>(action), cur});
      archive.visits[prev_id] += 1;
      cur = prev_id;
    }
  }
  return archive;
}

Tape::VarId wm_kl_on_tape(Tape& tape, BackwardModel& model, Tape::VarId cur_onehot,
                          const std::vector<int>& actions, Tape::VarId prev_prob_rows) {
  const int batch = tape.value(cur_onehot).rows();
  if (static_cast<int>(actions.size()) != batch) {
    throw DimensionError("wm_kl_on_tape: action count does not match batch");
  }
  const LatentShape& latent = model.latent();
  const Tape::VarId act = tape.constant(action_onehots(actions, model.action_count()));
  const Tape::VarId input = tape.concat_cols(cur_onehot, act);
  const Tape::VarId logits = model.logits_on_tape(tape, input);
  const Tape::VarId pred_rows =
      tape.softmax_rows(tape.reshape(logits, {batch * latent.groups, latent.classes}));
  // KL(pred || target) summed over the g categoricals, mean over the batch.
  const Tape::VarId diff =
      tape.sub(tape.log_clamped(pred_rows), tape.log_clamped(prev_prob_rows));
  return tape.scale(tape.sum(tape.mul(pred_rows, diff)), 1.0 / batch);
}

double wm_loss(BackwardModel& model, ReprModel& encoder, const PooledObsCache& cache,
               const TransitionBatch& batch, Rng& rng, SampleMode mode) {
  if (batch.size() == 0) throw ContractViolation("wm_loss: empty batch");
  Tape tape;
  const LatentShape& latent = encoder.latent();
  const int n = static_cast<int>(batch.size());

  const Tape::VarId prev_pooled = tape.constant(cache.batch(batch.prev_cells));
  const Tape::VarId prev_logits = encoder.encoder_logits(tape, prev_pooled);
  const Tape::VarId prev_rows = tape.softmax_rows(
      tape.reshape(prev_logits, {n * latent.groups, latent.classes}));

  const Tape::VarId cur_pooled = tape.constant(cache.batch(batch.cur_cells));
  const Tape::VarId cur_logits = encoder.encoder_logits(tape, cur_pooled);
  const Tape::VarId cur_rows = tape.softmax_rows(
      tape.reshape(cur_logits, {n * latent.groups, latent.classes}));
  Tape::VarId cur_onehot_rows;
  if (mode == SampleMode::kSample) {
    cur_onehot_rows = tape.straight_through_sample(cur_rows, rng);
  } else if (mode == SampleMode::kArgmax) {
    cur_onehot_rows = tape.argmax_onehot(cur_rows);
  } else {
    cur_onehot_rows = cur_rows;
  }
  const Tape::VarId cur_onehot = tape.reshape(cur_onehot_rows, {n, latent.flat()});

  const Tape::VarId kl = wm_kl_on_tape(tape, model, cur_onehot, batch.actions, prev_rows);
  if (!std::isfinite(tape.value(kl).item())) throw TrainingError("non-finite world model loss");
  tape.backward(kl);
  return tape.value(kl).item();
}

TransitionBatch flatten_episodes(const std::vector<EpisodeLog>& episodes) {
  TransitionBatch batch;
  for (const EpisodeLog& ep : episodes) {
    for (const EpisodeStep& s : ep.steps) {
      batch.prev_cells.push_back(s.from);
      batch.actions.push_back(s.action);
      batch.cur_cells.push_back(s.to);
    }
  }
  return batch;
}

LossCurves joint_train(ReprModel& repr, BackwardModel& wm, const Maze& maze,
                       const std::vector<EpisodeLog>& episodes, const JointTrainConfig& cfg,
                       const EntropySchedule& schedule, Rng& rng) {
  if (episodes.empty()) throw ContractViolation("joint_train: no episodes");
  const TransitionBatch all = flatten_episodes(episodes);
  PooledObsCache cache(maze);

  Adam repr_opt(repr.parameters(), AdamConfig{.lr = cfg.repr_lr});
  Adam wm_opt(wm.parameters(), AdamConfig{.lr = cfg.wm_lr});

  std::vector<std::size_t> order(all.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  LossCurves curves;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(i)))]);
    }
    double epoch_total = 0.0, epoch_repr = 0.0, epoch_wm = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
      TransitionBatch mb;
      for (std::size_t k = start; k < end; ++k) {
        mb.prev_cells.push_back(all.prev_cells[order[k]]);
        mb.actions.push_back(all.actions[order[k]]);
        mb.cur_cells.push_back(all.cur_cells[order[k]]);
      }

      Tape tape;
      const Tape::VarId prev_pooled = tape.constant(cache.batch(mb.prev_cells));
      const ReprLossParts prev_parts =
          repr_loss_on_tape(tape, repr, prev_pooled, schedule, epoch, &rng, SampleMode::kSample);
      const Tape::VarId cur_pooled = tape.constant(cache.batch(mb.cur_cells));
      const ReprLossParts cur_parts =
          repr_loss_on_tape(tape, repr, cur_pooled, schedule, epoch, &rng, SampleMode::kSample);
      const Tape::VarId repr_term =
          tape.scale(tape.add(prev_parts.loss, cur_parts.loss), 0.5);
      const Tape::VarId kl =
          wm_kl_on_tape(tape, wm, cur_parts.onehot_flat, mb.actions, prev_parts.prob_rows);
      const Tape::VarId total = tape.add(repr_term, tape.scale(kl, cfg.w_wm));

      const double total_v = tape.value(total).item();
      if (!std::isfinite(total_v)) {
        throw TrainingError("joint training diverged at epoch " + std::to_string(epoch));
      }
      repr_opt.zero_grad();
      wm_opt.zero_grad();
      tape.backward(total);
      repr_opt.step();
      wm_opt.step();

      epoch_total += total_v;
      epoch_repr += tape.value(repr_term).item();
      epoch_wm += tape.value(kl).item();
      ++batches;
    }
    curves.total.push_back(epoch_total / static_cast<double>(batches));
    curves.repr.push_back(epoch_repr / static_cast<double>(batches));
    curves.wm.push_back(epoch_wm / static_cast<double>(batches));
  }
  return curves;
}

}  // namespace backtrack
