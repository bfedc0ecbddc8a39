#include "backtrack/repr.hpp"

#include <cmath>

#include "backtrack/error.hpp"
#include "backtrack/serialize.hpp"

namespace backtrack {

Tensor pooled_observation(const Observation& obs) {
  static_assert(Observation::kSize % kPooledSide == 0);
  constexpr int kBlock = Observation::kSize / kPooledSide;
  // Rec.601 luma: keeps the green agent marker clearly separated from both
  // the black floor and the white walls after pooling.
  constexpr double kR = 0.299, kG = 0.587, kB = 0.114;
  Tensor out({1, kPooledDim});
  for (int py = 0; py < kPooledSide; ++py) {
    for (int px = 0; px < kPooledSide; ++px) {
      double acc = 0.0;
      for (int y = py * kBlock; y < (py + 1) * kBlock; ++y) {
        for (int x = px * kBlock; x < (px + 1) * kBlock; ++x) {
          acc += kR * obs.at(y, x, 0) + kG * obs.at(y, x, 1) + kB * obs.at(y, x, 2);
        }
      }
      out[static_cast<std::size_t>(py * kPooledSide + px)] = acc / (kBlock * kBlock);
    }
  }
  return out;
}

PooledObsCache::PooledObsCache(const Maze& maze)
    : maze_(&maze), rows_(static_cast<std::size_t>(maze.cell_count())) {}

const Tensor& PooledObsCache::row(int cell) const {
  Tensor& slot = rows_[static_cast<std::size_t>(cell)];
  if (slot.size() == 0) slot = pooled_observation(maze_->render(cell));
  return slot;
}

Tensor PooledObsCache::batch(std::span<const int> cells) const {
  Tensor out({static_cast<int>(cells.size()), kPooledDim});
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const Tensor& r = row(cells[i]);
    std::copy(r.data(), r.data() + kPooledDim, out.data() + i * kPooledDim);
  }
  return out;
}

ReprModel::ReprModel(const ReprConfig& cfg, Rng& rng) : cfg_(cfg) {
  MlpConfig enc;
  enc.input = kPooledDim;
  enc.output = cfg.latent.flat();
  enc.hidden = cfg.hidden;
  enc.hidden_layers = cfg.hidden_layers;
  // A randomly initialized head gives every observation a distinct initial
  // code distribution; starting all observations at the same uniform rows is
  // a symmetric saddle that separates very slowly under straight-through
  // gradients.
  enc.zero_init_output = false;
  encoder_ = Mlp("encoder", enc, rng);

  MlpConfig dec;
  dec.input = cfg.latent.flat();
  dec.output = kPooledDim;
  dec.hidden = cfg.hidden;
  dec.hidden_layers = cfg.hidden_layers;
  decoder_ = Mlp("decoder", dec, rng);
}

Tape::VarId ReprModel::encoder_logits(Tape& tape, Tape::VarId pooled) {
  Tape::VarId logits = encoder_.forward(tape, pooled);
  if (!tape.value(logits).all_finite()) throw TrainingError("encoder produced non-finite logits");
  return logits;
}

Tape::VarId ReprModel::decoder_logits(Tape& tape, Tape::VarId onehots) {
  return decoder_.forward(tape, onehots);
}

LatentDistribution ReprModel::encode_pooled(const Tensor& pooled_row) {
  Tape tape;
  const Tape::VarId x = tape.constant(pooled_row);
  const Tape::VarId logits = encoder_logits(tape, x);
  const Tape::VarId rows = tape.softmax_rows(
      tape.reshape(logits, {cfg_.latent.groups, cfg_.latent.classes}));
  return LatentDistribution{cfg_.latent, tape.value(rows)};
}

LatentDistribution ReprModel::encode(const Observation& obs) {
  return encode_pooled(pooled_observation(obs));
}

LatentCode ReprModel::encode_code(const Observation& obs) { return encode(obs).argmax(); }

Tensor ReprModel::decode(const LatentCode& code) {
  Tape tape;
  const Tape::VarId x = tape.constant(code.onehot(cfg_.latent));
  const Tape::VarId probs = tape.sigmoid(decoder_logits(tape, x));
  return tape.value(probs);
}

std::vector<Parameter*> ReprModel::parameters() {
  std::vector<Parameter*> out = encoder_.parameters();
  for (Parameter* p : decoder_.parameters()) out.push_back(p);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> ReprModel::named_tensors() const {
  auto out = encoder_.named_tensors();
  for (auto& nt : decoder_.named_tensors()) out.push_back(nt);
  return out;
}

void ReprModel::save(const std::string& path) const { save_tensors(path, named_tensors()); }

void ReprModel::load(const std::string& path) {
  const auto tensors = load_tensors(path);
  encoder_.load_tensors(tensors);
  decoder_.load_tensors(tensors);
}

ReprLossParts repr_loss_on_tape(Tape& tape, ReprModel& model, Tape::VarId pooled,
                                const EntropySchedule& schedule, int epoch, Rng* rng,
                                SampleMode mode) {
  if (epoch > schedule.terminal_epoch) {
    throw ContractViolation("repr_loss: epoch beyond the schedule's terminal epoch");
  }
  const LatentShape& latent = model.latent();
  const int batch = tape.value(pooled).rows();

  const Tape::VarId logits = model.encoder_logits(tape, pooled);
  const Tape::VarId rows =
      tape.reshape(logits, {batch * latent.groups, latent.classes});
  const Tape::VarId prob_rows = tape.softmax_rows(rows);

  Tape::VarId onehot_rows;
  if (mode == SampleMode::kSample) {
    if (rng == nullptr) throw ContractViolation("repr_loss: sampling requires an rng");
    onehot_rows = tape.straight_through_sample(prob_rows, *rng);
  } else if (mode == SampleMode::kArgmax) {
    onehot_rows = tape.argmax_onehot(prob_rows);
  } else {
    onehot_rows = prob_rows;  // smooth surrogate path
  }
  const Tape::VarId onehot_flat = tape.reshape(onehot_rows, {batch, latent.flat()});

  const Tape::VarId recon_logits = model.decoder_logits(tape, onehot_flat);
  const Tape::VarId recon = tape.bce_with_logits(recon_logits, pooled);

  // Mean latent entropy (1/gc) * sum of -Z log Z, clamped at the floor so the
  // push toward deterministic codes stops once entropy is low enough.
  const Tape::VarId ent_sum =
      tape.neg(tape.sum(tape.mul(prob_rows, tape.log_clamped(prob_rows))));
  const Tape::VarId mean_ent =
      tape.scale(ent_sum, 1.0 / (static_cast<double>(batch) * latent.flat()));
  const Tape::VarId ent_term =
      tape.scale(tape.clamp_min(mean_ent, schedule.entropy_floor), schedule.alpha(epoch));

  const Tape::VarId loss = tape.add(recon, ent_term);
  if (!std::isfinite(tape.value(loss).item())) throw TrainingError("non-finite representation loss");
  return ReprLossParts{loss, prob_rows, onehot_flat};
}

double repr_loss(ReprModel& model, const Observation& obs, const EntropySchedule& schedule,
                 int epoch, Rng& rng, SampleMode mode) {
  Tape tape;
  const Tape::VarId pooled = tape.constant(pooled_observation(obs));
  const ReprLossParts parts = repr_loss_on_tape(tape, model, pooled, schedule, epoch, &rng, mode);
  tape.backward(parts.loss);
  return tape.value(parts.loss).item();
}

int match_cell(const Maze& maze, const PooledObsCache& cache, const Tensor& recon) {
  int best_cell = -1;
  double best_score = std::numeric_limits<double>::infinity();
  for (int cell : maze.free_cells()) {
    const Tensor& target = cache.row(cell);
    double score = 0.0;
    for (int i = 0; i < kPooledDim; ++i) {
      const double p = std::min(std::max(recon[static_cast<std::size_t>(i)], 1e-8), 1.0 - 1e-8);
      const double t = target[static_cast<std::size_t>(i)];
      score -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
    }
    if (score < best_score) {
      best_score = score;
      best_cell = cell;
    }
  }
  return best_cell;
}

}  // namespace backtrack
