#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "backtrack/error.hpp"
#include "backtrack/optim.hpp"
#include "backtrack/repr.hpp"
#include "support/oracles.hpp"

using namespace backtrack;

namespace {

ReprConfig toy_config() {
  ReprConfig cfg;
  cfg.latent = LatentShape{4, 6};
  cfg.hidden = 64;
  cfg.hidden_layers = 2;
  cfg.epochs = 200;
  cfg.schedule.terminal_epoch = 200;
  return cfg;
}

}  // namespace

TEST_CASE("entropy schedule") {
  EntropySchedule s;
  s.terminal_epoch = 100;
  CHECK(s.alpha(0) == 0.0);
  CHECK(s.alpha(89) == 0.0);
  CHECK(s.alpha(90) == 5e-6);
  CHECK(s.alpha(100) == 5e-6);
  // Monotone in the training phase.
  for (int e = 0; e < 100; ++e) CHECK(s.alpha(e) <= s.alpha(e + 1));
}

TEST_CASE("pooled observation") {
  const Maze m = Maze::generate(11, 11, 3);
  const Tensor pooled = pooled_observation(m.render(m.free_cells().front()));
  CHECK(pooled.shape() == std::vector<int>{1, kPooledDim});
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    CHECK(pooled[i] >= 0.0);
    CHECK(pooled[i] <= 1.0);
  }
  // Walls are bright, floor is dark, so the pooled image is not constant.
  double mn = 1.0, mx = 0.0;
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    mn = std::min(mn, pooled[i]);
    mx = std::max(mx, pooled[i]);
  }
  CHECK(mx - mn > 0.3);
}

TEST_CASE("encode basics") {
  const Maze m = Maze::generate(11, 11, 3);
  Rng rng(1);
  ReprModel model(toy_config(), rng);
  const Observation obs = m.render(m.free_cells()[4]);

  const LatentDistribution dist = model.encode(obs);
  SUBCASE("rows sum to one") {
    for (int gi = 0; gi < dist.shape.groups; ++gi) {
      double sum = 0.0;
      for (int j = 0; j < dist.shape.classes; ++j) {
        sum += dist.probs.at(gi, j);
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
  }

  SUBCASE("zero-initialized output layer encodes uniformly") {
    ReprModel zeroed(toy_config(), rng);
    for (Parameter* p : zeroed.parameters()) {
      if (p->name == "encoder.out.weight" || p->name == "encoder.out.bias") {
        p->value.fill(0.0);
      }
    }
    const LatentDistribution uniform = zeroed.encode(obs);
    for (std::size_t i = 0; i < uniform.probs.size(); ++i) {
      CHECK(uniform.probs[i] == doctest::Approx(1.0 / uniform.shape.classes));
    }
  }

  SUBCASE("encode is deterministic") {
    const LatentDistribution again = model.encode(obs);
    CHECK(dist.probs.values() == again.probs.values());
  }
}

TEST_CASE("sampling and argmax codes") {
  SUBCASE("degenerate rows agree between sample and argmax") {
    LatentDistribution dist{LatentShape{3, 4}, Tensor({3, 4})};
    dist.probs.at(0, 1) = 1.0;
    dist.probs.at(1, 3) = 1.0;
    dist.probs.at(2, 0) = 1.0;
    Rng rng(5);
    for (int i = 0; i < 20; ++i) {
      CHECK(dist.sample(rng) == dist.argmax());
    }
  }

  SUBCASE("argmax ties resolve to the lowest index") {
    LatentDistribution dist{LatentShape{1, 3}, Tensor({1, 3}, {0.4, 0.4, 0.2})};
    CHECK(dist.argmax().digits[0] == 0);
  }

  SUBCASE("uniform rows sample every class at the expected rate") {
    const int classes = 16;
    LatentDistribution dist{LatentShape{1, classes},
                            Tensor::full({1, classes}, 1.0 / classes)};
    Rng rng(99);
    std::vector<int> counts(classes, 0);
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) counts[dist.sample(rng).digits[0]] += 1;
    for (int j = 0; j < classes; ++j) {
      const double freq = static_cast<double>(counts[j]) / draws;
      CHECK(freq >= 0.052);
      CHECK(freq <= 0.073);
    }
  }
}

TEST_CASE("decode range and code round trip helpers") {
  Rng rng(2);
  ReprModel model(toy_config(), rng);
  LatentCode code({1, 5, 0, 3});
  const Tensor recon = model.decode(code);
  CHECK(recon.shape() == std::vector<int>{1, kPooledDim});
  for (std::size_t i = 0; i < recon.size(); ++i) {
    CHECK(recon[i] > 0.0);
    CHECK(recon[i] < 1.0);
  }

  CHECK(code.to_hex() == "01050003");
  CHECK(LatentCode::from_hex(code.to_hex()) == code);
}

TEST_CASE("repr loss schedule behavior") {
  const Maze m = Maze::generate(11, 11, 3);
  Rng rng(7);
  ReprConfig cfg = toy_config();
  ReprModel model(cfg, rng);
  const Observation obs = m.render(m.free_cells()[2]);

  EntropySchedule sched = cfg.schedule;
  const Tensor pooled = pooled_observation(obs);

  auto loss_at_epoch = [&](int epoch) {
    Tape tape;
    const auto parts = repr_loss_on_tape(tape, model, tape.constant(pooled), sched, epoch,
                                         nullptr, SampleMode::kArgmax);
    return tape.value(parts.loss).item();
  };

  // Before the annealing phase the loss is pure reconstruction; afterwards
  // the entropy term adds alpha * max(mean entropy, floor). A fresh model is
  // uniform, so mean entropy is ln(c)/c per element... check the delta.
  const double early = loss_at_epoch(0);
  const double late = loss_at_epoch(199);
  const double uniform_mean_entropy = std::log(6.0) / 6.0;  // -(1/gc)*sum p log p, p=1/c
  CHECK(late - early == doctest::Approx(5e-6 * uniform_mean_entropy).epsilon(1e-6));
  CHECK_THROWS_AS(loss_at_epoch(500), ContractViolation);
}

TEST_CASE("clamped entropy term has zero gradient below the floor") {
  // Rows pushed to (near) one-hot: mean entropy < floor, so the clamp is
  // active: the term contributes alpha * floor and no gradient.
  Parameter logits("logits", Tensor({2, 3}, {40.0, 0.0, 0.0, 0.0, 40.0, 0.0}));
  Tape tape;
  const auto probs = tape.softmax_rows(tape.param(logits));
  const auto ent_sum = tape.neg(tape.sum(tape.mul(probs, tape.log_clamped(probs))));
  const auto mean_ent = tape.scale(ent_sum, 1.0 / 6.0);
  const auto term = tape.scale(tape.clamp_min(mean_ent, 0.05), 5e-6);
  CHECK(tape.value(term).item() == doctest::Approx(5e-6 * 0.05));
  tape.backward(term);
  for (std::size_t i = 0; i < logits.grad.size(); ++i) CHECK(logits.grad[i] == 0.0);
}

TEST_CASE("toy training memorizes a small maze") {
  const Maze m = Maze::generate(5, 5, 2);
  const auto& cells = m.free_cells();
  REQUIRE(cells.size() == 7);

  Rng rng(21);
  ReprConfig cfg = toy_config();
  cfg.hidden = 128;
  cfg.lr = 2e-3;
  cfg.epochs = 3000;
  cfg.schedule.terminal_epoch = 3000;
  ReprModel model(cfg, rng);
  PooledObsCache cache(m);
  const Tensor batch = cache.batch(cells);

  auto recon_loss = [&]() {
    Tape tape;
    const auto parts = repr_loss_on_tape(tape, model, tape.constant(batch), cfg.schedule, 0,
                                         nullptr, SampleMode::kArgmax);
    return tape.value(parts.loss).item();  // epoch 0: pure reconstruction
  };

  const double untrained = recon_loss();
  Adam opt(model.parameters(), AdamConfig{.lr = cfg.lr});
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Tape tape;
    const auto parts = repr_loss_on_tape(tape, model, tape.constant(batch), cfg.schedule, epoch,
                                         &rng, SampleMode::kSample);
    opt.zero_grad();
    tape.backward(parts.loss);
    opt.step();
  }
  const double trained = recon_loss();

  // Reconstruction beats the untrained baseline by far more than half.
  CHECK(trained < 0.5 * untrained);

  // Every reconstruction identifies its agent cell and codes are distinct.
  int recovered = 0;
  std::set<std::vector<std::uint8_t>> codes;
  for (int cell : cells) {
    const LatentCode code = model.encode_code(m.render(cell));
    codes.insert(code.digits);
    if (match_cell(m, cache, model.decode(code)) == cell) ++recovered;
  }
  CHECK(recovered == static_cast<int>(cells.size()));
  CHECK(codes.size() == cells.size());

  // Codes are stable after annealing: the modal sample equals the argmax.
  Rng sample_rng(77);
  int stable = 0;
  for (int cell : cells) {
    const LatentDistribution dist = model.encode(m.render(cell));
    const LatentCode mode_code = dist.argmax();
    int hits = 0;
    for (int k = 0; k < 10; ++k) {
      if (dist.sample(sample_rng) == mode_code) ++hits;
    }
    if (hits > 5) ++stable;
  }
  CHECK(stable == static_cast<int>(cells.size()));
}

TEST_CASE("repr loss gradients match finite differences on the toy model") {
  const Maze m = Maze::generate(11, 11, 3);
  Rng rng(11);
  ReprConfig cfg = toy_config();
  cfg.latent = LatentShape{2, 3};
  cfg.hidden = 16;
  cfg.hidden_layers = 1;
  ReprModel model(cfg, rng);
  // Push the model off its zero-logit saddle before checking.
  for (Parameter* p : model.parameters()) {
    for (std::size_t i = 0; i < p->value.size(); ++i) p->value[i] += 0.02 * rng.normal();
  }
  const Tensor pooled = pooled_observation(m.render(m.free_cells()[1]));
  EntropySchedule sched = cfg.schedule;

  SUBCASE("smooth surrogate path, all parameters") {
    auto loss_fn = [&]() {
      Tape tape;
      const auto parts = repr_loss_on_tape(tape, model, tape.constant(pooled), sched, 199, nullptr,
                                           SampleMode::kSoft);
      return tape.value(parts.loss).item();
    };
    for (Parameter* p : model.parameters()) p->zero_grad();
    {
      Tape tape;
      const auto parts = repr_loss_on_tape(tape, model, tape.constant(pooled), sched, 199, nullptr,
                                           SampleMode::kSoft);
      tape.backward(parts.loss);
    }
    const auto check = testsupport::check_parameter_gradients(model.parameters(), loss_fn);
    CHECK(check.max_rel_err < 1e-4);
  }
}
