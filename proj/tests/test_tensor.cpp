#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "backtrack/autodiff.hpp"
#include "backtrack/error.hpp"
#include "backtrack/optim.hpp"
#include "backtrack/rng.hpp"
#include "backtrack/serialize.hpp"
#include "support/oracles.hpp"

using namespace backtrack;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -2.0, double hi = 2.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = lo + (hi - lo) * rng.uniform();
  return t;
}

}  // namespace

TEST_CASE("matmul identity and hand arithmetic") {
  Tape tape;
  const auto eye = tape.constant(Tensor({2, 2}, {1, 0, 0, 1}));
  const auto b = tape.constant(Tensor({2, 2}, {5, 6, 7, 8}));
  const auto prod = tape.matmul(eye, b);
  CHECK(tape.value(prod).values() == std::vector<double>{5, 6, 7, 8});

  const auto row = tape.constant(Tensor({1, 2}, {1, 2}));
  const auto col = tape.constant(Tensor({2, 1}, {3, 4}));
  CHECK(tape.value(tape.matmul(row, col)).item() == doctest::Approx(11.0));

  CHECK_THROWS_AS(tape.matmul(col, b), DimensionError);
}

TEST_CASE("matmul gradients match finite differences") {
  Rng rng(11);
  Parameter a("a", random_tensor({3, 4}, rng));
  Parameter b("b", random_tensor({4, 2}, rng));
  const Tensor w = random_tensor({3, 2}, rng);

  auto loss_fn = [&]() {
    Tape tape;
    const auto prod = tape.matmul(tape.param(a), tape.param(b));
    return tape.value(tape.sum(tape.mul(prod, tape.constant(w)))).item();
  };
  {
    Tape tape;
    const auto prod = tape.matmul(tape.param(a), tape.param(b));
    tape.backward(tape.sum(tape.mul(prod, tape.constant(w))));
  }
  const auto check = testsupport::check_parameter_gradients({&a, &b}, loss_fn);
  CHECK(check.checked == 20);
  CHECK(check.max_rel_err < 1e-6);
}

TEST_CASE("silu values") {
  Tape tape;
  const auto x = tape.constant(Tensor({4}, {0.0, 1.0, 30.0, -30.0}));
  const Tensor y = tape.value(tape.silu(x));
  CHECK(y[0] == doctest::Approx(0.0));
  CHECK(y[1] == doctest::Approx(0.7310585786300049));
  CHECK(y[2] == doctest::Approx(30.0).epsilon(1e-9));
  CHECK(std::abs(y[3]) < 1e-10);
}

TEST_CASE("layer_norm values") {
  Tape tape;
  const auto gain = tape.constant(Tensor::full({2}, 1.0));
  const auto bias = tape.constant(Tensor::zeros({2}));

  const auto constant_row = tape.constant(Tensor({1, 2}, {3.0, 3.0}));
  const Tensor zeros = tape.value(tape.layer_norm(constant_row, gain, bias));
  CHECK(zeros[0] == doctest::Approx(0.0));
  CHECK(zeros[1] == doctest::Approx(0.0));

  const auto row = tape.constant(Tensor({1, 2}, {1.0, 3.0}));
  const Tensor out = tape.value(tape.layer_norm(row, gain, bias));
  CHECK(out[0] == doctest::Approx(-1.0).epsilon(1e-4));
  CHECK(out[1] == doctest::Approx(1.0).epsilon(1e-4));

  const auto empty = tape.constant(Tensor({1, 0}));
  CHECK_THROWS_AS(tape.layer_norm(empty, tape.constant(Tensor({0})), tape.constant(Tensor({0}))),
                  DimensionError);
}

TEST_CASE("layer_norm gradients match finite differences") {
  Rng rng(5);
  Parameter x("x", random_tensor({3, 5}, rng));
  Parameter gain("gain", random_tensor({5}, rng, 0.5, 1.5));
  Parameter bias("bias", random_tensor({5}, rng, -0.5, 0.5));
  const Tensor w = random_tensor({3, 5}, rng);

  auto loss_fn = [&]() {
    Tape tape;
    const auto ln = tape.layer_norm(tape.param(x), tape.param(gain), tape.param(bias));
    return tape.value(tape.sum(tape.mul(ln, tape.constant(w)))).item();
  };
  {
    Tape tape;
    const auto ln = tape.layer_norm(tape.param(x), tape.param(gain), tape.param(bias));
    tape.backward(tape.sum(tape.mul(ln, tape.constant(w))));
  }
  CHECK(testsupport::check_parameter_gradients({&x, &gain, &bias}, loss_fn).max_rel_err < 1e-5);
}

TEST_CASE("softmax rows") {
  Tape tape;
  const auto x = tape.constant(
      Tensor({3, 3}, {0, 0, 0, 1000, 0, 0, std::log(1.0), std::log(2.0), std::log(3.0)}));
  const Tensor y = tape.value(tape.softmax_rows(x));
  CHECK(y.at(0, 0) == doctest::Approx(1.0 / 3));
  CHECK(y.at(1, 0) == doctest::Approx(1.0));
  CHECK(y.at(1, 1) == doctest::Approx(0.0));
  CHECK(y.at(2, 0) == doctest::Approx(1.0 / 6));
  CHECK(y.at(2, 1) == doctest::Approx(2.0 / 6));
  CHECK(y.at(2, 2) == doctest::Approx(3.0 / 6));

  Rng rng(3);
  const auto r = tape.constant(random_tensor({20, 7}, rng, -50, 50));
  const Tensor probs = tape.value(tape.softmax_rows(r));
  for (int i = 0; i < 20; ++i) {
    double sum = 0.0;
    for (int j = 0; j < 7; ++j) sum += probs.at(i, j);
    CHECK(std::abs(sum - 1.0) <= 1e-9);
  }
}

TEST_CASE("straight-through sampling") {
  Rng rng(123);

  SUBCASE("degenerate row always picks its class") {
    for (int i = 0; i < 50; ++i) {
      Tape tape;
      const auto dist = tape.constant(Tensor({1, 3}, {1, 0, 0}));
      const Tensor onehot = tape.value(tape.straight_through_sample(dist, rng));
      CHECK(onehot.at(0, 0) == 1.0);
    }
  }

  SUBCASE("empirical frequency on a fair coin") {
    int zeros = 0;
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) {
      Tape tape;
      const auto dist = tape.constant(Tensor({1, 2}, {0.5, 0.5}));
      if (tape.value(tape.straight_through_sample(dist, rng)).at(0, 0) == 1.0) ++zeros;
    }
    const double freq = static_cast<double>(zeros) / draws;
    CHECK(freq >= 0.49);
    CHECK(freq <= 0.51);
  }

  SUBCASE("identity surrogate gradient") {
    Tape tape;
    Parameter dist("dist", Tensor({2, 3}, {0.2, 0.3, 0.5, 0.6, 0.2, 0.2}));
    const auto sample = tape.straight_through_sample(tape.param(dist), rng);
    tape.backward(tape.sum(sample));
    for (std::size_t i = 0; i < dist.grad.size(); ++i) CHECK(dist.grad[i] == 1.0);
  }

  SUBCASE("one exactly-one-hot output per row") {
    Rng gen(7);
    Tape tape;
    const auto logits = tape.constant(random_tensor({6, 5}, gen));
    const auto probs = tape.softmax_rows(logits);
    const Tensor onehot = tape.value(tape.straight_through_sample(probs, gen));
    for (int i = 0; i < 6; ++i) {
      double sum = 0.0;
      for (int j = 0; j < 5; ++j) {
        sum += onehot.at(i, j);
        CHECK((onehot.at(i, j) == 0.0 || onehot.at(i, j) == 1.0));
      }
      CHECK(sum == 1.0);
    }
  }

  SUBCASE("unnormalized row is rejected") {
    Tape tape;
    const auto bad = tape.constant(Tensor({1, 2}, {0.7, 0.6}));
    CHECK_THROWS_AS(tape.straight_through_sample(bad, rng), ContractViolation);
  }
}

TEST_CASE("adam") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    Parameter p("p", Tensor({3}, {1.0, -2.0, 0.5}));
    Adam opt({&p}, AdamConfig{.lr = 0.1});
    opt.step();
    CHECK(p.value.values() == std::vector<double>{1.0, -2.0, 0.5});
  }

  SUBCASE("first step with unit gradient moves by about lr") {
    Parameter p("p", Tensor({1}, {3.0}));
    Adam opt({&p}, AdamConfig{.lr = 0.1});
    p.grad[0] = 1.0;
    opt.step();
    CHECK(p.value[0] == doctest::Approx(2.9).epsilon(1e-6));
    CHECK(opt.steps() == 1);
    opt.step();
    CHECK(opt.steps() == 2);
  }

  SUBCASE("non-finite gradient names the parameter") {
    Parameter p("offender", Tensor({1}, {0.0}));
    Adam opt({&p}, AdamConfig{});
    p.grad[0] = std::numeric_limits<double>::quiet_NaN();
    try {
      opt.step();
      FAIL("expected TrainingError");
    } catch (const TrainingError& e) {
      CHECK(std::string(e.what()).find("offender") != std::string::npos);
    }
  }
}

TEST_CASE("composite gradient check across ops") {
  Rng rng(42);
  Parameter a("a", random_tensor({4, 3}, rng));
  Parameter b("b", random_tensor({3, 4}, rng));
  Parameter bias("bias", random_tensor({4}, rng, -0.5, 0.5));
  Parameter gain("gain", random_tensor({4}, rng, 0.8, 1.2));
  const Tensor target = random_tensor({4, 4}, rng, 0.05, 0.95);

  auto build = [&](Tape& tape) {
    const auto h = tape.silu(tape.add_rowvec(tape.matmul(tape.param(a), tape.param(b)),
                                             tape.param(bias)));
    const auto ln = tape.layer_norm(h, tape.param(gain), tape.constant(Tensor::zeros({4})));
    const auto probs = tape.softmax_rows(ln);
    const auto picked = tape.gather_rows(tape.log_clamped(probs), {0, 1, 2, 3});
    const auto bce = tape.bce_with_logits(ln, tape.constant(target));
    const auto extra = tape.mean(tape.mul_colvec(tape.sigmoid(ln),
                                                 tape.constant(Tensor({4}, {0.1, 0.2, 0.3, 0.4}))));
    return tape.add(tape.add(tape.mean(picked), bce), extra);
  };
  auto loss_fn = [&]() {
    Tape tape;
    return tape.value(build(tape)).item();
  };
  {
    Tape tape;
    tape.backward(build(tape));
  }
  const auto check = testsupport::check_parameter_gradients({&a, &b, &bias, &gain}, loss_fn);
  CHECK(check.max_rel_err < 1e-4);
}

TEST_CASE("backward pass is deterministic") {
  Rng rng(9);
  Parameter a("a", random_tensor({5, 5}, rng));
  auto run = [&]() {
    a.zero_grad();
    Tape tape;
    const auto s = tape.softmax_rows(tape.silu(tape.param(a)));
    tape.backward(tape.mean(tape.log_clamped(s)));
    return a.grad.values();
  };
  CHECK(run() == run());
}

TEST_CASE("tensor serialization round trip") {
  const std::string path = (std::filesystem::temp_directory_path() / "bt_tensors.btw").string();
  Rng rng(77);
  const Tensor a = random_tensor({2, 3}, rng);
  const Tensor b = random_tensor({4}, rng);
  save_tensors(path, {{"layer.weight", &a}, {"layer.bias", &b}});

  const auto loaded = load_tensors(path);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded.at("layer.weight").shape() == std::vector<int>{2, 3});
  CHECK(loaded.at("layer.weight").values() == a.values());
  CHECK(loaded.at("layer.bias").values() == b.values());
  std::filesystem::remove(path);
}

TEST_CASE("rng determinism and splitting") {
  Rng a(1234), b(1234);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng parent(55);
  Rng c1 = parent.split(1);
  Rng c2 = parent.split(2);
  CHECK(c1.next_u64() != c2.next_u64());
  Rng c1_again = parent.split(1);
  CHECK(parent.split(1).next_u64() == c1_again.next_u64());
}
