#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <functional>

#include "granorm/autodiff.hpp"
#include "granorm/checkpoint.hpp"
#include "granorm/error.hpp"
#include "granorm/optimizer.hpp"
#include "granorm/param_store.hpp"
#include "support/generators.hpp"

using namespace granorm;

namespace {

using Fn = std::function<Var(Tape&, const std::vector<Var>&)>;

Tensor random_tensor(testing::Rng& rng, Tensor::Shape shape) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = testing::uniform(rng, -1.0, 1.0);
  return t;
}

double eval(const Fn& f, const std::vector<Tensor>& inputs) {
  Tape tape(false);
  std::vector<Var> vs;
  for (const auto& t : inputs) vs.push_back(tape.constant(t));
  return f(tape, vs).item();
}

// Central differences, h = 1e-5; relative error with an absolute floor of 1e-7.
void check_gradient(const Fn& f, std::vector<Tensor> inputs) {
  Tape tape(true);
  std::vector<Var> vs;
  for (const auto& t : inputs) vs.push_back(tape.leaf(t));
  Var loss = f(tape, vs);
  tape.backward(loss);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    Tensor g = tape.grad(vs[i]);
    for (std::size_t j = 0; j < inputs[i].size(); ++j) {
      double saved = inputs[i][j];
      inputs[i][j] = saved + 1e-5;
      double up = eval(f, inputs);
      inputs[i][j] = saved - 1e-5;
      double down = eval(f, inputs);
      inputs[i][j] = saved;
      double numeric = (up - down) / 2e-5;
      double err = std::abs(numeric - g[j]);
      CHECK(err <= std::max(1e-4 * std::max(std::abs(numeric), std::abs(g[j])), 1e-7));
    }
  }
}

}  // namespace

TEST_CASE("softmax examples") {
  Tape tape(false);
  Var a = softmax(tape.constant(Tensor::vector({0.0, 0.0})));
  CHECK(a.value()[0] == doctest::Approx(0.5).epsilon(1e-15));
  Var b = softmax(tape.constant(Tensor::vector({0.0, std::log(2.0)})));
  CHECK(b.value()[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(b.value()[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(max_with_constant(tape.constant(Tensor::scalar(-0.3)), 0.0).item() == 0.0);
}

TEST_CASE("softmax rows sum to one") {
  testing::Rng rng(1);
  Tape tape(false);
  for (int i = 0; i < 200; ++i) {
    Tensor t = random_tensor(rng, {1 + testing::below(rng, 4), 1 + testing::below(rng, 8)});
    for (double& v : t.data()) v *= 30.0;
    Var s = softmax(tape.constant(t));
    for (std::size_t r = 0; r < t.rows(); ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < t.cols(); ++c) total += s.value().at(r, c);
      CHECK(std::abs(total - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("backward of simple sums") {
  Tape tape(true);
  Var p = tape.leaf(Tensor::vector({1.0, -2.0, 3.0}));
  tape.backward(sum(p));
  CHECK(tape.grad(p) == Tensor::vector({1.0, 1.0, 1.0}));

  Tape t2(true);
  Var q = t2.leaf(Tensor::vector({1.0, -2.0, 3.0}));
  t2.backward(sum(mul(q, q)));
  CHECK(t2.grad(q) == Tensor::vector({2.0, -4.0, 6.0}));
}

TEST_CASE("gradient check per operation") {
  testing::Rng rng(2);
  auto vec = [&](std::size_t n) { return random_tensor(rng, {n}); };
  auto mat = [&](std::size_t r, std::size_t c) { return random_tensor(rng, {r, c}); };
  std::vector<int> idx{2, -1, 0, 2};
  std::vector<int> grp{0, 1, 0, -1, 2};

  for (int rep = 0; rep < 5; ++rep) {
    std::size_t n = 1 + testing::below(rng, 8), m = 1 + testing::below(rng, 8), k = 1 + testing::below(rng, 8);
    check_gradient([](Tape&, auto& v) { return sum(add(v[0], v[1])); }, {vec(n), vec(n)});
    check_gradient([](Tape&, auto& v) { return sum(mul(sub(v[0], v[1]), v[0])); }, {vec(n), vec(n)});
    check_gradient([](Tape&, auto& v) { return sum(scale(add_scalar(v[0], 0.3), -1.7)); }, {vec(n)});
    check_gradient([](Tape&, auto& v) { return sum(mul(mul_scalar(v[0], v[1]), v[1])); }, {vec(1), vec(n)});
    check_gradient([](Tape&, auto& v) { return sum(tanh(matvec(v[0], v[1]))); }, {mat(m, k), vec(k)});
    check_gradient([](Tape&, auto& v) { return sum(tanh(vecmat(v[0], v[1]))); }, {vec(m), mat(m, k)});
    check_gradient([](Tape&, auto& v) { return sum(tanh(matmul(v[0], v[1]))); }, {mat(m, k), mat(k, n)});
    check_gradient([](Tape&, auto& v) { return mul(dot(v[0], v[1]), dot(v[0], v[0])); }, {vec(n), vec(n)});
    check_gradient([](Tape&, auto& v) { return sum(sigmoid(concat({v[0], v[1], v[0]}))); }, {vec(n), vec(m)});
    check_gradient(
        [](Tape&, auto& v) {
          Var rows[] = {v[0], v[1]};
          return sum(tanh(stack_rows(rows)));
        },
        {vec(n), vec(n)});
    check_gradient([](Tape&, auto& v) { return sum(exp(row(v[0], 1))); }, {mat(3, n)});
    check_gradient([](Tape&, auto& v) { return sum(mul_scalar(element(v[0], 0), slice(v[0], 1, 2))); }, {vec(4)});
    check_gradient([&](Tape&, auto& v) { return sum(tanh(gather(v[0], idx))); }, {vec(3)});
    check_gradient([&](Tape&, auto& v) { return sum(mul(segment_sum(v[0], grp, 3), v[1])); }, {vec(5), vec(3)});
    check_gradient([](Tape&, auto& v) { return sum(log(add_scalar(exp(v[0]), 1.0))); }, {vec(n)});
    check_gradient([](Tape&, auto& v) { return dot(softmax(v[0]), v[1]); }, {vec(n), vec(n)});
    check_gradient([](Tape&, auto& v) { return sum(mul(softmax(v[0]), v[1])); }, {mat(m, n), mat(m, n)});
    check_gradient([](Tape&, auto& v) { return dot(log_softmax(v[0]), v[1]); }, {vec(n), vec(n)});
    check_gradient([](Tape&, auto& v) { return mean(max_with_constant(add_scalar(v[0], 0.05), 0.0)); }, {vec(n)});
  }
}

TEST_CASE("shape mismatch is an error") {
  Tape tape(false);
  Var a = tape.constant(Tensor::vector({1.0, 2.0}));
  Var b = tape.constant(Tensor::vector({1.0}));
  CHECK_THROWS_AS(add(a, b), ShapeError);
  CHECK_THROWS_AS(matvec(a, b), ShapeError);
}

TEST_CASE("truncate keeps earlier nodes") {
  Tape tape(false);
  Var a = tape.constant(Tensor::scalar(2.0));
  std::size_t mark = tape.node_count();
  Var b = scale(a, 3.0);
  CHECK(b.item() == 6.0);
  tape.truncate(mark);
  CHECK(tape.node_count() == mark);
  CHECK(scale(a, 4.0).item() == 8.0);
}

TEST_CASE("forward values and gradients are deterministic") {
  auto run = [] {
    testing::Rng rng(9);
    Tape tape(true);
    Var w = tape.leaf(random_tensor(rng, {6, 6}));
    Var x = tape.leaf(random_tensor(rng, {6}));
    Var loss = sum(log_softmax(matvec(w, tanh(matvec(w, x)))));
    tape.backward(loss);
    return std::make_pair(loss.item(), tape.grad(w));
  };
  auto a = run();
  auto b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}

TEST_CASE("adam zero gradient leaves parameters unchanged") {
  ParamStore p;
  p.add("w", Tensor::vector({0.5, -0.25}));
  ParamStore before = p;
  AdamState st;
  adam_step(p, {Tensor::vector({0.0, 0.0})}, st);
  CHECK(p == before);
}

TEST_CASE("adam first step moves by about lr") {
  ParamStore p;
  p.add("w", Tensor::vector({1.0, 1.0}));
  AdamState st;
  adam_step(p, {Tensor::vector({3.0, -0.02})}, st, AdamConfig{0.01});
  CHECK(p.at("w")[0] == doctest::Approx(0.99).epsilon(1e-6));
  CHECK(p.at("w")[1] == doctest::Approx(1.01).epsilon(1e-6));
}

TEST_CASE("adam matches a hand-rolled recurrence on a quadratic") {
  // f(w) = (w - 3)^2
  double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double w_ref = 0.5, m = 0.0, v = 0.0;
  ParamStore p;
  p.add("w", Tensor::scalar(0.5));
  AdamState st;
  for (int t = 1; t <= 3; ++t) {
    double g = 2.0 * (w_ref - 3.0);
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    double mh = m / (1 - std::pow(b1, t));
    double vh = v / (1 - std::pow(b2, t));
    w_ref -= lr * mh / (std::sqrt(vh) + eps);

    double gw = 2.0 * (p.at("w").item() - 3.0);
    adam_step(p, {Tensor::scalar(gw)}, st, AdamConfig{lr, b1, b2, eps});
    CHECK(p.at("w").item() == doctest::Approx(w_ref).epsilon(1e-12));
  }
}

TEST_CASE("global norm clipping") {
  std::vector<Tensor> g{Tensor::vector({3.0}), Tensor::vector({4.0})};
  CHECK(global_norm(g) == 5.0);
  CHECK(clip_global_norm(g, 1.0) == 5.0);
  CHECK(global_norm(g) == doctest::Approx(1.0));
  std::vector<Tensor> small{Tensor::vector({0.3})};
  clip_global_norm(small, 5.0);
  CHECK(small[0][0] == 0.3);
}

TEST_CASE("param store order and seeded init") {
  ParamStore a(42);
  a.add_uniform("z", {2, 3});
  a.add_uniform("a", {4});
  CHECK(a.name(0) == "a");
  CHECK(a.parameter_count() == 10);
  ParamStore b(42);
  b.add_uniform("a", {4});
  b.add_uniform("z", {2, 3});
  CHECK(a == b);
  for (double v : a.at("z").data()) {
    CHECK(std::abs(v) < 0.1);
    CHECK(static_cast<double>(static_cast<float>(v)) == v);
  }
  CHECK(derive_seed(1, "init") != derive_seed(1, "data-order"));
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  ParamStore c(42);
  c.add_uniform("a", {5});
  CHECK(a.layout_mismatches(c) == std::vector<std::string>{"a", "z"});
}

TEST_CASE("checkpoint round-trip is byte-identical") {
  ParamStore p(3);
  p.add_uniform("enc.w", {3, 4});
  p.add_uniform("b", {4});
  p.add("s", Tensor::scalar(0.1));
  round_to_f32(p);
  auto bytes = encode_checkpoint(p);
  CHECK(bytes.size() > 4);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "GNSP");
  ParamStore q = decode_checkpoint(bytes);
  CHECK(q == p);
  CHECK(encode_checkpoint(q) == bytes);

  auto dir = std::filesystem::temp_directory_path() / "granorm_ckpt_test";
  std::filesystem::create_directories(dir);
  save_checkpoint(dir / "a.ckpt", p);
  CHECK(load_checkpoint(dir / "a.ckpt") == p);
  std::filesystem::remove_all(dir);
}

TEST_CASE("corrupt checkpoints are data errors") {
  ParamStore p;
  p.add("w", Tensor::vector({1.0, 2.0}));
  auto bytes = encode_checkpoint(p);
  auto cut = bytes;
  cut.resize(bytes.size() - 3);
  CHECK_THROWS_AS(decode_checkpoint(cut), DataError);
  auto magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(magic), DataError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/x.ckpt"), DataError);
}
