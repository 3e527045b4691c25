#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "damusic/nn/adam.hpp"
#include "damusic/nn/layers.hpp"
#include "test_support.hpp"

namespace damusic {
namespace {

using namespace nn;
using testing::central_difference;

RealVector random_vector(std::size_t n, Rng& rng, double scale = 1.0) {
  RealVector v(n);
  for (auto& x : v) x = rng.uniform(-scale, scale);
  return v;
}

// Checks the taped gradient of a scalar graph built from one input vector.
void check_input_gradient(const std::function<Var(Tape&, Var)>& build, const RealVector& x0, double tol = 1e-7) {
  Tape tape;
  const Var x = tape.constant(x0);
  const Var loss = build(tape, x);
  tape.backward(loss);
  const RealVector g = tape.grad(x);
  auto f = [&](const RealVector& xv) {
    Tape t;
    return t.scalar(build(t, t.constant(xv)));
  };
  for (std::size_t i = 0; i < x0.size(); ++i) {
    EXPECT_NEAR(g[i], central_difference(f, x0, i), tol) << "coordinate " << i;
  }
}

TEST(Tape, ElementwiseOps) {
  Rng rng(1);
  const RealVector x0 = random_vector(6, rng);
  const RealVector w = random_vector(6, rng);
  check_input_gradient([&](Tape& t, Var x) { return weighted_sum(t, add(t, x, mul(t, x, x)), w); }, x0);
  check_input_gradient([&](Tape& t, Var x) { return weighted_sum(t, sub(t, scale(t, x, 3.0), tanh(t, x)), w); }, x0);
  check_input_gradient([&](Tape& t, Var x) { return sum(t, mul(t, sigmoid(t, x), x)); }, x0);
  check_input_gradient([&](Tape& t, Var x) { return weighted_sum(t, relu(t, x), w); }, x0);
}

TEST(Tape, ReusedNodeAccumulates) {
  Tape tape;
  const Var x = tape.constant({2.0});
  const Var y = mul(tape, x, x);
  const Var loss = sum(tape, add(tape, y, x));
  tape.backward(loss);
  EXPECT_DOUBLE_EQ(tape.grad(x)[0], 5.0);
}

TEST(Tape, RejectsShapeErrors) {
  Tape tape;
  const Var a = tape.constant({1.0, 2.0});
  const Var b = tape.constant({1.0});
  EXPECT_THROW(add(tape, a, b), DimensionError);
  EXPECT_THROW(tape.backward(a), DimensionError);
}

TEST(Affine, MatchesHandComputation) {
  ParamStore store;
  const auto w = store.add("W", {2, 3}, {1, 2, 3, 4, 5, 6});
  const auto b = store.add("b", {2}, {0.5, -1});
  Tape tape;
  const Var x = tape.constant({1, 0, -1});
  const Var y = affine(tape, {{tape.param(store, w), x}}, tape.param(store, b));
  EXPECT_EQ(tape.value(y), (RealVector{-1.5, -3.0}));

  tape.backward(weighted_sum(tape, y, {1.0, 2.0}));
  EXPECT_EQ(store[w].grad, (RealVector{1, 0, -1, 2, 0, -2}));
  EXPECT_EQ(store[b].grad, (RealVector{1, 2}));
  EXPECT_EQ(tape.grad(x), (RealVector{9, 12, 15}));
}

TEST(ParamStore, FlatAddressingAndNames) {
  ParamStore store;
  store.add("a", {2}, {1, 2});
  store.add("b", {1, 3}, {3, 4, 5});
  EXPECT_EQ(store.scalar_count(), 5u);
  EXPECT_EQ(store.scalar(3), 4.0);
  EXPECT_EQ(store.id_of("b"), 1u);
  EXPECT_THROW(store.id_of("c"), InvalidInputError);
  EXPECT_THROW(store.add("a", {1}, {0}), InvalidInputError);
  EXPECT_THROW(store.add("c", {2}, {0}), DimensionError);
  EXPECT_THROW(store.scalar(5), InvalidInputError);
}

TEST(Glorot, BoundAndSpread) {
  Rng rng(2);
  const RealVector w = glorot_init(30, 20, rng);
  ASSERT_EQ(w.size(), 600u);
  const double bound = std::sqrt(6.0 / 50.0);
  double var = 0.0;
  for (double v : w) {
    EXPECT_LE(std::abs(v), bound);
    var += v * v;
  }
  // uniform on [-b, b] has variance b^2 / 3
  EXPECT_NEAR(var / 600.0, bound * bound / 3.0, 0.01);
}

TEST(Dense, InitAndGradients) {
  Rng rng(3);
  ParamStore store;
  const auto layer = DenseLayer::create(store, "fc", 4, 3, Activation::tanh, rng);
  EXPECT_EQ(store[layer.weight].shape, (std::vector<std::size_t>{3, 4}));
  for (double b : store[layer.bias].value) EXPECT_EQ(b, 0.0);
  for (auto& b : store[layer.bias].value) b = rng.uniform(-0.5, 0.5);

  const RealVector x0 = random_vector(4, rng);
  const RealVector w = random_vector(3, rng);
  check_input_gradient([&](Tape& t, Var x) { return weighted_sum(t, layer.forward(t, store, x), w); }, x0);

  store.zero_grad();
  Tape tape;
  tape.backward(weighted_sum(tape, layer.forward(tape, store, tape.constant(x0)), w));
  for (std::size_t k = 0; k < store.scalar_count(); ++k) {
    const double analytic = store.scalar_grad(k);
    double& p = store.scalar(k);
    const double p0 = p;
    auto f = [&](double v) {
      p = v;
      Tape t;
      const double out = t.scalar(weighted_sum(t, layer.forward(t, store, t.constant(x0)), w));
      p = p0;
      return out;
    };
    EXPECT_NEAR(analytic, (f(p0 + 1e-6) - f(p0 - 1e-6)) / 2e-6, 1e-7);
  }
}

double sigmoid_ref(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// Scalar-loop GRU step used as a reference.
RealVector gru_reference(const ParamStore& s, const GruCell& c, const RealVector& h, const RealVector& x) {
  const std::size_t n = c.hidden;
  const std::size_t in = c.input;
  auto gate = [&](const GruCell::Gate& g, const RealVector& hv, std::size_t r) {
    double acc = s[g.b].value[r];
    for (std::size_t j = 0; j < in; ++j) acc += s[g.w].value[r * in + j] * x[j];
    for (std::size_t j = 0; j < n; ++j) acc += s[g.u].value[r * n + j] * hv[j];
    return acc;
  };
  RealVector r(n), rh(n), out(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = sigmoid_ref(gate(c.reset, h, i));
  for (std::size_t i = 0; i < n; ++i) rh[i] = r[i] * h[i];
  for (std::size_t i = 0; i < n; ++i) {
    const double z = sigmoid_ref(gate(c.update, h, i));
    const double cand = std::tanh(gate(c.candidate, rh, i));
    out[i] = (1.0 - z) * h[i] + z * cand;
  }
  return out;
}

TEST(Gru, StepMatchesReference) {
  Rng rng(4);
  ParamStore store;
  const auto cell = GruCell::create(store, "gru", 3, 5, rng);
  EXPECT_EQ(store.scalar_count(), 3u * (5 * 3 + 5 * 5 + 5));
  for (auto& e : store.entries())
    if (e.name.find(".b_") != std::string::npos)
      for (auto& v : e.value) v = rng.uniform(-0.3, 0.3);

  RealVector h(5, 0.0);
  Tape tape;
  Var hv = tape.constant(h);
  for (int t = 0; t < 4; ++t) {
    const RealVector x = random_vector(3, rng);
    h = gru_reference(store, cell, h, x);
    hv = cell.step(tape, store, hv, tape.constant(x));
    for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(tape.value(hv)[i], h[i], 1e-14);
  }
}

TEST(Gru, UnrolledGradients) {
  Rng rng(5);
  ParamStore store;
  const auto cell = GruCell::create(store, "gru", 2, 3, rng);
  const RealVector xs = random_vector(2 * 6, rng);
  const RealVector w = random_vector(3, rng);
  auto build = [&](Tape& t) {
    Var h = t.constant(RealVector(3, 0.0));
    for (std::size_t step = 0; step < 6; ++step) {
      const auto first = xs.begin() + static_cast<std::ptrdiff_t>(2 * step);
      h = cell.step(t, store, h, t.constant(RealVector(first, first + 2)));
    }
    return weighted_sum(t, h, w);
  };
  store.zero_grad();
  Tape tape;
  tape.backward(build(tape));
  for (std::size_t k = 0; k < store.scalar_count(); ++k) {
    const double analytic = store.scalar_grad(k);
    double& p = store.scalar(k);
    const double p0 = p;
    auto f = [&](double v) {
      p = v;
      Tape t;
      const double out = t.scalar(build(t));
      p = p0;
      return out;
    };
    EXPECT_NEAR(analytic, (f(p0 + 1e-6) - f(p0 - 1e-6)) / 2e-6, 1e-8) << "flat " << k;
  }
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParamStore store;
  const auto id = store.add("p", {3}, {1.0, 2.0, 3.0});
  store[id].grad = {0.5, -2.0, 0.0};
  AdamConfig cfg;
  cfg.lr = 0.1;
  adam_step(store, cfg, 1);
  // m_hat = g, v_hat = g^2 after bias correction
  EXPECT_NEAR(store[id].value[0], 1.0 - 0.1 * 0.5 / (0.5 + 1e-8), 1e-15);
  EXPECT_NEAR(store[id].value[1], 2.0 + 0.1 * 2.0 / (2.0 + 1e-8), 1e-15);
  EXPECT_EQ(store[id].value[2], 3.0);
  for (double g : store[id].grad) EXPECT_EQ(g, 0.0);
  EXPECT_THROW(adam_step(store, cfg, 0), InvalidInputError);
}

TEST(Adam, MatchesTwoStepRecurrence) {
  ParamStore store;
  const auto id = store.add("p", {1}, {0.0});
  AdamConfig cfg;
  store[id].grad = {1.0};
  adam_step(store, cfg, 1);
  store[id].grad = {3.0};
  adam_step(store, cfg, 2);
  const double m = 0.9 * 0.1 + 0.1 * 3.0;
  const double v = 0.999 * 0.001 + 0.001 * 9.0;
  const double m_hat = m / (1 - 0.81);
  const double v_hat = v / (1 - 0.999 * 0.999);
  const double expected = -1e-3 * 1.0 / (1.0 + 1e-8) - 1e-3 * m_hat / (std::sqrt(v_hat) + 1e-8);
  EXPECT_NEAR(store[id].value[0], expected, 1e-15);
}

TEST(Adam, MinimizesQuadratic) {
  ParamStore store;
  const auto id = store.add("p", {2}, {3.0, -2.0});
  AdamConfig cfg;
  cfg.lr = 0.05;
  for (std::size_t t = 1; t <= 2000; ++t) {
    Tape tape;
    const Var p = tape.param(store, id);
    const Var c = tape.constant({1.0, 0.5});
    const Var d = sub(tape, p, c);
    tape.backward(sum(tape, mul(tape, d, d)));
    adam_step(store, cfg, t);
  }
  EXPECT_NEAR(store[id].value[0], 1.0, 1e-3);
  EXPECT_NEAR(store[id].value[1], 0.5, 1e-3);
}

}  // namespace
}  // namespace damusic
