#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dmvc/numgrad.hpp"
#include "test_support.hpp"

using namespace dmvc;
using namespace dmvc::ng;

namespace {

ParamStore two_layer_store(std::mt19937_64& rng) {
  ParamStore store;
  store.add("l1.weight", testutil::random_tensor(rng, 3, 4, 0.7));
  store.add("l1.bias", testutil::random_tensor(rng, 1, 4, 0.3));
  store.add("l2.weight", testutil::random_tensor(rng, 4, 2, 0.7));
  store.add("l2.bias", testutil::random_tensor(rng, 1, 2, 0.3));
  return store;
}

Var two_layer_loss(Graph& g, const Tensor& x) {
  auto in = g.input("x", x);
  auto h = relu(g.affine(in, g.param("l1.weight"), g.param("l1.bias")));
  auto out = g.affine(h, g.param("l2.weight"), g.param("l2.bias"));
  return mean(square(sigmoid(out) + (-0.25)));
}

}  // namespace

TEST(Tensor, ShapeMustMatchData) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), ConfigError);
  Tensor t({2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  Tensor v({4});
  EXPECT_EQ(v.rows(), 1u);
  EXPECT_EQ(v.cols(), 4u);
}

TEST(Forward, IdentityLinearMap) {
  ParamStore store;
  store.add("w", Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
  store.add("b", Tensor::zeros(1, 3));
  Graph g(&store);
  auto y = g.affine(g.input("x", Tensor::row({1, 2, 3})), g.param("w"), g.param("b"));
  EXPECT_EQ(y.value(), Tensor::matrix(1, 3, {1, 2, 3}));
}

TEST(Forward, SigmoidOfZeroIsHalf) {
  Graph g;
  EXPECT_EQ(sigmoid(g.constant(Tensor::scalar(0.0))).value().item(), 0.5);
}

TEST(Forward, TwoLayerReluMatchesHandEvaluation) {
  ParamStore store;
  store.add("w1", Tensor::matrix(3, 2, {1.0, 0.5, -1.0, 2.0, 0.25, -3.0}));
  store.add("b1", Tensor::row({0.1, -0.2}));
  store.add("w2", Tensor::matrix(2, 1, {2.0, -1.5}));
  store.add("b2", Tensor::row({0.3}));
  Graph g(&store);
  auto x = g.input("x", Tensor::row({1.0, -2.0, 0.5}));
  auto h = relu(g.affine(x, g.param("w1"), g.param("b1")));
  auto y = g.affine(h, g.param("w2"), g.param("b2"));
  // x.W1 + b1 = [3.225, -5.2] -> relu [3.225, 0] -> 2*3.225 + 0.3
  EXPECT_NEAR(h.value()[0], 3.225, 1e-15);
  EXPECT_EQ(h.value()[1], 0.0);
  EXPECT_NEAR(y.value().item(), 6.75, 1e-14);
}

TEST(Forward, ShapeMismatchIsConfigError) {
  Graph g;
  auto a = g.constant(Tensor::zeros(2, 3));
  auto b = g.constant(Tensor::zeros(2, 3));
  EXPECT_THROW(g.matmul(a, b), ConfigError);
  EXPECT_THROW(g.add(a, g.constant(Tensor::zeros(3, 3))), ConfigError);
}

TEST(Forward, NonFiniteValueNamesTheNode) {
  Graph g;
  auto a = g.constant(Tensor::row({1.0, -1.0}));
  try {
    g.log(a);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("(log)"), std::string::npos) << e.what();
  }
}

TEST(Forward, ReplayReproducesOutputsBitForBit) {
  std::mt19937_64 rng(3);
  auto store = two_layer_store(rng);
  Graph g(&store);
  auto x = testutil::random_tensor(rng, 5, 3);
  auto loss = two_layer_loss(g, x);
  const Tensor first = loss.value();
  g.forward();
  EXPECT_EQ(loss.value(), first);

  Graph again(&store);
  EXPECT_EQ(two_layer_loss(again, x).value(), first);
}

TEST(Forward, ReplayWithNewInputs) {
  Graph g;
  auto x = g.input("x", Tensor::row({1, 2}));
  auto y = sum(square(x));
  EXPECT_EQ(y.value().item(), 5.0);
  g.forward({{"x", Tensor::row({3, 4})}});
  EXPECT_EQ(y.value().item(), 25.0);
  EXPECT_THROW(g.forward({{"x", Tensor::row({1, 2, 3})}}), ConfigError);
  EXPECT_THROW(g.forward({{"nope", Tensor::row({1, 2})}}), UsageError);
}

TEST(Backward, SumGivesOnes) {
  Graph g;
  auto x = g.input("x", Tensor::row({0.3, -1.0, 7.0}), true);
  g.backward(sum(x));
  EXPECT_EQ(g.grad(x), Tensor::matrix(1, 3, {1, 1, 1}));
}

TEST(Backward, HalfSquaredNormGivesX) {
  Graph g;
  auto x = g.input("x", Tensor::row({1, -2, 3}), true);
  g.backward(0.5 * sum(square(x)));
  EXPECT_EQ(g.grad(x), Tensor::matrix(1, 3, {1, -2, 3}));
}

TEST(Backward, LossMustBeScalar) {
  Graph g;
  auto x = g.input("x", Tensor::row({1, 2}), true);
  EXPECT_THROW(g.backward(square(x)), UsageError);
}

TEST(Backward, TwoLayerNetworkMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  auto store = two_layer_store(rng);
  const auto x = testutil::random_tensor(rng, 6, 3);
  Graph g(&store);
  auto loss = two_layer_loss(g, x);
  store.zero_grads();
  g.backward(loss);

  const auto numeric = testutil::finite_difference_gradients(store, [&] {
    Graph probe(&store);
    return two_layer_loss(probe, x).value().item();
  });
  for (const auto& [name, fd] : numeric) {
    EXPECT_LT(testutil::max_relative_error(store.at(name).grad, fd), 1e-4) << name;
  }
}

// Random graphs over the whole primitive set, checked against finite differences.
class RandomGraphGradient : public ::testing::TestWithParam<int> {};

TEST_P(RandomGraphGradient, AgreesWithFiniteDifferences) {
  std::mt19937_64 rng(1000 + GetParam());
  std::uniform_int_distribution<int> pick(0, 13);
  ParamStore store;
  store.add("a", testutil::random_tensor(rng, 3, 4));
  store.add("b", testutil::random_tensor(rng, 4, 4));
  store.add("r", testutil::random_tensor(rng, 1, 4));
  store.add("c", testutil::random_tensor(rng, 3, 1));

  std::vector<int> ops(6);
  for (auto& op : ops) op = pick(rng);

  auto build = [&](Graph& g) {
    Var cur = g.param("a");
    for (int op : ops) {
      switch (op) {
        case 0: cur = g.matmul(cur, g.param("b")); break;
        case 1: cur = g.affine(cur, g.param("b"), g.param("r")); break;
        case 2: cur = cur + g.param("r"); break;
        case 3: cur = cur * g.param("c"); break;
        case 4: cur = cur / (exp(g.param("c")) + 0.5); break;
        case 5: cur = cur - g.param("r"); break;
        case 6: cur = sigmoid(cur); break;
        case 7: cur = exp(g.clamp(cur, -3.0, 3.0) * 0.3); break;
        case 8: cur = log(square(cur) + 1.0); break;
        case 9: cur = g.concat_cols({g.slice_cols(cur, 0, 2), g.slice_cols(cur, 2, 4) * 2.0}); break;
        case 10: cur = cur - g.logsumexp_rows(cur); break;
        case 11: cur = g.transpose(g.transpose(cur) * 1.5); break;
        case 12:
          cur = g.slice_cols(g.concat_cols({g.sum_rows(cur), cur + 0.1 * g.sum_cols(cur)}), 0, 4) *
                g.slice_rows(g.param("b"), 1, 2);
          break;
        default: cur = relu(cur) + 0.1 * cur; break;
      }
    }
    return mean(square(cur)) + 0.1 * sum(cur);
  };

  Graph g(&store);
  auto loss = build(g);
  store.zero_grads();
  g.backward(loss);

  const auto numeric = testutil::finite_difference_gradients(store, [&] {
    Graph probe(&store);
    return build(probe).value().item();
  });
  for (const auto& [name, fd] : numeric) {
    EXPECT_LT(testutil::max_relative_error(store.at(name).grad, fd), 1e-4)
        << name << " in graph seed " << GetParam();
  }
}

INSTANTIATE_TEST_SUITE_P(Property, RandomGraphGradient, ::testing::Range(0, 40));

TEST(Backward, DeterministicGradients) {
  std::mt19937_64 rng(5);
  auto store = two_layer_store(rng);
  const auto x = testutil::random_tensor(rng, 8, 3);
  auto run = [&] {
    store.zero_grads();
    Graph g(&store);
    g.backward(two_layer_loss(g, x));
    std::vector<Tensor> grads;
    for (const auto& [_, p] : store) grads.push_back(p.grad);
    return grads;
  };
  EXPECT_EQ(run(), run());
}

TEST(Backward, LinearInLoss) {
  std::mt19937_64 rng(9);
  auto store = two_layer_store(rng);
  const auto x = testutil::random_tensor(rng, 4, 3);
  const double alpha = 0.7, beta = -1.3;

  auto grads_of = [&](auto make_loss) {
    store.zero_grads();
    Graph g(&store);
    g.backward(make_loss(g));
    std::map<std::string, Tensor> out;
    for (const auto& [name, p] : store) out.emplace(name, p.grad);
    return out;
  };
  auto l1 = [&](Graph& g) { return two_layer_loss(g, x); };
  auto l2 = [&](Graph& g) { return sum(exp(g.param("l2.weight") * 0.5)) + sum(g.param("l1.bias")); };

  const auto g1 = grads_of(l1);
  const auto g2 = grads_of(l2);
  const auto combined = grads_of([&](Graph& g) { return alpha * l1(g) + beta * l2(g); });
  for (const auto& [name, c] : combined) {
    for (std::size_t k = 0; k < c.size(); ++k)
      EXPECT_NEAR(c[k], alpha * g1.at(name)[k] + beta * g2.at(name)[k], 1e-12) << name;
  }
}

TEST(ParamStore, ZeroGradsClearsAccumulators) {
  std::mt19937_64 rng(1);
  auto store = two_layer_store(rng);
  Graph g(&store);
  g.backward(two_layer_loss(g, testutil::random_tensor(rng, 2, 3)));
  store.zero_grads();
  for (const auto& [name, p] : store) {
    for (double v : p.grad.data()) EXPECT_EQ(v, 0.0) << name;
    EXPECT_EQ(p.grad.shape(), p.value.shape());
    EXPECT_EQ(p.first_moment.shape(), p.value.shape());
    EXPECT_EQ(p.second_moment.shape(), p.value.shape());
  }
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  ParamStore store;
  store.add("x", Tensor::row({1.0, -2.0}));
  adam_step(store, {});
  EXPECT_EQ(store.value("x"), Tensor::matrix(1, 2, {1.0, -2.0}));
  EXPECT_EQ(store.step(), 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParamStore store;
  store.add("x", Tensor::row({1.0, -2.0, 0.5}));
  store.at("x").grad = Tensor::matrix(1, 3, {3.0, -0.01, 250.0});
  adam_step(store, {.learning_rate = 0.05, .epsilon = 0.0});
  const auto& x = store.value("x");
  EXPECT_NEAR(x[0], 1.0 - 0.05, 1e-15);
  EXPECT_NEAR(x[1], -2.0 + 0.05, 1e-15);
  EXPECT_NEAR(x[2], 0.5 - 0.05, 1e-15);
  // gradients are kept until zero_grads
  EXPECT_EQ(store.at("x").grad[0], 3.0);
}

TEST(Adam, ThreeStepsOnHalfSquareMatchScriptedRecurrence) {
  // Frozen from an independent scalar script of the textbook recurrence.
  const double expected[] = {0.900000001, 0.8004122297123382, 0.701586274504415};
  ParamStore store;
  store.add("x", Tensor::scalar(1.0));
  for (double want : expected) {
    store.zero_grads();
    Graph g(&store);
    auto x = g.param("x");
    g.backward(0.5 * square(x));
    adam_step(store, {.learning_rate = 0.1});
    EXPECT_NEAR(store.value("x").item(), want, 1e-15);
  }
  EXPECT_EQ(store.step(), 3u);
}

TEST(Adam, RejectsBadOptions) {
  ParamStore store;
  EXPECT_THROW(adam_step(store, {.learning_rate = 0.0}), UsageError);
  EXPECT_THROW(adam_step(store, {.beta1 = 1.0}), UsageError);
}

TEST(Adam, FrozenParametersDoNotMove) {
  ParamStore store;
  store.add("x", Tensor::scalar(1.0)).trainable = false;
  store.at("x").grad = Tensor::scalar(1.0);
  adam_step(store, {});
  EXPECT_EQ(store.value("x").item(), 1.0);
}

TEST(Archive, RoundTripIsBitExactAndByteStable) {
  std::mt19937_64 rng(21);
  auto store = two_layer_store(rng);
  for (auto& [_, p] : store) {
    p.grad = testutil::random_tensor(rng, p.value.rows(), p.value.cols());
  }
  adam_step(store, {});
  store.at("l2.bias").trainable = false;

  const auto bytes = serialize(store);
  const auto loaded = deserialize(bytes);
  EXPECT_EQ(loaded.step(), store.step());
  for (const auto& [name, p] : store) {
    const auto& q = loaded.at(name);
    EXPECT_EQ(q.value, p.value) << name;
    EXPECT_EQ(q.first_moment, p.first_moment) << name;
    EXPECT_EQ(q.second_moment, p.second_moment) << name;
    EXPECT_EQ(q.trainable, p.trainable) << name;
  }
  EXPECT_EQ(serialize(loaded), bytes);
  // version field right after the magic
  EXPECT_EQ(bytes.substr(0, 8), std::string("DMVCPAR\0", 8));
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), kArchiveVersion);
}

TEST(Archive, RejectsCorruptInput) {
  ParamStore store;
  store.add("w", Tensor::row({1, 2, 3}));
  auto bytes = serialize(store);
  EXPECT_THROW(deserialize(bytes.substr(0, bytes.size() - 3)), LoadError);
  EXPECT_THROW(deserialize(bytes + "x"), LoadError);
  bytes[0] = 'X';
  EXPECT_THROW(deserialize(bytes), LoadError);
}
