#include <filesystem>

#include <doctest.h>

#include "hydra/checkpoint.hpp"
#include "hydra/controller.hpp"
#include "hydra/error.hpp"

using namespace hydra;

namespace {

InstructionSet with_confidences(std::initializer_list<double> ps) {
  InstructionSet set;
  int i = 0;
  for (double p : ps) set.samples.push_back({"d" + std::to_string(i++), p});
  return set;
}

std::shared_ptr<const StateVector> state_of(float fill, Eigen::Index dim) {
  return std::make_shared<const StateVector>(StateVector::Constant(dim, fill));
}

}  // namespace

TEST_CASE("zero network scores are uniform") {
  const QNet net(kEmbeddingDim, kHiddenDim, 6);
  Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(kEmbeddingDim, -1, 1);
  const auto s = net.scores(v);
  for (Eigen::Index i = 0; i < s.size(); ++i) CHECK(s[i] == doctest::Approx(1.0 / 6));
}

TEST_CASE("random network scores are normalised") {
  const QNet net = make_controller_network(5, 42);
  CHECK(net.input_dim() == 1536);
  CHECK(net.hidden_dim() == 512);
  CHECK(net.output_dim() == 6);
  const Eigen::VectorXd v = Eigen::VectorXd::Ones(kEmbeddingDim) * 0.02;
  CHECK(std::abs(net.scores(v).sum() - 1.0) < 1e-9);
  CHECK_THROWS_AS(net.scores(Eigen::VectorXd::Ones(10)), ShapeError);
}

TEST_CASE("decide follows the combined products") {
  Eigen::VectorXd scores(6);
  scores << 0.1, 0.5, 0.1, 0.1, 0.1, 0.1;
  const auto set = with_confidences({0.9, 0.5, 0.9, 0.9, 0.9});
  const auto d = decide(scores, set);
  CHECK(d.action() == 1);
  CHECK(d.combined[1] == doctest::Approx(0.25));
  CHECK(d.combined[0] == doctest::Approx(0.09));

  scores << 0.02, 0.02, 0.02, 0.02, 0.02, 0.9;
  const auto r = decide(scores, with_confidences({0.9, 0.9, 0.9, 0.9, 0.9}));
  CHECK(r.rejected());
  CHECK(r.action() == 5);
}

TEST_CASE("exploration thresholds") {
  const ExplorationSchedule s;
  CHECK(s.threshold(1000) == 2.0);
  CHECK(s.threshold(4000) == 0.5);
  CHECK(s.threshold(10000) == 0.2);
  CHECK(s.explore_probability(500) == 1.0);
  CHECK(s.explore_probability(20000) == doctest::Approx(0.1));
  CHECK_THROWS_AS((void)s.threshold(0), ConfigError);
}

TEST_CASE("reward increments") {
  auto t = step_reward({}, 1, false, 0, false);
  t = step_reward(t, 2, false, 0, false);
  CHECK(t.values == std::vector<double>{100, 98});
  CHECK(step_reward(t, 3, true, 0.6, true).current() == 158);
  CHECK(step_reward(step_reward({}, 1, false, 0, false), 2, true, 0, false).current() == 0);
  CHECK(step_increment(4, false, 0, false) == -4);
  CHECK(step_increment(1, false, 0, false) == 0);
  CHECK_THROWS_AS(step_reward({}, 1, true, 1.5, true), ConfigError);
}

TEST_CASE("replay buffer evicts oldest first") {
  ReplayBuffer buf(3);
  for (int i = 0; i < 5; ++i) buf.push({state_of(1, 4), i, static_cast<double>(i), nullptr, true});
  REQUIRE(buf.size() == 3);
  CHECK(buf[0].action == 2);
  CHECK(buf[2].action == 4);
  CHECK_THROWS_AS(buf.push({state_of(1, 4), 0, 0, state_of(0, 4), true}), ConfigError);
  CHECK_THROWS_AS(buf.push({state_of(1, 4), 0, 0, nullptr, false}), ConfigError);
}

TEST_CASE("train_step needs a full batch") {
  QNet net = make_controller_network(2, 5);
  const QNet before = net;
  ReplayBuffer buf(100);
  for (int i = 0; i < 10; ++i) buf.push({state_of(0.1f, kEmbeddingDim), 0, 1.0, nullptr, true});
  Rng rng(1);
  Optimizer opt;
  CHECK_FALSE(train_step(net, buf, TrainingParams{}, rng, opt).has_value());
  CHECK(net == before);
}

TEST_CASE("train_step converges to the terminal reward") {
  // Small network keeps this fast; the fixed point does not depend on size.
  QNet net = QNet::random(16, 8, 3, 9);
  ReplayBuffer buf(256);
  for (int i = 0; i < 128; ++i) {
    buf.push({std::make_shared<const StateVector>(StateVector::Constant(16, 0.5f)), 0, 1.0, nullptr, true});
  }
  TrainingParams params;
  params.lr = 1e-2;
  Rng rng(3);
  Optimizer opt(OptimizerKind::sgd, params.lr);
  for (int i = 0; i < 2000; ++i) train_step(net, buf, params, rng, opt);
  CHECK(net.action_values(Eigen::VectorXd(Eigen::VectorXd::Constant(16, 0.5)))[0] == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("train_step bootstraps from the next state") {
  QNet net(4, 3, 2);
  net.b2() << 2.0, 5.0;
  ReplayBuffer buf(8);
  for (int i = 0; i < 4; ++i) buf.push({state_of(0, 4), 0, 1.0, state_of(0, 4), false});
  TrainingParams params;
  params.batch = 4;
  params.gamma = 0.5;
  params.lr = 0.1;
  Rng rng(0);
  Optimizer opt(OptimizerKind::sgd, params.lr);
  // target 1 + 0.5 * 5 = 3.5, prediction 2: loss 2.25, b2[0] moves by lr * 2 * 1.5
  CHECK(*train_step(net, buf, params, rng, opt) == doctest::Approx(2.25));
  CHECK(net.b2()[0] == doctest::Approx(2.3));
  CHECK(net.b2()[1] == 5.0);
}

TEST_CASE("train_step is deterministic") {
  ReplayBuffer buf(300);
  Rng fill(4);
  for (int i = 0; i < 200; ++i) {
    auto s = std::make_shared<StateVector>(kEmbeddingDim);
    for (Eigen::Index k = 0; k < s->size(); ++k) (*s)[k] = static_cast<float>(uniform(fill, -0.1, 0.1));
    buf.push({s, i % 6, static_cast<double>(i % 7), nullptr, true});
  }
  auto run = [&buf](OptimizerKind kind) {
    QNet net = make_controller_network(5, 8);
    Rng rng(12);
    Optimizer opt(kind, 1e-4);
    for (int i = 0; i < 3; ++i) train_step(net, buf, TrainingParams{}, rng, opt);
    return net;
  };
  CHECK(run(OptimizerKind::sgd) == run(OptimizerKind::sgd));
  CHECK(run(OptimizerKind::adam) == run(OptimizerKind::adam));
}

TEST_CASE("gradient check sensitivity") {
  const QNet net = QNet::random(20, 10, 4, 2);
  Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(20, -1, 1);
  CHECK(gradient_check(net, v, 2, 0.7, 1) < 1e-4);

  QNet::Gradients g;
  const double q = net.action_values(v)[2];
  net.loss_and_gradients(Eigen::MatrixXd(v), std::vector<int>{2}, Eigen::VectorXd::Constant(1, q), g);
  CHECK(g.w1.cwiseAbs().maxCoeff() < 1e-8);
  CHECK(g.w2.cwiseAbs().maxCoeff() < 1e-8);

  net.loss_and_gradients(Eigen::MatrixXd(v), std::vector<int>{2}, Eigen::VectorXd::Constant(1, 0.7), g);
  g.w2 *= 1.5;
  CHECK(gradient_check(net, v, 2, 0.7, 1, 256, &g) > 1e-2);
}

TEST_CASE("convergence detection") {
  CHECK(has_converged(std::vector<double>(2000, 50.0)));
  std::vector<double> rising;
  double level = 100;
  for (int w = 0; w < 4; ++w, level *= 1.05) rising.insert(rising.end(), 500, level);
  CHECK_FALSE(has_converged(rising));
  CHECK_FALSE(has_converged(std::vector<double>(1499, 50.0)));
}

TEST_CASE("agent trains only after learning starts") {
  DqnHyperParams params;
  params.training.batch = 4;
  params.schedule.learning_start = 5;
  DqnAgent agent(QNet(kEmbeddingDim, 8, 3), params, 1);
  const Eigen::VectorXd v = Eigen::VectorXd::Constant(kEmbeddingDim, 0.01);
  const auto set = with_confidences({0.5, 0.5});
  for (int i = 0; i < 5; ++i) {
    CHECK(agent.choose(v, set, true).explored);
    agent.record({state_of(0.01f, kEmbeddingDim), 0, 1.0, nullptr, true});
    CHECK_FALSE(agent.maybe_train().has_value());
  }
  CHECK(agent.observations() == 5);
  agent.choose(v, set, true);
  CHECK(agent.maybe_train().has_value());
  agent.choose(v, set, false);
  CHECK(agent.observations() == 6);
}

TEST_CASE("checkpoint round trip and dimension checks") {
  const Checkpoint ck{make_controller_network(5, 77), 5, 77};
  const auto path = std::filesystem::temp_directory_path() / "hydra_unit_ckpt/ck.json";
  save_checkpoint(path, ck);
  const Checkpoint back = load_checkpoint(path);
  CHECK(back.net == ck.net);
  CHECK(back.n_samples == 5);
  CHECK(back.seed == 77);

  auto doc = nlohmann::json::parse(checkpoint_to_json(ck).dump());
  CHECK(doc["layer_dims"] == nlohmann::json::array({1536, 512, 6}));
  doc["n_samples"] = 4;
  CHECK_THROWS_WITH_AS(checkpoint_from_json(doc), doctest::Contains("checkpoint incompatible"), ConfigError);
  std::filesystem::remove_all(path.parent_path());
}
