#pragma once

#include <deque>
#include <memory>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "hydra/embedding.hpp"
#include "hydra/qnetwork.hpp"
#include "hydra/random.hpp"
#include "hydra/types.hpp"

namespace hydra {

using QNet = QNetwork<double>;

inline constexpr int kHiddenDim = 512;

/// kEmbeddingDim -> kHiddenDim -> n_samples + 1, randomly initialised.
QNet make_controller_network(int n_samples, std::uint64_t seed);

/// Exploration threshold eps0 / (decay * omega / interval); every decision
/// while omega <= learning_start is random.
struct ExplorationSchedule {
  double eps0 = 0.2;
  double decay = 0.02;
  int interval = 200;
  long learning_start = 1000;

  /// Requires omega >= 1.
  [[nodiscard]] double threshold(long omega) const;
  /// Probability that decision number omega is a uniformly random action.
  [[nodiscard]] double explore_probability(long omega) const;
};

struct Accept {
  std::size_t index = 0;
  InstructionSample instruction;
};
struct Reject {};

struct ActionDecision {
  Eigen::VectorXd scores;    // N+1 softmax scores, reject last
  Eigen::VectorXd combined;  // scores[i] * confidence_i for the N instructions
  std::variant<Accept, Reject> choice;
  bool explored = false;

  [[nodiscard]] bool rejected() const { return std::holds_alternative<Reject>(choice); }
  /// Accepted index, or N for reject.
  [[nodiscard]] int action() const;
};

/// Index of the largest entry; ties resolve to the lowest index.
Eigen::Index argmax_lowest(const Eigen::Ref<const Eigen::VectorXd>& values);

/// Greedy rule: accept argmax_i scores[i] * P_P(d_i) unless the reject score
/// is strictly larger than that product.
ActionDecision decide(const Eigen::VectorXd& scores, const InstructionSet& candidates);

/// decide() on the network's scores; in training mode the decision is
/// replaced by a uniform action in [0, N] with explore_probability(omega).
ActionDecision select(const QNet& net, const Eigen::VectorXd& state,
                      const InstructionSet& candidates, const ExplorationSchedule& schedule,
                      bool training, long omega, Rng& rng);

struct RewardParams {
  double alpha = 100.0;
  double r1 = 100.0;
};

/// Cumulative rewards R^1, R^2, ... of one episode.
struct RewardTrace {
  std::vector<double> values;

  [[nodiscard]] double current() const { return values.empty() ? 0.0 : values.back(); }
  bool operator==(const RewardTrace&) const = default;
};

/// Reward for the step t decision: -t for a non-final step (0 at t = 1, where
/// the trace starts from R^1), +alpha*m for a related final answer, -alpha
/// for an unrelated one.
double step_increment(int t, bool is_final, double m, bool related, const RewardParams& params = {});

/// Extends the trace by step t. At t = 1 the trace restarts at R^1; a final
/// step then appends R^1 + increment.
RewardTrace step_reward(RewardTrace prev, int t, bool is_final, double m, bool related,
                        const RewardParams& params = {});

using StateVector = Eigen::VectorXf;

struct Transition {
  std::shared_ptr<const StateVector> state;
  int action = 0;
  double reward = 0.0;
  std::shared_ptr<const StateVector> next_state;  // null when terminal
  bool terminal = true;
};

/// Bounded FIFO of transitions.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  /// Evicts the oldest transition when full. Throws ConfigError if a terminal
  /// transition carries a next state.
  void push(Transition t);
  [[nodiscard]] std::size_t size() const { return items_.size(); }
  [[nodiscard]] std::size_t capacity() const { return capacity_; }
  [[nodiscard]] const Transition& operator[](std::size_t i) const { return items_[i]; }
  /// `batch` indices drawn uniformly with replacement.
  [[nodiscard]] std::vector<std::size_t> sample_indices(std::size_t batch, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::deque<Transition> items_;
};

enum class OptimizerKind { sgd, adam };

struct TrainingParams {
  int batch = 128;
  double lr = 1e-4;
  double gamma = 1.0;
  OptimizerKind optimizer = OptimizerKind::sgd;
};

/// Applies gradients to a network; Adam keeps its moment estimates here.
class Optimizer {
 public:
  explicit Optimizer(OptimizerKind kind = OptimizerKind::sgd, double lr = 1e-4)
      : kind_(kind), lr_(lr) {}
  void step(QNet& net, const QNet::Gradients& grad);

 private:
  OptimizerKind kind_;
  double lr_;
  long t_ = 0;
  std::optional<QNet::Gradients> m_, v_;
};

/// One DQN update on a uniformly sampled batch. Targets are r for terminal
/// transitions and r + gamma * max_a Q(s', a) otherwise, read from the
/// pre-softmax action values. Returns the batch loss, or nullopt (network
/// untouched) when the buffer holds fewer than `batch` transitions.
std::optional<double> train_step(QNet& net, const ReplayBuffer& buffer,
                                 const TrainingParams& params, Rng& rng, Optimizer& optimizer);

/// Max relative error between analytic gradients of (Q(s,a) - target)^2 and
/// central differences (h = 1e-5) over `samples` randomly chosen parameters.
/// Pairs where both magnitudes are below 1e-10 count as exact. `analytic`
/// overrides the backpropagated gradients.
double gradient_check(const QNet& net, const Eigen::VectorXd& state, int action, double target,
                      std::uint64_t seed, int samples = 256,
                      const QNet::Gradients* analytic = nullptr);

/// True when the means of the last `windows` non-overlapping windows of
/// `window` episodes each differ from the previous one by less than
/// `tolerance` (relative).
bool has_converged(std::span<const double> rewards, std::size_t window = 500, int windows = 3,
                   double tolerance = 0.01);

struct DqnHyperParams {
  RewardParams reward;
  TrainingParams training;
  ExplorationSchedule schedule;
  std::size_t buffer_capacity = 50000;
};

/// Online network plus everything needed to train it: replay buffer,
/// observation count and a private random stream.
class DqnAgent {
 public:
  DqnAgent(QNet net, DqnHyperParams params, std::uint64_t seed);

  /// Training decisions advance the observation count before deciding.
  ActionDecision choose(const Eigen::VectorXd& state, const InstructionSet& candidates,
                        bool training);

  void record(Transition t) { buffer_.push(std::move(t)); }
  /// Runs train_step once the buffer holds a batch and omega > learning_start.
  std::optional<double> maybe_train();

  [[nodiscard]] long observations() const { return omega_; }
  [[nodiscard]] const QNet& network() const { return net_; }
  [[nodiscard]] const ReplayBuffer& buffer() const { return buffer_; }
  [[nodiscard]] const DqnHyperParams& params() const { return params_; }

 private:
  QNet net_;
  DqnHyperParams params_;
  ReplayBuffer buffer_;
  Optimizer optimizer_;
  Rng rng_;
  long omega_ = 0;
};

}  // namespace hydra
