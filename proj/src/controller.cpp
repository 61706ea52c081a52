#include "hydra/controller.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "hydra/error.hpp"

namespace hydra {

QNet make_controller_network(int n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw ConfigError("controller needs at least one instruction sample");
  return QNet::random(kEmbeddingDim, kHiddenDim, n_samples + 1, seed);
}

double ExplorationSchedule::threshold(long omega) const {
  if (omega < 1) throw ConfigError("threshold is defined for omega >= 1");
  return eps0 / (decay * static_cast<double>(omega) / static_cast<double>(interval));
}

double ExplorationSchedule::explore_probability(long omega) const {
  if (omega <= learning_start) return 1.0;
  return std::min(1.0, threshold(omega));
}

int ActionDecision::action() const {
  if (const auto* a = std::get_if<Accept>(&choice)) return static_cast<int>(a->index);
  return static_cast<int>(combined.size());
}

Eigen::Index argmax_lowest(const Eigen::Ref<const Eigen::VectorXd>& values) {
  if (values.size() == 0) throw ShapeError("argmax of an empty vector");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

ActionDecision decide(const Eigen::VectorXd& scores, const InstructionSet& candidates) {
  const auto n = static_cast<Eigen::Index>(candidates.size());
  if (n == 0) throw ShapeError("no instruction samples to choose from");
  if (scores.size() != n + 1) {
    throw ShapeError(fmt::format("{} scores for {} instructions", scores.size(), n));
  }
  ActionDecision d;
  d.scores = scores;
  d.combined.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d.combined[i] = scores[i] * candidates.samples[static_cast<std::size_t>(i)].confidence;
  }
  const Eigen::Index best = argmax_lowest(d.combined);
  if (scores[n] > d.combined[best]) {
    d.choice = Reject{};
  } else {
    d.choice = Accept{static_cast<std::size_t>(best), candidates.samples[static_cast<std::size_t>(best)]};
  }
  return d;
}

ActionDecision select(const QNet& net, const Eigen::VectorXd& state,
                      const InstructionSet& candidates, const ExplorationSchedule& schedule,
                      bool training, long omega, Rng& rng) {
  const auto n = candidates.size();
  if (net.output_dim() != static_cast<Eigen::Index>(n) + 1) {
    throw ShapeError(fmt::format("network has {} outputs for {} instructions", net.output_dim(), n));
  }
  ActionDecision d = decide(net.scores(state), candidates);
  if (!training) return d;
  // Both draws are always taken so the random stream does not depend on the outcome.
  const double u = uniform01(rng);
  const auto a = static_cast<std::size_t>(uniform_index(rng, n + 1));
  if (u < schedule.explore_probability(omega)) {
    d.explored = true;
    if (a == n) {
      d.choice = Reject{};
    } else {
      d.choice = Accept{a, candidates.samples[a]};
    }
  }
  return d;
}

double step_increment(int t, bool is_final, double m, bool related, const RewardParams& params) {
  if (t < 1) throw ConfigError("step numbers start at 1");
  if (!is_final) return t == 1 ? 0.0 : -static_cast<double>(t);
  return related ? params.alpha * m : -params.alpha;
}

RewardTrace step_reward(RewardTrace prev, int t, bool is_final, double m, bool related,
                        const RewardParams& params) {
  if (t < 1) throw ConfigError("step numbers start at 1");
  if (m < 0.0 || m > 1.0) throw ConfigError(fmt::format("metric {} outside [0, 1]", m));
  if (t == 1) prev.values.assign(1, params.r1);
  if (t == 1 && !is_final) return prev;
  if (prev.values.empty()) throw StateCorruption("reward trace has no R^1");
  prev.values.push_back(prev.values.back() + step_increment(t, is_final, m, related, params));
  return prev;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay buffer capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
  if (t.terminal && t.next_state) throw ConfigError("terminal transition with a next state");
  if (!t.terminal && !t.next_state) throw ConfigError("non-terminal transition without a next state");
  if (!t.state) throw ConfigError("transition without a state");
  if (items_.size() == capacity_) items_.pop_front();
  items_.push_back(std::move(t));
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch, Rng& rng) const {
  std::vector<std::size_t> out(batch);
  for (auto& i : out) i = static_cast<std::size_t>(uniform_index(rng, items_.size()));
  return out;
}

void Optimizer::step(QNet& net, const QNet::Gradients& grad) {
  if (kind_ == OptimizerKind::sgd) {
    net.w1() -= lr_ * grad.w1;
    net.b1() -= lr_ * grad.b1;
    net.w2() -= lr_ * grad.w2;
    net.b2() -= lr_ * grad.b2;
    return;
  }
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  if (!m_) {
    auto zero = [](const auto& g) {
      QNet::Gradients z;
      z.w1 = QNet::Matrix::Zero(g.w1.rows(), g.w1.cols());
      z.b1 = QNet::Vector::Zero(g.b1.size());
      z.w2 = QNet::Matrix::Zero(g.w2.rows(), g.w2.cols());
      z.b2 = QNet::Vector::Zero(g.b2.size());
      return z;
    };
    m_ = zero(grad);
    v_ = zero(grad);
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g.cwiseAbs2();
    param.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  update(net.w1(), m_->w1, v_->w1, grad.w1);
  update(net.b1(), m_->b1, v_->b1, grad.b1);
  update(net.w2(), m_->w2, v_->w2, grad.w2);
  update(net.b2(), m_->b2, v_->b2, grad.b2);
}

std::optional<double> train_step(QNet& net, const ReplayBuffer& buffer,
                                 const TrainingParams& params, Rng& rng, Optimizer& optimizer) {
  if (params.batch < 1) throw ConfigError("batch size must be positive");
  const auto batch = static_cast<std::size_t>(params.batch);
  if (buffer.size() < batch) return std::nullopt;

  const auto picks = buffer.sample_indices(batch, rng);
  const Eigen::Index dim = net.input_dim();
  QNet::Matrix states(dim, params.batch);
  std::vector<int> actions(batch);
  QNet::Vector targets(params.batch);

  std::vector<Eigen::Index> bootstrap;
  QNet::Matrix next_states;
  for (std::size_t b = 0; b < batch; ++b) {
    const Transition& tr = buffer[picks[b]];
    if (tr.state->size() != dim) throw ShapeError("stored state has the wrong length");
    states.col(static_cast<Eigen::Index>(b)) = tr.state->cast<double>();
    actions[b] = tr.action;
    targets[static_cast<Eigen::Index>(b)] = tr.reward;
    if (!tr.terminal) bootstrap.push_back(static_cast<Eigen::Index>(b));
  }
  if (!bootstrap.empty() && params.gamma != 0.0) {
    next_states.resize(dim, static_cast<Eigen::Index>(bootstrap.size()));
    for (std::size_t k = 0; k < bootstrap.size(); ++k) {
      const Transition& tr = buffer[picks[static_cast<std::size_t>(bootstrap[k])]];
      next_states.col(static_cast<Eigen::Index>(k)) = tr.next_state->cast<double>();
    }
    const QNet::Matrix q_next = net.action_values(next_states);
    for (std::size_t k = 0; k < bootstrap.size(); ++k) {
      targets[bootstrap[k]] += params.gamma * q_next.col(static_cast<Eigen::Index>(k)).maxCoeff();
    }
  }

  QNet::Gradients grad;
  const double loss = net.loss_and_gradients(states, actions, targets, grad);
  optimizer.step(net, grad);
  return loss;
}

double gradient_check(const QNet& net, const Eigen::VectorXd& state, int action, double target,
                      std::uint64_t seed, int samples, const QNet::Gradients* analytic) {
  constexpr double h = 1e-5;
  const int actions[1] = {action};
  QNet::Vector targets(1);
  targets << target;
  const QNet::Matrix states = state;

  QNet::Gradients computed;
  if (analytic == nullptr) {
    net.loss_and_gradients(states, actions, targets, computed);
    analytic = &computed;
  }

  QNet probe = net;
  QNet::Gradients scratch;
  auto loss_at = [&](Eigen::Index i, double value) {
    probe.parameter(i) = value;
    return probe.loss_and_gradients(states, actions, targets, scratch);
  };

  Rng rng(seed);
  const auto count = static_cast<std::uint64_t>(net.parameter_count());
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    const auto i = static_cast<Eigen::Index>(uniform_index(rng, count));
    const double original = probe.parameter(i);
    const double numeric = (loss_at(i, original + h) - loss_at(i, original - h)) / (2.0 * h);
    probe.parameter(i) = original;
    const double a = QNet::gradient(*analytic, i);
    const double scale = std::max(std::abs(a), std::abs(numeric));
    if (scale < 1e-10) continue;
    worst = std::max(worst, std::abs(a - numeric) / scale);
  }
  return worst;
}

bool has_converged(std::span<const double> rewards, std::size_t window, int windows,
                   double tolerance) {
  if (window == 0 || windows < 2) throw ConfigError("convergence needs at least two windows");
  const std::size_t need = window * static_cast<std::size_t>(windows);
  if (rewards.size() < need) return false;
  std::vector<double> means;
  for (std::size_t start = rewards.size() - need; start < rewards.size(); start += window) {
    double sum = 0.0;
    for (std::size_t i = start; i < start + window; ++i) sum += rewards[i];
    means.push_back(sum / static_cast<double>(window));
  }
  for (std::size_t k = 1; k < means.size(); ++k) {
    const double change = std::abs(means[k] - means[k - 1]);
    const double ref = std::abs(means[k - 1]);
    if (ref < 1e-14 ? change >= 1e-14 : change >= tolerance * ref) return false;
  }
  return true;
}

DqnAgent::DqnAgent(QNet net, DqnHyperParams params, std::uint64_t seed)
    : net_(std::move(net)),
      params_(params),
      buffer_(params.buffer_capacity),
      optimizer_(params.training.optimizer, params.training.lr),
      rng_(seed) {}

ActionDecision DqnAgent::choose(const Eigen::VectorXd& state, const InstructionSet& candidates,
                                bool training) {
  if (training) ++omega_;
  return select(net_, state, candidates, params_.schedule, training, std::max(omega_, 1L), rng_);
}

std::optional<double> DqnAgent::maybe_train() {
  if (omega_ <= params_.schedule.learning_start) return std::nullopt;
  return train_step(net_, buffer_, params_.training, rng_, optimizer_);
}

}  // namespace hydra
