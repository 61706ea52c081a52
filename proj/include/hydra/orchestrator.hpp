#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hydra/checkpoint.hpp"
#include "hydra/controller.hpp"
#include "hydra/embedding.hpp"
#include "hydra/llm.hpp"
#include "hydra/memory.hpp"
#include "hydra/perception.hpp"
#include "hydra/prompt_template.hpp"
#include "hydra/scoring.hpp"

namespace hydra {

struct LoopConfig {
  int n_samples = 5;
  int max_iterations = 5;
  int max_rejections_per_step = 3;
  int code_retry_limit = 3;
  int planner_retry_limit = 3;

  /// Throws ConfigError unless every field is positive.
  void validate() const;

  /// Worst-case backend completions for one episode.
  [[nodiscard]] int planner_call_budget() const;
  [[nodiscard]] int coder_call_budget() const;
  [[nodiscard]] int summarizer_call_budget() const;
};

/// Chooses among planner candidates. `state` is null when needs_state() is
/// false.
class InstructionSelector {
 public:
  virtual ~InstructionSelector() = default;
  [[nodiscard]] virtual bool needs_state() const { return true; }
  virtual ActionDecision choose(const Eigen::VectorXd* state, const InstructionSet& candidates) = 0;
};

/// Greedy selection with a frozen network.
class DqnSelector final : public InstructionSelector {
 public:
  explicit DqnSelector(const QNet& net) : net_(net) {}
  ActionDecision choose(const Eigen::VectorXd* state, const InstructionSet& candidates) override;

 private:
  const QNet& net_;
};

/// Highest planner confidence, lowest index on ties; never rejects. Used
/// when no checkpoint is supplied and as the confidence baseline.
class ConfidenceSelector final : public InstructionSelector {
 public:
  [[nodiscard]] bool needs_state() const override { return false; }
  ActionDecision choose(const Eigen::VectorXd* state, const InstructionSet& candidates) override;
};

/// Accepts the highest-confidence candidate (lowest index on ties) with
/// uniform scores; the forced acceptance after too many rejections.
ActionDecision forced_acceptance(const InstructionSet& candidates);

/// Per-episode model and toolkit handles.
struct EpisodeBackends {
  std::shared_ptr<LlmBackend> planner;
  std::shared_ptr<LlmBackend> coder;
  std::shared_ptr<LlmBackend> summarizer;
  std::shared_ptr<PerceptionToolkit> toolkit;
};

/// Builds backends for one episode; `seed` is derived from the run seed and
/// the query so stochastic mocks stay reproducible under any scheduling.
using BackendFactory = std::function<EpisodeBackends(const LabeledQuery& example, std::uint64_t seed)>;

struct EpisodeContext {
  const PromptLibrary* prompts = nullptr;
  EmbeddingProvider* embedder = nullptr;
  LoopConfig loop;
  bool record_calls = false;
};

struct CallRecord {
  std::string role;  // planner, coder or summarizer
  std::string prompt;
  std::string completion;
};

struct DecisionRecord {
  int t = 1;
  int action = 0;  // accepted index, or N for reject
  bool rejected = false;
  bool explored = false;
  bool forced = false;
  std::shared_ptr<const StateVector> state;  // set when the selector needs state
};

struct StepRecord {
  int t = 1;
  InstructionSet candidates;  // the set the instruction was accepted from
  InstructionSample chosen;
  std::size_t chosen_index = 0;
  std::string script;
  int code_attempts = 0;
  std::string feedback;
  bool execution_ok = false;
  std::optional<std::string> verdict;  // summarizer reply when consulted
};

struct EpisodeResult {
  Answer answer;
  int steps_taken = 0;
  std::vector<StepRecord> steps;
  std::vector<DecisionRecord> decisions;
  StateMemory memory;
  std::optional<RewardTrace> reward_trace;
  std::optional<std::string> error;
  bool planner_shortcut = false;
  int planner_calls = 0;
  int coder_calls = 0;
  int summarizer_calls = 0;
  std::vector<CallRecord> calls;  // when EpisodeContext::record_calls
};

/// One inference episode of the plan / select / execute / textualize loop.
/// Backend failures end the episode unanswered with `error` set.
EpisodeResult run_episode(const Query& q, const EpisodeContext& ctx, const EpisodeBackends& backends,
                          InstructionSelector& selector);

/// Episode with exploration; afterwards scores the answer against the gold
/// label, stores one transition per decision (rejections and forced
/// acceptances included) and runs a training step per controller decision
/// once learning has started.
EpisodeResult run_training_episode(const LabeledQuery& example, const EpisodeContext& ctx,
                                   const EpisodeBackends& backends, DqnAgent& agent);

/// Per-decision rewards for a finished episode: rejections get -t, accepted
/// non-final steps the step increment, the last decision the terminal
/// increment. Also returns the cumulative trace.
struct EpisodeRewards {
  std::vector<double> per_decision;
  RewardTrace trace;
};
EpisodeRewards episode_rewards(const EpisodeResult& episode, double m, bool related,
                               const RewardParams& params);

struct TrainingConfig {
  LoopConfig loop;
  DqnHyperParams dqn;
  std::uint64_t seed = 0;
  long max_observations = 30000;
  std::size_t max_episodes = 1000000;
  std::size_t convergence_window = 500;
  int convergence_windows = 3;
  double convergence_tolerance = 0.01;
};

struct TrainingResult {
  Checkpoint checkpoint;
  std::vector<double> episode_rewards;  // final R per episode
  long observations = 0;
  bool converged = false;
};

/// Trains a fresh controller. Episodes cycle through the dataset in a
/// seed-shuffled order until the reward converges, the observation budget
/// would be exceeded, or max_episodes is reached. Throws ConfigError on an
/// empty dataset.
TrainingResult train(std::span<const LabeledQuery> dataset, const EpisodeContext& ctx,
                     const BackendFactory& factory, const TrainingConfig& config,
                     const std::function<void(std::size_t episode, double reward)>& progress = {});

/// JSONL trace records for an episode: one {id, t, ...step_record} line per
/// step, plus a final {id, answer, steps, error} summary and, when recorded,
/// the raw calls.
std::vector<nlohmann::ordered_json> episode_trace(const std::string& id, const EpisodeResult& r);

}  // namespace hydra
