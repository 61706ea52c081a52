#include "hydra/orchestrator.hpp"

#include <numeric>
#include <regex>

#include <fmt/format.h>

#include "hydra/error.hpp"
#include "hydra/planner.hpp"
#include "hydra/reasoner.hpp"
#include "hydra/textualizer.hpp"

namespace hydra {

void LoopConfig::validate() const {
  const std::pair<const char*, int> fields[] = {
      {"n_samples", n_samples},
      {"max_iterations", max_iterations},
      {"max_rejections_per_step", max_rejections_per_step},
      {"code_retry_limit", code_retry_limit},
      {"planner_retry_limit", planner_retry_limit},
  };
  for (const auto& [name, value] : fields) {
    if (value < 1) throw ConfigError(fmt::format("loop.{} must be positive, got {}", name, value));
  }
}

int LoopConfig::planner_call_budget() const {
  return max_iterations * (max_rejections_per_step + 1) * planner_retry_limit;
}
int LoopConfig::coder_call_budget() const { return max_iterations * code_retry_limit; }
int LoopConfig::summarizer_call_budget() const { return max_iterations; }

ActionDecision DqnSelector::choose(const Eigen::VectorXd* state, const InstructionSet& candidates) {
  if (state == nullptr) throw ShapeError("DQN selection needs a state vector");
  return decide(net_.scores(*state), candidates);
}

ActionDecision forced_acceptance(const InstructionSet& candidates) {
  const auto n = static_cast<Eigen::Index>(candidates.size());
  if (n == 0) throw ShapeError("no instruction samples to choose from");
  ActionDecision d;
  d.scores = Eigen::VectorXd::Constant(n + 1, 1.0 / static_cast<double>(n + 1));
  d.combined.resize(n);
  Eigen::VectorXd conf(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    conf[i] = candidates.samples[static_cast<std::size_t>(i)].confidence;
    d.combined[i] = d.scores[i] * conf[i];
  }
  const auto best = static_cast<std::size_t>(argmax_lowest(conf));
  d.choice = Accept{best, candidates.samples[best]};
  return d;
}

ActionDecision ConfidenceSelector::choose(const Eigen::VectorXd*, const InstructionSet& candidates) {
  return forced_acceptance(candidates);
}

namespace {

class CountingBackend final : public LlmBackend {
 public:
  CountingBackend(LlmBackend& inner, std::string role, int& counter, std::vector<CallRecord>* log)
      : inner_(inner), role_(std::move(role)), counter_(counter), log_(log) {}

  std::string complete(const std::string& prompt) override {
    ++counter_;
    std::string reply = inner_.complete(prompt);
    if (log_) log_->push_back({role_, prompt, reply});
    return reply;
  }
  [[nodiscard]] std::string identity() const override { return inner_.identity(); }

 private:
  LlmBackend& inner_;
  std::string role_;
  int& counter_;
  std::vector<CallRecord>* log_;
};

std::optional<BoundingBox> box_in_text(const std::string& text) {
  static const std::regex pattern(
      R"(\[?\s*(-?\d+(?:\.\d+)?)\s*,\s*(-?\d+(?:\.\d+)?)\s*,\s*(-?\d+(?:\.\d+)?)\s*,\s*(-?\d+(?:\.\d+)?)\s*\]?)");
  std::smatch m;
  if (!std::regex_search(text, m, pattern)) return std::nullopt;
  BoundingBox b{std::stod(m[1]), std::stod(m[2]), std::stod(m[3]), std::stod(m[4])};
  if (!b.valid()) return std::nullopt;
  return b;
}

Answer answer_from_text(TaskKind task, const std::string& text) {
  if (task == TaskKind::vqa) return text.empty() ? Answer::none() : Answer::from_text(text);
  if (auto box = box_in_text(text)) return Answer::from_box(*box);
  return Answer::none();
}

bool holds_patch(const RuntimeValue* v) {
  if (v == nullptr) return false;
  if (std::holds_alternative<Patch>(*v)) return true;
  const auto* list = std::get_if<PatchList>(v);
  return list && !list->empty();
}

EpisodeResult run_core(const Query& q, const EpisodeContext& ctx, const EpisodeBackends& backends,
                       InstructionSelector& selector, bool keep_states) {
  if (!ctx.prompts || !ctx.embedder) throw ConfigError("episode context is missing prompts or embedder");
  if (!backends.planner || !backends.coder || !backends.summarizer || !backends.toolkit) {
    throw ConfigError("episode backends are incomplete");
  }
  const LoopConfig& cfg = ctx.loop;
  cfg.validate();
  validate(q);

  EpisodeResult r;
  std::vector<CallRecord>* log = ctx.record_calls ? &r.calls : nullptr;
  CountingBackend planner(*backends.planner, "planner", r.planner_calls, log);
  CountingBackend coder(*backends.coder, "coder", r.coder_calls, log);
  CountingBackend summarizer(*backends.summarizer, "summarizer", r.summarizer_calls, log);
  const PromptLibrary& prompts = *ctx.prompts;
  const MetaInfo meta = prompts.meta(q.task);

  try {
    Environment env(backends.toolkit->root(q.image_ref));
    for (int t = 1; t <= cfg.max_iterations; ++t) {
      int rejections = 0;
      InstructionSet set;
      ActionDecision decision;
      while (true) {
        const PlannerResponse plan = generate_instructions(prompts, q, r.memory, meta, t, cfg.n_samples,
                                                           planner, cfg.planner_retry_limit);
        if (const auto* shortcut = std::get_if<FinalAnswerShortcut>(&plan.parsed)) {
          r.planner_shortcut = true;
          r.answer = answer_from_text(q.task, shortcut->text);
          return r;
        }
        set = std::get<InstructionSet>(plan.parsed);
        set.step = t;

        DecisionRecord rec;
        rec.t = t;
        Eigen::VectorXd v;
        if (selector.needs_state() || keep_states) {
          auto sv = std::make_shared<StateVector>(
              embed_state(q, set, r.memory, meta, *ctx.embedder).cast<float>());
          v = sv->cast<double>();
          rec.state = std::move(sv);
        }
        if (rejections >= cfg.max_rejections_per_step) {
          decision = forced_acceptance(set);
          rec.forced = true;
        } else {
          decision = selector.choose(selector.needs_state() ? &v : nullptr, set);
        }
        rec.action = decision.action();
        rec.rejected = decision.rejected();
        rec.explored = decision.explored;
        r.decisions.push_back(std::move(rec));
        if (!decision.rejected()) break;
        ++rejections;
      }

      const Accept accepted = std::get<Accept>(decision.choice);
      ReasonerResult rr = generate_and_execute(prompts, q, accepted.instruction, r.memory, meta, t, coder,
                                               *backends.toolkit, env, cfg.code_retry_limit);
      FeedbackEntry feedback = render_feedback(rr.trace, t);

      StepRecord step;
      step.t = t;
      step.candidates = set;
      step.chosen = accepted.instruction;
      step.chosen_index = accepted.index;
      step.script = rr.script;
      step.code_attempts = rr.attempts;
      step.feedback = feedback.text;
      step.execution_ok = rr.trace.ok();

      r.memory = memory_append(std::move(r.memory), accepted.instruction, rr.script, std::move(feedback),
                               rr.trace.variables());
      r.steps_taken = t;

      bool done = false;
      const RuntimeValue* final_answer = rr.trace.ok() ? rr.trace.final_answer() : nullptr;
      if (q.task == TaskKind::grounding && holds_patch(final_answer)) {
        r.answer = extract_grounding_answer(final_answer);
        done = true;
      } else if (final_answer != nullptr) {
        step.verdict = summarizer.complete(build_summarizer_prompt(prompts, q, r.memory, meta));
        const SummaryVerdict verdict = parse_verdict(*step.verdict);
        if (verdict.is_answer()) {
          r.answer = answer_from_text(q.task, verdict.text);
          done = r.answer.answered();
        }
      }

      if (!done && t == cfg.max_iterations) {
        if (q.task == TaskKind::grounding && holds_patch(env.lookup(kFinalAnswer))) {
          r.answer = extract_grounding_answer(env.lookup(kFinalAnswer));
        } else if (!step.verdict) {
          step.verdict = summarizer.complete(build_summarizer_prompt(prompts, q, r.memory, meta));
          const SummaryVerdict verdict = parse_verdict(*step.verdict);
          if (verdict.is_answer()) r.answer = answer_from_text(q.task, verdict.text);
        }
      }
      r.steps.push_back(std::move(step));
      if (done) break;
    }
  } catch (const BackendUnavailable& e) {
    r.answer = Answer::none();
    r.error = fmt::format("backend unavailable: {}", e.what());
  } catch (const PlannerParseError& e) {
    r.answer = Answer::none();
    r.error = fmt::format("planner output unusable: {}", e.what());
  } catch (const ToolkitUnavailable& e) {
    r.answer = Answer::none();
    r.error = fmt::format("toolkit unavailable: {}", e.what());
  }
  return r;
}

class TrainingSelector final : public InstructionSelector {
 public:
  explicit TrainingSelector(DqnAgent& agent) : agent_(agent) {}
  ActionDecision choose(const Eigen::VectorXd* state, const InstructionSet& candidates) override {
    if (state == nullptr) throw ShapeError("DQN selection needs a state vector");
    ++decisions_;
    return agent_.choose(*state, candidates, true);
  }
  [[nodiscard]] int decisions() const { return decisions_; }

 private:
  DqnAgent& agent_;
  int decisions_ = 0;
};

}  // namespace

EpisodeResult run_episode(const Query& q, const EpisodeContext& ctx, const EpisodeBackends& backends,
                          InstructionSelector& selector) {
  return run_core(q, ctx, backends, selector, false);
}

EpisodeRewards episode_rewards(const EpisodeResult& episode, double m, bool related,
                               const RewardParams& params) {
  EpisodeRewards out;
  const auto& ds = episode.decisions;
  out.per_decision.resize(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const DecisionRecord& d = ds[i];
    const bool last = i + 1 == ds.size();
    if (last) {
      out.per_decision[i] = step_increment(d.t, true, m, related, params);
    } else if (d.rejected) {
      out.per_decision[i] = -static_cast<double>(d.t);
    } else {
      out.per_decision[i] = step_increment(d.t, false, m, related, params);
    }
  }
  const int final_t = ds.empty() ? 1 : ds.back().t;
  for (int t = 1; t < final_t; ++t) out.trace = step_reward(std::move(out.trace), t, false, m, related, params);
  out.trace = step_reward(std::move(out.trace), final_t, true, m, related, params);
  return out;
}

EpisodeResult run_training_episode(const LabeledQuery& example, const EpisodeContext& ctx,
                                   const EpisodeBackends& backends, DqnAgent& agent) {
  validate(example);
  TrainingSelector selector(agent);
  EpisodeResult r = run_core(example.query, ctx, backends, selector, true);

  const double m = answer_metric(r.answer, example.gold, example.query.task);
  const bool related = r.answer.answered() && answer_related(m, example.query.task);
  EpisodeRewards rewards = episode_rewards(r, related ? m : 0.0, related, agent.params().reward);

  for (std::size_t i = 0; i < r.decisions.size(); ++i) {
    const bool terminal = i + 1 == r.decisions.size();
    Transition tr;
    tr.state = r.decisions[i].state;
    tr.action = r.decisions[i].action;
    tr.reward = rewards.per_decision[i];
    tr.terminal = terminal;
    if (!terminal) tr.next_state = r.decisions[i + 1].state;
    agent.record(std::move(tr));
  }
  for (int k = 0; k < selector.decisions(); ++k) agent.maybe_train();
  r.reward_trace = std::move(rewards.trace);
  return r;
}

TrainingResult train(std::span<const LabeledQuery> dataset, const EpisodeContext& ctx,
                     const BackendFactory& factory, const TrainingConfig& config,
                     const std::function<void(std::size_t, double)>& progress) {
  if (dataset.empty()) throw ConfigError("training dataset is empty");
  for (const auto& row : dataset) validate(row);
  config.loop.validate();

  DqnAgent agent(make_controller_network(config.loop.n_samples, config.seed), config.dqn,
                 mix_seed(config.seed, 1));
  Rng shuffle_rng(mix_seed(config.seed, 2));
  std::vector<std::size_t> order(dataset.size());
  auto reshuffle = [&] {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(uniform_index(shuffle_rng, i))]);
    }
  };
  reshuffle();

  const long per_episode = static_cast<long>(config.loop.max_iterations) * config.loop.max_rejections_per_step;
  TrainingResult result;
  std::size_t pos = 0;
  for (std::size_t episode = 0; episode < config.max_episodes; ++episode) {
    if (agent.observations() + per_episode > config.max_observations) break;
    if (pos == order.size()) {
      reshuffle();
      pos = 0;
    }
    const LabeledQuery& row = dataset[order[pos++]];
    const EpisodeBackends backends = factory(row, mix_seed(config.seed, 1000 + episode));
    const EpisodeResult r = run_training_episode(row, ctx, backends, agent);
    const double reward = r.reward_trace->current();
    result.episode_rewards.push_back(reward);
    if (progress) progress(episode, reward);
    if (has_converged(result.episode_rewards, config.convergence_window, config.convergence_windows,
                      config.convergence_tolerance)) {
      result.converged = true;
      break;
    }
  }
  result.observations = agent.observations();
  result.checkpoint = Checkpoint{agent.network(), config.loop.n_samples, config.seed};
  return result;
}

std::vector<nlohmann::ordered_json> episode_trace(const std::string& id, const EpisodeResult& r) {
  std::vector<nlohmann::ordered_json> lines;
  for (const auto& step : r.steps) {
    nlohmann::ordered_json line;
    line["id"] = id;
    const auto record = step_record(r.memory, step.t);
    for (const auto& [k, v] : record.items()) line[k] = v;
    line["chosen_index"] = step.chosen_index;
    auto candidates = nlohmann::ordered_json::array();
    for (const auto& c : step.candidates.samples) {
      candidates.push_back({{"text", c.text}, {"confidence", c.confidence}});
    }
    line["candidates"] = std::move(candidates);
    line["code_attempts"] = step.code_attempts;
    line["execution_ok"] = step.execution_ok;
    if (step.verdict) line["summarizer"] = *step.verdict;
    lines.push_back(std::move(line));
  }
  nlohmann::ordered_json summary;
  summary["id"] = id;
  summary["t"] = r.steps_taken + 1;
  summary["final"] = true;
  summary["answered"] = r.answer.answered();
  summary["answer"] = answer_text(r.answer);
  summary["steps"] = r.steps_taken;
  summary["decisions"] = r.decisions.size();
  summary["planner_calls"] = r.planner_calls;
  summary["coder_calls"] = r.coder_calls;
  summary["summarizer_calls"] = r.summarizer_calls;
  if (r.error) summary["error"] = *r.error;
  if (!r.calls.empty()) {
    auto calls = nlohmann::ordered_json::array();
    for (const auto& c : r.calls) {
      calls.push_back({{"role", c.role}, {"prompt", c.prompt}, {"completion", c.completion}});
    }
    summary["calls"] = std::move(calls);
  }
  lines.push_back(std::move(summary));
  return lines;
}

}  // namespace hydra
