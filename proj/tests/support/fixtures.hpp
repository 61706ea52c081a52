#pragma once

#include <memory>
#include <string>
#include <vector>

#include "hydra/controller.hpp"
#include "hydra/interpreter.hpp"
#include "hydra/llm.hpp"
#include "hydra/orchestrator.hpp"
#include "hydra/perception.hpp"
#include "hydra/planner.hpp"
#include "hydra/prompt_template.hpp"

namespace hydra::testing {

inline PromptLibrary shipped_prompts() { return PromptLibrary::load(HYDRA_TEMPLATES_DIR); }

/// Two girls side by side; only the right one holds an umbrella.
inline Scene fig3_scene() {
  Scene s;
  s.id = "fig3";
  s.width = 100;
  s.height = 60;
  s.caption = "two girls standing outside";
  SceneObject left{"girl", {10, 10, 20, 30}, {{"color", "red"}}, 4.0, {}};
  left.qa[normalize_question("what is the girl holding?")] = "nothing";
  SceneObject right{"girl", {50, 10, 60, 30}, {{"color", "blue"}}, 6.0, {}};
  right.qa[normalize_question("what is the girl holding?")] = "umbrella";
  SceneObject bus{"bus", {70, 20, 95, 50}, {{"color", "yellow"}}, 9.0, {}};
  s.objects = {right, left, bus};
  s.qa[normalize_question("what color is the bus?")] = "yellow";
  s.qa[llm_query_key("What do people carry when it rains?", "weather")] = "umbrella";
  return s;
}

inline std::string plan_reply(const std::vector<std::pair<std::string, double>>& items) {
  InstructionSet set;
  for (const auto& [text, p] : items) set.samples.push_back({text, p});
  return format_instruction_list(set);
}

/// Five candidates, the first with the highest confidence.
inline std::string plan_with_lead(const std::string& lead) {
  return plan_reply({{lead, 0.9},
                     {"Describe the image", 0.3},
                     {"Check whether a bus exists", 0.2},
                     {"Measure the depth of the image", 0.2},
                     {"Ask an LLM about the scene", 0.1}});
}

class RejectingSelector final : public InstructionSelector {
 public:
  [[nodiscard]] bool needs_state() const override { return false; }
  ActionDecision choose(const Eigen::VectorXd*, const InstructionSet& candidates) override {
    const auto n = static_cast<Eigen::Index>(candidates.size());
    ActionDecision d;
    d.scores = Eigen::VectorXd::Zero(n + 1);
    d.scores[n] = 1.0;
    d.combined = Eigen::VectorXd::Zero(n);
    d.choice = Reject{};
    ++calls;
    return d;
  }
  int calls = 0;
};

/// Uniform choice among the instructions; never rejects.
class RandomSelector final : public InstructionSelector {
 public:
  explicit RandomSelector(std::uint64_t seed) : rng_(seed) {}
  [[nodiscard]] bool needs_state() const override { return false; }
  ActionDecision choose(const Eigen::VectorXd*, const InstructionSet& candidates) override {
    ActionDecision d = forced_acceptance(candidates);
    const auto i = static_cast<std::size_t>(uniform_index(rng_, candidates.size()));
    d.choice = Accept{i, candidates.samples[i]};
    return d;
  }

 private:
  Rng rng_;
};

struct ScriptedEpisode {
  std::shared_ptr<ScriptedBackend> planner, coder, summarizer;
  std::shared_ptr<MockToolkit> toolkit;

  EpisodeBackends backends() const { return {planner, coder, summarizer, toolkit}; }
};

inline ScriptedEpisode scripted(std::vector<std::string> planner, std::vector<std::string> coder,
                                std::vector<std::string> summarizer, std::vector<Scene> scenes,
                                bool repeat_last = false) {
  ScriptedEpisode e;
  e.planner = std::make_shared<ScriptedBackend>(std::move(planner), "planner", repeat_last);
  e.coder = std::make_shared<ScriptedBackend>(std::move(coder), "coder", repeat_last);
  e.summarizer = std::make_shared<ScriptedBackend>(std::move(summarizer), "summarizer", repeat_last);
  e.toolkit = std::make_shared<MockToolkit>(std::move(scenes));
  return e;
}

}  // namespace hydra::testing
