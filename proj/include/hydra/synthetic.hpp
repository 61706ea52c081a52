#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hydra/orchestrator.hpp"
#include "hydra/perception.hpp"

namespace hydra {

/// Closed-loop benchmark: each query has one question kind, the mock planner
/// always proposes the same five instruction templates in this order, and
/// only the instruction whose index equals the kind yields the evidence the
/// mock summarizer needs.
enum class SyntheticKind { existence = 0, count = 1, color = 2, caption = 3, depth = 4 };

inline constexpr int kSyntheticInstructions = 5;

struct SyntheticDataset {
  std::vector<Scene> scenes;
  std::vector<LabeledQuery> rows;
  std::vector<SyntheticKind> kinds;  // parallel to rows
};

/// `count` scenes with one query each, ids "{prefix}{k}". Deterministic in
/// `seed`.
SyntheticDataset make_synthetic_dataset(std::size_t count, std::uint64_t seed,
                                        const std::string& prefix = "syn");

std::string synthetic_query_text(SyntheticKind kind, const std::string& object);
/// Kind and object named by a synthetic query; nullopt for other text.
std::optional<std::pair<SyntheticKind, std::string>> parse_synthetic_query(const std::string& text);

/// The five instruction texts, in planner order.
std::vector<std::string> synthetic_instructions(const std::string& object);
/// Action script for one synthetic instruction; empty when unrecognised.
std::string synthetic_script(const std::string& instruction);

struct SyntheticPlannerConfig {
  double confidence_lo = 0.5;
  double confidence_hi = 0.95;
  double correct_on_top = 0.4;  // chance the right instruction has the highest confidence
};

/// Planner reply for one call: the five instructions with fresh confidences.
std::string synthetic_planner_reply(SyntheticKind kind, const std::string& object, Rng& rng,
                                    const SyntheticPlannerConfig& config);

/// Answer found in the execution feedback of a summarizer prompt, or
/// "continue" when the needed evidence line is absent.
std::string synthetic_summary(SyntheticKind kind, const std::string& object, const std::string& prompt);

/// Rule-based planner / coder / summarizer over a shared mock toolkit.
BackendFactory synthetic_backend_factory(std::shared_ptr<MockToolkit> toolkit,
                                         SyntheticPlannerConfig config = {});

}  // namespace hydra
