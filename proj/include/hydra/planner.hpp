#pragma once

#include <string>
#include <string_view>
#include <variant>

#include "hydra/llm.hpp"
#include "hydra/memory.hpp"
#include "hydra/prompt_template.hpp"
#include "hydra/types.hpp"

namespace hydra {

/// The planner answered the query outright instead of proposing steps.
struct FinalAnswerShortcut {
  std::string text;
  bool operator==(const FinalAnswerShortcut&) const = default;
};

using ParsedPlan = std::variant<InstructionSet, FinalAnswerShortcut>;

struct PlannerResponse {
  std::string raw;
  ParsedPlan parsed;
  int attempts = 1;
};

std::string build_planner_prompt(const PromptLibrary& prompts, const Query& q,
                                 const StateMemory& mem, const MetaInfo& meta, int t, int n);

/// Accepts numbered or bulleted lines "<text> (probability: p)" or
/// "<text> | p"; the first `n` such lines form the set, confidences clamped to
/// [0,1]. A line starting "Final answer:" (any case) wins over instructions.
/// Throws PlannerParseError when neither is found.
ParsedPlan parse_instruction_list(std::string_view raw, int n, int step = 1);

/// Inverse of parse_instruction_list for an InstructionSet.
std::string format_instruction_list(const InstructionSet& set);

/// Queries the backend and parses, re-querying on parse failures up to
/// `retry_limit` attempts in total. BackendUnavailable propagates.
PlannerResponse generate_instructions(const PromptLibrary& prompts, const Query& q,
                                      const StateMemory& mem, const MetaInfo& meta, int t, int n,
                                      LlmBackend& backend, int retry_limit = 3);

}  // namespace hydra
