#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hydra/interpreter.hpp"
#include "hydra/llm.hpp"
#include "hydra/memory.hpp"
#include "hydra/prompt_template.hpp"

namespace hydra {

std::string build_code_prompt(const PromptLibrary& prompts, const Query& q,
                              const InstructionSample& chosen, const StateMemory& mem,
                              const MetaInfo& meta, int t);

struct ReasonerResult {
  ExecutionTrace trace;
  std::string script;  // source of the last attempt, right-trimmed
  int attempts = 0;
};

/// Prompts for code, parses and runs it; parse failures and execution errors
/// are fed back in a new prompt, up to `retry_limit` attempts. The last
/// attempt's trace is returned whether or not it succeeded. `env` advances
/// only on a successful run. BackendUnavailable propagates.
ReasonerResult generate_and_execute(const PromptLibrary& prompts, const Query& q,
                                    const InstructionSample& chosen, const StateMemory& mem,
                                    const MetaInfo& meta, int t, LlmBackend& backend,
                                    PerceptionToolkit& toolkit, Environment& env,
                                    int retry_limit = 3);

}  // namespace hydra
