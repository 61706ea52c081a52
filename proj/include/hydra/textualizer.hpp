#pragma once

#include <string>
#include <string_view>

#include "hydra/interpreter.hpp"
#include "hydra/llm.hpp"
#include "hydra/memory.hpp"
#include "hydra/prompt_template.hpp"
#include "hydra/types.hpp"

namespace hydra {

/// Feedback lines for one event. A find event yields the detection summary
/// followed by one bounding-box line per patch. Throws TemplateError for an
/// event kind outside the closed set.
std::string render_event(const TraceEvent& event);

/// All event renderings in execution order joined by newlines; a failed
/// trace ends with "Execution error at statement k: message". Throws
/// TemplateError when there is nothing to render.
FeedbackEntry render_feedback(const ExecutionTrace& trace, int step);

struct SummaryVerdict {
  enum class Kind { answer, cont };

  Kind kind = Kind::cont;
  std::string text;  // trimmed reply when kind == answer

  static SummaryVerdict answer(std::string text) { return {Kind::answer, std::move(text)}; }
  static SummaryVerdict keep_going() { return {}; }
  [[nodiscard]] bool is_answer() const { return kind == Kind::answer; }
};

/// "continue" in any case and surrounding whitespace, or an empty reply,
/// means continue; anything else is the answer.
SummaryVerdict parse_verdict(std::string_view reply);

std::string build_summarizer_prompt(const PromptLibrary& prompts, const Query& q,
                                    const StateMemory& mem, const MetaInfo& meta);

/// BackendUnavailable propagates.
SummaryVerdict summarize(const PromptLibrary& prompts, const Query& q, const StateMemory& mem,
                         const MetaInfo& meta, LlmBackend& backend);

/// Box of a Patch final answer, or of the first element of a PatchList;
/// unanswered for anything else, including null.
Answer extract_grounding_answer(const RuntimeValue* final_answer);

}  // namespace hydra
