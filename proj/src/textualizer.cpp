#include "hydra/textualizer.hpp"

#include <algorithm>
#include <cctype>

#include <fmt/format.h>

#include "hydra/error.hpp"

namespace hydra {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

const std::string& text_of(const TraceEvent& e) {
  if (const auto* s = std::get_if<std::string>(&e.value)) return *s;
  throw TemplateError(fmt::format("{} event for '{}' does not hold text", e.skill, e.target));
}

const Patch& patch_of(const TraceEvent& e) {
  if (const auto* p = std::get_if<Patch>(&e.value)) return *p;
  throw TemplateError(fmt::format("{} event for '{}' does not hold a patch", e.skill, e.target));
}

std::string render_find(const TraceEvent& e) {
  const auto* list = std::get_if<PatchList>(&e.value);
  if (!list) throw TemplateError("find event without a patch list");
  if (list->empty()) return fmt::format("Detection result: no {} has been detected.", e.object_name);
  std::string out =
      list->size() == 1
          ? fmt::format("Detection result: Only one {} has been detected in {}.", e.object_name, e.image_name)
          : fmt::format("Detection result: {} {} have been detected in {}.", list->size(), e.object_name,
                        e.image_name);
  for (const auto& p : *list) {
    out += fmt::format("\nDetected bounding box [x1,y1,x2,y2]: {} in {} is {};", p.name, e.image_name,
                       format_box(p.box));
  }
  return out;
}

}  // namespace

std::string render_event(const TraceEvent& e) {
  switch (e.kind) {
    case EventKind::find:
      return render_find(e);
    case EventKind::exists:
      return fmt::format("The existence of {} in image patch {} is: {}.", e.object_name, e.image_name,
                         describe(e.value));
    case EventKind::verify:
      return fmt::format("The verification of {} in {} is: {}", e.category, e.image_name, describe(e.value));
    case EventKind::caption:
      return fmt::format("The caption for image patch {} is: {}.", e.image_name, text_of(e));
    case EventKind::simple_query:
      return fmt::format("The answer for image patch {} in response to the question '{}' is: {}",
                         e.image_name, e.question, text_of(e));
    case EventKind::depth:
      return fmt::format("The median depth for image patch {} is: {}", e.image_name, describe(e.value));
    case EventKind::llm_query:
      return fmt::format("The obtained answer from LLM to the question, {} with the additional context of {} is: {}",
                         e.question, e.context, text_of(e));
    case EventKind::sort:
      return "The patches list has been sorted from left to right (horizontal). Now, the first patch in "
             "the list corresponds to the leftest position, while the last one corresponds to the "
             "rightest position.";
    case EventKind::middle:
      return fmt::format("The {} is the middle one in the list.", patch_of(e).name);
    case EventKind::closest:
      return fmt::format("The {} is the closest one to {}.", patch_of(e).name, e.anchor_name);
    case EventKind::farthest:
      return fmt::format("The {} is the farthest one to {}.", patch_of(e).name, e.anchor_name);
    case EventKind::variable:
      return fmt::format("{}: {}", e.target, describe(e.value));
  }
  throw TemplateError(fmt::format("no feedback template for event kind {}", static_cast<int>(e.kind)));
}

FeedbackEntry render_feedback(const ExecutionTrace& trace, int step) {
  if (trace.events.empty() && !trace.error) throw TemplateError("empty execution trace");
  std::string text;
  for (const auto& e : trace.events) {
    if (!text.empty()) text += '\n';
    text += render_event(e);
  }
  if (trace.error) {
    if (!text.empty()) text += '\n';
    text += fmt::format("Execution error at statement {}: {}", trace.error->statement, trace.error->message);
  }
  return FeedbackEntry{step, std::move(text)};
}

SummaryVerdict parse_verdict(std::string_view reply) {
  std::string t = trim(reply);
  std::string low = t;
  std::transform(low.begin(), low.end(), low.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (low.empty() || low == "continue") return SummaryVerdict::keep_going();
  return SummaryVerdict::answer(std::move(t));
}

std::string build_summarizer_prompt(const PromptLibrary& prompts, const Query& q,
                                    const StateMemory& mem, const MetaInfo& meta) {
  const auto r = memory_render(mem);
  return prompts.summarizer.render({
      {"META_INFO", meta.render()},
      {"QUERY_TYPE", std::string(query_type_label(q.task))},
      {"INSTRUCTION_HISTORY", r.instruction_history},
      {"CODE_HISTORY", r.code_history},
      {"VARIABLE_AND_DETAILS", r.variable_details},
      {"FEEDBACK_HISTORY", r.feedback_history},
      {"QUERY", q.text},
  });
}

SummaryVerdict summarize(const PromptLibrary& prompts, const Query& q, const StateMemory& mem,
                         const MetaInfo& meta, LlmBackend& backend) {
  return parse_verdict(backend.complete(build_summarizer_prompt(prompts, q, mem, meta)));
}

Answer extract_grounding_answer(const RuntimeValue* final_answer) {
  if (final_answer == nullptr) return Answer::none();
  if (const auto* p = std::get_if<Patch>(final_answer)) return Answer::from_box(p->box);
  if (const auto* l = std::get_if<PatchList>(final_answer); l && !l->empty()) {
    return Answer::from_box(l->front().box);
  }
  return Answer::none();
}

}  // namespace hydra
