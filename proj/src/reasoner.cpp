#include "hydra/reasoner.hpp"

#include <fmt/format.h>

#include "hydra/error.hpp"

namespace hydra {

namespace {

std::string rtrim(std::string s) {
  const auto e = s.find_last_not_of(" \t\r\n");
  s.erase(e == std::string::npos ? 0 : e + 1);
  return s;
}

}  // namespace

std::string build_code_prompt(const PromptLibrary& prompts, const Query& q,
                              const InstructionSample& chosen, const StateMemory& mem,
                              const MetaInfo& meta, int t) {
  if (t < 1) throw ConfigError("step numbers start at 1");
  const auto r = memory_render(mem);
  const auto example = prompts.code_examples.find(q.task);
  return prompts.coder.render({
      {"META_INFO", meta.render()},
      {"PYTHON_API_CODE", prompts.api_reference},
      {"EXAMPLE", example == prompts.code_examples.end() ? std::string{} : example->second},
      {"QUERY_TYPE", std::string(query_type_label(q.task))},
      {"QUERY", q.text},
      {"CURRENT_STEP_NUM", std::to_string(t)},
      {"INSTRUCTION_HISTORY", r.instruction_history},
      {"CODE_HISTORY", r.code_history},
      {"VARIABLE_AND_DETAILS", r.variable_details},
      {"FEEDBACK_HISTORY", r.feedback_history},
      {"CURRENT_INSTRUCTION", chosen.text},
  });
}

ReasonerResult generate_and_execute(const PromptLibrary& prompts, const Query& q,
                                    const InstructionSample& chosen, const StateMemory& mem,
                                    const MetaInfo& meta, int t, LlmBackend& backend,
                                    PerceptionToolkit& toolkit, Environment& env, int retry_limit) {
  if (retry_limit < 1) throw ConfigError("code retry limit must be positive");
  const std::string base = build_code_prompt(prompts, q, chosen, mem, meta, t);
  std::string prompt = base;
  ReasonerResult result;
  for (int attempt = 1; attempt <= retry_limit; ++attempt) {
    result.attempts = attempt;
    result.script = rtrim(extract_script(backend.complete(prompt)));
    std::string failure;
    try {
      const ActionScript script = parse_script(result.script);
      result.trace = interpret(script, toolkit, env);
      if (result.trace.ok()) return result;
      failure = fmt::format("Execution error at statement {}: {}", result.trace.error->statement,
                            result.trace.error->message);
    } catch (const ParseError& e) {
      result.trace = ExecutionTrace{};
      result.trace.error = ExecutionError{static_cast<std::size_t>(std::max(e.line(), 1)),
                                          fmt::format("syntax error: {}", e.what())};
      failure = fmt::format("Syntax error: {}", e.what());
    }
    prompt = fmt::format("{}\n\nYour previous code was:\n{}\nIt failed with: {}\nReturn corrected code.",
                         base, result.script, failure);
  }
  return result;
}

}  // namespace hydra
