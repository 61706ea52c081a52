#include "hydra/planner.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <optional>
#include <regex>

#include <fmt/format.h>

#include "hydra/error.hpp"

namespace hydra {

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// Drops "1.", "2)", "-", "*" list markers.
std::string strip_list_marker(const std::string& line) {
  static const std::regex marker(R"(^\s*(?:\d+\s*[.):]|[-*•])\s*)");
  return std::regex_replace(line, marker, "", std::regex_constants::format_first_only);
}

std::optional<InstructionSample> parse_line(const std::string& line) {
  static const std::regex paren(
      R"(^(.*\S)\s*\(\s*(?:probability|prob|p|confidence)\s*[:=]\s*([-+]?(?:\d+\.?\d*|\.\d+))\s*\)\s*\.?$)",
      std::regex::icase);
  static const std::regex bar(R"(^(.*\S)\s*\|\s*([-+]?(?:\d+\.?\d*|\.\d+))\s*$)");
  std::smatch m;
  if (!std::regex_match(line, m, paren) && !std::regex_match(line, m, bar)) return std::nullopt;
  std::string text = trim(m[1].str());
  if (text.empty()) return std::nullopt;
  double p = std::stod(m[2].str());
  if (!std::isfinite(p)) return std::nullopt;
  return InstructionSample{std::move(text), std::clamp(p, 0.0, 1.0)};
}

}  // namespace

std::string build_planner_prompt(const PromptLibrary& prompts, const Query& q,
                                 const StateMemory& mem, const MetaInfo& meta, int t, int n) {
  if (t < 1 || n < 1) throw ConfigError("planner prompt needs t >= 1 and n >= 1");
  const auto rendered = memory_render(mem);
  auto example = prompts.planner_examples.find(q.task);
  return prompts.planner.render({
      {"META_INFO", meta.render()},
      {"EXAMPLE", example == prompts.planner_examples.end() ? std::string{} : example->second},
      {"QUERY_TYPE", std::string(query_type_label(q.task))},
      {"CURRENT_STEP_NUM", std::to_string(t)},
      {"INSTRUCTION_HISTORY", rendered.instruction_history},
      {"CODE_HISTORY", rendered.code_history},
      {"VARIABLE_AND_DETAILS", rendered.variable_details},
      {"FEEDBACK_HISTORY", rendered.feedback_history},
      {"QUERY", q.text},
      {"NUMBER_OF_SAMPLES", std::to_string(n)},
  });
}

ParsedPlan parse_instruction_list(std::string_view raw, int n, int step) {
  InstructionSet set;
  set.step = step;
  std::size_t pos = 0;
  while (pos <= raw.size()) {
    auto end = raw.find('\n', pos);
    if (end == std::string_view::npos) end = raw.size();
    const std::string line = trim(raw.substr(pos, end - pos));
    pos = end + 1;
    if (line.empty()) continue;

    const std::string body = trim(strip_list_marker(line));
    static constexpr std::string_view kFinal = "final answer:";
    if (lower(body.substr(0, kFinal.size())) == kFinal) {
      std::string answer = trim(std::string_view(body).substr(kFinal.size()));
      if (!answer.empty()) return FinalAnswerShortcut{std::move(answer)};
      continue;
    }
    if (static_cast<int>(set.samples.size()) < n) {
      if (auto sample = parse_line(body)) set.samples.push_back(std::move(*sample));
    }
  }
  if (static_cast<int>(set.samples.size()) < n) {
    throw PlannerParseError(
        fmt::format("expected {} instructions, parsed {}", n, set.samples.size()));
  }
  return set;
}

std::string format_instruction_list(const InstructionSet& set) {
  std::string out;
  for (std::size_t i = 0; i < set.samples.size(); ++i) {
    out += fmt::format("{}. {} (probability: {})\n", i + 1, set.samples[i].text,
                       format_number(set.samples[i].confidence));
  }
  return out;
}

PlannerResponse generate_instructions(const PromptLibrary& prompts, const Query& q,
                                      const StateMemory& mem, const MetaInfo& meta, int t, int n,
                                      LlmBackend& backend, int retry_limit) {
  const std::string prompt = build_planner_prompt(prompts, q, mem, meta, t, n);
  std::string last_error;
  for (int attempt = 1; attempt <= std::max(1, retry_limit); ++attempt) {
    std::string request = prompt;
    if (attempt > 1) {
      request += fmt::format(
          "\n\nYour previous response could not be used ({}). Reply with exactly {} numbered "
          "instructions, each followed by (probability: p), or a single 'Final answer:' line.",
          last_error, n);
    }
    std::string raw = backend.complete(request);
    try {
      auto parsed = parse_instruction_list(raw, n, t);
      return {std::move(raw), std::move(parsed), attempt};
    } catch (const PlannerParseError& e) {
      last_error = e.what();
    }
  }
  throw PlannerParseError(
      fmt::format("planner output unparseable after {} attempts: {}", retry_limit, last_error));
}

}  // namespace hydra
