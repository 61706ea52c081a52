#include "hydra/memory.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "hydra/error.hpp"

namespace hydra {

namespace {

std::string rstrip(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == ' ' || s.back() == '\r' ||
                        s.back() == '\t')) {
    s.pop_back();
  }
  return s;
}

}  // namespace

StateMemory memory_append(StateMemory mem, const InstructionSample& chosen, std::string script,
                          FeedbackEntry feedback, std::span<const VariableDetail> variables) {
  const auto n = mem.feedback_.size();
  if (mem.instructions_.size() != n || mem.scripts_.size() != n) {
    throw StateCorruption("memory histories are out of lockstep");
  }
  if (feedback.step != mem.next_step()) {
    throw StateCorruption(fmt::format("feedback for step {} appended at step {}", feedback.step,
                                      mem.next_step()));
  }
  if (feedback.text.empty()) throw StateCorruption("feedback text is empty");

  mem.feedback_.push_back(std::move(feedback));
  mem.instructions_.push_back(chosen);
  mem.scripts_.push_back(rstrip(std::move(script)));
  for (const auto& [name, value] : variables) {
    auto it = std::find_if(mem.variables_.begin(), mem.variables_.end(),
                           [&](const VariableDetail& v) { return v.first == name; });
    if (it == mem.variables_.end()) {
      mem.variables_.emplace_back(name, value);
    } else {
      it->second = value;
    }
  }
  return mem;
}

RenderedMemory memory_render(const StateMemory& mem) {
  RenderedMemory out;
  for (std::size_t i = 0; i < mem.instructions().size(); ++i) {
    if (i) out.instruction_history += '\n';
    out.instruction_history += fmt::format("{}. {}", i + 1, mem.instructions()[i].text);
  }
  for (std::size_t i = 0; i < mem.scripts().size(); ++i) {
    if (i) out.code_history += '\n';
    out.code_history += mem.scripts()[i];
  }
  for (std::size_t i = 0; i < mem.feedback().size(); ++i) {
    if (i) out.feedback_history += '\n';
    out.feedback_history += mem.feedback()[i].text;
  }
  for (std::size_t i = 0; i < mem.variables().size(); ++i) {
    if (i) out.variable_details += '\n';
    out.variable_details += mem.variables()[i].first + ": " + mem.variables()[i].second;
  }
  return out;
}

nlohmann::ordered_json step_record(const StateMemory& mem, int t) {
  if (t < 1 || t > mem.steps()) {
    throw StateCorruption(fmt::format("no completed step {} in memory", t));
  }
  const auto i = static_cast<std::size_t>(t - 1);
  nlohmann::ordered_json variables = nlohmann::ordered_json::object();
  for (const auto& [name, value] : mem.variables()) variables[name] = value;
  return {{"t", t},
          {"instruction", mem.instructions()[i].text},
          {"confidence", mem.instructions()[i].confidence},
          {"script", mem.scripts()[i]},
          {"feedback", mem.feedback()[i].text},
          {"variables", std::move(variables)}};
}

}  // namespace hydra
