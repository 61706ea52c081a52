#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hydra/types.hpp"

namespace hydra {

using VariableDetail = std::pair<std::string, std::string>;

/// Per-episode history s^{0:t-1}. One entry per completed step in each of the
/// feedback, instruction and script histories; variables keep the order in
/// which each name was first assigned.
class StateMemory {
 public:
  [[nodiscard]] int steps() const { return static_cast<int>(feedback_.size()); }
  [[nodiscard]] int next_step() const { return steps() + 1; }
  [[nodiscard]] bool empty() const { return feedback_.empty(); }

  [[nodiscard]] const std::vector<FeedbackEntry>& feedback() const { return feedback_; }
  [[nodiscard]] const std::vector<InstructionSample>& instructions() const {
    return instructions_;
  }
  [[nodiscard]] const std::vector<std::string>& scripts() const { return scripts_; }
  [[nodiscard]] const std::vector<VariableDetail>& variables() const { return variables_; }

  friend StateMemory memory_append(StateMemory mem, const InstructionSample& chosen,
                                   std::string script, FeedbackEntry feedback,
                                   std::span<const VariableDetail> variables);

 private:
  std::vector<FeedbackEntry> feedback_;
  std::vector<InstructionSample> instructions_;
  std::vector<std::string> scripts_;
  std::vector<VariableDetail> variables_;
};

/// Returns `mem` grown by one step. Throws StateCorruption unless
/// feedback.step == mem.next_step(). Reassigned variables keep their original
/// position and take the new value.
StateMemory memory_append(StateMemory mem, const InstructionSample& chosen, std::string script,
                          FeedbackEntry feedback, std::span<const VariableDetail> variables = {});

struct RenderedMemory {
  std::string instruction_history;  // "1. ..." per line
  std::string code_history;         // scripts in order
  std::string feedback_history;     // feedback texts joined by newline
  std::string variable_details;     // "name: value" per line
};

RenderedMemory memory_render(const StateMemory& mem);

/// One trace-log record for completed step t (1-based):
/// {t, instruction, confidence, script, feedback, variables}.
nlohmann::ordered_json step_record(const StateMemory& mem, int t);

}  // namespace hydra
