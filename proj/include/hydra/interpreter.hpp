#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hydra/memory.hpp"
#include "hydra/perception.hpp"
#include "hydra/runtime.hpp"
#include "hydra/script.hpp"

namespace hydra {

/// One feedback template per kind; crop, count, literals, copies and
/// indexing all render as plain variables.
enum class EventKind {
  find,
  exists,
  verify,
  caption,
  simple_query,
  depth,
  llm_query,
  sort,
  middle,
  closest,
  farthest,
  variable,
};

struct TraceEvent {
  std::size_t statement = 1;  // 1-based
  std::string target;
  std::string skill;  // call name, or "literal" / "copy" / "index"
  EventKind kind = EventKind::variable;
  RuntimeValue value;

  std::string image_name;   // receiver patch
  std::string object_name;  // find/exists/verify subject
  std::string category;     // verify_property attribute
  std::string question;     // simple_query / llm_query
  std::string context;      // llm_query
  std::string anchor_name;  // closest / farthest
};

struct ExecutionError {
  std::size_t statement = 1;  // 1-based
  std::string message;
};

struct ExecutionTrace {
  std::vector<TraceEvent> events;
  std::map<std::string, RuntimeValue> env;  // names assigned by this script
  std::optional<ExecutionError> error;

  [[nodiscard]] bool ok() const { return !error.has_value(); }
  /// final_answer if this script assigned it.
  [[nodiscard]] const RuntimeValue* final_answer() const;
  /// (name, described value) per event, in execution order.
  [[nodiscard]] std::vector<VariableDetail> variables() const;
};

/// Variables that live across the steps of one episode, plus per-object
/// counters that keep patch display names unique.
class Environment {
 public:
  explicit Environment(Patch root);

  [[nodiscard]] const Patch& root() const { return root_; }
  [[nodiscard]] const std::map<std::string, RuntimeValue>& values() const { return values_; }
  [[nodiscard]] const RuntimeValue* lookup(const std::string& name) const;

 private:
  friend ExecutionTrace interpret(const ActionScript&, PerceptionToolkit&, Environment&);

  Patch root_;
  std::map<std::string, RuntimeValue> values_;
  std::map<std::string, int> counters_;
};

/// Runs the statements in order. Any runtime failure (unknown name, bad
/// arity, type mismatch, toolkit error) stops execution and is recorded in
/// the trace. `env` is updated only when the whole script succeeds.
ExecutionTrace interpret(const ActionScript& script, PerceptionToolkit& toolkit, Environment& env);

/// Fresh environment with `root` bound to image_patch.
ExecutionTrace interpret(const ActionScript& script, PerceptionToolkit& toolkit, const Patch& root);

/// Every callable name the interpreter knows, sorted.
const std::vector<std::string>& skill_registry();

}  // namespace hydra
