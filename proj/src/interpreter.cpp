#include "hydra/interpreter.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include <fmt/format.h>

#include "hydra/error.hpp"

namespace hydra {

const RuntimeValue* ExecutionTrace::final_answer() const {
  const auto it = env.find(kFinalAnswer);
  return it == env.end() ? nullptr : &it->second;
}

std::vector<VariableDetail> ExecutionTrace::variables() const {
  std::vector<VariableDetail> out;
  out.reserve(events.size());
  for (const auto& e : events) out.emplace_back(e.target, describe(e.value));
  return out;
}

Environment::Environment(Patch root) : root_(std::move(root)) {}

const RuntimeValue* Environment::lookup(const std::string& name) const {
  if (name == kRootPatchName) return nullptr;
  const auto it = values_.find(name);
  return it == values_.end() ? nullptr : &it->second;
}

const std::vector<std::string>& skill_registry() {
  static const std::vector<std::string> names = {
      "caption", "closest",     "compute_depth", "count",           "crop",
      "exists",  "farthest",    "find",          "llm_query",       "middle",
      "simple_query", "sort_horizontal", "verify_property"};
  return names;
}

namespace {

struct Failure {
  std::string message;
};

struct Signature {
  bool method;
  std::size_t arity;
  EventKind kind;
};

const std::map<std::string, Signature>& signatures() {
  static const std::map<std::string, Signature> table = {
      {"find", {true, 1, EventKind::find}},
      {"exists", {true, 1, EventKind::exists}},
      {"verify_property", {true, 2, EventKind::verify}},
      {"caption", {true, 0, EventKind::caption}},
      {"simple_query", {true, 1, EventKind::simple_query}},
      {"compute_depth", {true, 0, EventKind::depth}},
      {"crop", {true, 4, EventKind::variable}},
      {"llm_query", {false, 2, EventKind::llm_query}},
      {"sort_horizontal", {false, 1, EventKind::sort}},
      {"middle", {false, 1, EventKind::middle}},
      {"closest", {false, 2, EventKind::closest}},
      {"farthest", {false, 2, EventKind::farthest}},
      {"count", {false, 1, EventKind::variable}},
  };
  return table;
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

class Executor {
 public:
  Executor(PerceptionToolkit& toolkit, const Environment& env)
      : toolkit_(toolkit), root_(env.root()), scope_(env.values()) {}

  void set_counters(std::map<std::string, int> counters) { counters_ = std::move(counters); }
  std::map<std::string, int>& counters() { return counters_; }
  std::map<std::string, RuntimeValue>& scope() { return scope_; }

  TraceEvent run(const Statement& st, std::size_t number) {
    if (st.target == kRootPatchName) throw Failure{"image_patch cannot be reassigned"};
    TraceEvent ev;
    ev.statement = number;
    ev.target = st.target;
    ev.value = eval(st.expr, &ev);
    scope_[st.target] = ev.value;
    return ev;
  }

 private:
  RuntimeValue variable(const std::string& name) const {
    if (name == kRootPatchName) return root_;
    const auto it = scope_.find(name);
    if (it == scope_.end()) throw Failure{fmt::format("name '{}' is not defined", name)};
    return it->second;
  }

  // `ev` is non-null only for the statement's top-level expression.
  RuntimeValue eval(const Expression& e, TraceEvent* ev) {
    if (const auto* lit = std::get_if<Literal>(&e.node)) {
      if (ev) ev->skill = "literal";
      return std::visit([](const auto& v) -> RuntimeValue { return v; }, lit->value);
    }
    if (const auto* ref = std::get_if<VarRef>(&e.node)) {
      if (ev) ev->skill = "copy";
      return variable(ref->name);
    }
    if (const auto* idx = std::get_if<Index>(&e.node)) {
      if (ev) ev->skill = "index";
      const RuntimeValue v = variable(idx->name);
      const auto* list = std::get_if<PatchList>(&v);
      if (!list) {
        throw Failure{fmt::format("'{}' is a {}, only patch lists can be indexed", idx->name, type_name(v))};
      }
      if (idx->index >= list->size()) {
        throw Failure{fmt::format("index {} out of range for '{}' with {} patches", idx->index,
                                  idx->name, list->size())};
      }
      return (*list)[idx->index];
    }
    return call(std::get<Call>(e.node), ev);
  }

  static const Patch& as_patch(const RuntimeValue& v, const std::string& what) {
    if (const auto* p = std::get_if<Patch>(&v)) return *p;
    throw Failure{fmt::format("{} must be a patch, got {}", what, type_name(v))};
  }
  static const PatchList& as_list(const RuntimeValue& v, const std::string& what) {
    if (const auto* p = std::get_if<PatchList>(&v)) return *p;
    throw Failure{fmt::format("{} must be a patch list, got {}", what, type_name(v))};
  }
  static const std::string& as_text(const RuntimeValue& v, const std::string& what) {
    if (const auto* p = std::get_if<std::string>(&v)) return *p;
    throw Failure{fmt::format("{} must be text, got {}", what, type_name(v))};
  }
  static double as_number(const RuntimeValue& v, const std::string& what) {
    if (const auto* p = std::get_if<double>(&v)) return *p;
    throw Failure{fmt::format("{} must be a number, got {}", what, type_name(v))};
  }

  std::string next_name(const std::string& base) {
    return fmt::format("{}_{}", base, ++counters_[lower(base)]);
  }

  RuntimeValue call(const Call& c, TraceEvent* ev) {
    const auto& table = signatures();
    const auto it = table.find(c.name);
    if (it == table.end()) throw Failure{fmt::format("unknown skill '{}'", c.name)};
    const Signature sig = it->second;
    if (sig.method && !c.receiver) {
      throw Failure{fmt::format("{} must be called on a patch, e.g. image_patch.{}(...)", c.name, c.name)};
    }
    if (!sig.method && c.receiver) {
      throw Failure{fmt::format("{} is a function, not a patch method", c.name)};
    }
    if (c.args.size() != sig.arity) {
      throw Failure{fmt::format("{} takes {} argument{}, got {}", c.name, sig.arity,
                                sig.arity == 1 ? "" : "s", c.args.size())};
    }
    std::vector<RuntimeValue> args;
    args.reserve(c.args.size());
    for (const auto& a : c.args) args.push_back(eval(a, nullptr));

    TraceEvent scratch;
    TraceEvent& out = ev ? *ev : scratch;
    out.skill = c.name;
    out.kind = sig.kind;

    const Patch* self = nullptr;
    Patch receiver;
    if (c.receiver) {
      receiver = as_patch(variable(*c.receiver), fmt::format("receiver '{}'", *c.receiver));
      self = &receiver;
      out.image_name = receiver.name;
    }

    if (c.name == "find") {
      out.object_name = as_text(args[0], "find's object name");
      PatchList found = toolkit_.find(*self, out.object_name);
      for (auto& p : found) p.name = next_name(out.object_name);
      return found;
    }
    if (c.name == "exists") {
      out.object_name = as_text(args[0], "exists' object name");
      return toolkit_.exists(*self, out.object_name);
    }
    if (c.name == "verify_property") {
      out.object_name = as_text(args[0], "verify_property's object name");
      const std::string& attribute = as_text(args[1], "verify_property's attribute");
      out.category = fmt::format("{} {}", attribute, out.object_name);
      return toolkit_.verify_property(*self, out.object_name, attribute);
    }
    if (c.name == "caption") return toolkit_.caption(*self);
    if (c.name == "simple_query") {
      out.question = as_text(args[0], "simple_query's question");
      return toolkit_.simple_query(*self, out.question);
    }
    if (c.name == "compute_depth") return toolkit_.compute_depth(*self);
    if (c.name == "crop") {
      BoundingBox box{as_number(args[0], "x1"), as_number(args[1], "y1"), as_number(args[2], "x2"),
                      as_number(args[3], "y2")};
      Patch p = toolkit_.crop(*self, box);
      p.name = next_name("crop");
      return p;
    }
    if (c.name == "llm_query") {
      out.question = as_text(args[0], "llm_query's question");
      out.context = describe(args[1]);
      return toolkit_.llm_query(out.question, out.context);
    }
    if (c.name == "count") return static_cast<double>(as_list(args[0], "count's argument").size());

    const PatchList& list = as_list(args[0], c.name + "'s first argument");
    if (c.name == "sort_horizontal") {
      PatchList sorted = list;
      std::stable_sort(sorted.begin(), sorted.end(), [](const Patch& a, const Patch& b) {
        if (a.box.x1 != b.box.x1) return a.box.x1 < b.box.x1;
        return a.box.y1 < b.box.y1;
      });
      return sorted;
    }
    if (list.empty()) throw Failure{fmt::format("{} needs a non-empty patch list", c.name)};
    if (c.name == "middle") {
      const Patch& m = list[(list.size() - 1) / 2];
      out.object_name = m.name;
      return m;
    }
    // closest / farthest: by relative depth difference to the anchor.
    const Patch& anchor = as_patch(args[1], c.name + "'s anchor");
    out.anchor_name = anchor.name;
    const double anchor_depth = toolkit_.compute_depth(anchor);
    const bool want_far = c.name == "farthest";
    std::size_t best = 0;
    double best_gap = 0.0;
    for (std::size_t i = 0; i < list.size(); ++i) {
      const double gap = std::abs(toolkit_.compute_depth(list[i]) - anchor_depth);
      if (i == 0 || (want_far ? gap > best_gap : gap < best_gap)) {
        best = i;
        best_gap = gap;
      }
    }
    out.object_name = list[best].name;
    return list[best];
  }

  PerceptionToolkit& toolkit_;
  const Patch& root_;
  std::map<std::string, RuntimeValue> scope_;
  std::map<std::string, int> counters_;
};

}  // namespace

ExecutionTrace interpret(const ActionScript& script, PerceptionToolkit& toolkit, Environment& env) {
  ExecutionTrace trace;
  Executor exec(toolkit, env);
  exec.set_counters(env.counters_);
  for (std::size_t i = 0; i < script.statements.size(); ++i) {
    const Statement& st = script.statements[i];
    try {
      TraceEvent ev = exec.run(st, i + 1);
      trace.env[ev.target] = ev.value;
      trace.events.push_back(std::move(ev));
    } catch (const Failure& f) {
      trace.error = ExecutionError{i + 1, f.message};
    } catch (const ToolkitUnavailable& e) {
      trace.error = ExecutionError{i + 1, fmt::format("toolkit unavailable: {}", e.what())};
    } catch (const ToolkitProtocolError& e) {
      trace.error = ExecutionError{i + 1, fmt::format("toolkit error: {}", e.what())};
    }
    if (trace.error) return trace;
  }
  env.values_ = std::move(exec.scope());
  env.counters_ = std::move(exec.counters());
  return trace;
}

ExecutionTrace interpret(const ActionScript& script, PerceptionToolkit& toolkit, const Patch& root) {
  Environment env(root);
  return interpret(script, toolkit, env);
}

}  // namespace hydra
