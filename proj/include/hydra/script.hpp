#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "hydra/error.hpp"

namespace hydra {

/// Syntax error with a 1-based position and the token kinds that would have
/// been accepted there.
class ParseError : public Error {
 public:
  ParseError(int line, int column, std::vector<std::string> expected, std::string detail = {});

  [[nodiscard]] int line() const { return line_; }
  [[nodiscard]] int column() const { return column_; }
  [[nodiscard]] const std::vector<std::string>& expected() const { return expected_; }

 private:
  int line_;
  int column_;
  std::vector<std::string> expected_;
};

struct Expression;

struct Call {
  std::optional<std::string> receiver;
  std::string name;
  std::vector<Expression> args;

  bool operator==(const Call&) const;
};

struct Literal {
  std::variant<std::string, double, bool> value;

  bool operator==(const Literal&) const = default;
};

struct VarRef {
  std::string name;

  bool operator==(const VarRef&) const = default;
};

struct Index {
  std::string name;
  std::size_t index = 0;

  bool operator==(const Index&) const = default;
};

struct Expression {
  std::variant<Call, Literal, VarRef, Index> node;

  bool operator==(const Expression&) const = default;
};

inline bool Call::operator==(const Call& o) const {
  return receiver == o.receiver && name == o.name && args == o.args;
}

struct Statement {
  std::string target;
  Expression expr;
  int line = 0;  // source line, ignored by ==

  bool operator==(const Statement& o) const { return target == o.target && expr == o.expr; }
};

inline constexpr const char* kFinalAnswer = "final_answer";

struct ActionScript {
  std::string source;
  std::vector<Statement> statements;

  /// Structural equality; the source text is not compared.
  bool operator==(const ActionScript& o) const { return statements == o.statements; }
};

/// script := stmt+ ; stmt := IDENT "=" expr ; one statement per line, '#'
/// starts a comment. At most one assignment to final_answer.
ActionScript parse_script(const std::string& source);

std::string pretty_print(const ActionScript& script);
std::string pretty_print(const Expression& expr);

/// Double-quoted with \" \\ \n \t escapes.
std::string quote_string(const std::string& text);

bool is_identifier(const std::string& text);

/// Pulls the script out of an LLM reply: the first fenced code block if any,
/// otherwise the whole reply.
std::string extract_script(const std::string& reply);

}  // namespace hydra
