#include "hydra/script.hpp"

#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "hydra/types.hpp"

namespace hydra {

ParseError::ParseError(int line, int column, std::vector<std::string> expected, std::string detail)
    : Error(fmt::format("line {}, column {}: {}{}", line, column,
                        detail.empty() ? "" : detail + "; ",
                        expected.empty() ? std::string("unexpected input")
                                         : fmt::format("expected {}", fmt::join(expected, " or ")))),
      line_(line),
      column_(column),
      expected_(std::move(expected)) {}

namespace {

enum class Tok { ident, number, string, equals, dot, lparen, rparen, comma, lbracket, rbracket, end };

struct Token {
  Tok kind = Tok::end;
  std::string text;  // identifier, raw number, or unescaped string
  int column = 1;
};

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

std::vector<Token> lex_line(const std::string& line, int line_no) {
  std::vector<Token> out;
  std::size_t i = 0;
  auto col = [&](std::size_t at) { return static_cast<int>(at) + 1; };
  while (i < line.size()) {
    const char c = line[i];
    if (c == ' ' || c == '\t' || c == '\r') {
      ++i;
      continue;
    }
    if (c == '#') break;
    const std::size_t start = i;
    if (ident_start(c)) {
      while (i < line.size() && ident_char(line[i])) ++i;
      out.push_back({Tok::ident, line.substr(start, i - start), col(start)});
      continue;
    }
    if (digit(c) || (c == '-' && i + 1 < line.size() && digit(line[i + 1]))) {
      if (c == '-') ++i;
      while (i < line.size() && digit(line[i])) ++i;
      if (i + 1 < line.size() && line[i] == '.' && digit(line[i + 1])) {
        ++i;
        while (i < line.size() && digit(line[i])) ++i;
      }
      if (i < line.size() && (line[i] == 'e' || line[i] == 'E')) {
        std::size_t j = i + 1;
        if (j < line.size() && (line[j] == '+' || line[j] == '-')) ++j;
        if (j < line.size() && digit(line[j])) {
          i = j;
          while (i < line.size() && digit(line[i])) ++i;
        }
      }
      out.push_back({Tok::number, line.substr(start, i - start), col(start)});
      continue;
    }
    if (c == '"') {
      std::string text;
      ++i;
      bool closed = false;
      while (i < line.size()) {
        const char d = line[i];
        if (d == '"') {
          closed = true;
          ++i;
          break;
        }
        if (d == '\\') {
          if (i + 1 >= line.size()) break;
          const char e = line[i + 1];
          switch (e) {
            case '"': text += '"'; break;
            case '\\': text += '\\'; break;
            case 'n': text += '\n'; break;
            case 't': text += '\t'; break;
            default:
              throw ParseError(line_no, col(i), {"escape \\\" \\\\ \\n \\t"}, "unknown escape");
          }
          i += 2;
          continue;
        }
        text += d;
        ++i;
      }
      if (!closed) throw ParseError(line_no, col(line.size()), {"'\"'"}, "unterminated string");
      out.push_back({Tok::string, std::move(text), col(start)});
      continue;
    }
    Tok kind;
    switch (c) {
      case '=': kind = Tok::equals; break;
      case '.': kind = Tok::dot; break;
      case '(': kind = Tok::lparen; break;
      case ')': kind = Tok::rparen; break;
      case ',': kind = Tok::comma; break;
      case '[': kind = Tok::lbracket; break;
      case ']': kind = Tok::rbracket; break;
      default:
        throw ParseError(line_no, col(i), {}, fmt::format("unexpected character '{}'", c));
    }
    out.push_back({kind, std::string(1, c), col(start)});
    ++i;
  }
  out.push_back({Tok::end, "", col(line.size())});
  return out;
}

bool is_bool_word(const std::string& s) {
  return s == "true" || s == "false" || s == "True" || s == "False";
}

class LineParser {
 public:
  LineParser(std::vector<Token> tokens, int line) : toks_(std::move(tokens)), line_(line) {}

  Statement statement() {
    const Token& target = peek();
    if (target.kind != Tok::ident || is_bool_word(target.text)) fail({"identifier"});
    ++pos_;
    expect(Tok::equals, "'='");
    Statement st;
    st.target = target.text;
    st.expr = expression();
    if (peek().kind != Tok::end) fail({"end of line"});
    st.line = line_;
    return st;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }

  [[noreturn]] void fail(std::vector<std::string> expected, std::string detail = {}) const {
    throw ParseError(line_, peek().column, std::move(expected), std::move(detail));
  }

  void expect(Tok kind, const char* label) {
    if (peek().kind != kind) fail({label});
    ++pos_;
  }

  Expression expression() {
    const Token tok = peek();
    switch (tok.kind) {
      case Tok::string:
        ++pos_;
        return {Literal{tok.text}};
      case Tok::number:
        ++pos_;
        return {Literal{number(tok)}};
      case Tok::ident:
        break;
      default:
        fail({"expression"});
    }
    ++pos_;
    if (is_bool_word(tok.text)) return {Literal{tok.text == "true" || tok.text == "True"}};
    if (peek().kind == Tok::dot) {
      ++pos_;
      if (peek().kind != Tok::ident) fail({"method name"});
      Call call;
      call.receiver = tok.text;
      call.name = peek().text;
      ++pos_;
      expect(Tok::lparen, "'('");
      call.args = arguments();
      return {std::move(call)};
    }
    if (peek().kind == Tok::lparen) {
      ++pos_;
      Call call;
      call.name = tok.text;
      call.args = arguments();
      return {std::move(call)};
    }
    if (peek().kind == Tok::lbracket) {
      ++pos_;
      const Token idx = peek();
      if (idx.kind != Tok::number || idx.text.find_first_not_of("0123456789") != std::string::npos) {
        fail({"non-negative integer"});
      }
      ++pos_;
      expect(Tok::rbracket, "']'");
      errno = 0;
      const unsigned long long v = std::strtoull(idx.text.c_str(), nullptr, 10);
      if (errno == ERANGE) throw ParseError(line_, idx.column, {"non-negative integer"}, "index too large");
      return {Index{tok.text, static_cast<std::size_t>(v)}};
    }
    return {VarRef{tok.text}};
  }

  std::vector<Expression> arguments() {
    std::vector<Expression> args;
    if (peek().kind == Tok::rparen) {
      ++pos_;
      return args;
    }
    while (true) {
      if (peek().kind == Tok::end) fail({"')'", "expression"});
      args.push_back(expression());
      if (peek().kind == Tok::comma) {
        ++pos_;
        continue;
      }
      if (peek().kind == Tok::rparen) {
        ++pos_;
        return args;
      }
      fail({"','", "')'"});
    }
  }

  double number(const Token& tok) const {
    errno = 0;
    const double v = std::strtod(tok.text.c_str(), nullptr);
    if (errno == ERANGE || !std::isfinite(v)) {
      throw ParseError(line_, tok.column, {"finite number"}, "number out of range");
    }
    return v;
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  int line_;
};

void print_expr(const Expression& e, std::string& out);

void print_call(const Call& c, std::string& out) {
  if (c.receiver) {
    out += *c.receiver;
    out += '.';
  }
  out += c.name;
  out += '(';
  for (std::size_t i = 0; i < c.args.size(); ++i) {
    if (i > 0) out += ", ";
    print_expr(c.args[i], out);
  }
  out += ')';
}

void print_expr(const Expression& e, std::string& out) {
  std::visit(
      [&out](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Call>) {
          print_call(n, out);
        } else if constexpr (std::is_same_v<T, Literal>) {
          std::visit(
              [&out](const auto& v) {
                using V = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<V, std::string>) {
                  out += quote_string(v);
                } else if constexpr (std::is_same_v<V, bool>) {
                  out += v ? "true" : "false";
                } else {
                  out += format_number(v);
                }
              },
              n.value);
        } else if constexpr (std::is_same_v<T, VarRef>) {
          out += n.name;
        } else {
          out += fmt::format("{}[{}]", n.name, n.index);
        }
      },
      e.node);
}

}  // namespace

ActionScript parse_script(const std::string& source) {
  ActionScript script;
  script.source = source;
  std::istringstream in(source);
  std::string line;
  int line_no = 0;
  int final_line = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto tokens = lex_line(line, line_no);
    if (tokens.size() == 1) continue;
    Statement st = LineParser(std::move(tokens), line_no).statement();
    if (st.target == kFinalAnswer) {
      if (final_line != 0) {
        const auto column = static_cast<int>(line.find_first_not_of(" \t")) + 1;
        throw ParseError(line_no, column, {}, fmt::format("final_answer already assigned on line {}", final_line));
      }
      final_line = line_no;
    }
    script.statements.push_back(std::move(st));
  }
  if (script.statements.empty()) {
    throw ParseError(std::max(line_no, 1), 1, {"statement"}, "script is empty");
  }
  return script;
}

std::string pretty_print(const Expression& expr) {
  std::string out;
  print_expr(expr, out);
  return out;
}

std::string pretty_print(const ActionScript& script) {
  std::string out;
  for (std::size_t i = 0; i < script.statements.size(); ++i) {
    if (i > 0) out += '\n';
    out += script.statements[i].target;
    out += " = ";
    print_expr(script.statements[i].expr, out);
  }
  return out;
}

std::string quote_string(const std::string& text) {
  std::string out = "\"";
  for (char c : text) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  out += '"';
  return out;
}

bool is_identifier(const std::string& text) {
  if (text.empty() || !ident_start(text[0])) return false;
  for (char c : text) {
    if (!ident_char(c)) return false;
  }
  return !is_bool_word(text);
}

std::string extract_script(const std::string& reply) {
  const auto open = reply.find("```");
  if (open == std::string::npos) return reply;
  const auto body = reply.find('\n', open);
  if (body == std::string::npos) return reply;
  const auto close = reply.find("```", body + 1);
  return reply.substr(body + 1, close == std::string::npos ? std::string::npos : close - body - 1);
}

}  // namespace hydra
