#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace holomem::seq {

struct SourceSpan {
  std::size_t line = 0;    // 1-based
  std::size_t column = 0;  // 1-based
};

enum class ErrorKind { Syntax, Unit, Range, UnboundParameter };

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::Syntax: return "SyntaxError";
    case ErrorKind::Unit: return "UnitError";
    case ErrorKind::Range: return "RangeError";
    case ErrorKind::UnboundParameter: return "UnboundParameter";
  }
  return "Error";
}

/// Parse or compile diagnostic, always positioned.
class SequenceError : public std::runtime_error {
 public:
  SequenceError(ErrorKind kind, SourceSpan at, const std::string& message,
                std::vector<std::string> expected = {})
      : std::runtime_error(format(kind, at, message, expected)),
        kind_(kind), at_(at), expected_(std::move(expected)) {}

  ErrorKind kind() const { return kind_; }
  SourceSpan where() const { return at_; }
  const std::vector<std::string>& expected() const { return expected_; }

 private:
  static std::string format(ErrorKind kind, SourceSpan at, const std::string& message,
                            const std::vector<std::string>& expected) {
    std::string s = std::to_string(at.line) + ":" + std::to_string(at.column) + ": " +
                    to_string(kind) + ": " + message;
    if (!expected.empty()) {
      s += " (expected ";
      for (std::size_t i = 0; i < expected.size(); ++i) s += (i ? ", " : "") + expected[i];
      s += ")";
    }
    return s;
  }

  ErrorKind kind_;
  SourceSpan at_;
  std::vector<std::string> expected_;
};

/// A literal exactly as written, e.g. "0.5pi", "+x", "30mT/m".
struct Literal {
  std::string text;
  SourceSpan span;
  bool operator==(const Literal& o) const { return text == o.text; }
};

/// `$name`, `$name[3]` or `$name[i]`, where `i` is the enclosing repeat counter.
struct ParamRef {
  std::string name;
  std::optional<std::variant<long long, std::string>> index;
  SourceSpan span;
  bool operator==(const ParamRef& o) const { return name == o.name && index == o.index; }
};

using Value = std::variant<Literal, ParamRef>;

inline SourceSpan span_of(const Value& v) {
  return std::visit([](const auto& x) { return x.span; }, v);
}

struct PulseStmt {
  bool rf = false;
  Value angle;
  Value phase;
  bool operator==(const PulseStmt&) const = default;
};

struct GradStmt {
  Value gradient;
  Value duration;
  bool operator==(const GradStmt&) const = default;
};

struct WaitStmt {
  Value duration;
  bool operator==(const WaitStmt&) const = default;
};

struct TransferStmt {
  bool to_nuclear = true;
  bool operator==(const TransferStmt&) const = default;
};

struct AcquireStmt {
  Value duration;
  Value dt;
  bool operator==(const AcquireStmt&) const = default;
};

struct LetStmt {
  std::string name;
  std::vector<Literal> values;
  bool is_list = false;
  bool operator==(const LetStmt&) const = default;
};

struct Statement;

struct RepeatStmt {
  Value count;
  std::vector<Statement> body;
  bool operator==(const RepeatStmt&) const;
};

struct Statement {
  SourceSpan span;
  std::variant<PulseStmt, GradStmt, WaitStmt, TransferStmt, AcquireStmt, LetStmt, RepeatStmt> node;
  // Spans are positional metadata and do not take part in equality.
  bool operator==(const Statement& o) const { return node == o.node; }
};

inline bool RepeatStmt::operator==(const RepeatStmt& o) const {
  return count == o.count && body == o.body;
}

struct SequenceAst {
  std::string name;
  std::vector<std::string> comments;
  std::vector<Statement> statements;
  bool operator==(const SequenceAst&) const = default;
};

}  // namespace holomem::seq
