#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <string>
#include <string_view>
#include <vector>

#include "holomem/sequence/ast.hpp"
#include "holomem/sequence/units.hpp"

namespace holomem::seq {

enum class TokenKind { Word, Equals, LBrace, RBrace, LBracket, RBracket, Comma, Separator, End };

struct Token {
  TokenKind kind = TokenKind::End;
  std::string text;
  SourceSpan span;
};

inline const char* describe(TokenKind k) {
  switch (k) {
    case TokenKind::Word: return "word";
    case TokenKind::Equals: return "'='";
    case TokenKind::LBrace: return "'{'";
    case TokenKind::RBrace: return "'}'";
    case TokenKind::LBracket: return "'['";
    case TokenKind::RBracket: return "']'";
    case TokenKind::Comma: return "','";
    case TokenKind::Separator: return "end of line";
    case TokenKind::End: return "end of input";
  }
  return "token";
}

struct LexedSource {
  std::vector<Token> tokens;  // always terminated by End
  std::vector<std::string> comments;
};

namespace detail {

inline bool is_word_char(unsigned char c) {
  if (c <= 0x20 || c >= 0x7f) return false;
  switch (c) {
    case '=': case '{': case '}': case '[': case ']': case ',': case ';': case '#': return false;
    default: return true;
  }
}

inline std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && (s[a] == ' ' || s[a] == '\t' || s[a] == '\r')) ++a;
  while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
  return std::string(s.substr(a, b - a));
}

}  // namespace detail

/// Splits source text into tokens. Newlines and ';' both become Separator.
inline LexedSource lex(std::string_view text) {
  LexedSource out;
  std::size_t line = 1, col = 1, i = 0;
  auto push = [&](TokenKind k, std::string t, SourceSpan at) {
    out.tokens.push_back({k, std::move(t), at});
  };
  while (i < text.size()) {
    const unsigned char c = static_cast<unsigned char>(text[i]);
    const SourceSpan at{line, col};
    if (c == '\n') {
      push(TokenKind::Separator, "\n", at);
      ++i, ++line, col = 1;
      continue;
    }
    if (c == ' ' || c == '\t' || c == '\r') {
      ++i, ++col;
      continue;
    }
    if (c == '#') {
      std::size_t j = i;
      while (j < text.size() && text[j] != '\n') ++j;
      const std::string_view body = text.substr(i + 1, j - i - 1);
      for (unsigned char b : body)
        if ((b < 0x20 && b != '\t' && b != '\r') || b == 0x7f)
          throw SequenceError(ErrorKind::Syntax, at, "control character in comment");
      out.comments.push_back(detail::trim(body));
      col += j - i;
      i = j;
      continue;
    }
    TokenKind k = TokenKind::End;
    switch (c) {
      case '=': k = TokenKind::Equals; break;
      case '{': k = TokenKind::LBrace; break;
      case '}': k = TokenKind::RBrace; break;
      case '[': k = TokenKind::LBracket; break;
      case ']': k = TokenKind::RBracket; break;
      case ',': k = TokenKind::Comma; break;
      case ';': k = TokenKind::Separator; break;
      default: break;
    }
    if (k != TokenKind::End) {
      push(k, std::string(1, static_cast<char>(c)), at);
      ++i, ++col;
      continue;
    }
    if (!detail::is_word_char(c))
      throw SequenceError(ErrorKind::Syntax, at, "unexpected character");
    std::size_t j = i;
    while (j < text.size() && detail::is_word_char(static_cast<unsigned char>(text[j]))) ++j;
    push(TokenKind::Word, std::string(text.substr(i, j - i)), at);
    col += j - i;
    i = j;
  }
  out.tokens.push_back({TokenKind::End, "", {line, col}});
  return out;
}

namespace detail {

inline bool is_identifier(std::string_view s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
  return true;
}

enum class Kind { Angle, Phase, Gradient, Duration, Count, Any };

inline const char* kind_name(Kind k) {
  switch (k) {
    case Kind::Angle: return "an angle (pi, rad, deg)";
    case Kind::Phase: return "a phase (+x, -x, +y, -y or deg)";
    case Kind::Gradient: return "a gradient (mT/m, T/m)";
    case Kind::Duration: return "a duration (ns, us, ms)";
    case Kind::Count: return "a non-negative integer";
    case Kind::Any: return "a value";
  }
  return "a value";
}

inline std::vector<std::string> unit_names(Kind k) {
  switch (k) {
    case Kind::Angle: return {"pi", "rad", "deg"};
    case Kind::Phase: return {"+x", "-x", "+y", "-y", "deg"};
    case Kind::Gradient: return {"mT/m", "T/m"};
    case Kind::Duration: return {"ns", "us", "ms"};
    default: return {};
  }
}

/// Parses a literal and checks it against the expected kind.
inline Quantity checked_quantity(std::string_view text, SourceSpan at, Kind kind) {
  const Quantity q = parse_quantity(text, at);
  bool ok = true;
  switch (kind) {
    case Kind::Angle: ok = q.is_angle(); break;
    case Kind::Phase: ok = q.is_phase(); break;
    case Kind::Gradient: ok = q.is_gradient(); break;
    case Kind::Duration: ok = q.is_duration(); break;
    case Kind::Count: ok = q.unit == Unit::None; break;
    case Kind::Any: break;
  }
  if (!ok) {
    const std::string msg = q.unit == Unit::None
                                ? "missing unit, expected " + std::string(kind_name(kind))
                                : "'" + std::string(text) + "' is not " + kind_name(kind);
    throw SequenceError(kind == Kind::Count ? ErrorKind::Syntax : ErrorKind::Unit, at, msg,
                        unit_names(kind));
  }
  if (kind == Kind::Duration && q.value < 0.0)
    throw SequenceError(ErrorKind::Range, at, "negative duration");
  if (kind == Kind::Count) {
    if (q.value < 0.0) throw SequenceError(ErrorKind::Range, at, "negative repeat count");
    if (q.value != static_cast<double>(static_cast<long long>(q.value)) || q.value > 1e9)
      throw SequenceError(ErrorKind::Range, at, "repeat count must be an integer below 1e9");
  }
  return q;
}

class Parser {
 public:
  explicit Parser(LexedSource src) : src_(std::move(src)) {}

  SequenceAst run() {
    SequenceAst ast;
    for (auto& c : src_.comments) {
      if (ast.name.empty() && c.rfind("name:", 0) == 0 && !trim(c.substr(5)).empty())
        ast.name = trim(c.substr(5));
      else
        ast.comments.push_back(c);
    }
    ast.statements = block(false);
    return ast;
  }

 private:
  const Token& peek() const { return src_.tokens[pos_]; }
  const Token& next() { return src_.tokens[pos_ < src_.tokens.size() - 1 ? pos_++ : pos_]; }

  [[noreturn]] void fail(const Token& t, std::vector<std::string> expected) const {
    const std::string got = t.kind == TokenKind::Word ? "'" + t.text + "'" : describe(t.kind);
    throw SequenceError(ErrorKind::Syntax, t.span, "unexpected " + got, std::move(expected));
  }

  const Token& expect(TokenKind k) {
    if (peek().kind != k) fail(peek(), {describe(k)});
    return next();
  }

  void skip_separators() {
    while (peek().kind == TokenKind::Separator) next();
  }

  std::vector<Statement> block(bool nested) {
    std::vector<Statement> out;
    for (;;) {
      skip_separators();
      const Token& t = peek();
      if (t.kind == TokenKind::End) {
        if (nested) fail(t, {"'}'"});
        return out;
      }
      if (t.kind == TokenKind::RBrace) {
        if (!nested) fail(t, {"directive"});
        return out;
      }
      out.push_back(statement());
      const Token& after = peek();
      if (after.kind != TokenKind::Separator && after.kind != TokenKind::End &&
          !(nested && after.kind == TokenKind::RBrace))
        fail(after, {"end of line", "';'"});
    }
  }

  Statement statement() {
    const Token& kw = peek();
    if (kw.kind != TokenKind::Word) fail(kw, directives());
    const SourceSpan at = kw.span;
    const std::string name = next().text;
    if (name == "pulse" || name == "rfpulse") {
      PulseStmt p;
      p.rf = name == "rfpulse";
      p.angle = keyed("angle", Kind::Angle);
      p.phase = keyed("phase", Kind::Phase);
      return {at, p};
    }
    if (name == "grad") {
      GradStmt g;
      g.gradient = keyed("G", Kind::Gradient);
      g.duration = keyed("dur", Kind::Duration);
      return {at, g};
    }
    if (name == "wait") return {at, WaitStmt{value(Kind::Duration)}};
    if (name == "transfer") {
      const Token& d = peek();
      if (d.kind != TokenKind::Word || (d.text != "e2n" && d.text != "n2e"))
        fail(d, {"e2n", "n2e"});
      return {at, TransferStmt{next().text == "e2n"}};
    }
    if (name == "acquire") {
      AcquireStmt a;
      a.duration = value(Kind::Duration);
      a.dt = keyed("dt", Kind::Duration);
      const auto* dur = std::get_if<Literal>(&a.duration);
      const auto* dt = std::get_if<Literal>(&a.dt);
      if (dt && parse_quantity(dt->text, dt->span).value <= 0.0)
        throw SequenceError(ErrorKind::Range, dt->span, "dt must be positive");
      if (dur && dt &&
          parse_quantity(dt->text, dt->span).value > parse_quantity(dur->text, dur->span).value)
        throw SequenceError(ErrorKind::Range, dt->span, "dt exceeds the acquisition duration");
      return {at, a};
    }
    if (name == "let") return {at, let()};
    if (name == "repeat") {
      RepeatStmt r;
      r.count = value(Kind::Count);
      expect(TokenKind::LBrace);
      r.body = block(true);
      expect(TokenKind::RBrace);
      return {at, std::move(r)};
    }
    fail(kw, directives());
  }

  static std::vector<std::string> directives() {
    return {"pulse", "grad", "wait", "rfpulse", "transfer", "acquire", "let", "repeat"};
  }

  Value keyed(const char* key, Kind kind) {
    const Token& k = peek();
    if (k.kind != TokenKind::Word || k.text != key) fail(k, {std::string(key) + "="});
    next();
    expect(TokenKind::Equals);
    return value(kind);
  }

  Literal literal(Kind kind) {
    const Token& t = peek();
    if (t.kind != TokenKind::Word || t.text.front() == '$') fail(t, {kind_name(kind)});
    checked_quantity(t.text, t.span, kind);
    const Token& w = next();
    return {w.text, w.span};
  }

  Value value(Kind kind) {
    const Token& t = peek();
    if (t.kind != TokenKind::Word) fail(t, {kind_name(kind), "$parameter"});
    if (t.text.front() != '$') return literal(kind);
    ParamRef ref;
    ref.span = t.span;
    ref.name = t.text.substr(1);
    if (!is_identifier(ref.name))
      throw SequenceError(ErrorKind::Syntax, t.span, "malformed parameter name", {"$name"});
    next();
    if (peek().kind == TokenKind::LBracket) {
      next();
      const Token& ix = peek();
      if (ix.kind == TokenKind::Word && ix.text == "i") {
        ref.index = std::string("i");
      } else if (ix.kind == TokenKind::Word && !ix.text.empty() &&
                 std::all_of(ix.text.begin(), ix.text.end(),
                             [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
        long long n = 0;
        const auto [p, ec] = std::from_chars(ix.text.data(), ix.text.data() + ix.text.size(), n);
        if (ec != std::errc()) throw SequenceError(ErrorKind::Range, ix.span, "index out of range");
        ref.index = n;
      } else {
        fail(ix, {"i", "integer index"});
      }
      next();
      expect(TokenKind::RBracket);
    }
    return ref;
  }

  LetStmt let() {
    LetStmt l;
    const Token& n = peek();
    if (n.kind != TokenKind::Word || !is_identifier(n.text) || n.text == "i")
      fail(n, {"parameter name"});
    l.name = next().text;
    expect(TokenKind::Equals);
    if (peek().kind == TokenKind::LBracket) {
      next();
      l.is_list = true;
      l.values.push_back(literal(Kind::Any));
      while (peek().kind == TokenKind::Comma) {
        next();
        l.values.push_back(literal(Kind::Any));
      }
      expect(TokenKind::RBracket);
    } else {
      l.values.push_back(literal(Kind::Any));
    }
    return l;
  }

  LexedSource src_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses a pulse program. Throws SequenceError with a line/column position.
inline SequenceAst parse_sequence(std::string_view text) {
  return detail::Parser(lex(text)).run();
}

}  // namespace holomem::seq
