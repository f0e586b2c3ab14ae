#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "holomem/events.hpp"
#include "holomem/sequence/ast.hpp"
#include "holomem/sequence/parser.hpp"

namespace holomem::seq {

/// External bindings; each entry replaces any `let` of the same name.
/// A value written as "[a, b, ...]" binds a list.
using ParamMap = std::map<std::string, std::string>;

namespace detail {

struct Binding {
  std::vector<std::string> values;
  bool is_list = false;
};

inline Binding binding_from_text(const std::string& text, SourceSpan at) {
  Binding b;
  const std::string t = trim(text);
  if (t.size() >= 2 && t.front() == '[' && t.back() == ']') {
    b.is_list = true;
    std::string item;
    for (char c : t.substr(1, t.size() - 2)) {
      if (c == ',') {
        b.values.push_back(trim(item));
        item.clear();
      } else {
        item += c;
      }
    }
    b.values.push_back(trim(item));
  } else {
    b.values.push_back(t);
  }
  for (const auto& v : b.values)
    if (v.empty()) throw SequenceError(ErrorKind::Syntax, at, "empty parameter value");
  return b;
}

class Compiler {
 public:
  explicit Compiler(const ParamMap& params) : params_(params) {}

  std::vector<SequenceEvent> run(const std::vector<Statement>& statements) {
    block(statements);
    return std::move(events_);
  }

 private:
  void block(const std::vector<Statement>& body) {
    for (const auto& st : body) std::visit([&](const auto& n) { emit(n, st.span); }, st.node);
  }

  void emit(const PulseStmt& p, SourceSpan) {
    const double theta = eval(p.angle, Kind::Angle);
    const double phase = eval(p.phase, Kind::Phase);
    if (p.rf)
      events_.push_back(RfPulse{theta, phase});
    else
      events_.push_back(MicrowavePulse{theta, phase});
  }
  void emit(const GradStmt& g, SourceSpan) {
    const double G = eval(g.gradient, Kind::Gradient);
    events_.push_back(GradientPulse{G, eval(g.duration, Kind::Duration)});
  }
  void emit(const WaitStmt& w, SourceSpan) {
    events_.push_back(Delay{eval(w.duration, Kind::Duration)});
  }
  void emit(const TransferStmt& t, SourceSpan) {
    events_.push_back(Transfer{t.to_nuclear ? TransferDirection::E2N : TransferDirection::N2E});
  }
  void emit(const AcquireStmt& a, SourceSpan) {
    const double duration = eval(a.duration, Kind::Duration);
    const double dt = eval(a.dt, Kind::Duration);
    if (!(dt > 0.0)) throw SequenceError(ErrorKind::Range, span_of(a.dt), "dt must be positive");
    if (dt > duration)
      throw SequenceError(ErrorKind::Range, span_of(a.dt), "dt exceeds the acquisition duration");
    events_.push_back(Acquire{duration, dt});
  }
  void emit(const LetStmt& l, SourceSpan) {
    if (params_.count(l.name)) return;
    Binding b;
    b.is_list = l.is_list;
    for (const auto& v : l.values) b.values.push_back(v.text);
    lets_[l.name] = std::move(b);
  }
  void emit(const RepeatStmt& r, SourceSpan) {
    const auto n = static_cast<long long>(eval(r.count, Kind::Count));
    for (long long i = 0; i < n; ++i) {
      counters_.push_back(i);
      block(r.body);
      counters_.pop_back();
    }
  }

  const Binding& lookup(const ParamRef& ref) {
    if (auto it = params_.find(ref.name); it != params_.end()) {
      auto [slot, fresh] = external_.try_emplace(ref.name);
      if (fresh) slot->second = binding_from_text(it->second, ref.span);
      return slot->second;
    }
    if (auto it = lets_.find(ref.name); it != lets_.end()) return it->second;
    throw SequenceError(ErrorKind::UnboundParameter, ref.span, "unbound parameter $" + ref.name);
  }

  double eval(const Value& v, Kind kind) {
    if (const auto* l = std::get_if<Literal>(&v))
      return checked_quantity(l->text, l->span, kind).value;
    const auto& ref = std::get<ParamRef>(v);
    const Binding& b = lookup(ref);
    std::size_t index = 0;
    if (ref.index) {
      long long ix = 0;
      if (const auto* n = std::get_if<long long>(&*ref.index)) {
        ix = *n;
      } else {
        if (counters_.empty())
          throw SequenceError(ErrorKind::UnboundParameter, ref.span,
                              "index i used outside a repeat block");
        ix = counters_.back();
      }
      if (!b.is_list)
        throw SequenceError(ErrorKind::Range, ref.span, "$" + ref.name + " is not a list");
      if (ix < 0 || static_cast<std::size_t>(ix) >= b.values.size())
        throw SequenceError(ErrorKind::Range, ref.span,
                            "index " + std::to_string(ix) + " outside $" + ref.name + " (size " +
                                std::to_string(b.values.size()) + ")");
      index = static_cast<std::size_t>(ix);
    } else if (b.is_list) {
      throw SequenceError(ErrorKind::Range, ref.span, "list $" + ref.name + " needs an index");
    }
    return checked_quantity(b.values[index], ref.span, kind).value;
  }

  const ParamMap& params_;
  std::map<std::string, Binding> lets_;
  std::map<std::string, Binding> external_;
  std::vector<long long> counters_;
  std::vector<SequenceEvent> events_;
};

}  // namespace detail

/// Lowers a parsed program to SI events. Pure: equal inputs give equal output.
inline std::vector<SequenceEvent> compile(const SequenceAst& ast, const ParamMap& params = {}) {
  return detail::Compiler(params).run(ast.statements);
}

/// Names bound by `let` anywhere in the program.
inline std::vector<std::string> declared_parameters(const SequenceAst& ast) {
  std::vector<std::string> out;
  auto walk = [&](auto&& self, const std::vector<Statement>& body) -> void {
    for (const auto& st : body) {
      if (const auto* l = std::get_if<LetStmt>(&st.node)) out.push_back(l->name);
      if (const auto* r = std::get_if<RepeatStmt>(&st.node)) self(self, r->body);
    }
  };
  walk(walk, ast.statements);
  return out;
}

}  // namespace holomem::seq
