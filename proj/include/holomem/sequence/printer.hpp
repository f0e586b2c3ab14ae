#pragma once

#include <string>
#include <type_traits>
#include <variant>

#include "holomem/sequence/ast.hpp"

namespace holomem::seq {

namespace detail {

inline std::string print_value(const Value& v) {
  if (const auto* l = std::get_if<Literal>(&v)) return l->text;
  const auto& r = std::get<ParamRef>(v);
  std::string s = "$" + r.name;
  if (r.index) {
    if (const auto* n = std::get_if<long long>(&*r.index))
      s += "[" + std::to_string(*n) + "]";
    else
      s += "[" + std::get<std::string>(*r.index) + "]";
  }
  return s;
}

inline void print_block(std::string& out, const std::vector<Statement>& body, int depth) {
  const std::string indent(2 * static_cast<std::size_t>(depth), ' ');
  for (const auto& st : body) {
    out += indent;
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, PulseStmt>) {
            out += (n.rf ? "rfpulse" : "pulse");
            out += " angle=" + print_value(n.angle) + " phase=" + print_value(n.phase) + "\n";
          } else if constexpr (std::is_same_v<T, GradStmt>) {
            out += "grad G=" + print_value(n.gradient) + " dur=" + print_value(n.duration) + "\n";
          } else if constexpr (std::is_same_v<T, WaitStmt>) {
            out += "wait " + print_value(n.duration) + "\n";
          } else if constexpr (std::is_same_v<T, TransferStmt>) {
            out += n.to_nuclear ? "transfer e2n\n" : "transfer n2e\n";
          } else if constexpr (std::is_same_v<T, AcquireStmt>) {
            out += "acquire " + print_value(n.duration) + " dt=" + print_value(n.dt) + "\n";
          } else if constexpr (std::is_same_v<T, LetStmt>) {
            out += "let " + n.name + " = ";
            if (n.is_list) {
              out += "[";
              for (std::size_t i = 0; i < n.values.size(); ++i)
                out += (i ? ", " : "") + n.values[i].text;
              out += "]\n";
            } else {
              out += n.values.front().text + "\n";
            }
          } else {
            out += "repeat " + print_value(n.count) + " {\n";
            print_block(out, n.body, depth + 1);
            out += indent + "}\n";
          }
        },
        st.node);
  }
}

}  // namespace detail

/// Canonical text form. Comments are hoisted to the top of the file.
inline std::string print(const SequenceAst& ast) {
  std::string out;
  if (!ast.name.empty()) out += "# name: " + ast.name + "\n";
  for (const auto& c : ast.comments) out += c.empty() ? "#\n" : "# " + c + "\n";
  detail::print_block(out, ast.statements, 0);
  return out;
}

}  // namespace holomem::seq
