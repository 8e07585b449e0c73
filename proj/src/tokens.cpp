#include "varsr/tokens.hpp"

#include <stdexcept>

namespace varsr {

namespace {

bool parse_variable(std::string_view s, int& index) {
  if (s.size() < 3 || s.substr(0, 2) != "x_") return false;
  int v = 0;
  for (char ch : s.substr(2)) {
    if (ch < '0' || ch > '9') return false;
    v = v * 10 + (ch - '0');
  }
  index = v;
  return true;
}

}  // namespace

TokenLibrary TokenLibrary::from_symbols(const std::vector<std::string>& symbols) {
  TokenLibrary lib;
  for (const auto& s : symbols) {
    Token t;
    t.symbol = s;
    int var_index = 0;
    if (s == "+" || s == "-" || s == "*" || s == "/") {
      t.kind = TokenKind::BinaryOp;
      t.arity = 2;
    } else if (s == "sin" || s == "cos") {
      t.kind = TokenKind::UnaryOp;
      t.arity = 1;
      t.trigonometric = true;
    } else if (s == "exp" || s == "log") {
      t.kind = TokenKind::UnaryOp;
      t.arity = 1;
    } else if (s == "c" || s == "const") {
      t.kind = TokenKind::Constant;
      t.arity = 0;
    } else if (parse_variable(s, var_index)) {
      t.kind = TokenKind::Variable;
      t.arity = 0;
      t.variable_index = var_index;
    } else {
      throw std::invalid_argument("unknown token symbol: " + s);
    }
    lib.add(std::move(t));
  }
  // exp and log undo each other when both are present
  int e = lib.index_of("exp");
  int l = lib.index_of("log");
  if (e >= 0 && l >= 0) {
    lib.tokens_[e].inverse_of = l;
    lib.tokens_[l].inverse_of = e;
  }
  return lib;
}

int TokenLibrary::add(Token token) {
  if (index_of(token.symbol) >= 0)
    throw std::invalid_argument("duplicate token symbol: " + token.symbol);
  const bool arity_ok = (token.kind == TokenKind::BinaryOp && token.arity == 2) ||
                        (token.kind == TokenKind::UnaryOp && token.arity == 1) ||
                        ((token.kind == TokenKind::Variable ||
                          token.kind == TokenKind::Constant) &&
                         token.arity == 0);
  if (!arity_ok)
    throw std::invalid_argument("token arity inconsistent with kind: " + token.symbol);
  tokens_.push_back(std::move(token));
  return static_cast<int>(tokens_.size()) - 1;
}

int TokenLibrary::index_of(std::string_view symbol) const {
  for (int i = 0; i < size(); ++i)
    if (tokens_[i].symbol == symbol) return i;
  return -1;
}

bool TokenLibrary::has_constant() const {
  for (const auto& t : tokens_)
    if (t.kind == TokenKind::Constant) return true;
  return false;
}

int TokenLibrary::num_variables() const {
  int max_index = -1;
  for (const auto& t : tokens_)
    if (t.kind == TokenKind::Variable && t.variable_index > max_index)
      max_index = t.variable_index;
  return max_index + 1;
}

std::vector<std::string> TokenLibrary::symbols() const {
  std::vector<std::string> out;
  out.reserve(tokens_.size());
  for (const auto& t : tokens_) out.push_back(t.symbol);
  return out;
}

}  // namespace varsr
