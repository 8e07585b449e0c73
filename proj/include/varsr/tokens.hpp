#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace varsr {

enum class TokenKind { BinaryOp, UnaryOp, Variable, Constant };

struct Token {
  TokenKind kind = TokenKind::Variable;
  std::string symbol;
  int arity = 0;
  int variable_index = -1;  // Variable tokens: which dataset row this reads
  int inverse_of = -1;      // library index of the token this undoes, -1 if none
  bool trigonometric = false;
};

// Ordered token set. Positions define the one-hot encoding order and must
// stay stable for the lifetime of a run.
class TokenLibrary {
 public:
  TokenLibrary() = default;

  // Builds a library from display symbols. Recognized: binary "+", "-", "*",
  // "/"; unary "sin", "cos", "exp", "log"; variables "x_0", "x_1", ...;
  // "c" or "const" for the constant token. exp and log are marked as mutual
  // inverses. Throws std::invalid_argument on unknown or duplicate symbols.
  static TokenLibrary from_symbols(const std::vector<std::string>& symbols);

  // Returns the new token's index. Throws on duplicate symbols.
  int add(Token token);

  int size() const { return static_cast<int>(tokens_.size()); }
  const Token& operator[](int i) const { return tokens_[i]; }
  int index_of(std::string_view symbol) const;  // -1 if absent

  bool has_constant() const;
  int num_variables() const;
  std::vector<std::string> symbols() const;

 private:
  std::vector<Token> tokens_;
};

}  // namespace varsr
