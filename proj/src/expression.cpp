#include "varsr/expression.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace varsr {

int completion_deficit(const TokenLibrary& lib, const std::vector<int>& prefix) {
  int deficit = 1;
  for (size_t i = 0; i < prefix.size(); ++i) {
    if (deficit == 0)
      throw std::invalid_argument("tokens after the tree is already complete");
    deficit += lib[prefix[i]].arity - 1;
  }
  return deficit;
}

bool is_complete(const TokenLibrary& lib, const std::vector<int>& prefix) {
  return !prefix.empty() && completion_deficit(lib, prefix) == 0;
}

int count_constants(const TokenLibrary& lib, const std::vector<int>& tokens) {
  int n = 0;
  for (int t : tokens)
    if (lib[t].kind == TokenKind::Constant) ++n;
  return n;
}

namespace {

// Evaluates the subtree starting at `pos`; advances pos and const_index.
Eigen::ArrayXd eval_node(const TokenLibrary& lib, const Expression& expr,
                         const Eigen::MatrixXd& x, size_t& pos, size_t& const_index) {
  if (pos >= expr.tokens.size())
    throw std::invalid_argument("truncated token sequence");
  const Token& t = lib[expr.tokens[pos]];
  ++pos;
  switch (t.kind) {
    case TokenKind::Variable:
      if (t.variable_index >= x.rows())
        throw std::invalid_argument("variable index out of range: " + t.symbol);
      return x.row(t.variable_index).transpose().array();
    case TokenKind::Constant: {
      if (const_index >= expr.constants.size())
        throw std::invalid_argument("missing constant value");
      const double v = expr.constants[const_index++];
      return Eigen::ArrayXd::Constant(x.cols(), v);
    }
    case TokenKind::UnaryOp: {
      Eigen::ArrayXd a = eval_node(lib, expr, x, pos, const_index);
      if (t.symbol == "sin") return a.sin();
      if (t.symbol == "cos") return a.cos();
      if (t.symbol == "exp") return a.exp();
      if (t.symbol == "log") return a.log();
      throw std::invalid_argument("unknown unary operator: " + t.symbol);
    }
    case TokenKind::BinaryOp: {
      Eigen::ArrayXd a = eval_node(lib, expr, x, pos, const_index);
      Eigen::ArrayXd b = eval_node(lib, expr, x, pos, const_index);
      if (t.symbol == "+") return a + b;
      if (t.symbol == "-") return a - b;
      if (t.symbol == "*") return a * b;
      if (t.symbol == "/") return a / b;
      throw std::invalid_argument("unknown binary operator: " + t.symbol);
    }
  }
  throw std::logic_error("unreachable");
}

}  // namespace

std::optional<Eigen::VectorXd> evaluate(const TokenLibrary& lib, const Expression& expr,
                                        const Eigen::MatrixXd& x) {
  if (!is_complete(lib, expr.tokens))
    throw std::invalid_argument("evaluate requires a complete expression");
  size_t pos = 0, const_index = 0;
  Eigen::ArrayXd values = eval_node(lib, expr, x, pos, const_index);
  if (!values.isFinite().all()) return std::nullopt;
  return Eigen::VectorXd(values.matrix());
}

namespace {

struct DisplayPiece {
  std::string text;
  bool bare_constant;  // exactly the constant leaf
  bool binary;         // rooted at a binary operator
};

DisplayPiece display_node(const TokenLibrary& lib, const std::vector<int>& tokens,
                          size_t& pos) {
  if (pos >= tokens.size()) throw std::invalid_argument("truncated token sequence");
  const Token& t = lib[tokens[pos]];
  ++pos;
  switch (t.kind) {
    case TokenKind::Variable:
      return {t.symbol, false, false};
    case TokenKind::Constant:
      return {"c", true, false};
    case TokenKind::UnaryOp: {
      DisplayPiece a = display_node(lib, tokens, pos);
      return {t.symbol + "(" + a.text + ")", false, false};
    }
    case TokenKind::BinaryOp: {
      DisplayPiece a = display_node(lib, tokens, pos);
      DisplayPiece b = display_node(lib, tokens, pos);
      const bool commutative = t.symbol == "+" || t.symbol == "*";
      if (commutative && a.bare_constant && !b.bare_constant) std::swap(a, b);
      auto wrap = [](const DisplayPiece& p) {
        return p.binary ? "(" + p.text + ")" : p.text;
      };
      return {wrap(a) + " " + t.symbol + " " + wrap(b), false, true};
    }
  }
  throw std::logic_error("unreachable");
}

}  // namespace

std::string canonical_display(const TokenLibrary& lib, const std::vector<int>& tokens) {
  if (!is_complete(lib, tokens))
    throw std::invalid_argument("canonical_display requires a complete expression");
  size_t pos = 0;
  return display_node(lib, tokens, pos).text;
}

std::string expression_to_json(const TokenLibrary& lib, const Expression& expr) {
  nlohmann::json j;
  j["tokens"] = nlohmann::json::array();
  for (int t : expr.tokens) j["tokens"].push_back(lib[t].symbol);
  j["constants"] = expr.constants;
  return j.dump();
}

Expression expression_from_json(const TokenLibrary& lib, const std::string& json_text) {
  const auto j = nlohmann::json::parse(json_text);
  Expression expr;
  for (const auto& s : j.at("tokens")) {
    const int idx = lib.index_of(s.get<std::string>());
    if (idx < 0)
      throw std::invalid_argument("token not in library: " + s.get<std::string>());
    expr.tokens.push_back(idx);
  }
  expr.constants = j.at("constants").get<std::vector<double>>();
  if (static_cast<int>(expr.constants.size()) != count_constants(lib, expr.tokens))
    throw std::invalid_argument("constant count does not match constant tokens");
  return expr;
}

}  // namespace varsr
