#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "varsr/tokens.hpp"

namespace varsr {

// A skeleton is a complete preorder token sequence with constant values left
// unspecified.
using TreeSkeleton = std::vector<int>;

// Complete preorder token sequence plus the values drawn for each
// constant-token occurrence, in sampling order.
struct Expression {
  std::vector<int> tokens;  // indices into a TokenLibrary
  std::vector<double> constants;

  bool operator==(const Expression&) const = default;
};

struct Dataset {
  Eigen::MatrixXd x;  // n variables x m points
  Eigen::VectorXd y;  // m

  int num_points() const { return static_cast<int>(y.size()); }
  int num_variables() const { return static_cast<int>(x.rows()); }
};

// Number of unfilled child slots of a partial preorder sequence; 0 iff the
// sequence is a complete tree. Throws std::invalid_argument if the prefix
// over-fills (tokens after completion).
int completion_deficit(const TokenLibrary& lib, const std::vector<int>& prefix);
bool is_complete(const TokenLibrary& lib, const std::vector<int>& prefix);

int count_constants(const TokenLibrary& lib, const std::vector<int>& tokens);

// Elementwise evaluation of the expression on every dataset column.
// Returns nullopt when any value comes out non-finite.
std::optional<Eigen::VectorXd> evaluate(const TokenLibrary& lib,
                                        const Expression& expr,
                                        const Eigen::MatrixXd& x);

// Infix rendering with a fixed argument order for commutative operators:
// bare constant leaves go last, so [*, c, x_0] prints as "x_0 * c".
std::string canonical_display(const TokenLibrary& lib, const std::vector<int>& tokens);

// JSON wire format: {"tokens": [symbols], "constants": [reals]}.
std::string expression_to_json(const TokenLibrary& lib, const Expression& expr);
Expression expression_from_json(const TokenLibrary& lib, const std::string& json_text);

}  // namespace varsr
