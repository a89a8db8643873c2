#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace scmkit::dsl {

// Mechanism formulas are s-expressions over a fixed operator set:
//
//   expr ::= VAR
//          | (not expr)
//          | (and expr expr ...)
//          | (or expr expr ...)
//          | (xor expr expr ...)
//          | (iff expr expr ...)
//
// Constants are disallowed. n-ary and/or are conjunction/disjunction,
// n-ary xor is parity, and n-ary iff is the left fold of binary iff.

enum class Op { Not, And, Or, Xor, Iff };

const char* op_name(Op op);
std::optional<Op> op_from_name(const std::string& name);

class Expr;
using ExprPtr = std::shared_ptr<const Expr>;

class Expr {
 public:
  static ExprPtr variable(std::string name);
  static ExprPtr apply(Op op, std::vector<ExprPtr> children);

  bool is_var() const { return children_.empty(); }
  const std::string& name() const { return name_; }
  Op op() const { return op_; }
  const std::vector<ExprPtr>& children() const { return children_; }

 private:
  Expr() = default;
  std::string name_;       // variable nodes only
  Op op_ = Op::Not;        // operator nodes only
  std::vector<ExprPtr> children_;
};

bool structurally_equal(const ExprPtr& a, const ExprPtr& b);

enum class DslErrorKind {
  Parse,
  Arity,
  UnknownVariable,
  UnknownOperator,
  ConstantDisallowed,
  MissingVariable,
};

class DslError : public std::runtime_error {
 public:
  DslError(DslErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind(kind) {}
  DslErrorKind kind;
};

// Ordered parent list plus one output bit per assignment. Assignment i maps
// the first parent to the most significant bit of i.
struct TruthTable {
  std::vector<std::string> parents;
  std::vector<uint8_t> outputs;

  bool operator==(const TruthTable& other) const = default;
};

// Effective parent set plus the truth table restricted to it; the dedup key
// for "same mechanism up to rewriting".
struct SemanticSignature {
  std::vector<std::string> parents;  // sorted
  std::vector<uint8_t> table;

  bool operator==(const SemanticSignature& other) const = default;
  bool operator<(const SemanticSignature& other) const {
    if (parents != other.parents) return parents < other.parents;
    return table < other.table;
  }
};

// Parses one s-expression. Every atom must be a known operator (in head
// position) or a vocabulary variable; 0/1/true/false atoms are rejected as
// constants. Caps input at 10,000 nodes.
ExprPtr parse(const std::string& text, const std::set<std::string>& vocabulary);

// Vocabulary-free variant: any non-operator, non-constant atom is a variable.
ExprPtr parse(const std::string& text);

std::string render(const ExprPtr& e);

int evaluate(const ExprPtr& e, const std::map<std::string, int>& assignment);

std::vector<std::string> occurring_variables(const ExprPtr& e);  // sorted, distinct

TruthTable truth_table(const ExprPtr& e, const std::vector<std::string>& parents);

std::vector<std::string> effective_parents(const ExprPtr& e);  // sorted

SemanticSignature signature_of(const ExprPtr& e);

bool semantically_equal(const ExprPtr& a, const ExprPtr& b);

struct AstMetrics {
  int size = 0;   // operator nodes + variable references
  int depth = 0;  // bare variable = 1
};

AstMetrics ast_metrics(const ExprPtr& e);

// Deterministic normal form: children of commutative operators sorted by
// rendered string, duplicate children collapsed for and/or, double negation
// eliminated.
ExprPtr canonicalize(const ExprPtr& e);

}  // namespace scmkit::dsl
