#include "scmkit/dsl.hpp"

#include <algorithm>
#include <cctype>

namespace scmkit::dsl {

namespace {
constexpr int kMaxNodes = 10000;
}

const char* op_name(Op op) {
  switch (op) {
    case Op::Not: return "not";
    case Op::And: return "and";
    case Op::Or: return "or";
    case Op::Xor: return "xor";
    case Op::Iff: return "iff";
  }
  return "?";
}

std::optional<Op> op_from_name(const std::string& name) {
  if (name == "not") return Op::Not;
  if (name == "and") return Op::And;
  if (name == "or") return Op::Or;
  if (name == "xor") return Op::Xor;
  if (name == "iff") return Op::Iff;
  return std::nullopt;
}

ExprPtr Expr::variable(std::string name) {
  auto e = std::shared_ptr<Expr>(new Expr());
  e->name_ = std::move(name);
  return e;
}

ExprPtr Expr::apply(Op op, std::vector<ExprPtr> children) {
  if (op == Op::Not) {
    if (children.size() != 1)
      throw DslError(DslErrorKind::Arity, "not takes exactly 1 argument");
  } else if (children.size() < 2) {
    throw DslError(DslErrorKind::Arity,
                   std::string(op_name(op)) + " takes at least 2 arguments");
  }
  auto e = std::shared_ptr<Expr>(new Expr());
  e->op_ = op;
  e->children_ = std::move(children);
  return e;
}

bool structurally_equal(const ExprPtr& a, const ExprPtr& b) {
  if (a->is_var() != b->is_var()) return false;
  if (a->is_var()) return a->name() == b->name();
  if (a->op() != b->op()) return false;
  if (a->children().size() != b->children().size()) return false;
  for (size_t i = 0; i < a->children().size(); ++i)
    if (!structurally_equal(a->children()[i], b->children()[i])) return false;
  return true;
}

namespace {

struct Token {
  enum Kind { LParen, RParen, Atom } kind;
  std::string text;
};

std::vector<Token> tokenize(const std::string& text) {
  std::vector<Token> out;
  size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == '(') {
      out.push_back({Token::LParen, "("});
      ++i;
    } else if (c == ')') {
      out.push_back({Token::RParen, ")"});
      ++i;
    } else {
      size_t j = i;
      while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j])) &&
             text[j] != '(' && text[j] != ')')
        ++j;
      out.push_back({Token::Atom, text.substr(i, j - i)});
      i = j;
    }
  }
  return out;
}

bool is_constant_atom(const std::string& atom) {
  return atom == "0" || atom == "1" || atom == "true" || atom == "false";
}

class Parser {
 public:
  Parser(std::vector<Token> tokens, const std::set<std::string>* vocab)
      : tokens_(std::move(tokens)), vocab_(vocab) {}

  ExprPtr run() {
    if (tokens_.empty()) throw DslError(DslErrorKind::Parse, "empty input");
    ExprPtr e = expr();
    if (pos_ != tokens_.size())
      throw DslError(DslErrorKind::Parse, "trailing input after expression");
    return e;
  }

 private:
  ExprPtr expr() {
    if (++nodes_ > kMaxNodes)
      throw DslError(DslErrorKind::Parse, "expression exceeds 10000 nodes");
    const Token& t = next();
    if (t.kind == Token::Atom) return atom_var(t.text);
    if (t.kind == Token::RParen)
      throw DslError(DslErrorKind::Parse, "unexpected ')'");
    // operator application
    const Token& head = next();
    if (head.kind != Token::Atom)
      throw DslError(DslErrorKind::Parse, "expected operator after '('");
    auto op = op_from_name(head.text);
    if (!op) {
      if (is_constant_atom(head.text))
        throw DslError(DslErrorKind::ConstantDisallowed,
                       "constant '" + head.text + "' is not allowed");
      throw DslError(DslErrorKind::UnknownOperator,
                     "unknown operator '" + head.text + "'");
    }
    std::vector<ExprPtr> children;
    while (true) {
      if (pos_ >= tokens_.size())
        throw DslError(DslErrorKind::Parse, "unbalanced '('");
      if (tokens_[pos_].kind == Token::RParen) {
        ++pos_;
        break;
      }
      children.push_back(expr());
    }
    if (*op == Op::Not ? children.size() != 1 : children.size() < 2)
      throw DslError(DslErrorKind::Arity,
                     std::string("wrong arity for '") + op_name(*op) + "'");
    return Expr::apply(*op, std::move(children));
  }

  ExprPtr atom_var(const std::string& atom) {
    if (is_constant_atom(atom))
      throw DslError(DslErrorKind::ConstantDisallowed,
                     "constant '" + atom + "' is not allowed");
    if (op_from_name(atom))
      throw DslError(DslErrorKind::Parse,
                     "operator '" + atom + "' used as a variable");
    if (vocab_ && !vocab_->count(atom))
      throw DslError(DslErrorKind::UnknownVariable,
                     "unknown variable '" + atom + "'");
    return Expr::variable(atom);
  }

  const Token& next() {
    if (pos_ >= tokens_.size())
      throw DslError(DslErrorKind::Parse, "unexpected end of input");
    return tokens_[pos_++];
  }

  std::vector<Token> tokens_;
  const std::set<std::string>* vocab_;
  size_t pos_ = 0;
  int nodes_ = 0;
};

}  // namespace

ExprPtr parse(const std::string& text, const std::set<std::string>& vocabulary) {
  return Parser(tokenize(text), &vocabulary).run();
}

ExprPtr parse(const std::string& text) { return Parser(tokenize(text), nullptr).run(); }

std::string render(const ExprPtr& e) {
  if (e->is_var()) return e->name();
  std::string out = "(";
  out += op_name(e->op());
  for (const auto& c : e->children()) {
    out += ' ';
    out += render(c);
  }
  out += ')';
  return out;
}

int evaluate(const ExprPtr& e, const std::map<std::string, int>& assignment) {
  if (e->is_var()) {
    auto it = assignment.find(e->name());
    if (it == assignment.end())
      throw DslError(DslErrorKind::MissingVariable,
                     "no value for variable '" + e->name() + "'");
    return it->second & 1;
  }
  const auto& ch = e->children();
  switch (e->op()) {
    case Op::Not:
      return 1 - evaluate(ch[0], assignment);
    case Op::And: {
      for (const auto& c : ch)
        if (!evaluate(c, assignment)) return 0;
      return 1;
    }
    case Op::Or: {
      for (const auto& c : ch)
        if (evaluate(c, assignment)) return 1;
      return 0;
    }
    case Op::Xor: {
      int acc = 0;
      for (const auto& c : ch) acc ^= evaluate(c, assignment);
      return acc;
    }
    case Op::Iff: {
      int acc = evaluate(ch[0], assignment);
      for (size_t i = 1; i < ch.size(); ++i)
        acc = (acc == evaluate(ch[i], assignment)) ? 1 : 0;
      return acc;
    }
  }
  return 0;
}

namespace {
void collect_vars(const ExprPtr& e, std::set<std::string>& out) {
  if (e->is_var()) {
    out.insert(e->name());
    return;
  }
  for (const auto& c : e->children()) collect_vars(c, out);
}
}  // namespace

std::vector<std::string> occurring_variables(const ExprPtr& e) {
  std::set<std::string> s;
  collect_vars(e, s);
  return {s.begin(), s.end()};
}

TruthTable truth_table(const ExprPtr& e, const std::vector<std::string>& parents) {
  {
    std::set<std::string> seen;
    for (const auto& p : parents)
      if (!seen.insert(p).second)
        throw DslError(DslErrorKind::Parse, "duplicate parent '" + p + "'");
    for (const auto& v : occurring_variables(e))
      if (!seen.count(v))
        throw DslError(DslErrorKind::MissingVariable,
                       "parent list does not cover '" + v + "'");
  }
  size_t k = parents.size();
  if (k > 20) throw DslError(DslErrorKind::Parse, "too many parents for a truth table");
  TruthTable table;
  table.parents = parents;
  table.outputs.resize(size_t{1} << k);
  std::map<std::string, int> assignment;
  for (size_t idx = 0; idx < table.outputs.size(); ++idx) {
    for (size_t j = 0; j < k; ++j)
      assignment[parents[j]] = static_cast<int>((idx >> (k - 1 - j)) & 1);
    table.outputs[idx] = static_cast<uint8_t>(evaluate(e, assignment));
  }
  return table;
}

std::vector<std::string> effective_parents(const ExprPtr& e) {
  std::vector<std::string> occ = occurring_variables(e);
  TruthTable full = truth_table(e, occ);
  size_t k = occ.size();
  std::vector<std::string> eff;
  for (size_t j = 0; j < k; ++j) {
    size_t flip = size_t{1} << (k - 1 - j);
    bool matters = false;
    for (size_t idx = 0; idx < full.outputs.size() && !matters; ++idx)
      if (full.outputs[idx] != full.outputs[idx ^ flip]) matters = true;
    if (matters) eff.push_back(occ[j]);
  }
  return eff;
}

SemanticSignature signature_of(const ExprPtr& e) {
  std::vector<std::string> occ = occurring_variables(e);
  std::vector<std::string> eff = effective_parents(e);
  TruthTable full = truth_table(e, occ);
  size_t k = occ.size();

  // Restrict to effective parents: read outputs with every non-effective
  // variable fixed to 0 (the output does not depend on them).
  std::vector<size_t> eff_pos;
  for (const auto& v : eff)
    eff_pos.push_back(static_cast<size_t>(
        std::lower_bound(occ.begin(), occ.end(), v) - occ.begin()));
  SemanticSignature sig;
  sig.parents = eff;
  sig.table.resize(size_t{1} << eff.size());
  for (size_t idx = 0; idx < sig.table.size(); ++idx) {
    size_t full_idx = 0;
    for (size_t j = 0; j < eff.size(); ++j)
      if ((idx >> (eff.size() - 1 - j)) & 1)
        full_idx |= size_t{1} << (k - 1 - eff_pos[j]);
    sig.table[idx] = full.outputs[full_idx];
  }
  return sig;
}

bool semantically_equal(const ExprPtr& a, const ExprPtr& b) {
  std::set<std::string> u;
  collect_vars(a, u);
  collect_vars(b, u);
  std::vector<std::string> support(u.begin(), u.end());
  return truth_table(a, support).outputs == truth_table(b, support).outputs;
}

AstMetrics ast_metrics(const ExprPtr& e) {
  if (e->is_var()) return {1, 1};
  AstMetrics m{1, 0};
  for (const auto& c : e->children()) {
    AstMetrics cm = ast_metrics(c);
    m.size += cm.size;
    m.depth = std::max(m.depth, cm.depth);
  }
  m.depth += 1;
  return m;
}

namespace {
bool is_commutative(Op op) { return op != Op::Not; }
}  // namespace

ExprPtr canonicalize(const ExprPtr& e) {
  if (e->is_var()) return e;
  std::vector<ExprPtr> children;
  children.reserve(e->children().size());
  for (const auto& c : e->children()) children.push_back(canonicalize(c));

  if (e->op() == Op::Not) {
    // double negation
    if (!children[0]->is_var() && children[0]->op() == Op::Not)
      return children[0]->children()[0];
    return Expr::apply(Op::Not, std::move(children));
  }

  if (is_commutative(e->op())) {
    std::vector<std::pair<std::string, ExprPtr>> keyed;
    keyed.reserve(children.size());
    for (auto& c : children) keyed.emplace_back(render(c), c);
    std::stable_sort(keyed.begin(), keyed.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    children.clear();
    if (e->op() == Op::And || e->op() == Op::Or) {
      for (size_t i = 0; i < keyed.size(); ++i)
        if (i == 0 || keyed[i].first != keyed[i - 1].first)
          children.push_back(keyed[i].second);
      if (children.size() == 1) return children[0];
    } else {
      for (auto& kv : keyed) children.push_back(kv.second);
    }
  }
  return Expr::apply(e->op(), std::move(children));
}

}  // namespace scmkit::dsl
