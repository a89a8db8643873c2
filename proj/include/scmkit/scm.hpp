#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "scmkit/dsl.hpp"

namespace scmkit::scm {

// Roots + endogenous variables + one mechanism per endogenous variable.
// The effective (functional-parent) dependency graph must be acyclic.
struct Scm {
  std::vector<std::string> observed;  // canonical listing order
  std::vector<std::string> roots;
  std::vector<std::string> endogenous;
  std::map<std::string, dsl::ExprPtr> mechanisms;
};

enum class Setting { Ordered, BlockOrder, HiddenOrder, HiddenRoots };

const char* setting_name(Setting s);
std::optional<Setting> setting_from_name(const std::string& name);

// What the task reveals about the latent structure.
struct Disclosure {
  Setting setting = Setting::HiddenOrder;
  std::vector<std::string> observed;
  std::vector<std::string> roots;                // not disclosed for HiddenRoots
  std::vector<std::string> endogenous;           // not disclosed for HiddenRoots
  std::vector<std::string> order;                // Ordered only
  std::vector<std::vector<std::string>> blocks;  // BlockOrder only (roots block first)
  std::vector<std::string> operators = {"not", "and", "or", "xor", "iff"};
};

struct ParentGraph {
  std::set<std::pair<std::string, std::string>> edges;  // U -> V, V endogenous
};

// Evaluator stages in order; `reached` is the furthest stage passed.
enum class FunnelStage : int { None = 0, Schema, Keys, Parse, Legal, Acyclic, Valid };

const char* funnel_stage_name(FunnelStage s);

// Raw submission payload before validation. `roots` is present only for
// HiddenRoots answers.
struct SubmissionText {
  std::optional<std::vector<std::string>> roots;
  std::map<std::string, std::string> mechanisms;
};

struct ValidityReport {
  FunnelStage reached = FunnelStage::None;
  std::string detail;
  std::optional<Scm> model;  // populated when reached == Valid
  bool valid() const { return reached == FunnelStage::Valid; }
};

class CycleError : public std::runtime_error {
 public:
  CycleError(std::vector<std::string> cycle, const std::string& msg)
      : std::runtime_error(msg), cycle(std::move(cycle)) {}
  std::vector<std::string> cycle;
};

// Mechanism pre-analyzed for replay: effective parents plus the restricted
// truth table, so evaluation is a table lookup.
struct CompiledMechanism {
  std::vector<std::string> parents;  // effective, sorted
  std::vector<uint8_t> table;
};

struct CompiledScm {
  Scm model;
  std::set<std::string> root_set;
  std::set<std::string> endogenous_set;
  std::vector<std::string> topo;  // all observed, effective-parent respecting
  std::map<std::string, CompiledMechanism> mechanisms;
};

ParentGraph functional_parent_graph(const Scm& m);

// Deterministic order (lexicographic tie-break) in which every variable
// follows its effective parents. Throws CycleError with a witness cycle.
std::vector<std::string> topological_order(const Scm& m);

// Runs the validity funnel: schema -> keys -> parse -> legal -> acyclic -> valid.
ValidityReport validate(const SubmissionText& sub, const Disclosure& d);

// Convenience: render an in-memory SCM back to text and run the funnel.
ValidityReport validate(const Scm& m, const Disclosure& d);

std::map<std::string, dsl::SemanticSignature> scm_signature(const Scm& m);

bool semantically_distinct(const Scm& a, const Scm& b);

CompiledScm compile(const Scm& m);  // throws CycleError on a cyclic graph

// Checked constructor used by the generator; throws on invariant violations.
Scm make_scm(std::vector<std::string> observed, std::vector<std::string> roots,
             std::map<std::string, dsl::ExprPtr> mechanisms);

}  // namespace scmkit::scm
