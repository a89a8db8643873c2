#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "scmkit/boolenum.hpp"
#include "scmkit/rng.hpp"
#include "scmkit/worlds.hpp"

namespace scmkit::generator {

// Per-stratum acceptance thresholds for candidate records.
struct StratumThresholds {
  int min_scored_worlds = 3;      // scored training worlds per endogenous variable
  int min_scored_cells = 33;      // scored training cells per endogenous variable
  int min_assigned_worlds = 3;    // hard_assigned training worlds
  int max_assigned_worlds = 4;
  int min_constant_worlds = 1;    // hard_constant training worlds
  int max_constant_worlds = 2;
  int max_intervened_per_var = 5; // worlds intervening on one endogenous variable
  double novelty_lo = 0.20;       // held-out target novelty bounds
  double novelty_hi = 0.72;
  double local_support_min = 0.5; // per-variable probe-pattern coverage
};

struct ShortcutConfig {
  int ast_floor = 2;
  int ast_cap = 5;
};

struct ReductionConfig {
  int proposals = 170;        // candidate worlds across the whole loop
  int iterations = 8;
  double kill_fraction = 0.75;
  double forced_focus_rate = 0.05;  // probability of a size-4 target set
};

struct SearchBudget {
  int ast_slack = 2;
  int ast_cap = 8;
  long states_per_size = 50000;
  double time_per_var_sec = 2.5;
};

struct PairAuditBudget {
  int ast_slack = 3;
  int ast_cap = 9;
  int max_upstream = 5;  // upstream alternatives per variable
  double time_per_problem_sec = 120.0;
};

struct GeneratorConfig {
  int min_vars = 6, max_vars = 10;
  int root_count = 3;
  int max_predecessors = 4;  // in {2,3,4,5}
  int mech_min_size = 3, mech_max_size = 14;
  int mech_min_depth = 2, mech_max_depth = 6;
  int rows_min = 10, rows_max = 12;
  int compact_rows_min = 4, compact_rows_max = 8;
  int training_target = 8;
  int heldout_count = 8;
  int max_added_worlds = 3;  // shared by survivor reduction + disambiguation
  std::vector<double> env_levels = {0.2, 0.35, 0.5, 0.65, 0.8};
  std::vector<double> assigned_bias = {0.3, 0.5, 0.7};
  StratumThresholds stratum;
  ShortcutConfig shortcut;
  ReductionConfig reduction;
  SearchBudget disambiguation = {2, 8, 50000, 2.5};
  SearchBudget audit_local_budget = {4, 10, 80000, 4.0};
  PairAuditBudget audit_pairs_budget;
  double probe4_rate = 0.05;  // records using probe subset size 4
  int mech_resample_cap = 400;
  int max_attempts_per_problem = 400;

  nlohmann::json to_json() const;
  static GeneratorConfig from_json(const nlohmann::json& j);
};

struct SampledScm {
  scm::Scm model;
  std::vector<std::string> latent_order;
};

// Algorithm-style SCM sampler: three roots first in latent order, labels
// permuted, every declared parent semantically active, non-constant tables.
SampledScm sample_scm(const GeneratorConfig& cfg, Rng& rng);

struct RejectInfo {
  std::string stage;
  std::string detail;
};

using BuildOutcome = std::variant<worlds::ProblemRecord, RejectInfo>;

BuildOutcome build_problem(const GeneratorConfig& cfg, Rng rng, const std::string& id,
                           uint64_t record_seed);

struct PoolResult {
  std::vector<worlds::ProblemRecord> records;
  nlohmann::json manifest;  // config echo, conventions, per-record outcomes
};

PoolResult generate_pool(const GeneratorConfig& cfg, int count, uint64_t master_seed);

// A bounded-class formula fitting every current training row for `variable`
// while differing semantically from its gold mechanism.
struct ShortcutSurvivor {
  std::string variable;
  dsl::ExprPtr expr;
  int size = 0;
  std::vector<std::string> support;
  boolenum::TableBits table;
};

std::vector<ShortcutSurvivor> shortcut_survivors(const worlds::ProblemRecord& record,
                                                 const GeneratorConfig& cfg);

struct ReductionOutcome {
  worlds::ProblemRecord record;
  long initial_survivors = 0;
  long killed = 0;
  int worlds_added = 0;
  int proposals_used = 0;
  bool threshold_met = false;
  double fraction() const {
    return initial_survivors == 0
               ? 1.0
               : static_cast<double>(killed) / static_cast<double>(initial_survivors);
  }
};

ReductionOutcome reduce_survivors(const worlds::ProblemRecord& record,
                                  const GeneratorConfig& cfg, Rng& rng,
                                  int added_budget);

struct DisambiguationOutcome {
  worlds::ProblemRecord record;
  int worlds_added = 0;
  long alternatives_found = 0;
  long alternatives_remaining = 0;
};

DisambiguationOutcome targeted_disambiguation(const worlds::ProblemRecord& record,
                                              const GeneratorConfig& cfg, Rng& rng,
                                              int added_budget);

struct AuditResult {
  std::map<std::string, long> local_alternatives;  // per endogenous variable
  long pair_alternatives = 0;
  bool truncated = false;   // a state cap was hit
  bool timed_out = false;   // a wall-clock budget fired
  double wall_seconds = 0;  // in-memory only, never serialized
  long total_local() const {
    long t = 0;
    for (const auto& [v, c] : local_alternatives) t += c;
    return t;
  }
};

AuditResult audit_local(const worlds::ProblemRecord& record, const GeneratorConfig& cfg);
AuditResult audit_pairs(const worlds::ProblemRecord& record, const GeneratorConfig& cfg);

// Same gold SCM and worlds; only the disclosure and answer schema differ.
std::map<scm::Setting, worlds::ProblemRecord> derive_variants(
    const worlds::ProblemRecord& record);

worlds::ProblemRecord select_extra_worlds(const worlds::ProblemRecord& record,
                                          const GeneratorConfig& cfg, Rng& rng);

struct AltPoolEntry {
  scm::Scm model;
  std::string source;
};

struct CexOutcome {
  worlds::ProblemRecord record;
  int coverage_worlds_added = 0;
  int separating_worlds_added = 0;
  long pool_alternatives = 0;   // deduplicated, train-exact on entry
  long survivors_after = 0;     // must be zero
};

CexOutcome build_cex(const worlds::ProblemRecord& extra_record,
                     const std::vector<AltPoolEntry>& pool, const GeneratorConfig& cfg,
                     Rng& rng);

struct AltTask {
  std::string id;
  std::string record_id;
  scm::Setting setting;
  scm::Scm reference;
  std::string source;
  // retained separating-intervention existence certificate
  std::string target;
  int value = 0;
  std::map<std::string, int> witness;  // full root assignment
};

std::vector<AltTask> build_alt_tasks(const worlds::ProblemRecord& record,
                                     const std::vector<AltPoolEntry>& pool);

}  // namespace scmkit::generator
