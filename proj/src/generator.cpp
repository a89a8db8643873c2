#include "scmkit/generator.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <set>

#include "scmkit/metrics.hpp"
#include "scmkit/solvers.hpp"

namespace scmkit::generator {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<std::string> var_names(int n) {
  std::vector<std::string> v;
  for (int i = 1; i <= n; ++i) v.push_back("X" + std::to_string(i));
  return v;
}

std::vector<std::string> predecessors(const std::vector<std::string>& latent_order,
                                      const std::string& v) {
  std::vector<std::string> out;
  for (const auto& u : latent_order) {
    if (u == v) break;
    out.push_back(u);
  }
  return out;
}

std::set<worlds::IvSignature> heldout_signatures(const worlds::ProblemRecord& record) {
  std::set<worlds::IvSignature> sigs;
  for (const auto& w : record.heldout) sigs.insert(worlds::signature_of(w.iv));
  return sigs;
}

std::set<worlds::IvSignature> training_signatures(const worlds::ProblemRecord& record) {
  std::set<worlds::IvSignature> sigs;
  for (const auto& w : record.training) sigs.insert(worlds::signature_of(w.iv));
  return sigs;
}

std::string next_train_id(const worlds::ProblemRecord& record) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "train_%02zu", record.training.size());
  return buf;
}

std::map<std::string, double> sample_env(const GeneratorConfig& cfg, Rng& rng,
                                         const scm::Scm& gold) {
  std::map<std::string, double> env;
  for (const auto& r : gold.roots) env[r] = rng.pick(cfg.env_levels);
  return env;
}

std::vector<worlds::Unit> sample_units(Rng& rng, const scm::Scm& gold, int count,
                                       const std::string& prefix, int first_index) {
  std::vector<worlds::Unit> units;
  for (int i = 0; i < count; ++i) {
    worlds::Unit u;
    char buf[16];
    std::snprintf(buf, sizeof buf, "%s%02d", prefix.c_str(), first_index + i);
    u.id = buf;
    for (const auto& r : gold.roots) u.thresholds[r] = rng.uniform_real();
    units.push_back(std::move(u));
  }
  return units;
}

// Targets clamped to per-row bits; all-equal multi-row vectors are repaired
// to include both values by flipping the last entry.
std::vector<int> sample_assigned_bits(Rng& rng, const GeneratorConfig& cfg,
                                      size_t rows) {
  double bias = rng.pick(cfg.assigned_bias);
  std::vector<int> bits;
  bits.reserve(rows);
  for (size_t i = 0; i < rows; ++i) bits.push_back(rng.bernoulli(bias) ? 1 : 0);
  if (rows > 1) {
    bool all_equal = true;
    for (int b : bits) all_equal = all_equal && b == bits[0];
    if (all_equal) bits.back() = 1 - bits.back();
  }
  return bits;
}

worlds::Intervention sample_intervention(Rng& rng, const GeneratorConfig& cfg,
                                         const std::vector<std::string>& observed,
                                         worlds::IvMode mode, size_t rows) {
  worlds::Intervention iv;
  iv.mode = mode;
  if (mode == worlds::IvMode::None) return iv;
  int size = rng.bernoulli(cfg.reduction.forced_focus_rate)
                 ? 4
                 : static_cast<int>(rng.uniform_int(1, 3));
  size = std::min<int>(size, static_cast<int>(observed.size()) - 1);
  std::vector<std::string> pool = observed;
  rng.shuffle(pool);
  pool.resize(static_cast<size_t>(size));
  for (const auto& t : pool) {
    if (mode == worlds::IvMode::HardConstant)
      iv.constants[t] = static_cast<int>(rng.uniform_int(0, 1));
    else
      iv.assigned[t] = sample_assigned_bits(rng, cfg, rows);
  }
  return iv;
}

boolenum::TableBits gold_table_over(const scm::Scm& gold, const std::string& v,
                                    const std::vector<std::string>& support) {
  return boolenum::table_of_expr(gold.mechanisms.at(v), support);
}

// Does the table over `support` reproduce v on every non-intervened row?
bool consistent_with_world(const boolenum::TableBits& table,
                           const std::vector<std::string>& support,
                           const worlds::World& w, const std::string& v) {
  if (w.iv.intervenes(v)) return true;
  for (const auto& row : w.rows) {
    size_t idx = 0;
    for (size_t j = 0; j < support.size(); ++j)
      if (row.at(support[j])) idx |= size_t{1} << (support.size() - 1 - j);
    if (table.get(idx) != (row.at(v) == 1)) return false;
  }
  return true;
}

bool consistent_with_training(const boolenum::TableBits& table,
                              const std::vector<std::string>& support,
                              const worlds::ProblemRecord& record,
                              const std::string& v) {
  for (const auto& w : record.training)
    if (!consistent_with_world(table, support, w, v)) return false;
  return true;
}

boolenum::PartialTable partial_bits(const worlds::ProblemRecord& record,
                                    const std::string& v,
                                    const std::vector<std::string>& support) {
  boolenum::PartialTable bits;
  bits.required = boolenum::TableBits::zeros(static_cast<int>(support.size()));
  bits.defined = boolenum::TableBits::zeros(static_cast<int>(support.size()));
  for (const auto& w : record.training) {
    if (w.iv.intervenes(v)) continue;
    for (const auto& row : w.rows) {
      size_t idx = 0;
      for (size_t j = 0; j < support.size(); ++j)
        if (row.at(support[j])) idx |= size_t{1} << (support.size() - 1 - j);
      bits.defined.set(idx, true);
      bits.required.set(idx, row.at(v) == 1);
    }
  }
  return bits;
}

// Compact gold-simulated world over fresh units realizing `patterns` over
// `vars` row by row: endogenous members are clamped (hard_assigned), root
// members are steered through constructed unit thresholds at level 0.5.
worlds::World targeted_world(const worlds::ProblemRecord& record,
                             const GeneratorConfig& cfg, Rng& rng,
                             const std::vector<std::string>& vars,
                             std::vector<std::vector<int>> patterns,
                             const std::string& avoid_var,
                             const std::set<worlds::IvSignature>& excluded,
                             std::vector<worlds::Unit>* fresh_units) {
  const scm::Scm& gold = record.gold;
  std::set<std::string> root_set(gold.roots.begin(), gold.roots.end());

  // pad with complements so every clamped target sees both values
  size_t want_rows =
      std::max<size_t>(patterns.size(), static_cast<size_t>(cfg.compact_rows_min));
  size_t base = patterns.size();
  for (size_t i = 0; patterns.size() < want_rows; ++i) {
    std::vector<int> flip = patterns[i % base];
    for (auto& b : flip) b = 1 - b;
    patterns.push_back(flip);
  }

  std::vector<std::string> endo_targets;
  for (const auto& u : vars)
    if (!root_set.count(u)) endo_targets.push_back(u);

  worlds::Intervention iv;
  if (!endo_targets.empty()) {
    iv.mode = worlds::IvMode::HardAssigned;
    for (const auto& t : endo_targets) {
      auto pos = std::find(vars.begin(), vars.end(), t) - vars.begin();
      std::vector<int> bits;
      for (const auto& p : patterns) bits.push_back(p[static_cast<size_t>(pos)]);
      iv.assigned[t] = bits;
    }
  }
  // dodge excluded (held-out) signatures by clamping one extra variable
  while (excluded.count(worlds::signature_of(iv))) {
    std::string extra;
    for (const auto& u : record.disclosure.observed) {
      if (u == avoid_var) continue;
      if (std::find(vars.begin(), vars.end(), u) != vars.end()) continue;
      if (iv.assigned.count(u)) continue;
      extra = u;
      break;
    }
    if (extra.empty()) break;  // nothing left to dodge with
    iv.mode = worlds::IvMode::HardAssigned;
    std::vector<int> bits;
    for (size_t i = 0; i < patterns.size(); ++i)
      bits.push_back(static_cast<int>(i % 2));
    iv.assigned[extra] = bits;
  }

  // constructed thresholds realize the root bits at level 0.5
  std::vector<worlds::Unit> units;
  int base_index = static_cast<int>(record.units.size());
  for (size_t i = 0; i < patterns.size(); ++i) {
    worlds::Unit u;
    char buf[16];
    std::snprintf(buf, sizeof buf, "cu%02d", base_index + static_cast<int>(i));
    u.id = buf;
    for (const auto& r : gold.roots) {
      auto pos = std::find(vars.begin(), vars.end(), r);
      if (pos != vars.end()) {
        int bit = patterns[i][static_cast<size_t>(pos - vars.begin())];
        u.thresholds[r] = bit == 1 ? 0.25 * rng.uniform_real()
                                   : 0.5 + 0.5 * rng.uniform_real();
      } else {
        u.thresholds[r] = rng.uniform_real();
      }
    }
    units.push_back(std::move(u));
  }
  std::map<std::string, double> env;
  for (const auto& r : gold.roots) env[r] = 0.5;

  worlds::World w =
      worlds::simulate_world(gold, units, env, iv, next_train_id(record));
  w.compact = true;
  if (fresh_units) *fresh_units = units;
  return w;
}

// ---- local semantic alternatives (shared by disambiguation and audits) ----

struct LocalAlternative {
  std::string variable;
  dsl::ExprPtr expr;
  int size = 0;
  std::vector<std::string> support;
  boolenum::TableBits table;
};

struct LocalSearchOutcome {
  std::vector<LocalAlternative> found;
  bool truncated = false;
  bool timed_out = false;
};

LocalSearchOutcome local_alternatives(const worlds::ProblemRecord& record,
                                      const GeneratorConfig& cfg,
                                      const SearchBudget& budget,
                                      long max_per_variable) {
  LocalSearchOutcome out;
  for (const auto& v : record.gold.endogenous) {
    std::vector<std::string> support = predecessors(record.latent_order, v);
    if (support.empty()) continue;
    boolenum::PartialTable bits = partial_bits(record, v, support);
    boolenum::TableBits gold_bits = gold_table_over(record.gold, v, support);
    int gold_size = dsl::ast_metrics(record.gold.mechanisms.at(v)).size;

    boolenum::Query q;
    q.ast_cap = std::min(budget.ast_cap, gold_size + budget.ast_slack);
    q.states_per_size = budget.states_per_size;
    q.time_budget_sec = budget.time_per_var_sec;
    q.max_distinct_vars = cfg.max_predecessors;
    q.max_results = max_per_variable;
    q.fit = &bits;
    q.differ_from = &gold_bits;
    auto res = boolenum::enumerate_mechanisms(support, q);
    out.truncated = out.truncated || res.truncated;
    out.timed_out = out.timed_out || res.timed_out;
    for (auto& f : res.found)
      out.found.push_back({v, f.expr, f.size, support, f.table});
  }
  return out;
}

}  // namespace

// ---- config serialization ----

nlohmann::json GeneratorConfig::to_json() const {
  nlohmann::json j;
  j["min_vars"] = min_vars;
  j["max_vars"] = max_vars;
  j["root_count"] = root_count;
  j["max_predecessors"] = max_predecessors;
  j["mech_size"] = {mech_min_size, mech_max_size};
  j["mech_depth"] = {mech_min_depth, mech_max_depth};
  j["rows_per_world"] = {rows_min, rows_max};
  j["compact_rows"] = {compact_rows_min, compact_rows_max};
  j["training_target"] = training_target;
  j["heldout_count"] = heldout_count;
  j["max_added_worlds"] = max_added_worlds;
  j["env_levels"] = env_levels;
  j["assigned_bias"] = assigned_bias;
  j["stratum"] = {{"min_scored_worlds", stratum.min_scored_worlds},
                  {"min_scored_cells", stratum.min_scored_cells},
                  {"assigned_worlds", {stratum.min_assigned_worlds, stratum.max_assigned_worlds}},
                  {"constant_worlds", {stratum.min_constant_worlds, stratum.max_constant_worlds}},
                  {"max_intervened_per_var", stratum.max_intervened_per_var},
                  {"novelty_bounds", {stratum.novelty_lo, stratum.novelty_hi}},
                  {"local_support_min", stratum.local_support_min}};
  j["shortcut"] = {{"ast_floor", shortcut.ast_floor}, {"ast_cap", shortcut.ast_cap}};
  j["reduction"] = {{"proposals", reduction.proposals},
                    {"iterations", reduction.iterations},
                    {"kill_fraction", reduction.kill_fraction},
                    {"forced_focus_rate", reduction.forced_focus_rate}};
  j["disambiguation"] = {{"ast_slack", disambiguation.ast_slack},
                         {"ast_cap", disambiguation.ast_cap},
                         {"states_per_size", disambiguation.states_per_size},
                         {"time_per_var_sec", disambiguation.time_per_var_sec}};
  j["audit_local"] = {{"ast_slack", audit_local_budget.ast_slack},
                      {"ast_cap", audit_local_budget.ast_cap},
                      {"states_per_size", audit_local_budget.states_per_size},
                      {"time_per_var_sec", audit_local_budget.time_per_var_sec}};
  j["audit_pairs"] = {{"ast_slack", audit_pairs_budget.ast_slack},
                      {"ast_cap", audit_pairs_budget.ast_cap},
                      {"max_upstream", audit_pairs_budget.max_upstream},
                      {"time_per_problem_sec", audit_pairs_budget.time_per_problem_sec}};
  j["probe4_rate"] = probe4_rate;
  j["mech_resample_cap"] = mech_resample_cap;
  j["max_attempts_per_problem"] = max_attempts_per_problem;
  return j;
}

GeneratorConfig GeneratorConfig::from_json(const nlohmann::json& j) {
  GeneratorConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("min_vars", c.min_vars);
  get("max_vars", c.max_vars);
  get("root_count", c.root_count);
  get("max_predecessors", c.max_predecessors);
  if (j.contains("mech_size")) {
    c.mech_min_size = j["mech_size"][0];
    c.mech_max_size = j["mech_size"][1];
  }
  if (j.contains("mech_depth")) {
    c.mech_min_depth = j["mech_depth"][0];
    c.mech_max_depth = j["mech_depth"][1];
  }
  if (j.contains("rows_per_world")) {
    c.rows_min = j["rows_per_world"][0];
    c.rows_max = j["rows_per_world"][1];
  }
  if (j.contains("compact_rows")) {
    c.compact_rows_min = j["compact_rows"][0];
    c.compact_rows_max = j["compact_rows"][1];
  }
  get("training_target", c.training_target);
  get("heldout_count", c.heldout_count);
  get("max_added_worlds", c.max_added_worlds);
  get("env_levels", c.env_levels);
  get("assigned_bias", c.assigned_bias);
  if (j.contains("stratum")) {
    const auto& s = j["stratum"];
    if (s.contains("min_scored_worlds")) c.stratum.min_scored_worlds = s["min_scored_worlds"];
    if (s.contains("min_scored_cells")) c.stratum.min_scored_cells = s["min_scored_cells"];
    if (s.contains("assigned_worlds")) {
      c.stratum.min_assigned_worlds = s["assigned_worlds"][0];
      c.stratum.max_assigned_worlds = s["assigned_worlds"][1];
    }
    if (s.contains("constant_worlds")) {
      c.stratum.min_constant_worlds = s["constant_worlds"][0];
      c.stratum.max_constant_worlds = s["constant_worlds"][1];
    }
    if (s.contains("max_intervened_per_var"))
      c.stratum.max_intervened_per_var = s["max_intervened_per_var"];
    if (s.contains("novelty_bounds")) {
      c.stratum.novelty_lo = s["novelty_bounds"][0];
      c.stratum.novelty_hi = s["novelty_bounds"][1];
    }
    if (s.contains("local_support_min"))
      c.stratum.local_support_min = s["local_support_min"];
  }
  if (j.contains("shortcut")) {
    c.shortcut.ast_floor = j["shortcut"]["ast_floor"];
    c.shortcut.ast_cap = j["shortcut"]["ast_cap"];
  }
  if (j.contains("reduction")) {
    const auto& r = j["reduction"];
    if (r.contains("proposals")) c.reduction.proposals = r["proposals"];
    if (r.contains("iterations")) c.reduction.iterations = r["iterations"];
    if (r.contains("kill_fraction")) c.reduction.kill_fraction = r["kill_fraction"];
    if (r.contains("forced_focus_rate"))
      c.reduction.forced_focus_rate = r["forced_focus_rate"];
  }
  auto get_budget = [&](const char* key, SearchBudget& b) {
    if (!j.contains(key)) return;
    const auto& s = j[key];
    if (s.contains("ast_slack")) b.ast_slack = s["ast_slack"];
    if (s.contains("ast_cap")) b.ast_cap = s["ast_cap"];
    if (s.contains("states_per_size")) b.states_per_size = s["states_per_size"];
    if (s.contains("time_per_var_sec")) b.time_per_var_sec = s["time_per_var_sec"];
  };
  get_budget("disambiguation", c.disambiguation);
  get_budget("audit_local", c.audit_local_budget);
  if (j.contains("audit_pairs")) {
    const auto& s = j["audit_pairs"];
    if (s.contains("ast_slack")) c.audit_pairs_budget.ast_slack = s["ast_slack"];
    if (s.contains("ast_cap")) c.audit_pairs_budget.ast_cap = s["ast_cap"];
    if (s.contains("max_upstream")) c.audit_pairs_budget.max_upstream = s["max_upstream"];
    if (s.contains("time_per_problem_sec"))
      c.audit_pairs_budget.time_per_problem_sec = s["time_per_problem_sec"];
  }
  get("probe4_rate", c.probe4_rate);
  get("mech_resample_cap", c.mech_resample_cap);
  get("max_attempts_per_problem", c.max_attempts_per_problem);
  return c;
}

// ---- Latent SCM sampling ----

namespace {

dsl::ExprPtr random_mech_expr(Rng& rng, std::vector<std::string> parents, int depth) {
  if (parents.size() == 1) {
    dsl::ExprPtr leaf = dsl::Expr::variable(parents[0]);
    return rng.bernoulli(0.4) ? dsl::Expr::apply(dsl::Op::Not, {leaf}) : leaf;
  }
  dsl::Op op = std::array{dsl::Op::And, dsl::Op::Or, dsl::Op::Xor,
                          dsl::Op::Iff}[static_cast<size_t>(rng.uniform_int(0, 3))];
  size_t groups = static_cast<size_t>(
      rng.uniform_int(2, std::min<int64_t>(3, static_cast<int64_t>(parents.size()))));
  rng.shuffle(parents);
  std::vector<std::vector<std::string>> parts(groups);
  for (size_t i = 0; i < parents.size(); ++i) {
    size_t slot = i < groups ? i
                             : static_cast<size_t>(rng.uniform_int(
                                   0, static_cast<int64_t>(groups) - 1));
    parts[slot].push_back(parents[i]);
  }
  // occasionally re-use one parent in a second slot for extra texture
  if (depth > 1 && rng.bernoulli(0.25))
    parts[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(groups) - 1))]
        .push_back(parents[static_cast<size_t>(
            rng.uniform_int(0, static_cast<int64_t>(parents.size()) - 1))]);
  std::vector<dsl::ExprPtr> children;
  for (auto& part : parts) {
    dsl::ExprPtr c = (depth <= 1 || (part.size() == 1 && rng.bernoulli(0.6)))
                         ? dsl::Expr::variable(part[0])
                         : random_mech_expr(rng, part, depth - 1);
    if (part.size() == 1 && c->is_var() && rng.bernoulli(0.3))
      c = dsl::Expr::apply(dsl::Op::Not, {c});
    children.push_back(c);
  }
  return dsl::Expr::apply(op, std::move(children));
}

}  // namespace

SampledScm sample_scm(const GeneratorConfig& cfg, Rng& rng) {
  int n = static_cast<int>(rng.uniform_int(cfg.min_vars, cfg.max_vars));
  std::vector<std::string> labels = var_names(n);
  rng.shuffle(labels);  // labels carry no order information
  std::vector<std::string> latent_order = labels;
  std::vector<std::string> roots(latent_order.begin(),
                                 latent_order.begin() + cfg.root_count);

  std::map<std::string, dsl::ExprPtr> mechanisms;
  for (size_t i = static_cast<size_t>(cfg.root_count); i < latent_order.size(); ++i) {
    const std::string& v = latent_order[i];
    std::vector<std::string> pool(latent_order.begin(),
                                  latent_order.begin() + static_cast<long>(i));
    int max_parents = std::min<int>(cfg.max_predecessors, static_cast<int>(pool.size()));
    int min_parents = pool.size() >= 2 ? 2 : 1;

    bool accepted = false;
    for (int attempt = 0; attempt < cfg.mech_resample_cap && !accepted; ++attempt) {
      int k = static_cast<int>(rng.uniform_int(min_parents, max_parents));
      std::vector<std::string> parents = pool;
      rng.shuffle(parents);
      parents.resize(static_cast<size_t>(k));
      dsl::ExprPtr e =
          dsl::canonicalize(random_mech_expr(rng, parents, 3));
      dsl::AstMetrics m = dsl::ast_metrics(e);
      if (m.size < cfg.mech_min_size || m.size > cfg.mech_max_size) continue;
      if (m.depth < cfg.mech_min_depth || m.depth > cfg.mech_max_depth) continue;
      // every declared parent semantically active, table non-constant
      std::vector<std::string> eff = dsl::effective_parents(e);
      std::vector<std::string> sorted_parents = parents;
      std::sort(sorted_parents.begin(), sorted_parents.end());
      if (eff != sorted_parents) continue;
      boolenum::TableBits t = boolenum::table_of_expr(e, sorted_parents);
      if (boolenum::table_constant(t)) continue;
      mechanisms[v] = e;
      accepted = true;
    }
    if (!accepted)
      throw std::runtime_error("mechanism resampling budget exhausted for " + v);
  }

  // roots are listed in observed order; the latent order is carried separately
  std::vector<std::string> observed = var_names(n);
  std::vector<std::string> roots_sorted;
  for (const auto& v : observed)
    if (std::find(roots.begin(), roots.end(), v) != roots.end())
      roots_sorted.push_back(v);

  SampledScm out;
  out.latent_order = latent_order;
  out.model = scm::make_scm(observed, roots_sorted, mechanisms);
  return out;
}

// ---- shortcut survivors and reduction ----

std::vector<ShortcutSurvivor> shortcut_survivors(const worlds::ProblemRecord& record,
                                                 const GeneratorConfig& cfg) {
  std::vector<ShortcutSurvivor> out;
  for (const auto& v : record.gold.endogenous) {
    std::vector<std::string> support = predecessors(record.latent_order, v);
    if (support.empty()) continue;
    boolenum::PartialTable bits = partial_bits(record, v, support);
    boolenum::TableBits gold_bits = gold_table_over(record.gold, v, support);
    boolenum::Query q;
    q.ast_floor = cfg.shortcut.ast_floor;
    q.ast_cap = cfg.shortcut.ast_cap;
    q.states_per_size = 200000;
    q.max_distinct_vars = cfg.max_predecessors;
    q.fit = &bits;
    q.differ_from = &gold_bits;
    auto res = boolenum::enumerate_mechanisms(support, q);
    for (auto& f : res.found)
      out.push_back({v, f.expr, f.size, support, f.table});
  }
  return out;
}

ReductionOutcome reduce_survivors(const worlds::ProblemRecord& record,
                                  const GeneratorConfig& cfg, Rng& rng,
                                  int added_budget) {
  ReductionOutcome out;
  out.record = record;
  std::vector<ShortcutSurvivor> survivors = shortcut_survivors(record, cfg);
  out.initial_survivors = static_cast<long>(survivors.size());
  if (survivors.empty()) {
    out.threshold_met = true;
    return out;
  }

  std::set<worlds::IvSignature> excluded = heldout_signatures(record);
  long target_kills = static_cast<long>(
      std::ceil(cfg.reduction.kill_fraction * static_cast<double>(survivors.size())));
  int per_iteration =
      std::max(1, cfg.reduction.proposals / std::max(1, cfg.reduction.iterations));

  std::map<std::string, int> intervened_count;
  for (const auto& w : out.record.training)
    for (const auto& t : w.iv.targets()) intervened_count[t] += 1;

  for (int iter = 0; iter < cfg.reduction.iterations; ++iter) {
    if (out.killed >= target_kills || out.worlds_added >= added_budget) break;
    worlds::World best;
    long best_kills = 0;
    std::vector<worlds::Unit> best_units;
    for (int p = 0;
         p < per_iteration && out.proposals_used < cfg.reduction.proposals; ++p) {
      out.proposals_used += 1;
      worlds::World candidate;
      std::vector<worlds::Unit> fresh;
      if (rng.bernoulli(0.35)) {
        // targeted proposal: clamp the endogenous half of a distinguishing
        // assignment for one surviving shortcut
        const ShortcutSurvivor& s =
            survivors[static_cast<size_t>(rng.uniform_int(
                0, static_cast<int64_t>(survivors.size()) - 1))];
        boolenum::TableBits gold_bits =
            gold_table_over(out.record.gold, s.variable, s.support);
        std::vector<size_t> differing;
        for (size_t idx = 0; idx < s.table.entries(); ++idx)
          if (s.table.get(idx) != gold_bits.get(idx)) differing.push_back(idx);
        if (differing.empty()) continue;
        size_t pick = differing[static_cast<size_t>(
            rng.uniform_int(0, static_cast<int64_t>(differing.size()) - 1))];
        std::vector<std::vector<int>> patterns(1);
        for (size_t j = 0; j < s.support.size(); ++j)
          patterns[0].push_back(
              static_cast<int>((pick >> (s.support.size() - 1 - j)) & 1));
        candidate = targeted_world(out.record, cfg, rng, s.support, patterns,
                                   s.variable, excluded, &fresh);
      } else {
        worlds::IvMode mode = std::array{worlds::IvMode::None,
                                         worlds::IvMode::HardConstant,
                                         worlds::IvMode::HardAssigned}[
            static_cast<size_t>(rng.uniform_int(0, 2))];
        worlds::Intervention iv = sample_intervention(
            rng, cfg, out.record.disclosure.observed, mode, out.record.units.size());
        if (excluded.count(worlds::signature_of(iv))) continue;
        candidate = worlds::simulate_world(out.record.gold, out.record.units,
                                           sample_env(cfg, rng, out.record.gold), iv,
                                           next_train_id(out.record));
      }
      // per-variable intervened-world cap still applies to additions
      bool cap_ok = true;
      for (const auto& t : candidate.iv.targets())
        if (intervened_count[t] + 1 > cfg.stratum.max_intervened_per_var)
          cap_ok = false;
      if (!cap_ok) continue;
      long kills = 0;
      for (const auto& s : survivors)
        if (!consistent_with_world(s.table, s.support, candidate, s.variable))
          kills += 1;
      if (kills > best_kills) {
        best_kills = kills;
        best = candidate;
        best_units = fresh;
      }
    }
    if (best_kills == 0) continue;
    out.record.units.insert(out.record.units.end(), best_units.begin(),
                            best_units.end());
    out.record.training.push_back(best);
    out.worlds_added += 1;
    for (const auto& t : best.iv.targets()) intervened_count[t] += 1;
    std::vector<ShortcutSurvivor> still;
    for (const auto& s : survivors)
      if (consistent_with_world(s.table, s.support, best, s.variable))
        still.push_back(s);
    out.killed = out.initial_survivors - static_cast<long>(still.size());
    survivors = std::move(still);
  }
  out.threshold_met = out.killed >= target_kills;
  return out;
}

DisambiguationOutcome targeted_disambiguation(const worlds::ProblemRecord& record,
                                              const GeneratorConfig& cfg, Rng& rng,
                                              int added_budget) {
  DisambiguationOutcome out;
  out.record = record;
  std::set<worlds::IvSignature> excluded = heldout_signatures(record);

  LocalSearchOutcome alts =
      local_alternatives(out.record, cfg, cfg.disambiguation, 64);
  out.alternatives_found = static_cast<long>(alts.found.size());

  while (out.worlds_added < added_budget && !alts.found.empty()) {
    // candidate separating worlds: one per (alternative, first differing
    // assignment); greedy pick by alternatives ruled out
    worlds::World best;
    long best_kills = 0;
    std::vector<worlds::Unit> best_units;
    for (const auto& a : alts.found) {
      boolenum::TableBits gold_bits =
          gold_table_over(out.record.gold, a.variable, a.support);
      size_t diff_idx = a.table.entries();
      for (size_t idx = 0; idx < a.table.entries(); ++idx)
        if (a.table.get(idx) != gold_bits.get(idx)) {
          diff_idx = idx;
          break;
        }
      if (diff_idx == a.table.entries()) continue;
      std::vector<std::vector<int>> patterns(1);
      for (size_t j = 0; j < a.support.size(); ++j)
        patterns[0].push_back(
            static_cast<int>((diff_idx >> (a.support.size() - 1 - j)) & 1));
      std::vector<worlds::Unit> fresh;
      worlds::World candidate = targeted_world(out.record, cfg, rng, a.support,
                                               patterns, a.variable, excluded, &fresh);
      long kills = 0;
      for (const auto& other : alts.found)
        if (!consistent_with_world(other.table, other.support, candidate,
                                   other.variable))
          kills += 1;
      if (kills > best_kills) {
        best_kills = kills;
        best = candidate;
        best_units = fresh;
      }
    }
    if (best_kills == 0) break;
    out.record.units.insert(out.record.units.end(), best_units.begin(),
                            best_units.end());
    out.record.training.push_back(best);
    out.worlds_added += 1;
    std::vector<LocalAlternative> still;
    for (const auto& a : alts.found)
      if (consistent_with_world(a.table, a.support, best, a.variable))
        still.push_back(a);
    alts.found = std::move(still);
  }
  out.alternatives_remaining = static_cast<long>(alts.found.size());
  return out;
}

// ---- bounded ambiguity audits ----

AuditResult audit_local(const worlds::ProblemRecord& record,
                        const GeneratorConfig& cfg) {
  auto start = Clock::now();
  AuditResult out;
  for (const auto& v : record.gold.endogenous) out.local_alternatives[v] = 0;
  LocalSearchOutcome res =
      local_alternatives(record, cfg, cfg.audit_local_budget, 100000);
  for (const auto& a : res.found) out.local_alternatives[a.variable] += 1;
  out.truncated = res.truncated;
  out.timed_out = res.timed_out;
  out.wall_seconds = seconds_since(start);
  return out;
}

AuditResult audit_pairs(const worlds::ProblemRecord& record,
                        const GeneratorConfig& cfg) {
  auto start = Clock::now();
  AuditResult out;
  const PairAuditBudget& budget = cfg.audit_pairs_budget;
  SearchBudget local{budget.ast_slack, budget.ast_cap, 50000, 2.0};
  LocalSearchOutcome alts = local_alternatives(record, cfg, local, 32);
  out.truncated = alts.truncated;
  out.timed_out = alts.timed_out;

  std::map<std::string, std::vector<const LocalAlternative*>> by_var;
  for (const auto& a : alts.found) by_var[a.variable].push_back(&a);

  scm::CompiledScm gold_compiled = scm::compile(record.gold);
  for (const auto& v : record.gold.endogenous) {
    if (seconds_since(start) > budget.time_per_problem_sec) {
      out.timed_out = true;
      break;
    }
    std::vector<std::string> eff =
        dsl::effective_parents(record.gold.mechanisms.at(v));
    for (const auto& u : eff) {
      if (!record.gold.mechanisms.count(u)) continue;  // roots have no mechanism
      auto uit = by_var.find(u);
      auto vit = by_var.find(v);
      if (uit == by_var.end() || vit == by_var.end()) continue;
      int upstream_used = 0;
      for (const auto* gu : uit->second) {
        if (upstream_used >= budget.max_upstream) break;
        upstream_used += 1;
        for (const auto* gv : vit->second) {
          if (seconds_since(start) > budget.time_per_problem_sec) {
            out.timed_out = true;
            break;
          }
          scm::Scm mutated = record.gold;
          mutated.mechanisms[u] = gu->expr;
          mutated.mechanisms[v] = gv->expr;
          scm::CompiledScm compiled;
          try {
            compiled = scm::compile(mutated);
          } catch (const scm::CycleError&) {
            continue;
          }
          bool exact = true;
          for (const auto& w : record.training)
            exact = exact && worlds::world_exact(compiled, w) == 1;
          if (exact) out.pair_alternatives += 1;
        }
      }
    }
  }
  out.wall_seconds = seconds_since(start);
  return out;
}

// ---- problem assembly ----

BuildOutcome build_problem(const GeneratorConfig& cfg, Rng rng, const std::string& id,
                           uint64_t record_seed) {
  worlds::ProblemRecord rec;
  rec.id = id;
  rec.seed = record_seed;
  try {
    SampledScm sampled = sample_scm(cfg, rng);
    rec.gold = sampled.model;
    rec.latent_order = sampled.latent_order;
  } catch (const std::runtime_error& e) {
    return RejectInfo{"mechanism_sampling", e.what()};
  }
  rec.probe_size = rng.bernoulli(cfg.probe4_rate) ? 4 : 3;

  int n_units = static_cast<int>(rng.uniform_int(cfg.rows_min, cfg.rows_max));
  rec.units = sample_units(rng, rec.gold, n_units, "u", 0);

  // initial training worlds inside the intervention-coverage ranges
  int n_assigned = static_cast<int>(rng.uniform_int(cfg.stratum.min_assigned_worlds,
                                                    cfg.stratum.max_assigned_worlds));
  int n_constant = static_cast<int>(rng.uniform_int(cfg.stratum.min_constant_worlds,
                                                    cfg.stratum.max_constant_worlds));
  int n_none = cfg.training_target - n_assigned - n_constant;
  if (n_none < 1) return RejectInfo{"config", "training_target too small"};
  std::vector<worlds::IvMode> modes;
  for (int i = 0; i < n_none; ++i) modes.push_back(worlds::IvMode::None);
  for (int i = 0; i < n_assigned; ++i) modes.push_back(worlds::IvMode::HardAssigned);
  for (int i = 0; i < n_constant; ++i) modes.push_back(worlds::IvMode::HardConstant);
  rng.shuffle(modes);
  for (worlds::IvMode mode : modes) {
    worlds::Intervention iv = sample_intervention(rng, cfg, rec.gold.observed, mode,
                                                  rec.units.size());
    rec.training.push_back(worlds::simulate_world(rec.gold, rec.units,
                                                  sample_env(cfg, rng, rec.gold), iv,
                                                  next_train_id(rec)));
  }

  // held-out worlds: signatures disjoint from training, novelty in bounds
  std::set<worlds::IvSignature> train_sigs = training_signatures(rec);
  std::set<std::vector<std::string>> train_targets;
  for (const auto& sig : train_sigs) train_targets.insert(sig.first);
  int lo_novel = static_cast<int>(
      std::ceil(cfg.stratum.novelty_lo * cfg.heldout_count - 1e-9));
  int hi_novel = static_cast<int>(
      std::floor(cfg.stratum.novelty_hi * cfg.heldout_count + 1e-9));
  if (lo_novel > hi_novel) return RejectInfo{"config", "novelty bounds empty"};
  int want_novel = static_cast<int>(rng.uniform_int(lo_novel, hi_novel));

  std::set<worlds::IvSignature> used = train_sigs;
  int made_novel = 0;
  for (int k = 0; k < cfg.heldout_count; ++k) {
    bool want_novel_now = made_novel < want_novel;
    bool made = false;
    for (int attempt = 0; attempt < 300 && !made; ++attempt) {
      worlds::IvMode mode = std::array{worlds::IvMode::HardConstant,
                                       worlds::IvMode::HardAssigned,
                                       worlds::IvMode::None}[
          static_cast<size_t>(rng.uniform_int(0, attempt < 200 ? 1 : 2))];
      worlds::Intervention iv =
          sample_intervention(rng, cfg, rec.gold.observed, mode, rec.units.size());
      worlds::IvSignature sig = worlds::signature_of(iv);
      if (used.count(sig)) continue;
      bool novel_targets = !train_targets.count(sig.first);
      if (want_novel_now != novel_targets) continue;
      char buf[16];
      std::snprintf(buf, sizeof buf, "heldout_%02d", k);
      rec.heldout.push_back(worlds::simulate_world(
          rec.gold, rec.units, sample_env(cfg, rng, rec.gold), iv, buf));
      used.insert(sig);
      if (novel_targets) made_novel += 1;
      made = true;
    }
    if (!made) return RejectInfo{"heldout_balance", "could not realize novelty mix"};
  }
  double novelty =
      static_cast<double>(made_novel) / static_cast<double>(cfg.heldout_count);
  if (novelty < cfg.stratum.novelty_lo - 1e-9 ||
      novelty > cfg.stratum.novelty_hi + 1e-9)
    return RejectInfo{"heldout_balance", "novelty out of bounds"};

  // disclosure: records are generated in hidden-order form
  rec.disclosure.setting = scm::Setting::HiddenOrder;
  rec.disclosure.observed = rec.gold.observed;
  rec.disclosure.roots = rec.gold.roots;
  rec.disclosure.endogenous = rec.gold.endogenous;

  // filters: intervention coverage and scored exposure
  std::map<std::string, int> intervened_count;
  for (const auto& w : rec.training)
    for (const auto& t : w.iv.targets()) intervened_count[t] += 1;
  for (const auto& v : rec.gold.endogenous) {
    if (intervened_count[v] > cfg.stratum.max_intervened_per_var)
      return RejectInfo{"intervention_coverage", v + " intervened too often"};
    long scored_worlds = 0, scored_cells = 0;
    for (const auto& w : rec.training)
      if (!w.iv.intervenes(v)) {
        scored_worlds += 1;
        scored_cells += static_cast<long>(w.rows.size());
      }
    if (scored_worlds < cfg.stratum.min_scored_worlds)
      return RejectInfo{"scored_exposure", v + " has too few scored worlds"};
    if (scored_cells < cfg.stratum.min_scored_cells)
      return RejectInfo{"scored_exposure", v + " has too few scored cells"};
  }

  // local support
  metrics::CoverageStats initial_cov = metrics::coverage_stats(rec);
  for (const auto& v : rec.gold.endogenous)
    if (initial_cov.variable_rate(v) < cfg.stratum.local_support_min - 1e-9)
      return RejectInfo{"local_support", v + " is under-covered"};

  // shortcut survivor reduction, then targeted disambiguation
  ReductionOutcome reduction =
      reduce_survivors(rec, cfg, rng, cfg.max_added_worlds);
  if (!reduction.threshold_met)
    return RejectInfo{"shortcut_reduction", "kill fraction below threshold"};
  rec = std::move(reduction.record);

  DisambiguationOutcome disamb = targeted_disambiguation(
      rec, cfg, rng, cfg.max_added_worlds - reduction.worlds_added);
  rec = std::move(disamb.record);

  // bounded post-generation audits
  AuditResult local_audit = audit_local(rec, cfg);
  AuditResult pair_audit = audit_pairs(rec, cfg);

  metrics::CoverageStats cov = metrics::coverage_stats(rec);
  nlohmann::json cov_json;
  for (const auto& [v, frac] : cov.per_variable)
    cov_json[v] = {{"seen", frac.first}, {"total", frac.second}};
  nlohmann::json local_json;
  for (const auto& [v, c] : local_audit.local_alternatives) local_json[v] = c;

  rec.meta = {
      {"filters",
       {{"novelty", novelty},
        {"assigned_worlds", n_assigned},
        {"constant_worlds", n_constant},
        {"initial_mean_coverage", initial_cov.mean}}},
      {"shortcut",
       {{"initial_survivors", reduction.initial_survivors},
        {"killed", reduction.killed},
        {"fraction", reduction.fraction()},
        {"worlds_added", reduction.worlds_added},
        {"proposals_used", reduction.proposals_used}}},
      {"disambiguation",
       {{"alternatives_found", disamb.alternatives_found},
        {"alternatives_remaining", disamb.alternatives_remaining},
        {"worlds_added", disamb.worlds_added}}},
      {"audit_local",
       {{"per_variable", local_json},
        {"total", local_audit.total_local()},
        {"truncated", local_audit.truncated},
        {"timed_out", local_audit.timed_out}}},
      {"audit_pairs",
       {{"pairs", pair_audit.pair_alternatives},
        {"truncated", pair_audit.truncated},
        {"timed_out", pair_audit.timed_out}}},
      {"coverage", {{"per_variable", cov_json}, {"mean", cov.mean}}},
      {"probe_size", rec.probe_size},
  };
  return rec;
}

PoolResult generate_pool(const GeneratorConfig& cfg, int count, uint64_t master_seed) {
  PoolResult out;
  out.manifest = {{"format", "scmkit.manifest"},
                  {"version", 1},
                  {"seed", master_seed},
                  {"config", cfg.to_json()},
                  {"conventions",
                   {{"iff_semantics", "left fold of binary iff"},
                    {"ast_size", "operator nodes plus variable references"},
                    {"intervention_signature", "sorted target set plus mode"},
                    {"heldout_target_novelty",
                     "fraction of held-out worlds whose target set is absent "
                     "from training target sets"},
                    {"forced_focus_rate", cfg.reduction.forced_focus_rate},
                    {"coverage_probe",
                     "gold effective parents capped at probe_size, "
                     "order-earliest kept"}}},
                  {"records", nlohmann::json::array()}};
  for (int i = 0; i < count; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "p%04d", i);
    bool accepted = false;
    nlohmann::json attempts = nlohmann::json::array();
    for (int attempt = 0; attempt < cfg.max_attempts_per_problem && !accepted;
         ++attempt) {
      uint64_t seed = Rng::mix(master_seed,
                               Rng::mix(static_cast<uint64_t>(i),
                                        static_cast<uint64_t>(attempt)));
      BuildOutcome outcome = build_problem(cfg, Rng(seed), buf, seed);
      if (std::holds_alternative<worlds::ProblemRecord>(outcome)) {
        worlds::ProblemRecord rec = std::get<worlds::ProblemRecord>(outcome);
        out.manifest["records"].push_back({{"id", rec.id},
                                           {"seed", seed},
                                           {"attempts", attempt + 1},
                                           {"rejections", attempts},
                                           {"meta", rec.meta}});
        out.records.push_back(std::move(rec));
        accepted = true;
      } else {
        const RejectInfo& info = std::get<RejectInfo>(outcome);
        attempts.push_back({{"stage", info.stage}, {"detail", info.detail}});
      }
    }
    if (!accepted)
      throw std::runtime_error(std::string("generation stalled at ") + buf);
  }
  return out;
}

// ---- variants ----

std::map<scm::Setting, worlds::ProblemRecord> derive_variants(
    const worlds::ProblemRecord& record) {
  std::map<scm::Setting, worlds::ProblemRecord> out;

  worlds::ProblemRecord ordered = record;
  ordered.disclosure.setting = scm::Setting::Ordered;
  ordered.disclosure.order = record.latent_order;
  ordered.disclosure.blocks.clear();
  out[scm::Setting::Ordered] = std::move(ordered);

  worlds::ProblemRecord block = record;
  block.disclosure.setting = scm::Setting::BlockOrder;
  block.disclosure.order.clear();
  block.disclosure.blocks.clear();
  std::vector<std::string> roots_block;
  std::vector<std::string> endo_in_order;
  std::set<std::string> root_set(record.gold.roots.begin(), record.gold.roots.end());
  for (const auto& v : record.latent_order)
    (root_set.count(v) ? roots_block : endo_in_order).push_back(v);
  block.disclosure.blocks.push_back(roots_block);
  for (size_t i = 0; i < endo_in_order.size(); i += 2) {
    std::vector<std::string> chunk;
    chunk.push_back(endo_in_order[i]);
    if (i + 1 < endo_in_order.size()) chunk.push_back(endo_in_order[i + 1]);
    block.disclosure.blocks.push_back(chunk);
  }
  out[scm::Setting::BlockOrder] = std::move(block);

  worlds::ProblemRecord hidden = record;
  hidden.disclosure.setting = scm::Setting::HiddenOrder;
  hidden.disclosure.order.clear();
  hidden.disclosure.blocks.clear();
  out[scm::Setting::HiddenOrder] = std::move(hidden);

  worlds::ProblemRecord roots = record;
  roots.disclosure.setting = scm::Setting::HiddenRoots;
  roots.disclosure.order.clear();
  roots.disclosure.blocks.clear();
  roots.disclosure.roots.clear();
  roots.disclosure.endogenous.clear();
  out[scm::Setting::HiddenRoots] = std::move(roots);
  return out;
}

// ---- support-audit ladder ----

namespace {

// Newly covered probe patterns if `w` joined the training set.
long coverage_gain(const worlds::ProblemRecord& record,
                   const std::map<std::string, std::set<std::vector<int>>>& seen,
                   const std::map<std::string, std::vector<std::string>>& probes,
                   const worlds::World& w) {
  long gain = 0;
  for (const auto& [v, probe] : probes) {
    if (w.iv.intervenes(v)) continue;
    long total = 1L << probe.size();
    std::set<std::vector<int>> fresh;
    for (const auto& row : w.rows) {
      std::vector<int> key;
      for (const auto& u : probe) key.push_back(row.at(u));
      if (!seen.at(v).count(key)) fresh.insert(key);
    }
    gain += std::min<long>(static_cast<long>(fresh.size()),
                           total - static_cast<long>(seen.at(v).size()));
  }
  return gain;
}

void absorb_world(std::map<std::string, std::set<std::vector<int>>>& seen,
                  const std::map<std::string, std::vector<std::string>>& probes,
                  const worlds::World& w) {
  for (const auto& [v, probe] : probes) {
    if (w.iv.intervenes(v)) continue;
    for (const auto& row : w.rows) {
      std::vector<int> key;
      for (const auto& u : probe) key.push_back(row.at(u));
      seen[v].insert(key);
    }
  }
}

}  // namespace

worlds::ProblemRecord select_extra_worlds(const worlds::ProblemRecord& record,
                                          const GeneratorConfig& cfg, Rng& rng) {
  worlds::ProblemRecord out = record;
  std::set<worlds::IvSignature> excluded = heldout_signatures(record);

  metrics::CoverageStats cov = metrics::coverage_stats(out);
  std::map<std::string, std::set<std::vector<int>>> seen;
  for (const auto& [v, probe] : cov.probes) {
    seen[v] = {};
    auto counts = worlds::local_support_counts(out, v, probe);
    for (const auto& [key, n] : counts) seen[v].insert(key);
  }

  // candidate pool: observational, single-variable hard_constant (both
  // values), single-variable hard_assigned; held-out signatures excluded
  struct Candidate {
    worlds::World world;
    bool used = false;
  };
  std::vector<Candidate> pool;
  for (int i = 0; i < 3; ++i) {
    worlds::Intervention none;
    pool.push_back({worlds::simulate_world(out.gold, out.units,
                                           sample_env(cfg, rng, out.gold), none,
                                           "pending"),
                    false});
  }
  for (const auto& t : out.gold.observed) {
    for (int value = 0; value <= 1; ++value) {
      worlds::Intervention iv;
      iv.mode = worlds::IvMode::HardConstant;
      iv.constants[t] = value;
      if (excluded.count(worlds::signature_of(iv))) continue;
      pool.push_back({worlds::simulate_world(out.gold, out.units,
                                             sample_env(cfg, rng, out.gold), iv,
                                             "pending"),
                      false});
    }
    worlds::Intervention iva;
    iva.mode = worlds::IvMode::HardAssigned;
    iva.assigned[t] = sample_assigned_bits(rng, cfg, out.units.size());
    if (excluded.count(worlds::signature_of(iva))) continue;
    pool.push_back({worlds::simulate_world(out.gold, out.units,
                                           sample_env(cfg, rng, out.gold), iva,
                                           "pending"),
                    false});
  }

  int added = 0;
  while (added < 4) {
    long best_gain = -1;
    size_t best_idx = pool.size();
    for (size_t i = 0; i < pool.size(); ++i) {
      if (pool[i].used) continue;
      long gain = coverage_gain(out, seen, cov.probes, pool[i].world);
      if (gain > best_gain) {
        best_gain = gain;
        best_idx = i;
      }
    }
    if (best_idx == pool.size()) break;
    if (added >= 3 && best_gain < 1) break;  // a 4th world only when it helps
    pool[best_idx].used = true;
    worlds::World w = pool[best_idx].world;
    w.id = next_train_id(out);
    absorb_world(seen, cov.probes, w);
    out.training.push_back(std::move(w));
    added += 1;
  }
  return out;
}

namespace {

std::vector<AltPoolEntry> usable_pool(const worlds::ProblemRecord& record,
                                      const std::vector<AltPoolEntry>& pool) {
  std::vector<AltPoolEntry> out;
  std::set<std::map<std::string, dsl::SemanticSignature>> seen;
  auto gold_sig = scm::scm_signature(record.gold);
  for (const auto& entry : pool) {
    scm::ValidityReport vr = scm::validate(entry.model, record.disclosure);
    if (!vr.valid()) continue;
    scm::CompiledScm compiled;
    try {
      compiled = scm::compile(*vr.model);
    } catch (const scm::CycleError&) {
      continue;
    }
    bool exact = true;
    for (const auto& w : record.training)
      exact = exact && worlds::world_exact(compiled, w) == 1;
    if (!exact) continue;
    auto sig = scm::scm_signature(*vr.model);
    if (sig == gold_sig) continue;  // syntactic rewrite of gold
    if (!seen.insert(sig).second) continue;
    out.push_back({*vr.model, entry.source});
  }
  return out;
}

}  // namespace

CexOutcome build_cex(const worlds::ProblemRecord& extra_record,
                     const std::vector<AltPoolEntry>& pool, const GeneratorConfig& cfg,
                     Rng& rng) {
  CexOutcome out;
  out.record = extra_record;
  std::set<worlds::IvSignature> excluded = heldout_signatures(out.record);

  // 1. complete local predecessor-pattern coverage with gold-simulated worlds
  while (true) {
    metrics::CoverageStats cov = metrics::coverage_stats(out.record);
    std::string target_var;
    std::vector<std::vector<int>> missing;
    for (const auto& v : out.record.gold.endogenous) {
      const auto& probe = cov.probes.at(v);
      auto counts = worlds::local_support_counts(out.record, v, probe);
      if (static_cast<long>(counts.size()) == (1L << probe.size())) continue;
      target_var = v;
      for (long idx = 0; idx < (1L << probe.size()); ++idx) {
        std::vector<int> key;
        for (size_t j = 0; j < probe.size(); ++j)
          key.push_back(static_cast<int>((idx >> (probe.size() - 1 - j)) & 1));
        if (!counts.count(key)) missing.push_back(key);
      }
      break;
    }
    if (target_var.empty()) break;
    size_t chunk = static_cast<size_t>(cfg.compact_rows_max);
    std::vector<std::vector<int>> first(missing.begin(),
                                        missing.begin() +
                                            static_cast<long>(std::min(chunk, missing.size())));
    std::vector<worlds::Unit> fresh;
    worlds::World w = targeted_world(
        out.record, cfg, rng, metrics::probe_subset(out.record, target_var), first,
        target_var, excluded, &fresh);
    out.record.units.insert(out.record.units.end(), fresh.begin(), fresh.end());
    out.record.training.push_back(w);
    out.coverage_worlds_added += 1;
  }

  // 2. separate every discovered train-consistent alternative
  std::vector<AltPoolEntry> alive = usable_pool(out.record, pool);
  out.pool_alternatives = static_cast<long>(alive.size());
  auto survives = [&](const AltPoolEntry& entry) {
    scm::CompiledScm compiled = scm::compile(entry.model);
    for (const auto& w : out.record.training)
      if (worlds::world_exact(compiled, w) == 0) return false;
    return true;
  };

  while (!alive.empty()) {
    const AltPoolEntry& target = alive.front();
    scm::CompiledScm alt_compiled = scm::compile(target.model);
    std::optional<worlds::World> separator;
    std::vector<worlds::Unit> fresh_units;

    // breadth-first: single-variable, then two-variable interventions
    for (int arity = 1; arity <= 2 && !separator; ++arity) {
      std::vector<std::vector<std::string>> target_sets;
      const auto& obs = out.record.disclosure.observed;
      if (arity == 1) {
        for (const auto& t : obs) target_sets.push_back({t});
      } else {
        for (size_t i = 0; i < obs.size(); ++i)
          for (size_t j = i + 1; j < obs.size(); ++j)
            target_sets.push_back({obs[i], obs[j]});
      }
      for (const auto& ts : target_sets) {
        if (separator) break;
        for (int combo = 0; combo < (1 << ts.size()) && !separator; ++combo) {
          worlds::Intervention iv;
          iv.mode = worlds::IvMode::HardConstant;
          for (size_t j = 0; j < ts.size(); ++j)
            iv.constants[ts[j]] = (combo >> j) & 1;
          if (excluded.count(worlds::signature_of(iv))) continue;
          int n_rows = static_cast<int>(
              rng.uniform_int(cfg.compact_rows_min, cfg.compact_rows_max));
          std::vector<worlds::Unit> units = sample_units(
              rng, out.record.gold, n_rows, "cu",
              static_cast<int>(out.record.units.size()));
          worlds::World w = worlds::simulate_world(
              out.record.gold, units, sample_env(cfg, rng, out.record.gold), iv,
              next_train_id(out.record));
          w.compact = true;
          if (worlds::world_exact(alt_compiled, w) == 0) {
            separator = w;
            fresh_units = units;
          }
        }
      }
    }

    if (!separator) {
      // clamp the full distinguishing parent set of a differing variable
      auto gold_sig = scm::scm_signature(out.record.gold);
      auto alt_sig = scm::scm_signature(target.model);
      std::string diff_var;
      for (const auto& [v, sig] : gold_sig)
        if (!alt_sig.count(v) || !(alt_sig.at(v) == sig)) {
          diff_var = v;
          break;
        }
      if (diff_var.empty())
        throw std::runtime_error("no separator for a signature-equal alternative");
      std::set<std::string> union_parents(gold_sig.at(diff_var).parents.begin(),
                                          gold_sig.at(diff_var).parents.end());
      if (alt_sig.count(diff_var))
        union_parents.insert(alt_sig.at(diff_var).parents.begin(),
                             alt_sig.at(diff_var).parents.end());
      std::vector<std::string> u_sorted(union_parents.begin(), union_parents.end());
      boolenum::TableBits gt =
          boolenum::table_of_expr(out.record.gold.mechanisms.at(diff_var), u_sorted);
      boolenum::TableBits at =
          boolenum::table_of_expr(target.model.mechanisms.at(diff_var), u_sorted);
      std::vector<std::vector<int>> patterns;
      for (size_t idx = 0; idx < gt.entries(); ++idx)
        if (gt.get(idx) != at.get(idx)) {
          std::vector<int> key;
          for (size_t j = 0; j < u_sorted.size(); ++j)
            key.push_back(static_cast<int>((idx >> (u_sorted.size() - 1 - j)) & 1));
          patterns.push_back(key);
          if (patterns.size() >= static_cast<size_t>(cfg.compact_rows_max)) break;
        }
      if (patterns.empty())
        throw std::runtime_error("signature mismatch without a table difference");
      std::vector<worlds::Unit> fresh;
      worlds::World w = targeted_world(out.record, cfg, rng, u_sorted, patterns,
                                       diff_var, excluded, &fresh);
      separator = w;
      fresh_units = fresh;
    }

    out.record.units.insert(out.record.units.end(), fresh_units.begin(),
                            fresh_units.end());
    out.record.training.push_back(*separator);
    out.separating_worlds_added += 1;

    std::vector<AltPoolEntry> still;
    for (const auto& entry : alive)
      if (survives(entry)) still.push_back(entry);
    alive = std::move(still);
  }
  out.survivors_after = static_cast<long>(alive.size());
  return out;
}

std::vector<AltTask> build_alt_tasks(const worlds::ProblemRecord& record,
                                     const std::vector<AltPoolEntry>& pool) {
  std::vector<AltTask> out;
  std::vector<AltPoolEntry> usable = usable_pool(record, pool);
  int counter = 0;
  for (const auto& entry : usable) {
    // single-variable separating intervention plus a root witness on which
    // the reference and the gold SCM replay differently
    scm::CompiledScm ref = scm::compile(entry.model);
    bool found = false;
    AltTask task;
    for (const auto& t : record.disclosure.observed) {
      if (found) break;
      for (int value = 0; value <= 1 && !found; ++value) {
        size_t n_roots = record.gold.roots.size();
        for (size_t combo = 0; combo < (size_t{1} << n_roots) && !found; ++combo) {
          worlds::Unit unit;
          unit.id = "w0";
          std::map<std::string, int> witness;
          for (size_t j = 0; j < n_roots; ++j) {
            int bit = static_cast<int>((combo >> j) & 1);
            witness[record.gold.roots[j]] = bit;
            unit.thresholds[record.gold.roots[j]] = bit ? 0.25 : 0.75;
          }
          worlds::Intervention iv;
          iv.mode = worlds::IvMode::HardConstant;
          iv.constants[t] = value;
          std::map<std::string, double> env;
          for (const auto& r : record.gold.roots) env[r] = 0.5;
          worlds::World w =
              worlds::simulate_world(record.gold, {unit}, env, iv, "witness");
          if (worlds::world_exact(ref, w) == 0) {
            task.target = t;
            task.value = value;
            task.witness = witness;
            found = true;
          }
        }
      }
    }
    if (!found) continue;  // no single-variable separator within enumeration
    task.id = record.id + "-alt-" + std::to_string(counter++);
    task.record_id = record.id;
    task.setting = record.disclosure.setting;
    task.reference = entry.model;
    task.source = entry.source;
    out.push_back(std::move(task));
  }
  return out;
}

}  // namespace scmkit::generator
