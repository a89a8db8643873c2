#include "scmkit/scm.hpp"

#include <algorithm>
#include <queue>

namespace scmkit::scm {

const char* setting_name(Setting s) {
  switch (s) {
    case Setting::Ordered: return "ordered";
    case Setting::BlockOrder: return "block_order";
    case Setting::HiddenOrder: return "hidden_order";
    case Setting::HiddenRoots: return "hidden_roots";
  }
  return "?";
}

std::optional<Setting> setting_from_name(const std::string& name) {
  if (name == "ordered") return Setting::Ordered;
  if (name == "block_order") return Setting::BlockOrder;
  if (name == "hidden_order") return Setting::HiddenOrder;
  if (name == "hidden_roots") return Setting::HiddenRoots;
  return std::nullopt;
}

const char* funnel_stage_name(FunnelStage s) {
  switch (s) {
    case FunnelStage::None: return "none";
    case FunnelStage::Schema: return "schema";
    case FunnelStage::Keys: return "keys";
    case FunnelStage::Parse: return "parse";
    case FunnelStage::Legal: return "legal";
    case FunnelStage::Acyclic: return "acyclic";
    case FunnelStage::Valid: return "valid";
  }
  return "?";
}

ParentGraph functional_parent_graph(const Scm& m) {
  ParentGraph g;
  for (const auto& [v, f] : m.mechanisms)
    for (const auto& u : dsl::effective_parents(f))
      if (u != v) g.edges.insert({u, v});
  return g;
}

namespace {

// Kahn's algorithm over the effective-parent graph, lexicographic tie-break.
std::vector<std::string> topo_or_cycle(const std::vector<std::string>& vars,
                                       const ParentGraph& g) {
  std::map<std::string, int> indegree;
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& v : vars) indegree[v] = 0;
  for (const auto& [u, v] : g.edges) {
    out[u].push_back(v);
    indegree[v] += 1;
  }
  std::priority_queue<std::string, std::vector<std::string>, std::greater<>> ready;
  for (const auto& [v, d] : indegree)
    if (d == 0) ready.push(v);
  std::vector<std::string> order;
  while (!ready.empty()) {
    std::string v = ready.top();
    ready.pop();
    order.push_back(v);
    for (const auto& w : out[v])
      if (--indegree[w] == 0) ready.push(w);
  }
  if (order.size() == vars.size()) return order;

  // Extract a witness cycle from the remaining subgraph.
  std::set<std::string> remaining;
  for (const auto& [v, d] : indegree)
    if (d > 0) remaining.insert(v);
  std::string start = *remaining.begin();
  std::vector<std::string> path;
  std::map<std::string, size_t> seen_at;
  std::string cur = start;
  while (!seen_at.count(cur)) {
    seen_at[cur] = path.size();
    path.push_back(cur);
    // follow any edge into a still-remaining node
    std::string next;
    for (const auto& w : out[cur])
      if (remaining.count(w)) {
        next = w;
        break;
      }
    cur = next;
  }
  std::vector<std::string> cycle(path.begin() + static_cast<long>(seen_at[cur]),
                                 path.end());
  throw CycleError(cycle, "dependency graph has a cycle");
}

}  // namespace

std::vector<std::string> topological_order(const Scm& m) {
  return topo_or_cycle(m.observed, functional_parent_graph(m));
}

CompiledScm compile(const Scm& m) {
  CompiledScm c;
  c.model = m;
  c.root_set.insert(m.roots.begin(), m.roots.end());
  c.endogenous_set.insert(m.endogenous.begin(), m.endogenous.end());
  c.topo = topological_order(m);
  for (const auto& [v, f] : m.mechanisms) {
    dsl::SemanticSignature sig = dsl::signature_of(f);
    c.mechanisms[v] = CompiledMechanism{sig.parents, sig.table};
  }
  return c;
}

std::map<std::string, dsl::SemanticSignature> scm_signature(const Scm& m) {
  std::map<std::string, dsl::SemanticSignature> out;
  for (const auto& [v, f] : m.mechanisms) out[v] = dsl::signature_of(f);
  return out;
}

bool semantically_distinct(const Scm& a, const Scm& b) {
  if (std::set<std::string>(a.roots.begin(), a.roots.end()) !=
      std::set<std::string>(b.roots.begin(), b.roots.end()))
    return true;
  return scm_signature(a) != scm_signature(b);
}

namespace {

ValidityReport fail(FunnelStage reached, std::string detail) {
  ValidityReport r;
  r.reached = reached;
  r.detail = std::move(detail);
  return r;
}

bool is_valid_var_list(const std::vector<std::string>& vars,
                       const std::set<std::string>& observed) {
  std::set<std::string> seen;
  for (const auto& v : vars) {
    if (!observed.count(v)) return false;
    if (!seen.insert(v).second) return false;
  }
  return true;
}

}  // namespace

ValidityReport validate(const SubmissionText& sub, const Disclosure& d) {
  const std::set<std::string> observed(d.observed.begin(), d.observed.end());

  // Schema: payload shape matches the setting's required answer object.
  if (d.setting == Setting::HiddenRoots) {
    if (!sub.roots) return fail(FunnelStage::None, "missing predicted root list");
    if (!is_valid_var_list(*sub.roots, observed))
      return fail(FunnelStage::None, "predicted roots must be distinct observed variables");
  } else if (sub.roots) {
    return fail(FunnelStage::None, "unexpected root list for this setting");
  }

  std::vector<std::string> roots =
      d.setting == Setting::HiddenRoots ? *sub.roots : d.roots;
  std::set<std::string> root_set(roots.begin(), roots.end());
  std::vector<std::string> endogenous;
  if (d.setting == Setting::HiddenRoots) {
    for (const auto& v : d.observed)
      if (!root_set.count(v)) endogenous.push_back(v);
  } else {
    endogenous = d.endogenous;
  }

  // Keys: mechanisms for exactly the endogenous set.
  {
    std::set<std::string> want(endogenous.begin(), endogenous.end());
    std::set<std::string> have;
    for (const auto& [k, _] : sub.mechanisms) have.insert(k);
    if (want != have) {
      return fail(FunnelStage::Schema, "mechanism keys do not match the endogenous set");
    }
  }

  // Parse every mechanism against the observed vocabulary.
  std::map<std::string, dsl::ExprPtr> mechanisms;
  for (const auto& [v, text] : sub.mechanisms) {
    try {
      mechanisms[v] = dsl::parse(text, observed);
    } catch (const dsl::DslError& e) {
      return fail(FunnelStage::Keys,
                  "mechanism for " + v + " failed to parse: " + e.what());
    }
  }

  // Legality under the disclosure. Self-reference is illegal in all settings.
  for (const auto& [v, f] : mechanisms) {
    std::vector<std::string> refs = dsl::occurring_variables(f);
    for (const auto& u : refs)
      if (u == v)
        return fail(FunnelStage::Parse, "mechanism for " + v + " references itself");
    switch (d.setting) {
      case Setting::Ordered: {
        auto pos = [&](const std::string& x) {
          return std::find(d.order.begin(), d.order.end(), x) - d.order.begin();
        };
        for (const auto& u : refs)
          if (pos(u) >= pos(v))
            return fail(FunnelStage::Parse,
                        u + " is not an admissible parent of " + v);
        break;
      }
      case Setting::BlockOrder: {
        auto block_of = [&](const std::string& x) {
          for (size_t b = 0; b < d.blocks.size(); ++b)
            for (const auto& y : d.blocks[b])
              if (y == x) return static_cast<long>(b);
          return static_cast<long>(d.blocks.size());
        };
        long bv = block_of(v);
        for (const auto& u : refs)
          if (block_of(u) > bv)
            return fail(FunnelStage::Parse,
                        u + " is in a later block than " + v);
        break;
      }
      case Setting::HiddenOrder:
      case Setting::HiddenRoots:
        // References are observed-only by parsing; nothing more is disclosed.
        break;
    }
  }

  Scm model;
  model.observed = d.observed;
  model.roots = roots;
  model.endogenous = endogenous;
  model.mechanisms = mechanisms;

  try {
    topological_order(model);
  } catch (const CycleError& e) {
    return fail(FunnelStage::Legal, std::string("cyclic dependency: ") + e.what());
  }

  ValidityReport r;
  r.reached = FunnelStage::Valid;
  r.model = std::move(model);
  return r;
}

ValidityReport validate(const Scm& m, const Disclosure& d) {
  SubmissionText sub;
  if (d.setting == Setting::HiddenRoots) sub.roots = m.roots;
  for (const auto& [v, f] : m.mechanisms) sub.mechanisms[v] = dsl::render(f);
  return validate(sub, d);
}

Scm make_scm(std::vector<std::string> observed, std::vector<std::string> roots,
             std::map<std::string, dsl::ExprPtr> mechanisms) {
  Scm m;
  m.observed = std::move(observed);
  m.roots = std::move(roots);
  std::set<std::string> obs_set(m.observed.begin(), m.observed.end());
  std::set<std::string> root_set(m.roots.begin(), m.roots.end());
  for (const auto& r : m.roots)
    if (!obs_set.count(r)) throw std::invalid_argument("root not observed: " + r);
  for (const auto& v : m.observed)
    if (!root_set.count(v)) m.endogenous.push_back(v);
  for (const auto& v : m.endogenous)
    if (!mechanisms.count(v))
      throw std::invalid_argument("missing mechanism for " + v);
  for (const auto& [v, f] : mechanisms) {
    if (root_set.count(v)) throw std::invalid_argument("mechanism for root " + v);
    if (!obs_set.count(v)) throw std::invalid_argument("mechanism for unknown " + v);
    for (const auto& u : dsl::occurring_variables(f))
      if (!obs_set.count(u))
        throw std::invalid_argument("mechanism for " + v + " references unknown " + u);
  }
  m.mechanisms = std::move(mechanisms);
  topological_order(m);  // throws on a cycle
  return m;
}

}  // namespace scmkit::scm
