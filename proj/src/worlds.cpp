#include "scmkit/worlds.hpp"

#include <algorithm>
#include <stdexcept>

namespace scmkit::worlds {

const char* iv_mode_name(IvMode m) {
  switch (m) {
    case IvMode::None: return "none";
    case IvMode::HardConstant: return "hard_constant";
    case IvMode::HardAssigned: return "hard_assigned";
  }
  return "?";
}

std::optional<IvMode> iv_mode_from_name(const std::string& name) {
  if (name == "none") return IvMode::None;
  if (name == "hard_constant") return IvMode::HardConstant;
  if (name == "hard_assigned") return IvMode::HardAssigned;
  return std::nullopt;
}

std::set<std::string> Intervention::targets() const {
  std::set<std::string> t;
  for (const auto& [v, _] : constants) t.insert(v);
  for (const auto& [v, _] : assigned) t.insert(v);
  return t;
}

bool Intervention::intervenes(const std::string& var) const {
  return constants.count(var) || assigned.count(var);
}

std::optional<int> Intervention::value_at(const std::string& var, size_t row) const {
  if (auto it = constants.find(var); it != constants.end()) return it->second;
  if (auto it = assigned.find(var); it != assigned.end()) {
    if (row >= it->second.size())
      throw std::out_of_range("assigned vector shorter than row index");
    return it->second[row];
  }
  return std::nullopt;
}

IvSignature signature_of(const Intervention& iv) {
  auto t = iv.targets();
  return {std::vector<std::string>(t.begin(), t.end()), iv.mode};
}

World simulate_world(const scm::Scm& gold, const std::vector<Unit>& units,
                     const std::map<std::string, double>& env,
                     const Intervention& iv, const std::string& id) {
  for (const auto& r : gold.roots)
    if (!env.count(r)) throw std::invalid_argument("missing environment level for " + r);
  for (const auto& [v, vec] : iv.assigned)
    if (vec.size() != units.size())
      throw std::invalid_argument("assigned vector length mismatch for " + v);

  scm::CompiledScm compiled = scm::compile(gold);
  std::set<std::string> root_set(gold.roots.begin(), gold.roots.end());

  World w;
  w.id = id;
  w.iv = iv;
  w.env = env;
  for (size_t i = 0; i < units.size(); ++i) {
    const Unit& u = units[i];
    w.unit_ids.push_back(u.id);
    std::map<std::string, int> row;
    for (const auto& v : compiled.topo) {
      if (auto clamp = iv.value_at(v, i)) {
        row[v] = *clamp;
      } else if (root_set.count(v)) {
        double threshold = u.thresholds.at(v);
        row[v] = threshold < env.at(v) ? 1 : 0;
      } else {
        const scm::CompiledMechanism& mech = compiled.mechanisms.at(v);
        size_t idx = 0;
        for (size_t j = 0; j < mech.parents.size(); ++j)
          if (row.at(mech.parents[j]))
            idx |= size_t{1} << (mech.parents.size() - 1 - j);
        row[v] = mech.table[idx];
      }
    }
    w.rows.push_back(std::move(row));
  }
  return w;
}

ReplayResult replay(const scm::CompiledScm& candidate, const World& w) {
  ReplayResult out;
  for (size_t i = 0; i < w.rows.size(); ++i) {
    const auto& observed = w.rows[i];
    std::map<std::string, int> row;
    std::map<std::string, bool> match;
    for (const auto& v : candidate.topo) {
      if (auto clamp = w.iv.value_at(v, i)) {
        row[v] = *clamp;
        continue;
      }
      if (candidate.root_set.count(v)) {
        row[v] = observed.at(v);
        continue;
      }
      const scm::CompiledMechanism& mech = candidate.mechanisms.at(v);
      size_t idx = 0;
      for (size_t j = 0; j < mech.parents.size(); ++j)
        if (row.at(mech.parents[j]))
          idx |= size_t{1} << (mech.parents.size() - 1 - j);
      row[v] = mech.table[idx];
      // scored cell: non-intervened candidate-endogenous
      bool ok = row[v] == observed.at(v);
      match[v] = ok;
      out.scored += 1;
      if (ok)
        out.matched += 1;
      else
        out.exact = false;
    }
    out.rows.push_back(std::move(row));
    out.match.push_back(std::move(match));
  }
  return out;
}

int world_exact(const scm::CompiledScm& candidate, const World& w) {
  return replay(candidate, w).exact ? 1 : 0;
}

std::map<std::vector<int>, long> local_support_counts(
    const ProblemRecord& record, const std::string& v,
    const std::vector<std::string>& subset) {
  std::map<std::vector<int>, long> counts;
  for (const auto& w : record.training) {
    if (w.iv.intervenes(v)) continue;
    for (const auto& row : w.rows) {
      std::vector<int> key;
      key.reserve(subset.size());
      for (const auto& u : subset) key.push_back(row.at(u));
      counts[key] += 1;
    }
  }
  return counts;
}

}  // namespace scmkit::worlds
