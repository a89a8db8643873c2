#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "scmkit/scm.hpp"

namespace scmkit::worlds {

// A unit is a row identity; its per-root thresholds are shared by every
// world of the problem.
struct Unit {
  std::string id;
  std::map<std::string, double> thresholds;  // per root, in [0,1]
};

enum class IvMode { None, HardConstant, HardAssigned };

const char* iv_mode_name(IvMode m);
std::optional<IvMode> iv_mode_from_name(const std::string& name);

struct Intervention {
  IvMode mode = IvMode::None;
  std::map<std::string, int> constants;                // whole-world clamps
  std::map<std::string, std::vector<int>> assigned;    // row-indexed clamps

  std::set<std::string> targets() const;
  bool intervenes(const std::string& var) const;
  // Clamp value for `var` at `row`, or nullopt when not targeted.
  std::optional<int> value_at(const std::string& var, size_t row) const;
};

// (sorted target set, mode): the key used for held-out separation.
using IvSignature = std::pair<std::vector<std::string>, IvMode>;
IvSignature signature_of(const Intervention& iv);

struct World {
  std::string id;
  Intervention iv;
  std::map<std::string, double> env;  // per-root environment level
  std::vector<std::string> unit_ids;
  std::vector<std::map<std::string, int>> rows;  // full assignment per unit
  bool compact = false;                          // added disambiguation-style world
};

struct ProblemRecord {
  std::string id;
  scm::Scm gold;
  std::vector<std::string> latent_order;
  std::vector<Unit> units;
  std::vector<World> training;
  std::vector<World> heldout;
  scm::Disclosure disclosure;
  int probe_size = 3;  // local-support probe subset size
  uint64_t seed = 0;
  nlohmann::json meta;  // filter outcomes, audit summaries, coverage stats
};

// Executes the gold SCM under one intervention: clamp targets, derive
// non-intervened roots from 1[threshold < level], evaluate non-intervened
// endogenous variables in topological order.
World simulate_world(const scm::Scm& gold, const std::vector<Unit>& units,
                     const std::map<std::string, double>& env,
                     const Intervention& iv, const std::string& id);

struct ReplayResult {
  std::vector<std::map<std::string, int>> rows;  // replayed values
  // Scored cells only: (row index, variable) -> matched observed value.
  std::vector<std::map<std::string, bool>> match;
  long scored = 0;
  long matched = 0;
  bool exact = true;
};

// Replays a valid candidate on a world. Intervened cells are clamped,
// non-intervened candidate-roots copied from the observed row, and
// non-intervened candidate-endogenous cells computed and scored.
ReplayResult replay(const scm::CompiledScm& candidate, const World& w);

int world_exact(const scm::CompiledScm& candidate, const World& w);

// Distinct assignments to `subset` over training rows where `v` is not
// intervened, with multiplicities.
std::map<std::vector<int>, long> local_support_counts(
    const ProblemRecord& record, const std::string& v,
    const std::vector<std::string>& subset);

}  // namespace scmkit::worlds
