#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "scmkit/scm.hpp"
#include "scmkit/worlds.hpp"

namespace scmkit::metrics {

// Replay outcomes for one submission. Counts are kept as exact integers so
// aggregation is fold-order independent; rates are derived on demand.
struct ReplayReport {
  scm::FunnelStage funnel = scm::FunnelStage::None;
  bool valid = false;
  int train_exact = 0;
  int heldout_exact = 0;
  std::vector<int> train_world_indicators;
  std::vector<int> heldout_world_indicators;
  long train_worlds_exact = 0, train_worlds = 0;
  long heldout_worlds_exact = 0, heldout_worlds = 0;
  long train_cells_matched = 0, train_cells = 0;
  long heldout_cells_matched = 0, heldout_cells = 0;

  double train_world_exact_rate() const {
    return train_worlds == 0 ? 0.0
                             : static_cast<double>(train_worlds_exact) / train_worlds;
  }
  double heldout_world_exact_rate() const {
    return heldout_worlds == 0
               ? 0.0
               : static_cast<double>(heldout_worlds_exact) / heldout_worlds;
  }
  bool retention_defined() const { return train_worlds_exact > 0; }
  double retention() const {
    return retention_defined()
               ? heldout_world_exact_rate() / train_world_exact_rate()
               : 0.0;
  }
};

struct StructureReport {
  long tp = 0, fp = 0, fn = 0;  // directed functional-parent edges
  int shd = 0;                  // reversals cost 1
  long pervar_exact = 0, pervar_total = 0;
  int map_exact = 0;
  long local_match = 0, local_total = 0;
  int full_local_match = 0;

  double precision() const;
  double recall() const;
  double f1() const;
  double pervar_exact_rate() const {
    return pervar_total == 0 ? 1.0
                             : static_cast<double>(pervar_exact) / pervar_total;
  }
  double mean_local_match() const {
    return local_total == 0 ? 1.0
                            : static_cast<double>(local_match) / local_total;
  }
};

// Conditional-rate cell with the display suppression convention:
// denominator 0 -> "–", 1..5 -> "*", else the rate to 3 decimals.
struct AggregateCell {
  long num = 0;
  long den = 0;
  double rate() const { return den == 0 ? 0.0 : static_cast<double>(num) / den; }
  std::string display() const;
};

ReplayReport score_submission(const worlds::ProblemRecord& record,
                              const scm::SubmissionText& sub);

// Same scoring given an already-run validity funnel.
ReplayReport score_validated(const worlds::ProblemRecord& record,
                             const scm::ValidityReport& vr);

// Throws std::invalid_argument when the candidate's root set differs from the
// gold's (structure metrics are gated on exact root-set prediction).
StructureReport structure_metrics(const scm::Scm& gold, const scm::Scm& candidate);

// events: (condition A, event B); rate of B among A.
AggregateCell conditional_rate(const std::vector<std::pair<int, int>>& events);

struct BootstrapResult {
  double delta = 0;  // mean(second - first)
  double lo = 0, hi = 0;
};

// Percentile bootstrap over matched problem ids, pairing preserved.
BootstrapResult bootstrap_paired(const std::vector<std::pair<double, double>>& pairs,
                                 int resamples, uint64_t seed);

struct CoverageStats {
  // per endogenous variable: observed probe patterns / 2^|probe|
  std::map<std::string, std::pair<long, long>> per_variable;
  std::map<std::string, std::vector<std::string>> probes;
  double mean = 0;
  double variable_rate(const std::string& v) const {
    auto& [num, den] = per_variable.at(v);
    return den == 0 ? 0.0 : static_cast<double>(num) / den;
  }
};

// Probe subset: gold effective parents capped at record.probe_size, keeping
// the order-earliest parents.
std::vector<std::string> probe_subset(const worlds::ProblemRecord& record,
                                      const std::string& v);

CoverageStats coverage_stats(const worlds::ProblemRecord& record);

// Display rounding: half-up to `places` decimals.
std::string format_fixed(double value, int places);

}  // namespace scmkit::metrics
