#include "scmkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "scmkit/rng.hpp"

namespace scmkit::metrics {

double StructureReport::precision() const {
  if (tp + fp == 0) return tp + fn == 0 ? 1.0 : 0.0;
  return static_cast<double>(tp) / (tp + fp);
}

double StructureReport::recall() const {
  if (tp + fn == 0) return tp + fp == 0 ? 1.0 : 0.0;
  return static_cast<double>(tp) / (tp + fn);
}

double StructureReport::f1() const {
  double p = precision(), r = recall();
  if (p + r == 0) return 0.0;
  return 2 * p * r / (p + r);
}

std::string format_fixed(double value, int places) {
  double scale = std::pow(10.0, places);
  double scaled = value * scale;
  long long rounded = static_cast<long long>(
      scaled >= 0 ? std::floor(scaled + 0.5) : std::ceil(scaled - 0.5));
  bool neg = rounded < 0;
  unsigned long long mag = neg ? -rounded : rounded;
  std::string digits = std::to_string(mag);
  while (digits.size() <= static_cast<size_t>(places)) digits.insert(0, "0");
  std::string out = digits.substr(0, digits.size() - places);
  if (places > 0) out += "." + digits.substr(digits.size() - places);
  return neg ? "-" + out : out;
}

std::string AggregateCell::display() const {
  if (den == 0) return "–";
  if (den <= 5) return "*";
  return format_fixed(rate(), 3);
}

ReplayReport score_submission(const worlds::ProblemRecord& record,
                              const scm::SubmissionText& sub) {
  return score_validated(record, scm::validate(sub, record.disclosure));
}

ReplayReport score_validated(const worlds::ProblemRecord& record,
                             const scm::ValidityReport& vr) {
  ReplayReport r;
  r.funnel = vr.reached;
  r.valid = vr.valid();
  r.train_worlds = static_cast<long>(record.training.size());
  r.heldout_worlds = static_cast<long>(record.heldout.size());
  r.train_world_indicators.assign(record.training.size(), 0);
  r.heldout_world_indicators.assign(record.heldout.size(), 0);
  if (!r.valid) return r;  // invalid submissions score zero on replay

  scm::CompiledScm candidate = scm::compile(*vr.model);
  bool all_train = true;
  for (size_t i = 0; i < record.training.size(); ++i) {
    worlds::ReplayResult rr = worlds::replay(candidate, record.training[i]);
    r.train_world_indicators[i] = rr.exact ? 1 : 0;
    r.train_worlds_exact += rr.exact ? 1 : 0;
    r.train_cells += rr.scored;
    r.train_cells_matched += rr.matched;
    all_train = all_train && rr.exact;
  }
  bool all_heldout = true;
  for (size_t i = 0; i < record.heldout.size(); ++i) {
    worlds::ReplayResult rr = worlds::replay(candidate, record.heldout[i]);
    r.heldout_world_indicators[i] = rr.exact ? 1 : 0;
    r.heldout_worlds_exact += rr.exact ? 1 : 0;
    r.heldout_cells += rr.scored;
    r.heldout_cells_matched += rr.matched;
    all_heldout = all_heldout && rr.exact;
  }
  r.train_exact = all_train ? 1 : 0;
  r.heldout_exact = (all_train && all_heldout) ? 1 : 0;
  return r;
}

StructureReport structure_metrics(const scm::Scm& gold, const scm::Scm& candidate) {
  std::set<std::string> gold_roots(gold.roots.begin(), gold.roots.end());
  std::set<std::string> cand_roots(candidate.roots.begin(), candidate.roots.end());
  if (gold_roots != cand_roots)
    throw std::invalid_argument(
        "structure metrics require the gold root/endogenous partition");

  scm::ParentGraph g = scm::functional_parent_graph(gold);
  scm::ParentGraph c = scm::functional_parent_graph(candidate);

  StructureReport r;
  std::set<std::pair<std::string, std::string>> missing, extra;
  for (const auto& e : g.edges) {
    if (c.edges.count(e))
      r.tp += 1;
    else {
      r.fn += 1;
      missing.insert(e);
    }
  }
  for (const auto& e : c.edges)
    if (!g.edges.count(e)) {
      r.fp += 1;
      extra.insert(e);
    }
  long reversals = 0;
  for (const auto& [u, v] : missing)
    if (extra.count({v, u})) reversals += 1;
  r.shd = static_cast<int>(missing.size() + extra.size() - reversals);

  auto gold_sig = scm::scm_signature(gold);
  auto cand_sig = scm::scm_signature(candidate);
  bool all_parents = true, all_local = true;
  for (const auto& v : gold.endogenous) {
    r.pervar_total += 1;
    r.local_total += 1;
    auto git = gold_sig.find(v);
    auto cit = cand_sig.find(v);
    bool parents_equal =
        cit != cand_sig.end() && git->second.parents == cit->second.parents;
    bool local_equal = cit != cand_sig.end() && git->second == cit->second;
    if (parents_equal)
      r.pervar_exact += 1;
    else
      all_parents = false;
    if (local_equal)
      r.local_match += 1;
    else
      all_local = false;
  }
  r.map_exact = all_parents ? 1 : 0;
  r.full_local_match = all_local ? 1 : 0;
  return r;
}

AggregateCell conditional_rate(const std::vector<std::pair<int, int>>& events) {
  AggregateCell cell;
  for (const auto& [a, b] : events) {
    if (a) {
      cell.den += 1;
      if (b) cell.num += 1;
    }
  }
  return cell;
}

namespace {
double percentile(std::vector<double>& sorted, double q) {
  // type-7 quantile (linear interpolation)
  if (sorted.empty()) return 0.0;
  double pos = q * static_cast<double>(sorted.size() - 1);
  size_t lo = static_cast<size_t>(std::floor(pos));
  size_t hi = static_cast<size_t>(std::ceil(pos));
  double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1 - frac) + sorted[hi] * frac;
}
}  // namespace

BootstrapResult bootstrap_paired(const std::vector<std::pair<double, double>>& pairs,
                                 int resamples, uint64_t seed) {
  if (pairs.empty()) throw std::invalid_argument("bootstrap_paired: empty input");
  size_t n = pairs.size();
  BootstrapResult out;
  double total = 0;
  for (const auto& [a, b] : pairs) total += b - a;
  out.delta = total / static_cast<double>(n);

  Rng rng(seed);
  std::vector<double> deltas;
  deltas.reserve(static_cast<size_t>(resamples));
  for (int r = 0; r < resamples; ++r) {
    double sum = 0;
    for (size_t i = 0; i < n; ++i) {
      const auto& [a, b] = pairs[static_cast<size_t>(
          rng.uniform_int(0, static_cast<int64_t>(n) - 1))];
      sum += b - a;
    }
    deltas.push_back(sum / static_cast<double>(n));
  }
  std::sort(deltas.begin(), deltas.end());
  out.lo = percentile(deltas, 0.025);
  out.hi = percentile(deltas, 0.975);
  return out;
}

std::vector<std::string> probe_subset(const worlds::ProblemRecord& record,
                                      const std::string& v) {
  std::vector<std::string> eff =
      dsl::effective_parents(record.gold.mechanisms.at(v));
  // cap at probe_size, keeping the order-earliest parents
  auto pos = [&](const std::string& x) {
    return std::find(record.latent_order.begin(), record.latent_order.end(), x) -
           record.latent_order.begin();
  };
  std::sort(eff.begin(), eff.end(),
            [&](const std::string& a, const std::string& b) { return pos(a) < pos(b); });
  if (static_cast<int>(eff.size()) > record.probe_size)
    eff.resize(static_cast<size_t>(record.probe_size));
  std::sort(eff.begin(), eff.end());
  return eff;
}

CoverageStats coverage_stats(const worlds::ProblemRecord& record) {
  CoverageStats out;
  double sum = 0;
  for (const auto& v : record.gold.endogenous) {
    std::vector<std::string> probe = probe_subset(record, v);
    auto counts = worlds::local_support_counts(record, v, probe);
    long seen = static_cast<long>(counts.size());
    long total = 1L << probe.size();
    out.per_variable[v] = {seen, total};
    out.probes[v] = probe;
    sum += static_cast<double>(seen) / static_cast<double>(total);
  }
  out.mean = record.gold.endogenous.empty()
                 ? 1.0
                 : sum / static_cast<double>(record.gold.endogenous.size());
  return out;
}

}  // namespace scmkit::metrics
