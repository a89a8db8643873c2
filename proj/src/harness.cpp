#include "scmkit/harness.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "scmkit/rng.hpp"

namespace scmkit::harness {

namespace {

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

// Exact rational accumulator for fold-order independent aggregation.
struct Fraction {
  long long num = 0;
  long long den = 1;

  static long long gcd(long long a, long long b) {
    while (b) {
      long long t = a % b;
      a = b;
      b = t;
    }
    return a < 0 ? -a : a;
  }
  void add(long long n, long long d) {
    num = num * d + n * den;
    den *= d;
    long long g = gcd(num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
  }
  double value() const { return den == 0 ? 0.0 : static_cast<double>(num) / den; }
};

void check_format(const nlohmann::json& j, const std::string& format) {
  if (!j.contains("format") || j["format"] != format)
    throw std::runtime_error("unexpected document format, wanted " + format);
  if (!j.contains("version") || !j["version"].is_number_integer() ||
      j["version"].get<int>() != 1)
    throw std::runtime_error("unsupported " + format + " version");
}

}  // namespace

// ---- record serialization ----

namespace {

nlohmann::json world_to_json(const worlds::World& w,
                             const std::vector<std::string>& observed) {
  nlohmann::json j;
  j["id"] = w.id;
  j["mode"] = worlds::iv_mode_name(w.iv.mode);
  j["constants"] = w.iv.constants;
  j["assigned"] = w.iv.assigned;
  j["env"] = w.env;
  j["units"] = w.unit_ids;
  j["compact"] = w.compact;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : w.rows) {
    nlohmann::json r = nlohmann::json::array();
    for (const auto& v : observed) r.push_back(row.at(v));
    rows.push_back(std::move(r));
  }
  j["rows"] = std::move(rows);
  return j;
}

worlds::World world_from_json(const nlohmann::json& j,
                              const std::vector<std::string>& observed) {
  worlds::World w;
  w.id = j.at("id");
  auto mode = worlds::iv_mode_from_name(j.at("mode"));
  if (!mode) throw std::runtime_error("unknown intervention mode in world " + w.id);
  w.iv.mode = *mode;
  w.iv.constants = j.at("constants").get<std::map<std::string, int>>();
  w.iv.assigned = j.at("assigned").get<std::map<std::string, std::vector<int>>>();
  w.env = j.at("env").get<std::map<std::string, double>>();
  w.unit_ids = j.at("units").get<std::vector<std::string>>();
  w.compact = j.value("compact", false);
  for (const auto& r : j.at("rows")) {
    std::map<std::string, int> row;
    for (size_t i = 0; i < observed.size(); ++i) row[observed[i]] = r.at(i).get<int>();
    w.rows.push_back(std::move(row));
  }
  return w;
}

}  // namespace

nlohmann::json record_to_json(const worlds::ProblemRecord& record) {
  nlohmann::json j;
  j["format"] = "scmkit.record";
  j["version"] = 1;
  j["id"] = record.id;
  j["seed"] = record.seed;
  j["setting"] = scm::setting_name(record.disclosure.setting);
  j["observed"] = record.gold.observed;
  j["roots"] = record.gold.roots;
  j["endogenous"] = record.gold.endogenous;
  j["latent_order"] = record.latent_order;
  if (record.disclosure.setting == scm::Setting::Ordered)
    j["order"] = record.disclosure.order;
  if (record.disclosure.setting == scm::Setting::BlockOrder)
    j["blocks"] = record.disclosure.blocks;
  nlohmann::json mech;
  for (const auto& [v, f] : record.gold.mechanisms) mech[v] = dsl::render(f);
  j["mechanisms"] = std::move(mech);
  j["probe_size"] = record.probe_size;
  nlohmann::json units = nlohmann::json::array();
  for (const auto& u : record.units)
    units.push_back({{"id", u.id}, {"thresholds", u.thresholds}});
  j["units"] = std::move(units);
  nlohmann::json training = nlohmann::json::array();
  for (const auto& w : record.training)
    training.push_back(world_to_json(w, record.gold.observed));
  j["training"] = std::move(training);
  nlohmann::json heldout = nlohmann::json::array();
  for (const auto& w : record.heldout)
    heldout.push_back(world_to_json(w, record.gold.observed));
  j["heldout"] = std::move(heldout);
  j["meta"] = record.meta.is_null() ? nlohmann::json::object() : record.meta;
  return j;
}

worlds::ProblemRecord record_from_json(const nlohmann::json& j) {
  check_format(j, "scmkit.record");
  worlds::ProblemRecord rec;
  rec.id = j.at("id");
  rec.seed = j.at("seed").get<uint64_t>();
  rec.latent_order = j.at("latent_order").get<std::vector<std::string>>();
  rec.probe_size = j.at("probe_size");
  std::vector<std::string> observed = j.at("observed").get<std::vector<std::string>>();
  std::vector<std::string> roots = j.at("roots").get<std::vector<std::string>>();
  std::set<std::string> vocab(observed.begin(), observed.end());
  std::map<std::string, dsl::ExprPtr> mech;
  for (const auto& [v, text] : j.at("mechanisms").items())
    mech[v] = dsl::parse(text.get<std::string>(), vocab);
  rec.gold = scm::make_scm(observed, roots, mech);
  for (const auto& u : j.at("units")) {
    worlds::Unit unit;
    unit.id = u.at("id");
    unit.thresholds = u.at("thresholds").get<std::map<std::string, double>>();
    rec.units.push_back(std::move(unit));
  }
  for (const auto& w : j.at("training"))
    rec.training.push_back(world_from_json(w, observed));
  for (const auto& w : j.at("heldout"))
    rec.heldout.push_back(world_from_json(w, observed));

  auto setting = scm::setting_from_name(j.at("setting"));
  if (!setting) throw std::runtime_error("unknown setting in record " + rec.id);
  rec.disclosure.setting = *setting;
  rec.disclosure.observed = observed;
  if (*setting != scm::Setting::HiddenRoots) {
    rec.disclosure.roots = roots;
    rec.disclosure.endogenous = rec.gold.endogenous;
  }
  if (*setting == scm::Setting::Ordered)
    rec.disclosure.order = j.at("order").get<std::vector<std::string>>();
  if (*setting == scm::Setting::BlockOrder)
    rec.disclosure.blocks =
        j.at("blocks").get<std::vector<std::vector<std::string>>>();
  rec.meta = j.value("meta", nlohmann::json::object());
  return rec;
}

// ---- submissions ----

nlohmann::json submission_to_json(const Submission& sub) {
  nlohmann::json j;
  j["format"] = "scmkit.submission";
  j["version"] = 1;
  j["record_id"] = sub.record_id;
  if (!sub.task_id.empty()) j["task_id"] = sub.task_id;
  j["setting"] = sub.setting;
  j["source"] = sub.source;
  j["strict_json"] = sub.strict_json;
  nlohmann::json payload;
  if (sub.is_alt) {
    payload["mechanisms"] = sub.alt.mechanisms;
    payload["experiment"] = {{"mode", sub.alt.mode}, {"value", sub.alt.value}};
    if (sub.alt.targets.size() == 1)
      payload["experiment"]["target"] = sub.alt.targets[0];
    else
      payload["experiment"]["targets"] = sub.alt.targets;
    payload["witness"] = sub.alt.witness;
  } else {
    if (sub.text.roots) payload["roots"] = *sub.text.roots;
    payload["mechanisms"] = sub.text.mechanisms;
  }
  j["payload"] = std::move(payload);
  if (!sub.extra.is_null()) j["extra"] = sub.extra;
  return j;
}

Submission submission_from_json(const nlohmann::json& j) {
  check_format(j, "scmkit.submission");
  Submission sub;
  sub.record_id = j.at("record_id");
  sub.task_id = j.value("task_id", "");
  sub.setting = j.at("setting");
  sub.source = j.value("source", "");
  sub.strict_json = j.value("strict_json", true);
  const nlohmann::json& payload = j.at("payload");
  if (payload.contains("experiment")) {
    sub.is_alt = true;
    sub.alt.mechanisms =
        payload.at("mechanisms").get<std::map<std::string, std::string>>();
    const auto& exp = payload.at("experiment");
    if (exp.contains("target"))
      sub.alt.targets = {exp.at("target").get<std::string>()};
    else if (exp.contains("targets"))
      sub.alt.targets = exp.at("targets").get<std::vector<std::string>>();
    sub.alt.mode = exp.value("mode", "hard_do");
    sub.alt.value = exp.value("value", 0);
    sub.alt.witness = payload.at("witness").get<std::map<std::string, int>>();
  } else {
    if (payload.contains("roots"))
      sub.text.roots = payload.at("roots").get<std::vector<std::string>>();
    sub.text.mechanisms =
        payload.at("mechanisms").get<std::map<std::string, std::string>>();
  }
  if (j.contains("extra")) sub.extra = j["extra"];
  return sub;
}

// ---- alt tasks ----

nlohmann::json alt_task_to_json(const generator::AltTask& task) {
  nlohmann::json j;
  j["format"] = "scmkit.alttask";
  j["version"] = 1;
  j["id"] = task.id;
  j["record_id"] = task.record_id;
  j["setting"] = scm::setting_name(task.setting);
  nlohmann::json mech;
  for (const auto& [v, f] : task.reference.mechanisms) mech[v] = dsl::render(f);
  j["reference"] = {{"observed", task.reference.observed},
                    {"roots", task.reference.roots},
                    {"mechanisms", std::move(mech)}};
  j["source"] = task.source;
  j["certificate"] = {
      {"target", task.target}, {"value", task.value}, {"witness", task.witness}};
  return j;
}

generator::AltTask alt_task_from_json(const nlohmann::json& j) {
  check_format(j, "scmkit.alttask");
  generator::AltTask task;
  task.id = j.at("id");
  task.record_id = j.at("record_id");
  auto setting = scm::setting_from_name(j.at("setting"));
  if (!setting) throw std::runtime_error("unknown setting in task " + task.id);
  task.setting = *setting;
  const auto& ref = j.at("reference");
  std::vector<std::string> observed = ref.at("observed").get<std::vector<std::string>>();
  std::set<std::string> vocab(observed.begin(), observed.end());
  std::map<std::string, dsl::ExprPtr> mech;
  for (const auto& [v, text] : ref.at("mechanisms").items())
    mech[v] = dsl::parse(text.get<std::string>(), vocab);
  task.reference =
      scm::make_scm(observed, ref.at("roots").get<std::vector<std::string>>(), mech);
  task.source = j.value("source", "");
  task.target = j.at("certificate").at("target");
  task.value = j.at("certificate").at("value");
  task.witness = j.at("certificate").at("witness").get<std::map<std::string, int>>();
  return task;
}

// ---- results ----

nlohmann::json result_to_json(const RunResult& r) {
  nlohmann::json j;
  j["format"] = "scmkit.result";
  j["version"] = 1;
  j["record_id"] = r.record_id;
  if (!r.task_id.empty()) j["task_id"] = r.task_id;
  j["setting"] = r.setting;
  j["source"] = r.source;
  j["strict_json"] = r.strict_json;
  j["funnel"] = scm::funnel_stage_name(r.replay.funnel);
  j["valid"] = r.replay.valid;
  j["train_exact"] = r.replay.train_exact;
  j["heldout_exact"] = r.replay.heldout_exact;
  j["train_world_indicators"] = r.replay.train_world_indicators;
  j["heldout_world_indicators"] = r.replay.heldout_world_indicators;
  j["train_worlds_exact"] = r.replay.train_worlds_exact;
  j["train_worlds"] = r.replay.train_worlds;
  j["heldout_worlds_exact"] = r.replay.heldout_worlds_exact;
  j["heldout_worlds"] = r.replay.heldout_worlds;
  j["train_cells_matched"] = r.replay.train_cells_matched;
  j["train_cells"] = r.replay.train_cells;
  j["heldout_cells_matched"] = r.replay.heldout_cells_matched;
  j["heldout_cells"] = r.replay.heldout_cells;
  if (r.structure) {
    j["structure"] = {{"tp", r.structure->tp},
                      {"fp", r.structure->fp},
                      {"fn", r.structure->fn},
                      {"shd", r.structure->shd},
                      {"pervar_exact", r.structure->pervar_exact},
                      {"pervar_total", r.structure->pervar_total},
                      {"map_exact", r.structure->map_exact},
                      {"local_match", r.structure->local_match},
                      {"local_total", r.structure->local_total},
                      {"full_local_match", r.structure->full_local_match}};
  }
  if (r.root_exact >= 0) j["root_exact"] = r.root_exact;
  if (r.is_alt) {
    j["alt"] = {{"valid", r.alt_valid},
                {"train_exact", r.alt_train_exact},
                {"distinct", r.alt_distinct},
                {"experiment_valid", r.experiment_valid},
                {"separates", r.separates},
                {"witness_valid", r.witness_valid},
                {"joint_success", r.joint_success},
                {"pair_disagreement", r.pair_disagreement},
                {"cell_difference_observed", r.cell_difference_observed},
                {"cell_difference_scored", r.cell_difference_scored}};
  }
  return j;
}

RunResult result_from_json(const nlohmann::json& j) {
  check_format(j, "scmkit.result");
  RunResult r;
  r.record_id = j.at("record_id");
  r.task_id = j.value("task_id", "");
  r.setting = j.at("setting");
  r.source = j.value("source", "");
  r.strict_json = j.value("strict_json", false);
  for (int s = 0; s <= static_cast<int>(scm::FunnelStage::Valid); ++s)
    if (j.at("funnel") == scm::funnel_stage_name(static_cast<scm::FunnelStage>(s)))
      r.replay.funnel = static_cast<scm::FunnelStage>(s);
  r.replay.valid = j.at("valid");
  r.replay.train_exact = j.at("train_exact");
  r.replay.heldout_exact = j.at("heldout_exact");
  r.replay.train_world_indicators =
      j.at("train_world_indicators").get<std::vector<int>>();
  r.replay.heldout_world_indicators =
      j.at("heldout_world_indicators").get<std::vector<int>>();
  r.replay.train_worlds_exact = j.at("train_worlds_exact");
  r.replay.train_worlds = j.at("train_worlds");
  r.replay.heldout_worlds_exact = j.at("heldout_worlds_exact");
  r.replay.heldout_worlds = j.at("heldout_worlds");
  r.replay.train_cells_matched = j.at("train_cells_matched");
  r.replay.train_cells = j.at("train_cells");
  r.replay.heldout_cells_matched = j.at("heldout_cells_matched");
  r.replay.heldout_cells = j.at("heldout_cells");
  if (j.contains("structure")) {
    metrics::StructureReport s;
    const auto& sj = j["structure"];
    s.tp = sj.at("tp");
    s.fp = sj.at("fp");
    s.fn = sj.at("fn");
    s.shd = sj.at("shd");
    s.pervar_exact = sj.at("pervar_exact");
    s.pervar_total = sj.at("pervar_total");
    s.map_exact = sj.at("map_exact");
    s.local_match = sj.at("local_match");
    s.local_total = sj.at("local_total");
    s.full_local_match = sj.at("full_local_match");
    r.structure = s;
  }
  if (j.contains("root_exact")) r.root_exact = j["root_exact"];
  if (j.contains("alt")) {
    const auto& a = j["alt"];
    r.is_alt = true;
    r.alt_valid = a.at("valid");
    r.alt_train_exact = a.at("train_exact");
    r.alt_distinct = a.at("distinct");
    r.experiment_valid = a.at("experiment_valid");
    r.separates = a.at("separates");
    r.witness_valid = a.at("witness_valid");
    r.joint_success = a.at("joint_success");
    r.pair_disagreement = a.at("pair_disagreement");
    r.cell_difference_observed = a.at("cell_difference_observed");
    r.cell_difference_scored = a.at("cell_difference_scored");
  }
  return r;
}

// ---- file IO ----

namespace {

template <class T, class ToJson>
void save_jsonl(const std::string& path, const std::vector<T>& items, ToJson to_json) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& item : items) out << to_json(item).dump() << "\n";
}

template <class T, class FromJson>
std::vector<T> load_jsonl(const std::string& path, FromJson from_json) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::vector<T> items;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": malformed JSON");
    items.push_back(from_json(j));
  }
  return items;
}

}  // namespace

void save_records(const std::string& path,
                  const std::vector<worlds::ProblemRecord>& records) {
  save_jsonl(path, records, record_to_json);
}

std::vector<worlds::ProblemRecord> load_records(const std::string& path) {
  return load_jsonl<worlds::ProblemRecord>(path, record_from_json);
}

void save_submissions(const std::string& path, const std::vector<Submission>& subs) {
  save_jsonl(path, subs, submission_to_json);
}

std::vector<Submission> load_submissions(const std::string& path) {
  return load_jsonl<Submission>(path, submission_from_json);
}

void save_alt_tasks(const std::string& path,
                    const std::vector<generator::AltTask>& tasks) {
  save_jsonl(path, tasks, alt_task_to_json);
}

std::vector<generator::AltTask> load_alt_tasks(const std::string& path) {
  return load_jsonl<generator::AltTask>(path, alt_task_from_json);
}

void save_results(const std::string& path, const std::vector<RunResult>& results) {
  save_jsonl(path, results, result_to_json);
}

std::vector<RunResult> load_results(const std::string& path) {
  return load_jsonl<RunResult>(path, result_from_json);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---- prompts ----

namespace {

std::string world_block(const worlds::World& w,
                        const std::vector<std::string>& observed) {
  std::string out;
  out += "WorldId: " + w.id + "\n";
  out += std::string("InterventionMode: ") + worlds::iv_mode_name(w.iv.mode) + "\n";
  if (w.iv.mode != worlds::IvMode::HardConstant) {
    std::string assigned;
    for (const auto& v : observed)
      if (w.iv.assigned.count(v)) {
        if (!assigned.empty()) assigned += ", ";
        assigned += "\"" + v + "\"";
      }
    out += "InterventionTargetsAssigned: [" + assigned + "]\n";
  }
  if (w.iv.mode != worlds::IvMode::HardAssigned) {
    std::string constants;
    for (const auto& v : observed)
      if (w.iv.constants.count(v)) {
        if (!constants.empty()) constants += ", ";
        constants += "\"" + v + "\": " + std::to_string(w.iv.constants.at(v));
      }
    out += "InterventionTargetsConstant: {" + constants + "}\n";
  }
  out += "Rows:\n";
  for (size_t i = 0; i < w.rows.size(); ++i) {
    out += "- " + w.unit_ids[i] + ":";
    for (const auto& v : observed)
      out += " " + v + "=" + std::to_string(w.rows[i].at(v));
    out += "\n";
  }
  return out;
}

std::string schema_line(const worlds::ProblemRecord& record) {
  if (record.disclosure.setting == scm::Setting::HiddenRoots)
    return R"({"roots":["..."],"mechanisms":{"...":"..."}})";
  std::string mech;
  for (const auto& v : record.gold.observed) {
    if (std::find(record.disclosure.endogenous.begin(),
                  record.disclosure.endogenous.end(),
                  v) == record.disclosure.endogenous.end())
      continue;
    if (!mech.empty()) mech += ",";
    mech += "\"" + v + "\":\"...\"";
  }
  return "{\"mechanisms\":{" + mech + "}}";
}

std::string prompt_header(const worlds::ProblemRecord& record) {
  const scm::Disclosure& d = record.disclosure;
  std::string out;
  out += "You are solving a formal causal mechanism induction task\n";
  out += "over finite interventional worlds.\n";
  out += "Treat the input as machine-checkable structure.\n";
  out += "Output exactly one JSON object matching the required schema.\n\n";
  out += "Task: CIND_A_SCM\n";
  out += "ObservedVariables: " + join(d.observed, ", ") + "\n";
  if (d.setting != scm::Setting::HiddenRoots) {
    out += "RootVariables: " + join(d.roots, ", ") + "\n";
    out += "EndogenousVariables: " + join(d.endogenous, ", ") + "\n";
  }
  if (d.setting == scm::Setting::Ordered)
    out += "TopologicalOrder: " + join(d.order, ", ") + "\n";
  if (d.setting == scm::Setting::BlockOrder) {
    std::string blocks;
    for (size_t b = 0; b < d.blocks.size(); ++b) {
      if (b) blocks += " | ";
      blocks += "[" + join(d.blocks[b], ", ") + "]";
    }
    out += "PrecedenceBlocks: " + blocks + "\n";
  }
  out += "AllowedOperators: " + join(d.operators, ", ") + "\n";
  out += "InterventionModes: none, hard_constant, hard_assigned\n\n";
  out +=
      "Scoring: For each world and row, intervened variables are clamped to "
      "their intervention values, non-intervened roots are copied from the "
      "row, and non-intervened endogenous variables are evaluated in "
      "topological order from the submitted mechanisms. Only non-intervened "
      "endogenous cells are scored. The same mechanism map is replayed on all "
      "training and held-out worlds.\n\n";
  out += "expr ::= VAR\n";
  out += "       | (not expr)\n";
  out += "       | (and expr expr ...)\n";
  out += "       | (or expr expr ...)\n";
  out += "       | (xor expr expr ...)\n";
  out += "       | (iff expr expr ...)\n";
  out +=
      "Constants are disallowed. Operators and variable names must match the "
      "metadata exactly.\n\n";
  return out;
}

}  // namespace

std::string render_prompt(const worlds::ProblemRecord& record) {
  std::string out = prompt_header(record);
  for (const auto& w : record.training)
    out += world_block(w, record.gold.observed) + "\n";
  out += "Output exactly one line of JSON matching:\n";
  out += schema_line(record) + "\n";
  return out;
}

std::string render_alt_prompt(const worlds::ProblemRecord& record,
                              const generator::AltTask& task) {
  std::string out = prompt_header(record);
  out += "ReferenceSCM:\n";
  out += "Roots: " + join(task.reference.roots, ", ") + "\n";
  out += "Mechanisms:\n";
  for (const auto& v : task.reference.observed)
    if (task.reference.mechanisms.count(v))
      out += "- " + v + ": " + dsl::render(task.reference.mechanisms.at(v)) + "\n";
  out += "\n";
  for (const auto& w : record.training)
    out += world_block(w, record.gold.observed) + "\n";
  out +=
      "AlternativeTask: return a semantically distinct SCM that fits every "
      "training world, together with a separating single-variable hard "
      "intervention and a witness root assignment.\n";
  out += "Output exactly one line of JSON matching:\n";
  out += R"({"mechanisms":{"...":"..."},"experiment":{"target":"...","mode":"hard_do","value":0},"witness":{"...":0}})";
  out += "\n";
  return out;
}

// ---- ingestion ----

namespace {

// Balanced-brace candidate spans, string-aware.
std::vector<std::pair<size_t, size_t>> json_object_spans(const std::string& text) {
  std::vector<std::pair<size_t, size_t>> spans;
  for (size_t start = 0; start < text.size(); ++start) {
    if (text[start] != '{') continue;
    int depth = 0;
    bool in_string = false;
    for (size_t i = start; i < text.size(); ++i) {
      char c = text[i];
      if (in_string) {
        if (c == '\\')
          ++i;
        else if (c == '"')
          in_string = false;
      } else if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        depth += 1;
      } else if (c == '}') {
        depth -= 1;
        if (depth == 0) {
          spans.push_back({start, i + 1});
          break;
        }
      }
    }
  }
  return spans;
}

long json_node_count(const nlohmann::json& j) {
  long count = 1;
  if (j.is_object())
    for (const auto& [k, v] : j.items()) count += json_node_count(v);
  else if (j.is_array())
    for (const auto& v : j) count += json_node_count(v);
  return count;
}

// Schema-oriented score for the task's required answer object.
int schema_score(const nlohmann::json& j, const worlds::ProblemRecord& record,
                 bool want_alt) {
  if (!j.is_object()) return 0;
  int score = 0;
  if (j.contains("mechanisms") && j["mechanisms"].is_object()) {
    score += 2;
    bool all_strings = true;
    for (const auto& [k, v] : j["mechanisms"].items())
      all_strings = all_strings && v.is_string();
    if (all_strings) score += 1;
  }
  if (want_alt) {
    if (j.contains("experiment") && j["experiment"].is_object()) score += 2;
    if (j.contains("witness") && j["witness"].is_object()) score += 2;
  } else if (record.disclosure.setting == scm::Setting::HiddenRoots) {
    if (j.contains("roots") && j["roots"].is_array()) score += 2;
  }
  return score;
}

}  // namespace

IngestOutcome ingest_submission(const std::string& text,
                                const worlds::ProblemRecord& record,
                                const std::string& task_id) {
  IngestOutcome out;
  bool want_alt = !task_id.empty();

  struct Candidate {
    int score;
    long nodes;
    size_t length;
    size_t start;
    nlohmann::json json;
  };
  std::vector<Candidate> candidates;
  for (const auto& [start, end] : json_object_spans(text)) {
    nlohmann::json j =
        nlohmann::json::parse(text.substr(start, end - start), nullptr, false);
    if (j.is_discarded()) continue;
    int score = schema_score(j, record, want_alt);
    if (score < 2) continue;
    candidates.push_back({score, json_node_count(j), end - start, start, std::move(j)});
  }
  if (candidates.empty()) {
    out.error = "no candidate object";
    return out;
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) {
                     if (a.score != b.score) return a.score > b.score;
                     if (a.nodes != b.nodes) return a.nodes > b.nodes;
                     if (a.length != b.length) return a.length > b.length;
                     return a.start < b.start;
                   });
  const Candidate& best = candidates.front();

  // strict compliance: the whole trimmed response is one single-line object
  auto trim = [](const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    size_t b = s.find_last_not_of(" \t\r\n");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  std::string trimmed = trim(text);
  std::string span = text.substr(best.start, best.length);
  bool strict = trimmed == span && span.find('\n') == std::string::npos;

  Submission sub;
  sub.record_id = record.id;
  sub.task_id = task_id;
  sub.setting = scm::setting_name(record.disclosure.setting);
  sub.strict_json = strict;
  sub.is_alt = want_alt;
  const nlohmann::json& j = best.json;
  if (want_alt) {
    if (j.contains("mechanisms"))
      for (const auto& [k, v] : j["mechanisms"].items())
        if (v.is_string()) sub.alt.mechanisms[k] = v.get<std::string>();
    if (j.contains("experiment") && j["experiment"].is_object()) {
      const auto& exp = j["experiment"];
      if (exp.contains("target") && exp["target"].is_string())
        sub.alt.targets = {exp["target"].get<std::string>()};
      else if (exp.contains("targets") && exp["targets"].is_array())
        for (const auto& t : exp["targets"])
          if (t.is_string()) sub.alt.targets.push_back(t.get<std::string>());
      if (exp.contains("mode") && exp["mode"].is_string())
        sub.alt.mode = exp["mode"].get<std::string>();
      if (exp.contains("value") && exp["value"].is_number_integer())
        sub.alt.value = exp["value"].get<int>();
    }
    if (j.contains("witness") && j["witness"].is_object())
      for (const auto& [k, v] : j["witness"].items())
        if (v.is_number_integer()) sub.alt.witness[k] = v.get<int>();
  } else {
    if (j.contains("roots") && j["roots"].is_array()) {
      std::vector<std::string> roots;
      for (const auto& r : j["roots"])
        if (r.is_string()) roots.push_back(r.get<std::string>());
      sub.text.roots = roots;
    }
    if (j.contains("mechanisms"))
      for (const auto& [k, v] : j["mechanisms"].items())
        if (v.is_string()) sub.text.mechanisms[k] = v.get<std::string>();
  }
  out.found = true;
  out.submission = std::move(sub);
  return out;
}

// ---- scoring ----

namespace {

int compute_root_exact(const worlds::ProblemRecord& record, const Submission& sub) {
  if (!sub.text.roots) return 0;
  std::set<std::string> predicted(sub.text.roots->begin(), sub.text.roots->end());
  std::set<std::string> gold(record.gold.roots.begin(), record.gold.roots.end());
  return predicted == gold ? 1 : 0;
}

}  // namespace

RunResult score_hidden_roots(const worlds::ProblemRecord& record,
                             const Submission& sub) {
  RunResult r;
  r.record_id = record.id;
  r.setting = scm::setting_name(record.disclosure.setting);
  r.source = sub.source;
  r.strict_json = sub.strict_json;
  scm::ValidityReport vr = scm::validate(sub.text, record.disclosure);
  r.replay = metrics::score_validated(record, vr);
  r.root_exact = compute_root_exact(record, sub);
  // structure metrics are gated on exact root-set prediction
  if (r.replay.valid && r.root_exact == 1)
    r.structure = metrics::structure_metrics(record.gold, *vr.model);
  return r;
}

RunResult score_alt(const worlds::ProblemRecord& record, const scm::Scm& source_gold,
                    const generator::AltTask& task, const AltAnswer& answer) {
  RunResult r;
  r.record_id = record.id;
  r.task_id = task.id;
  r.setting = scm::setting_name(record.disclosure.setting);
  r.is_alt = true;

  scm::SubmissionText text;
  text.mechanisms = answer.mechanisms;
  scm::ValidityReport vr = scm::validate(text, record.disclosure);
  r.replay = metrics::score_validated(record, vr);
  r.alt_valid = vr.valid();
  r.alt_train_exact = r.replay.train_exact == 1;
  if (r.alt_valid)
    r.alt_distinct = scm::semantically_distinct(*vr.model, task.reference);

  const std::set<std::string> observed(record.gold.observed.begin(),
                                       record.gold.observed.end());
  r.experiment_valid = answer.targets.size() == 1 &&
                       observed.count(answer.targets.empty() ? "" : answer.targets[0]) &&
                       (answer.mode == "hard_do" || answer.mode == "hard_constant") &&
                       (answer.value == 0 || answer.value == 1);
  {
    std::set<std::string> witness_keys;
    bool bits_ok = true;
    for (const auto& [k, v] : answer.witness) {
      witness_keys.insert(k);
      bits_ok = bits_ok && (v == 0 || v == 1);
    }
    std::set<std::string> roots(task.reference.roots.begin(),
                                task.reference.roots.end());
    r.witness_valid = bits_ok && witness_keys == roots;
  }

  if (r.alt_valid && r.experiment_valid && r.witness_valid) {
    // one fresh witness row: clamp the experiment target, set roots from the
    // witness, replay reference vs the answer alternative
    worlds::Unit unit;
    unit.id = "w0";
    for (const auto& [root, bit] : answer.witness)
      unit.thresholds[root] = bit ? 0.25 : 0.75;
    std::map<std::string, double> env;
    for (const auto& root : task.reference.roots) env[root] = 0.5;
    worlds::Intervention iv;
    iv.mode = worlds::IvMode::HardConstant;
    iv.constants[answer.targets[0]] = answer.value;
    worlds::World w =
        worlds::simulate_world(task.reference, {unit}, env, iv, "witness");
    worlds::ReplayResult rr = worlds::replay(scm::compile(*vr.model), w);
    long differing = rr.scored - rr.matched;
    r.separates = differing > 0;
    r.pair_disagreement = differing > 0 ? 1.0 : 0.0;
    r.cell_difference_observed = record.gold.observed.empty()
                                     ? 0.0
                                     : static_cast<double>(differing) /
                                           static_cast<double>(
                                               record.gold.observed.size());
    r.cell_difference_scored =
        rr.scored == 0 ? 0.0
                       : static_cast<double>(differing) /
                             static_cast<double>(rr.scored);
  }
  r.joint_success = r.alt_valid && r.alt_train_exact && r.alt_distinct &&
                    r.experiment_valid && r.separates && r.witness_valid;
  (void)source_gold;
  return r;
}

RunResult score_any(const worlds::ProblemRecord& record, const Submission& sub,
                    const std::vector<generator::AltTask>& tasks) {
  if (sub.is_alt) {
    const generator::AltTask* task = nullptr;
    for (const auto& t : tasks)
      if (t.id == sub.task_id) task = &t;
    if (!task)
      throw std::runtime_error("unknown alternative task id: " + sub.task_id);
    RunResult r = score_alt(record, record.gold, *task, sub.alt);
    r.source = sub.source;
    r.strict_json = sub.strict_json;
    return r;
  }
  if (record.disclosure.setting == scm::Setting::HiddenRoots)
    return score_hidden_roots(record, sub);

  RunResult r;
  r.record_id = record.id;
  r.setting = scm::setting_name(record.disclosure.setting);
  r.source = sub.source;
  r.strict_json = sub.strict_json;
  scm::ValidityReport vr = scm::validate(sub.text, record.disclosure);
  r.replay = metrics::score_validated(record, vr);
  if (r.replay.valid)
    r.structure = metrics::structure_metrics(record.gold, *vr.model);
  return r;
}

// ---- reporting ----

namespace {

struct GroupStats {
  long n = 0;
  long strict = 0;
  long valid = 0;
  long train_exact = 0;
  long heldout_exact = 0;
  Fraction train_world;
  Fraction heldout_world;
  Fraction heldout_world_given_te;  // conditional mean
  long te_count = 0;
  long he_given_te = 0;
  Fraction retention;
  long retention_count = 0;
  // structure
  long n_structure = 0;
  Fraction recall, f1_sum, pervar, local_match;
  double shd_sum = 0;
  long map_exact = 0, full_local = 0;
  long root_exact = 0, root_rows = 0;
};

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string cell_display(long num, long den, int places = 3) {
  if (den == 0) return "–";
  if (den <= 5) return "*";
  return metrics::format_fixed(static_cast<double>(num) / den, places);
}

std::string mean_display(const Fraction& f, long den, int places = 3) {
  if (den == 0) return "–";
  if (den <= 5) return "*";
  return metrics::format_fixed(f.value() / static_cast<double>(den), places);
}

}  // namespace

std::string report_csv(const std::vector<RunResult>& results) {
  std::map<std::pair<std::string, std::string>, GroupStats> groups;
  for (const auto& r : results) {
    if (r.is_alt) continue;
    GroupStats& g = groups[{r.setting, r.source}];
    g.n += 1;
    g.strict += r.strict_json ? 1 : 0;
    g.valid += r.replay.valid ? 1 : 0;
    g.train_exact += r.replay.train_exact;
    g.heldout_exact += r.replay.heldout_exact;
    g.train_world.add(r.replay.train_worlds_exact,
                      std::max<long>(1, r.replay.train_worlds));
    g.heldout_world.add(r.replay.heldout_worlds_exact,
                        std::max<long>(1, r.replay.heldout_worlds));
    if (r.replay.train_exact == 1) {
      g.te_count += 1;
      g.heldout_world_given_te.add(r.replay.heldout_worlds_exact,
                                   std::max<long>(1, r.replay.heldout_worlds));
      g.he_given_te += r.replay.heldout_exact;
    }
    if (r.replay.retention_defined()) {
      g.retention_count += 1;
      g.retention.add(
          r.replay.heldout_worlds_exact * r.replay.train_worlds,
          std::max<long>(1, r.replay.heldout_worlds * r.replay.train_worlds_exact));
    }
    if (r.structure) {
      g.n_structure += 1;
      const auto& s = *r.structure;
      long rec_den = std::max<long>(1, s.tp + s.fn);
      g.recall.add(s.tp + s.fn == 0 ? rec_den : s.tp, rec_den);
      g.f1_sum.add(static_cast<long long>(s.f1() * 1e6), 1000000);
      g.shd_sum += s.shd;
      g.pervar.add(s.pervar_exact, std::max<long>(1, s.pervar_total));
      g.local_match.add(s.local_match, std::max<long>(1, s.local_total));
      g.map_exact += s.map_exact;
      g.full_local += s.full_local_match;
    }
    if (r.root_exact >= 0) {
      g.root_rows += 1;
      g.root_exact += r.root_exact;
    }
  }

  std::string out =
      "Setting,System,n,StrictJSON,Valid,TrainExact,TrainWorldExact,"
      "HeldoutWorld,HeldoutExact,HeldoutWorld|TrainExact,"
      "HeldoutExact|TrainExact,Retention,nStructure,ParentRecall,ParentF1,"
      "ParentSHD,PerVarParentExact,ExactParentMap,MeanLocalMatch,"
      "FullLocalMatch,RootExact\n";
  for (const auto& [key, g] : groups) {
    const auto& [setting, source] = key;
    out += csv_escape(setting) + "," + csv_escape(source) + ",";
    out += std::to_string(g.n) + ",";
    out += metrics::format_fixed(static_cast<double>(g.strict) / g.n, 3) + ",";
    out += metrics::format_fixed(static_cast<double>(g.valid) / g.n, 3) + ",";
    out += metrics::format_fixed(static_cast<double>(g.train_exact) / g.n, 3) + ",";
    out += metrics::format_fixed(g.train_world.value() / g.n, 3) + ",";
    out += metrics::format_fixed(g.heldout_world.value() / g.n, 3) + ",";
    out += metrics::format_fixed(static_cast<double>(g.heldout_exact) / g.n, 3) + ",";
    out += mean_display(g.heldout_world_given_te, g.te_count) + ",";
    out += cell_display(g.he_given_te, g.te_count) + ",";
    out += mean_display(g.retention, g.retention_count) + ",";
    out += std::to_string(g.n_structure) + ",";
    if (g.n_structure > 0) {
      out += metrics::format_fixed(g.recall.value() / g.n_structure, 3) + ",";
      out += metrics::format_fixed(g.f1_sum.value() / g.n_structure, 3) + ",";
      out += metrics::format_fixed(g.shd_sum / g.n_structure, 2) + ",";
      out += metrics::format_fixed(g.pervar.value() / g.n_structure, 3) + ",";
      out +=
          metrics::format_fixed(static_cast<double>(g.map_exact) / g.n_structure, 3) +
          ",";
      out += metrics::format_fixed(g.local_match.value() / g.n_structure, 3) + ",";
      out += metrics::format_fixed(static_cast<double>(g.full_local) / g.n_structure,
                                   3) +
             ",";
    } else {
      out += "–,–,–,–,–,–,–,";
    }
    out += g.root_rows > 0
               ? metrics::format_fixed(static_cast<double>(g.root_exact) / g.root_rows,
                                       3)
               : std::string("–");
    out += "\n";
  }
  return out;
}

std::string alt_report_csv(const std::vector<RunResult>& results) {
  struct AltStats {
    long n = 0, valid = 0, train_exact = 0, distinct = 0, experiment = 0,
         separates = 0, witness = 0, joint = 0;
    double pair_sum = 0, cell_obs_sum = 0, cell_scored_sum = 0;
  };
  std::map<std::pair<std::string, std::string>, AltStats> groups;
  for (const auto& r : results) {
    if (!r.is_alt) continue;
    AltStats& g = groups[{r.setting, r.source}];
    g.n += 1;
    g.valid += r.alt_valid;
    g.train_exact += r.alt_train_exact;
    g.distinct += r.alt_distinct;
    g.experiment += r.experiment_valid;
    g.separates += r.separates;
    g.witness += r.witness_valid;
    g.joint += r.joint_success;
    g.pair_sum += r.pair_disagreement;
    g.cell_obs_sum += r.cell_difference_observed;
    g.cell_scored_sum += r.cell_difference_scored;
  }
  std::string out =
      "Setting,System,n,AltValid,AltTrainExact,Distinct,ExperimentValid,"
      "Separates,WitnessValid,JointSuccess,PairDisagreementRate,"
      "CellDifferenceRate(observed),CellDifferenceRate(scored)\n";
  for (const auto& [key, g] : groups) {
    const auto& [setting, source] = key;
    double n = static_cast<double>(g.n);
    out += csv_escape(setting) + "," + csv_escape(source) + "," +
           std::to_string(g.n) + ",";
    out += metrics::format_fixed(g.valid / n, 3) + ",";
    out += metrics::format_fixed(g.train_exact / n, 3) + ",";
    out += metrics::format_fixed(g.distinct / n, 3) + ",";
    out += metrics::format_fixed(g.experiment / n, 3) + ",";
    out += metrics::format_fixed(g.separates / n, 3) + ",";
    out += metrics::format_fixed(g.witness / n, 3) + ",";
    out += metrics::format_fixed(g.joint / n, 3) + ",";
    out += metrics::format_fixed(g.pair_sum / n, 3) + ",";
    out += metrics::format_fixed(g.cell_obs_sum / n, 3) + ",";
    out += metrics::format_fixed(g.cell_scored_sum / n, 3) + "\n";
  }
  return out;
}

std::string paired_delta_csv(const std::vector<RunResult>& results,
                             const std::string& setting_a,
                             const std::string& setting_b, int resamples,
                             uint64_t seed) {
  // pair by (source, record_id)
  std::map<std::pair<std::string, std::string>, const RunResult*> a_rows, b_rows;
  std::set<std::string> sources;
  for (const auto& r : results) {
    if (r.is_alt) continue;
    if (r.setting == setting_a) a_rows[{r.source, r.record_id}] = &r;
    if (r.setting == setting_b) b_rows[{r.source, r.record_id}] = &r;
    sources.insert(r.source);
  }
  std::string out = "System,Metric,n,Delta,Lo95,Hi95\n";
  for (const auto& source : sources) {
    struct MetricDef {
      const char* name;
      std::function<double(const RunResult&)> get;
    };
    std::vector<MetricDef> defs = {
        {"TrainExact", [](const RunResult& r) {
           return static_cast<double>(r.replay.train_exact);
         }},
        {"HeldoutWorldExact", [](const RunResult& r) {
           return r.replay.heldout_world_exact_rate();
         }},
        {"HeldoutExact", [](const RunResult& r) {
           return static_cast<double>(r.replay.heldout_exact);
         }}};
    for (const auto& def : defs) {
      std::vector<std::pair<double, double>> pairs;
      for (const auto& [key, ra] : a_rows) {
        if (key.first != source) continue;
        auto it = b_rows.find(key);
        if (it == b_rows.end()) continue;
        pairs.push_back({def.get(*ra), def.get(*it->second)});
      }
      if (pairs.empty()) continue;
      auto boot = metrics::bootstrap_paired(pairs, resamples, seed);
      out += csv_escape(source) + "," + def.name + "," +
             std::to_string(pairs.size()) + "," +
             metrics::format_fixed(boot.delta, 4) + "," +
             metrics::format_fixed(boot.lo, 4) + "," +
             metrics::format_fixed(boot.hi, 4) + "\n";
    }
  }
  return out;
}

void parallel_for(int jobs, size_t count, const std::function<void(size_t)>& fn) {
  if (jobs <= 1 || count <= 1) {
    for (size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    while (true) {
      size_t i = next.fetch_add(1);
      if (i >= count) break;
      fn(i);
    }
  };
  std::vector<std::thread> threads;
  int n_threads = std::min<int>(jobs, static_cast<int>(count));
  threads.reserve(static_cast<size_t>(n_threads));
  for (int t = 0; t < n_threads; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
}

}  // namespace scmkit::harness
