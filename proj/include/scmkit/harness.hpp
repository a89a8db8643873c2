#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "scmkit/generator.hpp"
#include "scmkit/metrics.hpp"
#include "scmkit/worlds.hpp"

namespace scmkit::harness {

// Alternative-SCM answer object: a mechanism map plus a single-variable hard
// intervention and a witness root assignment.
struct AltAnswer {
  std::map<std::string, std::string> mechanisms;
  std::vector<std::string> targets;
  int value = 0;
  std::string mode = "hard_do";
  std::map<std::string, int> witness;
};

struct Submission {
  std::string record_id;
  std::string task_id;  // Alternative-SCM submissions reference a task
  std::string setting;
  std::string source;
  bool is_alt = false;
  scm::SubmissionText text;
  AltAnswer alt;
  bool strict_json = true;
  nlohmann::json extra;  // passthrough fields, preserved on save
};

struct RunResult {
  std::string record_id, task_id, setting, source;
  bool strict_json = false;
  metrics::ReplayReport replay;
  std::optional<metrics::StructureReport> structure;
  int root_exact = -1;  // hidden_roots only; -1 elsewhere

  bool is_alt = false;
  bool alt_valid = false;
  bool alt_train_exact = false;
  bool alt_distinct = false;
  bool experiment_valid = false;
  bool separates = false;
  bool witness_valid = false;
  bool joint_success = false;
  double pair_disagreement = 0;
  double cell_difference_observed = 0;  // differing cells / observed cells
  double cell_difference_scored = 0;    // differing cells / scored cells
};

// ---- file formats (line-delimited JSON, versioned) ----

nlohmann::json record_to_json(const worlds::ProblemRecord& record);
worlds::ProblemRecord record_from_json(const nlohmann::json& j);

nlohmann::json submission_to_json(const Submission& sub);
Submission submission_from_json(const nlohmann::json& j);

nlohmann::json alt_task_to_json(const generator::AltTask& task);
generator::AltTask alt_task_from_json(const nlohmann::json& j);

nlohmann::json result_to_json(const RunResult& r);
RunResult result_from_json(const nlohmann::json& j);

void save_records(const std::string& path,
                  const std::vector<worlds::ProblemRecord>& records);
std::vector<worlds::ProblemRecord> load_records(const std::string& path);

void save_submissions(const std::string& path, const std::vector<Submission>& subs);
std::vector<Submission> load_submissions(const std::string& path);

void save_alt_tasks(const std::string& path,
                    const std::vector<generator::AltTask>& tasks);
std::vector<generator::AltTask> load_alt_tasks(const std::string& path);

void save_results(const std::string& path, const std::vector<RunResult>& results);
std::vector<RunResult> load_results(const std::string& path);

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

// ---- prompts ----

// Deterministic serialization of the task record; held-out worlds are never
// rendered.
std::string render_prompt(const worlds::ProblemRecord& record);
std::string render_alt_prompt(const worlds::ProblemRecord& record,
                              const generator::AltTask& task);

// ---- submission ingestion ----

struct IngestOutcome {
  bool found = false;
  Submission submission;
  std::string error;  // "no candidate object" etc.
};

// Extracts the single task-shaped JSON object from possibly-wrapped text
// using the deterministic rule: schema score, then object size, decoded span
// length, earliest start. Mechanism strings are never rewritten.
IngestOutcome ingest_submission(const std::string& text,
                                const worlds::ProblemRecord& record,
                                const std::string& task_id = "");

// ---- scoring ----

RunResult score_any(const worlds::ProblemRecord& record, const Submission& sub,
                    const std::vector<generator::AltTask>& tasks = {});

RunResult score_alt(const worlds::ProblemRecord& record, const scm::Scm& source_gold,
                    const generator::AltTask& task, const AltAnswer& answer);

RunResult score_hidden_roots(const worlds::ProblemRecord& record,
                             const Submission& sub);

// ---- reporting ----

// Per-(setting, system) aggregate rows with the suppression convention.
std::string report_csv(const std::vector<RunResult>& results);
std::string alt_report_csv(const std::vector<RunResult>& results);

// Paired bootstrap deltas between two settings over matched record ids.
std::string paired_delta_csv(const std::vector<RunResult>& results,
                             const std::string& setting_a,
                             const std::string& setting_b, int resamples,
                             uint64_t seed);

// ---- worker pool ----

// Order-preserving parallel map; jobs <= 1 runs inline.
void parallel_for(int jobs, size_t count, const std::function<void(size_t)>& fn);

}  // namespace scmkit::harness
