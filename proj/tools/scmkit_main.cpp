// Command-line front end: generate, derive, audit, render-prompt, solve,
// score, report. All inputs and outputs are files; exit code 0 on success,
// 2 on input validation failure, 1 on internal error.

#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "scmkit/generator.hpp"
#include "scmkit/harness.hpp"
#include "scmkit/solvers.hpp"

namespace fs = std::filesystem;
using namespace scmkit;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

generator::GeneratorConfig load_config(const std::string& path) {
  if (path.empty()) return generator::GeneratorConfig{};
  nlohmann::json j = nlohmann::json::parse(harness::read_text(path), nullptr, false);
  if (j.is_discarded()) throw UsageError("config is not valid JSON: " + path);
  return generator::GeneratorConfig::from_json(j);
}

std::vector<solvers::StageBudget> budgets_for(const std::string& profile) {
  if (profile == "desk") return solvers::desk_symbolic_stages();
  if (profile == "full") return solvers::default_symbolic_stages();
  throw UsageError("unknown budget profile: " + profile);
}

int cmd_generate(const std::string& config_path, uint64_t seed, int count,
                 const std::string& out, const std::string& manifest_path) {
  generator::GeneratorConfig cfg = load_config(config_path);
  generator::PoolResult pool = generator::generate_pool(cfg, count, seed);
  harness::save_records(out, pool.records);
  if (!manifest_path.empty())
    harness::write_text(manifest_path, pool.manifest.dump(2) + "\n");
  std::cout << "generated " << pool.records.size() << " records -> " << out << "\n";
  return 0;
}

int cmd_derive(const std::string& records_path, const std::string& out_dir,
               const std::string& variants_arg, bool extra_worlds, bool cex,
               bool alt_tasks, const std::string& pool_path,
               const std::string& config_path, uint64_t seed) {
  generator::GeneratorConfig cfg = load_config(config_path);
  std::vector<worlds::ProblemRecord> records = harness::load_records(records_path);
  fs::create_directories(out_dir);

  std::map<std::string, scm::Setting> wanted;
  {
    std::stringstream ss(variants_arg);
    std::string name;
    while (std::getline(ss, name, ',')) {
      if (name.empty()) continue;
      auto s = scm::setting_from_name(name);
      if (!s) throw UsageError("unknown setting: " + name);
      wanted[name] = *s;
    }
  }
  for (const auto& [name, setting] : wanted) {
    std::vector<worlds::ProblemRecord> out;
    for (const auto& rec : records) {
      auto variants = generator::derive_variants(rec);
      out.push_back(variants.at(setting));
    }
    std::string path = out_dir + "/records_" + name + ".jsonl";
    harness::save_records(path, out);
    std::cout << "wrote " << out.size() << " " << name << " records -> " << path
              << "\n";
  }

  std::vector<worlds::ProblemRecord> extended;
  if (extra_worlds || cex) {
    for (size_t i = 0; i < records.size(); ++i) {
      Rng rng(Rng::mix(seed, Rng::mix(0x657874ULL, i)));
      extended.push_back(generator::select_extra_worlds(records[i], cfg, rng));
    }
  }
  if (extra_worlds) {
    for (const char* name : {"ordered", "hidden_order"}) {
      std::vector<worlds::ProblemRecord> out;
      for (const auto& rec : extended)
        out.push_back(
            generator::derive_variants(rec).at(*scm::setting_from_name(name)));
      std::string path = out_dir + "/records_" + name + "_ext.jsonl";
      harness::save_records(path, out);
      std::cout << "wrote " << out.size() << " " << name << "+extra records -> "
                << path << "\n";
    }
  }

  std::vector<harness::Submission> pool_subs;
  if (!pool_path.empty()) pool_subs = harness::load_submissions(pool_path);
  auto pool_for = [&](const worlds::ProblemRecord& rec, const std::string& setting) {
    std::vector<generator::AltPoolEntry> entries;
    for (const auto& sub : pool_subs) {
      if (sub.record_id != rec.id || sub.is_alt) continue;
      if (!setting.empty() && sub.setting != setting) continue;
      scm::ValidityReport vr = scm::validate(sub.text, rec.disclosure);
      if (!vr.valid()) continue;
      entries.push_back({*vr.model, sub.source});
    }
    return entries;
  };

  if (cex) {
    if (pool_subs.empty())
      throw UsageError("--cex needs --pool with candidate submissions");
    for (const char* name : {"ordered", "hidden_order"}) {
      std::vector<worlds::ProblemRecord> out;
      for (size_t i = 0; i < extended.size(); ++i) {
        worlds::ProblemRecord variant =
            generator::derive_variants(extended[i]).at(*scm::setting_from_name(name));
        Rng rng(Rng::mix(seed, Rng::mix(0x636578ULL, Rng::mix(i, name[0]))));
        auto outcome =
            generator::build_cex(variant, pool_for(variant, name), cfg, rng);
        out.push_back(outcome.record);
      }
      std::string path = out_dir + "/records_" + name + "_cex.jsonl";
      harness::save_records(path, out);
      std::cout << "wrote " << out.size() << " " << name << "+cex records -> " << path
                << "\n";
    }
  }

  if (alt_tasks) {
    if (pool_subs.empty())
      throw UsageError("--alt-tasks needs --pool with candidate submissions");
    for (const char* name : {"ordered", "hidden_order"}) {
      std::vector<generator::AltTask> tasks;
      for (const auto& rec : records) {
        worlds::ProblemRecord variant =
            generator::derive_variants(rec).at(*scm::setting_from_name(name));
        auto found = generator::build_alt_tasks(variant, pool_for(variant, name));
        tasks.insert(tasks.end(), found.begin(), found.end());
      }
      std::string path = out_dir + "/alt_tasks_" + name + ".jsonl";
      harness::save_alt_tasks(path, tasks);
      std::cout << "wrote " << tasks.size() << " " << name << " alt tasks -> " << path
                << "\n";
    }
  }
  return 0;
}

int cmd_audit(const std::string& records_path, const std::string& config_path,
              const std::string& out, bool timing) {
  generator::GeneratorConfig cfg = load_config(config_path);
  std::vector<worlds::ProblemRecord> records = harness::load_records(records_path);
  std::string text;
  for (const auto& rec : records) {
    generator::AuditResult local = generator::audit_local(rec, cfg);
    generator::AuditResult pairs = generator::audit_pairs(rec, cfg);
    nlohmann::json per_var;
    for (const auto& [v, c] : local.local_alternatives) per_var[v] = c;
    nlohmann::json j = {{"format", "scmkit.audit"},
                        {"version", 1},
                        {"record_id", rec.id},
                        {"local", {{"per_variable", per_var},
                                   {"total", local.total_local()},
                                   {"truncated", local.truncated},
                                   {"timed_out", local.timed_out}}},
                        {"pairs", {{"count", pairs.pair_alternatives},
                                   {"truncated", pairs.truncated},
                                   {"timed_out", pairs.timed_out}}}};
    text += j.dump() + "\n";
    if (timing)
      std::cerr << rec.id << " audit wall seconds: local "
                << local.wall_seconds << ", pairs " << pairs.wall_seconds << "\n";
  }
  harness::write_text(out, text);
  std::cout << "audited " << records.size() << " records -> " << out << "\n";
  return 0;
}

int cmd_render_prompt(const std::string& records_path,
                      const std::string& alt_tasks_path, const std::string& out) {
  std::vector<worlds::ProblemRecord> records = harness::load_records(records_path);
  std::string text;
  if (alt_tasks_path.empty()) {
    for (const auto& rec : records) {
      nlohmann::json j = {{"format", "scmkit.prompt"},
                          {"version", 1},
                          {"record_id", rec.id},
                          {"setting", scm::setting_name(rec.disclosure.setting)},
                          {"prompt", harness::render_prompt(rec)}};
      text += j.dump() + "\n";
    }
  } else {
    std::map<std::string, const worlds::ProblemRecord*> by_id;
    for (const auto& rec : records) by_id[rec.id] = &rec;
    for (const auto& task : harness::load_alt_tasks(alt_tasks_path)) {
      auto it = by_id.find(task.record_id);
      if (it == by_id.end())
        throw UsageError("alt task references unknown record " + task.record_id);
      nlohmann::json j = {{"format", "scmkit.prompt"},
                          {"version", 1},
                          {"record_id", task.record_id},
                          {"task_id", task.id},
                          {"setting", scm::setting_name(task.setting)},
                          {"prompt", harness::render_alt_prompt(*it->second, task)}};
      text += j.dump() + "\n";
    }
  }
  harness::write_text(out, text);
  std::cout << "wrote prompts -> " << out << "\n";
  return 0;
}

int cmd_solve(const std::string& records_path, const std::string& method,
              const std::string& budget, const std::string& source,
              const std::string& out, int jobs) {
  std::vector<worlds::ProblemRecord> records = harness::load_records(records_path);
  std::vector<solvers::StageBudget> stages = budgets_for(budget);
  if (method != "symbolic" && method != "hybrid")
    throw UsageError("unknown method: " + method);

  std::vector<harness::Submission> subs(records.size());
  harness::parallel_for(jobs, records.size(), [&](size_t i) {
    const worlds::ProblemRecord& rec = records[i];
    solvers::SolveResult res = method == "symbolic"
                                   ? solvers::symbolic_exact_search(rec, stages)
                                   : solvers::hybrid_solve(rec, stages);
    harness::Submission sub;
    sub.record_id = rec.id;
    sub.setting = scm::setting_name(rec.disclosure.setting);
    sub.source = source.empty() ? res.method : source;
    sub.text = res.submission;
    sub.extra = {{"solved", res.solved},
                 {"stage", res.stage},
                 {"timed_out", res.timed_out}};
    subs[i] = std::move(sub);
  });
  harness::save_submissions(out, subs);
  long solved = 0;
  for (const auto& s : subs)
    if (s.extra.value("solved", false)) solved += 1;
  std::cout << "solved " << solved << "/" << records.size() << " -> " << out << "\n";
  return 0;
}

int cmd_score(const std::string& records_path, const std::string& submissions_path,
              const std::string& alt_tasks_path, const std::string& out, int jobs) {
  std::vector<worlds::ProblemRecord> records = harness::load_records(records_path);
  std::vector<harness::Submission> subs = harness::load_submissions(submissions_path);
  std::vector<generator::AltTask> tasks;
  if (!alt_tasks_path.empty()) tasks = harness::load_alt_tasks(alt_tasks_path);

  std::map<std::string, const worlds::ProblemRecord*> by_id;
  for (const auto& rec : records) by_id[rec.id] = &rec;
  for (const auto& sub : subs)
    if (!by_id.count(sub.record_id))
      throw UsageError("submission references unknown record " + sub.record_id);

  std::vector<harness::RunResult> results(subs.size());
  harness::parallel_for(jobs, subs.size(), [&](size_t i) {
    results[i] = harness::score_any(*by_id.at(subs[i].record_id), subs[i], tasks);
  });
  harness::save_results(out, results);
  std::cout << "scored " << results.size() << " submissions -> " << out << "\n";
  return 0;
}

int cmd_report(const std::string& results_path, const std::string& out,
               const std::string& alt_out, const std::string& paired,
               const std::string& paired_out, int resamples, uint64_t seed) {
  std::vector<harness::RunResult> results = harness::load_results(results_path);
  harness::write_text(out, harness::report_csv(results));
  std::cout << "wrote report -> " << out << "\n";
  if (!alt_out.empty()) {
    harness::write_text(alt_out, harness::alt_report_csv(results));
    std::cout << "wrote alternative-task report -> " << alt_out << "\n";
  }
  if (!paired.empty()) {
    auto comma = paired.find(',');
    if (comma == std::string::npos)
      throw UsageError("--paired expects settingA,settingB");
    std::string a = paired.substr(0, comma), b = paired.substr(comma + 1);
    harness::write_text(paired_out,
                        harness::paired_delta_csv(results, a, b, resamples, seed));
    std::cout << "wrote paired deltas -> " << paired_out << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Boolean SCM induction benchmark toolkit"};
  app.require_subcommand(1);

  std::string config_path, records_path, out_path, manifest_path, variants_arg;
  std::string pool_path, alt_tasks_path, submissions_path, results_path;
  std::string method = "symbolic", budget = "desk", source, out_dir;
  std::string alt_out, paired, paired_out = "deltas.csv";
  uint64_t seed = 0;
  int count = 10, jobs = 1, resamples = 2000;
  bool extra_worlds = false, cex = false, alt_tasks = false, timing = false;

  auto* generate = app.add_subcommand("generate", "Generate a problem pool");
  generate->add_option("--config", config_path, "generator config JSON");
  generate->add_option("--seed", seed, "master seed")->required();
  generate->add_option("--count", count, "number of records");
  generate->add_option("--out", out_path, "records JSONL path")->required();
  generate->add_option("--manifest", manifest_path, "manifest JSON path");

  auto* derive = app.add_subcommand("derive", "Derive variants and audit ladders");
  derive->add_option("--records", records_path, "base records JSONL")->required();
  derive->add_option("--out-dir", out_dir, "output directory")->required();
  derive->add_option("--variants", variants_arg,
                     "comma list: ordered,block_order,hidden_order,hidden_roots");
  derive->add_flag("--extra-worlds", extra_worlds, "emit extra-worlds records");
  derive->add_flag("--cex", cex, "emit counterexample-audit records");
  derive->add_flag("--alt-tasks", alt_tasks, "emit alternative-SCM tasks");
  derive->add_option("--pool", pool_path, "candidate submissions JSONL");
  derive->add_option("--config", config_path, "generator config JSON");
  derive->add_option("--seed", seed, "derivation seed");

  auto* audit = app.add_subcommand("audit", "Run bounded ambiguity audits");
  audit->add_option("--records", records_path)->required();
  audit->add_option("--config", config_path);
  audit->add_option("--out", out_path)->required();
  audit->add_flag("--timing", timing, "print wall times to stderr");

  auto* render = app.add_subcommand("render-prompt", "Serialize prompts");
  render->add_option("--records", records_path)->required();
  render->add_option("--alt-tasks", alt_tasks_path, "render alternative tasks");
  render->add_option("--out", out_path)->required();

  auto* solve = app.add_subcommand("solve", "Run a calibration solver");
  solve->add_option("--records", records_path)->required();
  solve->add_option("--method", method, "symbolic|hybrid");
  solve->add_option("--budget", budget, "desk|full");
  solve->add_option("--source", source, "system tag for submissions");
  solve->add_option("--out", out_path)->required();
  solve->add_option("--jobs", jobs, "worker threads");

  auto* score = app.add_subcommand("score", "Score submissions");
  score->add_option("--records", records_path)->required();
  score->add_option("--submissions", submissions_path)->required();
  score->add_option("--alt-tasks", alt_tasks_path);
  score->add_option("--out", out_path)->required();
  score->add_option("--jobs", jobs, "worker threads");

  auto* report = app.add_subcommand("report", "Aggregate scored results");
  report->add_option("--results", results_path)->required();
  report->add_option("--out", out_path)->required();
  report->add_option("--alt-out", alt_out, "alternative-task report CSV");
  report->add_option("--paired", paired, "settingA,settingB matched deltas");
  report->add_option("--paired-out", paired_out);
  report->add_option("--resamples", resamples);
  report->add_option("--seed", seed);

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed())
      return cmd_generate(config_path, seed, count, out_path, manifest_path);
    if (derive->parsed())
      return cmd_derive(records_path, out_dir, variants_arg, extra_worlds, cex,
                        alt_tasks, pool_path, config_path, seed);
    if (audit->parsed()) return cmd_audit(records_path, config_path, out_path, timing);
    if (render->parsed())
      return cmd_render_prompt(records_path, alt_tasks_path, out_path);
    if (solve->parsed())
      return cmd_solve(records_path, method, budget, source, out_path, jobs);
    if (score->parsed())
      return cmd_score(records_path, submissions_path, alt_tasks_path, out_path, jobs);
    if (report->parsed())
      return cmd_report(results_path, out_path, alt_out, paired, paired_out,
                        resamples, seed);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
