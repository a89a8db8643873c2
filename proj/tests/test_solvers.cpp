#include "doctest.h"

#include "scmkit/metrics.hpp"
#include "scmkit/solvers.hpp"
#include "test_support.hpp"

using namespace scmkit;
using namespace testsupport;

namespace {

worlds::ProblemRecord not_gate_record() {
  std::set<std::string> vocab = {"R", "Y"};
  std::map<std::string, dsl::ExprPtr> mech;
  mech["Y"] = dsl::parse("(not R)", vocab);
  worlds::ProblemRecord rec;
  rec.id = "toy";
  rec.gold = scm::make_scm({"R", "Y"}, {"R"}, mech);
  rec.latent_order = {"R", "Y"};
  rec.units = {{"u0", {{"R", 0.3}}}, {"u1", {{"R", 0.7}}}};
  rec.disclosure.setting = scm::Setting::Ordered;
  rec.disclosure.observed = {"R", "Y"};
  rec.disclosure.roots = {"R"};
  rec.disclosure.endogenous = {"Y"};
  rec.disclosure.order = {"R", "Y"};
  worlds::Intervention none;
  rec.training.push_back(
      worlds::simulate_world(rec.gold, rec.units, {{"R", 0.5}}, none, "train_00"));
  worlds::Intervention do_r;
  do_r.mode = worlds::IvMode::HardConstant;
  do_r.constants["R"] = 1;
  rec.training.push_back(
      worlds::simulate_world(rec.gold, rec.units, {{"R", 0.5}}, do_r, "train_01"));
  return rec;
}

// Interventional chain R -> A -> B where the do(A) world breaks the
// observational tie between parents {R} and {A} for B.
worlds::ProblemRecord chain_record() {
  std::set<std::string> vocab = {"R", "A", "B"};
  std::map<std::string, dsl::ExprPtr> mech;
  mech["A"] = dsl::parse("(not R)", vocab);
  mech["B"] = dsl::parse("(not A)", vocab);
  worlds::ProblemRecord rec;
  rec.id = "chain";
  rec.gold = scm::make_scm({"R", "A", "B"}, {"R"}, mech);
  rec.latent_order = {"R", "A", "B"};
  Rng rng(2);
  rec.units = random_units(rng, rec.gold, 10);
  rec.disclosure.setting = scm::Setting::HiddenOrder;
  rec.disclosure.observed = {"R", "A", "B"};
  rec.disclosure.roots = {"R"};
  rec.disclosure.endogenous = {"A", "B"};
  worlds::Intervention none;
  rec.training.push_back(
      worlds::simulate_world(rec.gold, rec.units, {{"R", 0.5}}, none, "train_00"));
  worlds::Intervention do_a;
  do_a.mode = worlds::IvMode::HardAssigned;
  do_a.assigned["A"] = {1, 0, 1, 0, 1, 1, 0, 0, 1, 0};
  rec.training.push_back(
      worlds::simulate_world(rec.gold, rec.units, {{"R", 0.65}}, do_a, "train_01"));
  worlds::Intervention do_r;
  do_r.mode = worlds::IvMode::HardAssigned;
  do_r.assigned["R"] = {0, 1, 0, 1, 0, 0, 1, 1, 0, 1};
  rec.training.push_back(
      worlds::simulate_world(rec.gold, rec.units, {{"R", 0.35}}, do_r, "train_02"));
  return rec;
}

}  // namespace

TEST_CASE("partial_table collects constraints and reports conflicts") {
  worlds::ProblemRecord rec = not_gate_record();
  auto table = solvers::partial_table(rec, "Y", {"R"});
  REQUIRE(table.has_value());
  CHECK(table->entries.at({0}) == 1);
  CHECK(table->entries.at({1}) == 0);

  // conflicting rows make the parent set infeasible
  worlds::ProblemRecord conflicted = rec;
  conflicted.training[1].rows[0]["Y"] = 1;
  conflicted.training[1].iv = {};  // treat as observational so Y is scored
  CHECK(!solvers::partial_table(conflicted, "Y", {"R"}).has_value());

  // unobserved patterns stay absent (don't-care)
  worlds::ProblemRecord only_zero = rec;
  only_zero.training.resize(1);
  only_zero.training[0].rows.resize(1);  // single row
  auto partial = solvers::partial_table(only_zero, "Y", {"R"});
  REQUIRE(partial.has_value());
  CHECK(partial->entries.size() == 1);
}

TEST_CASE("exact_fit enumerates small train-consistent mechanisms") {
  solvers::PartialTruthTable table;
  table.parents = {"X"};
  table.entries = {{{0}, 1}, {{1}, 0}};
  solvers::StageBudget budget{6, 2, 16, 50000, 0};
  auto fits = solvers::exact_fit(table, budget);
  REQUIRE(!fits.empty());
  CHECK(dsl::render(fits.front()) == "(not X)");

  solvers::PartialTruthTable empty;
  empty.parents = {"X"};
  auto any = solvers::exact_fit(empty, budget);
  REQUIRE(!any.empty());
  CHECK(dsl::render(any.front()) == "X");

  // a fully defined table realizing (iff (and X3 X6) (or X4 X7)): the gold
  // form is found and nothing smaller fits
  std::set<std::string> vocab = {"X3", "X4", "X6", "X7"};
  auto gold = dsl::parse("(iff (and X3 X6) (or X4 X7))", vocab);
  std::vector<std::string> parents = {"X3", "X4", "X6", "X7"};
  auto full = dsl::truth_table(gold, parents);
  solvers::PartialTruthTable defined;
  defined.parents = parents;
  for (size_t idx = 0; idx < full.outputs.size(); ++idx) {
    std::vector<int> key;
    for (size_t j = 0; j < parents.size(); ++j)
      key.push_back(static_cast<int>((idx >> (parents.size() - 1 - j)) & 1));
    defined.entries[key] = full.outputs[idx];
  }
  solvers::StageBudget wide{9, 2, 8, 200000, 0};
  auto found = solvers::exact_fit(defined, wide);
  REQUIRE(!found.empty());
  CHECK(dsl::ast_metrics(found.front()).size == 7);
  CHECK(dsl::semantically_equal(found.front(), gold));
}

TEST_CASE("symbolic_exact_search solves the toy record and stays sound") {
  worlds::ProblemRecord rec = not_gate_record();
  auto result = solvers::symbolic_exact_search(rec, solvers::desk_symbolic_stages());
  REQUIRE(result.solved);
  CHECK(result.stage == 0);
  auto parsed = dsl::parse(result.submission.mechanisms.at("Y"),
                           {rec.gold.observed.begin(), rec.gold.observed.end()});
  CHECK(dsl::semantically_equal(parsed, rec.gold.mechanisms.at("Y")));
  auto report = metrics::score_submission(rec, result.submission);
  CHECK(report.valid);
  CHECK(report.train_exact == 1);
}

TEST_CASE("staging: a tiny first-stage cap falls through to the next stage") {
  worlds::ProblemRecord rec = chain_record();
  rec.disclosure.setting = scm::Setting::Ordered;
  rec.disclosure.order = {"R", "A", "B"};
  // stage 0 cannot even express (not R) chains: cap 1 admits bare variables
  // only, which conflict with the do(A)/do(R) rows
  std::vector<solvers::StageBudget> stages = {{1, 0, 4, 1000, 0},
                                              {8, 2, 32, 50000, 0}};
  auto result = solvers::symbolic_exact_search(rec, stages);
  REQUIRE(result.solved);
  CHECK(result.stage == 1);
}

TEST_CASE("structure_search matches the exhaustive oracle on the chain") {
  worlds::ProblemRecord rec = chain_record();
  solvers::StructureConfig cfg;
  cfg.max_parents = 2;
  cfg.max_iters = 200;
  auto learned = solvers::structure_search(rec, cfg);
  auto oracle = solvers::exhaustive_structure_search(rec, cfg);
  CHECK(learned.score == doctest::Approx(oracle.score));
  CHECK(learned.parents == oracle.parents);
  // interventional rows make the chain uniquely optimal
  CHECK(oracle.parents.at("A") == std::vector<std::string>{"R"});
  CHECK(oracle.parents.at("B") == std::vector<std::string>{"A"});
}

TEST_CASE("hybrid_solve produces a verified train-exact submission") {
  worlds::ProblemRecord rec = chain_record();
  auto result = solvers::hybrid_solve(rec, solvers::desk_symbolic_stages());
  REQUIRE(result.solved);
  auto report = metrics::score_submission(rec, result.submission);
  CHECK(report.valid);
  CHECK(report.train_exact == 1);
}

TEST_CASE("hidden-roots search iterates root hypotheses") {
  worlds::ProblemRecord rec = chain_record();
  rec.disclosure.setting = scm::Setting::HiddenRoots;
  rec.disclosure.roots.clear();
  rec.disclosure.endogenous.clear();
  auto result = solvers::symbolic_exact_search(rec, solvers::desk_symbolic_stages());
  REQUIRE(result.solved);
  REQUIRE(result.submission.roots.has_value());
  auto report = metrics::score_submission(rec, result.submission);
  CHECK(report.valid);
  CHECK(report.train_exact == 1);
}

TEST_CASE("failure objects are schema-correct and score as non-valid") {
  worlds::ProblemRecord rec = not_gate_record();
  // impossible budget: zero-size cap means nothing can be found
  std::vector<solvers::StageBudget> stages = {{0, 0, 1, 10, 0}};
  auto result = solvers::symbolic_exact_search(rec, stages);
  CHECK(!result.solved);
  auto report = metrics::score_submission(rec, result.submission);
  CHECK(!report.valid);
  CHECK(report.train_exact == 0);
  CHECK(report.train_worlds_exact == 0);
}
