#include "doctest.h"

#include "scmkit/boolenum.hpp"

using namespace scmkit;
using boolenum::PartialTable;
using boolenum::Query;
using boolenum::TableBits;

TEST_CASE("table bits match dsl truth tables") {
  std::vector<std::string> support = {"X1", "X2", "X3"};
  auto e = dsl::parse("(iff (and X1 X2) X3)");
  TableBits t = boolenum::table_of_expr(e, support);
  auto full = dsl::truth_table(e, support);
  for (size_t i = 0; i < full.outputs.size(); ++i)
    CHECK(t.get(i) == (full.outputs[i] == 1));
  CHECK(boolenum::effective_mask(t) == 0b111);

  TableBits proj = boolenum::table_of_expr(dsl::parse("(or X1 (and X1 X2))"), support);
  CHECK(boolenum::effective_mask(proj) == 0b001);

  CHECK(boolenum::table_constant(boolenum::table_of_expr(dsl::parse("(xor X1 X1)"), support)));
  CHECK(!boolenum::table_constant(t));
}

TEST_CASE("enumeration finds every 2-variable function within cap 5") {
  std::vector<std::string> support = {"A", "B"};
  Query q;
  q.ast_cap = 5;
  q.states_per_size = 1000000;
  auto res = boolenum::enumerate_mechanisms(support, q);
  CHECK(!res.timed_out);
  CHECK(!res.truncated);
  // all 16 functions of two variables are reachable without constants by
  // size 5: e.g. const0 = (xor A A) at size 3, const1 = (or A (not A)) at 4
  std::set<std::vector<uint64_t>> distinct;
  for (const auto& f : res.found)
    distinct.insert({f.table.words.begin(), f.table.words.end()});
  CHECK(distinct.size() == 16);

  // every found expr evaluates to its table
  for (const auto& f : res.found) {
    TableBits again = boolenum::table_of_expr(f.expr, support);
    CHECK(again == f.table);
    CHECK(dsl::ast_metrics(f.expr).size == f.size);
  }
}

TEST_CASE("fit filtering honors required entries and don't-cares") {
  std::vector<std::string> support = {"X"};
  PartialTable partial;
  partial.required = TableBits::zeros(1);
  partial.defined = TableBits::zeros(1);
  partial.required.set(0, true);  // X=0 -> 1
  partial.defined.set(0, true);
  partial.required.set(1, false);  // X=1 -> 0
  partial.defined.set(1, true);

  Query q;
  q.ast_cap = 4;
  q.fit = &partial;
  auto res = boolenum::enumerate_mechanisms(support, q);
  REQUIRE(!res.found.empty());
  CHECK(dsl::render(res.found.front().expr) == "(not X)");
  CHECK(res.found.front().size == 2);

  // empty table: smallest candidates returned first, bare variable leads
  PartialTable empty;
  empty.required = TableBits::zeros(1);
  empty.defined = TableBits::zeros(1);
  Query q2;
  q2.ast_cap = 3;
  q2.fit = &empty;
  auto res2 = boolenum::enumerate_mechanisms(support, q2);
  REQUIRE(!res2.found.empty());
  CHECK(dsl::render(res2.found.front().expr) == "X");
}

TEST_CASE("floor, distinct-variable cap, differ_from and slack behave") {
  std::vector<std::string> support = {"A", "B", "C"};

  Query q;
  q.ast_floor = 2;
  q.ast_cap = 3;
  q.states_per_size = 100000;
  auto res = boolenum::enumerate_mechanisms(support, q);
  for (const auto& f : res.found) CHECK(f.size >= 2);

  Query q2;
  q2.ast_cap = 5;
  q2.max_distinct_vars = 1;
  q2.states_per_size = 100000;
  auto res2 = boolenum::enumerate_mechanisms(support, q2);
  for (const auto& f : res2.found) CHECK(std::popcount(f.var_mask) <= 1);

  TableBits avoid = boolenum::table_of_expr(dsl::parse("A"), support);
  Query q3;
  q3.ast_cap = 3;
  q3.differ_from = &avoid;
  auto res3 = boolenum::enumerate_mechanisms(support, q3);
  for (const auto& f : res3.found) CHECK(!(f.table == avoid));

  // slack 0: once a hit exists at size 1, nothing larger than size 1 returns
  PartialTable any;
  any.required = TableBits::zeros(3);
  any.defined = TableBits::zeros(3);
  Query q4;
  q4.ast_cap = 6;
  q4.ast_slack = 0;
  q4.fit = &any;
  auto res4 = boolenum::enumerate_mechanisms(support, q4);
  for (const auto& f : res4.found) CHECK(f.size <= 1);
}

TEST_CASE("enumeration is deterministic") {
  std::vector<std::string> support = {"A", "B", "C", "D"};
  Query q;
  q.ast_cap = 6;
  q.states_per_size = 20000;
  auto a = boolenum::enumerate_mechanisms(support, q);
  auto b = boolenum::enumerate_mechanisms(support, q);
  REQUIRE(a.found.size() == b.found.size());
  CHECK(a.states == b.states);
  for (size_t i = 0; i < a.found.size(); ++i)
    CHECK(dsl::render(a.found[i].expr) == dsl::render(b.found[i].expr));
}
