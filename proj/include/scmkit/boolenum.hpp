#pragma once

#include <array>
#include <climits>
#include <cstdint>
#include <string>
#include <vector>

#include "scmkit/dsl.hpp"

namespace scmkit::boolenum {

// Truth tables over a fixed support of up to 10 variables, packed as bitsets
// over the 2^k assignments. Assignment index i maps the first support
// variable to the most significant bit of i, matching dsl::TruthTable.
struct TableBits {
  int nvars = 0;
  int nwords = 1;
  std::array<uint64_t, 16> words{};  // unused words stay zero

  static TableBits zeros(int nvars);
  static TableBits for_variable(int nvars, int var_index);
  bool get(size_t idx) const { return (words[idx >> 6] >> (idx & 63)) & 1; }
  void set(size_t idx, bool v);
  size_t entries() const { return size_t{1} << nvars; }
  bool operator==(const TableBits& o) const { return words == o.words; }
  uint64_t hash() const;
};

TableBits table_not(const TableBits& a);
TableBits table_and(const TableBits& a, const TableBits& b);
TableBits table_or(const TableBits& a, const TableBits& b);
TableBits table_xor(const TableBits& a, const TableBits& b);
TableBits table_iff(const TableBits& a, const TableBits& b);
bool table_constant(const TableBits& a);

// Bitmask of support positions the function actually depends on.
uint32_t effective_mask(const TableBits& t);

// Required outputs on the defined assignments; everything else is don't-care.
struct PartialTable {
  TableBits required;
  TableBits defined;
  bool matches(const TableBits& candidate) const;
};

TableBits table_of_expr(const dsl::ExprPtr& e, const std::vector<std::string>& support);

struct Query {
  int ast_floor = 1;
  int ast_cap = 5;
  int ast_slack = -1;       // >= 0: stop at min(cap, first-hit size + slack)
  int max_distinct_vars = 32;
  long states_per_size = 50000;
  double time_budget_sec = 0;  // 0 = unlimited
  long max_results = LONG_MAX;
  const PartialTable* fit = nullptr;       // results must match
  const TableBits* differ_from = nullptr;  // results must differ from this table
};

struct Found {
  dsl::ExprPtr expr;  // canonical minimal-size representative of the class
  int size = 0;
  TableBits table;
  uint32_t var_mask = 0;
};

struct EnumerationResult {
  std::vector<Found> found;  // ordered by (size, discovery order)
  bool timed_out = false;
  bool truncated = false;  // a per-size state cap was hit
  long states = 0;
};

// Bottom-up enumeration of canonical ASTs over `support`, deduplicated by
// semantic class (one state = one constructed AST). Deterministic whenever
// no time budget fires.
EnumerationResult enumerate_mechanisms(const std::vector<std::string>& support,
                                       const Query& q);

}  // namespace scmkit::boolenum
