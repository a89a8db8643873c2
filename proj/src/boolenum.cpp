#include "scmkit/boolenum.hpp"

#include <bit>
#include <chrono>
#include <deque>
#include <stdexcept>
#include <unordered_map>

namespace scmkit::boolenum {

namespace {
int word_count(int nvars) {
  return static_cast<int>(((size_t{1} << nvars) + 63) / 64);
}

uint64_t top_mask(int nvars) {
  size_t bits = size_t{1} << nvars;
  size_t rem = bits & 63;
  return rem == 0 ? ~uint64_t{0} : (uint64_t{1} << rem) - 1;
}
}  // namespace

TableBits TableBits::zeros(int nvars) {
  if (nvars > 10) throw std::invalid_argument("table support exceeds 10 variables");
  TableBits t;
  t.nvars = nvars;
  t.nwords = word_count(nvars);
  return t;
}

TableBits TableBits::for_variable(int nvars, int var_index) {
  TableBits t = zeros(nvars);
  for (size_t idx = 0; idx < t.entries(); ++idx)
    if ((idx >> (nvars - 1 - var_index)) & 1) t.set(idx, true);
  return t;
}

void TableBits::set(size_t idx, bool v) {
  if (v)
    words[idx >> 6] |= uint64_t{1} << (idx & 63);
  else
    words[idx >> 6] &= ~(uint64_t{1} << (idx & 63));
}

uint64_t TableBits::hash() const {
  uint64_t h = 1469598103934665603ULL;
  for (int i = 0; i < nwords; ++i) {
    h ^= words[i];
    h *= 1099511628211ULL;
  }
  return h;
}

TableBits table_not(const TableBits& a) {
  TableBits r = a;
  for (int i = 0; i < r.nwords; ++i) r.words[i] = ~a.words[i];
  r.words[r.nwords - 1] &= top_mask(a.nvars);
  return r;
}

TableBits table_and(const TableBits& a, const TableBits& b) {
  TableBits r = a;
  for (int i = 0; i < r.nwords; ++i) r.words[i] &= b.words[i];
  return r;
}

TableBits table_or(const TableBits& a, const TableBits& b) {
  TableBits r = a;
  for (int i = 0; i < r.nwords; ++i) r.words[i] |= b.words[i];
  return r;
}

TableBits table_xor(const TableBits& a, const TableBits& b) {
  TableBits r = a;
  for (int i = 0; i < r.nwords; ++i) r.words[i] ^= b.words[i];
  return r;
}

TableBits table_iff(const TableBits& a, const TableBits& b) {
  TableBits r = a;
  for (int i = 0; i < r.nwords; ++i) r.words[i] = ~(a.words[i] ^ b.words[i]);
  r.words[r.nwords - 1] &= top_mask(a.nvars);
  return r;
}

bool table_constant(const TableBits& a) {
  TableBits ones = table_not(TableBits::zeros(a.nvars));
  return a == TableBits::zeros(a.nvars) || a == ones;
}

uint32_t effective_mask(const TableBits& t) {
  uint32_t mask = 0;
  for (int j = 0; j < t.nvars; ++j) {
    size_t flip = size_t{1} << (t.nvars - 1 - j);
    for (size_t idx = 0; idx < t.entries(); ++idx)
      if (t.get(idx) != t.get(idx ^ flip)) {
        mask |= uint32_t{1} << j;
        break;
      }
  }
  return mask;
}

bool PartialTable::matches(const TableBits& candidate) const {
  for (int i = 0; i < candidate.nwords; ++i)
    if ((candidate.words[i] ^ required.words[i]) & defined.words[i]) return false;
  return true;
}

TableBits table_of_expr(const dsl::ExprPtr& e, const std::vector<std::string>& support) {
  if (e->is_var()) {
    for (size_t j = 0; j < support.size(); ++j)
      if (support[j] == e->name())
        return TableBits::for_variable(static_cast<int>(support.size()),
                                       static_cast<int>(j));
    throw dsl::DslError(dsl::DslErrorKind::MissingVariable,
                        "support does not cover '" + e->name() + "'");
  }
  const auto& ch = e->children();
  TableBits acc = table_of_expr(ch[0], support);
  switch (e->op()) {
    case dsl::Op::Not:
      return table_not(acc);
    case dsl::Op::And:
      for (size_t i = 1; i < ch.size(); ++i)
        acc = table_and(acc, table_of_expr(ch[i], support));
      return acc;
    case dsl::Op::Or:
      for (size_t i = 1; i < ch.size(); ++i)
        acc = table_or(acc, table_of_expr(ch[i], support));
      return acc;
    case dsl::Op::Xor:
      for (size_t i = 1; i < ch.size(); ++i)
        acc = table_xor(acc, table_of_expr(ch[i], support));
      return acc;
    case dsl::Op::Iff:
      for (size_t i = 1; i < ch.size(); ++i)
        acc = table_iff(acc, table_of_expr(ch[i], support));
      return acc;
  }
  return acc;
}

namespace {

struct Entry {
  int8_t op = -1;  // -1: variable reference
  int32_t var = -1;
  std::vector<int32_t> children;
  int size = 0;
  uint32_t var_mask = 0;
  TableBits table;
};

class Enumerator {
 public:
  Enumerator(const std::vector<std::string>& support, const Query& q)
      : support_(support), q_(q), nvars_(static_cast<int>(support.size())) {
    deadline_active_ = q.time_budget_sec > 0;
    if (deadline_active_)
      deadline_ = std::chrono::steady_clock::now() +
                  std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                      std::chrono::duration<double>(q.time_budget_sec));
  }

  EnumerationResult run() {
    cap_ = q_.ast_cap;
    size_start_.assign(static_cast<size_t>(q_.ast_cap) + 2, 0);
    for (int v = 0; v < nvars_ && !done_; ++v) {
      Entry e;
      e.var = v;
      e.size = 1;
      e.var_mask = uint32_t{1} << v;
      e.table = TableBits::for_variable(nvars_, v);
      insert(std::move(e));
    }
    size_start_[2] = static_cast<long>(entries_.size());
    for (int s = 2; s <= cap_ && !done_; ++s) {
      if (q_.ast_slack >= 0 && !result_.found.empty())
        cap_ = std::min(cap_, result_.found.front().size + q_.ast_slack);
      if (s > cap_) break;
      states_this_size_ = 0;
      size_capped_ = false;
      grow_size(s);
      size_start_[static_cast<size_t>(s) + 1] = static_cast<long>(entries_.size());
    }
    return std::move(result_);
  }

 private:
  void grow_size(int s) {
    long lo = size_start_[static_cast<size_t>(s) - 1];
    long hi = size_start_[static_cast<size_t>(s)];
    for (long i = lo; i < hi && !size_capped_ && !done_; ++i) {
      if (entries_[static_cast<size_t>(i)].op == static_cast<int8_t>(dsl::Op::Not))
        continue;  // double negation is never canonical
      count_state();
      if (done_ || size_capped_) break;
      Entry e;
      e.op = static_cast<int8_t>(dsl::Op::Not);
      e.children = {static_cast<int32_t>(i)};
      e.size = s;
      e.var_mask = entries_[static_cast<size_t>(i)].var_mask;
      e.table = table_not(entries_[static_cast<size_t>(i)].table);
      insert(std::move(e));
    }
    for (dsl::Op op : {dsl::Op::And, dsl::Op::Or, dsl::Op::Xor, dsl::Op::Iff}) {
      if (done_ || size_capped_) break;
      std::vector<int32_t> chosen;
      combine(s, op, s - 1, 0, chosen, TableBits{}, 0);
    }
  }

  // Choose children with total size = remaining; child ids non-decreasing,
  // strictly increasing for and/or (duplicate children are never canonical).
  void combine(int s, dsl::Op op, int remaining, long min_id,
               std::vector<int32_t>& chosen, const TableBits& acc,
               uint32_t var_mask) {
    if (done_ || size_capped_) return;
    if (remaining == 0) {
      if (chosen.size() < 2) return;
      count_state();
      if (done_ || size_capped_) return;
      Entry e;
      e.op = static_cast<int8_t>(op);
      e.children = chosen;
      e.size = s;
      e.var_mask = var_mask;
      e.table = acc;
      insert(std::move(e));
      return;
    }
    if (chosen.empty() && remaining < 2) return;
    long limit = static_cast<long>(size_start_[static_cast<size_t>(s)]);
    for (long id = min_id; id < limit; ++id) {
      const Entry& c = entries_[static_cast<size_t>(id)];
      if (c.size > remaining) break;  // entry sizes are non-decreasing in id
      uint32_t mask = var_mask | c.var_mask;
      if (std::popcount(mask) > q_.max_distinct_vars) continue;
      TableBits next = chosen.empty() ? c.table : fold(op, acc, c.table);
      bool strict = op == dsl::Op::And || op == dsl::Op::Or;
      chosen.push_back(static_cast<int32_t>(id));
      combine(s, op, remaining - c.size, strict ? id + 1 : id, chosen, next, mask);
      chosen.pop_back();
      if (done_ || size_capped_) return;
    }
  }

  static TableBits fold(dsl::Op op, const TableBits& a, const TableBits& b) {
    switch (op) {
      case dsl::Op::And: return table_and(a, b);
      case dsl::Op::Or: return table_or(a, b);
      case dsl::Op::Xor: return table_xor(a, b);
      case dsl::Op::Iff: return table_iff(a, b);
      case dsl::Op::Not: break;
    }
    return a;
  }

  void insert(Entry e) {
    uint64_t h = e.table.hash();
    auto range = seen_.equal_range(h);
    for (auto it = range.first; it != range.second; ++it)
      if (entries_[static_cast<size_t>(it->second)].table == e.table) return;
    entries_.push_back(std::move(e));
    seen_.emplace(h, static_cast<long>(entries_.size() - 1));
    maybe_report(static_cast<long>(entries_.size() - 1));
  }

  void maybe_report(long id) {
    const Entry& e = entries_[static_cast<size_t>(id)];
    if (e.size < q_.ast_floor) return;
    if (std::popcount(e.var_mask) > q_.max_distinct_vars) return;
    if (q_.fit && !q_.fit->matches(e.table)) return;
    if (q_.differ_from && e.table == *q_.differ_from) return;
    Found f;
    f.expr = dsl::canonicalize(build_expr(id));
    f.size = e.size;
    f.table = e.table;
    f.var_mask = e.var_mask;
    result_.found.push_back(std::move(f));
    if (static_cast<long>(result_.found.size()) >= q_.max_results) done_ = true;
  }

  dsl::ExprPtr build_expr(long id) const {
    const Entry& e = entries_[static_cast<size_t>(id)];
    if (e.op < 0) return dsl::Expr::variable(support_[static_cast<size_t>(e.var)]);
    std::vector<dsl::ExprPtr> ch;
    ch.reserve(e.children.size());
    for (int32_t c : e.children) ch.push_back(build_expr(c));
    return dsl::Expr::apply(static_cast<dsl::Op>(e.op), std::move(ch));
  }

  void count_state() {
    result_.states += 1;
    states_this_size_ += 1;
    if (states_this_size_ >= q_.states_per_size) {
      result_.truncated = true;
      size_capped_ = true;
    }
    if (deadline_active_ && (result_.states & 1023) == 0 &&
        std::chrono::steady_clock::now() > deadline_) {
      result_.timed_out = true;
      done_ = true;
    }
  }

  const std::vector<std::string>& support_;
  Query q_;
  int nvars_;
  int cap_ = 0;
  std::deque<Entry> entries_;
  std::vector<long> size_start_;
  std::unordered_multimap<uint64_t, long> seen_;
  EnumerationResult result_;
  long states_this_size_ = 0;
  bool done_ = false;
  bool size_capped_ = false;
  bool deadline_active_ = false;
  std::chrono::steady_clock::time_point deadline_;
};

}  // namespace

EnumerationResult enumerate_mechanisms(const std::vector<std::string>& support,
                                       const Query& q) {
  if (support.size() > 10)
    throw std::invalid_argument("enumeration support exceeds 10 variables");
  return Enumerator(support, q).run();
}

}  // namespace scmkit::boolenum
