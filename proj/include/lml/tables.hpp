#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "lml/error.hpp"
#include "lml/schema.hpp"

namespace lml {

class CountTable {
 public:
  CountTable(TableSchema schema, std::vector<std::uint64_t> counts)
      : schema_(std::move(schema)), counts_(std::move(counts)) {
    if (counts_.size() != schema_.cell_count()) throw DataError("count vector does not match schema");
    n_ = std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
    if (n_ == 0) throw DataError("count table has total count 0");
  }

  const TableSchema& schema() const { return schema_; }
  const std::vector<std::uint64_t>& counts() const { return counts_; }
  std::uint64_t count(std::size_t cell) const { return counts_[cell]; }
  std::uint64_t total() const { return n_; }
  bool has_zero_cells() const {
    return std::any_of(counts_.begin(), counts_.end(), [](auto c) { return c == 0; });
  }

 private:
  TableSchema schema_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t n_ = 0;
};

// Joint probability table over a schema. Entries may be non-positive for
// tables reconstructed from arbitrary parameters; strictly_positive()
// reports whether the table is usable for log-mean linear computations.
class ProbTable {
 public:
  ProbTable(TableSchema schema, std::vector<double> probs)
      : schema_(std::move(schema)), probs_(std::move(probs)) {
    if (probs_.size() != schema_.cell_count()) throw DataError("probability vector does not match schema");
    double sum = 0.0, abs_sum = 0.0;
    min_ = probs_.empty() ? 0.0 : probs_[0];
    for (double p : probs_) {
      if (!std::isfinite(p)) throw DataError("probability table has a non-finite entry");
      sum += p;
      abs_sum += std::abs(p);
      min_ = std::min(min_, p);
    }
    if (std::abs(sum - 1.0) > 1e-12 * std::max(1.0, abs_sum))
      throw DataError("probability table does not sum to 1 (sum = " + std::to_string(sum) + ")");
  }

  const TableSchema& schema() const { return schema_; }
  const std::vector<double>& probs() const { return probs_; }
  double operator[](std::size_t cell) const { return probs_[cell]; }
  std::size_t size() const { return probs_.size(); }

  bool strictly_positive() const { return min_ > 0.0; }
  double min_entry() const { return min_; }

 private:
  TableSchema schema_;
  std::vector<double> probs_;
  double min_ = 0.0;
};

inline ProbTable empirical_prob(const CountTable& t, double smoothing = 0.0) {
  if (smoothing < 0.0) throw DataError("smoothing must be non-negative");
  const double denom = static_cast<double>(t.total()) + smoothing * static_cast<double>(t.schema().cell_count());
  std::vector<double> p(t.counts().size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = (static_cast<double>(t.count(i)) + smoothing) / denom;
  return ProbTable(t.schema(), std::move(p));
}

// Marginal table of Y_U; variables keep their schema order.
inline ProbTable marginalize(const ProbTable& t, Subset U) {
  if (U.empty()) throw DataError("cannot marginalize onto the empty set");
  const auto& s = t.schema();
  TableSchema sub = s.restrict_to(U);
  const auto keep = U.elements();
  std::vector<double> out(sub.cell_count(), 0.0);
  for (std::size_t c = 0; c < s.cell_count(); ++c) {
    std::size_t o = 0;
    for (std::size_t k = 0; k < keep.size(); ++k) o += s.level_of(c, keep[k]) * sub.stride(k);
    out[o] += t[c];
  }
  return ProbTable(std::move(sub), std::move(out));
}

// Schema of binary indicators: levels "0","1" with baseline "0".
inline VariableSpec binary_variable(std::string id) {
  return VariableSpec{std::move(id), {"0", "1"}, 0};
}

// Table of X^i_V, the indicators 1(Y_v = i_v). The all-ones cell carries
// the probability of cell i.
inline ProbTable dichotomize_around(const ProbTable& t, const CellIndex& i) {
  const auto& s = t.schema();
  if (!t.strictly_positive()) throw DomainError("dichotomize_around requires a strictly positive table");
  std::vector<VariableSpec> vars;
  for (const auto& v : s.vars()) vars.push_back(binary_variable(v.id));
  TableSchema bin(std::move(vars));
  std::vector<double> out(bin.cell_count(), 0.0);
  for (std::size_t c = 0; c < s.cell_count(); ++c) {
    std::size_t o = 0;
    for (std::size_t v = 0; v < s.num_vars(); ++v)
      if (s.level_of(c, v) == i.level(v)) o += bin.stride(v);
    out[o] += t[c];
  }
  return ProbTable(std::move(bin), std::move(out));
}

// Name of the expanded vertex for level `level` of variable v.
inline std::string expanded_name(const VariableSpec& v, std::size_t level) {
  return v.id + "." + v.levels[level];
}

// Layout of the B-expansion (Y_P, X_{J_B}): schema variables in order,
// each v in B replaced by one binary indicator per non-baseline level.
struct ExpansionLayout {
  TableSchema expanded;
  // For each original variable, the expanded-schema positions it maps to.
  std::vector<std::vector<std::size_t>> positions;

  ExpansionLayout(const TableSchema& s, Subset B) {
    std::vector<VariableSpec> vars;
    positions.resize(s.num_vars());
    for (std::size_t v = 0; v < s.num_vars(); ++v) {
      if (B.contains(static_cast<unsigned>(v))) {
        for (std::size_t l : s.var(v).restricted_levels()) {
          positions[v].push_back(vars.size());
          vars.push_back(binary_variable(expanded_name(s.var(v), l)));
        }
      } else {
        positions[v].push_back(vars.size());
        vars.push_back(s.var(v));
      }
    }
    expanded = TableSchema(std::move(vars));
  }

  // Expanded cell that receives the mass of original cell c.
  std::size_t image(const TableSchema& s, Subset B, std::size_t c) const {
    std::size_t o = 0;
    for (std::size_t v = 0; v < s.num_vars(); ++v) {
      const std::size_t lv = s.level_of(c, v);
      if (!B.contains(static_cast<unsigned>(v))) {
        o += lv * expanded.stride(positions[v][0]);
      } else if (lv != s.var(v).baseline) {
        const std::size_t k = lv < s.var(v).baseline ? lv : lv - 1;
        o += expanded.stride(positions[v][k]);
      }
    }
    return o;
  }

  // True when the expanded cell has two or more indicators of one block set.
  bool is_structural_zero(const TableSchema& s, Subset B, std::size_t cell) const {
    for (std::size_t v = 0; v < s.num_vars(); ++v) {
      if (!B.contains(static_cast<unsigned>(v))) continue;
      int ones = 0;
      for (std::size_t pos : positions[v]) ones += expanded.level_of(cell, pos) == 1 ? 1 : 0;
      if (ones > 1) return true;
    }
    return false;
  }
};

// Probability table of the B-expansion, padded with structural zeros.
inline ProbTable b_expand_table(const ProbTable& t, Subset B) {
  const auto& s = t.schema();
  if (!B.subset_of(s.all_vars())) throw DataError("expansion set refers to unknown variables");
  if (B.empty()) return t;
  ExpansionLayout layout(s, B);
  std::vector<double> out(layout.expanded.cell_count(), 0.0);
  for (std::size_t c = 0; c < s.cell_count(); ++c) out[layout.image(s, B, c)] += t[c];
  return ProbTable(layout.expanded, std::move(out));
}

}  // namespace lml
