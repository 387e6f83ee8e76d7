#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "lml/error.hpp"
#include "lml/subset.hpp"

namespace lml {

inline constexpr std::size_t kMaxVariables = 24;

struct VariableSpec {
  std::string id;
  std::vector<std::string> levels;
  std::size_t baseline = 0;

  std::size_t size() const { return levels.size(); }
  // d_v: number of non-baseline levels.
  std::size_t restricted_size() const { return levels.size() - 1; }

  std::size_t level_index(std::string_view label) const {
    for (std::size_t k = 0; k < levels.size(); ++k)
      if (levels[k] == label) return k;
    throw DataError("variable '" + id + "': unknown level '" + std::string(label) + "'");
  }

  // Non-baseline levels in declared order.
  std::vector<std::size_t> restricted_levels() const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < levels.size(); ++k)
      if (k != baseline) out.push_back(k);
    return out;
  }

  bool operator==(const VariableSpec&) const = default;
};

// Level structure of a cross-classified table. Cells are laid out
// row-major: the first variable varies slowest, levels in declared order.
class TableSchema {
 public:
  TableSchema() = default;

  explicit TableSchema(std::vector<VariableSpec> vars) : vars_(std::move(vars)) {
    if (vars_.empty()) throw DataError("schema has no variables");
    if (vars_.size() > kMaxVariables) throw DataError("schema has more than 24 variables");
    std::unordered_set<std::string> ids;
    for (const auto& v : vars_) {
      if (!ids.insert(v.id).second) throw DataError("duplicate variable id '" + v.id + "'");
      if (v.levels.size() < 2) throw DataError("variable '" + v.id + "' needs at least two levels");
      std::unordered_set<std::string> labels;
      for (const auto& l : v.levels)
        if (!labels.insert(l).second)
          throw DataError("variable '" + v.id + "': duplicate level '" + l + "'");
      if (v.baseline >= v.levels.size())
        throw DataError("variable '" + v.id + "': baseline index out of range");
    }
    strides_.assign(vars_.size(), 1);
    for (std::size_t v = vars_.size(); v-- > 1;) strides_[v - 1] = strides_[v] * vars_[v].size();
    cells_ = strides_[0] * vars_[0].size();
  }

  std::size_t num_vars() const { return vars_.size(); }
  const std::vector<VariableSpec>& vars() const { return vars_; }
  const VariableSpec& var(std::size_t v) const { return vars_[v]; }
  std::size_t stride(std::size_t v) const { return strides_[v]; }

  // |I_V|
  std::size_t cell_count() const { return cells_; }
  // |J_V|
  std::size_t restricted_count() const {
    std::size_t n = 1;
    for (const auto& v : vars_) n *= v.restricted_size();
    return n;
  }

  std::size_t var_index(std::string_view id) const {
    for (std::size_t v = 0; v < vars_.size(); ++v)
      if (vars_[v].id == id) return v;
    throw DataError("unknown variable '" + std::string(id) + "'");
  }
  bool has_var(std::string_view id) const {
    for (const auto& v : vars_)
      if (v.id == id) return true;
    return false;
  }

  std::size_t level_of(std::size_t cell, std::size_t v) const {
    return (cell / strides_[v]) % vars_[v].size();
  }

  std::vector<std::size_t> decode(std::size_t cell) const {
    std::vector<std::size_t> out(vars_.size());
    for (std::size_t v = 0; v < vars_.size(); ++v) out[v] = level_of(cell, v);
    return out;
  }

  std::size_t encode(std::span<const std::size_t> levels) const {
    std::size_t c = 0;
    for (std::size_t v = 0; v < vars_.size(); ++v) c += levels[v] * strides_[v];
    return c;
  }

  // Variables at a non-baseline level in this cell. For the GammaIndex
  // identified with the cell this is U.
  Subset support(std::size_t cell) const {
    Subset s;
    for (std::size_t v = 0; v < vars_.size(); ++v)
      if (level_of(cell, v) != vars_[v].baseline) s = s.with(static_cast<unsigned>(v));
    return s;
  }

  // The all-baseline cell, which represents the empty index.
  std::size_t baseline_cell() const {
    std::size_t c = 0;
    for (std::size_t v = 0; v < vars_.size(); ++v) c += vars_[v].baseline * strides_[v];
    return c;
  }

  // Cell with `cell`'s levels on U and baselines elsewhere.
  std::size_t restrict_cell(std::size_t cell, Subset U) const {
    std::size_t c = 0;
    for (std::size_t v = 0; v < vars_.size(); ++v) {
      std::size_t lv = U.contains(static_cast<unsigned>(v)) ? level_of(cell, v) : vars_[v].baseline;
      c += lv * strides_[v];
    }
    return c;
  }

  TableSchema restrict_to(Subset U) const {
    std::vector<VariableSpec> sub;
    for (unsigned v : U.elements()) {
      if (v >= vars_.size()) throw DataError("subset refers to a variable outside the schema");
      sub.push_back(vars_[v]);
    }
    return TableSchema(std::move(sub));
  }

  TableSchema with_baseline(std::size_t v, std::size_t baseline) const {
    auto vars = vars_;
    vars.at(v).baseline = baseline;
    return TableSchema(std::move(vars));
  }

  Subset all_vars() const { return Subset::full(static_cast<unsigned>(vars_.size())); }

  bool operator==(const TableSchema& o) const { return vars_ == o.vars_; }

 private:
  std::vector<VariableSpec> vars_;
  std::vector<std::size_t> strides_;
  std::size_t cells_ = 0;
};

// A cell i of I_V as per-variable level indices.
class CellIndex {
 public:
  CellIndex(const TableSchema& schema, std::vector<std::size_t> levels) : levels_(std::move(levels)) {
    if (levels_.size() != schema.num_vars()) throw DataError("cell index has wrong arity");
    for (std::size_t v = 0; v < levels_.size(); ++v)
      if (levels_[v] >= schema.var(v).size()) throw DataError("cell index level out of range");
  }
  CellIndex(const TableSchema& schema, std::size_t offset) : levels_(schema.decode(offset)) {}

  const std::vector<std::size_t>& levels() const { return levels_; }
  std::size_t level(std::size_t v) const { return levels_[v]; }
  std::size_t offset(const TableSchema& schema) const { return schema.encode(levels_); }

  // i_U as (variable, level) pairs in variable order; i_{empty} is empty.
  std::vector<std::pair<std::size_t, std::size_t>> restricted(Subset U) const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (unsigned v : U.elements()) out.emplace_back(v, levels_.at(v));
    return out;
  }

 private:
  std::vector<std::size_t> levels_;
};

namespace detail {

// Calls fn(first, stride, size) once for every fiber of `schema` along
// variable v; a fiber is the set of cells differing only in their v level.
template <typename Fn>
void for_each_fiber(const TableSchema& schema, std::size_t v, Fn&& fn) {
  const std::size_t stride = schema.stride(v);
  const std::size_t size = schema.var(v).size();
  const std::size_t block = stride * size;
  for (std::size_t outer = 0; outer < schema.cell_count(); outer += block)
    for (std::size_t inner = 0; inner < stride; ++inner) fn(outer + inner, stride, size);
}

}  // namespace detail

}  // namespace lml
