#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lml/error.hpp"
#include "lml/schema.hpp"
#include "lml/subset.hpp"
#include "lml/tables.hpp"

namespace lml {

// ---------------------------------------------------------------------------
// Binary kernel: vectors indexed by the subsets of a p-element ground set.
// Entry U lives at position U.bits(), so variable v corresponds to bit v.
// ---------------------------------------------------------------------------

class SubsetVector {
 public:
  SubsetVector() = default;
  explicit SubsetVector(unsigned p, double fill = 0.0) : p_(p), values_(std::size_t{1} << p, fill) {}
  SubsetVector(unsigned p, std::vector<double> values) : p_(p), values_(std::move(values)) {
    if (values_.size() != (std::size_t{1} << p)) throw DataError("subset vector must have length 2^p");
  }

  unsigned ground_size() const { return p_; }
  std::size_t size() const { return values_.size(); }
  double& operator[](Subset U) { return values_[U.bits()]; }
  double operator[](Subset U) const { return values_[U.bits()]; }
  double& operator[](std::size_t k) { return values_[k]; }
  double operator[](std::size_t k) const { return values_[k]; }
  const std::vector<double>& values() const { return values_; }

 private:
  unsigned p_ = 0;
  std::vector<double> values_;
};

// out_U = sum_{H ⊇ U} v_H
inline SubsetVector zeta_binary(SubsetVector v) {
  const std::size_t n = v.size();
  for (unsigned b = 0; b < v.ground_size(); ++b) {
    const std::size_t bit = std::size_t{1} << b;
    for (std::size_t m = 0; m < n; ++m)
      if (!(m & bit)) v[m] += v[m | bit];
  }
  return v;
}

// Inverse of zeta_binary: out_U = sum_{E ⊆ V\U} (-1)^|E| v_{U∪E}
inline SubsetVector moebius_binary(SubsetVector v) {
  const std::size_t n = v.size();
  for (unsigned b = 0; b < v.ground_size(); ++b) {
    const std::size_t bit = std::size_t{1} << b;
    for (std::size_t m = 0; m < n; ++m)
      if (!(m & bit)) v[m] -= v[m | bit];
  }
  return v;
}

inline std::string subset_label(Subset U) {
  std::string s = "{";
  bool first = true;
  for (unsigned k : U.elements()) {
    if (!first) s += ",";
    s += std::to_string(k);
    first = false;
  }
  return s + "}";
}

// gamma = M^T log mu, i.e. gamma_U = sum_{E ⊆ U} (-1)^{|U\E|} log mu_E.
inline SubsetVector gamma_binary(const SubsetVector& mu) {
  SubsetVector g(mu.ground_size());
  for (std::size_t m = 0; m < mu.size(); ++m) {
    if (!(mu[m] > 0.0))
      throw DomainError("Moebius parameter for subset " + subset_label(Subset(static_cast<Subset::mask_type>(m))) +
                        " is not positive");
    g[m] = std::log(mu[m]);
  }
  const std::size_t n = g.size();
  for (unsigned b = 0; b < g.ground_size(); ++b) {
    const std::size_t bit = std::size_t{1} << b;
    for (std::size_t m = 0; m < n; ++m)
      if (m & bit) g[m] -= g[m ^ bit];
  }
  return g;
}

// mu = exp(Z^T gamma), i.e. log mu_U = sum_{E ⊆ U} gamma_E.
inline SubsetVector binary_lml_to_moebius(SubsetVector g) {
  const std::size_t n = g.size();
  for (unsigned b = 0; b < g.ground_size(); ++b) {
    const std::size_t bit = std::size_t{1} << b;
    for (std::size_t m = 0; m < n; ++m)
      if (m & bit) g[m] += g[m ^ bit];
  }
  for (std::size_t m = 0; m < n; ++m) g[m] = std::exp(g[m]);
  return g;
}

// Reads a table over binary variables (levels "0","1" in that order) as a
// subset vector: pi_U = pr(X_U = 1, X_{V\U} = 0).
inline SubsetVector as_subset_vector(const ProbTable& t) {
  const auto& s = t.schema();
  const auto p = static_cast<unsigned>(s.num_vars());
  SubsetVector out(p);
  for (std::size_t c = 0; c < s.cell_count(); ++c) {
    Subset U;
    for (unsigned v = 0; v < p; ++v) {
      if (s.var(v).size() != 2) throw DataError("as_subset_vector needs binary variables");
      if (s.level_of(c, v) != s.var(v).baseline) U = U.with(v);
    }
    out[U] = t[c];
  }
  return out;
}

// ---------------------------------------------------------------------------
// General discrete case.
// ---------------------------------------------------------------------------

// Index (U, j_U) of a Moebius / LML parameter. Each GammaIndex is
// identified with the cell that has levels j_U on U and baselines elsewhere;
// the all-baseline cell is the empty index.
struct GammaIndex {
  Subset vars;
  // Level indices for the variables of `vars`, in variable order.
  std::vector<std::size_t> levels;

  static GammaIndex from_cell(const TableSchema& s, std::size_t cell) {
    GammaIndex g;
    g.vars = s.support(cell);
    for (unsigned v : g.vars.elements()) g.levels.push_back(s.level_of(cell, v));
    return g;
  }

  std::size_t cell(const TableSchema& s) const {
    std::vector<std::size_t> lv(s.num_vars());
    for (std::size_t v = 0; v < s.num_vars(); ++v) lv[v] = s.var(v).baseline;
    const auto elems = vars.elements();
    if (elems.size() != levels.size()) throw DataError("GammaIndex arity mismatch");
    for (std::size_t k = 0; k < elems.size(); ++k) {
      if (elems[k] >= s.num_vars()) throw DataError("GammaIndex variable out of range");
      if (levels[k] == s.var(elems[k]).baseline || levels[k] >= s.var(elems[k]).size())
        throw DataError("GammaIndex level must be a non-baseline level");
      lv[elems[k]] = levels[k];
    }
    return s.encode(lv);
  }

  // "U:j_U", e.g. "Infl,Sat:L,H".
  std::string key(const TableSchema& s) const {
    std::string a, b;
    const auto elems = vars.elements();
    for (std::size_t k = 0; k < elems.size(); ++k) {
      if (k) {
        a += ",";
        b += ",";
      }
      a += s.var(elems[k]).id;
      b += s.var(elems[k]).levels[levels[k]];
    }
    return a + ":" + b;
  }

  static GammaIndex parse(const TableSchema& s, const std::string& key) {
    const auto colon = key.find(':');
    if (colon == std::string::npos) throw DataError("malformed parameter key '" + key + "'");
    auto split = [](const std::string& x) {
      std::vector<std::string> out;
      std::size_t start = 0;
      while (true) {
        auto comma = x.find(',', start);
        out.push_back(x.substr(start, comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
      return out;
    };
    const auto ids = split(key.substr(0, colon));
    const auto labels = split(key.substr(colon + 1));
    if (ids.size() != labels.size()) throw DataError("malformed parameter key '" + key + "'");
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const auto v = s.var_index(ids[k]);
      pairs.emplace_back(v, s.var(v).level_index(labels[k]));
    }
    std::sort(pairs.begin(), pairs.end());
    GammaIndex g;
    for (auto [v, l] : pairs) {
      if (g.vars.contains(static_cast<unsigned>(v))) throw DataError("repeated variable in key '" + key + "'");
      g.vars = g.vars.with(static_cast<unsigned>(v));
      g.levels.push_back(l);
    }
    g.cell(s);  // validates non-baseline levels
    return g;
  }

  bool operator==(const GammaIndex&) const = default;
};

// Canonical order: by |U|, then U lexicographically, then j_U
// lexicographically in declared level order.
struct GammaIndexLess {
  bool operator()(const GammaIndex& a, const GammaIndex& b) const {
    if (a.vars != b.vars) return SizeLexLess{}(a.vars, b.vars);
    return a.levels < b.levels;
  }
};

// All nonempty GammaIndex values of a schema in canonical order.
inline std::vector<GammaIndex> canonical_indices(const TableSchema& s) {
  std::vector<GammaIndex> out;
  out.reserve(s.cell_count() - 1);
  const std::size_t base = s.baseline_cell();
  for (std::size_t c = 0; c < s.cell_count(); ++c)
    if (c != base) out.push_back(GammaIndex::from_cell(s, c));
  std::sort(out.begin(), out.end(), GammaIndexLess{});
  return out;
}

// Cell offsets of the nonempty indices, in canonical order.
inline std::vector<std::size_t> canonical_slots(const TableSchema& s) {
  std::vector<std::size_t> out;
  for (const auto& g : canonical_indices(s)) out.push_back(g.cell(s));
  return out;
}

namespace detail {

// Values stored per cell: slot c holds the parameter of GammaIndex::from_cell(c).
class CellParam {
 public:
  CellParam(TableSchema schema, std::vector<double> values) : schema_(std::move(schema)), values_(std::move(values)) {
    if (values_.size() != schema_.cell_count()) throw DataError("parameter vector does not match schema");
  }
  const TableSchema& schema() const { return schema_; }
  const std::vector<double>& values() const { return values_; }
  double at_cell(std::size_t cell) const { return values_[cell]; }
  double at(const GammaIndex& g) const { return values_[g.cell(schema_)]; }
  // Number of nonempty indices, |I_V| - 1.
  std::size_t count() const { return values_.size() - 1; }

 protected:
  TableSchema schema_;
  std::vector<double> values_;
};

}  // namespace detail

// mu^{j_U} = pr(Y_U = j_U); the empty slot holds 1.
class MoebiusParam : public detail::CellParam {
 public:
  using CellParam::CellParam;
};

// gamma^{j_U}; the empty slot holds 0.
class LmlParam : public detail::CellParam {
 public:
  using CellParam::CellParam;
};

enum class ZeroPolicy { reject, allow };

// One upward pass per variable: the baseline position of each fiber
// becomes the fiber sum, giving mu at every cell in O(p |I_V|).
inline MoebiusParam prob_to_moebius(const ProbTable& t, ZeroPolicy zeros = ZeroPolicy::reject) {
  if (zeros == ZeroPolicy::reject && !t.strictly_positive())
    throw DomainError("Moebius parameterization requires a strictly positive table");
  const auto& s = t.schema();
  std::vector<double> x = t.probs();
  for (std::size_t v = 0; v < s.num_vars(); ++v) {
    const std::size_t b = s.var(v).baseline;
    detail::for_each_fiber(s, v, [&](std::size_t first, std::size_t stride, std::size_t size) {
      double sum = 0.0;
      for (std::size_t k = 0; k < size; ++k) sum += x[first + k * stride];
      x[first + b * stride] = sum;
    });
  }
  x[s.baseline_cell()] = 1.0;
  return MoebiusParam(s, std::move(x));
}

inline void check_moebius_positive(const MoebiusParam& mu) {
  const auto& s = mu.schema();
  for (std::size_t c = 0; c < s.cell_count(); ++c)
    if (!(mu.at_cell(c) > 0.0))
      throw DomainError("Moebius parameter " + GammaIndex::from_cell(s, c).key(s) + " is not positive");
}

namespace detail {

// log-domain passes between log mu and gamma. `forward` computes the
// alternating subset sums (gamma from log mu); otherwise the plain ones.
inline void lml_passes(const TableSchema& s, std::vector<double>& x, bool forward) {
  for (std::size_t v = 0; v < s.num_vars(); ++v) {
    const std::size_t b = s.var(v).baseline;
    for_each_fiber(s, v, [&](std::size_t first, std::size_t stride, std::size_t size) {
      const double base = x[first + b * stride];
      for (std::size_t k = 0; k < size; ++k)
        if (k != b) x[first + k * stride] += forward ? -base : base;
    });
  }
}

// Downward passes: baseline position becomes itself minus the other levels.
inline void moebius_prob_passes(const TableSchema& s, std::vector<double>& x) {
  for (std::size_t v = 0; v < s.num_vars(); ++v) {
    const std::size_t b = s.var(v).baseline;
    for_each_fiber(s, v, [&](std::size_t first, std::size_t stride, std::size_t size) {
      double rest = 0.0;
      for (std::size_t k = 0; k < size; ++k)
        if (k != b) rest += x[first + k * stride];
      x[first + b * stride] -= rest;
    });
  }
}

}  // namespace detail

inline LmlParam moebius_to_lml(const MoebiusParam& mu) {
  check_moebius_positive(mu);
  const auto& s = mu.schema();
  std::vector<double> x(mu.values().size());
  std::transform(mu.values().begin(), mu.values().end(), x.begin(), [](double m) { return std::log(m); });
  detail::lml_passes(s, x, true);
  x[s.baseline_cell()] = 0.0;
  return LmlParam(s, std::move(x));
}

// Per-cell gamma where defined. An entry is undefined exactly when its own
// mu is zero (all sub-indices then have mu at least as large). Used for
// tables with structural zeros.
inline std::vector<std::optional<double>> moebius_to_lml_partial(const MoebiusParam& mu) {
  const auto& s = mu.schema();
  std::vector<std::optional<double>> out(s.cell_count());
  // gamma^{j_U} only involves mu at restrictions of j_U, so evaluate the
  // alternating sum directly for each cell with positive mu.
  for (std::size_t c = 0; c < s.cell_count(); ++c) {
    if (!(mu.at_cell(c) > 0.0)) continue;
    const Subset U = s.support(c);
    double g = 0.0;
    bool defined = true;
    for (Subset::mask_type e = U.bits();; e = (e - 1) & U.bits()) {
      const Subset E(e);
      const double m = mu.at_cell(s.restrict_cell(c, E));
      if (!(m > 0.0)) {
        defined = false;
        break;
      }
      g += ((U - E).size() % 2 ? -1.0 : 1.0) * std::log(m);
      if (e == 0) break;
    }
    if (defined) out[c] = g;
  }
  return out;
}

inline MoebiusParam lml_to_moebius(const LmlParam& g) {
  const auto& s = g.schema();
  std::vector<double> x = g.values();
  x[s.baseline_cell()] = 0.0;
  detail::lml_passes(s, x, false);
  for (double& v : x) v = std::exp(v);
  return MoebiusParam(s, std::move(x));
}

// Inclusion-exclusion over baseline events. Never throws on invalid
// parameters; check strictly_positive() / min_entry() on the result.
inline ProbTable moebius_to_prob(const MoebiusParam& mu) {
  const auto& s = mu.schema();
  std::vector<double> x = mu.values();
  x[s.baseline_cell()] = 1.0;
  detail::moebius_prob_passes(s, x);
  return ProbTable(s, std::move(x));
}

inline ProbTable lml_to_prob(const LmlParam& g) { return moebius_to_prob(lml_to_moebius(g)); }

inline LmlParam prob_to_lml(const ProbTable& t) { return moebius_to_lml(prob_to_moebius(t)); }

}  // namespace lml
