#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "lml/error.hpp"
#include "lml/graph.hpp"
#include "lml/schema.hpp"
#include "lml/tables.hpp"
#include "lml/transform.hpp"

namespace lml {

using ordered_json = nlohmann::ordered_json;

inline constexpr int kOutputSchemaVersion = 1;

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Schema sidecar: {"vars":[{"id":..., "levels":[...], "baseline":...}]}.
// baseline may be a level label or an index; it defaults to the first level.
// ---------------------------------------------------------------------------

inline TableSchema schema_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("vars") || !j["vars"].is_array()) throw DataError("schema JSON needs a 'vars' array");
  std::vector<VariableSpec> vars;
  for (const auto& v : j["vars"]) {
    VariableSpec spec;
    spec.id = v.at("id").get<std::string>();
    spec.levels = v.at("levels").get<std::vector<std::string>>();
    if (v.contains("baseline")) {
      const auto& b = v["baseline"];
      if (b.is_string()) {
        spec.baseline = spec.level_index(b.get<std::string>());
      } else if (b.is_number_integer()) {
        spec.baseline = b.get<std::size_t>();
      } else {
        throw DataError("baseline of '" + spec.id + "' must be a level label or index");
      }
    }
    vars.push_back(std::move(spec));
  }
  return TableSchema(std::move(vars));
}

inline ordered_json schema_to_json(const TableSchema& s) {
  ordered_json vars = ordered_json::array();
  for (const auto& v : s.vars())
    vars.push_back({{"id", v.id}, {"levels", v.levels}, {"baseline", v.levels[v.baseline]}});
  return {{"vars", vars}};
}

inline TableSchema load_schema(const std::string& path) {
  try {
    return schema_from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("schema '" + path + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Long-format CSV: one column per variable plus a `count` (or `prob`) column.
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (quoted) {
      if (c == '"' && k + 1 < line.size() && line[k + 1] == '"') {
        cur += '"';
        ++k;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  for (auto& f : out) {
    const auto a = f.find_first_not_of(" \t\r");
    const auto b = f.find_last_not_of(" \t\r");
    f = a == std::string::npos ? std::string() : f.substr(a, b - a + 1);
  }
  return out;
}

struct LongTable {
  TableSchema schema;
  std::vector<std::string> values;  // raw value column, per cell ("" = absent)
};

inline LongTable parse_long_csv(const std::string& text, const std::optional<TableSchema>& schema,
                                const std::string& value_column) {
  std::istringstream is(text);
  std::string line;
  std::vector<std::string> header;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    header = split_csv_line(line);
    break;
  }
  if (header.empty()) throw DataError("no cells");
  std::size_t value_col = header.size();
  for (std::size_t k = 0; k < header.size(); ++k)
    if (header[k] == value_column) value_col = k;
  if (value_col == header.size()) throw DataError("CSV header has no '" + value_column + "' column");

  std::vector<std::vector<std::string>> rows;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto row = split_csv_line(line);
    if (row.size() != header.size()) throw DataError("CSV line " + std::to_string(lineno) + " has the wrong number of fields");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("no cells");

  std::vector<std::string> var_cols;
  std::vector<std::size_t> col_of;
  for (std::size_t k = 0; k < header.size(); ++k)
    if (k != value_col) {
      var_cols.push_back(header[k]);
      col_of.push_back(k);
    }

  TableSchema s;
  if (schema) {
    s = *schema;
    if (s.num_vars() != var_cols.size()) throw DataError("CSV columns do not match schema variables");
  } else {
    std::vector<VariableSpec> vars;
    for (std::size_t k = 0; k < var_cols.size(); ++k) {
      VariableSpec v{var_cols[k], {}, 0};
      for (const auto& row : rows) {
        const auto& lbl = row[col_of[k]];
        if (std::find(v.levels.begin(), v.levels.end(), lbl) == v.levels.end()) v.levels.push_back(lbl);
      }
      vars.push_back(std::move(v));
    }
    s = TableSchema(std::move(vars));
  }
  // Column holding each schema variable.
  std::vector<std::size_t> src(s.num_vars());
  for (std::size_t v = 0; v < s.num_vars(); ++v) {
    auto it = std::find(var_cols.begin(), var_cols.end(), s.var(v).id);
    if (it == var_cols.end()) throw DataError("CSV has no column for variable '" + s.var(v).id + "'");
    src[v] = col_of[static_cast<std::size_t>(it - var_cols.begin())];
  }

  LongTable out{s, std::vector<std::string>(s.cell_count())};
  std::vector<bool> seen(s.cell_count(), false);
  std::vector<std::size_t> lv(s.num_vars());
  for (const auto& row : rows) {
    for (std::size_t v = 0; v < s.num_vars(); ++v) lv[v] = s.var(v).level_index(row[src[v]]);
    const std::size_t c = s.encode(lv);
    if (seen[c]) throw DataError("duplicate cell row in CSV");
    seen[c] = true;
    out.values[c] = row[value_col];
  }
  return out;
}

}  // namespace detail

inline CountTable parse_counts(const std::string& text, const std::optional<TableSchema>& schema = std::nullopt) {
  auto lt = detail::parse_long_csv(text, schema, "count");
  std::vector<std::uint64_t> counts(lt.values.size(), 0);
  for (std::size_t c = 0; c < counts.size(); ++c) {
    const auto& v = lt.values[c];
    if (v.empty()) continue;
    std::size_t pos = 0;
    long long x = 0;
    try {
      x = std::stoll(v, &pos);
    } catch (const std::exception&) {
      throw DataError("count '" + v + "' is not an integer");
    }
    if (pos != v.size()) throw DataError("count '" + v + "' is not an integer");
    if (x < 0) throw DataError("negative count " + v);
    counts[c] = static_cast<std::uint64_t>(x);
  }
  return CountTable(lt.schema, std::move(counts));
}

inline CountTable load_counts(const std::string& path, const std::optional<TableSchema>& schema = std::nullopt) {
  return parse_counts(read_file(path), schema);
}

inline ProbTable parse_probs(const std::string& text, const std::optional<TableSchema>& schema = std::nullopt) {
  auto lt = detail::parse_long_csv(text, schema, "prob");
  std::vector<double> p(lt.values.size(), 0.0);
  for (std::size_t c = 0; c < p.size(); ++c) {
    if (lt.values[c].empty()) continue;
    try {
      p[c] = std::stod(lt.values[c]);
    } catch (const std::exception&) {
      throw DataError("probability '" + lt.values[c] + "' is not a number");
    }
    if (p[c] < 0.0) throw DataError("negative probability");
  }
  return ProbTable(lt.schema, std::move(p));
}

inline std::string counts_to_csv(const CountTable& t) {
  const auto& s = t.schema();
  std::ostringstream os;
  for (const auto& v : s.vars()) os << v.id << ",";
  os << "count\n";
  for (std::size_t c = 0; c < s.cell_count(); ++c) {
    for (std::size_t v = 0; v < s.num_vars(); ++v) os << s.var(v).levels[s.level_of(c, v)] << ",";
    os << t.count(c) << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Parameter vectors keyed by "U:j_U" in canonical order.
// ---------------------------------------------------------------------------

inline ordered_json param_to_json(const detail::CellParam& p) {
  ordered_json out = ordered_json::object();
  for (const auto& g : canonical_indices(p.schema())) out[g.key(p.schema())] = p.at(g);
  return out;
}

namespace detail {
inline std::vector<double> param_values_from_json(const TableSchema& s, const nlohmann::json& j, double empty_value) {
  std::vector<double> v(s.cell_count(), std::numeric_limits<double>::quiet_NaN());
  v[s.baseline_cell()] = empty_value;
  if (!j.is_object()) throw DataError("parameter JSON must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto idx = GammaIndex::parse(s, it.key());
    v[idx.cell(s)] = it.value().get<double>();
  }
  for (double x : v)
    if (std::isnan(x)) throw DataError("parameter JSON does not cover every index");
  return v;
}
}  // namespace detail

inline LmlParam lml_from_json(const TableSchema& s, const nlohmann::json& j) {
  return LmlParam(s, detail::param_values_from_json(s, j, 0.0));
}
inline MoebiusParam moebius_from_json(const TableSchema& s, const nlohmann::json& j) {
  return MoebiusParam(s, detail::param_values_from_json(s, j, 1.0));
}

// Cell-keyed probability table, e.g. {"Ap,L,L,L": 0.01, ...}.
inline ordered_json prob_to_json(const ProbTable& t) {
  const auto& s = t.schema();
  ordered_json out = ordered_json::object();
  for (std::size_t c = 0; c < s.cell_count(); ++c) {
    std::string key;
    for (std::size_t v = 0; v < s.num_vars(); ++v) key += (v ? "," : "") + s.var(v).levels[s.level_of(c, v)];
    out[key] = t[c];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Graph JSON: {"vertices":[...], "edges":[[a,b],...], "expand":[v,...]}.
// `vertices` lists schema variable ids. Edge endpoints name a plain
// variable, an expanded vertex "v.level", or an expanded variable v (which
// stands for all of its expanded vertices). Blocks are completed
// automatically.
// ---------------------------------------------------------------------------

struct GraphSpec {
  std::vector<std::string> vertices;
  std::vector<std::pair<std::string, std::string>> edges;
  std::vector<std::string> expand;
};

inline GraphSpec graph_spec_from_json(const nlohmann::json& j) {
  GraphSpec g;
  try {
    g.vertices = j.at("vertices").get<std::vector<std::string>>();
    if (j.contains("edges"))
      for (const auto& e : j["edges"]) {
        if (!e.is_array() || e.size() != 2) throw DataError("graph edge must be a pair");
        g.edges.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
      }
    if (j.contains("expand")) g.expand = j["expand"].get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("graph JSON: ") + e.what());
  }
  return g;
}

inline GraphSpec load_graph_spec(const std::string& path) {
  try {
    return graph_spec_from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("graph '" + path + "': " + e.what());
  }
}

inline BExpandedGraph build_graph(const GraphSpec& spec, const TableSchema& s) {
  if (spec.vertices.size() != s.num_vars()) throw DataError("graph vertices do not match schema variables");
  for (const auto& id : spec.vertices)
    if (!s.has_var(id)) throw DataError("graph vertex '" + id + "' is not a schema variable");
  Subset B;
  for (const auto& id : spec.expand) B = B.with(static_cast<unsigned>(s.var_index(id)));
  const auto names = BExpandedGraph::vertex_names(s, B);
  BidirectedGraph g(names);
  const auto verts = BExpandedGraph::layout(s, B);
  for (unsigned a = 0; a < verts.size(); ++a)
    for (unsigned b = a + 1; b < verts.size(); ++b)
      if (verts[a].var == verts[b].var) g.add_edge(a, b);
  auto resolve = [&](const std::string& name) -> Subset {
    if (auto k = g.find(name)) return Subset::singleton(*k);
    if (s.has_var(name)) {
      const auto v = s.var_index(name);
      Subset out;
      for (unsigned k = 0; k < verts.size(); ++k)
        if (verts[k].var == v) out = out.with(k);
      return out;
    }
    throw DataError("graph edge refers to unknown vertex '" + name + "'");
  };
  for (const auto& [a, b] : spec.edges)
    for (unsigned x : resolve(a).elements())
      for (unsigned y : resolve(b).elements()) {
        if (x == y) throw DataError("self-loop on vertex '" + names[x] + "'");
        g.add_edge(x, y);
      }
  return BExpandedGraph(s, B, std::move(g));
}

inline ordered_json graph_to_json(const BExpandedGraph& gb) {
  const auto& s = gb.schema();
  const auto& g = gb.graph();
  ordered_json verts = ordered_json::array(), edges = ordered_json::array(), expand = ordered_json::array();
  for (const auto& v : s.vars()) verts.push_back(v.id);
  for (auto [a, b] : g.edges())
    if (gb.vertices()[a].var != gb.vertices()[b].var) edges.push_back({g.name(a), g.name(b)});
  for (unsigned v : gb.B().elements()) expand.push_back(s.var(v).id);
  return {{"vertices", verts}, {"edges", edges}, {"expand", expand}};
}

}  // namespace lml
