#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lml/error.hpp"
#include "lml/schema.hpp"
#include "lml/subset.hpp"
#include "lml/tables.hpp"
#include "lml/transform.hpp"

namespace lml {

// Exhaustive subset enumeration is only attempted up to this many vertices.
inline constexpr unsigned kMaxEnumerationVertices = 24;

class BidirectedGraph {
 public:
  BidirectedGraph() = default;
  explicit BidirectedGraph(std::vector<std::string> vertices) : names_(std::move(vertices)) {
    if (names_.size() > 32) throw DataError("graph has more than 32 vertices");
    for (std::size_t a = 0; a < names_.size(); ++a)
      for (std::size_t b = a + 1; b < names_.size(); ++b)
        if (names_[a] == names_[b]) throw DataError("duplicate vertex '" + names_[a] + "'");
    adj_.assign(names_.size(), Subset{});
  }

  static BidirectedGraph complete(std::vector<std::string> vertices) {
    BidirectedGraph g(std::move(vertices));
    for (unsigned a = 0; a < g.num_vertices(); ++a)
      for (unsigned b = a + 1; b < g.num_vertices(); ++b) g.add_edge(a, b);
    return g;
  }

  unsigned num_vertices() const { return static_cast<unsigned>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(unsigned v) const { return names_[v]; }
  unsigned index_of(std::string_view name) const {
    for (unsigned v = 0; v < names_.size(); ++v)
      if (names_[v] == name) return v;
    throw DataError("unknown vertex '" + std::string(name) + "'");
  }
  std::optional<unsigned> find(std::string_view name) const {
    for (unsigned v = 0; v < names_.size(); ++v)
      if (names_[v] == name) return v;
    return std::nullopt;
  }
  Subset all() const { return Subset::full(num_vertices()); }

  void add_edge(unsigned a, unsigned b) {
    check_pair(a, b);
    adj_[a] = adj_[a].with(b);
    adj_[b] = adj_[b].with(a);
  }
  void remove_edge(unsigned a, unsigned b) {
    check_pair(a, b);
    adj_[a] = adj_[a].without(b);
    adj_[b] = adj_[b].without(a);
  }
  bool has_edge(unsigned a, unsigned b) const { return a < adj_.size() && adj_[a].contains(b); }
  Subset neighbours(unsigned v) const { return adj_[v]; }

  // Edges (a, b) with a < b, lexicographically.
  std::vector<std::pair<unsigned, unsigned>> edges() const {
    std::vector<std::pair<unsigned, unsigned>> out;
    for (unsigned a = 0; a < num_vertices(); ++a)
      for (unsigned b : (adj_[a] - Subset::full(a + 1)).elements()) out.emplace_back(a, b);
    return out;
  }
  std::size_t num_edges() const { return edges().size(); }

  // Component of `start` in the subgraph induced by U.
  Subset component(unsigned start, Subset U) const {
    Subset seen = Subset::singleton(start), frontier = seen;
    while (!frontier.empty()) {
      Subset next;
      for (unsigned v : frontier.elements()) next = next | (adj_[v] & U);
      frontier = next - seen;
      seen = seen | frontier;
    }
    return seen;
  }

  bool is_connected(Subset U) const { return U.empty() || component(U.lowest(), U) == U; }

  bool operator==(const BidirectedGraph&) const = default;

 private:
  void check_pair(unsigned a, unsigned b) const {
    if (a >= num_vertices() || b >= num_vertices()) throw DataError("edge endpoint out of range");
    if (a == b) throw DataError("self-loop on vertex '" + names_[a] + "'");
  }

  std::vector<std::string> names_;
  std::vector<Subset> adj_;
};

// Connected components of the induced subgraph G_U, ordered by their
// smallest vertex.
inline std::vector<Subset> connected_components(const BidirectedGraph& g, Subset U) {
  if (U.empty()) throw DataError("connected_components needs a nonempty vertex set");
  if (!U.subset_of(g.all())) throw DataError("vertex set not contained in graph");
  std::vector<Subset> out;
  Subset rest = U;
  while (!rest.empty()) {
    Subset c = g.component(rest.lowest(), rest);
    out.push_back(c);
    rest = rest - c;
  }
  return out;
}

// Every U whose induced subgraph has at least two components, in canonical
// order (size, then lexicographic).
inline std::vector<Subset> disconnected_sets(const BidirectedGraph& g) {
  const unsigned n = g.num_vertices();
  if (n > kMaxEnumerationVertices) throw DataError("disconnected-set enumeration is limited to 24 vertices");
  std::vector<Subset> out;
  const Subset::mask_type end = Subset::mask_type{1} << n;
  for (Subset::mask_type m = 1; m < end; ++m) {
    Subset U(m);
    if (U.size() >= 2 && !g.is_connected(U)) out.push_back(U);
  }
  std::sort(out.begin(), out.end(), SizeLexLess{});
  return out;
}

// Set of GammaIndex values pinned to zero, stored as sorted cell slots.
class ConstraintSet {
 public:
  ConstraintSet() = default;
  ConstraintSet(TableSchema schema, std::vector<std::size_t> slots) : schema_(std::move(schema)), slots_(std::move(slots)) {
    const std::size_t base = schema_.baseline_cell();
    for (auto c : slots_)
      if (c >= schema_.cell_count() || c == base) throw DataError("constraint refers to an invalid index");
    std::sort(slots_.begin(), slots_.end());
    slots_.erase(std::unique(slots_.begin(), slots_.end()), slots_.end());
  }

  const TableSchema& schema() const { return schema_; }
  const std::vector<std::size_t>& slots() const { return slots_; }
  std::size_t size() const { return slots_.size(); }
  bool empty() const { return slots_.empty(); }
  bool contains(std::size_t slot) const { return std::binary_search(slots_.begin(), slots_.end(), slot); }
  bool contains(const GammaIndex& g) const { return contains(g.cell(schema_)); }

  // Indices in canonical order.
  std::vector<GammaIndex> indices() const {
    std::vector<GammaIndex> out;
    for (auto c : slots_) out.push_back(GammaIndex::from_cell(schema_, c));
    std::sort(out.begin(), out.end(), GammaIndexLess{});
    return out;
  }
  std::vector<std::string> keys() const {
    std::vector<std::string> out;
    for (const auto& g : indices()) out.push_back(g.key(schema_));
    return out;
  }

  bool operator==(const ConstraintSet& o) const { return slots_ == o.slots_ && schema_ == o.schema_; }

 private:
  TableSchema schema_;
  std::vector<std::size_t> slots_;
};

// Adds to `slots` every cell whose support is exactly U (all j_U ∈ J_U).
inline void append_all_levels(const TableSchema& s, Subset U, std::vector<std::size_t>& slots) {
  for (std::size_t c = 0; c < s.cell_count(); ++c)
    if (s.support(c) == U) slots.push_back(c);
}

inline void check_graph_matches(const BidirectedGraph& g, const TableSchema& s) {
  if (g.num_vertices() != s.num_vars()) throw DataError("graph vertices do not match schema variables");
  for (unsigned v = 0; v < g.num_vertices(); ++v)
    if (g.name(v) != s.var(v).id)
      throw DataError("graph vertex '" + g.name(v) + "' does not match schema variable '" + s.var(v).id + "'");
}

inline ConstraintSet constraints_for_graph(const BidirectedGraph& g, const TableSchema& s) {
  check_graph_matches(g, s);
  std::vector<std::size_t> slots;
  for (Subset U : disconnected_sets(g)) append_all_levels(s, U, slots);
  return ConstraintSet(s, std::move(slots));
}

// ---------------------------------------------------------------------------
// B-expanded graphs.
// ---------------------------------------------------------------------------

struct ExpandedVertex {
  std::size_t var;
  // Level index for expanded vertices; nullopt for a plain vertex of P.
  std::optional<std::size_t> level;
};

// Primary subset L = Q ∪ j_D of P ∪ J_B.
struct PrimarySubset {
  Subset vertices;  // L, over expanded-graph vertices
  Subset Q;         // over schema variables
  Subset D;         // over schema variables
  std::vector<std::pair<std::size_t, std::size_t>> jD;  // (variable, level), variable order
};

class BExpandedGraph {
 public:
  // Vertex layout follows the schema: a plain variable contributes one
  // vertex named by its id; an expanded one contributes "id.level" for each
  // non-baseline level in declared order.
  static std::vector<ExpandedVertex> layout(const TableSchema& s, Subset B) {
    std::vector<ExpandedVertex> out;
    for (std::size_t v = 0; v < s.num_vars(); ++v) {
      if (B.contains(static_cast<unsigned>(v))) {
        for (std::size_t l : s.var(v).restricted_levels()) out.push_back({v, l});
      } else {
        out.push_back({v, std::nullopt});
      }
    }
    return out;
  }

  static std::vector<std::string> vertex_names(const TableSchema& s, Subset B) {
    std::vector<std::string> out;
    for (const auto& ev : layout(s, B))
      out.push_back(ev.level ? expanded_name(s.var(ev.var), *ev.level) : s.var(ev.var).id);
    return out;
  }

  // Validates that `g` has the expanded vertex layout and complete blocks.
  BExpandedGraph(TableSchema schema, Subset B, BidirectedGraph g)
      : schema_(std::move(schema)), B_(B), vertices_(layout(schema_, B)), graph_(std::move(g)) {
    if (!B_.subset_of(schema_.all_vars())) throw DataError("expansion set refers to unknown variables");
    if (graph_.names() != vertex_names(schema_, B_))
      throw DataError("graph vertices do not match the B-expanded layout of the schema");
    for (Subset blk : blocks())
      for (unsigned a : blk.elements())
        for (unsigned b : blk.elements())
          if (a < b && !graph_.has_edge(a, b))
            throw DataError("expanded block of '" + schema_.var(vertices_[a].var).id + "' is not complete");
  }

  static BExpandedGraph complete(const TableSchema& s, Subset B) {
    return BExpandedGraph(s, B, BidirectedGraph::complete(vertex_names(s, B)));
  }

  // Replaces every edge v <-> w of a graph over V by all edges between the
  // vertices representing v and w; blocks are completed.
  static BExpandedGraph expand(const TableSchema& s, Subset B, const BidirectedGraph& g) {
    check_graph_matches(g, s);
    auto verts = layout(s, B);
    BidirectedGraph out(vertex_names(s, B));
    for (unsigned a = 0; a < verts.size(); ++a)
      for (unsigned b = a + 1; b < verts.size(); ++b) {
        const auto va = static_cast<unsigned>(verts[a].var), vb = static_cast<unsigned>(verts[b].var);
        if (va == vb || g.has_edge(va, vb)) out.add_edge(a, b);
      }
    return BExpandedGraph(s, B, std::move(out));
  }

  const TableSchema& schema() const { return schema_; }
  Subset B() const { return B_; }
  Subset P() const { return schema_.all_vars() - B_; }
  const BidirectedGraph& graph() const { return graph_; }
  const std::vector<ExpandedVertex>& vertices() const { return vertices_; }
  unsigned num_vertices() const { return graph_.num_vertices(); }

  // Vertices representing schema variable v.
  Subset vertices_of(std::size_t v) const {
    Subset out;
    for (unsigned k = 0; k < vertices_.size(); ++k)
      if (vertices_[k].var == v) out = out.with(k);
    return out;
  }

  // The J_v blocks for v in B.
  std::vector<Subset> blocks() const {
    std::vector<Subset> out;
    for (unsigned v : B_.elements()) out.push_back(vertices_of(v));
    return out;
  }

  void remove_edge(unsigned a, unsigned b) {
    if (vertices_.at(a).var == vertices_.at(b).var) throw DataError("cannot remove an edge inside an expanded block");
    graph_.remove_edge(a, b);
  }

  bool is_primary(Subset L) const {
    for (Subset blk : blocks())
      if ((L & blk).size() > 1) return false;
    return true;
  }

  std::optional<PrimarySubset> decompose(Subset L) const {
    if (!is_primary(L)) return std::nullopt;
    PrimarySubset ps;
    ps.vertices = L;
    for (unsigned k : L.elements()) {
      const auto& ev = vertices_[k];
      if (ev.level) {
        ps.D = ps.D.with(static_cast<unsigned>(ev.var));
        ps.jD.emplace_back(ev.var, *ev.level);
      } else {
        ps.Q = ps.Q.with(static_cast<unsigned>(ev.var));
      }
    }
    return ps;
  }

  bool operator==(const BExpandedGraph& o) const {
    return B_ == o.B_ && schema_ == o.schema_ && graph_ == o.graph_;
  }

 private:
  TableSchema schema_;
  Subset B_;
  std::vector<ExpandedVertex> vertices_;
  BidirectedGraph graph_;
};

// All primary subsets of P ∪ J_B (including the empty set), canonical order.
inline std::vector<PrimarySubset> primary_subsets(const BExpandedGraph& gb) {
  const unsigned n = gb.num_vertices();
  if (n > kMaxEnumerationVertices) throw DataError("primary-subset enumeration is limited to 24 vertices");
  std::vector<Subset> sets;
  const Subset::mask_type end = Subset::mask_type{1} << n;
  for (Subset::mask_type m = 0; m < end; ++m)
    if (gb.is_primary(Subset(m))) sets.push_back(Subset(m));
  std::sort(sets.begin(), sets.end(), SizeLexLess{});
  std::vector<PrimarySubset> out;
  out.reserve(sets.size());
  for (Subset L : sets) out.push_back(*gb.decompose(L));
  return out;
}

// For every disconnected primary L = Q ∪ j_D: gamma^{j_Q ∪ j_D} = 0 for all
// j_Q ∈ J_Q.
inline ConstraintSet constraints_for_expanded(const BExpandedGraph& gb) {
  const auto& s = gb.schema();
  const unsigned n = gb.num_vertices();
  if (n > kMaxEnumerationVertices) throw DataError("constraint generation is limited to 24 expanded vertices");
  std::vector<std::size_t> slots;
  const Subset::mask_type end = Subset::mask_type{1} << n;
  for (Subset::mask_type m = 1; m < end; ++m) {
    const Subset L(m);
    if (L.size() < 2 || !gb.is_primary(L) || gb.graph().is_connected(L)) continue;
    const auto ps = *gb.decompose(L);
    const Subset U = ps.Q | ps.D;
    for (std::size_t c = 0; c < s.cell_count(); ++c) {
      if (s.support(c) != U) continue;
      bool match = true;
      for (auto [v, l] : ps.jD)
        if (s.level_of(c, v) != l) match = false;
      if (match) slots.push_back(c);
    }
  }
  return ConstraintSet(s, std::move(slots));
}

struct MarkovCheck {
  bool holds = true;
  double max_violation = 0.0;
  // Constrained indices with their value in the table, by |value| descending.
  std::vector<std::pair<GammaIndex, double>> values;
};

inline MarkovCheck holds_markov(const ProbTable& t, const ConstraintSet& cs, double tol) {
  if (!(t.schema() == cs.schema())) throw DataError("constraint set schema does not match table");
  const LmlParam g = prob_to_lml(t);
  MarkovCheck out;
  for (const auto& idx : cs.indices()) {
    const double v = g.at(idx);
    out.values.emplace_back(idx, v);
    out.max_violation = std::max(out.max_violation, std::abs(v));
  }
  std::stable_sort(out.values.begin(), out.values.end(),
                   [](const auto& a, const auto& b) { return std::abs(a.second) > std::abs(b.second); });
  out.holds = out.max_violation <= tol;
  return out;
}

// ---------------------------------------------------------------------------
// DOT export / import.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string dot_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

}  // namespace detail

inline std::string export_dot(const BidirectedGraph& g) {
  std::ostringstream os;
  os << "graph G {\n";
  os << "  edge [dir=both, arrowhead=normal, arrowtail=normal];\n";
  for (const auto& n : g.names()) os << "  " << detail::dot_quote(n) << ";\n";
  for (auto [a, b] : g.edges()) os << "  " << detail::dot_quote(g.name(a)) << " -- " << detail::dot_quote(g.name(b)) << ";\n";
  os << "}\n";
  return os.str();
}

// Expanded blocks are drawn as gray clusters; intra-block edges are kept
// so the importer recovers the full edge set.
inline std::string export_dot(const BExpandedGraph& gb) {
  const auto& g = gb.graph();
  const auto& s = gb.schema();
  std::ostringstream os;
  os << "graph G {\n";
  os << "  edge [dir=both, arrowhead=normal, arrowtail=normal];\n";
  for (std::size_t v = 0; v < s.num_vars(); ++v) {
    const Subset vs = gb.vertices_of(v);
    if (gb.B().contains(static_cast<unsigned>(v))) {
      os << "  subgraph " << detail::dot_quote("cluster_" + s.var(v).id) << " {\n";
      os << "    style=filled; color=lightgray; label=" << detail::dot_quote(s.var(v).id) << ";\n";
      for (unsigned k : vs.elements()) os << "    " << detail::dot_quote(g.name(k)) << ";\n";
      os << "  }\n";
    } else {
      for (unsigned k : vs.elements()) os << "  " << detail::dot_quote(g.name(k)) << ";\n";
    }
  }
  for (auto [a, b] : g.edges()) os << "  " << detail::dot_quote(g.name(a)) << " -- " << detail::dot_quote(g.name(b)) << ";\n";
  os << "}\n";
  return os.str();
}

// Reads back the node and edge statements written by export_dot.
inline BidirectedGraph import_dot(const std::string& text) {
  std::vector<std::string> nodes;
  std::vector<std::pair<std::string, std::string>> edges;
  std::istringstream is(text);
  std::string line;
  auto read_quoted = [](const std::string& l, std::size_t& pos) -> std::optional<std::string> {
    pos = l.find('"', pos);
    if (pos == std::string::npos) return std::nullopt;
    std::string out;
    for (++pos; pos < l.size(); ++pos) {
      if (l[pos] == '\\' && pos + 1 < l.size()) {
        out += l[++pos];
      } else if (l[pos] == '"') {
        ++pos;
        return out;
      } else {
        out += l[pos];
      }
    }
    throw DataError("unterminated string in DOT input");
  };
  while (std::getline(is, line)) {
    const auto first = line.find_first_not_of(' ');
    if (first == std::string::npos || line[first] != '"') continue;
    std::size_t pos = first;
    auto a = read_quoted(line, pos);
    if (line.find("--", pos) != std::string::npos) {
      auto b = read_quoted(line, pos);
      if (!a || !b) throw DataError("malformed DOT edge");
      edges.emplace_back(*a, *b);
    } else {
      nodes.push_back(*a);
    }
  }
  BidirectedGraph g(nodes);
  for (const auto& [a, b] : edges) g.add_edge(g.index_of(a), g.index_of(b));
  return g;
}

}  // namespace lml
