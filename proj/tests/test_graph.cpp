#include <gtest/gtest.h>

#include <set>

#include "support.hpp"

using namespace lml;
using namespace lml::testing;

namespace {

BidirectedGraph chain4() {
  BidirectedGraph g({"1", "2", "3", "4"});
  g.add_edge(0, 1);
  g.add_edge(1, 2);
  g.add_edge(2, 3);
  return g;
}

// Disease with three non-baseline levels and two SNPs with dominant and
// recessive non-baseline levels.
TableSchema snp_schema() {
  return TableSchema({{"Y1", {"0", "I", "II", "III"}, 0}, {"Y2", {"0", "D", "R"}, 0}, {"Y3", {"0", "D", "R"}, 0}});
}

std::set<std::string> key_set(const ConstraintSet& cs) {
  const auto k = cs.keys();
  return {k.begin(), k.end()};
}

}  // namespace

TEST(BidirectedGraph, EdgesAndComponents) {
  auto g = chain4();
  EXPECT_TRUE(g.has_edge(1, 0));
  EXPECT_FALSE(g.has_edge(0, 2));
  EXPECT_THROW(g.add_edge(1, 1), DataError);
  EXPECT_TRUE(g.is_connected(Subset::of({0, 1, 2})));
  EXPECT_FALSE(g.is_connected(Subset::of({0, 2})));
  const auto cc = connected_components(g, Subset::of({0, 1, 3}));
  ASSERT_EQ(cc.size(), 2u);
  EXPECT_EQ(cc[0], Subset::of({0, 1}));
  EXPECT_EQ(cc[1], Subset::of({3}));
  g.remove_edge(1, 2);
  EXPECT_EQ(g.num_edges(), 2u);
}

TEST(BidirectedGraph, FourChainDisconnectedSets) {
  const auto ds = disconnected_sets(chain4());
  const std::vector<Subset> expected{Subset::of({0, 2}), Subset::of({0, 3}), Subset::of({1, 3}), Subset::of({0, 1, 3}),
                                     Subset::of({0, 2, 3})};
  EXPECT_EQ(ds, expected);
  EXPECT_TRUE(disconnected_sets(BidirectedGraph::complete({"a", "b", "c"})).empty());
}

TEST(Constraints, GraphModelPinsEveryLevelOfDisconnectedSets) {
  const auto s = make_schema({2, 3, 2, 2});
  BidirectedGraph g({"V0", "V1", "V2", "V3"});
  g.add_edge(0, 1);
  g.add_edge(1, 2);
  g.add_edge(2, 3);
  const auto cs = constraints_for_graph(g, s);
  // |{1,3}| + |{1,4}| + |{2,4}| + |{1,2,4}| + |{1,3,4}| restricted cells.
  EXPECT_EQ(cs.size(), 1u * 1 + 1 * 1 + 2 * 1 + 1 * 2 * 1 + 1 * 1 * 1);
  BidirectedGraph wrong({"V0", "V1", "V3", "V2"});
  EXPECT_THROW(constraints_for_graph(wrong, s), DataError);
}

TEST(Constraints, ParameterCensus) {
  const auto s = snp_schema();
  std::map<unsigned, int> by_order;
  for (const auto& g : canonical_indices(s)) ++by_order[g.vars.size()];
  EXPECT_EQ(canonical_indices(s).size(), 35u);
  EXPECT_EQ(by_order[1], 7);
  EXPECT_EQ(by_order[2], 16);
  EXPECT_EQ(by_order[3], 12);
}

TEST(Constraints, SnpExpandedGraphYieldsEighteenZeros) {
  const auto s = snp_schema();
  const auto gb = graph_from_edges(s, Subset::of({1, 2}), {{"Y1", "Y2.D"}, {"Y1", "Y3.D"}, {"Y2.R", "Y3.R"}});
  const auto cs = constraints_for_expanded(gb);
  std::set<std::string> expected{"Y2,Y3:D,D", "Y2,Y3:R,D", "Y2,Y3:D,R"};
  for (std::string j : {"I", "II", "III"}) {
    expected.insert("Y1,Y2:" + j + ",R");
    expected.insert("Y1,Y3:" + j + ",R");
    expected.insert("Y1,Y2,Y3:" + j + ",R,R");
    expected.insert("Y1,Y2,Y3:" + j + ",R,D");
    expected.insert("Y1,Y2,Y3:" + j + ",D,R");
  }
  EXPECT_EQ(cs.size(), 18u);
  EXPECT_EQ(key_set(cs), expected);

  // The unexpanded graph of the same distribution is complete.
  EXPECT_TRUE(constraints_for_graph(BidirectedGraph::complete({"Y1", "Y2", "Y3"}), s).empty());
}

TEST(Constraints, FullyExpandedSnpGraphYieldsTwentyThreeZeros) {
  const auto s = snp_schema();
  const auto gb = graph_from_edges(s, Subset::of({0, 1, 2}),
                                   {{"Y1.I", "Y2.D"}, {"Y1.II", "Y2.D"}, {"Y1.I", "Y3.D"}, {"Y2.R", "Y3.R"}});
  const auto cs = constraints_for_expanded(gb);
  EXPECT_EQ(cs.size(), 23u);
  const auto keys = key_set(cs);
  for (std::string k : {"Y1,Y2:III,D", "Y1,Y3:II,D", "Y1,Y3:III,D", "Y1,Y2,Y3:III,D,D", "Y1,Y2,Y3:II,D,D"})
    EXPECT_TRUE(keys.count(k)) << k;
  EXPECT_FALSE(keys.count("Y1,Y2,Y3:I,D,D"));
}

TEST(Constraints, EmptyExpansionMatchesPlainGraph) {
  std::mt19937_64 rng(9);
  for (int rep = 0; rep < 20; ++rep) {
    const auto s = random_schema(rng, 2, 4, 3);
    BidirectedGraph g([&] {
      std::vector<std::string> n;
      for (const auto& v : s.vars()) n.push_back(v.id);
      return n;
    }());
    for (unsigned a = 0; a < s.num_vars(); ++a)
      for (unsigned b = a + 1; b < s.num_vars(); ++b)
        if (rng() % 2) g.add_edge(a, b);
    const auto plain = constraints_for_graph(g, s);
    const auto expanded = constraints_for_expanded(BExpandedGraph::expand(s, Subset(), g));
    EXPECT_EQ(plain.slots(), expanded.slots());
  }
}

TEST(Constraints, HousingModels) {
  const auto t = housing_counts();
  const auto a = constraints_for_expanded(housing_graph(t, "housing_sat_cont.json"));
  EXPECT_EQ(key_set(a), (std::set<std::string>{"Sat,Cont:L,H", "Sat,Cont:H,H"}));
  const auto b = constraints_for_expanded(housing_graph(t, "housing_expanded.json"));
  EXPECT_EQ(b.size(), 23u);
  const auto keys = key_set(b);
  EXPECT_TRUE(keys.count("Type,Sat,Cont:At,H,H"));
  EXPECT_TRUE(keys.count("Type,Infl:At,L"));
  EXPECT_TRUE(keys.count("Type,Infl,Sat,Cont:Ap,H,L,H"));
  EXPECT_FALSE(keys.count("Type,Infl:At,H"));
}

TEST(BExpandedGraph, BlocksArePinned) {
  const auto s = snp_schema();
  auto gb = BExpandedGraph::complete(s, Subset::of({1}));
  EXPECT_EQ(gb.num_vertices(), 4u);
  EXPECT_EQ(gb.graph().names()[1], "Y2.D");
  EXPECT_THROW(gb.remove_edge(1, 2), DataError);
  EXPECT_TRUE(gb.is_primary(Subset::of({0, 1, 3})));
  EXPECT_FALSE(gb.is_primary(Subset::of({1, 2})));
  const auto ps = gb.decompose(Subset::of({0, 2}));
  ASSERT_TRUE(ps.has_value());
  EXPECT_EQ(ps->Q, Subset::of({0}));
  EXPECT_EQ(ps->D, Subset::of({1}));
  EXPECT_EQ(primary_subsets(gb).size(), 2u * 3 * 2);
  BidirectedGraph open(BExpandedGraph::vertex_names(s, Subset::of({1})));
  EXPECT_THROW(BExpandedGraph(s, Subset::of({1}), open), DataError);
}

TEST(Markov, ProductTableSatisfiesEdgelessGraph) {
  std::mt19937_64 rng(10);
  const auto s = make_schema({3, 2, 2});
  std::vector<std::vector<double>> m(3);
  for (std::size_t v = 0; v < 3; ++v) {
    std::vector<VariableSpec> one{s.var(v)};
    m[v] = random_prob(TableSchema(one), rng).probs();
  }
  std::vector<double> p(s.cell_count());
  for (std::size_t c = 0; c < s.cell_count(); ++c) p[c] = m[0][s.level_of(c, 0)] * m[1][s.level_of(c, 1)] * m[2][s.level_of(c, 2)];
  const ProbTable t(s, p);
  const auto edgeless = BidirectedGraph({"V0", "V1", "V2"});
  const auto mc = holds_markov(t, constraints_for_graph(edgeless, s), 1e-10);
  EXPECT_TRUE(mc.holds);
  EXPECT_EQ(mc.values.size(), 2u + 2 + 1 + 2);
  const auto fails = holds_markov(random_prob(s, rng), constraints_for_graph(edgeless, s), 1e-10);
  EXPECT_FALSE(fails.holds);
  for (std::size_t k = 1; k < fails.values.size(); ++k)
    EXPECT_GE(std::abs(fails.values[k - 1].second), std::abs(fails.values[k].second));
}

TEST(Dot, RoundTrip) {
  const auto g = chain4();
  const auto back = import_dot(export_dot(g));
  EXPECT_EQ(back.names(), g.names());
  EXPECT_EQ(back.edges(), g.edges());

  const auto t = housing_counts();
  const auto gb = housing_graph(t, "housing_expanded.json");
  const auto dot = export_dot(gb);
  EXPECT_NE(dot.find("cluster_Type"), std::string::npos);
  EXPECT_NE(dot.find("dir=both"), std::string::npos);
  const auto gb_back = import_dot(dot);
  EXPECT_EQ(gb_back.names(), gb.graph().names());
  EXPECT_EQ(gb_back.edges(), gb.graph().edges());
  EXPECT_EQ(export_dot(gb), dot);
  EXPECT_THROW(import_dot("graph G {\n  \"a\" -- \"b\n}\n"), DataError);
}
