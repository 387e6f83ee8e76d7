#include <gtest/gtest.h>

#include "support.hpp"

using namespace lml;
using namespace lml::testing;

namespace {

FitResult candidate(double p, double bic_value, int df = 1, std::size_t free = 1) {
  const TableSchema s({{"A", {"0", "1"}, 0}});
  FitResult r{ProbTable(s, {0.5, 0.5}), std::nullopt};
  r.p_value = p;
  r.bic = bic_value;
  r.df = df;
  r.free_parameters = free;
  r.converged = true;
  return r;
}

CountTable small_data(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto s = make_schema({3, 2, 2});
  return sample_counts(random_prob(s, rng), 800, rng);
}

}  // namespace

TEST(Criterion, SingleCandidate) {
  const std::vector<FitResult> c{candidate(0.01, 4.0)};
  EXPECT_EQ(criterion(c), 0u);
}

TEST(Criterion, PValueFloorComesFirst) {
  const std::vector<FitResult> c{candidate(0.50, -3.0), candidate(0.01, -10.0)};
  EXPECT_EQ(criterion(c), 0u);
}

TEST(Criterion, LowestBicAmongSurvivors) {
  const std::vector<FitResult> c{candidate(0.08, -9.7), candidate(0.30, -2.0)};
  EXPECT_EQ(criterion(c), 0u);
}

TEST(Criterion, TiesPreferFewerFreeParametersThenOrder) {
  const std::vector<FitResult> c{candidate(0.2, -5.0, 2, 10), candidate(0.2, -5.0, 3, 9), candidate(0.2, -5.0, 3, 9)};
  EXPECT_EQ(criterion(c), 1u);
}

TEST(Criterion, NoSurvivorFallsBackToFewestConstraints) {
  const std::vector<FitResult> c{candidate(0.001, -5.0, 4, 3), candidate(0.002, 1.0, 0, 7), candidate(0.0, -9.0, 2, 5)};
  EXPECT_EQ(criterion(c), 1u);
  EXPECT_THROW(criterion(std::vector<FitResult>{}), DataError);
}

TEST(Search, PairwiseStepNeverAddsEdges) {
  const auto data = small_data(31);
  FitCache cache(data, {});
  const auto start = BExpandedGraph::complete(data.schema(), Subset::of({0}));
  const auto out = pairwise_step(cache, start, 0, 1, 0.05);
  EXPECT_EQ(out.record.edges, 2u);
  EXPECT_EQ(out.record.candidates.size(), 4u);
  for (auto [a, b] : out.graph.graph().edges()) EXPECT_TRUE(start.graph().has_edge(a, b));
  for (auto [a, b] : start.graph().edges()) {
    const auto va = start.vertices()[a].var, vb = start.vertices()[b].var;
    const bool touched = (va == 0 && vb == 1) || (va == 1 && vb == 0);
    if (!touched) {
      EXPECT_TRUE(out.graph.graph().has_edge(a, b));
    }
  }
  EXPECT_THROW(pairwise_step(cache, start, 1, 1, 0.05), DataError);
}

TEST(Search, DeterministicAcrossThreadCounts) {
  const auto data = small_data(32);
  SearchConfig one, four;
  one.expand = four.expand = Subset::of({0});
  one.threads = 1;
  four.threads = 4;
  const auto a = search(data, one);
  const auto b = search(data, four);
  ASSERT_EQ(a.orderings.size(), 6u);
  EXPECT_EQ(a.selected, b.selected);
  EXPECT_EQ(a.fits_performed, b.fits_performed);
  for (std::size_t k = 0; k < a.orderings.size(); ++k) {
    EXPECT_EQ(a.orderings[k].order, b.orderings[k].order);
    EXPECT_EQ(a.orderings[k].constraints.slots(), b.orderings[k].constraints.slots());
    EXPECT_EQ(a.orderings[k].fit.deviance, b.orderings[k].fit.deviance);
  }
}

TEST(Search, SelectedModelIsRealizableAndRespectsFloor) {
  const auto data = small_data(33);
  SearchConfig cfg;
  cfg.expand = Subset::of({0});
  const auto tr = search(data, cfg);
  const auto& best = tr.final_model();
  EXPECT_EQ(constraints_for_expanded(best.graph).slots(), best.constraints.slots());
  bool any_pass = false;
  for (const auto& o : tr.orderings)
    for (const auto& st : o.steps)
      for (const auto& c : st.candidates) any_pass = any_pass || (c.qualified && c.p_value >= cfg.alpha);
  if (any_pass) {
    EXPECT_GE(best.fit.p_value, cfg.alpha);
  }
  for (const auto& o : tr.orderings) EXPECT_EQ(o.steps.size(), 3u);
}

TEST(Search, SampledOrderingsAreSeeded) {
  const auto a = search_orderings(5, 7, 42), b = search_orderings(5, 7, 42), c = search_orderings(5, 7, 43);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  EXPECT_EQ(a.size(), 7u);
  std::set<std::vector<std::size_t>> uniq(a.begin(), a.end());
  EXPECT_EQ(uniq.size(), 7u);
  EXPECT_EQ(search_orderings(3, 0, 0).size(), 6u);
  EXPECT_EQ(search_orderings(3, 100, 0).size(), 6u);
}

TEST(Search, FitBudgetIsCheckedUpFront) {
  const auto data = small_data(34);
  SearchConfig cfg;
  cfg.expand = data.schema().all_vars();
  cfg.fit_budget = 10;
  EXPECT_THROW(search(data, cfg), DataError);
  cfg.alpha = 1.5;
  EXPECT_THROW(search(data, cfg), DataError);
}

TEST(Search, HousingRecoversExpandedModel) {
  const auto t = housing_counts();
  SearchConfig cfg;
  cfg.expand = Subset::of({0, 1, 2});
  const auto tr = search(t, cfg);
  const auto& best = tr.final_model();
  EXPECT_EQ(best.fit.df, 23);
  EXPECT_NEAR(best.fit.deviance, 34.34, 0.05);
  const auto target = constraints_for_expanded(housing_graph(t, "housing_expanded.json"));
  EXPECT_EQ(best.constraints.slots(), target.slots());
}
