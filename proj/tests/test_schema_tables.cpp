#include <gtest/gtest.h>

#include "support.hpp"

using namespace lml;
using lml::testing::make_schema;
using lml::testing::random_prob;

TEST(Schema, RejectsInvalidDefinitions) {
  EXPECT_THROW(TableSchema(std::vector<VariableSpec>{}), DataError);
  EXPECT_THROW(TableSchema({{"A", {"x"}, 0}}), DataError);
  EXPECT_THROW(TableSchema({{"A", {"x", "y"}, 0}, {"A", {"x", "y"}, 0}}), DataError);
  EXPECT_THROW(TableSchema({{"A", {"x", "x"}, 0}}), DataError);
  EXPECT_THROW(TableSchema({{"A", {"x", "y"}, 2}}), DataError);
  std::vector<VariableSpec> many;
  for (int v = 0; v < 25; ++v) many.push_back({"V" + std::to_string(v), {"0", "1"}, 0});
  EXPECT_THROW(TableSchema(std::move(many)), DataError);
}

TEST(Schema, LayoutIsRowMajorFirstVariableSlowest) {
  TableSchema s({{"A", {"a0", "a1", "a2"}, 1}, {"B", {"b0", "b1"}, 0}});
  EXPECT_EQ(s.cell_count(), 6u);
  EXPECT_EQ(s.stride(0), 2u);
  EXPECT_EQ(s.stride(1), 1u);
  EXPECT_EQ(s.restricted_count(), 2u);
  for (std::size_t c = 0; c < s.cell_count(); ++c) EXPECT_EQ(s.encode(s.decode(c)), c);
  EXPECT_EQ(s.baseline_cell(), 2u);
  EXPECT_EQ(s.support(5), Subset::of({0, 1}));  // (a2, b1)
  EXPECT_EQ(s.support(2), Subset());
  EXPECT_EQ(s.restrict_cell(5, Subset::of({1})), 3u);  // (a1, b1)
  EXPECT_THROW(s.var(0).level_index("zz"), DataError);
  EXPECT_THROW(s.var_index("C"), DataError);
}

TEST(Tables, CountAndProbValidation) {
  const auto s = make_schema({2, 2});
  EXPECT_THROW(CountTable(s, {0, 0, 0, 0}), DataError);
  EXPECT_THROW(CountTable(s, {1, 2, 3}), DataError);
  EXPECT_THROW(ProbTable(s, {0.5, 0.5, 0.5, 0.5}), DataError);
  EXPECT_THROW(ProbTable(s, {0.5, 0.5, std::nan(""), 0.0}), DataError);
  ProbTable t(s, {0.25, 0.25, 0.5, 0.0});
  EXPECT_FALSE(t.strictly_positive());
  const CountTable c(s, {1, 2, 3, 0});
  EXPECT_EQ(c.total(), 6u);
  EXPECT_TRUE(c.has_zero_cells());
  const auto e = empirical_prob(c, 1.0);
  EXPECT_NEAR(e[3], 1.0 / 10.0, 1e-15);
}

TEST(Tables, MarginalizeMatchesBruteForce) {
  std::mt19937_64 rng(11);
  const auto s = make_schema({3, 2, 4});
  const auto t = random_prob(s, rng);
  const auto m = marginalize(t, Subset::of({0, 2}));
  ASSERT_EQ(m.size(), 12u);
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t c = 0; c < 4; ++c) {
      double want = 0.0;
      for (std::size_t b = 0; b < 2; ++b) want += t[s.encode(std::vector<std::size_t>{a, b, c})];
      EXPECT_NEAR(m[a * 4 + c], want, 1e-15);
    }
}

TEST(Tables, DichotomizeAroundCell) {
  std::mt19937_64 rng(5);
  const auto s = make_schema({3, 3});
  const auto t = random_prob(s, rng);
  const CellIndex i(s, std::vector<std::size_t>{2, 1});
  const auto d = dichotomize_around(t, i);
  EXPECT_EQ(d.schema().cell_count(), 4u);
  EXPECT_NEAR(d[3], t[s.encode(std::vector<std::size_t>{2, 1})], 1e-15);
  double row = 0.0;
  for (std::size_t b = 0; b < 3; ++b) row += t[s.encode(std::vector<std::size_t>{2, b})];
  EXPECT_NEAR(d[2] + d[3], row, 1e-15);  // X_0 = 1 marginal
  EXPECT_THROW(dichotomize_around(ProbTable(s, {0.5, 0.5, 0, 0, 0, 0, 0, 0, 0}), i), DomainError);
}

TEST(Tables, ExpandedTableHasStructuralZeros) {
  std::mt19937_64 rng(7);
  TableSchema s({{"A", {"x", "y", "z"}, 0}, {"B", {"u", "v"}, 0}});
  const auto t = random_prob(s, rng);
  const Subset B = Subset::of({0});
  const auto e = b_expand_table(t, B);
  ExpansionLayout layout(s, B);
  ASSERT_EQ(e.schema().num_vars(), 3u);
  EXPECT_EQ(e.schema().var(0).id, "A.y");
  EXPECT_EQ(e.schema().var(1).id, "A.z");
  double total = 0.0;
  for (std::size_t c = 0; c < e.size(); ++c) {
    total += e[c];
    if (layout.is_structural_zero(s, B, c)) {
      EXPECT_EQ(e[c], 0.0);
    }
  }
  EXPECT_NEAR(total, 1.0, 1e-14);
  // A = y, B = v maps to (A.y=1, A.z=0, B=v).
  EXPECT_NEAR(e[e.schema().encode(std::vector<std::size_t>{1, 0, 1})], t[s.encode(std::vector<std::size_t>{1, 1})], 1e-15);
  EXPECT_EQ(b_expand_table(t, Subset()).probs(), t.probs());
  EXPECT_THROW(b_expand_table(t, Subset::of({3})), DataError);
}
