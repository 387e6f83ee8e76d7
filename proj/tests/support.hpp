#pragma once

// Shared generators and brute-force oracles for the test programs. The
// oracles work straight from the definitions (marginal sums and
// inclusion-exclusion over the subset lattice) and never call the fast
// fiber passes under test.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "lml/lml.hpp"

namespace lml::testing {

inline TableSchema random_schema(std::mt19937_64& rng, unsigned min_p, unsigned max_p, unsigned max_levels) {
  std::uniform_int_distribution<unsigned> pd(min_p, max_p), ld(2, max_levels);
  const unsigned p = pd(rng);
  std::vector<VariableSpec> vars;
  for (unsigned v = 0; v < p; ++v) {
    VariableSpec spec;
    spec.id = "V" + std::to_string(v);
    const unsigned L = ld(rng);
    for (unsigned l = 0; l < L; ++l) spec.levels.push_back(std::string(1, static_cast<char>('a' + l)));
    spec.baseline = std::uniform_int_distribution<std::size_t>(0, L - 1)(rng);
    vars.push_back(spec);
  }
  return TableSchema(std::move(vars));
}

inline TableSchema make_schema(const std::vector<unsigned>& levels) {
  std::vector<VariableSpec> vars;
  for (std::size_t v = 0; v < levels.size(); ++v) {
    VariableSpec spec;
    spec.id = "V" + std::to_string(v);
    for (unsigned l = 0; l < levels[v]; ++l) spec.levels.push_back(std::string(1, static_cast<char>('a' + l)));
    vars.push_back(spec);
  }
  return TableSchema(std::move(vars));
}

inline ProbTable random_prob(const TableSchema& s, std::mt19937_64& rng, double lo = 0.05) {
  std::uniform_real_distribution<double> u(lo, 1.0);
  std::vector<double> p(s.cell_count());
  double total = 0.0;
  for (auto& x : p) total += (x = u(rng));
  for (auto& x : p) x /= total;
  return ProbTable(s, std::move(p));
}

inline CountTable sample_counts(const ProbTable& t, std::uint64_t n, std::mt19937_64& rng) {
  std::discrete_distribution<std::size_t> d(t.probs().begin(), t.probs().end());
  std::vector<std::uint64_t> c(t.size(), 0);
  for (std::uint64_t k = 0; k < n; ++k) ++c[d(rng)];
  return CountTable(t.schema(), std::move(c));
}

// True when cell c agrees with index cell g on every variable of U.
inline bool matches_on(const TableSchema& s, std::size_t c, std::size_t g, Subset U) {
  for (unsigned v : U.elements())
    if (s.level_of(c, v) != s.level_of(g, v)) return false;
  return true;
}

// mu^{j_U} = pr(Y_U = j_U) by direct summation, indexed by cell slot.
inline std::vector<double> brute_moebius(const ProbTable& t) {
  const auto& s = t.schema();
  std::vector<double> mu(s.cell_count(), 0.0);
  for (std::size_t g = 0; g < s.cell_count(); ++g) {
    const Subset U = s.support(g);
    for (std::size_t c = 0; c < s.cell_count(); ++c)
      if (matches_on(s, c, g, U)) mu[g] += t[c];
  }
  return mu;
}

// Dense zeta-type matrix Z with mu = Z * pi.
inline Eigen::MatrixXd dense_zeta(const TableSchema& s) {
  const auto N = static_cast<Eigen::Index>(s.cell_count());
  Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(N, N);
  for (std::size_t g = 0; g < s.cell_count(); ++g)
    for (std::size_t c = 0; c < s.cell_count(); ++c)
      if (matches_on(s, c, g, s.support(g))) Z(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(c)) = 1.0;
  return Z;
}

// Dense inclusion-exclusion matrix M with gamma = M * log(mu):
// gamma^{j_U} = sum_{W subset U} (-1)^{|U \ W|} log mu^{j_W}.
inline Eigen::MatrixXd dense_log_moebius(const TableSchema& s) {
  const auto N = static_cast<Eigen::Index>(s.cell_count());
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(N, N);
  for (std::size_t g = 0; g < s.cell_count(); ++g) {
    const Subset U = s.support(g);
    for (std::size_t h = 0; h < s.cell_count(); ++h) {
      const Subset W = s.support(h);
      if (!W.subset_of(U) || !matches_on(s, g, h, W)) continue;
      M(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(h)) = ((U - W).size() % 2 == 0) ? 1.0 : -1.0;
    }
  }
  return M;
}

inline Eigen::VectorXd as_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

inline BExpandedGraph graph_from_edges(const TableSchema& s, Subset B,
                                       const std::vector<std::pair<std::string, std::string>>& edges) {
  GraphSpec spec;
  for (const auto& v : s.vars()) spec.vertices.push_back(v.id);
  for (unsigned v : B.elements()) spec.expand.push_back(s.var(v).id);
  spec.edges = edges;
  return build_graph(spec, s);
}

inline CountTable housing_counts() {
  const auto s = load_schema(std::string(LML_DATA_DIR) + "/housing_schema.json");
  return load_counts(std::string(LML_DATA_DIR) + "/housing.csv", s);
}

inline BExpandedGraph housing_graph(const CountTable& t, const std::string& file) {
  return build_graph(load_graph_spec(std::string(LML_DATA_DIR) + "/" + file), t.schema());
}

}  // namespace lml::testing
