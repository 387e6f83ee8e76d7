#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "lml/error.hpp"
#include "lml/fit.hpp"
#include "lml/graph.hpp"

namespace lml {

struct SearchConfig {
  double alpha = 0.05;
  // Variables whose binary expansion is searched over (B).
  Subset expand;
  // 0 means every ordering of the variables.
  std::size_t max_orderings = 0;
  std::uint64_t seed = 0;
  FitOptions fit;
  // Upper bound on the number of candidate fits, checked before fitting.
  std::uint64_t fit_budget = 1'000'000;
  // 0 means LML_THREADS, else hardware concurrency.
  unsigned threads = 0;
};

// Filters to p-value >= alpha and takes the smallest BIC; ties go to fewer
// free parameters, then to the earlier candidate. Without survivors the
// candidate with the fewest constraints wins.
inline std::size_t criterion(std::span<const FitResult> candidates, double alpha = 0.05) {
  if (candidates.empty()) throw DataError("criterion needs at least one candidate");
  std::optional<std::size_t> best;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const auto& c = candidates[k];
    if (!(c.p_value >= alpha)) continue;
    if (!best) {
      best = k;
      continue;
    }
    const auto& b = candidates[*best];
    if (c.bic < b.bic || (c.bic == b.bic && c.free_parameters < b.free_parameters)) best = k;
  }
  if (best) return *best;
  std::size_t fallback = 0;
  for (std::size_t k = 1; k < candidates.size(); ++k)
    if (candidates[k].df < candidates[fallback].df) fallback = k;
  return fallback;
}

// Thread-safe memo of fits keyed by constraint set.
class FitCache {
 public:
  FitCache(const CountTable& data, FitOptions opts) : data_(data), opts_(opts) {}

  FitResult fit(const ConstraintSet& cs) {
    {
      std::lock_guard lock(mu_);
      if (auto it = cache_.find(cs.slots()); it != cache_.end()) return it->second;
    }
    FitResult r = fit_mle(data_, ModelSpec(data_.schema(), cs), opts_);
    std::lock_guard lock(mu_);
    auto [it, inserted] = cache_.emplace(cs.slots(), std::move(r));
    if (inserted) ++fits_;
    return it->second;
  }

  std::size_t fits_performed() const {
    std::lock_guard lock(mu_);
    return fits_;
  }

 private:
  const CountTable& data_;
  FitOptions opts_;
  mutable std::mutex mu_;
  std::map<std::vector<std::size_t>, FitResult> cache_;
  std::size_t fits_ = 0;
};

struct CandidateSummary {
  std::size_t removed_mask = 0;
  bool qualified = false;
  double deviance = 0.0;
  int df = 0;
  double p_value = 0.0;
  double bic = 0.0;
};

struct StepRecord {
  std::size_t u = 0, w = 0;
  std::size_t edges = 0;  // e: edges joining the expansions of u and w
  std::vector<CandidateSummary> candidates;
  std::size_t disqualified = 0;
  std::size_t selected = 0;  // index into candidates
};

struct StepOutcome {
  BExpandedGraph graph;
  StepRecord record;
};

// Edges of the current graph joining a vertex of u to a vertex of w.
inline std::vector<std::pair<unsigned, unsigned>> cross_edges(const BExpandedGraph& g, std::size_t u, std::size_t w) {
  std::vector<std::pair<unsigned, unsigned>> out;
  for (auto [a, b] : g.graph().edges()) {
    const auto va = g.vertices()[a].var, vb = g.vertices()[b].var;
    if ((va == u && vb == w) || (va == w && vb == u)) out.emplace_back(a, b);
  }
  return out;
}

// Exhaustive search over the 2^e subgraphs obtained by removing edges
// between the expansions of u and w.
inline StepOutcome pairwise_step(FitCache& cache, const BExpandedGraph& current, std::size_t u, std::size_t w,
                                 double alpha) {
  if (u == w) throw DataError("pairwise_step needs two distinct variables");
  const auto edges = cross_edges(current, u, w);
  StepRecord rec;
  rec.u = u;
  rec.w = w;
  rec.edges = edges.size();
  if (edges.size() >= 31) throw DataError("too many edges between one pair of variables");
  const std::size_t count = std::size_t{1} << edges.size();
  std::vector<BExpandedGraph> graphs;
  std::vector<FitResult> fits;
  std::vector<std::size_t> qualified_idx;
  for (std::size_t mask = 0; mask < count; ++mask) {
    BExpandedGraph g = current;
    for (std::size_t e = 0; e < edges.size(); ++e)
      if (mask >> e & 1) g.remove_edge(edges[e].first, edges[e].second);
    FitResult r = cache.fit(constraints_for_expanded(g));
    CandidateSummary cs{mask, r.converged, r.deviance, r.df, r.p_value, r.bic};
    rec.candidates.push_back(cs);
    if (r.converged) {
      qualified_idx.push_back(mask);
      graphs.push_back(std::move(g));
      fits.push_back(std::move(r));
    } else {
      ++rec.disqualified;
    }
  }
  if (fits.empty()) {
    rec.selected = 0;
    return {current, std::move(rec)};
  }
  const std::size_t pick = criterion(fits, alpha);
  rec.selected = qualified_idx[pick];
  return {std::move(graphs[pick]), std::move(rec)};
}

struct OrderingResult {
  std::vector<std::size_t> order;
  std::vector<StepRecord> steps;
  BExpandedGraph graph;
  ConstraintSet constraints;
  FitResult fit;
};

struct SearchTrace {
  std::vector<OrderingResult> orderings;
  std::size_t selected = 0;
  std::size_t fits_performed = 0;

  const OrderingResult& final_model() const { return orderings.at(selected); }
};

inline unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("LML_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

inline std::vector<std::vector<std::size_t>> search_orderings(std::size_t p, std::size_t max_orderings,
                                                              std::uint64_t seed) {
  std::vector<std::size_t> base(p);
  for (std::size_t k = 0; k < p; ++k) base[k] = k;
  // p! if it fits, else "infinite".
  std::uint64_t total = 1;
  for (std::size_t k = 2; k <= p && total <= (std::uint64_t{1} << 40); ++k) total *= k;
  std::vector<std::vector<std::size_t>> out;
  if (max_orderings == 0 || max_orderings >= total) {
    if (total > (std::uint64_t{1} << 24)) throw DataError("too many orderings; use a sampled subset");
    do {
      out.push_back(base);
    } while (std::next_permutation(base.begin(), base.end()));
    return out;
  }
  std::mt19937_64 rng(seed);
  std::set<std::vector<std::size_t>> seen;
  while (out.size() < max_orderings) {
    auto perm = base;
    std::shuffle(perm.begin(), perm.end(), rng);
    if (seen.insert(perm).second) out.push_back(std::move(perm));
  }
  return out;
}

// Upper bound on candidate fits: every step evaluated from the complete graph.
inline std::uint64_t estimated_fits(const TableSchema& s, Subset B, std::size_t orderings) {
  const auto complete = BExpandedGraph::complete(s, B);
  std::uint64_t per_ordering = 0;
  for (std::size_t u = 0; u < s.num_vars(); ++u)
    for (std::size_t w = u + 1; w < s.num_vars(); ++w) {
      const std::size_t e = complete.vertices_of(u).size() * complete.vertices_of(w).size();
      if (e >= 40) return ~std::uint64_t{0};
      per_ordering += std::uint64_t{1} << e;
    }
  if (per_ordering > 0 && orderings > (~std::uint64_t{0}) / per_ordering) return ~std::uint64_t{0};
  return per_ordering * orderings;
}

inline OrderingResult run_ordering(FitCache& cache, const TableSchema& s, Subset B, std::vector<std::size_t> order,
                                   double alpha) {
  BExpandedGraph g = BExpandedGraph::complete(s, B);
  std::vector<StepRecord> steps;
  for (std::size_t a = 0; a < order.size(); ++a)
    for (std::size_t b = a + 1; b < order.size(); ++b) {
      auto out = pairwise_step(cache, g, order[a], order[b], alpha);
      g = std::move(out.graph);
      steps.push_back(std::move(out.record));
    }
  ConstraintSet cs = constraints_for_expanded(g);
  FitResult fit = cache.fit(cs);
  return OrderingResult{std::move(order), std::move(steps), std::move(g), std::move(cs), std::move(fit)};
}

// Pairwise exhaustive search repeated over variable orderings; the final
// model is chosen among the per-ordering winners by the same criterion.
inline SearchTrace search(const CountTable& data, const SearchConfig& cfg) {
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw DataError("alpha must lie in (0, 1)");
  const auto& s = data.schema();
  if (!cfg.expand.subset_of(s.all_vars())) throw DataError("expansion set refers to unknown variables");
  auto orders = search_orderings(s.num_vars(), cfg.max_orderings, cfg.seed);
  if (estimated_fits(s, cfg.expand, orders.size()) > cfg.fit_budget)
    throw DataError("search would exceed the fit budget");

  FitCache cache(data, cfg.fit);
  std::vector<std::optional<OrderingResult>> results(orders.size());
  const unsigned nthreads = std::min<unsigned>(resolve_threads(cfg.threads), static_cast<unsigned>(orders.size()));
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr error;
  auto worker = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < orders.size();) {
      try {
        results[k] = run_ordering(cache, s, cfg.expand, orders[k], cfg.alpha);
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  SearchTrace trace;
  std::vector<FitResult> finals;
  for (auto& r : results) {
    finals.push_back(r->fit);
    trace.orderings.push_back(std::move(*r));
  }
  trace.selected = criterion(finals, cfg.alpha);
  trace.fits_performed = cache.fits_performed();
  return trace;
}

}  // namespace lml
