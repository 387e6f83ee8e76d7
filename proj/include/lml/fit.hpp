#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/special_functions/gamma.hpp>

#include "lml/error.hpp"
#include "lml/graph.hpp"
#include "lml/tables.hpp"
#include "lml/transform.hpp"

namespace lml {

// Upper tail of the chi-squared distribution, Q(df/2, x/2). df = 0 is the
// saturated model and returns 1.
inline double chisq_upper_tail(double x, int df) {
  if (df < 0) throw DomainError("chi-squared degrees of freedom must be non-negative");
  if (df == 0) return 1.0;
  if (!(x > 0.0)) return 1.0;
  return boost::math::gamma_q(0.5 * df, 0.5 * x);
}

inline double bic(double deviance, int df, std::uint64_t n) {
  if (n < 1) throw DomainError("bic needs n >= 1");
  return deviance - df * std::log(static_cast<double>(n));
}

struct ModelSpec {
  TableSchema schema;
  ConstraintSet constraints;
  std::optional<std::string> provenance;

  ModelSpec(TableSchema s, ConstraintSet c, std::optional<std::string> origin = std::nullopt)
      : schema(std::move(s)), constraints(std::move(c)), provenance(std::move(origin)) {
    if (!(constraints.schema() == schema) && !constraints.empty())
      throw DataError("constraint set schema does not match model schema");
  }

  static ModelSpec saturated(const TableSchema& s) { return ModelSpec(s, ConstraintSet(s, {})); }

  std::size_t free_parameters() const { return schema.cell_count() - 1 - constraints.size(); }

  // Unconstrained indices as cell slots, canonical order.
  std::vector<std::size_t> free_slots() const {
    std::vector<std::size_t> out;
    for (auto c : canonical_slots(schema))
      if (!constraints.contains(c)) out.push_back(c);
    return out;
  }
};

struct FitOptions {
  double tol = 1e-8;
  int max_iter = 500;
  // Additive smoothing used only to initialize fits on data with empty cells.
  double init_smoothing = 0.5;
};

struct FitResult {
  ProbTable fitted;
  std::optional<LmlParam> gamma_hat;
  double loglik = 0.0;
  double deviance = 0.0;
  int df = 0;
  double p_value = 1.0;
  double bic = 0.0;
  int iterations = 0;
  bool converged = false;
  double grad_norm = 0.0;
  double constraint_residual = 0.0;
  std::size_t free_parameters = 0;
};

namespace detail {

// Transposed per-variable pass of lml_to_moebius: the baseline position
// collects the whole fiber.
inline void lml_passes_transposed(const TableSchema& s, std::vector<double>& x) {
  for (std::size_t v = 0; v < s.num_vars(); ++v) {
    const std::size_t b = s.var(v).baseline;
    for_each_fiber(s, v, [&](std::size_t first, std::size_t stride, std::size_t size) {
      double sum = 0.0;
      for (std::size_t k = 0; k < size; ++k) sum += x[first + k * stride];
      x[first + b * stride] = sum;
    });
  }
}

// Multinomial log-likelihood as a function of the free gamma coordinates.
class Likelihood {
 public:
  Likelihood(const CountTable& data, const ModelSpec& model)
      : schema_(model.schema), free_(model.free_slots()), counts_(data.counts().begin(), data.counts().end()),
        n_(static_cast<double>(data.total())) {
    if (!(data.schema() == model.schema)) throw DataError("data schema does not match model schema");
  }

  std::size_t dim() const { return free_.size(); }
  const std::vector<std::size_t>& free_slots() const { return free_; }
  const TableSchema& schema() const { return schema_; }

  std::vector<double> full_gamma(const Eigen::VectorXd& x) const {
    std::vector<double> g(schema_.cell_count(), 0.0);
    for (std::size_t k = 0; k < free_.size(); ++k) g[free_[k]] = x[static_cast<Eigen::Index>(k)];
    return g;
  }

  Eigen::VectorXd free_part(const std::vector<double>& g) const {
    Eigen::VectorXd x(static_cast<Eigen::Index>(free_.size()));
    for (std::size_t k = 0; k < free_.size(); ++k) x[static_cast<Eigen::Index>(k)] = g[free_[k]];
    return x;
  }

  struct Point {
    bool valid = false;
    double loglik = -std::numeric_limits<double>::infinity();
    std::vector<double> mu;
    std::vector<double> prob;
  };

  Point evaluate(const Eigen::VectorXd& x) const {
    Point pt;
    std::vector<double> logmu = full_gamma(x);
    lml_passes(schema_, logmu, false);
    pt.mu.resize(logmu.size());
    for (std::size_t c = 0; c < logmu.size(); ++c) {
      pt.mu[c] = std::exp(logmu[c]);
      if (!std::isfinite(pt.mu[c])) return pt;
    }
    pt.prob = pt.mu;
    moebius_prob_passes(schema_, pt.prob);
    double ll = 0.0;
    for (std::size_t c = 0; c < pt.prob.size(); ++c) {
      if (!(pt.prob[c] > 0.0) || !std::isfinite(pt.prob[c])) return pt;
      if (counts_[c] > 0.0) ll += counts_[c] * std::log(pt.prob[c]);
    }
    pt.valid = true;
    pt.loglik = ll;
    return pt;
  }

  // Chain rule through prob = A exp(C gamma): grad = C^T (mu ⊙ A^T (n / prob)).
  Eigen::VectorXd gradient(const Point& pt) const {
    std::vector<double> w(pt.prob.size());
    for (std::size_t c = 0; c < w.size(); ++c) w[c] = counts_[c] / pt.prob[c];
    lml_passes(schema_, w, true);
    for (std::size_t c = 0; c < w.size(); ++c) w[c] *= pt.mu[c];
    lml_passes_transposed(schema_, w);
    return free_part(w);
  }

  // Expected information n J^T diag(1/prob) J with J = d prob / d gamma_free.
  Eigen::MatrixXd fisher(const Point& pt) const {
    const auto cells = static_cast<Eigen::Index>(pt.prob.size());
    const auto k = static_cast<Eigen::Index>(free_.size());
    Eigen::MatrixXd J(cells, k);
    std::vector<double> col(pt.prob.size());
    for (Eigen::Index j = 0; j < k; ++j) {
      std::fill(col.begin(), col.end(), 0.0);
      col[free_[static_cast<std::size_t>(j)]] = 1.0;
      lml_passes(schema_, col, false);
      for (std::size_t c = 0; c < col.size(); ++c) col[c] *= pt.mu[c];
      moebius_prob_passes(schema_, col);
      for (Eigen::Index c = 0; c < cells; ++c) J(c, j) = col[static_cast<std::size_t>(c)];
    }
    Eigen::VectorXd wts(cells);
    for (Eigen::Index c = 0; c < cells; ++c) wts[c] = n_ / pt.prob[static_cast<std::size_t>(c)];
    return J.transpose() * wts.asDiagonal() * J;
  }

  double total() const { return n_; }
  const std::vector<double>& counts() const { return counts_; }

 private:
  TableSchema schema_;
  std::vector<std::size_t> free_;
  std::vector<double> counts_;
  double n_;
};

inline Eigen::MatrixXd inverse_spd(const Eigen::MatrixXd& F) {
  const auto k = F.rows();
  Eigen::LDLT<Eigen::MatrixXd> ldlt(F);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
    Eigen::MatrixXd inv = ldlt.solve(Eigen::MatrixXd::Identity(k, k));
    if (inv.allFinite()) return inv;
  }
  const double scale = F.diagonal().cwiseAbs().maxCoeff();
  return Eigen::MatrixXd::Identity(k, k) / (scale > 0.0 ? scale : 1.0);
}

inline double deviance_of(const std::vector<double>& counts, double n, const std::vector<double>& fitted) {
  double dev = 0.0;
  for (std::size_t c = 0; c < counts.size(); ++c)
    if (counts[c] > 0.0) dev += counts[c] * std::log(counts[c] / (n * fitted[c]));
  return 2.0 * dev;
}

}  // namespace detail

// Free coordinates of the model in the order used by loglik_gradient.
inline std::vector<GammaIndex> free_coordinates(const ModelSpec& model) {
  std::vector<GammaIndex> out;
  for (auto c : model.free_slots()) out.push_back(GammaIndex::from_cell(model.schema, c));
  return out;
}

inline double loglik(const std::vector<double>& gamma_free, const CountTable& data, const ModelSpec& model) {
  detail::Likelihood lik(data, model);
  if (gamma_free.size() != lik.dim()) throw DataError("gamma vector has the wrong number of free coordinates");
  auto pt = lik.evaluate(Eigen::Map<const Eigen::VectorXd>(gamma_free.data(), static_cast<Eigen::Index>(gamma_free.size())));
  if (!pt.valid) throw DomainError("parameters do not define a strictly positive table");
  return pt.loglik;
}

inline std::vector<double> loglik_gradient(const std::vector<double>& gamma_free, const CountTable& data,
                                           const ModelSpec& model) {
  detail::Likelihood lik(data, model);
  if (gamma_free.size() != lik.dim()) throw DataError("gamma vector has the wrong number of free coordinates");
  auto pt = lik.evaluate(Eigen::Map<const Eigen::VectorXd>(gamma_free.data(), static_cast<Eigen::Index>(gamma_free.size())));
  if (!pt.valid) throw DomainError("parameters do not define a strictly positive table");
  Eigen::VectorXd g = lik.gradient(pt);
  return std::vector<double>(g.data(), g.data() + g.size());
}

// Maximizes the multinomial likelihood over the free gamma coordinates by
// BFGS ascent. The inverse-Hessian estimate starts from the inverse expected
// information, and the backtracking line search rejects steps leaving the
// region of strictly positive tables.
inline FitResult fit_mle(const CountTable& data, const ModelSpec& model, const FitOptions& opts = {}) {
  if (!(data.schema() == model.schema)) throw DataError("data schema does not match model schema");
  const double n = static_cast<double>(data.total());
  const int df = static_cast<int>(model.constraints.size());

  auto finish = [&](ProbTable fitted, std::optional<LmlParam> g, double ll, int iters, bool conv, double gnorm) {
    std::vector<double> counts(data.counts().begin(), data.counts().end());
    FitResult r{std::move(fitted), std::move(g)};
    r.loglik = ll;
    r.deviance = detail::deviance_of(counts, n, r.fitted.probs());
    r.df = df;
    r.p_value = chisq_upper_tail(r.deviance, df);
    r.bic = bic(r.deviance, df, data.total());
    r.iterations = iters;
    r.converged = conv;
    r.grad_norm = gnorm;
    r.free_parameters = model.free_parameters();
    if (r.fitted.strictly_positive() && !model.constraints.empty()) {
      const LmlParam check = prob_to_lml(r.fitted);
      for (auto c : model.constraints.slots()) r.constraint_residual = std::max(r.constraint_residual, std::abs(check.at_cell(c)));
    }
    return r;
  };

  if (model.constraints.empty()) {
    ProbTable emp = empirical_prob(data);
    double ll = 0.0;
    for (std::size_t c = 0; c < emp.size(); ++c)
      if (data.count(c) > 0) ll += static_cast<double>(data.count(c)) * std::log(emp[c]);
    std::optional<LmlParam> g;
    if (emp.strictly_positive()) g = prob_to_lml(emp);
    auto r = finish(std::move(emp), std::move(g), ll, 0, true, 0.0);
    r.deviance = 0.0;
    r.p_value = 1.0;
    r.bic = 0.0;
    return r;
  }

  detail::Likelihood lik(data, model);
  const auto k = static_cast<Eigen::Index>(lik.dim());

  // Initialization: empirical gamma with constrained coordinates zeroed,
  // falling back to the uniform table.
  const ProbTable start_table = empirical_prob(data, data.has_zero_cells() ? opts.init_smoothing : 0.0);
  Eigen::VectorXd x = lik.free_part(prob_to_lml(start_table).values());
  auto pt = lik.evaluate(x);
  if (!pt.valid) {
    std::vector<double> uniform(model.schema.cell_count(), 1.0 / static_cast<double>(model.schema.cell_count()));
    x = lik.free_part(prob_to_lml(ProbTable(model.schema, std::move(uniform))).values());
    pt = lik.evaluate(x);
  }
  if (!pt.valid) throw DomainError("could not find a feasible starting point");

  Eigen::VectorXd g = lik.gradient(pt);
  Eigen::MatrixXd H = detail::inverse_spd(lik.fisher(pt));
  int iter = 0;
  bool converged = g.lpNorm<Eigen::Infinity>() <= opts.tol;
  bool fresh_H = true;

  while (!converged && iter < opts.max_iter) {
    Eigen::VectorXd d = H * g;
    double slope = g.dot(d);
    if (!(slope > 0.0)) {
      H = detail::inverse_spd(lik.fisher(pt));
      fresh_H = true;
      d = H * g;
      slope = g.dot(d);
    }
    double t = 1.0;
    bool accepted = false;
    detail::Likelihood::Point next;
    Eigen::VectorXd x_new;
    const double noise = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(pt.loglik));
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      x_new = x + t * d;
      next = lik.evaluate(x_new);
      if (!next.valid) continue;
      const double gain = next.loglik - pt.loglik;
      // Near the optimum the Armijo gain drops below rounding noise in the
      // log-likelihood; accept any step that does not measurably decrease it.
      if (gain >= 1e-4 * t * slope || (t * slope <= noise && gain >= -noise)) {
        accepted = true;
        break;
      }
    }
    ++iter;
    if (!accepted) {
      if (fresh_H) break;
      H = detail::inverse_spd(lik.fisher(pt));
      fresh_H = true;
      continue;
    }
    Eigen::VectorXd g_new = lik.gradient(next);
    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g - g_new;  // gradient change of -loglik
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(k, k);
      H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) + rho * s * s.transpose();
      fresh_H = false;
    } else {
      H = detail::inverse_spd(lik.fisher(next));
      fresh_H = true;
    }
    x = std::move(x_new);
    pt = std::move(next);
    g = std::move(g_new);
    converged = g.lpNorm<Eigen::Infinity>() <= opts.tol;
  }

  std::vector<double> full = lik.full_gamma(x);
  LmlParam gamma_hat(model.schema, full);
  ProbTable fitted(model.schema, pt.prob);
  return finish(std::move(fitted), std::move(gamma_hat), pt.loglik, iter, converged, g.lpNorm<Eigen::Infinity>());
}

}  // namespace lml
