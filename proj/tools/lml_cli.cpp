// lml_cli: transform, fit, check and search discrete marginal independence
// models from the command line. Every run writes manifest.json next to its
// outputs.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lml/lml.hpp"

#ifndef LML_VERSION
#define LML_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using lml::ordered_json;

namespace {

enum Exit { kOk = 0, kUsage = 2, kData = 3, kNoConvergence = 4 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t fnv1a(const std::string& bytes, std::uint64_t h = 14695981039346656037ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

struct Options {
  std::string counts, probs, schema, graph, out_dir = ".";
  std::vector<std::string> expand;
  std::string direction = "lml";
  std::string orderings = "all";
  double smoothing = 0.0;
  double tol = 1e-8;
  double alpha = 0.05;
  int max_iter = 500;
  std::uint64_t seed = 0;
};

class Run {
 public:
  Run(std::string command, const Options& o) : command_(std::move(command)), o_(o) {}

  void input(const std::string& role, const std::string& path) {
    if (path.empty()) return;
    inputs_.push_back({{"role", role}, {"path", path}, {"fnv1a", hex64(fnv1a(lml::read_file(path)))}});
  }

  void write(const std::string& name, const std::string& content) {
    fs::create_directories(o_.out_dir);
    const fs::path p = fs::path(o_.out_dir) / name;
    std::ofstream out(p, std::ios::binary);
    if (!out) throw lml::DataError("cannot write '" + p.string() + "'");
    out << content;
    outputs_.push_back(name);
  }

  void write_json(const std::string& name, const ordered_json& j) { write(name, j.dump(2) + "\n"); }

  void finish(const ordered_json& config) {
    ordered_json m;
    m["schema_version"] = lml::kOutputSchemaVersion;
    m["command"] = command_;
    m["version"] = LML_VERSION;
    m["inputs"] = inputs_;
    m["config"] = config;
    std::uint64_t h = fnv1a(command_);
    h = fnv1a(config.dump(), h);
    for (const auto& in : inputs_) h = fnv1a(in["fnv1a"].get<std::string>(), h);
    m["config_hash"] = hex64(h);
    outputs_.push_back("manifest.json");
    m["outputs"] = outputs_;
    const auto name = outputs_.back();
    outputs_.pop_back();
    write_json(name, m);
  }

 private:
  std::string command_;
  const Options& o_;
  ordered_json inputs_ = ordered_json::array();
  std::vector<std::string> outputs_;
};

// Schema, counts and B after applying --expand v[:baseline] overrides.
struct Prepared {
  std::optional<lml::CountTable> counts;
  std::optional<lml::ProbTable> probs;
  std::optional<lml::GraphSpec> graph;
  lml::Subset B;
};

lml::TableSchema apply_expand(lml::TableSchema s, const std::vector<std::string>& expand, lml::Subset& B) {
  for (const auto& item : expand) {
    const auto colon = item.find(':');
    const auto id = item.substr(0, colon);
    const auto v = s.var_index(id);
    if (colon != std::string::npos) s = s.with_baseline(v, s.var(v).level_index(item.substr(colon + 1)));
    B = B.with(static_cast<unsigned>(v));
  }
  return s;
}

Prepared prepare(const Options& o, bool need_counts) {
  Prepared p;
  std::optional<lml::TableSchema> schema;
  if (!o.schema.empty()) schema = lml::load_schema(o.schema);
  if (!o.counts.empty()) {
    p.counts = lml::load_counts(o.counts, schema);
    schema = p.counts->schema();
  } else if (!o.probs.empty()) {
    p.probs = lml::parse_probs(lml::read_file(o.probs), schema);
    schema = p.probs->schema();
  } else if (need_counts) {
    throw UsageError("--counts is required");
  } else {
    throw UsageError("--counts or --probs is required");
  }
  std::vector<std::string> expand = o.expand;
  if (!o.graph.empty()) {
    p.graph = lml::load_graph_spec(o.graph);
    for (const auto& id : p.graph->expand) expand.push_back(id);
  }
  const auto s = apply_expand(*schema, expand, p.B);
  if (p.counts) p.counts = lml::CountTable(s, p.counts->counts());
  if (p.probs) p.probs = lml::ProbTable(s, p.probs->probs());
  return p;
}

lml::BExpandedGraph model_graph(const Prepared& p, const lml::TableSchema& s) {
  if (!p.graph) return lml::BExpandedGraph::complete(s, p.B);
  lml::GraphSpec spec = *p.graph;
  spec.expand.clear();
  for (unsigned v : p.B.elements()) spec.expand.push_back(s.var(v).id);
  return lml::build_graph(spec, s);
}

ordered_json fit_to_json(const lml::FitResult& r, const lml::ConstraintSet& cs) {
  ordered_json j;
  j["schema_version"] = lml::kOutputSchemaVersion;
  j["deviance"] = r.deviance;
  j["df"] = r.df;
  j["p_value"] = r.p_value;
  j["bic"] = r.bic;
  j["loglik"] = r.loglik;
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  j["grad_norm"] = r.grad_norm;
  j["constraint_residual"] = r.constraint_residual;
  j["free_parameters"] = r.free_parameters;
  j["constraints"] = cs.keys();
  j["fitted"] = lml::prob_to_json(r.fitted);
  j["gamma_hat"] = r.gamma_hat ? lml::param_to_json(*r.gamma_hat) : ordered_json(nullptr);
  return j;
}

std::string summary_line(const lml::FitResult& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "deviance=%.2f df=%d p=%.4f bic=%.2f converged=%s", r.deviance, r.df, r.p_value, r.bic,
                r.converged ? "true" : "false");
  return buf;
}

ordered_json base_config(const Options& o) {
  ordered_json c;
  c["expand"] = o.expand;
  return c;
}

int cmd_transform(const Options& o) {
  if (o.direction != "prob" && o.direction != "moebius" && o.direction != "lml")
    throw UsageError("--direction must be prob, moebius or lml");
  if (!(o.smoothing >= 0.0)) throw UsageError("--smoothing must be non-negative");
  Run run("transform", o);
  run.input("counts", o.counts);
  run.input("schema", o.schema);
  auto p = prepare(o, true);
  const auto table = lml::empirical_prob(*p.counts, o.smoothing);
  ordered_json out;
  out["schema_version"] = lml::kOutputSchemaVersion;
  out["direction"] = o.direction;
  out["schema"] = lml::schema_to_json(table.schema());
  if (o.direction == "prob")
    out["values"] = lml::prob_to_json(table);
  else if (o.direction == "moebius")
    out["values"] = lml::param_to_json(lml::prob_to_moebius(table, lml::ZeroPolicy::allow));
  else
    out["values"] = lml::param_to_json(lml::prob_to_lml(table));
  run.write_json("transform.json", out);
  std::cout << out.dump(2) << "\n";
  auto cfg = base_config(o);
  cfg["direction"] = o.direction;
  cfg["smoothing"] = o.smoothing;
  run.finish(cfg);
  return kOk;
}

int cmd_fit(const Options& o) {
  Run run("fit", o);
  run.input("counts", o.counts);
  run.input("schema", o.schema);
  run.input("graph", o.graph);
  auto p = prepare(o, true);
  const auto& s = p.counts->schema();
  const auto g = model_graph(p, s);
  const auto cs = lml::constraints_for_expanded(g);
  lml::FitOptions fo;
  fo.tol = o.tol;
  fo.max_iter = o.max_iter;
  const auto r = lml::fit_mle(*p.counts, lml::ModelSpec(s, cs, o.graph.empty() ? "saturated" : o.graph), fo);
  auto j = fit_to_json(r, cs);
  j["graph"] = lml::graph_to_json(g);
  run.write_json("fit.json", j);
  std::cout << summary_line(r) << "\n";
  auto cfg = base_config(o);
  cfg["tol"] = o.tol;
  cfg["max_iter"] = o.max_iter;
  run.finish(cfg);
  return r.converged ? kOk : kNoConvergence;
}

int cmd_check(const Options& o) {
  Run run("check", o);
  run.input("counts", o.counts);
  run.input("probs", o.probs);
  run.input("schema", o.schema);
  run.input("graph", o.graph);
  auto p = prepare(o, false);
  const lml::ProbTable table = p.counts ? lml::empirical_prob(*p.counts, o.smoothing) : *p.probs;
  const auto& s = table.schema();
  const auto cs = lml::constraints_for_expanded(model_graph(p, s));
  const auto mc = lml::holds_markov(table, cs, o.tol);
  ordered_json rows = ordered_json::array();
  std::size_t violations = 0;
  for (const auto& [idx, v] : mc.values) {
    const bool bad = std::abs(v) > o.tol;
    violations += bad ? 1 : 0;
    rows.push_back({{"index", idx.key(s)}, {"value", v}, {"violation", bad}});
    char buf[64];
    std::snprintf(buf, sizeof buf, "%+.6e", v);
    std::cout << idx.key(s) << "\t" << buf << (bad ? "\tviolation" : "") << "\n";
  }
  ordered_json out;
  out["schema_version"] = lml::kOutputSchemaVersion;
  out["tol"] = o.tol;
  out["constraints"] = cs.size();
  out["violations"] = violations;
  out["max_abs_value"] = mc.max_violation;
  out["holds"] = mc.holds;
  out["values"] = rows;
  run.write_json("check.json", out);
  std::cout << "constraints=" << cs.size() << " violations=" << violations << " holds=" << (mc.holds ? "true" : "false")
            << "\n";
  auto cfg = base_config(o);
  cfg["tol"] = o.tol;
  cfg["smoothing"] = o.smoothing;
  run.finish(cfg);
  return kOk;
}

ordered_json step_to_json(const lml::StepRecord& st, const lml::TableSchema& s) {
  ordered_json cands = ordered_json::array();
  for (const auto& c : st.candidates)
    cands.push_back({{"removed", c.removed_mask},
                     {"converged", c.qualified},
                     {"deviance", c.deviance},
                     {"df", c.df},
                     {"p_value", c.p_value},
                     {"bic", c.bic}});
  return {{"pair", {s.var(st.u).id, s.var(st.w).id}},
          {"edges", st.edges},
          {"disqualified", st.disqualified},
          {"selected", st.selected},
          {"candidates", cands}};
}

int cmd_search(const Options& o) {
  if (!(o.alpha > 0.0 && o.alpha < 1.0)) throw UsageError("--alpha must lie in (0, 1)");
  lml::SearchConfig cfg;
  if (o.orderings != "all") {
    try {
      std::size_t used = 0;
      const long long n = std::stoll(o.orderings, &used);
      if (used != o.orderings.size() || n <= 0) throw std::invalid_argument("");
      cfg.max_orderings = static_cast<std::size_t>(n);
    } catch (const std::exception&) {
      throw UsageError("--orderings must be 'all' or a positive integer");
    }
  }
  Run run("search", o);
  run.input("counts", o.counts);
  run.input("schema", o.schema);
  auto p = prepare(o, true);
  const auto& s = p.counts->schema();
  cfg.alpha = o.alpha;
  cfg.expand = p.B;
  cfg.seed = o.seed;
  cfg.fit.tol = o.tol;
  cfg.fit.max_iter = o.max_iter;
  const auto trace = lml::search(*p.counts, cfg);
  const auto& best = trace.final_model();

  std::string lines;
  for (const auto& ord : trace.orderings) {
    ordered_json line;
    ordered_json ids = ordered_json::array();
    for (auto v : ord.order) ids.push_back(s.var(v).id);
    line["ordering"] = ids;
    ordered_json steps = ordered_json::array();
    for (const auto& st : ord.steps) steps.push_back(step_to_json(st, s));
    line["steps"] = steps;
    line["final"] = {{"deviance", ord.fit.deviance}, {"df", ord.fit.df}, {"p_value", ord.fit.p_value}, {"bic", ord.fit.bic}};
    lines += line.dump() + "\n";
  }
  lines += ordered_json{{"selected_ordering", trace.selected}, {"distinct_fits", trace.fits_performed}}.dump() + "\n";

  auto graph_json = lml::graph_to_json(best.graph);
  graph_json["schema_version"] = lml::kOutputSchemaVersion;
  run.write_json("graph.json", graph_json);
  run.write("graph.dot", lml::export_dot(best.graph));
  run.write("trace.jsonl", lines);
  auto fj = fit_to_json(best.fit, best.constraints);
  fj["graph"] = lml::graph_to_json(best.graph);
  run.write_json("fit.json", fj);
  std::cout << summary_line(best.fit) << "\n";

  auto c = base_config(o);
  c["alpha"] = o.alpha;
  c["tol"] = o.tol;
  c["max_iter"] = o.max_iter;
  c["seed"] = o.seed;
  c["orderings"] = o.orderings;
  run.finish(c);
  return best.fit.converged ? kOk : kNoConvergence;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete marginal independence models in log-mean linear parameterization"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(LML_VERSION));
  Options o;

  auto add_data = [&](CLI::App* sub) {
    sub->add_option("--counts", o.counts, "Long-format CSV with a 'count' column");
    sub->add_option("--schema", o.schema, "Schema JSON (level order and baselines)");
    sub->add_option("--expand", o.expand, "Expand variable v, optionally re-baselined as v:level");
    sub->add_option("--out-dir", o.out_dir, "Directory for outputs and manifest.json")->capture_default_str();
  };
  auto add_fit = [&](CLI::App* sub) {
    sub->add_option("--tol", o.tol, "Convergence tolerance on the gradient")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--max-iter", o.max_iter, "Iteration cap")->capture_default_str()->check(CLI::PositiveNumber);
  };

  auto* transform = app.add_subcommand("transform", "Empirical probabilities, Moebius or LML parameters");
  add_data(transform);
  transform->add_option("--direction", o.direction, "prob, moebius or lml")->capture_default_str();
  transform->add_option("--smoothing", o.smoothing, "Pseudo-count added to every cell")->capture_default_str();

  auto* fit = app.add_subcommand("fit", "Maximum-likelihood fit of a graph model");
  add_data(fit);
  add_fit(fit);
  fit->add_option("--graph", o.graph, "Graph JSON; omitted means the complete graph");

  auto* check = app.add_subcommand("check", "Report the constrained LML values of a table");
  add_data(check);
  check->add_option("--probs", o.probs, "Long-format CSV with a 'prob' column");
  check->add_option("--graph", o.graph, "Graph JSON")->required();
  check->add_option("--tol", o.tol, "Violation threshold")->capture_default_str();
  check->add_option("--smoothing", o.smoothing, "Pseudo-count added to every cell")->capture_default_str();

  auto* search = app.add_subcommand("search", "Pairwise exhaustive structure search");
  add_data(search);
  add_fit(search);
  search->add_option("--alpha", o.alpha, "p-value floor")->capture_default_str();
  search->add_option("--seed", o.seed, "Seed for sampled orderings")->capture_default_str();
  search->add_option("--orderings", o.orderings, "'all' or the number of sampled orderings")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*transform) return cmd_transform(o);
    if (*fit) return cmd_fit(o);
    if (*check) return cmd_check(o);
    return cmd_search(o);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  }
}
