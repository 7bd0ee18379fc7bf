#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "lpattack/attack.hpp"
#include "lpattack/data.hpp"
#include "lpattack/errors.hpp"
#include "lpattack/graph.hpp"
#include "lpattack/influence.hpp"
#include "lpattack/victim.hpp"

namespace lpattack {

inline constexpr int kSummarySchemaVersion = 1;

struct ExperimentConfig {
  std::string bundle;              // bundle directory; empty when `sbm` is set
  std::optional<SbmParams> sbm;    // generate the graph instead of loading it
  int depth = 2;
  std::vector<int> budgets{1, 2, 3, 4, 5, 6};
  GainMode mode = GainMode::approx;
  LabelSource label_source = LabelSource::estimated_labels;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  TrainingConfig victim;
  bool early_stop = true;
  bool require_positive_gain = false;
  std::size_t candidate_cap = 0;
  std::size_t train_per_class = 20;
  std::size_t num_targets = 100;

  int max_budget() const { return budgets.back(); }

  void validate() const {
    if (budgets.empty()) throw UsageError("budgets must not be empty");
    for (std::size_t i = 0; i < budgets.size(); ++i) {
      if (budgets[i] < 1) throw UsageError("budgets must be positive");
      if (i > 0 && budgets[i] <= budgets[i - 1]) throw UsageError("budgets must be strictly increasing");
    }
    if (depth < 1 || depth > kMaxDepth) throw UsageError("k must lie in [1, " + std::to_string(kMaxDepth) + "]");
    if (workers < 1) throw UsageError("workers must be at least 1");
    if (num_targets < 1) throw UsageError("num_targets must be at least 1");
  }
};

inline GainMode parse_mode(const std::string& s) {
  if (s == "approx") return GainMode::approx;
  if (s == "exact") return GainMode::exact;
  throw UsageError("unknown mode '" + s + "' (expected approx or exact)");
}

inline LabelSource parse_label_source(const std::string& s) {
  if (s == "true" || s == "true_labels" || s == "KL") return LabelSource::true_labels;
  if (s == "estimated" || s == "estimated_labels" || s == "UL") return LabelSource::estimated_labels;
  throw UsageError("unknown label source '" + s + "' (expected true or estimated)");
}

inline nlohmann::ordered_json to_json(const SbmParams& p) {
  return {{"classes", p.classes},         {"per_class", p.per_class}, {"p_in", p.p_in}, {"p_out", p.p_out},
          {"feature_dim", p.feature_dim}, {"noise", p.noise},         {"seed", p.seed}};
}

inline SbmParams sbm_from_json(const nlohmann::json& j) {
  SbmParams p;
  p.classes = j.value("classes", p.classes);
  p.per_class = j.value("per_class", p.per_class);
  p.p_in = j.value("p_in", p.p_in);
  p.p_out = j.value("p_out", p.p_out);
  p.feature_dim = j.value("feature_dim", p.feature_dim);
  p.noise = j.value("noise", p.noise);
  p.seed = j.value("seed", p.seed);
  return p;
}

inline nlohmann::ordered_json to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  if (!c.bundle.empty()) j["bundle"] = c.bundle;
  if (c.sbm) j["sbm"] = to_json(*c.sbm);
  j["k"] = c.depth;
  j["budgets"] = c.budgets;
  j["mode"] = to_string(c.mode);
  j["label_source"] = to_string(c.label_source);
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  j["victim"] = {{"lr", c.victim.lr}, {"epochs", c.victim.epochs}, {"l2", c.victim.l2}};
  j["early_stop"] = c.early_stop;
  j["require_positive_gain"] = c.require_positive_gain;
  j["candidate_cap"] = c.candidate_cap;
  j["train_per_class"] = c.train_per_class;
  j["num_targets"] = c.num_targets;
  return j;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  try {
    c.bundle = j.value("bundle", std::string{});
    if (j.contains("sbm")) c.sbm = sbm_from_json(j.at("sbm"));
    c.depth = j.value("k", c.depth);
    c.budgets = j.value("budgets", c.budgets);
    c.mode = parse_mode(j.value("mode", std::string("approx")));
    c.label_source = parse_label_source(j.value("label_source", std::string("estimated")));
    c.seed = j.value("seed", c.seed);
    c.workers = j.value("workers", c.workers);
    if (j.contains("victim")) {
      const auto& v = j.at("victim");
      c.victim.lr = v.value("lr", c.victim.lr);
      c.victim.epochs = v.value("epochs", c.victim.epochs);
      c.victim.l2 = v.value("l2", c.victim.l2);
    }
    c.early_stop = j.value("early_stop", c.early_stop);
    c.require_positive_gain = j.value("require_positive_gain", c.require_positive_gain);
    c.candidate_cap = j.value("candidate_cap", c.candidate_cap);
    c.train_per_class = j.value("train_per_class", c.train_per_class);
    c.num_targets = j.value("num_targets", c.num_targets);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed config: " + std::string(e.what()));
  }
  if (c.bundle.empty() && !c.sbm) throw DataError("config needs either \"bundle\" or \"sbm\"");
  c.victim.seed = c.seed;
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed config: " + std::string(e.what()));
  }
  auto c = config_from_json(j);
  if (!c.bundle.empty() && std::filesystem::path(c.bundle).is_relative())
    c.bundle = (path.parent_path() / c.bundle).string();
  return c;
}

// The graph an experiment config describes, loaded or generated.
inline Graph materialize_graph(const ExperimentConfig& c, std::vector<std::string>* warnings = nullptr) {
  if (c.sbm) return generate_sbm(*c.sbm);
  auto bundle = load_bundle(c.bundle);
  if (warnings) *warnings = bundle.warnings;
  return std::move(bundle.graph);
}

/// Runs f(i) for i in [0, count) on `workers` threads pulling from a shared
/// counter. The first exception is rethrown after every worker joined.
template <class F>
void parallel_for(std::size_t count, std::size_t workers, F&& f) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next++; i < count; i = next++) f(i);
      } catch (...) {
        errors[w] = std::current_exception();
        next = count;
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Victim, split and attack labels shared read-only by every target.
struct PreparedExperiment {
  const Graph* graph = nullptr;
  SparseRows features;
  Matrix propagated;
  SgcModel model;
  ExperimentSplit split;
  std::vector<ClassId> clean_predictions;
  std::vector<ClassId> attack_labels;
  double test_accuracy = 0.0;
  double label_agreement = 0.0;  // attack labels vs stored labels, labeled nodes
};

namespace detail {

// Fills test accuracy (labeled non-training nodes) and attack-label agreement.
inline void score_victim(const Graph& g, PreparedExperiment& prep) {
  std::size_t tested = 0, correct = 0, labeled = 0, agree = 0;
  for (NodeId u = 0; u < g.num_nodes(); ++u) {
    if (g.label(u) == kUnlabeled) continue;
    ++labeled;
    agree += prep.attack_labels[u] == g.label(u);
    if (std::binary_search(prep.split.train_ids.begin(), prep.split.train_ids.end(), u)) continue;
    ++tested;
    correct += prep.clean_predictions[u] == g.label(u);
  }
  prep.test_accuracy = tested ? static_cast<double>(correct) / static_cast<double>(tested) : 0.0;
  prep.label_agreement = labeled ? static_cast<double>(agree) / static_cast<double>(labeled) : 0.0;
}

}  // namespace detail

inline PreparedExperiment prepare_experiment(const Graph& g, const ExperimentConfig& c) {
  c.validate();
  PreparedExperiment prep;
  prep.graph = &g;
  prep.features = node_features(g);
  prep.propagated = sgc_propagate(g, prep.features, c.depth);
  TrainingConfig training = c.victim;
  training.seed = c.seed;
  auto trainer = [&](std::span<const NodeId> train_ids) {
    TrainedVictim tv;
    tv.model = sgc_train(prep.propagated, train_ids, g.labels(), g.num_classes(), training, c.depth);
    tv.predictions = tv.model.predict(prep.propagated);
    return tv;
  };
  auto sampled = sample_split(g, trainer, c.train_per_class, c.num_targets, c.seed);
  prep.split = std::move(sampled.split);
  prep.model = std::move(sampled.victim.model);
  prep.clean_predictions = std::move(sampled.victim.predictions);
  prep.attack_labels = resolve_labels(g, &prep.model, &prep.propagated, c.label_source);
  detail::score_victim(g, prep);
  return prep;
}

/// Prepares an experiment around an already trained victim, without split
/// sampling. `train_ids` only feed the reported test accuracy.
inline PreparedExperiment prepare_with_model(const Graph& g, SgcModel model, LabelSource source,
                                             std::vector<NodeId> train_ids = {}) {
  model.require_trained();
  PreparedExperiment prep;
  prep.graph = &g;
  prep.features = node_features(g);
  if (prep.features.cols != model.num_features())
    throw DataError("model expects " + std::to_string(model.num_features()) + " features, graph has " +
                    std::to_string(prep.features.cols));
  if (model.num_classes() != g.num_classes()) throw DataError("model class count does not match the graph");
  prep.propagated = sgc_propagate(g, prep.features, model.depth);
  prep.model = std::move(model);
  std::sort(train_ids.begin(), train_ids.end());
  prep.split.train_ids = std::move(train_ids);
  prep.clean_predictions = prep.model.predict(prep.propagated);
  prep.attack_labels = resolve_labels(g, &prep.model, &prep.propagated, source);
  detail::score_victim(g, prep);
  return prep;
}

/// Plans an attack on one target against the prepared victim. The target
/// label defaults to the victim's second most probable class.
inline AttackPlan attack_target(const PreparedExperiment& prep, NodeId v, const AttackOptions& options, int depth,
                                LabelSource source, std::optional<ClassId> target_label = std::nullopt) {
  const Graph& g = *prep.graph;
  g.check_node(v);
  const ClassId own = g.label(v) != kUnlabeled ? g.label(v) : prep.clean_predictions[v];
  const ClassId c = target_label ? *target_label : pick_target_label(prep.model, prep.propagated, v, own);
  if (c < 0 || static_cast<std::size_t>(c) >= g.num_classes()) throw UsageError("target label out of range");
  InfluenceQuery q{v, c, own, depth, source};
  const SgcModel& model = prep.model;
  const SparseRows& x = prep.features;
  MarginFn margin = [&](const EdgeOverlay& o) { return attack_margin(model, o, x, v, c, own); };
  return plan_attack(g, q, prep.attack_labels, options, margin);
}

struct ResultRow {
  NodeId target = 0;
  ClassId target_label = 0;
  int budget = 0;
  bool success = false;
  std::size_t edges_added = 0;
  std::size_t edges_removed = 0;
  double final_margin = 0.0;
  double wall_time_ms = 0.0;
  GainMode mode = GainMode::approx;
  LabelSource label_source = LabelSource::estimated_labels;
};

struct BudgetSummary {
  int budget = 0;
  std::size_t targets = 0;
  std::size_t successes = 0;
  double success_rate = 0.0;
  double mean_time_ms = 0.0;
  double median_time_ms = 0.0;
  std::size_t edges_added = 0;
  std::size_t edges_removed = 0;
  double added_edge_fraction = 0.0;  // added / all attack edges; 0 when none
};

struct SweepResult {
  PreparedExperiment prep;
  std::vector<AttackPlan> plans;  // one per target, in target order
  std::vector<ResultRow> rows;    // target-major, budget-minor
  std::vector<BudgetSummary> summary;
};

// Rows for one Δ_max plan read at each budget prefix.
inline std::vector<ResultRow> rows_for_plan(const AttackPlan& plan, const ExperimentConfig& c) {
  std::vector<ResultRow> rows;
  for (int b : c.budgets) {
    const auto prefix = static_cast<std::size_t>(b);
    ResultRow r;
    r.target = plan.target;
    r.target_label = plan.target_label;
    r.budget = b;
    r.edges_added = plan.edges_added(prefix);
    r.edges_removed = plan.edges_removed(prefix);
    r.final_margin = plan.margin_at(prefix);
    r.success = (r.edges_added + r.edges_removed) > 0 && r.final_margin > 0.0;
    r.wall_time_ms = std::chrono::duration<double, std::milli>(plan.time_at(prefix)).count();
    r.mode = c.mode;
    r.label_source = c.label_source;
    rows.push_back(r);
  }
  return rows;
}

inline std::vector<BudgetSummary> summarize(const std::vector<ResultRow>& rows, const std::vector<int>& budgets) {
  std::vector<BudgetSummary> out;
  for (int b : budgets) {
    BudgetSummary s;
    s.budget = b;
    std::vector<double> times;
    for (const auto& r : rows) {
      if (r.budget != b) continue;
      ++s.targets;
      s.successes += r.success;
      s.edges_added += r.edges_added;
      s.edges_removed += r.edges_removed;
      times.push_back(r.wall_time_ms);
    }
    if (s.targets > 0) {
      s.success_rate = static_cast<double>(s.successes) / static_cast<double>(s.targets);
      s.mean_time_ms = std::accumulate(times.begin(), times.end(), 0.0) / static_cast<double>(times.size());
      std::sort(times.begin(), times.end());
      const std::size_t mid = times.size() / 2;
      s.median_time_ms = times.size() % 2 ? times[mid] : 0.5 * (times[mid - 1] + times[mid]);
    }
    const std::size_t used = s.edges_added + s.edges_removed;
    s.added_edge_fraction = used ? static_cast<double>(s.edges_added) / static_cast<double>(used) : 0.0;
    out.push_back(s);
  }
  return out;
}

inline constexpr const char* kResultsHeader =
    "target,target_label,budget,success,edges_added,edges_removed,final_margin,wall_time_ms,mode,label_source";

/// results.csv text. With `include_timing` false the wall-time column is
/// blanked, which makes the output byte-comparable across runs.
inline std::string results_csv(const std::vector<ResultRow>& rows, bool include_timing = true) {
  std::ostringstream out;
  out << kResultsHeader << '\n';
  char buf[64];
  for (const auto& r : rows) {
    out << r.target << ',' << r.target_label << ',' << r.budget << ',' << (r.success ? 1 : 0) << ','
        << r.edges_added << ',' << r.edges_removed << ',';
    std::snprintf(buf, sizeof buf, "%.12g", r.final_margin);
    out << buf << ',';
    if (include_timing) {
      std::snprintf(buf, sizeof buf, "%.3f", r.wall_time_ms);
      out << buf;
    }
    out << ',' << to_string(r.mode) << ',' << to_string(r.label_source) << '\n';
  }
  return out.str();
}

inline nlohmann::ordered_json summary_json(const SweepResult& result, const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["schema_version"] = kSummarySchemaVersion;
  j["config"] = to_json(c);
  j["num_targets"] = result.plans.size();
  j["victim"] = {{"depth", result.prep.model.depth},
                 {"train_size", result.prep.split.train_ids.size()},
                 {"final_loss", result.prep.model.meta.final_loss},
                 {"test_accuracy", result.prep.test_accuracy}};
  j["label_agreement"] = result.prep.label_agreement;
  auto& budgets = j["budgets"] = nlohmann::ordered_json::array();
  for (const auto& s : result.summary) {
    budgets.push_back({{"budget", s.budget},
                       {"success_rate", s.success_rate},
                       {"successes", s.successes},
                       {"targets", s.targets},
                       {"mean_time_ms", s.mean_time_ms},
                       {"median_time_ms", s.median_time_ms},
                       {"edges_added", s.edges_added},
                       {"edges_removed", s.edges_removed},
                       {"added_edge_fraction", s.added_edge_fraction}});
  }
  return j;
}

inline nlohmann::ordered_json plan_to_json(const AttackPlan& plan, const Graph& g, bool include_timing = true) {
  nlohmann::ordered_json j;
  j["target"] = g.name(plan.target);
  j["target_id"] = plan.target;
  j["own_label"] = plan.own_label;
  j["target_label"] = plan.target_label;
  j["success"] = plan.success;
  j["edges_used"] = plan.edges_used();
  j["edges_added"] = plan.edges_added();
  j["edges_removed"] = plan.edges_removed();
  j["clean_margin"] = plan.clean_margin;
  j["final_margin"] = plan.final_margin;
  auto& steps = j["toggles"] = nlohmann::ordered_json::array();
  for (const auto& s : plan.steps)
    steps.push_back({{"node", g.name(s.node)}, {"node_id", s.node}, {"direction", to_string(s.direction)},
                     {"gain", s.gain}, {"margin", s.margin}});
  j["notes"] = plan.notes;
  if (include_timing) j["wall_time_ms"] = std::chrono::duration<double, std::milli>(plan.wall_time).count();
  return j;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

inline void write_sweep_outputs(const SweepResult& result, const ExperimentConfig& c,
                                const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_text(out_dir / "results.csv", results_csv(result.rows));
  write_text(out_dir / "summary.json", summary_json(result, c).dump(2) + "\n");
}

/// Trains the victim once, samples targets, plans one Δ_max attack per
/// target and reads success at every budget prefix. When `out_dir` is set,
/// results.csv and summary.json are written there; on failure the rows of
/// every completed target are flushed before the error propagates.
inline SweepResult run_sweep(const Graph& g, const ExperimentConfig& c,
                             const std::optional<std::filesystem::path>& out_dir = std::nullopt) {
  SweepResult result;
  result.prep = prepare_experiment(g, c);
  const auto& targets = result.prep.split.target_ids;
  AttackOptions options;
  options.budget = c.max_budget();
  options.mode = c.mode;
  options.early_stop = c.early_stop;
  options.require_positive_gain = c.require_positive_gain;
  options.candidate_cap = c.candidate_cap;

  std::vector<std::optional<AttackPlan>> plans(targets.size());
  try {
    parallel_for(targets.size(), c.workers, [&](std::size_t i) {
      plans[i] = attack_target(result.prep, targets[i], options, c.depth, c.label_source);
    });
  } catch (...) {
    if (out_dir) {
      std::vector<ResultRow> partial;
      for (const auto& p : plans)
        if (p) {
          auto rows = rows_for_plan(*p, c);
          partial.insert(partial.end(), rows.begin(), rows.end());
        }
      std::filesystem::create_directories(*out_dir);
      write_text(*out_dir / "results.csv", results_csv(partial));
    }
    throw;
  }

  for (auto& p : plans) {
    auto rows = rows_for_plan(*p, c);
    result.rows.insert(result.rows.end(), rows.begin(), rows.end());
    result.plans.push_back(std::move(*p));
  }
  result.summary = summarize(result.rows, c.budgets);
  if (out_dir) write_sweep_outputs(result, c, *out_dir);
  return result;
}

struct BenchEntry {
  NodeId target = 0;
  double approx_ms = 0.0;
  double exact_ms = 0.0;
  bool same_plan = false;  // identical toggle sequences
};

struct BenchReport {
  std::vector<BenchEntry> entries;
  double median_approx_ms = 0.0;
  double median_exact_ms = 0.0;
  double median_speedup = 0.0;
  double min_speedup = 0.0;
  double max_speedup = 0.0;
};

inline double median_of(std::vector<double> xs) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  const std::size_t mid = xs.size() / 2;
  return xs.size() % 2 ? xs[mid] : 0.5 * (xs[mid - 1] + xs[mid]);
}

/// Times approx-gain planning against exact-gain planning on the same
/// targets, budget and victim.
inline BenchReport bench_influence(const Graph& g, const ExperimentConfig& c) {
  auto prep = prepare_experiment(g, c);
  AttackOptions options;
  options.budget = c.max_budget();
  options.early_stop = c.early_stop;
  options.require_positive_gain = c.require_positive_gain;
  options.candidate_cap = c.candidate_cap;
  BenchReport report;
  std::vector<double> approx, exact, speedup;
  for (NodeId v : prep.split.target_ids) {
    options.mode = GainMode::approx;
    auto a = attack_target(prep, v, options, c.depth, c.label_source);
    options.mode = GainMode::exact;
    auto e = attack_target(prep, v, options, c.depth, c.label_source);
    BenchEntry entry;
    entry.target = v;
    entry.approx_ms = std::chrono::duration<double, std::milli>(a.wall_time).count();
    entry.exact_ms = std::chrono::duration<double, std::milli>(e.wall_time).count();
    entry.same_plan = a.steps.size() == e.steps.size() &&
                      std::equal(a.steps.begin(), a.steps.end(), e.steps.begin(),
                                 [](const AttackStep& x, const AttackStep& y) { return x.node == y.node; });
    report.entries.push_back(entry);
    approx.push_back(entry.approx_ms);
    exact.push_back(entry.exact_ms);
    speedup.push_back(entry.exact_ms / std::max(entry.approx_ms, 1e-6));
  }
  report.median_approx_ms = median_of(approx);
  report.median_exact_ms = median_of(exact);
  report.median_speedup = median_of(speedup);
  if (!speedup.empty()) {
    report.min_speedup = *std::min_element(speedup.begin(), speedup.end());
    report.max_speedup = *std::max_element(speedup.begin(), speedup.end());
  }
  return report;
}

inline nlohmann::ordered_json to_json(const BenchReport& r) {
  nlohmann::ordered_json j;
  j["median_approx_ms"] = r.median_approx_ms;
  j["median_exact_ms"] = r.median_exact_ms;
  j["median_speedup"] = r.median_speedup;
  j["min_speedup"] = r.min_speedup;
  j["max_speedup"] = r.max_speedup;
  auto& rows = j["targets"] = nlohmann::ordered_json::array();
  for (const auto& e : r.entries)
    rows.push_back({{"target", e.target}, {"approx_ms", e.approx_ms}, {"exact_ms", e.exact_ms}, {"same_plan", e.same_plan}});
  return j;
}

}  // namespace lpattack
