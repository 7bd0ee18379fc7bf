#pragma once

#include <algorithm>
#include <chrono>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "lpattack/errors.hpp"
#include "lpattack/graph.hpp"
#include "lpattack/influence.hpp"
#include "lpattack/victim.hpp"

namespace lpattack {

enum class GainMode { approx, exact };

inline const char* to_string(GainMode m) { return m == GainMode::approx ? "approx" : "exact"; }

struct CandidateSets {
  std::vector<NodeId> add;     // target-label nodes not adjacent to v
  std::vector<NodeId> remove;  // own-label neighbors of v
};

/// Candidate sets from the clean graph. A nonzero `add_cap` keeps only the
/// lowest-degree add candidates (ties by id).
inline CandidateSets build_candidates(const Graph& g, const InfluenceQuery& q, std::span<const ClassId> labels,
                                      std::size_t add_cap = 0) {
  q.validate();
  g.check_node(q.target);
  if (labels.size() != g.num_nodes()) throw UsageError("label array size does not match node count");
  if (labels[q.target] == kUnlabeled && q.label_source == LabelSource::true_labels)
    throw DataError("target " + std::to_string(q.target) + " has no label");
  CandidateSets out;
  for (NodeId u = 0; u < g.num_nodes(); ++u) {
    if (u == q.target) continue;
    const bool adjacent = g.has_edge(q.target, u);
    if (!adjacent && labels[u] == q.target_label) out.add.push_back(u);
    if (adjacent && labels[u] == q.own_label) out.remove.push_back(u);
  }
  if (add_cap > 0 && out.add.size() > add_cap) {
    std::stable_sort(out.add.begin(), out.add.end(),
                     [&](NodeId a, NodeId b) { return g.degree(a) < g.degree(b); });
    out.add.resize(add_cap);
    std::sort(out.add.begin(), out.add.end());
  }
  return out;
}

struct AttackOptions {
  int budget = 1;
  GainMode mode = GainMode::approx;
  bool early_stop = true;
  bool require_positive_gain = false;
  std::size_t candidate_cap = 0;
};

struct AttackStep {
  NodeId node = 0;
  Direction direction = Direction::add;
  double gain = 0.0;    // influence objective predicted for this toggle
  double margin = 0.0;  // victim margin after applying it
  std::chrono::nanoseconds elapsed{0};  // since planning started
};

struct AttackPlan {
  NodeId target = 0;
  ClassId target_label = 0;
  ClassId own_label = 0;
  std::vector<AttackStep> steps;
  bool success = false;
  double clean_margin = 0.0;
  double final_margin = 0.0;
  std::chrono::nanoseconds wall_time{0};
  std::vector<std::string> notes;

  std::size_t edges_used() const { return steps.size(); }
  std::size_t edges_added(std::size_t prefix = std::numeric_limits<std::size_t>::max()) const {
    prefix = std::min(prefix, steps.size());
    return static_cast<std::size_t>(std::count_if(steps.begin(), steps.begin() + static_cast<std::ptrdiff_t>(prefix),
                                                  [](const AttackStep& s) { return s.direction == Direction::add; }));
  }
  std::size_t edges_removed(std::size_t prefix = std::numeric_limits<std::size_t>::max()) const {
    return std::min(prefix, steps.size()) - edges_added(prefix);
  }
  // Planning time spent until the first `prefix` toggles were chosen.
  std::chrono::nanoseconds time_at(std::size_t prefix) const {
    if (prefix == 0) return std::chrono::nanoseconds{0};
    return prefix >= steps.size() ? wall_time : steps[prefix - 1].elapsed;
  }
  // Victim margin after the first `prefix` toggles.
  double margin_at(std::size_t prefix) const {
    prefix = std::min(prefix, steps.size());
    return prefix == 0 ? clean_margin : steps[prefix - 1].margin;
  }
};

// Evaluates the victim's margin on a perturbed view of the graph.
using MarginFn = std::function<double(const EdgeOverlay&)>;

/// Greedy budgeted edge-toggle planning around one target.
///
/// approx mode ranks candidates by C_A + dI_A(a) and C_B - dI_B(b): the
/// deltas are computed once on the clean graph, the constants are refreshed
/// on the current overlay every step. exact mode re-evaluates the full
/// objective on the overlay with each candidate toggled.
inline AttackPlan plan_attack(const Graph& g, const InfluenceQuery& q, std::span<const ClassId> labels,
                              const AttackOptions& options, const MarginFn& victim_margin) {
  const auto started = std::chrono::steady_clock::now();
  q.validate();
  if (options.budget < 1) throw UsageError("attack budget must be at least 1");
  const NodeId v = q.target;

  AttackPlan plan;
  plan.target = v;
  plan.target_label = q.target_label;
  plan.own_label = q.own_label;

  EdgeOverlay overlay(g, v);
  plan.clean_margin = victim_margin(overlay);
  plan.final_margin = plan.clean_margin;

  const CandidateSets candidates = build_candidates(g, q, labels, options.candidate_cap);

  struct Candidate {
    NodeId node;
    Direction direction;
    double delta;
    bool used;
  };
  std::vector<Candidate> pool;
  pool.reserve(candidates.add.size() + candidates.remove.size());
  for (NodeId a : candidates.add)
    pool.push_back({a, Direction::add,
                    options.mode == GainMode::approx ? approx_delta(g, q, labels, a, Direction::add) : 0.0, false});
  for (NodeId b : candidates.remove)
    pool.push_back({b, Direction::remove,
                    options.mode == GainMode::approx ? approx_delta(g, q, labels, b, Direction::remove) : 0.0, false});

  if (pool.empty()) plan.notes.emplace_back("no add or delete candidates");

  while (static_cast<int>(plan.steps.size()) < options.budget) {
    const std::size_t target_degree = overlay.degree(v);
    double constant_add = 0.0;
    double constant_remove = 0.0;
    if (options.mode == GainMode::approx) {
      constant_add = approx_constant(overlay, q, labels, Direction::add);
      if (target_degree > 2) constant_remove = approx_constant(overlay, q, labels, Direction::remove);
    }

    Candidate* best = nullptr;
    double best_gain = -std::numeric_limits<double>::infinity();
    bool skipped_delete = false;
    for (auto& c : pool) {
      if (c.used) continue;
      if (c.direction == Direction::remove && target_degree <= 2) {
        skipped_delete = true;
        continue;
      }
      double value;
      if (options.mode == GainMode::approx) {
        value = c.direction == Direction::add ? constant_add + c.delta : constant_remove - c.delta;
      } else {
        overlay.toggle(c.node);
        value = objective_exact(overlay, q, labels);
        overlay.toggle(c.node);
      }
      if (value > best_gain || (value == best_gain && best != nullptr && c.node < best->node)) {
        best_gain = value;
        best = &c;
      }
    }
    if (skipped_delete)
      plan.notes.push_back("step " + std::to_string(plan.steps.size() + 1) +
                           ": delete candidates skipped, target would be isolated");
    if (best == nullptr) break;
    if (options.require_positive_gain && best_gain <= 0.0) {
      plan.notes.emplace_back("stopped: no candidate with positive gain");
      break;
    }

    best->used = true;
    overlay.toggle(best->node);
    const double margin = victim_margin(overlay);
    plan.steps.push_back({best->node, best->direction, best_gain, margin,
                          std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - started)});
    plan.final_margin = margin;
    if (options.early_stop && margin > 0.0) break;
  }

  plan.success = !plan.steps.empty() && plan.final_margin > 0.0;
  plan.wall_time = std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - started);
  return plan;
}

/// Labels the attack reads: stored labels (true) or the victim's argmax for
/// every node (estimated). The graph itself is never modified.
inline std::vector<ClassId> resolve_labels(const Graph& g, const SgcModel* victim, const Matrix* propagated,
                                           LabelSource source) {
  if (source == LabelSource::true_labels) return {g.labels().begin(), g.labels().end()};
  if (victim == nullptr || !victim->trained) throw UsageError("estimated labels require a trained victim");
  if (propagated == nullptr) throw UsageError("estimated labels require propagated features");
  return victim->predict(*propagated);
}

}  // namespace lpattack
