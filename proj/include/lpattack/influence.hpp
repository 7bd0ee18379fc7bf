#pragma once

#include <cmath>
#include <span>
#include <string>

#include "lpattack/errors.hpp"
#include "lpattack/graph.hpp"

namespace lpattack {

// Walk products cost grows as mean-degree^K; deeper propagation is refused.
inline constexpr int kMaxDepth = 6;

enum class LabelSource { true_labels, estimated_labels };
enum class Direction { add, remove };

inline const char* to_string(LabelSource s) { return s == LabelSource::true_labels ? "true" : "estimated"; }
inline const char* to_string(Direction d) { return d == Direction::add ? "add" : "delete"; }

struct InfluenceQuery {
  NodeId target = 0;
  ClassId target_label = 0;
  ClassId own_label = 0;
  int depth = 2;
  LabelSource label_source = LabelSource::true_labels;

  void validate() const {
    if (target_label == own_label) throw UsageError("target label must differ from the target's own label");
    if (target_label < 0 || own_label < 0) throw UsageError("query labels must be valid classes");
    if (depth < 1 || depth > kMaxDepth)
      throw UsageError("depth must lie in [1, " + std::to_string(kMaxDepth) + "]");
  }
};

/// Approximate attack gain split into the part computed over existing walks
/// (only the target's degree adjusted) and the per-candidate part over walks
/// created or destroyed by toggling (target, candidate).
struct InfluenceBreakdown {
  double constant = 0.0;
  double delta = 0.0;
  NodeId candidate = 0;
  Direction direction = Direction::add;

  double gain() const { return direction == Direction::add ? constant + delta : constant - delta; }
};

inline double gain(const InfluenceBreakdown& b) { return b.gain(); }

namespace detail {

// +1 for the target label, -1 for the target's own label, 0 for other classes.
inline double label_sign(std::span<const ClassId> labels, NodeId u, const InfluenceQuery& q) {
  const ClassId y = labels[u];
  if (y == kUnlabeled) {
    if (q.label_source == LabelSource::true_labels)
      throw DataError("node " + std::to_string(u) + " lies within the target's receptive field but has no label");
    return 0.0;
  }
  if (y == q.target_label) return 1.0;
  if (y == q.own_label) return -1.0;
  return 0.0;
}

template <GraphView G>
void check_labels(const G& g, std::span<const ClassId> labels) {
  if (labels.size() != g.num_nodes()) throw UsageError("label array size does not match node count");
}

}  // namespace detail

/// Label influence of u on v after K propagation steps: the sum over every
/// K-step walk v -> u of the product of normalized edge weights.
template <GraphView G>
double label_influence_exact(const G& g, NodeId v, NodeId u, int depth, const DegreeOverrides& degrees = {}) {
  g.check_node(v);
  g.check_node(u);
  if (depth < 1 || depth > kMaxDepth) throw UsageError("depth must lie in [1, " + std::to_string(kMaxDepth) + "]");
  const auto dist_to_u = hop_distances(g, u, depth);
  auto within = [&](NodeId p, int steps) {
    auto it = dist_to_u.find(p);
    return it != dist_to_u.end() && it->second <= steps;
  };
  if (!within(v, depth)) return 0.0;

  double total = 0.0;
  auto descend = [&](auto& self, NodeId p, int remaining, double product) -> void {
    if (remaining == 0) {
      total += product;
      return;
    }
    const double dp = degrees.degree(g, p);
    g.for_each_neighbor(p, [&](NodeId w) {
      if (within(w, remaining - 1)) self(self, w, remaining - 1, product / std::sqrt(dp * degrees.degree(g, w)));
    });
  };
  descend(descend, v, depth, 1.0);
  return total;
}

/// Sum of label influence from target-label nodes minus the sum from
/// own-label nodes within K hops of the target. The target itself counts.
template <GraphView G>
double objective_exact(const G& g, const InfluenceQuery& q, std::span<const ClassId> labels,
                       const DegreeOverrides& degrees = {}) {
  q.validate();
  detail::check_labels(g, labels);
  double value = 0.0;
  for (NodeId u : k_hop(g, q.target, q.depth)) {
    const double sign = detail::label_sign(labels, u, q);
    if (sign != 0.0) value += sign * label_influence_exact(g, q.target, u, q.depth, degrees);
  }
  return value;
}

/// Depth-first accumulation of I_c - I_{y_v} over every `depth`-step walk
/// leaving `start`. The walk product is charged to the reached node's label.
template <GraphView G>
double label_influence_dfs(const G& g, NodeId start, int depth, const InfluenceQuery& q,
                           std::span<const ClassId> labels, const DegreeOverrides& degrees = {}) {
  g.check_node(start);
  detail::check_labels(g, labels);
  if (depth < 0 || depth > kMaxDepth) throw UsageError("depth must lie in [0, " + std::to_string(kMaxDepth) + "]");
  double influence_target = 0.0;
  double influence_own = 0.0;
  auto descend = [&](auto& self, NodeId p, int remaining, double s) -> void {
    if (remaining == 0) {
      const double sign = detail::label_sign(labels, p, q);
      if (sign > 0) influence_target += s;
      else if (sign < 0) influence_own += s;
      return;
    }
    const double dp = degrees.degree(g, p);
    g.for_each_neighbor(p, [&](NodeId u) { self(self, u, remaining - 1, s / std::sqrt(dp * degrees.degree(g, u))); });
  };
  descend(descend, start, depth, 1.0);
  return influence_target - influence_own;
}

/// Objective over the current walk structure with every degree unchanged
/// except the target's, which moves by +1 (add) or -1 (remove).
template <GraphView G>
double approx_constant(const G& g, const InfluenceQuery& q, std::span<const ClassId> labels, Direction direction) {
  q.validate();
  g.check_node(q.target);
  const double dv = static_cast<double>(g.degree(q.target));
  if (direction == Direction::remove && dv <= 1.0)
    throw UsageError("target has no edge left to delete");
  DegreeOverrides degrees{{q.target, direction == Direction::add ? dv + 1.0 : dv - 1.0}};
  return label_influence_dfs(g, q.target, q.depth, q, labels, degrees);
}

// Influence split by the label of the walk's end node.
struct InfluenceTerms {
  double toward_target = 0.0;  // end nodes labeled c
  double toward_own = 0.0;     // end nodes labeled y_v
  double net() const { return toward_target - toward_own; }
};

/// Influence carried by walks that traverse the edge (target, other).
///
/// With `extra_edge` set the edge is absent from g and treated as present;
/// otherwise it must exist in g. Walk products use `degrees`.
template <GraphView G>
InfluenceTerms crossing_walk_terms(const G& g, const InfluenceQuery& q, std::span<const ClassId> labels, NodeId other,
                                   bool extra_edge, const DegreeOverrides& degrees) {
  const NodeId v = q.target;
  double influence_target = 0.0;
  double influence_own = 0.0;
  auto descend = [&](auto& self, NodeId p, int remaining, double s, bool crossed) -> void {
    if (remaining == 0) {
      if (!crossed) return;
      const double sign = detail::label_sign(labels, p, q);
      if (sign > 0) influence_target += s;
      else if (sign < 0) influence_own += s;
      return;
    }
    const double dp = degrees.degree(g, p);
    auto step = [&](NodeId w) {
      const bool on_edge = (p == v && w == other) || (p == other && w == v);
      self(self, w, remaining - 1, s / std::sqrt(dp * degrees.degree(g, w)), crossed || on_edge);
    };
    g.for_each_neighbor(p, step);
    if (extra_edge) {
      if (p == v) step(other);
      else if (p == other) step(v);
    }
  };
  descend(descend, v, q.depth, 1.0, false);
  return {influence_target, influence_own};
}

template <GraphView G>
double crossing_walk_influence(const G& g, const InfluenceQuery& q, std::span<const ClassId> labels, NodeId other,
                               bool extra_edge, const DegreeOverrides& degrees) {
  return crossing_walk_terms(g, q, labels, other, extra_edge, degrees).net();
}

/// Per-candidate influence delta.
///
/// add: walks created by the new edge (v, a), with d_v + 1 and d_a + 1.
/// remove: walks destroyed by deleting (v, b), with d_v - 1 and d_b clean.
/// All other degrees are read from g.
template <GraphView G>
InfluenceTerms approx_delta_terms(const G& g, const InfluenceQuery& q, std::span<const ClassId> labels,
                                  NodeId candidate, Direction direction) {
  q.validate();
  detail::check_labels(g, labels);
  g.check_node(q.target);
  g.check_node(candidate);
  const NodeId v = q.target;
  if (candidate == v) throw UsageError("candidate must differ from the target");
  const double dv = static_cast<double>(g.degree(v));
  if (direction == Direction::add) {
    if (g.has_edge(v, candidate))
      throw UsageError("add candidate " + std::to_string(candidate) + " is already adjacent to the target");
    DegreeOverrides degrees{{v, dv + 1.0}, {candidate, static_cast<double>(g.degree(candidate)) + 1.0}};
    return crossing_walk_terms(g, q, labels, candidate, true, degrees);
  }
  if (!g.has_edge(v, candidate))
    throw UsageError("delete candidate " + std::to_string(candidate) + " is not adjacent to the target");
  DegreeOverrides degrees{{v, dv - 1.0}};
  return crossing_walk_terms(g, q, labels, candidate, false, degrees);
}

template <GraphView G>
double approx_delta(const G& g, const InfluenceQuery& q, std::span<const ClassId> labels, NodeId candidate,
                    Direction direction) {
  return approx_delta_terms(g, q, labels, candidate, direction).net();
}

}  // namespace lpattack
