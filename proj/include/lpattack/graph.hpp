#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lpattack/errors.hpp"

namespace lpattack {

using NodeId = std::uint32_t;
using ClassId = std::int32_t;
inline constexpr ClassId kUnlabeled = -1;

// Compressed sparse rows of real values. Used for node features.
struct SparseRows {
  std::size_t cols = 0;
  std::vector<std::size_t> offsets{0};
  std::vector<std::uint32_t> indices;
  std::vector<double> values;

  std::size_t rows() const { return offsets.size() - 1; }

  std::span<const std::uint32_t> row_indices(std::size_t r) const {
    return {indices.data() + offsets[r], offsets[r + 1] - offsets[r]};
  }
  std::span<const double> row_values(std::size_t r) const {
    return {values.data() + offsets[r], offsets[r + 1] - offsets[r]};
  }

  // Appends one row; entries need not be sorted.
  void push_row(std::span<const std::pair<std::uint32_t, double>> entries) {
    for (const auto& [col, value] : entries) {
      if (col >= cols) throw UsageError("feature column " + std::to_string(col) + " out of range");
      indices.push_back(col);
      values.push_back(value);
    }
    offsets.push_back(indices.size());
  }

  static SparseRows identity(std::size_t n) {
    SparseRows x;
    x.cols = n;
    x.offsets.resize(n + 1);
    x.indices.resize(n);
    x.values.assign(n, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      x.offsets[i + 1] = i + 1;
      x.indices[i] = static_cast<std::uint32_t>(i);
    }
    return x;
  }
};

/// Immutable undirected graph in CSR form.
///
/// Self-loops are never stored; every node implicitly neighbors itself, so
/// degree(u) is the stored neighbor count plus one and for_each_neighbor()
/// always yields u first.
class Graph {
 public:
  Graph() = default;

  Graph(std::size_t num_nodes, std::span<const std::pair<NodeId, NodeId>> edges,
        std::vector<ClassId> labels, std::size_t num_classes,
        std::optional<SparseRows> features = std::nullopt, std::vector<std::string> names = {})
      : num_classes_(num_classes), labels_(std::move(labels)), features_(std::move(features)),
        names_(std::move(names)) {
    if (labels_.empty()) labels_.assign(num_nodes, kUnlabeled);
    if (labels_.size() != num_nodes) throw UsageError("label array size does not match node count");
    for (std::size_t u = 0; u < num_nodes; ++u) {
      if (labels_[u] != kUnlabeled && (labels_[u] < 0 || static_cast<std::size_t>(labels_[u]) >= num_classes_))
        throw DataError("label of node " + std::to_string(u) + " out of range");
    }
    if (features_ && features_->rows() != num_nodes)
      throw DataError("feature rows do not match node count");
    if (!names_.empty() && names_.size() != num_nodes) throw UsageError("name list size does not match node count");

    std::vector<std::pair<NodeId, NodeId>> canon;
    canon.reserve(edges.size());
    for (auto [a, b] : edges) {
      if (a >= num_nodes || b >= num_nodes)
        throw DataError("edge (" + std::to_string(a) + "," + std::to_string(b) + ") out of range");
      if (a == b) continue;
      if (a > b) std::swap(a, b);
      canon.emplace_back(a, b);
    }
    std::sort(canon.begin(), canon.end());
    canon.erase(std::unique(canon.begin(), canon.end()), canon.end());
    num_edges_ = canon.size();

    offsets_.assign(num_nodes + 1, 0);
    for (auto [a, b] : canon) {
      ++offsets_[a + 1];
      ++offsets_[b + 1];
    }
    for (std::size_t i = 0; i < num_nodes; ++i) offsets_[i + 1] += offsets_[i];
    adjacency_.resize(offsets_.back());
    std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
    for (auto [a, b] : canon) {
      adjacency_[fill[a]++] = b;
      adjacency_[fill[b]++] = a;
    }
    for (std::size_t u = 0; u < num_nodes; ++u)
      std::sort(adjacency_.begin() + offsets_[u], adjacency_.begin() + offsets_[u + 1]);

    for (std::size_t u = 0; u < names_.size(); ++u) name_index_.emplace(names_[u], static_cast<NodeId>(u));
  }

  std::size_t num_nodes() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t num_edges() const { return num_edges_; }
  std::size_t num_classes() const { return num_classes_; }

  void check_node(NodeId u) const {
    if (u >= num_nodes()) throw UsageError("node id " + std::to_string(u) + " out of range");
  }

  // Stored neighbors only (no self-loop), sorted ascending.
  std::span<const NodeId> adjacent(NodeId u) const {
    return {adjacency_.data() + offsets_[u], offsets_[u + 1] - offsets_[u]};
  }

  std::size_t degree(NodeId u) const { return offsets_[u + 1] - offsets_[u] + 1; }

  bool has_edge(NodeId u, NodeId w) const {
    if (u == w) return false;
    auto adj = adjacent(u);
    return std::binary_search(adj.begin(), adj.end(), w);
  }

  template <class F>
  void for_each_neighbor(NodeId u, F&& f) const {
    f(u);
    for (NodeId w : adjacent(u)) f(w);
  }

  ClassId label(NodeId u) const { return labels_[u]; }
  std::span<const ClassId> labels() const { return labels_; }

  bool has_features() const { return features_.has_value(); }
  const std::optional<SparseRows>& features() const { return features_; }

  std::string name(NodeId u) const { return names_.empty() ? std::to_string(u) : names_[u]; }
  bool has_names() const { return !names_.empty(); }

  // Resolves a node name, falling back to a decimal id.
  std::optional<NodeId> find(const std::string& token) const {
    if (auto it = name_index_.find(token); it != name_index_.end()) return it->second;
    if (token.empty() || token.find_first_not_of("0123456789") != std::string::npos) return std::nullopt;
    auto id = std::stoull(token);
    if (id >= num_nodes()) return std::nullopt;
    return static_cast<NodeId>(id);
  }

  // Canonical (u < v) edge list sorted lexicographically.
  std::vector<std::pair<NodeId, NodeId>> edge_list() const {
    std::vector<std::pair<NodeId, NodeId>> out;
    out.reserve(num_edges_);
    for (NodeId u = 0; u < num_nodes(); ++u)
      for (NodeId w : adjacent(u))
        if (u < w) out.emplace_back(u, w);
    return out;
  }

 private:
  std::size_t num_classes_ = 0;
  std::size_t num_edges_ = 0;
  std::vector<std::size_t> offsets_;
  std::vector<NodeId> adjacency_;
  std::vector<ClassId> labels_;
  std::optional<SparseRows> features_;
  std::vector<std::string> names_;
  std::unordered_map<std::string, NodeId> name_index_;
};

/// Edge toggles restricted to one target's row, viewed over a base graph.
///
/// A toggled node s has its connection to the target flipped relative to the
/// base. Toggling the same node twice restores the base.
class EdgeOverlay {
 public:
  EdgeOverlay(const Graph& base, NodeId target) : base_(&base), target_(target) { base.check_node(target); }

  const Graph& base() const { return *base_; }
  NodeId target() const { return target_; }

  void toggle(NodeId s) {
    base_->check_node(s);
    if (s == target_) throw UsageError("cannot toggle the target's self-loop");
    auto it = std::lower_bound(toggles_.begin(), toggles_.end(), s);
    if (it != toggles_.end() && *it == s) {
      toggles_.erase(it);
      base_->has_edge(target_, s) ? ++target_delta_ : --target_delta_;
    } else {
      toggles_.insert(it, s);
      base_->has_edge(target_, s) ? --target_delta_ : ++target_delta_;
    }
  }

  bool is_toggled(NodeId s) const { return std::binary_search(toggles_.begin(), toggles_.end(), s); }
  std::span<const NodeId> toggles() const { return toggles_; }
  std::size_t perturbation_size() const { return toggles_.size(); }

  std::size_t num_nodes() const { return base_->num_nodes(); }
  std::size_t num_classes() const { return base_->num_classes(); }
  ClassId label(NodeId u) const { return base_->label(u); }
  void check_node(NodeId u) const { base_->check_node(u); }

  std::size_t degree(NodeId u) const {
    if (u == target_) return static_cast<std::size_t>(static_cast<std::ptrdiff_t>(base_->degree(u)) + target_delta_);
    if (is_toggled(u)) return base_->has_edge(target_, u) ? base_->degree(u) - 1 : base_->degree(u) + 1;
    return base_->degree(u);
  }

  bool has_edge(NodeId u, NodeId w) const {
    bool present = base_->has_edge(u, w);
    if (u == target_ && w != target_) return present != is_toggled(w);
    if (w == target_ && u != target_) return present != is_toggled(u);
    return present;
  }

  template <class F>
  void for_each_neighbor(NodeId u, F&& f) const {
    f(u);
    if (u == target_) {
      for (NodeId w : base_->adjacent(u))
        if (!is_toggled(w)) f(w);
      for (NodeId s : toggles_)
        if (!base_->has_edge(u, s)) f(s);
    } else if (is_toggled(u)) {
      for (NodeId w : base_->adjacent(u))
        if (w != target_) f(w);
      if (!base_->has_edge(u, target_)) f(target_);
    } else {
      for (NodeId w : base_->adjacent(u)) f(w);
    }
  }

  // Copies the perturbed structure into a standalone graph.
  Graph materialize() const {
    std::vector<std::pair<NodeId, NodeId>> edges;
    for (auto e : base_->edge_list())
      if (has_edge(e.first, e.second)) edges.push_back(e);
    for (NodeId s : toggles_)
      if (!base_->has_edge(target_, s)) edges.emplace_back(target_, s);
    std::vector<ClassId> labels(base_->labels().begin(), base_->labels().end());
    std::vector<std::string> names;
    if (base_->has_names())
      for (NodeId u = 0; u < num_nodes(); ++u) names.push_back(base_->name(u));
    return Graph(num_nodes(), edges, std::move(labels), num_classes(), base_->features(), std::move(names));
  }

 private:
  const Graph* base_;
  NodeId target_;
  std::vector<NodeId> toggles_;
  std::ptrdiff_t target_delta_ = 0;
};

template <class G>
concept GraphView = requires(const G& g, NodeId u) {
  { g.num_nodes() } -> std::convertible_to<std::size_t>;
  { g.num_classes() } -> std::convertible_to<std::size_t>;
  { g.degree(u) } -> std::convertible_to<std::size_t>;
  { g.has_edge(u, u) } -> std::same_as<bool>;
  { g.label(u) } -> std::convertible_to<ClassId>;
  g.for_each_neighbor(u, [](NodeId) {});
  g.check_node(u);
};

/// Replacement degrees for a handful of nodes. Influence routines read
/// degrees through this so that "only d_v changes" style conventions share
/// one code path with the exact computation.
class DegreeOverrides {
 public:
  DegreeOverrides() = default;
  DegreeOverrides(std::initializer_list<std::pair<NodeId, double>> entries) : entries_(entries) {}

  DegreeOverrides& set(NodeId u, double degree) {
    for (auto& e : entries_)
      if (e.first == u) {
        e.second = degree;
        return *this;
      }
    entries_.emplace_back(u, degree);
    return *this;
  }

  std::optional<double> find(NodeId u) const {
    for (const auto& e : entries_)
      if (e.first == u) return e.second;
    return std::nullopt;
  }

  bool empty() const { return entries_.empty(); }

  template <GraphView G>
  double degree(const G& g, NodeId u) const {
    for (const auto& e : entries_)
      if (e.first == u) return e.second;
    return static_cast<double>(g.degree(u));
  }

 private:
  std::vector<std::pair<NodeId, double>> entries_;
};

template <GraphView G>
std::vector<NodeId> neighbors(const G& g, NodeId u) {
  g.check_node(u);
  std::vector<NodeId> out;
  out.reserve(g.degree(u));
  g.for_each_neighbor(u, [&](NodeId w) { out.push_back(w); });
  return out;
}

// Hop distances from `source` for every node within `max_hops`.
template <GraphView G>
std::unordered_map<NodeId, int> hop_distances(const G& g, NodeId source, int max_hops) {
  std::unordered_map<NodeId, int> dist{{source, 0}};
  std::vector<NodeId> frontier{source};
  for (int hop = 1; hop <= max_hops && !frontier.empty(); ++hop) {
    std::vector<NodeId> next;
    for (NodeId p : frontier)
      g.for_each_neighbor(p, [&](NodeId w) {
        if (dist.try_emplace(w, hop).second) next.push_back(w);
      });
    frontier = std::move(next);
  }
  return dist;
}

/// Nodes reachable from v in at most K edge steps, v included, sorted.
template <GraphView G>
std::vector<NodeId> k_hop(const G& g, NodeId v, int depth) {
  g.check_node(v);
  if (depth < 0) throw UsageError("k_hop depth must be non-negative");
  auto dist = hop_distances(g, v, depth);
  std::vector<NodeId> out;
  out.reserve(dist.size());
  for (const auto& entry : dist) out.push_back(entry.first);
  std::sort(out.begin(), out.end());
  return out;
}

struct WalkSet {
  NodeId from = 0;
  NodeId to = 0;
  int depth = 0;
  // Each walk lists depth+1 nodes, starting at `from` and ending at `to`.
  std::vector<std::vector<NodeId>> walks;
};

/// Every length-K walk from v to u, self-loop steps included.
template <GraphView G>
WalkSet enumerate_walks(const G& g, NodeId v, NodeId u, int depth) {
  g.check_node(v);
  g.check_node(u);
  if (depth < 1) throw UsageError("walk depth must be at least 1");
  WalkSet out{v, u, depth, {}};
  auto dist_to_u = hop_distances(g, u, depth);
  auto reachable = [&](NodeId p, int steps_left) {
    auto it = dist_to_u.find(p);
    return it != dist_to_u.end() && it->second <= steps_left;
  };
  if (!reachable(v, depth)) return out;

  // Explicit stack of (node, index of next neighbor to try).
  std::vector<NodeId> path{v};
  std::vector<std::vector<NodeId>> pending{neighbors(g, v)};
  std::vector<std::size_t> cursor{0};
  while (!path.empty()) {
    const int steps_taken = static_cast<int>(path.size()) - 1;
    if (steps_taken == depth) {
      if (path.back() == u) out.walks.push_back(path);
      path.pop_back();
      pending.pop_back();
      cursor.pop_back();
      continue;
    }
    if (cursor.back() == pending.back().size()) {
      path.pop_back();
      pending.pop_back();
      cursor.pop_back();
      continue;
    }
    NodeId next = pending.back()[cursor.back()++];
    if (!reachable(next, depth - steps_taken - 1)) continue;
    path.push_back(next);
    pending.push_back(static_cast<int>(path.size()) - 1 < depth ? neighbors(g, next) : std::vector<NodeId>{});
    cursor.push_back(0);
  }
  return out;
}

// Product of symmetric-normalized weights d^-1/2 d^-1/2 along a walk.
template <GraphView G>
double walk_weight(const G& g, std::span<const NodeId> walk, const DegreeOverrides& degrees = {}) {
  double w = 1.0;
  for (std::size_t i = 1; i < walk.size(); ++i)
    w /= std::sqrt(degrees.degree(g, walk[i - 1]) * degrees.degree(g, walk[i]));
  return w;
}

/// Sparse row v of Â^K, Â = D^-1/2 (A+I) D^-1/2, by K local push passes.
/// Entries are sorted by node id.
template <GraphView G>
std::vector<std::pair<NodeId, double>> propagation_row(const G& g, NodeId v, int depth) {
  g.check_node(v);
  if (depth < 0) throw UsageError("propagation depth must be non-negative");
  std::unordered_map<NodeId, double> current{{v, 1.0}};
  for (int step = 0; step < depth; ++step) {
    std::unordered_map<NodeId, double> next;
    next.reserve(current.size() * 4);
    for (const auto& [p, mass] : current) {
      const double scaled = mass / std::sqrt(static_cast<double>(g.degree(p)));
      g.for_each_neighbor(p, [&](NodeId w) { next[w] += scaled / std::sqrt(static_cast<double>(g.degree(w))); });
    }
    current = std::move(next);
  }
  std::vector<std::pair<NodeId, double>> out(current.begin(), current.end());
  std::sort(out.begin(), out.end());
  return out;
}

/// Dense row v of Â^K via K full sparse matrix-vector products.
template <GraphView G>
std::vector<double> norm_adj_power_row(const G& g, NodeId v, int depth) {
  g.check_node(v);
  if (depth < 0) throw UsageError("propagation depth must be non-negative");
  const std::size_t n = g.num_nodes();
  std::vector<double> inv_sqrt(n);
  for (NodeId u = 0; u < n; ++u) inv_sqrt[u] = 1.0 / std::sqrt(static_cast<double>(g.degree(u)));
  std::vector<double> row(n, 0.0);
  row[v] = 1.0;
  for (int step = 0; step < depth; ++step) {
    std::vector<double> next(n, 0.0);
    for (NodeId u = 0; u < n; ++u) {
      if (row[u] == 0.0) continue;
      const double scaled = row[u] * inv_sqrt[u];
      g.for_each_neighbor(u, [&](NodeId w) { next[w] += scaled * inv_sqrt[w]; });
    }
    row = std::move(next);
  }
  return row;
}

}  // namespace lpattack
