#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "lpattack/errors.hpp"
#include "lpattack/graph.hpp"
#include "lpattack/victim.hpp"

namespace lpattack {

struct ExperimentSplit {
  std::vector<NodeId> train_ids;
  std::vector<NodeId> target_ids;
  std::uint64_t seed = 0;
};

// A loaded graph bundle directory.
struct Bundle {
  std::string name;
  Graph graph;
  std::optional<ExperimentSplit> split;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find('\t', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <class T>
T parse_number(std::string_view token, const std::string& where) {
  T value{};
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size())
    throw DataError(where + ": cannot parse '" + std::string(token) + "'");
  return value;
}

// Calls f(fields, where) for each non-empty line of a TSV file.
template <class F>
void read_tsv(const std::filesystem::path& path, std::size_t expected_fields, F&& f) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = path.filename().string() + ":" + std::to_string(line_no);
    auto fields = split_tabs(line);
    if (fields.size() != expected_fields)
      throw DataError(where + ": expected " + std::to_string(expected_fields) + " tab-separated fields");
    f(fields, where);
  }
}

inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace detail

/// Reads a bundle directory: meta.json, edges.tsv, labels.tsv and the
/// optional features.tsv, names.tsv and splits.json.
inline Bundle load_bundle(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  const fs::path meta_path = dir / "meta.json";
  if (!fs::exists(meta_path)) throw DataError("missing " + meta_path.string());
  nlohmann::json meta;
  try {
    std::ifstream in(meta_path);
    in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed meta.json: " + std::string(e.what()));
  }

  Bundle bundle;
  std::size_t n = 0, num_classes = 0, num_features = 0;
  try {
    n = meta.at("num_nodes").get<std::size_t>();
    num_classes = meta.at("num_classes").get<std::size_t>();
    num_features = meta.value("num_features", std::size_t{0});
    bundle.name = meta.value("name", dir.filename().string());
  } catch (const nlohmann::json::exception& e) {
    throw DataError("meta.json: " + std::string(e.what()));
  }

  auto node_id = [&](std::string_view token, const std::string& where) {
    auto id = detail::parse_number<std::uint64_t>(token, where);
    if (id >= n) throw DataError(where + ": node id " + std::to_string(id) + " out of range");
    return static_cast<NodeId>(id);
  };

  std::vector<std::pair<NodeId, NodeId>> edges;
  std::set<std::pair<NodeId, NodeId>> seen;
  std::size_t duplicates = 0, self_loops = 0;
  const fs::path edges_path = dir / "edges.tsv";
  if (!fs::exists(edges_path)) throw DataError("missing " + edges_path.string());
  detail::read_tsv(edges_path, 2, [&](const auto& fields, const std::string& where) {
    NodeId a = node_id(fields[0], where), b = node_id(fields[1], where);
    if (a == b) {
      ++self_loops;
      return;
    }
    if (!seen.emplace(std::min(a, b), std::max(a, b)).second) {
      ++duplicates;
      return;
    }
    edges.emplace_back(a, b);
  });
  if (duplicates > 0)
    bundle.warnings.push_back("edges.tsv: dropped " + std::to_string(duplicates) + " duplicate or reversed edges");
  if (self_loops > 0)
    bundle.warnings.push_back("edges.tsv: dropped " + std::to_string(self_loops) + " self-loops");

  std::vector<ClassId> labels(n, kUnlabeled);
  if (fs::exists(dir / "labels.tsv")) {
    detail::read_tsv(dir / "labels.tsv", 2, [&](const auto& fields, const std::string& where) {
      NodeId u = node_id(fields[0], where);
      auto y = detail::parse_number<std::int64_t>(fields[1], where);
      if (y < 0 || static_cast<std::size_t>(y) >= num_classes)
        throw DataError(where + ": class " + std::to_string(y) + " out of range");
      labels[u] = static_cast<ClassId>(y);
    });
  }

  std::optional<SparseRows> features;
  if (fs::exists(dir / "features.tsv")) {
    if (num_features == 0) throw DataError("features.tsv present but meta.json declares num_features 0");
    std::vector<std::vector<std::pair<std::uint32_t, double>>> rows(n);
    detail::read_tsv(dir / "features.tsv", 3, [&](const auto& fields, const std::string& where) {
      NodeId u = node_id(fields[0], where);
      auto dim = detail::parse_number<std::uint64_t>(fields[1], where);
      if (dim >= num_features) throw DataError(where + ": feature dim " + std::to_string(dim) + " out of range");
      rows[u].emplace_back(static_cast<std::uint32_t>(dim), detail::parse_number<double>(fields[2], where));
    });
    features.emplace();
    features->cols = num_features;
    for (auto& row : rows) {
      std::sort(row.begin(), row.end());
      features->push_row(row);
    }
  }

  std::vector<std::string> names;
  if (fs::exists(dir / "names.tsv")) {
    names.resize(n);
    for (std::size_t u = 0; u < n; ++u) names[u] = std::to_string(u);
    detail::read_tsv(dir / "names.tsv", 2, [&](const auto& fields, const std::string& where) {
      names[node_id(fields[0], where)] = std::string(fields[1]);
    });
  }

  if (fs::exists(dir / "splits.json")) {
    try {
      std::ifstream in(dir / "splits.json");
      nlohmann::json j;
      in >> j;
      ExperimentSplit split;
      split.train_ids = j.value("train_ids", std::vector<NodeId>{});
      split.target_ids = j.value("target_ids", std::vector<NodeId>{});
      split.seed = j.value("seed", std::uint64_t{0});
      for (NodeId id : split.train_ids)
        if (id >= n) throw DataError("splits.json: node id out of range");
      for (NodeId id : split.target_ids)
        if (id >= n) throw DataError("splits.json: node id out of range");
      bundle.split = std::move(split);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("malformed splits.json: " + std::string(e.what()));
    }
  }

  bundle.graph = Graph(n, edges, std::move(labels), num_classes, std::move(features), std::move(names));
  return bundle;
}

/// Writes g in canonical bundle form: edges sorted with u < v, labels and
/// features sorted by node.
inline void save_bundle(const Graph& g, const std::filesystem::path& dir, const std::string& name,
                        const std::optional<ExperimentSplit>& split = std::nullopt) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto open = [&](const char* file) {
    std::ofstream out(dir / file, std::ios::binary);
    if (!out) throw DataError("cannot write " + (dir / file).string());
    return out;
  };
  {
    nlohmann::ordered_json meta;
    meta["name"] = name;
    meta["num_nodes"] = g.num_nodes();
    meta["num_classes"] = g.num_classes();
    meta["num_features"] = g.has_features() ? g.features()->cols : 0;
    auto out = open("meta.json");
    out << meta.dump(2) << '\n';
  }
  {
    auto out = open("edges.tsv");
    for (auto [a, b] : g.edge_list()) out << a << '\t' << b << '\n';
  }
  {
    auto out = open("labels.tsv");
    for (NodeId u = 0; u < g.num_nodes(); ++u)
      if (g.label(u) != kUnlabeled) out << u << '\t' << g.label(u) << '\n';
  }
  if (g.has_features()) {
    auto out = open("features.tsv");
    const auto& x = *g.features();
    for (NodeId u = 0; u < g.num_nodes(); ++u) {
      auto idx = x.row_indices(u);
      auto val = x.row_values(u);
      for (std::size_t i = 0; i < idx.size(); ++i) out << u << '\t' << idx[i] << '\t' << detail::format_double(val[i]) << '\n';
    }
  }
  if (g.has_names()) {
    auto out = open("names.tsv");
    for (NodeId u = 0; u < g.num_nodes(); ++u) out << u << '\t' << g.name(u) << '\n';
  }
  if (split) {
    nlohmann::ordered_json j;
    j["seed"] = split->seed;
    j["train_ids"] = split->train_ids;
    j["target_ids"] = split->target_ids;
    auto out = open("splits.json");
    out << j.dump(2) << '\n';
  }
}

struct SbmParams {
  std::size_t classes = 2;
  std::size_t per_class = 100;
  double p_in = 0.05;
  double p_out = 0.005;
  std::size_t feature_dim = 16;
  double noise = 1.0;
  std::uint64_t seed = 0;
};

/// Stochastic block model with contiguous equal-size classes.
///
/// Feature dimension j carries a unit bump for class (j mod classes), plus
/// i.i.d. Gaussian noise of standard deviation `noise` on every dimension.
inline Graph generate_sbm(const SbmParams& params) {
  if (params.classes < 2) throw UsageError("SBM needs at least two classes");
  if (params.per_class == 0) throw UsageError("SBM needs at least one node per class");
  if (!(params.p_in > params.p_out)) throw UsageError("SBM requires p_in > p_out");
  if (params.p_in > 1.0 || params.p_out < 0.0) throw UsageError("SBM probabilities must lie in [0, 1]");
  const std::size_t n = params.classes * params.per_class;
  std::mt19937_64 rng(params.seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  std::vector<ClassId> labels(n);
  for (std::size_t u = 0; u < n; ++u) labels[u] = static_cast<ClassId>(u / params.per_class);

  std::vector<std::pair<NodeId, NodeId>> edges;
  for (NodeId a = 0; a < n; ++a)
    for (NodeId b = a + 1; b < n; ++b)
      if (coin(rng) < (labels[a] == labels[b] ? params.p_in : params.p_out)) edges.emplace_back(a, b);

  std::optional<SparseRows> features;
  if (params.feature_dim > 0) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    features.emplace();
    features->cols = params.feature_dim;
    std::vector<std::pair<std::uint32_t, double>> row(params.feature_dim);
    for (std::size_t u = 0; u < n; ++u) {
      for (std::uint32_t j = 0; j < params.feature_dim; ++j) {
        const double bump = (j % params.classes) == static_cast<std::size_t>(labels[u]) ? 1.0 : 0.0;
        row[j] = {j, bump + params.noise * gauss(rng)};
      }
      features->push_row(row);
    }
  }
  return Graph(n, edges, std::move(labels), params.classes, std::move(features));
}

struct TrainedVictim {
  SgcModel model;
  std::vector<ClassId> predictions;  // argmax on the clean graph, every node
};

using VictimTrainer = std::function<TrainedVictim(std::span<const NodeId> train_ids)>;

struct SplitResult {
  ExperimentSplit split;
  TrainedVictim victim;
};

/// Samples `per_class` training nodes per class, trains the victim on them,
/// then samples `n_targets` correctly classified non-training nodes.
inline SplitResult sample_split(const Graph& g, const VictimTrainer& trainer, std::size_t per_class,
                                std::size_t n_targets, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  SplitResult out;
  out.split.seed = seed;
  for (std::size_t k = 0; k < g.num_classes(); ++k) {
    std::vector<NodeId> members;
    for (NodeId u = 0; u < g.num_nodes(); ++u)
      if (g.label(u) == static_cast<ClassId>(k)) members.push_back(u);
    if (members.size() < per_class)
      throw DataError("class " + std::to_string(k) + " has " + std::to_string(members.size()) +
                      " labeled nodes, need " + std::to_string(per_class));
    std::shuffle(members.begin(), members.end(), rng);
    out.split.train_ids.insert(out.split.train_ids.end(), members.begin(),
                               members.begin() + static_cast<std::ptrdiff_t>(per_class));
  }
  std::sort(out.split.train_ids.begin(), out.split.train_ids.end());

  out.victim = trainer(out.split.train_ids);
  std::vector<NodeId> eligible;
  for (NodeId u = 0; u < g.num_nodes(); ++u) {
    if (g.label(u) == kUnlabeled || std::binary_search(out.split.train_ids.begin(), out.split.train_ids.end(), u))
      continue;
    if (out.victim.predictions[u] == g.label(u)) eligible.push_back(u);
  }
  if (eligible.size() < n_targets)
    throw RuntimeFailure("only " + std::to_string(eligible.size()) + " correctly classified nodes available, need " +
                         std::to_string(n_targets));
  std::shuffle(eligible.begin(), eligible.end(), rng);
  eligible.resize(n_targets);
  std::sort(eligible.begin(), eligible.end());
  out.split.target_ids = std::move(eligible);
  return out;
}

// Most probable class other than `own_label`; ties go to the lowest class id.
inline ClassId pick_target_label(std::span<const double> probabilities, ClassId own_label) {
  if (probabilities.size() < 2) throw UsageError("target label selection needs at least two classes");
  ClassId best = -1;
  for (std::size_t k = 0; k < probabilities.size(); ++k) {
    if (static_cast<ClassId>(k) == own_label) continue;
    if (best < 0 || probabilities[k] > probabilities[static_cast<std::size_t>(best)]) best = static_cast<ClassId>(k);
  }
  return best;
}

inline ClassId pick_target_label(const SgcModel& model, const Matrix& propagated, NodeId v, ClassId own_label) {
  const RowVector p = model.probabilities(propagated.row(v));
  return pick_target_label(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())), own_label);
}

}  // namespace lpattack
