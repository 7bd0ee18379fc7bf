#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "lpattack/errors.hpp"
#include "lpattack/graph.hpp"
#include "lpattack/influence.hpp"

namespace lpattack {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::RowVectorXd;

inline constexpr const char* kModelFormat = "SGCv1";

// Stored features, or one-hot identity rows when the graph carries none.
inline SparseRows node_features(const Graph& g) {
  return g.has_features() ? *g.features() : SparseRows::identity(g.num_nodes());
}

inline Matrix to_dense(const SparseRows& x) {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(x.rows()), static_cast<Eigen::Index>(x.cols));
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto idx = x.row_indices(r);
    auto val = x.row_values(r);
    for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Eigen::Index>(r), idx[i]) += val[i];
  }
  return out;
}

/// H = Â^K X by K sparse aggregation passes.
template <GraphView G>
Matrix sgc_propagate(const G& g, const Matrix& x, int depth) {
  if (static_cast<std::size_t>(x.rows()) != g.num_nodes())
    throw UsageError("feature matrix has " + std::to_string(x.rows()) + " rows, graph has " +
                     std::to_string(g.num_nodes()) + " nodes");
  if (depth < 0) throw UsageError("propagation depth must be non-negative");
  const std::size_t n = g.num_nodes();
  std::vector<double> inv_sqrt(n);
  for (NodeId u = 0; u < n; ++u) inv_sqrt[u] = 1.0 / std::sqrt(static_cast<double>(g.degree(u)));
  Matrix h = x;
  for (int step = 0; step < depth; ++step) {
    Matrix next = Matrix::Zero(h.rows(), h.cols());
    for (NodeId u = 0; u < n; ++u) {
      g.for_each_neighbor(u, [&](NodeId w) { next.row(u) += (inv_sqrt[u] * inv_sqrt[w]) * h.row(w); });
    }
    h = std::move(next);
  }
  return h;
}

template <GraphView G>
Matrix sgc_propagate(const G& g, const SparseRows& x, int depth) {
  if (x.rows() != g.num_nodes()) throw UsageError("feature rows do not match node count");
  return sgc_propagate(g, to_dense(x), depth);
}

/// Single propagated row for v, touching only v's K-hop neighborhood.
template <GraphView G>
RowVector sgc_propagate_row(const G& g, const SparseRows& x, NodeId v, int depth) {
  if (x.rows() != g.num_nodes()) throw UsageError("feature rows do not match node count");
  RowVector out = RowVector::Zero(static_cast<Eigen::Index>(x.cols));
  for (const auto& [u, weight] : propagation_row(g, v, depth)) {
    auto idx = x.row_indices(u);
    auto val = x.row_values(u);
    for (std::size_t i = 0; i < idx.size(); ++i) out(idx[i]) += weight * val[i];
  }
  return out;
}

inline RowVector softmax(const RowVector& logits) {
  RowVector p = (logits.array() - logits.maxCoeff()).exp().matrix();
  return p / p.sum();
}

struct TrainingConfig {
  double lr = 0.2;
  int epochs = 300;
  double l2 = 5e-6;
  std::uint64_t seed = 0;
};

struct TrainingMeta {
  int epochs = 0;
  double final_loss = std::numeric_limits<double>::quiet_NaN();
  double lr = 0.0;
  double l2 = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> loss_history;
};

/// Linear classifier over K-step propagated features. `weights` is the
/// collapsed product of the per-layer matrices (features x classes).
struct SgcModel {
  int depth = 2;
  Matrix weights;
  bool trained = false;
  TrainingMeta meta;

  std::size_t num_features() const { return static_cast<std::size_t>(weights.rows()); }
  std::size_t num_classes() const { return static_cast<std::size_t>(weights.cols()); }

  void require_trained() const {
    if (!trained) throw UsageError("victim model is not trained");
  }

  RowVector probabilities(const RowVector& propagated) const { return softmax(propagated * weights); }

  Matrix predict_proba(const Matrix& propagated) const {
    Matrix logits = propagated * weights;
    Matrix out(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) out.row(r) = softmax(logits.row(r));
    return out;
  }

  std::vector<ClassId> predict(const Matrix& propagated) const {
    Matrix logits = propagated * weights;
    std::vector<ClassId> out(static_cast<std::size_t>(logits.rows()));
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      Eigen::Index best = 0;
      logits.row(r).maxCoeff(&best);
      out[static_cast<std::size_t>(r)] = static_cast<ClassId>(best);
    }
    return out;
  }
};

struct LossAndGradient {
  double loss = 0.0;
  Matrix gradient;
};

/// Mean cross-entropy over the training rows plus l2 * ||W||^2, and its
/// gradient with respect to W.
inline LossAndGradient sgc_loss_and_gradient(const Matrix& propagated, std::span<const NodeId> train_ids,
                                             std::span<const ClassId> labels, const Matrix& weights, double l2) {
  const auto m = static_cast<double>(train_ids.size());
  LossAndGradient out{0.0, Matrix::Zero(weights.rows(), weights.cols())};
  for (NodeId id : train_ids) {
    const RowVector h = propagated.row(id);
    RowVector p = softmax(h * weights);
    const ClassId y = labels[id];
    out.loss -= std::log(std::max(p(y), std::numeric_limits<double>::min()));
    p(y) -= 1.0;
    out.gradient.noalias() += h.transpose() * p;
  }
  out.loss = out.loss / m + l2 * weights.squaredNorm();
  out.gradient = out.gradient / m + 2.0 * l2 * weights;
  return out;
}

/// Full-batch gradient descent from zero weights.
inline SgcModel sgc_train(const Matrix& propagated, std::span<const NodeId> train_ids, std::span<const ClassId> labels,
                          std::size_t num_classes, const TrainingConfig& config, int depth) {
  if (train_ids.empty()) throw UsageError("training set is empty");
  if (num_classes < 2) throw UsageError("need at least two classes");
  for (NodeId id : train_ids) {
    if (id >= static_cast<std::size_t>(propagated.rows())) throw UsageError("training id out of range");
    if (labels[id] == kUnlabeled) throw DataError("training node " + std::to_string(id) + " has no label");
  }
  SgcModel model;
  model.depth = depth;
  model.weights = Matrix::Zero(propagated.cols(), static_cast<Eigen::Index>(num_classes));
  model.meta.lr = config.lr;
  model.meta.l2 = config.l2;
  model.meta.seed = config.seed;
  model.meta.loss_history.reserve(static_cast<std::size_t>(config.epochs) + 1);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    auto step = sgc_loss_and_gradient(propagated, train_ids, labels, model.weights, config.l2);
    if (!std::isfinite(step.loss))
      throw RuntimeFailure("training loss became non-finite at epoch " + std::to_string(epoch) +
                           " (lr=" + std::to_string(config.lr) + ", l2=" + std::to_string(config.l2) + ")");
    model.meta.loss_history.push_back(step.loss);
    model.weights -= config.lr * step.gradient;
  }
  const double final_loss = sgc_loss_and_gradient(propagated, train_ids, labels, model.weights, config.l2).loss;
  if (!std::isfinite(final_loss)) throw RuntimeFailure("final training loss is non-finite");
  model.meta.loss_history.push_back(final_loss);
  model.meta.final_loss = final_loss;
  model.meta.epochs = config.epochs;
  model.trained = true;
  return model;
}

/// f(Ã)_{v,c} - f(Ã)_{v,y_v} on softmax probabilities. Positive means the
/// target is now classified closer to c than to its own label.
template <GraphView G>
double attack_margin(const SgcModel& model, const G& g, const SparseRows& x, NodeId v, ClassId target_label,
                     ClassId own_label) {
  model.require_trained();
  g.check_node(v);
  if (x.cols != model.num_features()) throw UsageError("feature dimension does not match the model");
  const RowVector p = model.probabilities(sgc_propagate_row(g, x, v, model.depth));
  return p(target_label) - p(own_label);
}

struct LpState {
  int depth = 0;
  Matrix scores;
  std::vector<bool> seed_mask;

  std::vector<ClassId> predictions() const {
    std::vector<ClassId> out(static_cast<std::size_t>(scores.rows()));
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
      Eigen::Index best = 0;
      scores.row(r).maxCoeff(&best);
      out[static_cast<std::size_t>(r)] = static_cast<ClassId>(best);
    }
    return out;
  }
};

/// K symmetric-normalized propagation steps from one-hot seed labels.
template <GraphView G>
LpState label_propagation(const G& g, std::span<const ClassId> seeds, std::size_t num_classes, int depth) {
  if (seeds.size() != g.num_nodes()) throw UsageError("seed array size does not match node count");
  LpState state;
  state.depth = depth;
  state.seed_mask.assign(seeds.size(), false);
  Matrix y0 = Matrix::Zero(static_cast<Eigen::Index>(seeds.size()), static_cast<Eigen::Index>(num_classes));
  bool any = false;
  for (std::size_t u = 0; u < seeds.size(); ++u) {
    if (seeds[u] == kUnlabeled) continue;
    if (static_cast<std::size_t>(seeds[u]) >= num_classes) throw DataError("seed label out of range");
    y0(static_cast<Eigen::Index>(u), seeds[u]) = 1.0;
    state.seed_mask[u] = true;
    any = true;
  }
  if (!any) throw UsageError("label propagation needs at least one labeled seed");
  state.scores = sgc_propagate(g, y0, depth);
  return state;
}

struct ProportionalityEntry {
  NodeId node = 0;
  double feature_label_influence = 0.0;
  double label_influence = 0.0;
  double ratio = 0.0;
};

struct ProportionalityReport {
  NodeId source = 0;
  ClassId source_label = 0;
  // 1_{y_u}^T (x_u W): the closed-form proportionality constant.
  double constant = 0.0;
  std::vector<ProportionalityEntry> entries;
  // (max - min) / max(|max|, |min|) over the ratios; 0 when all vanish.
  double max_relative_spread = 0.0;
  double max_abs_deviation_from_constant = 0.0;
};

/// Compares feature-label influence of u on every v (from the model's
/// propagation applied to u's features alone) with label influence (from
/// walk products).
template <GraphView G>
ProportionalityReport proportionality_check(const SgcModel& model, const G& g, const SparseRows& x, NodeId u, int depth) {
  model.require_trained();
  g.check_node(u);
  const ClassId yu = g.label(u);
  if (yu == kUnlabeled) throw DataError("node " + std::to_string(u) + " has no label");

  // Features with only u's row kept; linearity makes Â^K X_u W the Jacobian
  // of h_v with respect to x_u contracted with x_u.
  Matrix only_u = Matrix::Zero(static_cast<Eigen::Index>(g.num_nodes()), static_cast<Eigen::Index>(x.cols));
  auto idx = x.row_indices(u);
  auto val = x.row_values(u);
  for (std::size_t i = 0; i < idx.size(); ++i) only_u(u, idx[i]) += val[i];
  const Matrix contribution = sgc_propagate(g, only_u, depth) * model.weights;

  ProportionalityReport report;
  report.source = u;
  report.source_label = yu;
  report.constant = (only_u.row(u) * model.weights)(yu);

  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (NodeId v : k_hop(g, u, depth)) {
    const double il = label_influence_exact(g, v, u, depth);
    if (il <= 1e-12) continue;
    const double ifl = contribution(v, yu);
    report.entries.push_back({v, ifl, il, ifl / il});
    lo = std::min(lo, ifl / il);
    hi = std::max(hi, ifl / il);
    report.max_abs_deviation_from_constant =
        std::max(report.max_abs_deviation_from_constant, std::abs(ifl / il - report.constant));
  }
  if (report.entries.empty()) throw RuntimeFailure("label influence vanishes for every node");
  const double scale = std::max(std::abs(lo), std::abs(hi));
  report.max_relative_spread = scale == 0.0 ? 0.0 : (hi - lo) / scale;
  return report;
}

/// Max abs difference between h_v = (Â^K X W)_v and its reconstruction
/// sum_u I_l(v,u;K) x_u W over the K-hop set.
template <GraphView G>
double spanning_identity_error(const SgcModel& model, const G& g, const SparseRows& x, NodeId v, int depth) {
  const RowVector direct = sgc_propagate_row(g, x, v, depth) * model.weights;
  RowVector rebuilt = RowVector::Zero(direct.size());
  for (NodeId u : k_hop(g, v, depth)) {
    RowVector xu = RowVector::Zero(static_cast<Eigen::Index>(x.cols));
    auto idx = x.row_indices(u);
    auto val = x.row_values(u);
    for (std::size_t i = 0; i < idx.size(); ++i) xu(idx[i]) += val[i];
    rebuilt += label_influence_exact(g, v, u, depth) * (xu * model.weights);
  }
  return (direct - rebuilt).cwiseAbs().maxCoeff();
}

inline nlohmann::json model_to_json(const SgcModel& model) {
  model.require_trained();
  nlohmann::json j;
  j["format"] = kModelFormat;
  j["depth"] = model.depth;
  j["num_features"] = model.num_features();
  j["num_classes"] = model.num_classes();
  std::vector<double> flat(model.weights.data(), model.weights.data() + model.weights.size());
  j["weights"] = flat;
  j["train_meta"] = {{"epochs", model.meta.epochs}, {"final_loss", model.meta.final_loss},
                     {"lr", model.meta.lr},         {"l2", model.meta.l2},
                     {"seed", model.meta.seed}};
  return j;
}

inline SgcModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kModelFormat) throw DataError("unsupported model format");
    SgcModel model;
    model.depth = j.at("depth").get<int>();
    const auto rows = j.at("num_features").get<Eigen::Index>();
    const auto cols = j.at("num_classes").get<Eigen::Index>();
    const auto flat = j.at("weights").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(flat.size()) != rows * cols) throw DataError("weight count does not match dims");
    model.weights = Eigen::Map<const Matrix>(flat.data(), rows, cols);
    const auto& meta = j.at("train_meta");
    model.meta.epochs = meta.at("epochs").get<int>();
    model.meta.final_loss = meta.at("final_loss").get<double>();
    model.meta.lr = meta.value("lr", 0.0);
    model.meta.l2 = meta.value("l2", 0.0);
    model.meta.seed = meta.value("seed", std::uint64_t{0});
    model.trained = true;
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
}

inline void save_model(const SgcModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write model file " + path.string());
  out << model_to_json(model).dump(1) << '\n';
}

inline SgcModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read model file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
  return model_from_json(j);
}

}  // namespace lpattack
