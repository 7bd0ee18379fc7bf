// Command-line front end: attack, sweep, bench, influence, train-victim,
// gen-sbm and inspect.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lpattack/attack.hpp"
#include "lpattack/data.hpp"
#include "lpattack/errors.hpp"
#include "lpattack/harness.hpp"
#include "lpattack/influence.hpp"
#include "lpattack/victim.hpp"

namespace fs = std::filesystem;
using namespace lpattack;

namespace {

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::string out;
};

Bundle load_reporting(const std::string& path) {
  auto bundle = load_bundle(path);
  for (const auto& w : bundle.warnings) std::cerr << "warning: " << w << '\n';
  return bundle;
}

NodeId resolve_node(const Graph& g, const std::string& token) {
  auto id = g.find(token);
  if (!id) throw UsageError("unknown node '" + token + "'");
  return *id;
}

// Training ids for a standalone victim: the bundle split if present,
// otherwise every labeled node.
std::vector<NodeId> default_train_ids(const Bundle& bundle) {
  if (bundle.split && !bundle.split->train_ids.empty()) return bundle.split->train_ids;
  std::vector<NodeId> ids;
  for (NodeId u = 0; u < bundle.graph.num_nodes(); ++u)
    if (bundle.graph.label(u) != kUnlabeled) ids.push_back(u);
  if (ids.empty()) throw DataError("bundle has no labeled nodes to train on");
  return ids;
}

SgcModel train_default_victim(const Graph& g, const std::vector<NodeId>& train_ids, int depth,
                              const TrainingConfig& training) {
  const auto propagated = sgc_propagate(g, node_features(g), depth);
  return sgc_train(propagated, train_ids, g.labels(), g.num_classes(), training, depth);
}

void print_json(const nlohmann::ordered_json& j) { std::cout << j.dump(2) << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Influence-based targeted evasion attacks on graph node classifiers"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions global;
  app.add_option("--config", global.config, "Experiment config (JSON)");
  app.add_option("--seed", global.seed, "Random seed override");
  app.add_option("--workers", global.workers, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", global.out, "Output directory");

  // attack
  auto* attack = app.add_subcommand("attack", "Plan an attack on a single target and print it as JSON");
  std::string bundle_path, target_token, model_path, mode = "approx", label_source = "true";
  int budget = 1, depth = 2;
  std::optional<int> target_label;
  bool no_early_stop = false, positive_gain = false, no_timing = false;
  attack->add_option("--bundle", bundle_path, "Graph bundle directory")->required();
  attack->add_option("--target", target_token, "Target node (name or id)")->required();
  attack->add_option("--budget", budget, "Maximum number of edge toggles")->check(CLI::PositiveNumber);
  attack->add_option("--k", depth, "Propagation depth")->check(CLI::Range(1, kMaxDepth));
  attack->add_option("--mode", mode, "approx or exact")->check(CLI::IsMember({"approx", "exact"}));
  attack->add_option("--label-source", label_source, "true or estimated")->check(CLI::IsMember({"true", "estimated"}));
  attack->add_option("--target-label", target_label, "Target class (default: victim's second choice)");
  attack->add_option("--model", model_path, "Trained victim (SGCv1); trained on the fly when absent");
  attack->add_flag("--no-early-stop", no_early_stop, "Spend the whole budget even after success");
  attack->add_flag("--require-positive-gain", positive_gain, "Stop when no candidate has a positive gain");
  attack->add_flag("--no-timing", no_timing, "Omit wall time from the output");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Run a budget sweep described by --config");

  // bench
  auto* bench = app.add_subcommand("bench", "Time approx vs exact planning on the --config targets");

  // influence
  auto* influence = app.add_subcommand("influence", "Exact, DFS and approximate influence for one (v, u, K)");
  std::string v_token, u_token;
  influence->add_option("--bundle", bundle_path, "Graph bundle directory")->required();
  influence->add_option("--v", v_token, "Target node")->required();
  influence->add_option("--u", u_token, "Source node")->required();
  influence->add_option("--k", depth, "Propagation depth")->check(CLI::Range(1, kMaxDepth));
  influence->add_option("--target-label", target_label, "Target class (default: u's label when it differs)");

  // train-victim
  auto* train = app.add_subcommand("train-victim", "Train an SGC victim and write <out>/model.json");
  TrainingConfig training;
  train->add_option("--bundle", bundle_path, "Graph bundle directory")->required();
  train->add_option("--k", depth, "Propagation depth")->check(CLI::Range(1, kMaxDepth));
  train->add_option("--lr", training.lr, "Learning rate");
  train->add_option("--epochs", training.epochs, "Epochs");
  train->add_option("--l2", training.l2, "L2 penalty");

  // gen-sbm
  auto* gen = app.add_subcommand("gen-sbm", "Generate a stochastic block model bundle into --out");
  SbmParams sbm;
  gen->add_option("--classes", sbm.classes, "Number of classes");
  gen->add_option("--per-class", sbm.per_class, "Nodes per class");
  gen->add_option("--p-in", sbm.p_in, "Within-class edge probability");
  gen->add_option("--p-out", sbm.p_out, "Between-class edge probability");
  gen->add_option("--feature-dim", sbm.feature_dim, "Feature dimension (0 for none)");
  gen->add_option("--noise", sbm.noise, "Feature noise standard deviation");

  // inspect
  auto* inspect = app.add_subcommand("inspect", "Print bundle statistics as JSON");
  inspect->add_option("--bundle", bundle_path, "Graph bundle directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*attack) {
      auto bundle = load_reporting(bundle_path);
      const Graph& g = bundle.graph;
      const NodeId v = resolve_node(g, target_token);
      SgcModel model = model_path.empty()
                           ? train_default_victim(g, default_train_ids(bundle), depth, training)
                           : load_model(model_path);
      auto prep = prepare_with_model(g, std::move(model), parse_label_source(label_source), default_train_ids(bundle));
      AttackOptions options;
      options.budget = budget;
      options.mode = parse_mode(mode);
      options.early_stop = !no_early_stop;
      options.require_positive_gain = positive_gain;
      auto plan = attack_target(prep, v, options, depth, parse_label_source(label_source),
                                target_label ? std::optional<ClassId>(*target_label) : std::nullopt);
      auto j = plan_to_json(plan, g, !no_timing);
      j["mode"] = mode;
      j["label_source"] = label_source;
      j["k"] = depth;
      j["budget"] = budget;
      print_json(j);
      return 0;
    }

    if (*sweep || *bench) {
      if (global.config.empty()) throw UsageError("--config is required");
      auto config = load_config(global.config);
      if (global.seed) config.seed = *global.seed;
      if (global.workers) config.workers = *global.workers;
      std::vector<std::string> warnings;
      Graph g = materialize_graph(config, &warnings);
      for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
      if (*bench) {
        print_json(to_json(bench_influence(g, config)));
        return 0;
      }
      const fs::path out = global.out.empty() ? fs::path(".") : fs::path(global.out);
      auto result = run_sweep(g, config, out);
      print_json(summary_json(result, config));
      return 0;
    }

    if (*influence) {
      auto bundle = load_reporting(bundle_path);
      const Graph& g = bundle.graph;
      const NodeId v = resolve_node(g, v_token);
      const NodeId u = resolve_node(g, u_token);
      nlohmann::ordered_json j;
      j["v"] = g.name(v);
      j["u"] = g.name(u);
      j["k"] = depth;
      j["walks"] = enumerate_walks(g, v, u, depth).walks.size();
      j["exact"] = label_influence_exact(g, v, u, depth);
      j["matrix_power"] = norm_adj_power_row(g, v, depth)[u];

      const ClassId own = g.label(v);
      std::optional<ClassId> c;
      if (target_label) c = *target_label;
      else if (g.label(u) != kUnlabeled && g.label(u) != own) c = g.label(u);
      else if (own != kUnlabeled) c = own == 0 ? 1 : 0;
      if (own != kUnlabeled && c) {
        InfluenceQuery q{v, *c, own, depth, LabelSource::true_labels};
        const auto labels = g.labels();
        nlohmann::ordered_json obj;
        obj["own_label"] = own;
        obj["target_label"] = *c;
        obj["exact"] = objective_exact(g, q, labels);
        obj["dfs"] = label_influence_dfs(g, v, depth, q, labels);
        obj["approx_constant_add"] = approx_constant(g, q, labels, Direction::add);
        if (g.degree(v) > 1) obj["approx_constant_delete"] = approx_constant(g, q, labels, Direction::remove);
        if (u != v) {
          const Direction dir = g.has_edge(v, u) ? Direction::remove : Direction::add;
          obj["candidate_direction"] = to_string(dir);
          obj["approx_delta"] = approx_delta(g, q, labels, u, dir);
          if (dir == Direction::add || g.degree(v) > 1) {
            InfluenceBreakdown b{approx_constant(g, q, labels, dir), obj["approx_delta"].get<double>(), u, dir};
            obj["approx_gain"] = b.gain();
          }
        }
        j["objective"] = obj;
      }
      print_json(j);
      return 0;
    }

    if (*train) {
      auto bundle = load_reporting(bundle_path);
      const Graph& g = bundle.graph;
      std::vector<NodeId> train_ids;
      if (global.seed || !bundle.split) {
        const auto propagated = sgc_propagate(g, node_features(g), depth);
        training.seed = global.seed.value_or(0);
        auto trainer = [&](std::span<const NodeId> ids) {
          TrainedVictim tv;
          tv.model = sgc_train(propagated, ids, g.labels(), g.num_classes(), training, depth);
          tv.predictions = tv.model.predict(propagated);
          return tv;
        };
        auto split = sample_split(g, trainer, 20, 1, training.seed);
        train_ids = split.split.train_ids;
      } else {
        train_ids = bundle.split->train_ids;
      }
      auto model = train_default_victim(g, train_ids, depth, training);
      auto prep = prepare_with_model(g, model, LabelSource::true_labels, train_ids);
      const fs::path out = global.out.empty() ? fs::path(".") : fs::path(global.out);
      fs::create_directories(out);
      save_model(model, out / "model.json");
      nlohmann::ordered_json j;
      j["model"] = (out / "model.json").string();
      j["train_size"] = train_ids.size();
      j["final_loss"] = model.meta.final_loss;
      j["test_accuracy"] = prep.test_accuracy;
      print_json(j);
      return 0;
    }

    if (*gen) {
      if (global.out.empty()) throw UsageError("--out is required");
      sbm.seed = global.seed.value_or(0);
      Graph g = generate_sbm(sbm);
      save_bundle(g, global.out, "sbm");
      nlohmann::ordered_json j = to_json(sbm);
      j["num_nodes"] = g.num_nodes();
      j["num_edges"] = g.num_edges();
      print_json(j);
      return 0;
    }

    if (*inspect) {
      auto bundle = load_reporting(bundle_path);
      const Graph& g = bundle.graph;
      std::size_t max_degree = 0, isolated = 0, same_label = 0, labeled_edges = 0;
      std::vector<std::size_t> per_class(g.num_classes(), 0);
      std::size_t unlabeled = 0;
      for (NodeId u = 0; u < g.num_nodes(); ++u) {
        max_degree = std::max(max_degree, g.degree(u));
        isolated += g.degree(u) == 1;
        if (g.label(u) == kUnlabeled) ++unlabeled;
        else ++per_class[static_cast<std::size_t>(g.label(u))];
      }
      for (auto [a, b] : g.edge_list()) {
        if (g.label(a) == kUnlabeled || g.label(b) == kUnlabeled) continue;
        ++labeled_edges;
        same_label += g.label(a) == g.label(b);
      }
      nlohmann::ordered_json j;
      j["name"] = bundle.name;
      j["num_nodes"] = g.num_nodes();
      j["num_edges"] = g.num_edges();
      j["num_classes"] = g.num_classes();
      j["num_features"] = g.has_features() ? g.features()->cols : 0;
      j["mean_degree"] = g.num_nodes() ? 2.0 * static_cast<double>(g.num_edges()) / static_cast<double>(g.num_nodes()) : 0.0;
      j["max_degree"] = max_degree - 1;
      j["isolated_nodes"] = isolated;
      j["class_counts"] = per_class;
      j["unlabeled"] = unlabeled;
      j["homophily"] = labeled_edges ? static_cast<double>(same_label) / static_cast<double>(labeled_edges) : 0.0;
      j["has_split"] = bundle.split.has_value();
      print_json(j);
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 1;
}
