#include "drcnn/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "drcnn/dataset.hpp"
#include "drcnn/error.hpp"
#include "drcnn/json_util.hpp"
#include "drcnn/parallel.hpp"
#include "drcnn/random.hpp"

namespace drcnn {

using json_util::json;

json to_json(const RfConfig& cfg) {
  return {{"num_trees", cfg.num_trees},
          {"max_features", cfg.max_features},
          {"max_depth", cfg.max_depth},
          {"min_samples_leaf", cfg.min_samples_leaf},
          {"w0", cfg.w0},
          {"w1", cfg.w1},
          {"bootstrap", cfg.bootstrap},
          {"per_split_features", cfg.per_split_features},
          {"seed", cfg.seed}};
}

RfConfig rf_config_from_json(const json& j) {
  using namespace json_util;
  object(j, "");
  RfConfig cfg;
  for (const auto& [key, v] : j.items()) {
    if (key == "num_trees") cfg.num_trees = static_cast<int>(as_int(v, key));
    else if (key == "max_features") cfg.max_features = static_cast<int>(as_int(v, key));
    else if (key == "max_depth") cfg.max_depth = static_cast<int>(as_int(v, key));
    else if (key == "min_samples_leaf") cfg.min_samples_leaf = static_cast<int>(as_int(v, key));
    else if (key == "w0") cfg.w0 = as_double(v, key);
    else if (key == "w1") cfg.w1 = as_double(v, key);
    else if (key == "bootstrap") cfg.bootstrap = as_bool(v, key);
    else if (key == "per_split_features") cfg.per_split_features = as_bool(v, key);
    else if (key == "seed") cfg.seed = as_u64(v, key);
    else throw SchemaError(key, "unknown key");
  }
  return cfg;
}

double gini(double neg, double pos) {
  const double t = neg + pos;
  if (t <= 0.0) return 0.0;
  const double a = neg / t;
  const double b = pos / t;
  return 1.0 - a * a - b * b;
}

namespace {

std::vector<int> draw_features(Eigen::Index total, int count, Rng& rng) {
  std::vector<int> all(static_cast<std::size_t>(total));
  std::iota(all.begin(), all.end(), 0);
  const std::size_t take = std::min<std::size_t>(all.size(), static_cast<std::size_t>(count));
  for (std::size_t k = 0; k < take; ++k) std::swap(all[k], all[k + rng.index(all.size() - k)]);
  all.resize(take);
  std::sort(all.begin(), all.end());
  return all;
}

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double impurity = 0.0;
};

}  // namespace

DecisionTree grow_tree(const Eigen::Ref<const Eigen::MatrixXd>& x, const std::vector<bool>& y,
                       std::vector<Eigen::Index> rows, std::vector<int> features, const RfConfig& cfg,
                       std::uint64_t seed) {
  DecisionTree tree;
  std::sort(features.begin(), features.end());
  tree.features = features;
  Rng rng(seed);

  struct Pending {
    int node;
    std::size_t begin;
    std::size_t end;
    int depth;
  };
  tree.nodes.emplace_back();
  std::vector<Pending> stack{{0, 0, rows.size(), 0}};
  std::vector<std::pair<double, Eigen::Index>> sorted;

  while (!stack.empty()) {
    const Pending job = stack.back();
    stack.pop_back();
    double wneg = 0.0;
    double wpos = 0.0;
    for (std::size_t i = job.begin; i < job.end; ++i) {
      if (y[static_cast<std::size_t>(rows[i])]) wpos += cfg.w1;
      else wneg += cfg.w0;
    }
    const double total = wneg + wpos;
    TreeNode& leaf = tree.nodes[static_cast<std::size_t>(job.node)];
    leaf.value = total > 0.0 ? wpos / total : 0.0;

    const std::size_t count = job.end - job.begin;
    const double parent = gini(wneg, wpos);
    const auto min_leaf = static_cast<std::size_t>(std::max(1, cfg.min_samples_leaf));
    if (parent <= 0.0 || count < 2 * min_leaf || (cfg.max_depth > 0 && job.depth >= cfg.max_depth)) {
      continue;
    }

    const std::vector<int> candidates =
        cfg.per_split_features
            ? draw_features(static_cast<Eigen::Index>(features.size()), cfg.max_features, rng)
            : std::vector<int>();
    const std::size_t ncand = cfg.per_split_features ? candidates.size() : features.size();

    Split best;
    best.impurity = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < ncand; ++c) {
      const int f = cfg.per_split_features ? features[static_cast<std::size_t>(candidates[c])] : features[c];
      sorted.clear();
      for (std::size_t i = job.begin; i < job.end; ++i) sorted.emplace_back(x(rows[i], f), rows[i]);
      std::sort(sorted.begin(), sorted.end());
      double lneg = 0.0;
      double lpos = 0.0;
      for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        if (y[static_cast<std::size_t>(sorted[i].second)]) lpos += cfg.w1;
        else lneg += cfg.w0;
        if (sorted[i].first == sorted[i + 1].first) continue;
        if (i + 1 < min_leaf || sorted.size() - i - 1 < min_leaf) continue;
        const double rneg = wneg - lneg;
        const double rpos = wpos - lpos;
        const double imp = ((lneg + lpos) * gini(lneg, lpos) + (rneg + rpos) * gini(rneg, rpos)) / total;
        if (imp < best.impurity) {
          best = {f, 0.5 * (sorted[i].first + sorted[i + 1].first), imp};
          // Midpoints of huge neighbours can round up to the right value.
          if (!(best.threshold < sorted[i + 1].first)) best.threshold = sorted[i].first;
        }
      }
    }
    if (best.feature < 0) continue;

    const auto mid = std::partition(rows.begin() + static_cast<std::ptrdiff_t>(job.begin),
                                    rows.begin() + static_cast<std::ptrdiff_t>(job.end),
                                    [&](Eigen::Index r) { return x(r, best.feature) <= best.threshold; });
    const auto split_at = static_cast<std::size_t>(mid - rows.begin());
    const int left = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    TreeNode& node = tree.nodes[static_cast<std::size_t>(job.node)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = left;
    node.right = left + 1;
    node.value = 0.0;
    // Right pushed first so the left subtree is grown first.
    stack.push_back({left + 1, split_at, job.end, job.depth + 1});
    stack.push_back({left, job.begin, split_at, job.depth + 1});
  }
  return tree;
}

RandomForest rf_train(const Eigen::Ref<const Eigen::MatrixXd>& x, const std::vector<bool>& y,
                      const RfConfig& cfg, int threads) {
  if (x.rows() < 1) throw ValidationError("rf_train: empty training set");
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw ValidationError("rf_train: label count mismatch");
  if (cfg.num_trees < 1 || cfg.max_features < 1) throw ConfigError("rf: num_trees and max_features must be positive");
  if (cfg.w0 < 0.0 || cfg.w1 < 0.0) throw ConfigError("rf: class weights must be non-negative");

  RandomForest forest;
  forest.num_features = x.cols();
  forest.trees.resize(static_cast<std::size_t>(cfg.num_trees));
  parallel_for(forest.trees.size(), threads, [&](std::size_t t) {
    Rng rng(derive_seed(cfg.seed, t));
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(x.rows()));
    if (cfg.bootstrap) {
      for (auto& r : rows) r = static_cast<Eigen::Index>(rng.index(rows.size()));
    } else {
      std::iota(rows.begin(), rows.end(), Eigen::Index{0});
    }
    std::vector<int> features;
    if (cfg.per_split_features) {
      features.resize(static_cast<std::size_t>(x.cols()));
      std::iota(features.begin(), features.end(), 0);
    } else {
      features = draw_features(x.cols(), cfg.max_features, rng);
    }
    forest.trees[t] = grow_tree(x, y, std::move(rows), std::move(features), cfg, rng.next());
  });
  forest.meta = {{"config", to_json(cfg)}, {"num_train_samples", x.rows()}};
  return forest;
}

RandomForest rf_train(std::span<const Sample> samples, const RfConfig& cfg, int threads) {
  if (samples.empty()) throw ValidationError("rf_train: empty training set");
  return rf_train(feature_matrix(samples), label_vector(samples), cfg, threads);
}

Eigen::VectorXd rf_predict(const RandomForest& forest, const Eigen::Ref<const Eigen::MatrixXd>& x) {
  if (x.cols() != forest.num_features) {
    throw ValidationError("rf_predict: expected " + std::to_string(forest.num_features) + " features, got " +
                          std::to_string(x.cols()));
  }
  if (forest.trees.empty()) throw ValidationError("rf_predict: empty forest");
  Eigen::VectorXd out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double s = 0.0;
    for (const DecisionTree& t : forest.trees) s += t.predict(x.row(i));
    out(i) = s / static_cast<double>(forest.trees.size());
  }
  return out;
}

Eigen::VectorXd rf_predict(const RandomForest& forest, std::span<const Sample> samples) {
  if (samples.empty()) return {};
  return rf_predict(forest, feature_matrix(samples));
}

std::string save_forest(const RandomForest& forest) {
  json root;
  root["version"] = 1;
  root["kind"] = "random_forest";
  root["num_features"] = forest.num_features;
  json trees = json::array();
  for (const DecisionTree& t : forest.trees) {
    json nodes = json::array();
    for (const TreeNode& n : t.nodes) nodes.push_back(json::array({n.feature, n.threshold, n.left, n.right, n.value}));
    trees.push_back({{"features", t.features}, {"nodes", std::move(nodes)}});
  }
  root["trees"] = std::move(trees);
  root["meta"] = forest.meta;
  return root.dump() + "\n";
}

RandomForest load_forest(std::string_view document) {
  using namespace json_util;
  const json root = json_util::parse(document);
  object(root, "");
  if (get_int(root, "version", "") != 1) throw ValidationError("forest: unsupported version");
  if (as_string(field(root, "kind", ""), "kind") != "random_forest") {
    throw ValidationError("forest: not a random forest model");
  }
  RandomForest forest;
  forest.num_features = get_int(root, "num_features", "");
  const json& trees = array(field(root, "trees", ""), "trees");
  for (std::size_t t = 0; t < trees.size(); ++t) {
    const std::string p = join("trees", t);
    DecisionTree tree;
    const json& feats = array(field(trees[t], "features", p), join(p, "features"));
    for (std::size_t k = 0; k < feats.size(); ++k) tree.features.push_back(static_cast<int>(as_int(feats[k], p)));
    const json& nodes = array(field(trees[t], "nodes", p), join(p, "nodes"));
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      const std::string np = join(join(p, "nodes"), k);
      const json& n = array(nodes[k], np);
      if (n.size() != 5) throw SchemaError(np, "expected [feature, threshold, left, right, value]");
      tree.nodes.push_back({static_cast<int>(as_int(n[0], np)), as_double(n[1], np), static_cast<int>(as_int(n[2], np)),
                            static_cast<int>(as_int(n[3], np)), as_double(n[4], np)});
    }
    const auto count = static_cast<int>(tree.nodes.size());
    if (count == 0) throw ValidationError(p + ": no nodes");
    for (int k = 0; k < count; ++k) {
      const TreeNode& n = tree.nodes[static_cast<std::size_t>(k)];
      if (n.is_leaf()) {
        if (n.value < 0.0 || n.value > 1.0) throw ValidationError(p + ": leaf probability outside [0,1]");
        continue;
      }
      if (n.feature >= forest.num_features || n.left <= k || n.right <= k || n.left >= count || n.right >= count) {
        throw ValidationError(p + ": malformed node " + std::to_string(k));
      }
    }
    forest.trees.push_back(std::move(tree));
  }
  if (forest.trees.empty()) throw ValidationError("forest: no trees");
  if (auto* meta = optional_field(root, "meta")) forest.meta = *meta;
  return forest;
}

}  // namespace drcnn
