#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "drcnn/features.hpp"

namespace drcnn {

struct RfConfig {
  int num_trees = 100;
  int max_features = 20;
  int max_depth = 0;  // 0 = unlimited
  int min_samples_leaf = 1;
  double w0 = 1.0;
  double w1 = 10.0;
  bool bootstrap = true;
  /// Sample max_features candidates at every split instead of once per tree.
  bool per_split_features = false;
  std::uint64_t seed = 0;
};

nlohmann::json to_json(const RfConfig& cfg);
RfConfig rf_config_from_json(const nlohmann::json& j);

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;   // value <= threshold
  int right = -1;  // value > threshold
  double value = 0.0;  // class-weighted positive probability (leaves)

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

struct DecisionTree {
  std::vector<int> features;  // assigned feature subset, ascending
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  template <typename Row>
  double predict(const Row& x) const {
    int k = 0;
    while (!nodes[static_cast<std::size_t>(k)].is_leaf()) {
      const TreeNode& n = nodes[static_cast<std::size_t>(k)];
      k = x(n.feature) <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(k)].value;
  }
  bool operator==(const DecisionTree&) const = default;
};

struct RandomForest {
  Eigen::Index num_features = 0;
  std::vector<DecisionTree> trees;
  nlohmann::json meta;
};

/// Gini impurity of a node holding class weights (neg, pos).
double gini(double neg, double pos);

/// Grows one tree on the given rows (duplicates allowed) using the
/// candidate features; greedy class-weighted Gini splits at midpoints.
DecisionTree grow_tree(const Eigen::Ref<const Eigen::MatrixXd>& x, const std::vector<bool>& y,
                       std::vector<Eigen::Index> rows, std::vector<int> features, const RfConfig& cfg,
                       std::uint64_t seed);

RandomForest rf_train(const Eigen::Ref<const Eigen::MatrixXd>& x, const std::vector<bool>& y,
                      const RfConfig& cfg, int threads = 1);
RandomForest rf_train(std::span<const Sample> samples, const RfConfig& cfg, int threads = 1);

/// Mean leaf probability over trees, in [0, 1].
Eigen::VectorXd rf_predict(const RandomForest& forest, const Eigen::Ref<const Eigen::MatrixXd>& x);
Eigen::VectorXd rf_predict(const RandomForest& forest, std::span<const Sample> samples);

std::string save_forest(const RandomForest& forest);
RandomForest load_forest(std::string_view document);

}  // namespace drcnn
