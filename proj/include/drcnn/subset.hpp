#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "drcnn/random.hpp"

namespace drcnn {

enum class SelectionMode { all, largest_variance, srs };

std::string to_string(SelectionMode mode);
SelectionMode selection_mode_from(const std::string& name);

struct SelectionConfig {
  SelectionMode mode = SelectionMode::srs;
  int subset_size = 20;
  int num_voters = 100;
  std::uint64_t seed = 0;
};

/// Indices of the transformed features wired to one voter, ascending.
using SubsetMask = std::vector<int>;

/// Dense form of the subset-connection layer: one row per selected feature
/// with a single 1 in that feature's column. Biases are all zero.
Eigen::MatrixXd mask_matrix(const SubsetMask& mask, Eigen::Index num_features);

/// The n largest variances; ties go to the lower index.
SubsetMask select_largest(int n, const Eigen::VectorXd& variances);

/// Smart Random Selection: n draws without replacement, each picking a
/// remaining feature with probability proportional to its variance. When
/// every remaining variance is zero the draw is uniform over what remains.
SubsetMask srs_select(int n, const Eigen::VectorXd& variances, Rng& rng);

/// One mask per voter. srs voter v draws from stream derive_seed(seed, v).
std::vector<SubsetMask> build_masks(const SelectionConfig& cfg, const Eigen::VectorXd& variances);

}  // namespace drcnn
