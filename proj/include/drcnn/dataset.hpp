#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "drcnn/features.hpp"

namespace drcnn {

struct SplitSpec {
  double train_frac = 0.2;
  double valid_frac = 0.2;
  double test_frac = 0.6;
  std::set<std::string> holdout_designs;
  std::uint64_t seed = 0;
};

struct SplitResult {
  std::vector<Sample> train;
  std::vector<Sample> valid;
  std::map<std::string, std::vector<Sample>> tests;
};

/// Per-design train/valid/test sizes for `n` samples: nearest-integer
/// train and valid counts, remainder to test.
struct SplitCounts {
  std::size_t train = 0;
  std::size_t valid = 0;
  std::size_t test = 0;
};
/// Keys train_frac, valid_frac, test_frac, holdout (list), seed.
SplitSpec split_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SplitSpec& spec);

SplitCounts split_counts(std::size_t n, const SplitSpec& spec, bool holdout);

/// Deterministic in (samples, spec). Designs are processed in name order.
SplitResult split(std::span<const Sample> samples, const SplitSpec& spec);

/// Per-feature mean and population standard deviation of a training set.
/// Only obtainable from training data (fit_norm) or a stored model.
class NormStats {
 public:
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::VectorXd& stddev() const { return std_; }
  Eigen::Index dim() const { return mean_.size(); }

  /// Rebuilds stats read back from a model file; checks shapes and signs.
  static NormStats restore(Eigen::VectorXd mean, Eigen::VectorXd stddev);

  bool operator==(const NormStats& o) const { return mean_ == o.mean_ && std_ == o.std_; }

 private:
  NormStats(Eigen::VectorXd mean, Eigen::VectorXd stddev)
      : mean_(std::move(mean)), std_(std::move(stddev)) {}

  Eigen::VectorXd mean_;
  Eigen::VectorXd std_;

  friend NormStats fit_norm(const Eigen::Ref<const Eigen::MatrixXd>& train);
};

NormStats fit_norm(const Eigen::Ref<const Eigen::MatrixXd>& train);
NormStats fit_norm(std::span<const Sample> train);

/// (x - mean) / std per column; zero-variance columns map to 0.
Eigen::MatrixXd apply_norm(const NormStats& stats, const Eigen::Ref<const Eigen::MatrixXd>& x);
Eigen::MatrixXd apply_norm(const NormStats& stats, std::span<const Sample> samples);

/// Stacks sample features into an n x N matrix.
Eigen::MatrixXd feature_matrix(std::span<const Sample> samples);
std::vector<bool> label_vector(std::span<const Sample> samples);

// Split manifests.

struct SampleKey {
  std::string design;
  int col = 0;
  int row = 0;
  auto operator<=>(const SampleKey&) const = default;
};

SampleKey key_of(const Sample& s);

struct SourceFile {
  std::filesystem::path path;  // as stored: relative to the manifest directory
  std::string fnv1a64;
};

struct SplitManifest {
  std::vector<SourceFile> sources;
  SplitSpec spec;
  std::vector<SampleKey> train;
  std::vector<SampleKey> valid;
  std::map<std::string, std::vector<SampleKey>> tests;
};

SplitManifest make_manifest(const SplitResult& result, const SplitSpec& spec,
                            std::vector<SourceFile> sources);
std::string write_manifest(const SplitManifest& m);
SplitManifest parse_manifest(std::string_view document);

/// Loads the manifest's sample sources (relative to `manifest_dir`),
/// verifies their hashes and rebuilds the split.
SplitResult resolve_manifest(const SplitManifest& m, const std::filesystem::path& manifest_dir);

}  // namespace drcnn
