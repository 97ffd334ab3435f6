#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "drcnn/dataset.hpp"
#include "drcnn/pca.hpp"
#include "drcnn/subset.hpp"
#include "drcnn/voter_net.hpp"

namespace drcnn {

inline constexpr int kModelFormatVersion = 1;

struct TrainConfig {
  double learning_rate = 0.001;
  int epochs = 50;
  int batch_size = 32;
  int hidden = kDefaultHidden;
  SelectionConfig selection;
  LossConfig loss;
  /// Whether the PCA layer is fitted; unset means "on unless mode is all".
  std::optional<bool> pca;
  /// Root of every random stream: voter initialization and shuffling, and
  /// (combined with selection.seed) the SRS masks.
  std::uint64_t seed = 0;

  bool use_pca() const { return pca.value_or(selection.mode != SelectionMode::all); }
};

nlohmann::json to_json(const TrainConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig train_config_from_json(const nlohmann::json& j);

/// Normalization -> PCA (optional) -> per-voter subset connection -> voters
/// -> sum. Only the voters carry trainable parameters.
struct EnsembleModel {
  NormStats norm;
  std::optional<PcaModel<double>> pca;
  std::vector<SubsetMask> masks;
  std::vector<VoterNet<double>> voters;
  nlohmann::json meta;

  std::size_t num_voters() const { return voters.size(); }
  Eigen::Index num_features() const { return norm.dim(); }
};

struct TrainLog {
  /// Mean weighted cross-entropy per sample, averaged over voters, per epoch.
  std::vector<double> epoch_loss;
};

EnsembleModel train(const Eigen::Ref<const Eigen::MatrixXd>& features, const std::vector<bool>& labels,
                    const TrainConfig& cfg, int threads = 1, TrainLog* log = nullptr);
EnsembleModel train(std::span<const Sample> samples, const TrainConfig& cfg, int threads = 1,
                    TrainLog* log = nullptr);

/// Inputs of the voter layer: normalized, optionally PCA-transformed.
Eigen::MatrixXd transformed_features(const EnsembleModel& model,
                                     const Eigen::Ref<const Eigen::MatrixXd>& raw);

/// Per-sample probability of each voter (rows = samples, cols = voters).
Eigen::MatrixXd voter_outputs(const EnsembleModel& model, const Eigen::Ref<const Eigen::MatrixXd>& raw,
                              int threads = 1);

/// Soft-vote score in [0, m]: the sum of voter probabilities.
Eigen::VectorXd predict(const EnsembleModel& model, const Eigen::Ref<const Eigen::MatrixXd>& raw,
                        int threads = 1);
Eigen::VectorXd predict(const EnsembleModel& model, std::span<const Sample> samples, int threads = 1);

/// score > threshold is positive.
std::vector<bool> classify(std::span<const double> scores, double threshold);

std::string save_model(const EnsembleModel& model);
EnsembleModel load_model(std::string_view document);

/// Structural invariants of a model; throws ValidationError.
void validate_model(const EnsembleModel& model);

}  // namespace drcnn
