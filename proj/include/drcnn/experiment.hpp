#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "drcnn/dataset.hpp"
#include "drcnn/ensemble.hpp"
#include "drcnn/forest.hpp"
#include "drcnn/metrics.hpp"

namespace drcnn {

struct NamedConfig {
  std::string name;
  TrainConfig cfg;
};

/// The four ensemble settings: 1 voter on all inputs; `voters` voters on all
/// inputs; `voters` voters on the top-`subset` PCA components; `voters`
/// voters on SRS-drawn PCA components.
std::vector<NamedConfig> table_settings(const TrainConfig& base, int voters = 100, int subset = 20);

struct MatrixConfig {
  TrainConfig base;
  RfConfig rf;
  int voters = 100;
  int subset_size = 20;
  bool include_rf = true;
};

nlohmann::json to_json(const MatrixConfig& cfg);
MatrixConfig matrix_config_from_json(const nlohmann::json& j);

struct ModelColumn {
  std::string name;
  std::map<std::string, EvalReport> per_design;
  EvalReport pooled;
  std::string model_file;   // serialized model
  std::string scores_file;  // design,col,row,score
};

struct MatrixResult {
  std::vector<std::string> designs;
  std::vector<ModelColumn> columns;
};

inline constexpr const char* kPooledRow = "All testing samples";

/// Trains every setting (and RF) on the training set and evaluates each on
/// every per-design test set plus the pooled test samples.
MatrixResult run_matrix(const SplitResult& data, const MatrixConfig& cfg, int threads = 1,
                        std::ostream* log = nullptr);

std::string render_markdown(const MatrixResult& result);
std::string render_csv(const MatrixResult& result);

/// models/<name>.json, scores/<name>.csv, table.md, table.csv, reports.json.
void write_matrix(const MatrixResult& result, const std::filesystem::path& out_dir);

struct GridSpec {
  TrainConfig base;
  std::vector<double> learning_rates;
  std::vector<int> epochs;
  std::vector<int> voters;
  std::vector<int> subset_sizes;
  std::string metric = "a_roc";  // or "acc_e", "a_prc"
};

GridSpec grid_spec_from_json(const nlohmann::json& j);

struct GridEntry {
  TrainConfig cfg;
  EvalReport valid;
  double score = 0.0;
};

/// Entries ranked best first: metric descending, then fewer voters, smaller
/// subset, lower learning rate, fewer epochs.
struct GridResult {
  std::vector<GridEntry> ranked;
};

GridResult grid_search(std::span<const Sample> train, std::span<const Sample> valid, const GridSpec& spec,
                       int threads = 1);

std::string render_grid_csv(const GridResult& result, const std::string& metric);

// Score files: header "design,col,row,score".
std::string write_scores_csv(std::span<const Sample> samples, std::span<const double> scores);

struct ScoredKey {
  SampleKey key;
  double score;
};
std::vector<ScoredKey> parse_scores_csv(std::string_view document);

}  // namespace drcnn
