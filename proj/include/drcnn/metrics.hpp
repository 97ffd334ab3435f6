#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace drcnn {

struct RocPoint {
  double fpr;
  double tpr;
  double threshold;
};

struct PrPoint {
  double recall;
  double precision;
  double threshold;
};

/// Threshold-independent evaluation. All three metrics are empty when the
/// labels lack either class.
struct EvalReport {
  std::optional<double> acc_e;
  std::optional<double> a_roc;
  std::optional<double> a_prc;
  std::vector<RocPoint> roc;
  std::vector<PrPoint> pr;
  std::size_t num_pos = 0;
  std::size_t num_neg = 0;

  bool defined() const { return a_roc.has_value(); }
};

/// Sweeps every distinct score (descending) and a final -inf sentinel,
/// classifying score > threshold as positive. A_roc is the trapezoidal
/// area, A_prc the step sum of (R_k - R_{k-1}) * P_k, Acc_e the TPR where
/// |TPR - TNR| is smallest (ties to higher TPR). Precision with no
/// predicted positives is reported as 1.
EvalReport evaluate(std::span<const double> scores, const std::vector<bool>& labels);

/// P(score_pos > score_neg) + 0.5 P(tie) by enumerating every pair.
double auc_oracle(std::span<const double> scores, const std::vector<bool>& labels);

nlohmann::json report_json(const EvalReport& report);

std::string roc_csv(const EvalReport& report);
std::string pr_csv(const EvalReport& report);

/// Writes <prefix>.roc.csv and <prefix>.pr.csv; refuses undefined reports.
void emit_curves(const EvalReport& report, const std::filesystem::path& prefix);

/// Table cell text: 4 decimals, or "---" when undefined.
std::string format_metric(const std::optional<double>& value);

}  // namespace drcnn
