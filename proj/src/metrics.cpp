#include "drcnn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "drcnn/error.hpp"
#include "drcnn/io.hpp"

namespace drcnn {

EvalReport evaluate(std::span<const double> scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) throw ValidationError("evaluate: score/label length mismatch");
  if (scores.empty()) throw ValidationError("evaluate: empty input");
  for (double s : scores) {
    if (std::isnan(s)) throw ValidationError("evaluate: NaN score");
  }

  EvalReport r;
  for (bool y : labels) (y ? r.num_pos : r.num_neg) += 1;
  if (r.num_pos == 0 || r.num_neg == 0) return r;

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  const double P = static_cast<double>(r.num_pos);
  const double N = static_cast<double>(r.num_neg);
  double tp = 0.0;
  double fp = 0.0;
  double area_roc = 0.0;
  double area_pr = 0.0;
  double prev_fpr = 0.0;
  double prev_tpr = 0.0;
  double prev_recall = 0.0;
  double best_gap = std::numeric_limits<double>::infinity();
  double best_tpr = 0.0;

  auto record = [&](double threshold) {
    const double tpr = tp / P;
    const double fpr = fp / N;
    const double precision = (tp + fp) > 0.0 ? tp / (tp + fp) : 1.0;
    r.roc.push_back({fpr, tpr, threshold});
    r.pr.push_back({tpr, precision, threshold});
    area_roc += (fpr - prev_fpr) * (tpr + prev_tpr) * 0.5;
    area_pr += (tpr - prev_recall) * precision;
    prev_fpr = fpr;
    prev_tpr = tpr;
    prev_recall = tpr;
    const double gap = std::abs(tpr - (1.0 - fpr));
    if (gap < best_gap || (gap == best_gap && tpr > best_tpr)) {
      best_gap = gap;
      best_tpr = tpr;
    }
  };

  // Threshold = k-th distinct score: everything strictly above it is positive.
  std::size_t i = 0;
  while (i < order.size()) {
    const double t = scores[order[i]];
    record(t);
    while (i < order.size() && scores[order[i]] == t) {
      (labels[order[i]] ? tp : fp) += 1.0;
      ++i;
    }
  }
  record(-std::numeric_limits<double>::infinity());

  r.a_roc = area_roc;
  r.a_prc = area_pr;
  r.acc_e = best_tpr;
  return r;
}

double auc_oracle(std::span<const double> scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) throw ValidationError("auc_oracle: length mismatch");
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  if (pairs == 0.0) throw UndefinedMetricError("auc_oracle: need both classes");
  return wins / pairs;
}

nlohmann::json report_json(const EvalReport& report) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {{"acc_e", opt(report.acc_e)},
          {"a_roc", opt(report.a_roc)},
          {"a_prc", opt(report.a_prc)},
          {"n_pos", report.num_pos},
          {"n_neg", report.num_neg},
          {"undefined", !report.defined()}};
}

std::string roc_csv(const EvalReport& report) {
  std::string out = "fpr,tpr,threshold\n";
  for (const RocPoint& p : report.roc) {
    out += format_double(p.fpr) + "," + format_double(p.tpr) + "," + format_double(p.threshold) + "\n";
  }
  return out;
}

std::string pr_csv(const EvalReport& report) {
  std::string out = "recall,precision,threshold\n";
  for (const PrPoint& p : report.pr) {
    out += format_double(p.recall) + "," + format_double(p.precision) + "," + format_double(p.threshold) + "\n";
  }
  return out;
}

void emit_curves(const EvalReport& report, const std::filesystem::path& prefix) {
  if (!report.defined()) {
    throw UndefinedMetricError("curves undefined: test set has " + std::to_string(report.num_pos) +
                               " positive and " + std::to_string(report.num_neg) + " negative samples");
  }
  std::filesystem::path roc = prefix;
  roc += ".roc.csv";
  std::filesystem::path pr = prefix;
  pr += ".pr.csv";
  write_file_atomic(roc, roc_csv(report));
  write_file_atomic(pr, pr_csv(report));
}

std::string format_metric(const std::optional<double>& value) {
  if (!value) return "---";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *value);
  return buf;
}

}  // namespace drcnn
