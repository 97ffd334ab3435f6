#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "drcnn/layout.hpp"

namespace drcnn {

/// Per-g-cell features, in window-slot order.
enum GcellFeature : int {
  kCenterX = 0,
  kCenterY,
  kCellCount,
  kPinCount,
  kClockPinCount,
  kLocalNetCount,
  kLocalNetPinCount,
  kNdrPinCount,
  kPinSpacing,
  kBlockageFraction,
  kCellAreaFraction,
  kGcellFeatureCount
};

inline constexpr int kWindowSlots = 9;
inline constexpr int kWindowEdges = 12;

using FeatureVector = Eigen::VectorXd;

struct Sample {
  std::string design;
  GcellIndex gcell;
  FeatureVector features;
  bool label = false;
};

/// Window extractor over one immutable grid. Per-g-cell quantities are
/// computed once at construction; window() slices them.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(const LayoutGrid& grid);

  /// Full feature vector of the 3x3 window centred on `center`.
  FeatureVector window(GcellIndex center) const;

  /// The 11 per-g-cell features of one g-cell.
  std::array<double, kGcellFeatureCount> gcell_features(GcellIndex gcell) const;

  /// Fraction of the g-cell covered by blockages.
  double blockage_fraction(GcellIndex gcell) const {
    return table_(static_cast<Eigen::Index>(grid_.gcell_offset(gcell.col, gcell.row)),
                  kBlockageFraction);
  }

  /// True when blockages cover the whole g-cell (such g-cells yield no sample).
  bool fully_blocked(GcellIndex gcell) const {
    return fully_blocked_[grid_.gcell_offset(gcell.col, gcell.row)] != 0;
  }

  const LayoutGrid& grid() const { return grid_; }

 private:
  const LayoutGrid& grid_;
  Eigen::Matrix<double, Eigen::Dynamic, kGcellFeatureCount, Eigen::RowMajor> table_;
  std::vector<char> fully_blocked_;
};

FeatureVector extract_features(const LayoutGrid& g, GcellIndex gcell);

/// Row-major nx*ny hotspot flags: true iff the g-cell overlaps some DRC box
/// with strictly positive area.
std::vector<char> label_gcells(const LayoutGrid& g, const DrcReport& drc);

/// One sample per g-cell in row-major order, skipping g-cells entirely
/// covered by blockages.
std::vector<Sample> extract_design(const LayoutGrid& g, const DrcReport& drc,
                                   std::string_view design_id);

/// Mean pairwise Manhattan distance; 0 for fewer than two points.
double mean_pairwise_manhattan(std::span<const Point> points);

// Sample files.
std::string write_samples_jsonl(std::span<const Sample> samples);
std::vector<Sample> parse_samples_jsonl(std::string_view document);
std::string write_samples_csv(std::span<const Sample> samples);

}  // namespace drcnn
