#include "drcnn/subset.hpp"

#include <algorithm>
#include <numeric>

#include "drcnn/error.hpp"

namespace drcnn {

std::string to_string(SelectionMode mode) {
  switch (mode) {
    case SelectionMode::all: return "all";
    case SelectionMode::largest_variance: return "largest_variance";
    case SelectionMode::srs: return "srs";
  }
  return "?";
}

SelectionMode selection_mode_from(const std::string& name) {
  if (name == "all") return SelectionMode::all;
  if (name == "largest_variance") return SelectionMode::largest_variance;
  if (name == "srs") return SelectionMode::srs;
  throw ConfigError("unknown selection mode '" + name + "'");
}

Eigen::MatrixXd mask_matrix(const SubsetMask& mask, Eigen::Index num_features) {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(mask.size()), num_features);
  for (std::size_t r = 0; r < mask.size(); ++r) w(static_cast<Eigen::Index>(r), mask[r]) = 1.0;
  return w;
}

namespace {

void check_size(int n, Eigen::Index total) {
  if (n < 1) throw ConfigError("subset size must be positive");
  if (n > total) {
    throw ConfigError("subset size " + std::to_string(n) + " exceeds feature count " +
                      std::to_string(total));
  }
}

}  // namespace

SubsetMask select_largest(int n, const Eigen::VectorXd& variances) {
  check_size(n, variances.size());
  SubsetMask idx(static_cast<std::size_t>(variances.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return variances(a) > variances(b); });
  idx.resize(static_cast<std::size_t>(n));
  std::sort(idx.begin(), idx.end());
  return idx;
}

SubsetMask srs_select(int n, const Eigen::VectorXd& variances, Rng& rng) {
  check_size(n, variances.size());
  std::vector<int> remaining(static_cast<std::size_t>(variances.size()));
  std::iota(remaining.begin(), remaining.end(), 0);
  auto weight = [&](int i) { return std::max(0.0, variances(i)); };

  SubsetMask chosen;
  chosen.reserve(static_cast<std::size_t>(n));
  while (chosen.size() < static_cast<std::size_t>(n)) {
    double total = 0.0;
    for (int i : remaining) total += weight(i);
    std::size_t pick = 0;
    if (total > 0.0) {
      const double u = rng.uniform() * total;
      double cum = 0.0;
      std::size_t last_positive = 0;
      pick = remaining.size();
      for (std::size_t k = 0; k < remaining.size(); ++k) {
        const double w = weight(remaining[k]);
        if (w <= 0.0) continue;
        last_positive = k;
        cum += w;
        if (u < cum) {
          pick = k;
          break;
        }
      }
      // Rounding can leave u just above the final partial sum.
      if (pick == remaining.size()) pick = last_positive;
    } else {
      pick = rng.index(remaining.size());
    }
    chosen.push_back(remaining[pick]);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

std::vector<SubsetMask> build_masks(const SelectionConfig& cfg, const Eigen::VectorXd& variances) {
  if (cfg.num_voters < 1) throw ConfigError("need at least one voter");
  const auto total = static_cast<int>(variances.size());
  std::vector<SubsetMask> masks;
  masks.reserve(static_cast<std::size_t>(cfg.num_voters));
  switch (cfg.mode) {
    case SelectionMode::all: {
      SubsetMask every(static_cast<std::size_t>(total));
      std::iota(every.begin(), every.end(), 0);
      masks.assign(static_cast<std::size_t>(cfg.num_voters), every);
      break;
    }
    case SelectionMode::largest_variance:
      masks.assign(static_cast<std::size_t>(cfg.num_voters), select_largest(cfg.subset_size, variances));
      break;
    case SelectionMode::srs:
      for (int v = 0; v < cfg.num_voters; ++v) {
        Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(v)));
        masks.push_back(srs_select(cfg.subset_size, variances, rng));
      }
      break;
  }
  return masks;
}

}  // namespace drcnn
