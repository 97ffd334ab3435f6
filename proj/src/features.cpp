#include "drcnn/features.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "drcnn/error.hpp"
#include "drcnn/io.hpp"
#include "drcnn/json_util.hpp"

namespace drcnn {

double mean_pairwise_manhattan(std::span<const Point> points) {
  const std::size_t n = points.size();
  if (n < 2) return 0.0;
  // Sum of |a_i - a_j| over pairs equals sum_k a_(k) * (2k - n + 1) over the
  // sorted coordinates.
  auto axis_sum = [&](auto coord) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = coord(points[i]);
    std::sort(v.begin(), v.end());
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      s += v[k] * (2.0 * static_cast<double>(k) - static_cast<double>(n) + 1.0);
    }
    return s;
  };
  const double total = axis_sum([](const Point& p) { return p.x; }) +
                       axis_sum([](const Point& p) { return p.y; });
  return total / (0.5 * static_cast<double>(n) * static_cast<double>(n - 1));
}

namespace {

// Range of g-cell columns/rows touched by [lo, hi] along one axis.
std::pair<int, int> span_of(double lo, double hi, double pitch, int count) {
  const int a = std::clamp(static_cast<int>(std::floor(lo / pitch)), 0, count - 1);
  const int b = std::clamp(static_cast<int>(std::floor(hi / pitch)), 0, count - 1);
  return {a, b};
}

Rect clip(const Rect& r, const Rect& to) {
  const double x0 = std::max(r.x, to.x);
  const double y0 = std::max(r.y, to.y);
  const double x1 = std::min(r.right(), to.right());
  const double y1 = std::min(r.top(), to.top());
  return {x0, y0, std::max(0.0, x1 - x0), std::max(0.0, y1 - y0)};
}

}  // namespace

FeatureExtractor::FeatureExtractor(const LayoutGrid& grid) : grid_(grid) {
  const LayoutGrid& g = grid_;
  const auto n = static_cast<Eigen::Index>(g.num_gcells());
  table_.setZero(n, kGcellFeatureCount);
  fully_blocked_.assign(g.num_gcells(), 0);

  const double gcell_area = g.gcell_width * g.gcell_height;
  for (int r = 0; r < g.ny; ++r) {
    for (int c = 0; c < g.nx; ++c) {
      const auto i = static_cast<Eigen::Index>(g.gcell_offset(c, r));
      table_(i, kCenterX) = (c + 0.5) * g.gcell_width / g.width();
      table_(i, kCenterY) = (r + 0.5) * g.gcell_height / g.height();
    }
  }

  // Area coverage: collect clipped rectangles per g-cell, then take unions.
  std::vector<std::vector<Rect>> cell_pieces(g.num_gcells());
  std::vector<std::vector<Rect>> blockage_pieces(g.num_gcells());
  auto scatter = [&](const Rect& box, std::vector<std::vector<Rect>>& pieces) {
    const auto [c0, c1] = span_of(box.x, box.right(), g.gcell_width, g.nx);
    const auto [r0, r1] = span_of(box.y, box.top(), g.gcell_height, g.ny);
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        const Rect piece = clip(box, g.gcell_rect(c, r));
        if (piece.w > 0.0 && piece.h > 0.0) pieces[g.gcell_offset(c, r)].push_back(piece);
      }
    }
  };

  for (const StdCell& cell : g.cells) {
    scatter(cell.box, cell_pieces);
    const auto [c0, c1] = span_of(cell.box.x, cell.box.right(), g.gcell_width, g.nx);
    const auto [r0, r1] = span_of(cell.box.y, cell.box.top(), g.gcell_height, g.ny);
    // A cell lying exactly on a border can be inside two g-cells; pick the
    // lowest-indexed one so every cell is counted at most once.
    bool counted = false;
    for (int r = std::max(0, r0 - 1); r <= r1 && !counted; ++r) {
      for (int c = std::max(0, c0 - 1); c <= c1 && !counted; ++c) {
        if (contains(g.gcell_rect(c, r), cell.box)) {
          table_(static_cast<Eigen::Index>(g.gcell_offset(c, r)), kCellCount) += 1.0;
          counted = true;
        }
      }
    }
  }
  for (const Rect& b : g.blockages) scatter(b, blockage_pieces);

  for (std::size_t i = 0; i < g.num_gcells(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    table_(row, kCellAreaFraction) = std::min(1.0, union_area(cell_pieces[i]) / gcell_area);
    const double blocked = union_area(blockage_pieces[i]) / gcell_area;
    table_(row, kBlockageFraction) = std::min(1.0, blocked);
    fully_blocked_[i] = blocked >= 1.0 - 1e-9 ? 1 : 0;
  }

  // Pins.
  std::unordered_map<int, const Net*> net_by_id;
  for (const Net& net : g.nets) net_by_id.emplace(net.id, &net);
  std::unordered_map<int, std::size_t> pin_gcell;
  std::vector<std::vector<Point>> pin_points(g.num_gcells());
  for (const Pin& p : g.pins) {
    const GcellIndex at = g.gcell_of(p.loc);
    const std::size_t i = g.gcell_offset(at.col, at.row);
    const auto row = static_cast<Eigen::Index>(i);
    pin_gcell.emplace(p.id, i);
    pin_points[i].push_back(p.loc);
    table_(row, kPinCount) += 1.0;
    if (p.is_clock) table_(row, kClockPinCount) += 1.0;
    if (net_by_id.at(p.net)->has_ndr) table_(row, kNdrPinCount) += 1.0;
  }
  for (std::size_t i = 0; i < g.num_gcells(); ++i) {
    table_(static_cast<Eigen::Index>(i), kPinSpacing) = mean_pairwise_manhattan(pin_points[i]);
  }

  for (const Net& net : g.nets) {
    const std::size_t home = pin_gcell.at(net.pins.front());
    const bool local = std::all_of(net.pins.begin(), net.pins.end(),
                                   [&](int pid) { return pin_gcell.at(pid) == home; });
    if (!local) continue;
    const auto row = static_cast<Eigen::Index>(home);
    table_(row, kLocalNetCount) += 1.0;
    table_(row, kLocalNetPinCount) += static_cast<double>(net.pins.size());
  }
}

std::array<double, kGcellFeatureCount> FeatureExtractor::gcell_features(GcellIndex gcell) const {
  if (!grid_.in_grid(gcell.col, gcell.row)) throw ValidationError("g-cell out of range");
  std::array<double, kGcellFeatureCount> out{};
  const auto row = static_cast<Eigen::Index>(grid_.gcell_offset(gcell.col, gcell.row));
  for (int k = 0; k < kGcellFeatureCount; ++k) out[k] = table_(row, k);
  return out;
}

FeatureVector FeatureExtractor::window(GcellIndex center) const {
  const LayoutGrid& g = grid_;
  if (!g.in_grid(center.col, center.row)) {
    throw ValidationError("g-cell (" + std::to_string(center.col) + ", " +
                          std::to_string(center.row) + ") out of range");
  }
  FeatureVector out = FeatureVector::Zero(static_cast<Eigen::Index>(g.layers.feature_length()));
  Eigen::Index k = 0;

  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      const int c = center.col + dx;
      const int r = center.row + dy;
      if (g.in_grid(c, r)) {
        out.segment<kGcellFeatureCount>(k) =
            table_.row(static_cast<Eigen::Index>(g.gcell_offset(c, r))).transpose();
      }
      k += kGcellFeatureCount;
    }
  }

  auto put = [&](const Resource* res) {
    if (res != nullptr) {
      out(k) = res->capacity;
      out(k + 1) = res->load;
      out(k + 2) = static_cast<double>(res->capacity) - static_cast<double>(res->load);
    }
    k += 3;
  };

  for (const auto& layer : g.congestion.metal) {
    // Six vertical borders: rows bottom to top, left border then right border.
    for (int dy = -1; dy <= 1; ++dy) {
      for (int left = center.col - 1; left <= center.col; ++left) {
        const int r = center.row + dy;
        const bool ok = r >= 0 && r < g.ny && left >= 0 && left + 1 < g.nx;
        put(ok ? &layer[g.vertical_edge(left, r)] : nullptr);
      }
    }
    // Six horizontal borders: lower border row then upper, columns left to right.
    for (int below = center.row - 1; below <= center.row; ++below) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int c = center.col + dx;
        const bool ok = c >= 0 && c < g.nx && below >= 0 && below + 1 < g.ny;
        put(ok ? &layer[g.horizontal_edge(c, below)] : nullptr);
      }
    }
  }
  for (const auto& layer : g.congestion.via) {
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int c = center.col + dx;
        const int r = center.row + dy;
        put(g.in_grid(c, r) ? &layer[g.gcell_offset(c, r)] : nullptr);
      }
    }
  }
  return out;
}

FeatureVector extract_features(const LayoutGrid& g, GcellIndex gcell) {
  return FeatureExtractor(g).window(gcell);
}

std::vector<char> label_gcells(const LayoutGrid& g, const DrcReport& drc) {
  std::vector<char> labels(g.num_gcells(), 0);
  for (const Rect& box : drc.boxes) {
    const auto [c0, c1] = span_of(box.x, box.right(), g.gcell_width, g.nx);
    const auto [r0, r1] = span_of(box.y, box.top(), g.gcell_height, g.ny);
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        if (overlap_area(g.gcell_rect(c, r), box) > 0.0) labels[g.gcell_offset(c, r)] = 1;
      }
    }
  }
  return labels;
}

std::vector<Sample> extract_design(const LayoutGrid& g, const DrcReport& drc,
                                   std::string_view design_id) {
  const FeatureExtractor fx(g);
  const std::vector<char> labels = label_gcells(g, drc);
  std::vector<Sample> out;
  out.reserve(g.num_gcells());
  for (int r = 0; r < g.ny; ++r) {
    for (int c = 0; c < g.nx; ++c) {
      const std::size_t i = g.gcell_offset(c, r);
      if (fx.fully_blocked({c, r})) continue;
      out.push_back({std::string(design_id), {c, r}, fx.window({c, r}), labels[i] != 0});
    }
  }
  return out;
}

std::string write_samples_jsonl(std::span<const Sample> samples) {
  std::string out;
  for (const Sample& s : samples) {
    // Hand-assembled so that feature values keep their shortest exact form.
    out += "{\"col\":" + std::to_string(s.gcell.col) + ",\"design\":" +
           nlohmann::json(s.design).dump() + ",\"features\":[";
    for (Eigen::Index k = 0; k < s.features.size(); ++k) {
      if (k) out += ',';
      out += format_double(s.features(k));
    }
    out += "],\"label\":";
    out += s.label ? "true" : "false";
    out += ",\"row\":" + std::to_string(s.gcell.row) + "}\n";
  }
  return out;
}

std::vector<Sample> parse_samples_jsonl(std::string_view document) {
  using namespace json_util;
  std::vector<Sample> out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < document.size()) {
    std::size_t end = document.find('\n', pos);
    if (end == std::string_view::npos) end = document.size();
    const std::string_view line = document.substr(pos, end - pos);
    ++line_no;
    if (line.find_first_not_of(" \t\r") != std::string_view::npos) {
      json j;
      try {
        j = json::parse(line.begin(), line.end());
      } catch (const json::parse_error& e) {
        throw ParseError("line " + std::to_string(line_no) + ": " + e.what(), pos + e.byte);
      }
      const std::string p = "line " + std::to_string(line_no);
      Sample s;
      s.design = as_string(field(j, "design", p), join(p, "design"));
      s.gcell = {static_cast<int>(get_int(j, "col", p)), static_cast<int>(get_int(j, "row", p))};
      s.label = get_bool(j, "label", p);
      const json& f = array(field(j, "features", p), join(p, "features"));
      s.features.resize(static_cast<Eigen::Index>(f.size()));
      for (std::size_t k = 0; k < f.size(); ++k) {
        s.features(static_cast<Eigen::Index>(k)) = as_double(f[k], join(join(p, "features"), k));
      }
      if (!out.empty() && out.front().features.size() != s.features.size()) {
        throw ValidationError(p + ": feature length differs from first sample");
      }
      out.push_back(std::move(s));
    }
    pos = end + 1;
  }
  return out;
}

std::string write_samples_csv(std::span<const Sample> samples) {
  std::ostringstream out;
  const Eigen::Index dim = samples.empty() ? 0 : samples.front().features.size();
  const int width = std::max<int>(3, static_cast<int>(std::to_string(std::max<Eigen::Index>(dim - 1, 0)).size()));
  for (Eigen::Index k = 0; k < dim; ++k) {
    std::string idx = std::to_string(k);
    out << 'f' << std::string(static_cast<std::size_t>(width) - idx.size(), '0') << idx << ',';
  }
  out << "label,design,col,row\n";
  for (const Sample& s : samples) {
    for (Eigen::Index k = 0; k < dim; ++k) out << format_double(s.features(k)) << ',';
    out << (s.label ? 1 : 0) << ',' << s.design << ',' << s.gcell.col << ',' << s.gcell.row << '\n';
  }
  return out.str();
}

}  // namespace drcnn
