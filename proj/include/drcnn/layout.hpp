#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace drcnn {

struct Point {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point&) const = default;
};

/// Axis-aligned rectangle in layout units, lower-left corner plus extent.
struct Rect {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double right() const { return x + w; }
  double top() const { return y + h; }
  double area() const { return w * h; }
  bool operator==(const Rect&) const = default;
};

/// Area of the intersection of two rectangles (0 when disjoint or touching).
double overlap_area(const Rect& a, const Rect& b);

/// Area of the union of a set of rectangles.
double union_area(std::span<const Rect> rects);

/// Boundary-inclusive containment of `inner` in `outer`.
bool contains(const Rect& outer, const Rect& inner);

struct LayerConfig {
  int num_metal_layers = 5;
  int num_via_layers = 4;

  /// 9 window g-cells x 11 features, 12 border edges x 3 per metal layer,
  /// 9 g-cells x 3 per via layer.
  std::size_t feature_length() const {
    return 99 + 36 * static_cast<std::size_t>(num_metal_layers) +
           27 * static_cast<std::size_t>(num_via_layers);
  }
  bool operator==(const LayerConfig&) const = default;
};

struct StdCell {
  int id = 0;
  Rect box;
  bool operator==(const StdCell&) const = default;
};

struct Pin {
  int id = 0;
  std::optional<int> cell;  // empty for I/O pins
  int net = 0;
  Point loc;
  bool is_clock = false;
  bool operator==(const Pin&) const = default;
};

struct Net {
  int id = 0;
  std::vector<int> pins;
  bool has_ndr = false;
  bool operator==(const Net&) const = default;
};

/// Capacity C and load L of one routing resource (a border edge or a via g-cell).
struct Resource {
  int capacity = 0;
  int load = 0;
  bool operator==(const Resource&) const = default;
};

/// Per-layer congestion. Each metal layer holds all vertical borders
/// (between horizontally adjacent g-cells, row-major) followed by all
/// horizontal borders (between vertically adjacent g-cells, row-major).
/// Each via layer holds one entry per g-cell, row-major.
struct CongestionMap {
  std::vector<std::vector<Resource>> metal;
  std::vector<std::vector<Resource>> via;
  bool operator==(const CongestionMap&) const = default;
};

struct GcellIndex {
  int col = 0;
  int row = 0;
  bool operator==(const GcellIndex&) const = default;
};

struct LayoutGrid {
  int nx = 1;
  int ny = 1;
  double gcell_width = 1.0;
  double gcell_height = 1.0;
  LayerConfig layers;
  std::vector<StdCell> cells;
  std::vector<Pin> pins;
  std::vector<Net> nets;
  std::vector<Rect> blockages;
  CongestionMap congestion;

  double width() const { return nx * gcell_width; }
  double height() const { return ny * gcell_height; }
  std::size_t num_gcells() const { return static_cast<std::size_t>(nx) * ny; }
  bool in_grid(int col, int row) const { return col >= 0 && row >= 0 && col < nx && row < ny; }
  std::size_t gcell_offset(int col, int row) const {
    return static_cast<std::size_t>(row) * nx + col;
  }
  Rect gcell_rect(int col, int row) const {
    return {col * gcell_width, row * gcell_height, gcell_width, gcell_height};
  }

  /// G-cell owning a point: lower-left inclusive, the layout's right/top
  /// boundary belongs to the last column/row.
  GcellIndex gcell_of(const Point& p) const;

  std::size_t num_vertical_edges() const { return static_cast<std::size_t>(nx - 1) * ny; }
  std::size_t num_horizontal_edges() const { return static_cast<std::size_t>(nx) * (ny - 1); }
  std::size_t num_metal_edges() const { return num_vertical_edges() + num_horizontal_edges(); }
  /// Border between (col, row) and (col + 1, row).
  std::size_t vertical_edge(int col, int row) const {
    return static_cast<std::size_t>(row) * (nx - 1) + col;
  }
  /// Border between (col, row) and (col, row + 1).
  std::size_t horizontal_edge(int col, int row) const {
    return num_vertical_edges() + static_cast<std::size_t>(row) * nx + col;
  }

  bool operator==(const LayoutGrid&) const = default;
};

struct DrcReport {
  std::vector<Rect> boxes;
  bool operator==(const DrcReport&) const = default;
};

/// Checks every LayoutGrid invariant; throws ValidationError naming the entity.
void validate_layout(const LayoutGrid& g);

LayoutGrid parse_layout(std::string_view document);
std::string write_layout(const LayoutGrid& g);

DrcReport parse_drc(std::string_view document);
std::string write_drc(const DrcReport& report);

}  // namespace drcnn
