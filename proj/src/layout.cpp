#include "drcnn/layout.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>
#include <unordered_set>

#include "drcnn/error.hpp"
#include "drcnn/json_util.hpp"

namespace drcnn {

using json_util::json;

double overlap_area(const Rect& a, const Rect& b) {
  const double w = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const double h = std::min(a.top(), b.top()) - std::max(a.y, b.y);
  return (w > 0.0 && h > 0.0) ? w * h : 0.0;
}

double union_area(std::span<const Rect> rects) {
  std::vector<double> xs;
  xs.reserve(rects.size() * 2);
  for (const Rect& r : rects) {
    if (r.w <= 0.0 || r.h <= 0.0) continue;
    xs.push_back(r.x);
    xs.push_back(r.right());
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

  double total = 0.0;
  std::vector<std::pair<double, double>> spans;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    const double x0 = xs[i];
    const double x1 = xs[i + 1];
    spans.clear();
    for (const Rect& r : rects) {
      if (r.w > 0.0 && r.h > 0.0 && r.x <= x0 && r.right() >= x1) spans.emplace_back(r.y, r.top());
    }
    if (spans.empty()) continue;
    std::sort(spans.begin(), spans.end());
    double covered = 0.0;
    double lo = spans.front().first;
    double hi = spans.front().second;
    for (const auto& [s, e] : spans) {
      if (s > hi) {
        covered += hi - lo;
        lo = s;
        hi = e;
      } else {
        hi = std::max(hi, e);
      }
    }
    covered += hi - lo;
    total += covered * (x1 - x0);
  }
  return total;
}

bool contains(const Rect& outer, const Rect& inner) {
  return inner.x >= outer.x && inner.y >= outer.y && inner.right() <= outer.right() &&
         inner.top() <= outer.top();
}

GcellIndex LayoutGrid::gcell_of(const Point& p) const {
  const int col = std::clamp(static_cast<int>(std::floor(p.x / gcell_width)), 0, nx - 1);
  const int row = std::clamp(static_cast<int>(std::floor(p.y / gcell_height)), 0, ny - 1);
  return {col, row};
}

namespace {

// Geometry produced by floating-point arithmetic may overshoot the layout
// edge by a few ulps.
bool within_box(const Rect& r, double width, double height) {
  const double tol = 1e-9 * std::max(width, height);
  return r.w >= 0.0 && r.h >= 0.0 && r.x >= -tol && r.y >= -tol && r.right() <= width + tol &&
         r.top() <= height + tol;
}

void check_resources(const std::vector<Resource>& layer, std::size_t expected,
                     const std::string& what) {
  if (layer.size() != expected) {
    throw ValidationError(what + " has " + std::to_string(layer.size()) + " entries, expected " +
                          std::to_string(expected));
  }
  for (std::size_t i = 0; i < layer.size(); ++i) {
    if (layer[i].capacity < 0 || layer[i].load < 0) {
      throw ValidationError(what + " entry " + std::to_string(i) + " is negative");
    }
  }
}

}  // namespace

void validate_layout(const LayoutGrid& g) {
  if (g.nx < 1 || g.ny < 1) throw ValidationError("grid: nx and ny must be positive");
  if (!(g.gcell_width > 0.0) || !(g.gcell_height > 0.0) || !std::isfinite(g.gcell_width) ||
      !std::isfinite(g.gcell_height)) {
    throw ValidationError("grid: g-cell dimensions must be positive");
  }
  if (g.layers.num_metal_layers < 1 || g.layers.num_via_layers < 1) {
    throw ValidationError("layers: need at least one metal and one via layer");
  }
  const double width = g.width();
  const double height = g.height();

  std::unordered_set<int> cell_ids;
  for (const StdCell& c : g.cells) {
    if (!cell_ids.insert(c.id).second) {
      throw ValidationError("cell " + std::to_string(c.id) + ": duplicate id");
    }
    if (!within_box(c.box, width, height)) {
      throw ValidationError("cell " + std::to_string(c.id) + ": geometry outside layout");
    }
  }
  for (std::size_t i = 0; i < g.blockages.size(); ++i) {
    if (!within_box(g.blockages[i], width, height)) {
      throw ValidationError("blockage " + std::to_string(i) + ": geometry outside layout");
    }
  }

  std::unordered_map<int, const Net*> nets;
  for (const Net& n : g.nets) {
    if (!nets.emplace(n.id, &n).second) {
      throw ValidationError("net " + std::to_string(n.id) + ": duplicate id");
    }
    if (n.pins.empty()) throw ValidationError("net " + std::to_string(n.id) + ": has no pins");
  }

  std::unordered_map<int, const Pin*> pins;
  for (const Pin& p : g.pins) {
    const std::string name = "pin " + std::to_string(p.id);
    if (!pins.emplace(p.id, &p).second) throw ValidationError(name + ": duplicate id");
    if (!nets.contains(p.net)) {
      throw ValidationError(name + ": references absent net " + std::to_string(p.net));
    }
    if (p.cell && !cell_ids.contains(*p.cell)) {
      throw ValidationError(name + ": references absent cell " + std::to_string(*p.cell));
    }
    if (!within_box({p.loc.x, p.loc.y, 0.0, 0.0}, width, height)) {
      throw ValidationError(name + ": location outside layout");
    }
  }
  std::unordered_set<int> listed;
  for (const Net& n : g.nets) {
    for (int pid : n.pins) {
      const std::string name = "net " + std::to_string(n.id);
      auto it = pins.find(pid);
      if (it == pins.end()) throw ValidationError(name + ": lists absent pin " + std::to_string(pid));
      if (it->second->net != n.id) {
        throw ValidationError(name + ": lists pin " + std::to_string(pid) +
                              " which belongs to another net");
      }
      if (!listed.insert(pid).second) {
        throw ValidationError(name + ": pin " + std::to_string(pid) + " listed twice");
      }
    }
  }
  for (const Pin& p : g.pins) {
    if (!listed.contains(p.id)) {
      throw ValidationError("pin " + std::to_string(p.id) + ": not listed by net " +
                            std::to_string(p.net));
    }
  }

  const CongestionMap& cm = g.congestion;
  if (cm.metal.size() != static_cast<std::size_t>(g.layers.num_metal_layers)) {
    throw ValidationError("congestion.metal: layer count does not match layers.metal");
  }
  if (cm.via.size() != static_cast<std::size_t>(g.layers.num_via_layers)) {
    throw ValidationError("congestion.via: layer count does not match layers.via");
  }
  for (std::size_t l = 0; l < cm.metal.size(); ++l) {
    check_resources(cm.metal[l], g.num_metal_edges(), "congestion.metal[" + std::to_string(l) + "]");
  }
  for (std::size_t l = 0; l < cm.via.size(); ++l) {
    check_resources(cm.via[l], g.num_gcells(), "congestion.via[" + std::to_string(l) + "]");
  }
}

namespace {

using namespace json_util;

Rect rect_from(const json& j, const std::string& path) {
  return {get_double(j, "x", path), get_double(j, "y", path), get_double(j, "w", path),
          get_double(j, "h", path)};
}

json rect_to(const Rect& r) { return json{{"x", r.x}, {"y", r.y}, {"w", r.w}, {"h", r.h}}; }

int to_int(std::int64_t v, const std::string& path) {
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw SchemaError(path, "integer out of range");
  }
  return static_cast<int>(v);
}

std::vector<Resource> resources_from(const json& j, const std::string& path) {
  array(j, path);
  std::vector<Resource> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = join(path, i);
    const json& pair = array(j[i], p);
    if (pair.size() != 2) throw SchemaError(p, "expected [C, L] pair");
    out.push_back({to_int(as_int(pair[0], join(p, 0)), p), to_int(as_int(pair[1], join(p, 1)), p)});
  }
  return out;
}

json resources_to(const std::vector<Resource>& layer) {
  json out = json::array();
  for (const Resource& r : layer) out.push_back(json::array({r.capacity, r.load}));
  return out;
}

}  // namespace

LayoutGrid parse_layout(std::string_view document) {
  const json root = json_util::parse(document);
  object(root, "");
  LayoutGrid g;

  const json& grid = field(root, "grid", "");
  g.nx = to_int(get_int(grid, "nx", "grid"), "grid.nx");
  g.ny = to_int(get_int(grid, "ny", "grid"), "grid.ny");
  g.gcell_width = get_double(grid, "gcell_w", "grid");
  g.gcell_height = get_double(grid, "gcell_h", "grid");

  const json& layers = field(root, "layers", "");
  g.layers.num_metal_layers = to_int(get_int(layers, "metal", "layers"), "layers.metal");
  g.layers.num_via_layers = to_int(get_int(layers, "via", "layers"), "layers.via");

  const json& cells = array(field(root, "cells", ""), "cells");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const std::string p = join("cells", i);
    g.cells.push_back({to_int(get_int(cells[i], "id", p), p), rect_from(cells[i], p)});
  }

  const json& pins = array(field(root, "pins", ""), "pins");
  for (std::size_t i = 0; i < pins.size(); ++i) {
    const std::string p = join("pins", i);
    Pin pin;
    pin.id = to_int(get_int(pins[i], "id", p), p);
    const json& cell = field(pins[i], "cell", p);
    if (!cell.is_null()) pin.cell = to_int(as_int(cell, join(p, "cell")), p);
    pin.net = to_int(get_int(pins[i], "net", p), p);
    pin.loc = {get_double(pins[i], "x", p), get_double(pins[i], "y", p)};
    pin.is_clock = get_bool(pins[i], "clock", p);
    g.pins.push_back(pin);
  }

  const json& nets = array(field(root, "nets", ""), "nets");
  for (std::size_t i = 0; i < nets.size(); ++i) {
    const std::string p = join("nets", i);
    Net net;
    net.id = to_int(get_int(nets[i], "id", p), p);
    const json& ids = array(field(nets[i], "pins", p), join(p, "pins"));
    for (std::size_t k = 0; k < ids.size(); ++k) {
      net.pins.push_back(to_int(as_int(ids[k], join(join(p, "pins"), k)), p));
    }
    net.has_ndr = get_bool(nets[i], "ndr", p);
    g.nets.push_back(std::move(net));
  }

  const json& blockages = array(field(root, "blockages", ""), "blockages");
  for (std::size_t i = 0; i < blockages.size(); ++i) {
    g.blockages.push_back(rect_from(blockages[i], join("blockages", i)));
  }

  const json& cong = field(root, "congestion", "");
  const json& metal = array(field(cong, "metal", "congestion"), "congestion.metal");
  for (std::size_t l = 0; l < metal.size(); ++l) {
    g.congestion.metal.push_back(resources_from(metal[l], join("congestion.metal", l)));
  }
  const json& via = array(field(cong, "via", "congestion"), "congestion.via");
  for (std::size_t l = 0; l < via.size(); ++l) {
    g.congestion.via.push_back(resources_from(via[l], join("congestion.via", l)));
  }

  validate_layout(g);
  return g;
}

std::string write_layout(const LayoutGrid& g) {
  json root;
  root["grid"] = {{"nx", g.nx}, {"ny", g.ny}, {"gcell_w", g.gcell_width}, {"gcell_h", g.gcell_height}};
  root["layers"] = {{"metal", g.layers.num_metal_layers}, {"via", g.layers.num_via_layers}};

  json cells = json::array();
  for (const StdCell& c : g.cells) {
    json j = rect_to(c.box);
    j["id"] = c.id;
    cells.push_back(std::move(j));
  }
  root["cells"] = std::move(cells);

  json pins = json::array();
  for (const Pin& p : g.pins) {
    pins.push_back({{"id", p.id},
                    {"cell", p.cell ? json(*p.cell) : json(nullptr)},
                    {"net", p.net},
                    {"x", p.loc.x},
                    {"y", p.loc.y},
                    {"clock", p.is_clock}});
  }
  root["pins"] = std::move(pins);

  json nets = json::array();
  for (const Net& n : g.nets) nets.push_back({{"id", n.id}, {"pins", n.pins}, {"ndr", n.has_ndr}});
  root["nets"] = std::move(nets);

  json blockages = json::array();
  for (const Rect& r : g.blockages) blockages.push_back(rect_to(r));
  root["blockages"] = std::move(blockages);

  json metal = json::array();
  for (const auto& layer : g.congestion.metal) metal.push_back(resources_to(layer));
  json via = json::array();
  for (const auto& layer : g.congestion.via) via.push_back(resources_to(layer));
  root["congestion"] = {{"metal", std::move(metal)}, {"via", std::move(via)}};

  return root.dump() + "\n";
}

DrcReport parse_drc(std::string_view document) {
  const json root = json_util::parse(document);
  array(root, "<root>");
  DrcReport report;
  for (std::size_t i = 0; i < root.size(); ++i) {
    const std::string p = join("", i);
    Rect r = rect_from(root[i], p);
    if (r.w < 0.0 || r.h < 0.0) {
      throw ValidationError("drc box " + std::to_string(i) + ": negative extent");
    }
    report.boxes.push_back(r);
  }
  return report;
}

std::string write_drc(const DrcReport& report) {
  json root = json::array();
  for (const Rect& r : report.boxes) root.push_back(rect_to(r));
  return root.dump() + "\n";
}

}  // namespace drcnn
