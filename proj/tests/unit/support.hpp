#pragma once

#include <vector>

#include "drcnn/features.hpp"
#include "drcnn/layout.hpp"
#include "drcnn/synth.hpp"

namespace drcnn::test {

/// Grid with no geometry and all-zero congestion.
inline LayoutGrid empty_grid(int nx, int ny, double w = 10.0, double h = 10.0, int metal = 5, int via = 4) {
  LayoutGrid g;
  g.nx = nx;
  g.ny = ny;
  g.gcell_width = w;
  g.gcell_height = h;
  g.layers = {metal, via};
  g.congestion.metal.assign(static_cast<std::size_t>(metal), std::vector<Resource>(g.num_metal_edges()));
  g.congestion.via.assign(static_cast<std::size_t>(via), std::vector<Resource>(g.num_gcells()));
  return g;
}

/// Adds a one-pin-per-location net and returns its id.
inline int add_net(LayoutGrid& g, const std::vector<Point>& locs, bool ndr = false, bool clock = false) {
  Net n;
  n.id = static_cast<int>(g.nets.size());
  n.has_ndr = ndr;
  for (const Point& p : locs) {
    Pin pin;
    pin.id = static_cast<int>(g.pins.size());
    pin.net = n.id;
    pin.loc = p;
    pin.is_clock = clock;
    n.pins.push_back(pin.id);
    g.pins.push_back(pin);
  }
  g.nets.push_back(n);
  return n.id;
}

inline SynthDesign small_design(int n, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.nx = cfg.ny = n;
  cfg.seed = seed;
  return generate(cfg);
}

inline std::vector<Sample> small_samples(int n, std::uint64_t seed, const char* name = "d") {
  const SynthDesign d = small_design(n, seed);
  return extract_design(d.grid, d.drc, name);
}

}  // namespace drcnn::test
