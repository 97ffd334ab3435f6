#include "drcnn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "drcnn/error.hpp"
#include "drcnn/features.hpp"
#include "drcnn/json_util.hpp"
#include "drcnn/random.hpp"

namespace drcnn {

namespace {

// Independent random streams per generation stage.
enum Stream : std::uint64_t { kBlockages = 1, kDensity, kCells, kIoPins, kNets, kCongestion, kScore, kNoise, kBoxes };

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

}  // namespace

void validate_synth_config(const SynthConfig& cfg) {
  if (cfg.nx < 1 || cfg.ny < 1) throw ConfigError("synth: nx and ny must be positive");
  if (!(cfg.gcell_size > 0.0)) throw ConfigError("synth: gcell_size must be positive");
  if (cfg.layers.num_metal_layers < 1 || cfg.layers.num_via_layers < 1) {
    throw ConfigError("synth: need at least one metal and one via layer");
  }
  if (!(cfg.cells_per_gcell_mean > 0.0) || !(cfg.pins_per_cell_mean > 0.0)) {
    throw ConfigError("synth: density means must be positive");
  }
  if (!in_unit(cfg.clock_pin_fraction) || !in_unit(cfg.ndr_net_fraction) ||
      !in_unit(cfg.blockage_fraction)) {
    throw ConfigError("synth: fractions must lie in [0, 1]");
  }
  if (cfg.congestion_base_capacity < 1) throw ConfigError("synth: base capacity must be positive");
  if (!(cfg.target_hotspot_rate > 0.0 && cfg.target_hotspot_rate < 1.0)) {
    throw ConfigError("synth: target_hotspot_rate must lie in (0, 1)");
  }
  if (!(cfg.label_noise >= 0.0 && cfg.label_noise < 1.0)) {
    throw ConfigError("synth: label_noise must lie in [0, 1)");
  }
}

SynthDesign generate(const SynthConfig& cfg) {
  validate_synth_config(cfg);
  auto stream = [&](Stream s) { return Rng(derive_seed(cfg.seed, s)); };

  LayoutGrid g;
  g.nx = cfg.nx;
  g.ny = cfg.ny;
  g.gcell_width = cfg.gcell_size;
  g.gcell_height = cfg.gcell_size;
  g.layers = cfg.layers;
  const double pitch = cfg.gcell_size;
  const double half = 0.5 * pitch;
  const std::size_t ncells = g.num_gcells();

  // Macros on a half-g-cell lattice, so some g-cells are fully covered and
  // the ones around them partially.
  const int hx = 2 * g.nx;
  const int hy = 2 * g.ny;
  std::vector<char> raster(static_cast<std::size_t>(hx) * hy, 0);
  {
    Rng rng = stream(kBlockages);
    const std::size_t target =
        static_cast<std::size_t>(std::llround(cfg.blockage_fraction * static_cast<double>(raster.size())));
    std::size_t covered = 0;
    for (int attempt = 0; attempt < 10000 && covered < target; ++attempt) {
      const int sx = std::min(hx, 3 + static_cast<int>(rng.index(6)));
      const int sy = std::min(hy, 3 + static_cast<int>(rng.index(6)));
      const int x0 = static_cast<int>(rng.index(static_cast<std::size_t>(hx - sx + 1)));
      const int y0 = static_cast<int>(rng.index(static_cast<std::size_t>(hy - sy + 1)));
      g.blockages.push_back({x0 * half, y0 * half, sx * half, sy * half});
      for (int y = y0; y < y0 + sy; ++y) {
        for (int x = x0; x < x0 + sx; ++x) {
          char& m = raster[static_cast<std::size_t>(y) * hx + x];
          if (!m) {
            m = 1;
            ++covered;
          }
        }
      }
    }
  }
  std::vector<double> blocked(ncells, 0.0);
  for (int r = 0; r < g.ny; ++r) {
    for (int c = 0; c < g.nx; ++c) {
      int n = 0;
      for (int y = 2 * r; y < 2 * r + 2; ++y) {
        for (int x = 2 * c; x < 2 * c + 2; ++x) n += raster[static_cast<std::size_t>(y) * hx + x];
      }
      blocked[g.gcell_offset(c, r)] = n / 4.0;
    }
  }

  // Smooth density field: a floor plus Gaussian bumps, normalised to mean 1
  // over the open area.
  std::vector<double> density(ncells, 0.3);
  {
    Rng rng = stream(kDensity);
    const int bumps = std::max<int>(2, static_cast<int>(ncells / 64));
    for (int b = 0; b < bumps; ++b) {
      const double cx = rng.uniform(0.0, g.nx);
      const double cy = rng.uniform(0.0, g.ny);
      const double sigma = rng.uniform(1.5, 4.0);
      const double amp = rng.uniform(0.5, 2.0);
      for (int r = 0; r < g.ny; ++r) {
        for (int c = 0; c < g.nx; ++c) {
          const double d2 = (c + 0.5 - cx) * (c + 0.5 - cx) + (r + 0.5 - cy) * (r + 0.5 - cy);
          density[g.gcell_offset(c, r)] += amp * std::exp(-d2 / (2.0 * sigma * sigma));
        }
      }
    }
    double sum = 0.0;
    double open = 0.0;
    for (std::size_t i = 0; i < ncells; ++i) {
      sum += density[i] * (1.0 - blocked[i]);
      open += 1.0 - blocked[i];
    }
    if (sum > 0.0) {
      for (double& d : density) d *= open / sum;
    }
  }

  auto hits_blockage = [&](const Rect& r) {
    return std::any_of(g.blockages.begin(), g.blockages.end(),
                       [&](const Rect& b) { return overlap_area(r, b) > 0.0; });
  };

  // Cells and their pins.
  {
    Rng rng = stream(kCells);
    const double row_h = 0.2 * pitch;
    for (int r = 0; r < g.ny; ++r) {
      for (int c = 0; c < g.nx; ++c) {
        const std::size_t i = g.gcell_offset(c, r);
        if (blocked[i] >= 1.0) continue;
        const int count = rng.poisson(cfg.cells_per_gcell_mean * density[i] * (1.0 - blocked[i]));
        for (int k = 0; k < count; ++k) {
          const double w = pitch * rng.uniform(0.08, 0.25);
          Rect box;
          bool placed = false;
          for (int attempt = 0; attempt < 4 && !placed; ++attempt) {
            box.w = w;
            box.h = row_h;
            box.x = std::clamp(c * pitch + rng.uniform(0.0, pitch - 0.5 * w), 0.0, g.width() - w);
            box.y = std::clamp(r * pitch + row_h * static_cast<double>(rng.index(5)), 0.0,
                               g.height() - row_h);
            placed = !hits_blockage(box);
          }
          if (!placed) continue;
          const int cell_id = static_cast<int>(g.cells.size());
          g.cells.push_back({cell_id, box});
          const int npins = 1 + rng.poisson(std::max(0.0, cfg.pins_per_cell_mean - 1.0));
          for (int p = 0; p < npins; ++p) {
            Pin pin;
            pin.id = static_cast<int>(g.pins.size());
            pin.cell = cell_id;
            pin.loc = {rng.uniform(box.x, box.right()), rng.uniform(box.y, box.top())};
            pin.is_clock = rng.bernoulli(cfg.clock_pin_fraction);
            g.pins.push_back(pin);
          }
        }
      }
    }
  }

  // I/O pins on the layout boundary.
  {
    Rng rng = stream(kIoPins);
    const int count = std::max(4, (g.nx + g.ny) / 2);
    for (int k = 0; k < count; ++k) {
      Pin pin;
      pin.id = static_cast<int>(g.pins.size());
      const double t = rng.uniform();
      switch (rng.index(4)) {
        case 0: pin.loc = {t * g.width(), 0.0}; break;
        case 1: pin.loc = {t * g.width(), g.height()}; break;
        case 2: pin.loc = {0.0, t * g.height()}; break;
        default: pin.loc = {g.width(), t * g.height()}; break;
      }
      g.pins.push_back(pin);
    }
  }

  // Nets: each unassigned pin gathers a few unassigned pins from its own
  // g-cell (local nets) or from a small neighbourhood.
  std::vector<std::vector<int>> bucket(ncells);
  std::vector<double> pin_count(ncells, 0.0);
  for (const Pin& p : g.pins) {
    const GcellIndex at = g.gcell_of(p.loc);
    bucket[g.gcell_offset(at.col, at.row)].push_back(p.id);
    pin_count[g.gcell_offset(at.col, at.row)] += 1.0;
  }
  {
    Rng rng = stream(kNets);
    std::vector<char> assigned(g.pins.size(), 0);
    std::vector<int> pool;
    for (Pin& p : g.pins) {
      if (assigned[static_cast<std::size_t>(p.id)]) continue;
      const int size = 2 + std::min(rng.poisson(1.2), 5);
      const int radius = rng.bernoulli(0.35) ? 0 : 1 + static_cast<int>(rng.index(2));
      const GcellIndex at = g.gcell_of(p.loc);
      pool.clear();
      for (int r = at.row - radius; r <= at.row + radius; ++r) {
        for (int c = at.col - radius; c <= at.col + radius; ++c) {
          if (!g.in_grid(c, r)) continue;
          for (int id : bucket[g.gcell_offset(c, r)]) {
            if (id != p.id && !assigned[static_cast<std::size_t>(id)]) pool.push_back(id);
          }
        }
      }
      Net net;
      net.id = static_cast<int>(g.nets.size());
      net.pins.push_back(p.id);
      const std::size_t take = std::min<std::size_t>(pool.size(), static_cast<std::size_t>(size - 1));
      for (std::size_t k = 0; k < take; ++k) {
        std::swap(pool[k], pool[k + rng.index(pool.size() - k)]);
        net.pins.push_back(pool[k]);
      }
      std::sort(net.pins.begin(), net.pins.end());
      net.has_ndr = rng.bernoulli(cfg.ndr_net_fraction);
      for (int id : net.pins) {
        assigned[static_cast<std::size_t>(id)] = 1;
        g.pins[static_cast<std::size_t>(id)].net = net.id;
      }
      g.nets.push_back(std::move(net));
    }
  }

  // Congestion: loads follow local pin density; even metal layers route
  // horizontally (capacity on vertical borders), odd layers vertically.
  double mean_pins = 0.0;
  {
    double open = 0.0;
    for (std::size_t i = 0; i < ncells; ++i) {
      mean_pins += pin_count[i];
      open += 1.0 - blocked[i];
    }
    mean_pins = std::max(1.0, mean_pins / std::max(open, 1.0));
  }
  {
    Rng rng = stream(kCongestion);
    const double base = cfg.congestion_base_capacity;
    for (int l = 0; l < cfg.layers.num_metal_layers; ++l) {
      const double scale = std::max(0.4, 1.0 - 0.12 * l);
      const bool horizontal = l % 2 == 0;
      std::vector<Resource> layer(g.num_metal_edges());
      auto fill = [&](std::size_t edge, std::size_t a, std::size_t b, bool preferred) {
        if (!preferred) return;
        const double open = 1.0 - std::max(blocked[a], blocked[b]);
        layer[edge].capacity = static_cast<int>(std::lround(base * open));
        const double demand = (pin_count[a] + pin_count[b]) / (2.0 * mean_pins);
        layer[edge].load = rng.poisson(0.55 * base * demand * scale);
      };
      for (int r = 0; r < g.ny; ++r) {
        for (int c = 0; c + 1 < g.nx; ++c) {
          fill(g.vertical_edge(c, r), g.gcell_offset(c, r), g.gcell_offset(c + 1, r), horizontal);
        }
      }
      for (int r = 0; r + 1 < g.ny; ++r) {
        for (int c = 0; c < g.nx; ++c) {
          fill(g.horizontal_edge(c, r), g.gcell_offset(c, r), g.gcell_offset(c, r + 1), !horizontal);
        }
      }
      g.congestion.metal.push_back(std::move(layer));
    }
    for (int v = 0; v < cfg.layers.num_via_layers; ++v) {
      const double scale = std::max(0.4, 1.0 - 0.1 * v);
      std::vector<Resource> layer(ncells);
      for (std::size_t i = 0; i < ncells; ++i) {
        layer[i].capacity = static_cast<int>(std::lround(2.0 * base * (1.0 - blocked[i])));
        layer[i].load = rng.poisson(0.8 * base * (pin_count[i] / mean_pins) * scale);
      }
      g.congestion.via.push_back(std::move(layer));
    }
  }

  // Latent score over the g-cells that survive macro exclusion.
  const FeatureExtractor fx(g);
  std::vector<std::size_t> eligible;
  for (int r = 0; r < g.ny; ++r) {
    for (int c = 0; c < g.nx; ++c) {
      if (!fx.fully_blocked({c, r})) eligible.push_back(g.gcell_offset(c, r));
    }
  }
  if (eligible.empty()) throw ConfigError("synth: no g-cells left after macro exclusion");

  std::vector<double> score(ncells, 0.0);
  {
    Rng rng = stream(kScore);
    auto over = [](const Resource& res) { return std::max(0, res.load - res.capacity); };
    for (std::size_t i : eligible) {
      const int c = static_cast<int>(i % static_cast<std::size_t>(g.nx));
      const int r = static_cast<int>(i / static_cast<std::size_t>(g.nx));
      double overflow = 0.0;
      for (const auto& layer : g.congestion.metal) {
        if (c > 0) overflow += over(layer[g.vertical_edge(c - 1, r)]);
        if (c + 1 < g.nx) overflow += over(layer[g.vertical_edge(c, r)]);
        if (r > 0) overflow += over(layer[g.horizontal_edge(c, r - 1)]);
        if (r + 1 < g.ny) overflow += over(layer[g.horizontal_edge(c, r)]);
      }
      for (const auto& layer : g.congestion.via) overflow += over(layer[i]);
      score[i] = kOverflowWeight * overflow + kPinWeight * pin_count[i] + kLatentNoise * rng.normal();
    }
  }

  std::vector<std::size_t> ranked = eligible;
  std::stable_sort(ranked.begin(), ranked.end(),
                   [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  const std::size_t k = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(cfg.target_hotspot_rate * static_cast<double>(eligible.size()))),
      1, eligible.size());
  std::vector<std::size_t> hot(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k));
  std::vector<std::size_t> cold(ranked.begin() + static_cast<std::ptrdiff_t>(k), ranked.end());

  // Label noise swaps a fraction of planted hotspots with random cold g-cells,
  // keeping the positive rate fixed.
  {
    Rng rng = stream(kNoise);
    const std::size_t swaps = std::min<std::size_t>(
        cold.size(), static_cast<std::size_t>(std::llround(cfg.label_noise * static_cast<double>(k))));
    for (std::size_t s = 0; s < swaps; ++s) {
      std::swap(hot[s], hot[s + rng.index(hot.size() - s)]);
      std::swap(cold[s], cold[s + rng.index(cold.size() - s)]);
      std::swap(hot[s], cold[s]);
    }
  }
  std::sort(hot.begin(), hot.end());

  SynthDesign out;
  {
    Rng rng = stream(kBoxes);
    for (std::size_t i : hot) {
      const int c = static_cast<int>(i % static_cast<std::size_t>(g.nx));
      const int r = static_cast<int>(i / static_cast<std::size_t>(g.nx));
      out.drc.boxes.push_back({c * pitch + pitch * rng.uniform(0.1, 0.5),
                               r * pitch + pitch * rng.uniform(0.1, 0.5),
                               pitch * rng.uniform(0.05, 0.4), pitch * rng.uniform(0.05, 0.4)});
    }
  }
  out.hotspots = std::move(hot);
  out.grid = std::move(g);
  validate_layout(out.grid);
  return out;
}

SynthConfig suite_design_config(const SynthConfig& base, std::uint64_t seed, int index) {
  SynthConfig cfg = base;
  cfg.seed = derive_seed(seed, static_cast<std::uint64_t>(index));
  Rng rng(derive_seed(cfg.seed, 0x5EED));
  cfg.cells_per_gcell_mean = base.cells_per_gcell_mean * rng.uniform(0.8, 1.2);
  cfg.pins_per_cell_mean = base.pins_per_cell_mean * rng.uniform(0.9, 1.1);
  cfg.blockage_fraction = std::min(0.9, base.blockage_fraction * rng.uniform(0.5, 1.5));
  return cfg;
}

std::vector<SynthDesign> generate_suite(const SynthConfig& base, int n_designs, std::uint64_t seed) {
  if (n_designs < 1) throw ConfigError("synth: suite needs at least one design");
  std::vector<SynthDesign> out;
  out.reserve(static_cast<std::size_t>(n_designs));
  for (int i = 0; i < n_designs; ++i) {
    SynthDesign d = generate(suite_design_config(base, seed, i));
    char name[32];
    std::snprintf(name, sizeof name, "synth_%02d", i);
    d.name = name;
    out.push_back(std::move(d));
  }
  return out;
}

nlohmann::json to_json(const SynthConfig& cfg) {
  return {{"nx", cfg.nx},
          {"ny", cfg.ny},
          {"gcell_size", cfg.gcell_size},
          {"num_metal_layers", cfg.layers.num_metal_layers},
          {"num_via_layers", cfg.layers.num_via_layers},
          {"cells_per_gcell_mean", cfg.cells_per_gcell_mean},
          {"pins_per_cell_mean", cfg.pins_per_cell_mean},
          {"clock_pin_fraction", cfg.clock_pin_fraction},
          {"ndr_net_fraction", cfg.ndr_net_fraction},
          {"blockage_fraction", cfg.blockage_fraction},
          {"congestion_base_capacity", cfg.congestion_base_capacity},
          {"target_hotspot_rate", cfg.target_hotspot_rate},
          {"label_noise", cfg.label_noise},
          {"seed", cfg.seed}};
}

SynthConfig synth_config_from_json(const nlohmann::json& j) {
  using namespace json_util;
  object(j, "");
  SynthConfig cfg;
  for (const auto& [key, v] : j.items()) {
    if (key == "nx") cfg.nx = static_cast<int>(as_int(v, key));
    else if (key == "ny") cfg.ny = static_cast<int>(as_int(v, key));
    else if (key == "gcell_size") cfg.gcell_size = as_double(v, key);
    else if (key == "num_metal_layers") cfg.layers.num_metal_layers = static_cast<int>(as_int(v, key));
    else if (key == "num_via_layers") cfg.layers.num_via_layers = static_cast<int>(as_int(v, key));
    else if (key == "cells_per_gcell_mean") cfg.cells_per_gcell_mean = as_double(v, key);
    else if (key == "pins_per_cell_mean") cfg.pins_per_cell_mean = as_double(v, key);
    else if (key == "clock_pin_fraction") cfg.clock_pin_fraction = as_double(v, key);
    else if (key == "ndr_net_fraction") cfg.ndr_net_fraction = as_double(v, key);
    else if (key == "blockage_fraction") cfg.blockage_fraction = as_double(v, key);
    else if (key == "congestion_base_capacity") cfg.congestion_base_capacity = static_cast<int>(as_int(v, key));
    else if (key == "target_hotspot_rate") cfg.target_hotspot_rate = as_double(v, key);
    else if (key == "label_noise") cfg.label_noise = as_double(v, key);
    else if (key == "seed") cfg.seed = as_u64(v, key);
    else throw SchemaError(key, "unknown key");
  }
  validate_synth_config(cfg);
  return cfg;
}

}  // namespace drcnn
