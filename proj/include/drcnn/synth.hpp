#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "drcnn/layout.hpp"

namespace drcnn {

/// Densities and rates for one synthetic design.
struct SynthConfig {
  int nx = 32;
  int ny = 32;
  double gcell_size = 10.0;
  LayerConfig layers;
  double cells_per_gcell_mean = 4.0;
  double pins_per_cell_mean = 3.0;
  double clock_pin_fraction = 0.02;
  double ndr_net_fraction = 0.05;
  double blockage_fraction = 0.05;
  int congestion_base_capacity = 10;
  double target_hotspot_rate = 0.03;
  double label_noise = 0.05;
  std::uint64_t seed = 1;

  bool operator==(const SynthConfig&) const = default;
};

/// Weights of the latent hotspot score: overflow sum and central pin count.
inline constexpr double kOverflowWeight = 1.0;
inline constexpr double kPinWeight = 0.5;
/// Standard deviation of the Gaussian term added to the latent score.
inline constexpr double kLatentNoise = 2.0;

void validate_synth_config(const SynthConfig& cfg);

nlohmann::json to_json(const SynthConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
SynthConfig synth_config_from_json(const nlohmann::json& j);

struct SynthDesign {
  std::string name;
  LayoutGrid grid;
  DrcReport drc;
  /// Row-major g-cell offsets of the planted hotspots, ascending.
  std::vector<std::size_t> hotspots;
};

/// Deterministic in `cfg`; one DRC box strictly inside every planted hotspot.
SynthDesign generate(const SynthConfig& cfg);

/// Config of design `index` of a suite: densities jittered, seed derived.
SynthConfig suite_design_config(const SynthConfig& base, std::uint64_t seed, int index);

/// Designs named synth_00, synth_01, ...
std::vector<SynthDesign> generate_suite(const SynthConfig& base, int n_designs, std::uint64_t seed);

}  // namespace drcnn
