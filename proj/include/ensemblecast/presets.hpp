#pragma once

#include <map>
#include <string>
#include <vector>

#include "ensemblecast/noise.hpp"

namespace ecast {

/// The ten named noise configurations exercised in the study: three Gaussian
/// amplitudes, two classic 3D Perlin resolutions, and five fractal variants.
const std::map<std::string, NoiseConfig>& noise_presets();

/// UnknownKey for names outside noise_presets().
NoiseConfig noise_preset(const std::string& name);

std::vector<std::string> preset_names();

/// Canonical [noise] section for the preset; byte-identical to the golden
/// file presets/<name>.cfg and parseable by parse_config.
std::string preset_config_text(const std::string& name);

}  // namespace ecast
