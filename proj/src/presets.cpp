#include "ensemblecast/presets.hpp"

#include "ensemblecast/config.hpp"
#include "ensemblecast/errors.hpp"

namespace ecast {

namespace {

FractalPerlinCfg fractal(std::array<int, 2> res, std::array<bool, 2> tileable,
                         double alpha) {
  FractalPerlinCfg f;
  f.res = res;
  f.tileable = tileable;
  f.octaves = 3;
  f.persistence = 0.5;
  f.lacunarity = 2;
  f.alpha = alpha;
  return f;
}

std::map<std::string, NoiseConfig> build_presets() {
  std::map<std::string, NoiseConfig> p;
  p.emplace("gauss_0.1", GaussianCfg{0.0, 0.1});
  p.emplace("gauss_0.05", GaussianCfg{0.0, 0.05});
  p.emplace("gauss_0.01", GaussianCfg{0.0, 0.01});

  PerlinCfg small;
  small.res = {2, 3, 3};
  small.tileable = {true, false, false};
  p.emplace("P_res_2x3x3", small);
  PerlinCfg large;
  large.res = {2, 12, 12};
  large.tileable = {true, false, false};
  p.emplace("P_res_2x12x12", large);

  p.emplace("PF_res_15x15", fractal({15, 15}, {false, true}, 0.2));
  p.emplace("PF_res_5x5", fractal({5, 5}, {false, true}, 0.2));
  p.emplace("PF_res_15x15_without_tileable", fractal({15, 15}, {false, false}, 0.2));
  p.emplace("PF_res_15x15_alpha_0.05", fractal({15, 15}, {false, true}, 0.05));
  p.emplace("PF_res_15x15_alpha_0.4", fractal({15, 15}, {false, true}, 0.4));
  return p;
}

}  // namespace

const std::map<std::string, NoiseConfig>& noise_presets() {
  static const std::map<std::string, NoiseConfig> presets = build_presets();
  return presets;
}

NoiseConfig noise_preset(const std::string& name) {
  const auto& p = noise_presets();
  const auto it = p.find(name);
  if (it == p.end())
    throw Error(Errc::unknown_key, "unknown noise preset '" + name + "'");
  return it->second;
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  names.reserve(noise_presets().size());
  for (const auto& [name, cfg] : noise_presets()) names.push_back(name);
  return names;
}

std::string preset_config_text(const std::string& name) {
  return noise_section_text(noise_preset(name));
}

}  // namespace ecast
