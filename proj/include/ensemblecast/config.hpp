#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "ensemblecast/grid.hpp"
#include "ensemblecast/noise.hpp"
#include "ensemblecast/train.hpp"

namespace ecast {

struct DataCfg {
  std::string path;        // OFS1 file; empty = synthesize
  int days = 120;
  int grid_lat = 32;
  int grid_lon = 32;
  std::uint64_t seed = 0;
};

struct SplitCfg {
  DayRange train{0, 0};
  DayRange val{0, 0};
  DayRange test{0, 0};
};

struct StepperCfg {
  std::string kind = "linear";   // persistence | linear | graph
  int width = 16;
  int proc_layers = 2;
  std::vector<int> levels = {9, 5};
  std::uint64_t seed = 0;
};

struct EnsembleCfgSection {
  int members = 5;
  int horizon = 15;
  std::uint64_t base_seed = 0;
};

struct OutputCfg {
  std::string directory = ".";
};

/// Sections: [data], [split], [stepper], [train], [ensemble], [noise],
/// [output]. `present` records which appeared in the file.
struct ExperimentConfig {
  DataCfg data;
  SplitCfg split;
  StepperCfg stepper;
  TrainConfig train;
  EnsembleCfgSection ensemble;
  NoiseConfig noise = GaussianCfg{};
  OutputCfg output;
  std::set<std::string> present;

  bool has(const std::string& section) const { return present.count(section) != 0; }
  /// MissingSection unless the section appeared in the file.
  void require(const std::string& section) const;
};

/// Line-based `key = value` under `[section]` headers; `#` starts a comment.
/// Unknown sections or keys are errors; numbers parse locale-independently.
ExperimentConfig parse_config(const std::filesystem::path& path);
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin);

/// Config echo in the same format parse_config reads.
std::string config_text(const ExperimentConfig& cfg);

/// Just the [noise] section for one noise configuration.
std::string noise_section_text(const NoiseConfig& noise);

}  // namespace ecast
