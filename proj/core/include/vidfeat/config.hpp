#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vidfeat/convisa.hpp"
#include "vidfeat/flow.hpp"
#include "vidfeat/isa.hpp"
#include "vidfeat/mir.hpp"
#include "vidfeat/trajectory.hpp"

namespace vidfeat {

// Every pipeline tunable, loadable from a key=value file ('#' comments).
struct PipelineConfig {
  std::uint64_t seed = 0;

  int pyramid_scales = 8;
  double pyramid_factor = 0.7071067811865476;

  FlowParams flow;
  bool stabilize_enabled = false;
  int stabilize_grid_step = 8;

  TrackerConfig track{5, 0.001f, 5, 0.3f, 16.0f};
  float hof_zero_thresh = 0.4f;
  bool root_sift = true;
  bool xyt = false;

  ConvIsaGeometry convisa;
  int convisa_samples = 200000;  // training sub-volumes per stream
  IsaTrainOpts isa;              // seed field is overridden per use

  int encode_k = 256;
  double encode_alpha = 0.5;
  int encode_max_samples = 256000;
  bool encode_whiten = false;
  std::vector<int> mifs_skips{0, 1, 2};

  double svm_c = 100.0;
  MirParams mir;

  // Throws ConfigError; geometry violations name the broken equation.
  void validate() const;
};

// Parses and validates. Unknown or duplicate keys are ConfigErrors.
PipelineConfig parse_config(const std::string& text);
PipelineConfig load_config(const std::filesystem::path& path);

std::string config_to_string(const PipelineConfig& cfg);
void save_config(const PipelineConfig& cfg, const std::filesystem::path& path);

}  // namespace vidfeat
