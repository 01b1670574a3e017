#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "vidfeat/config.hpp"
#include "vidfeat/convisa.hpp"
#include "vidfeat/descriptors.hpp"
#include "vidfeat/encoding.hpp"

namespace vidfeat {

// Per-video extraction output. Rows are aligned across descriptor kinds,
// mifs_levels, locations, and the two volume lists. Location t and the xyt
// time normalization use the frame-subsampled clock of the row's level.
struct VideoFeatures {
  VideoDescriptors descriptors;
  std::vector<int> mifs_levels;  // skip value per row
  std::vector<PixelVolume> pixel_volumes;
  std::vector<FlowVolume> flow_volumes;

  int rows() const { return static_cast<int>(mifs_levels.size()); }
};

// Dense trajectories and hand-crafted descriptors at every configured
// MIFS level; lop/lof stay empty until append_learned_descriptors.
VideoFeatures extract_features(const GrayVideo& video, const PipelineConfig& cfg);

// Fills the lop/lof rows from the stored volumes.
void append_learned_descriptors(VideoFeatures& vf, const TwoStreamModel& model,
                                const PipelineConfig& cfg);

void save_features(const VideoFeatures& vf, const std::filesystem::path& path);
VideoFeatures load_features(const std::filesystem::path& path);

// Row-concatenates each kind's descriptors across videos, canonical order,
// kinds with no rows anywhere omitted.
std::vector<std::pair<DescriptorKind, Eigen::MatrixXd>> gather_descriptor_samples(
    const std::vector<const VideoDescriptors*>& videos);

// Seeded uniform sample (algorithm R) over a stream of aligned volume pairs.
class VolumeReservoir {
 public:
  VolumeReservoir(int capacity, std::uint64_t seed);

  void offer(const PixelVolume& pv, const FlowVolume& fv);

  const std::vector<PixelVolume>& pixel() const { return pixel_; }
  const std::vector<FlowVolume>& flow() const { return flow_; }
  std::size_t seen() const { return seen_; }

 private:
  std::size_t capacity_;
  std::mt19937_64 rng_;
  std::size_t seen_ = 0;
  std::vector<PixelVolume> pixel_;
  std::vector<FlowVolume> flow_;
};

struct VideoRepresentations {
  std::vector<std::string> ids;
  Eigen::MatrixXd features;  // one row per video
};

// Tensor container plus a "<path>.ids" text sidecar.
void save_representations(const VideoRepresentations& reps, const std::filesystem::path& path);
VideoRepresentations load_representations(const std::filesystem::path& path);

}  // namespace vidfeat
