#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "vidfeat/flow.hpp"
#include "vidfeat/video.hpp"

namespace vidfeat {

inline constexpr int kTrajectoryLength = 15;  // tracked points per trajectory
inline constexpr int kPatchSize = 32;         // spatial extent of sampled volumes
inline constexpr std::size_t kPixelVolumeSize =
    std::size_t(kPatchSize) * kPatchSize * kTrajectoryLength;
inline constexpr std::size_t kFlowVolumeSize = kPixelVolumeSize * 2;

struct TrackPoint {
  float x = 0.0f;
  float y = 0.0f;
};

struct Trajectory {
  std::array<TrackPoint, kTrajectoryLength> points{};  // coords at its pyramid level
  int scale_index = 0;
  int start_frame = 0;
};

// Gray intensities, 32x32x15, x fastest then y then t.
struct PixelVolume {
  std::vector<float> data;
};

// Flow samples, 32x32x15x2, channel last (u then v).
struct FlowVolume {
  std::vector<float> data;
};

struct TrackerConfig {
  int step = 5;                    // dense sampling grid spacing, px
  float texture_threshold = 0.0f;  // fraction of the frame's max corner score
  int refresh = 5;                 // frames between re-sampling passes
  float static_tol = 0.3f;         // px, displacement mean/std below -> static
  float max_jump = 16.0f;          // px, larger per-frame displacement kills the track
};

// Grid points with a 16 px margin whose min-eigenvalue corner score
// exceeds texture_threshold times the frame's max score.
std::vector<TrackPoint> dense_sample(ImageView frame, int step, float texture_threshold);

// One tracking step: adds the per-component median of the 3x3 flow
// neighborhood at the rounded position. Empty when the point is too
// close to the border to take the neighborhood.
std::optional<TrackPoint> track_point(TrackPoint p, const FlowField& flow);

bool is_static(const Trajectory& traj, float tol);

std::array<float, 28> trajectory_shape(const Trajectory& traj);

std::vector<Trajectory> extract_trajectories(const ScalePyramid& pyramid,
                                             const std::vector<FlowSequence>& flows,
                                             const TrackerConfig& cfg);

PixelVolume extract_volume(const GrayVideo& video, const Trajectory& traj);
FlowVolume extract_flow_volume(const FlowSequence& flows, const Trajectory& traj);

void save_trajectories_csv(const std::vector<Trajectory>& trajs,
                           const std::filesystem::path& path);

}  // namespace vidfeat
