#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "vidfeat/video.hpp"

namespace vidfeat {

// Dense displacement field from frame t to t+1, row-major, px/frame.
struct FlowField {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<float> u;
  std::vector<float> v;

  float u_at(std::uint32_t x, std::uint32_t y) const {
    return u[std::size_t(y) * width + x];
  }
  float v_at(std::uint32_t x, std::uint32_t y) const {
    return v[std::size_t(y) * width + x];
  }
};

using FlowSequence = std::vector<FlowField>;

struct FlowParams {
  int pyramid_levels = 3;
  int window_radius = 7;  // applicability and averaging radius
  int iterations = 3;     // refinement passes per level
  float sigma = 1.5f;     // applicability Gaussian
};

FlowField compute_flow(ImageView a, ImageView b, const FlowParams& params);
FlowSequence compute_flow_sequence(const GrayVideo& video, const FlowParams& params);

void save_flo(const FlowField& flow, const std::filesystem::path& path);
FlowField load_flo(const std::filesystem::path& path);

// Correspondence (x1,y1) -> (x2,y2) between consecutive frames.
struct PointMatch {
  float x1, y1, x2, y2;
};

struct RectifyResult {
  FlowField flow;
  bool applied = false;  // false when RANSAC failed and flow is unchanged
};

// Fits a homography to the matches by RANSAC (1 px inlier threshold,
// 200 iterations, at least 50% inliers) and subtracts the induced
// displacement from the flow.
RectifyResult rectify_flow(const FlowField& flow, const std::vector<PointMatch>& matches,
                           std::uint64_t seed = 0);

// Grid-samples correspondences implied by a flow field.
std::vector<PointMatch> matches_from_flow(const FlowField& flow, int step = 8);

}  // namespace vidfeat
