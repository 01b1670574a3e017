#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "vidfeat/error.hpp"

namespace vidfeat {

// Single-channel video, intensities in [0,1], stored frame-major with
// row-major frames.
struct GrayVideo {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint32_t frames = 0;
  std::vector<float> data;

  std::size_t frame_offset(std::uint32_t t) const {
    return static_cast<std::size_t>(t) * width * height;
  }
  float at(std::uint32_t x, std::uint32_t y, std::uint32_t t) const {
    return data[frame_offset(t) + static_cast<std::size_t>(y) * width + x];
  }
  float& at(std::uint32_t x, std::uint32_t y, std::uint32_t t) {
    return data[frame_offset(t) + static_cast<std::size_t>(y) * width + x];
  }
};

// Non-owning view of one frame.
struct ImageView {
  const float* data = nullptr;
  std::uint32_t width = 0;
  std::uint32_t height = 0;

  float at(std::uint32_t x, std::uint32_t y) const {
    return data[static_cast<std::size_t>(y) * width + x];
  }
  // Bilinear sample with border clamp.
  float sample(float x, float y) const;
};

inline ImageView frame_view(const GrayVideo& v, std::uint32_t t) {
  return ImageView{v.data.data() + v.frame_offset(t), v.width, v.height};
}

enum class VideoFormat { rgv, pgm_sequence };

// path is a .rgv file or a directory of .pgm frames (sorted by filename).
GrayVideo load_video(const std::filesystem::path& path, VideoFormat format);
void save_rgv(const GrayVideo& video, const std::filesystem::path& path);
// Writes every frame as <dir>/frame_%05u.pgm.
void save_pgm_sequence(const GrayVideo& video, const std::filesystem::path& dir);
// Writes one grayscale image; values are min-max scaled to [0,255].
void save_pgm_scaled(const float* data, std::uint32_t width, std::uint32_t height,
                     const std::filesystem::path& path);

GrayVideo resize_bilinear(const GrayVideo& video, std::uint32_t new_width,
                          std::uint32_t new_height);

struct ScalePyramid {
  std::vector<GrayVideo> levels;  // level 0 is the input resolution
  float factor = 0.0f;

  // Maps level coordinates back to level-0 coordinates.
  float to_base(float coord, int level) const;
};

ScalePyramid build_scale_pyramid(const GrayVideo& video, int num_scales,
                                 float factor);

// Ground-truth motion for synthetic clips. The textured pattern wraps
// around frame borders, so flow is valid everywhere.
struct MotionSpec {
  enum class Kind { still, translate, oscillate };

  Kind kind = Kind::still;
  float vx = 0.0f;  // translate, px/frame
  float vy = 0.0f;
  int axis = 0;         // oscillate: 0 moves x, 1 moves y
  float period = 8.0f;  // oscillate, frames/cycle
  float amplitude = 2.0f;

  static MotionSpec still_scene() { return MotionSpec{}; }
  static MotionSpec translate(float vx, float vy);
  static MotionSpec oscillate(int axis, float period, float amplitude);

  // Pattern offset at frame t.
  std::pair<float, float> offset_at(float t) const;
  // Exact flow from frame t to frame t+1.
  std::pair<float, float> flow_at(std::uint32_t t) const;
};

GrayVideo synth_video(const MotionSpec& spec, std::uint32_t width, std::uint32_t height,
                      std::uint32_t frames, std::uint64_t seed);

}  // namespace vidfeat
