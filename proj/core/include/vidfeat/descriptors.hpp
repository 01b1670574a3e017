#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "vidfeat/trajectory.hpp"

namespace vidfeat {

enum class DescriptorKind { traj_shape = 0, hog, hof, mbh, lop, lof };
inline constexpr int kNumDescriptorKinds = 6;
inline constexpr std::array<DescriptorKind, kNumDescriptorKinds> kAllKinds = {
    DescriptorKind::traj_shape, DescriptorKind::hog, DescriptorKind::hof,
    DescriptorKind::mbh,        DescriptorKind::lop, DescriptorKind::lof};

std::string_view kind_name(DescriptorKind kind);
std::optional<DescriptorKind> kind_from_name(std::string_view name);

// Fixed dimension of the hand-crafted kinds; lop/lof depend on the model.
inline constexpr int kHogDim = 96;
inline constexpr int kHofDim = 108;
inline constexpr int kMbhDim = 192;
inline constexpr int kTrajShapeDim = 28;

// Orientation histograms over a 2x2x3 cell grid. The zero bin of hof is
// the last of the 9 bins in each cell.
std::array<float, kHogDim> hog(const PixelVolume& vol);
std::array<float, kHofDim> hof(const FlowVolume& vol, float zero_thresh = 0.4f);
std::array<float, kMbhDim> mbh(const FlowVolume& vol);

std::vector<float> root_sift(std::span<const float> values);

// Appends (x/W, y/H, t/T) for a location in level-0 coordinates.
std::vector<float> xyt_extend(std::span<const float> values, std::array<float, 3> location,
                              std::uint32_t width, std::uint32_t height, std::uint32_t frames);

// Row-major matrix of descriptors of one kind, one row per trajectory.
struct DescriptorMatrix {
  int dim = 0;
  std::vector<float> values;

  int rows() const { return dim > 0 ? static_cast<int>(values.size()) / dim : 0; }
  std::span<const float> row(int i) const {
    return {values.data() + std::size_t(i) * dim, static_cast<std::size_t>(dim)};
  }
  void append(std::span<const float> v);
};

// All descriptors extracted from one video, kinds aligned by row.
struct VideoDescriptors {
  std::uint32_t video_width = 0;
  std::uint32_t video_height = 0;
  std::uint32_t video_frames = 0;
  std::vector<std::array<float, 3>> locations;  // trajectory mean point, level-0 coords
  std::array<DescriptorMatrix, kNumDescriptorKinds> kinds;

  DescriptorMatrix& of(DescriptorKind k) { return kinds[static_cast<int>(k)]; }
  const DescriptorMatrix& of(DescriptorKind k) const { return kinds[static_cast<int>(k)]; }
};

}  // namespace vidfeat
