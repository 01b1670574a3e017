#include "vidfeat/descriptors.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace vidfeat {
namespace {

constexpr int kCells = 12;  // 2x2 spatial x 3 temporal
constexpr int kOrientBins = 8;
constexpr float kTwoPi = 2.0f * std::numbers::pi_v<float>;

int cell_index(int x, int y, int t) {
  int cx = x / (kPatchSize / 2);
  int cy = y / (kPatchSize / 2);
  int ct = t / (kTrajectoryLength / 3);
  return (ct * 2 + cy) * 2 + cx;
}

// Linear split of an orientation vote between the two nearest bins.
void vote_orientation(float* cell_hist, float gx, float gy, float mag) {
  float theta = std::atan2(gy, gx);
  if (theta < 0.0f) theta += kTwoPi;
  float pos = theta / kTwoPi * kOrientBins;
  int b0 = static_cast<int>(pos) % kOrientBins;
  float f = pos - std::floor(pos);
  cell_hist[b0] += (1.0f - f) * mag;
  cell_hist[(b0 + 1) % kOrientBins] += f * mag;
}

void l2_normalize(float* v, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += double(v[i]) * v[i];
  if (s <= 0.0) return;
  float inv = static_cast<float>(1.0 / std::sqrt(s));
  for (int i = 0; i < n; ++i) v[i] *= inv;
}

// 8-bin spatial-gradient histograms of one scalar channel, not normalized.
// channel(x, y, t) reads the value; bins laid out cell-major.
template <typename ChannelFn>
std::array<float, kHogDim> gradient_histograms(ChannelFn channel) {
  std::array<float, kHogDim> out{};
  for (int t = 0; t < kTrajectoryLength; ++t) {
    for (int y = 0; y < kPatchSize; ++y) {
      int ym = std::max(y - 1, 0), yp = std::min(y + 1, kPatchSize - 1);
      for (int x = 0; x < kPatchSize; ++x) {
        int xm = std::max(x - 1, 0), xp = std::min(x + 1, kPatchSize - 1);
        float gx = 0.5f * (channel(xp, y, t) - channel(xm, y, t));
        float gy = 0.5f * (channel(x, yp, t) - channel(x, ym, t));
        float mag = std::hypot(gx, gy);
        if (mag > 0.0f)
          vote_orientation(out.data() + cell_index(x, y, t) * kOrientBins, gx, gy, mag);
      }
    }
  }
  return out;
}

}  // namespace

std::string_view kind_name(DescriptorKind kind) {
  switch (kind) {
    case DescriptorKind::traj_shape: return "traj_shape";
    case DescriptorKind::hog: return "hog";
    case DescriptorKind::hof: return "hof";
    case DescriptorKind::mbh: return "mbh";
    case DescriptorKind::lop: return "lop";
    case DescriptorKind::lof: return "lof";
  }
  return "?";
}

std::optional<DescriptorKind> kind_from_name(std::string_view name) {
  for (DescriptorKind k : kAllKinds)
    if (kind_name(k) == name) return k;
  return std::nullopt;
}

std::array<float, kHogDim> hog(const PixelVolume& vol) {
  if (vol.data.size() != kPixelVolumeSize)
    throw std::invalid_argument("hog: bad volume size");
  const float* d = vol.data.data();
  auto channel = [d](int x, int y, int t) {
    return d[(std::size_t(t) * kPatchSize + y) * kPatchSize + x];
  };
  std::array<float, kHogDim> out = gradient_histograms(channel);
  l2_normalize(out.data(), kHogDim);
  return out;
}

std::array<float, kHofDim> hof(const FlowVolume& vol, float zero_thresh) {
  if (vol.data.size() != kFlowVolumeSize)
    throw std::invalid_argument("hof: bad volume size");
  std::array<float, kHofDim> out{};
  const float* d = vol.data.data();
  constexpr int kBins = kOrientBins + 1;  // zero bin last
  for (int t = 0; t < kTrajectoryLength; ++t) {
    for (int y = 0; y < kPatchSize; ++y) {
      for (int x = 0; x < kPatchSize; ++x) {
        std::size_t i = ((std::size_t(t) * kPatchSize + y) * kPatchSize + x) * 2;
        float u = d[i], v = d[i + 1];
        float mag = std::hypot(u, v);
        float* cell = out.data() + cell_index(x, y, t) * kBins;
        if (mag < zero_thresh)
          cell[kOrientBins] += 1.0f;
        else
          vote_orientation(cell, u, v, mag);
      }
    }
  }
  l2_normalize(out.data(), kHofDim);
  return out;
}

std::array<float, kMbhDim> mbh(const FlowVolume& vol) {
  if (vol.data.size() != kFlowVolumeSize)
    throw std::invalid_argument("mbh: bad volume size");
  const float* d = vol.data.data();
  auto channel = [d](int c) {
    return [d, c](int x, int y, int t) {
      return d[((std::size_t(t) * kPatchSize + y) * kPatchSize + x) * 2 + c];
    };
  };
  std::array<float, kHogDim> mbhx = gradient_histograms(channel(0));
  std::array<float, kHogDim> mbhy = gradient_histograms(channel(1));
  l2_normalize(mbhx.data(), kHogDim);
  l2_normalize(mbhy.data(), kHogDim);
  std::array<float, kMbhDim> out;
  std::copy(mbhx.begin(), mbhx.end(), out.begin());
  std::copy(mbhy.begin(), mbhy.end(), out.begin() + kHogDim);
  return out;
}

std::vector<float> root_sift(std::span<const float> values) {
  double l1 = 0.0;
  for (float v : values) l1 += std::abs(v);
  std::vector<float> out(values.size(), 0.0f);
  if (l1 <= 0.0) return out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    float n = static_cast<float>(std::sqrt(std::abs(values[i]) / l1));
    out[i] = std::copysign(n, values[i]);
  }
  return out;
}

std::vector<float> xyt_extend(std::span<const float> values, std::array<float, 3> location,
                              std::uint32_t width, std::uint32_t height, std::uint32_t frames) {
  if (width == 0 || height == 0 || frames == 0)
    throw std::invalid_argument("xyt_extend: zero video dimension");
  std::vector<float> out(values.begin(), values.end());
  out.push_back(location[0] / width);
  out.push_back(location[1] / height);
  out.push_back(location[2] / frames);
  return out;
}

void DescriptorMatrix::append(std::span<const float> v) {
  if (dim == 0) dim = static_cast<int>(v.size());
  if (static_cast<int>(v.size()) != dim)
    throw std::invalid_argument("DescriptorMatrix: row width mismatch");
  values.insert(values.end(), v.begin(), v.end());
}

}  // namespace vidfeat
