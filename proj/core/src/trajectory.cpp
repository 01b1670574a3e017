#include "vidfeat/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "vidfeat/error.hpp"

namespace vidfeat {
namespace {

constexpr int kMargin = kPatchSize / 2;

float median9(std::array<float, 9>& v) {
  std::nth_element(v.begin(), v.begin() + 4, v.end());
  return v[4];
}

// Min eigenvalue of the 3x3 box-summed structure tensor.
std::vector<float> corner_scores(ImageView frame) {
  int w = static_cast<int>(frame.width), h = static_cast<int>(frame.height);
  std::vector<float> ix(std::size_t(w) * h), iy(std::size_t(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int xm = std::max(x - 1, 0), xp = std::min(x + 1, w - 1);
      int ym = std::max(y - 1, 0), yp = std::min(y + 1, h - 1);
      ix[std::size_t(y) * w + x] = 0.5f * (frame.at(xp, y) - frame.at(xm, y));
      iy[std::size_t(y) * w + x] = 0.5f * (frame.at(x, yp) - frame.at(x, ym));
    }
  }
  std::vector<float> score(std::size_t(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float sxx = 0, syy = 0, sxy = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        int yy = std::clamp(y + dy, 0, h - 1);
        for (int dx = -1; dx <= 1; ++dx) {
          int xx = std::clamp(x + dx, 0, w - 1);
          float gx = ix[std::size_t(yy) * w + xx];
          float gy = iy[std::size_t(yy) * w + xx];
          sxx += gx * gx;
          syy += gy * gy;
          sxy += gx * gy;
        }
      }
      float tr = sxx + syy;
      float det = std::sqrt((sxx - syy) * (sxx - syy) + 4.0f * sxy * sxy);
      score[std::size_t(y) * w + x] = 0.5f * (tr - det);
    }
  }
  return score;
}

}  // namespace

std::vector<TrackPoint> dense_sample(ImageView frame, int step, float texture_threshold) {
  if (step < 1) throw std::invalid_argument("dense_sample: step must be >= 1");
  if (frame.width < kPatchSize || frame.height < kPatchSize)
    throw std::invalid_argument("dense_sample: frame must be at least 32x32");

  std::vector<float> score = corner_scores(frame);
  float max_score = 0.0f;
  for (float s : score) max_score = std::max(max_score, s);
  float cutoff = texture_threshold * max_score;

  std::vector<TrackPoint> points;
  for (std::uint32_t y = kMargin; y <= frame.height - kMargin; y += step) {
    for (std::uint32_t x = kMargin; x <= frame.width - kMargin; x += step) {
      if (score[std::size_t(y) * frame.width + x] > cutoff)
        points.push_back(TrackPoint{static_cast<float>(x), static_cast<float>(y)});
    }
  }
  return points;
}

std::optional<TrackPoint> track_point(TrackPoint p, const FlowField& flow) {
  int rx = static_cast<int>(std::lround(p.x));
  int ry = static_cast<int>(std::lround(p.y));
  if (rx < 1 || ry < 1 || rx > static_cast<int>(flow.width) - 2 ||
      ry > static_cast<int>(flow.height) - 2)
    return std::nullopt;

  std::array<float, 9> us, vs;
  int k = 0;
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx, ++k) {
      us[k] = flow.u_at(rx + dx, ry + dy);
      vs[k] = flow.v_at(rx + dx, ry + dy);
    }
  }
  return TrackPoint{p.x + median9(us), p.y + median9(vs)};
}

bool is_static(const Trajectory& traj, float tol) {
  double mean = 0.0;
  std::array<double, kTrajectoryLength - 1> mag;
  for (int t = 0; t + 1 < kTrajectoryLength; ++t) {
    double dx = traj.points[t + 1].x - traj.points[t].x;
    double dy = traj.points[t + 1].y - traj.points[t].y;
    mag[t] = std::hypot(dx, dy);
    mean += mag[t];
  }
  mean /= mag.size();
  double var = 0.0;
  for (double m : mag) var += (m - mean) * (m - mean);
  double sd = std::sqrt(var / mag.size());
  return mean < tol && sd < tol;
}

std::array<float, 28> trajectory_shape(const Trajectory& traj) {
  std::array<float, 28> out{};
  double sum = 0.0;
  for (int t = 0; t + 1 < kTrajectoryLength; ++t) {
    double dx = traj.points[t + 1].x - traj.points[t].x;
    double dy = traj.points[t + 1].y - traj.points[t].y;
    sum += std::hypot(dx, dy);
  }
  if (sum <= 0.0) return out;
  for (int t = 0; t + 1 < kTrajectoryLength; ++t) {
    out[2 * t] = static_cast<float>((traj.points[t + 1].x - traj.points[t].x) / sum);
    out[2 * t + 1] = static_cast<float>((traj.points[t + 1].y - traj.points[t].y) / sum);
  }
  return out;
}

std::vector<Trajectory> extract_trajectories(const ScalePyramid& pyramid,
                                             const std::vector<FlowSequence>& flows,
                                             const TrackerConfig& cfg) {
  if (flows.size() != pyramid.levels.size())
    throw std::invalid_argument("extract_trajectories: flows do not match pyramid levels");
  if (cfg.refresh < 1) throw std::invalid_argument("extract_trajectories: refresh must be >= 1");

  std::vector<Trajectory> out;
  for (std::size_t level = 0; level < pyramid.levels.size(); ++level) {
    const GrayVideo& vid = pyramid.levels[level];
    const FlowSequence& seq = flows[level];
    if (vid.frames < 2) continue;
    if (seq.size() != vid.frames - 1)
      throw std::invalid_argument("extract_trajectories: flow sequence length mismatch");
    int last_start = static_cast<int>(vid.frames) - (kTrajectoryLength + 1);
    if (last_start < 0) continue;

    struct Active {
      std::vector<TrackPoint> pts;
      int start = 0;
    };
    std::vector<Active> active;

    for (std::uint32_t t = 0; t < vid.frames; ++t) {
      if (t % cfg.refresh == 0 && static_cast<int>(t) <= last_start) {
        std::map<std::pair<int, int>, bool> occupied;
        for (const Active& a : active) {
          const TrackPoint& p = a.pts.back();
          occupied[{static_cast<int>(std::lround(p.x)) / cfg.step,
                    static_cast<int>(std::lround(p.y)) / cfg.step}] = true;
        }
        for (const TrackPoint& p : dense_sample(frame_view(vid, t), cfg.step,
                                                cfg.texture_threshold)) {
          auto cell = std::make_pair(static_cast<int>(std::lround(p.x)) / cfg.step,
                                     static_cast<int>(std::lround(p.y)) / cfg.step);
          if (!occupied.count(cell)) {
            occupied[cell] = true;
            active.push_back(Active{{p}, static_cast<int>(t)});
          }
        }
      }
      if (t + 1 >= vid.frames) break;

      const FlowField& flow = seq[t];
      std::vector<Active> kept;
      kept.reserve(active.size());
      for (Active& a : active) {
        std::optional<TrackPoint> next = track_point(a.pts.back(), flow);
        if (!next) continue;
        float dx = next->x - a.pts.back().x;
        float dy = next->y - a.pts.back().y;
        if (std::hypot(dx, dy) > cfg.max_jump) continue;
        if (next->x < 0 || next->y < 0 || next->x > vid.width - 1 || next->y > vid.height - 1)
          continue;
        a.pts.push_back(*next);
        if (static_cast<int>(a.pts.size()) == kTrajectoryLength) {
          Trajectory traj;
          std::copy(a.pts.begin(), a.pts.end(), traj.points.begin());
          traj.scale_index = static_cast<int>(level);
          traj.start_frame = a.start;
          if (!is_static(traj, cfg.static_tol)) out.push_back(traj);
        } else {
          kept.push_back(std::move(a));
        }
      }
      active.swap(kept);
    }
  }
  return out;
}

namespace {

template <typename SampleFn>
void fill_patch(float* dst, std::size_t stride, TrackPoint center, SampleFn sample) {
  for (int y = 0; y < kPatchSize; ++y) {
    float py = center.y + static_cast<float>(y - kMargin);
    for (int x = 0; x < kPatchSize; ++x) {
      float px = center.x + static_cast<float>(x - kMargin);
      sample(px, py, dst + (std::size_t(y) * kPatchSize + x) * stride);
    }
  }
}

}  // namespace

PixelVolume extract_volume(const GrayVideo& video, const Trajectory& traj) {
  PixelVolume vol;
  vol.data.resize(kPixelVolumeSize);
  for (int t = 0; t < kTrajectoryLength; ++t) {
    std::uint32_t frame = std::min<std::uint32_t>(traj.start_frame + t, video.frames - 1);
    ImageView view = frame_view(video, frame);
    float* dst = vol.data.data() + std::size_t(t) * kPatchSize * kPatchSize;
    fill_patch(dst, 1, traj.points[t],
               [&](float px, float py, float* out) { *out = view.sample(px, py); });
  }
  return vol;
}

FlowVolume extract_flow_volume(const FlowSequence& flows, const Trajectory& traj) {
  if (flows.empty()) throw std::invalid_argument("extract_flow_volume: empty flow sequence");
  FlowVolume vol;
  vol.data.resize(kFlowVolumeSize);
  for (int t = 0; t < kTrajectoryLength; ++t) {
    std::size_t fi = std::min<std::size_t>(traj.start_frame + t, flows.size() - 1);
    const FlowField& f = flows[fi];
    ImageView uview{f.u.data(), f.width, f.height};
    ImageView vview{f.v.data(), f.width, f.height};
    float* dst = vol.data.data() + std::size_t(t) * kPatchSize * kPatchSize * 2;
    fill_patch(dst, 2, traj.points[t], [&](float px, float py, float* out) {
      out[0] = uview.sample(px, py);
      out[1] = vview.sample(px, py);
    });
  }
  return vol;
}

void save_trajectories_csv(const std::vector<Trajectory>& trajs,
                           const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError(IoError::Kind::missing_file, "cannot open for write: " + path.string());
  os << "scale_index,start_frame";
  for (int t = 0; t < kTrajectoryLength; ++t) os << ",x" << t << ",y" << t;
  os << "\n";
  for (const Trajectory& traj : trajs) {
    os << traj.scale_index << "," << traj.start_frame;
    for (const TrackPoint& p : traj.points) os << "," << p.x << "," << p.y;
    os << "\n";
  }
}

}  // namespace vidfeat
