#include "vidfeat/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "vidfeat/error.hpp"
#include "vidfeat/rng.hpp"
#include "vidfeat/tensor_file.hpp"

namespace vidfeat {

namespace {

std::array<float, 3> trajectory_location(const Trajectory& traj, const ScalePyramid& pyramid) {
  float mx = 0.0f, my = 0.0f;
  for (const TrackPoint& p : traj.points) {
    mx += p.x;
    my += p.y;
  }
  mx /= kTrajectoryLength;
  my /= kTrajectoryLength;
  return {pyramid.to_base(mx, traj.scale_index), pyramid.to_base(my, traj.scale_index),
          static_cast<float>(traj.start_frame + kTrajectoryLength / 2)};
}

std::vector<float> finish_descriptor(std::span<const float> values, bool use_root_sift,
                                     bool use_xyt, std::array<float, 3> location,
                                     std::uint32_t w, std::uint32_t h, std::uint32_t t) {
  std::vector<float> out = use_root_sift ? root_sift(values)
                                         : std::vector<float>(values.begin(), values.end());
  if (use_xyt) out = xyt_extend(out, location, w, h, t);
  return out;
}

}  // namespace

VideoFeatures extract_features(const GrayVideo& video, const PipelineConfig& cfg) {
  VideoFeatures out;
  out.descriptors.video_width = video.width;
  out.descriptors.video_height = video.height;
  out.descriptors.video_frames = video.frames;

  std::vector<int> skips = cfg.mifs_skips;
  std::sort(skips.begin(), skips.end());
  skips.erase(std::unique(skips.begin(), skips.end()), skips.end());

  std::uint64_t rectify_seed = derive_seed(cfg.seed, "rectify");

  for (int skip : skips) {
    GrayVideo sub = subsample_frames(video, skip + 1);
    if (sub.frames < static_cast<std::uint32_t>(kTrajectoryLength + 1)) continue;

    ScalePyramid pyramid = build_scale_pyramid(sub, cfg.pyramid_scales,
                                               static_cast<float>(cfg.pyramid_factor));
    std::vector<FlowSequence> flows(pyramid.levels.size());
    for (std::size_t level = 0; level < pyramid.levels.size(); ++level) {
      flows[level] = compute_flow_sequence(pyramid.levels[level], cfg.flow);
      if (cfg.stabilize_enabled) {
        for (FlowField& field : flows[level]) {
          RectifyResult res =
              rectify_flow(field, matches_from_flow(field, cfg.stabilize_grid_step), rectify_seed);
          field = std::move(res.flow);
        }
      }
    }

    std::vector<Trajectory> trajs = extract_trajectories(pyramid, flows, cfg.track);
    for (const Trajectory& traj : trajs) {
      PixelVolume vol = extract_volume(pyramid.levels[traj.scale_index], traj);
      FlowVolume fvol = extract_flow_volume(flows[traj.scale_index], traj);
      std::array<float, 3> loc = trajectory_location(traj, pyramid);

      std::array<float, kTrajShapeDim> shape = trajectory_shape(traj);
      std::array<float, kHogDim> h = hog(vol);
      std::array<float, kHofDim> f = hof(fvol, cfg.hof_zero_thresh);
      std::array<float, kMbhDim> m = mbh(fvol);

      std::uint32_t W = sub.width, H = sub.height, T = sub.frames;
      std::vector<float> shape_row =
          cfg.xyt ? xyt_extend(shape, loc, W, H, T)
                  : std::vector<float>(shape.begin(), shape.end());
      out.descriptors.of(DescriptorKind::traj_shape).append(shape_row);
      out.descriptors.of(DescriptorKind::hog)
          .append(finish_descriptor(h, cfg.root_sift, cfg.xyt, loc, W, H, T));
      out.descriptors.of(DescriptorKind::hof)
          .append(finish_descriptor(f, cfg.root_sift, cfg.xyt, loc, W, H, T));
      out.descriptors.of(DescriptorKind::mbh)
          .append(finish_descriptor(m, cfg.root_sift, cfg.xyt, loc, W, H, T));
      out.descriptors.locations.push_back(loc);
      out.mifs_levels.push_back(skip);
      out.pixel_volumes.push_back(std::move(vol));
      out.flow_volumes.push_back(std::move(fvol));
    }
  }
  return out;
}

void append_learned_descriptors(VideoFeatures& vf, const TwoStreamModel& model,
                                const PipelineConfig& cfg) {
  int n = vf.rows();
  DescriptorMatrix& lop = vf.descriptors.of(DescriptorKind::lop);
  DescriptorMatrix& lof = vf.descriptors.of(DescriptorKind::lof);
  lop = DescriptorMatrix{};
  lof = DescriptorMatrix{};
  if (n == 0) return;

  std::vector<const float*> pv(n), fv(n);
  for (int i = 0; i < n; ++i) {
    pv[i] = vf.pixel_volumes[i].data.data();
    fv[i] = vf.flow_volumes[i].data.data();
  }
  Eigen::MatrixXd lop_rows = apply_stacked_batch(model.pixel_model, pv);
  Eigen::MatrixXd lof_rows = apply_stacked_batch(model.flow_model, fv);

  for (int i = 0; i < n; ++i) {
    std::uint32_t T = (vf.descriptors.video_frames + vf.mifs_levels[i]) /
                      (vf.mifs_levels[i] + 1);
    for (auto [rows, dst] : {std::pair{&lop_rows, &lop}, std::pair{&lof_rows, &lof}}) {
      std::vector<float> row(rows->cols());
      for (Eigen::Index c = 0; c < rows->cols(); ++c)
        row[c] = static_cast<float>((*rows)(i, c));
      if (cfg.xyt)
        row = xyt_extend(row, vf.descriptors.locations[i], vf.descriptors.video_width,
                         vf.descriptors.video_height, T);
      dst->append(row);
    }
  }
}

void save_features(const VideoFeatures& vf, const std::filesystem::path& path) {
  int n = vf.rows();
  if (vf.descriptors.locations.size() != static_cast<std::size_t>(n) ||
      vf.pixel_volumes.size() != static_cast<std::size_t>(n) ||
      vf.flow_volumes.size() != static_cast<std::size_t>(n))
    throw std::invalid_argument("save_features: row lists are misaligned");

  TensorFile tf;
  tf.add("video_dims", {3},
         {static_cast<float>(vf.descriptors.video_width),
          static_cast<float>(vf.descriptors.video_height),
          static_cast<float>(vf.descriptors.video_frames)});
  tf.add("num_rows", {1}, {static_cast<float>(n)});
  if (n > 0) {
    std::vector<float> locs, levels, pvol, fvol;
    for (int i = 0; i < n; ++i) {
      locs.insert(locs.end(), vf.descriptors.locations[i].begin(),
                  vf.descriptors.locations[i].end());
      levels.push_back(static_cast<float>(vf.mifs_levels[i]));
      if (vf.pixel_volumes[i].data.size() != kPixelVolumeSize ||
          vf.flow_volumes[i].data.size() != kFlowVolumeSize)
        throw std::invalid_argument("save_features: bad volume size");
      pvol.insert(pvol.end(), vf.pixel_volumes[i].data.begin(), vf.pixel_volumes[i].data.end());
      fvol.insert(fvol.end(), vf.flow_volumes[i].data.begin(), vf.flow_volumes[i].data.end());
    }
    std::uint32_t un = static_cast<std::uint32_t>(n);
    tf.add("locations", {un, 3}, std::move(locs));
    tf.add("mifs_levels", {un}, std::move(levels));
    tf.add("pixel_volumes", {un, static_cast<std::uint32_t>(kPixelVolumeSize)}, std::move(pvol));
    tf.add("flow_volumes", {un, static_cast<std::uint32_t>(kFlowVolumeSize)}, std::move(fvol));
    for (DescriptorKind kind : kAllKinds) {
      const DescriptorMatrix& dm = vf.descriptors.of(kind);
      if (dm.rows() == 0) continue;
      if (dm.rows() != n) throw std::invalid_argument("save_features: kind rows misaligned");
      tf.add("desc_" + std::string(kind_name(kind)),
             {un, static_cast<std::uint32_t>(dm.dim)}, dm.values);
    }
  }
  tf.save(path);
}

VideoFeatures load_features(const std::filesystem::path& path) {
  TensorFile tf = TensorFile::load(path);
  VideoFeatures vf;
  try {
    const NamedTensor& dims = tf.get("video_dims");
    if (dims.shape != std::vector<std::uint32_t>{3})
      throw IoError(IoError::Kind::bad_format, "feature file: bad video_dims");
    vf.descriptors.video_width = static_cast<std::uint32_t>(dims.values[0]);
    vf.descriptors.video_height = static_cast<std::uint32_t>(dims.values[1]);
    vf.descriptors.video_frames = static_cast<std::uint32_t>(dims.values[2]);
    int n = static_cast<int>(tf.get("num_rows").values.at(0));
    if (n < 0) throw IoError(IoError::Kind::bad_format, "feature file: negative row count");
    if (n == 0) return vf;

    const NamedTensor& locs = tf.get("locations");
    const NamedTensor& levels = tf.get("mifs_levels");
    const NamedTensor& pvol = tf.get("pixel_volumes");
    const NamedTensor& fvol = tf.get("flow_volumes");
    std::uint32_t un = static_cast<std::uint32_t>(n);
    if (locs.shape != std::vector<std::uint32_t>{un, 3} ||
        levels.shape != std::vector<std::uint32_t>{un} ||
        pvol.shape != std::vector<std::uint32_t>{un, static_cast<std::uint32_t>(kPixelVolumeSize)} ||
        fvol.shape != std::vector<std::uint32_t>{un, static_cast<std::uint32_t>(kFlowVolumeSize)})
      throw IoError(IoError::Kind::bad_format, "feature file: misaligned row tensors");

    for (int i = 0; i < n; ++i) {
      vf.descriptors.locations.push_back(
          {locs.values[i * 3 + 0], locs.values[i * 3 + 1], locs.values[i * 3 + 2]});
      vf.mifs_levels.push_back(static_cast<int>(levels.values[i]));
      PixelVolume pv;
      pv.data.assign(pvol.values.begin() + std::size_t(i) * kPixelVolumeSize,
                     pvol.values.begin() + std::size_t(i + 1) * kPixelVolumeSize);
      FlowVolume fl;
      fl.data.assign(fvol.values.begin() + std::size_t(i) * kFlowVolumeSize,
                     fvol.values.begin() + std::size_t(i + 1) * kFlowVolumeSize);
      vf.pixel_volumes.push_back(std::move(pv));
      vf.flow_volumes.push_back(std::move(fl));
    }
    for (DescriptorKind kind : kAllKinds) {
      std::string name = "desc_" + std::string(kind_name(kind));
      if (!tf.has(name)) continue;
      const NamedTensor& t = tf.get(name);
      if (t.shape.size() != 2 || t.shape[0] != un)
        throw IoError(IoError::Kind::bad_format, "feature file: bad " + name + " shape");
      DescriptorMatrix& dm = vf.descriptors.of(kind);
      dm.dim = static_cast<int>(t.shape[1]);
      dm.values = t.values;
    }
  } catch (const std::out_of_range& e) {
    throw IoError(IoError::Kind::bad_format, std::string("feature file: ") + e.what());
  }
  return vf;
}

std::vector<std::pair<DescriptorKind, Eigen::MatrixXd>> gather_descriptor_samples(
    const std::vector<const VideoDescriptors*>& videos) {
  std::vector<std::pair<DescriptorKind, Eigen::MatrixXd>> out;
  for (DescriptorKind kind : kAllKinds) {
    int dim = 0;
    long total = 0;
    for (const VideoDescriptors* vd : videos) {
      const DescriptorMatrix& dm = vd->of(kind);
      if (dm.rows() == 0) continue;
      if (dim == 0) dim = dm.dim;
      if (dm.dim != dim)
        throw std::invalid_argument("gather_descriptor_samples: inconsistent dims for kind " +
                                    std::string(kind_name(kind)));
      total += dm.rows();
    }
    if (total == 0) continue;
    Eigen::MatrixXd X(total, dim);
    long r = 0;
    for (const VideoDescriptors* vd : videos) {
      const DescriptorMatrix& dm = vd->of(kind);
      for (int i = 0; i < dm.rows(); ++i, ++r)
        for (int c = 0; c < dim; ++c) X(r, c) = dm.row(i)[c];
    }
    out.emplace_back(kind, std::move(X));
  }
  return out;
}

VolumeReservoir::VolumeReservoir(int capacity, std::uint64_t seed)
    : capacity_(capacity > 0 ? capacity : 0), rng_(make_rng(seed, "volume_reservoir")) {
  if (capacity < 1) throw std::invalid_argument("VolumeReservoir: capacity must be >= 1");
}

void VolumeReservoir::offer(const PixelVolume& pv, const FlowVolume& fv) {
  if (pixel_.size() < capacity_) {
    pixel_.push_back(pv);
    flow_.push_back(fv);
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, seen_);
    std::size_t j = pick(rng_);
    if (j < capacity_) {
      pixel_[j] = pv;
      flow_[j] = fv;
    }
  }
  ++seen_;
}

void save_representations(const VideoRepresentations& reps, const std::filesystem::path& path) {
  if (reps.ids.size() != static_cast<std::size_t>(reps.features.rows()))
    throw std::invalid_argument("save_representations: id count mismatch");
  if (reps.features.rows() < 1) throw std::invalid_argument("save_representations: empty");
  TensorFile tf;
  tf.add_matrix("features", reps.features);
  tf.save(path);

  std::filesystem::path side = path;
  side += ".ids";
  std::ofstream os(side, std::ios::trunc);
  if (!os) throw IoError(IoError::Kind::missing_file, "cannot open for write: " + side.string());
  for (const std::string& id : reps.ids) {
    if (id.empty() || id.find_first_of("\r\n") != std::string::npos)
      throw std::invalid_argument("save_representations: bad id '" + id + "'");
    os << id << '\n';
  }
}

VideoRepresentations load_representations(const std::filesystem::path& path) {
  TensorFile tf = TensorFile::load(path);
  VideoRepresentations reps;
  try {
    reps.features = tf.matrix("features");
  } catch (const std::out_of_range& e) {
    throw IoError(IoError::Kind::bad_format, std::string("representations file: ") + e.what());
  }
  std::filesystem::path side = path;
  side += ".ids";
  std::ifstream is(side);
  if (!is) throw IoError(IoError::Kind::missing_file, "missing id sidecar: " + side.string());
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) reps.ids.push_back(line);
  }
  if (reps.ids.size() != static_cast<std::size_t>(reps.features.rows()))
    throw IoError(IoError::Kind::bad_format, "id sidecar count does not match features");
  return reps;
}

}  // namespace vidfeat
