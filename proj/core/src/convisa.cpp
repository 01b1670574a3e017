#include "vidfeat/convisa.hpp"

#include <string>

#include "vidfeat/error.hpp"
#include "vidfeat/rng.hpp"
#include "vidfeat/tensor_file.hpp"

namespace vidfeat {
namespace {

void flatten_subvolume(const float* volume, int channels, int ox, int oy, int ot,
                       int rf_s, int rf_t, double* out) {
  for (int t = 0; t < rf_t; ++t) {
    for (int y = 0; y < rf_s; ++y) {
      const float* src =
          volume + ((std::size_t(ot + t) * kPatchSize + (oy + y)) * kPatchSize + ox) * channels;
      double* dst = out + (std::size_t(t) * rf_s + y) * rf_s * channels;
      for (int i = 0; i < rf_s * channels; ++i) dst[i] = src[i];
    }
  }
}

std::string stream_prefix(Stream s) { return s == Stream::flow ? "flow_" : "pixel_"; }

void save_pca(TensorFile& tf, const std::string& prefix, const PcaModel& m) {
  tf.add_vector(prefix + "mean", m.mean);
  tf.add_matrix(prefix + "basis", m.basis);
  tf.add_vector(prefix + "scales", m.scales);
  tf.add(prefix + "whiten", {1}, {m.whiten ? 1.0f : 0.0f});
}

PcaModel load_pca(const TensorFile& tf, const std::string& prefix) {
  PcaModel m;
  m.mean = tf.vector(prefix + "mean");
  m.basis = tf.matrix(prefix + "basis");
  m.scales = tf.vector(prefix + "scales");
  m.whiten = tf.get(prefix + "whiten").values.at(0) != 0.0f;
  if (m.basis.rows() != m.scales.size() || m.basis.cols() != m.mean.size())
    throw IoError(IoError::Kind::bad_format, "inconsistent PCA tensors at " + prefix);
  return m;
}

void save_isa(TensorFile& tf, const std::string& prefix, const IsaLayer& l) {
  tf.add_matrix(prefix + "W", l.W);
  tf.add(prefix + "group_size", {1}, {static_cast<float>(l.group_size)});
}

IsaLayer load_isa(const TensorFile& tf, const std::string& prefix) {
  IsaLayer l;
  l.W = tf.matrix(prefix + "W");
  l.group_size = static_cast<int>(tf.get(prefix + "group_size").values.at(0));
  if (l.group_size < 1 || l.W.rows() % l.group_size != 0)
    throw IoError(IoError::Kind::bad_format, "inconsistent ISA tensors at " + prefix);
  return l;
}

void save_stacked(TensorFile& tf, const StackedModel& m) {
  std::string p = stream_prefix(m.stream);
  const ConvIsaGeometry& g = m.geometry;
  tf.add(p + "geometry", {9},
         {static_cast<float>(g.rf_spatial), static_cast<float>(g.rf_temporal),
          static_cast<float>(g.stride_spatial), static_cast<float>(g.stride_temporal),
          static_cast<float>(g.pca1_dim), static_cast<float>(g.group1),
          static_cast<float>(g.output_dim), static_cast<float>(g.group2),
          static_cast<float>(static_cast<int>(m.stream))});
  save_pca(tf, p + "pca1_", m.pca1);
  save_isa(tf, p + "isa1_", m.isa1);
  save_pca(tf, p + "pca2_", m.pca2);
  save_isa(tf, p + "isa2_", m.isa2);
}

StackedModel load_stacked(const TensorFile& tf, Stream stream) {
  std::string p = stream_prefix(stream);
  const NamedTensor& g = tf.get(p + "geometry");
  if (g.values.size() != 9)
    throw IoError(IoError::Kind::bad_format, "bad geometry record at " + p);
  StackedModel m;
  m.geometry.rf_spatial = static_cast<int>(g.values[0]);
  m.geometry.rf_temporal = static_cast<int>(g.values[1]);
  m.geometry.stride_spatial = static_cast<int>(g.values[2]);
  m.geometry.stride_temporal = static_cast<int>(g.values[3]);
  m.geometry.pca1_dim = static_cast<int>(g.values[4]);
  m.geometry.group1 = static_cast<int>(g.values[5]);
  m.geometry.output_dim = static_cast<int>(g.values[6]);
  m.geometry.group2 = static_cast<int>(g.values[7]);
  m.stream = static_cast<int>(g.values[8]) == 1 ? Stream::flow : Stream::pixel;
  if (m.stream != stream)
    throw IoError(IoError::Kind::bad_format, "stream tag mismatch at " + p);
  m.pca1 = load_pca(tf, p + "pca1_");
  m.isa1 = load_isa(tf, p + "isa1_");
  m.pca2 = load_pca(tf, p + "pca2_");
  m.isa2 = load_isa(tf, p + "isa2_");
  m.geometry.validate(m.channels());
  return m;
}

}  // namespace

void ConvIsaGeometry::validate(int channels) const {
  auto fail = [](const std::string& eq) { throw ConfigError("config violates: " + eq); };
  if (rf_spatial < 1 || rf_spatial > kPatchSize) fail("1 <= rf_spatial <= 32");
  if (rf_temporal < 1 || rf_temporal > kTrajectoryLength) fail("1 <= rf_temporal <= 15");
  if (stride_spatial < 1 || stride_temporal < 1) fail("stride >= 1");
  if ((kPatchSize - rf_spatial) % stride_spatial != 0)
    fail("(32 - rf_spatial) % stride_spatial == 0");
  if ((kTrajectoryLength - rf_temporal) % stride_temporal != 0)
    fail("(15 - rf_temporal) % stride_temporal == 0");
  if (channels != 1 && channels != 2) fail("channels in {1, 2}");
  if (pca1_dim < 1 || pca1_dim > sub_dim(channels))
    fail("1 <= pca1_dim <= rf_spatial^2 * rf_temporal * channels");
  if (group1 < 1 || pca1_dim % group1 != 0) fail("pca1_dim % group1 == 0");
  if (group2 < 1 || output_dim % group2 != 0) fail("output_dim % group2 == 0");
  if (output_dim < 1 || output_dim > conv_dim())
    fail("1 <= output_dim <= positions * (pca1_dim / group1)");
  if (stack_top() < 0 || stack_top() > output_dim)
    fail("0 <= output_dim - output_dim / group2 <= output_dim");
}

Eigen::MatrixXd convolve_layer1_batch(const std::vector<const float*>& volumes,
                                      const ConvIsaGeometry& geom, int channels,
                                      const PcaModel& pca1, const IsaLayer& isa1) {
  geom.validate(channels);
  int sub = geom.sub_dim(channels);
  if (pca1.input_dim() != sub)
    throw std::invalid_argument("convolve_layer1: volume does not match model channels");
  if (pca1.output_dim() != geom.pca1_dim || isa1.input_dim() != geom.pca1_dim)
    throw std::invalid_argument("convolve_layer1: layer-1 dimension chain mismatch");

  Eigen::Index T = static_cast<Eigen::Index>(volumes.size());
  int d1 = geom.layer1_units();
  Eigen::MatrixXd out(T, geom.conv_dim());
  Eigen::MatrixXd S(T, sub);
  int p = 0;
  for (int pt = 0; pt < geom.positions_t(); ++pt) {
    for (int py = 0; py < geom.positions_y(); ++py) {
      for (int px = 0; px < geom.positions_x(); ++px, ++p) {
        int ox = px * geom.stride_spatial;
        int oy = py * geom.stride_spatial;
        int ot = pt * geom.stride_temporal;
        std::vector<double> row(sub);
        for (Eigen::Index t = 0; t < T; ++t) {
          flatten_subvolume(volumes[t], channels, ox, oy, ot, geom.rf_spatial,
                            geom.rf_temporal, row.data());
          for (int c = 0; c < sub; ++c) S(t, c) = row[c];
        }
        out.middleCols(std::size_t(p) * d1, d1) =
            isa_activation_batch(isa1, pca_apply(pca1, S));
      }
    }
  }
  return out;
}

Eigen::VectorXd convolve_layer1(std::span<const float> volume, const ConvIsaGeometry& geom,
                                int channels, const PcaModel& pca1, const IsaLayer& isa1) {
  std::size_t expected = kPixelVolumeSize * channels;
  if (volume.size() != expected)
    throw std::invalid_argument("convolve_layer1: volume size does not match channels");
  return convolve_layer1_batch({volume.data()}, geom, channels, pca1, isa1).row(0);
}

StackedModel train_stacked(const std::vector<const float*>& volumes, Stream stream,
                           const ConvIsaGeometry& geom, const ConvIsaTrainOpts& opts) {
  int channels = stream_channels(stream);
  geom.validate(channels);
  Eigen::Index T = static_cast<Eigen::Index>(volumes.size());
  if (T <= std::max(geom.pca1_dim, geom.output_dim))
    throw std::invalid_argument("train_stacked: not enough volumes for the PCA dims");

  // One uniformly placed rf sub-volume per input volume.
  int sub = geom.sub_dim(channels);
  Eigen::MatrixXd S(T, sub);
  {
    auto rng = make_rng(opts.seed, "stacked_subvolumes");
    std::uniform_int_distribution<int> dx(0, kPatchSize - geom.rf_spatial);
    std::uniform_int_distribution<int> dt(0, kTrajectoryLength - geom.rf_temporal);
    std::vector<double> row(sub);
    for (Eigen::Index t = 0; t < T; ++t) {
      int ox = dx(rng), oy = dx(rng), ot = dt(rng);
      flatten_subvolume(volumes[t], channels, ox, oy, ot, geom.rf_spatial, geom.rf_temporal,
                        row.data());
      for (int c = 0; c < sub; ++c) S(t, c) = row[c];
    }
  }

  StackedModel model;
  model.stream = stream;
  model.geometry = geom;

  model.pca1 = pca_train(S, geom.pca1_dim, true);
  {
    IsaTrainOpts o = opts.isa;
    o.seed = derive_seed(opts.seed, "isa1");
    model.isa1 = train_isa(pca_apply(model.pca1, S), geom.group1, o).layer;
  }
  S.resize(0, 0);

  Eigen::MatrixXd C = convolve_layer1_batch(volumes, geom, channels, model.pca1, model.isa1);
  model.pca2 = pca_train(C, geom.output_dim, true);
  {
    IsaTrainOpts o = opts.isa;
    o.seed = derive_seed(opts.seed, "isa2");
    model.isa2 = train_isa(pca_apply(model.pca2, C), geom.group2, o).layer;
  }
  return model;
}

Eigen::MatrixXd apply_stacked_batch(const StackedModel& model,
                                    const std::vector<const float*>& volumes) {
  Eigen::MatrixXd C =
      convolve_layer1_batch(volumes, model.geometry, model.channels(), model.pca1, model.isa1);
  Eigen::MatrixXd Y = pca_apply(model.pca2, C);
  Eigen::MatrixXd A = isa_activation_batch(model.isa2, Y);
  Eigen::MatrixXd out(Y.rows(), model.geometry.stack_top() + A.cols());
  out.leftCols(model.geometry.stack_top()) = Y.leftCols(model.geometry.stack_top());
  out.rightCols(A.cols()) = A;
  return out;
}

Eigen::VectorXd apply_stacked(const StackedModel& model, std::span<const float> volume) {
  std::size_t expected = kPixelVolumeSize * model.channels();
  if (volume.size() != expected)
    throw std::invalid_argument(
        "apply_stacked: volume size does not match the model's stream (pixel volumes have 1 "
        "channel, flow volumes 2)");
  return apply_stacked_batch(model, {volume.data()}).row(0);
}

TwoStreamModel train_two_stream(const std::vector<const float*>& pixel_volumes,
                                const std::vector<const float*>& flow_volumes,
                                const ConvIsaGeometry& geom, const ConvIsaTrainOpts& opts) {
  TwoStreamModel m;
  ConvIsaTrainOpts po = opts;
  po.seed = derive_seed(opts.seed, "stream_pixel");
  m.pixel_model = train_stacked(pixel_volumes, Stream::pixel, geom, po);
  ConvIsaTrainOpts fo = opts;
  fo.seed = derive_seed(opts.seed, "stream_flow");
  m.flow_model = train_stacked(flow_volumes, Stream::flow, geom, fo);
  return m;
}

Eigen::MatrixXd layer1_filters(const StackedModel& model) {
  Eigen::MatrixXd F = model.isa1.W;
  if (model.pca1.whiten) F = F * model.pca1.scales.asDiagonal();
  return F * model.pca1.basis;
}

void save_two_stream(const TwoStreamModel& model, const std::filesystem::path& path) {
  TensorFile tf;
  save_stacked(tf, model.pixel_model);
  save_stacked(tf, model.flow_model);
  tf.save(path);
}

TwoStreamModel load_two_stream(const std::filesystem::path& path) {
  TensorFile tf = TensorFile::load(path);
  try {
    TwoStreamModel m;
    m.pixel_model = load_stacked(tf, Stream::pixel);
    m.flow_model = load_stacked(tf, Stream::flow);
    return m;
  } catch (const std::out_of_range& e) {
    throw IoError(IoError::Kind::bad_format,
                  std::string("model file missing tensor: ") + e.what());
  }
}

}  // namespace vidfeat
