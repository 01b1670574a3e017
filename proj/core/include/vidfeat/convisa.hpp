#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "vidfeat/isa.hpp"
#include "vidfeat/pca.hpp"
#include "vidfeat/trajectory.hpp"

namespace vidfeat {

enum class Stream { pixel = 0, flow = 1 };

inline int stream_channels(Stream s) { return s == Stream::flow ? 2 : 1; }

struct ConvIsaGeometry {
  int rf_spatial = 16;
  int rf_temporal = 5;
  int stride_spatial = 16;
  int stride_temporal = 5;
  int pca1_dim = 300;
  int group1 = 1;
  int output_dim = 200;  // also the layer-2 PCA dimension
  int group2 = 2;

  int positions_x() const { return (kPatchSize - rf_spatial) / stride_spatial + 1; }
  int positions_y() const { return positions_x(); }
  int positions_t() const { return (kTrajectoryLength - rf_temporal) / stride_temporal + 1; }
  int positions() const { return positions_x() * positions_y() * positions_t(); }
  int sub_dim(int channels) const { return rf_spatial * rf_spatial * rf_temporal * channels; }
  int layer1_units() const { return pca1_dim / group1; }
  int conv_dim() const { return positions() * layer1_units(); }
  int layer2_units() const { return output_dim / group2; }
  int stack_top() const { return output_dim - layer2_units(); }

  // Throws ConfigError naming the violated equation.
  void validate(int channels) const;
};

struct StackedModel {
  Stream stream = Stream::pixel;
  ConvIsaGeometry geometry;
  PcaModel pca1;
  IsaLayer isa1;
  PcaModel pca2;
  IsaLayer isa2;

  int channels() const { return stream_channels(stream); }
  int output_dim() const { return geometry.output_dim; }
};

struct TwoStreamModel {
  StackedModel pixel_model;
  StackedModel flow_model;
};

struct ConvIsaTrainOpts {
  IsaTrainOpts isa;  // shared by both layers; seeds are derived internally
  std::uint64_t seed = 0;
};

// Layer-1 convolution: per grid position, flatten the rf sub-volume
// (x fastest, y, t, channel last), apply pca1 then the ISA activation;
// concatenate position-major (x fastest, then y, then t).
Eigen::VectorXd convolve_layer1(std::span<const float> volume, const ConvIsaGeometry& geom,
                                int channels, const PcaModel& pca1, const IsaLayer& isa1);
Eigen::MatrixXd convolve_layer1_batch(const std::vector<const float*>& volumes,
                                      const ConvIsaGeometry& geom, int channels,
                                      const PcaModel& pca1, const IsaLayer& isa1);

StackedModel train_stacked(const std::vector<const float*>& volumes, Stream stream,
                           const ConvIsaGeometry& geom, const ConvIsaTrainOpts& opts);

Eigen::VectorXd apply_stacked(const StackedModel& model, std::span<const float> volume);
Eigen::MatrixXd apply_stacked_batch(const StackedModel& model,
                                    const std::vector<const float*>& volumes);

TwoStreamModel train_two_stream(const std::vector<const float*>& pixel_volumes,
                                const std::vector<const float*>& flow_volumes,
                                const ConvIsaGeometry& geom, const ConvIsaTrainOpts& opts);

// Layer-1 filters mapped back to input space, one per row (m x sub_dim).
Eigen::MatrixXd layer1_filters(const StackedModel& model);

void save_two_stream(const TwoStreamModel& model, const std::filesystem::path& path);
TwoStreamModel load_two_stream(const std::filesystem::path& path);

}  // namespace vidfeat
