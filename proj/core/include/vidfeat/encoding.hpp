#pragma once

#include <functional>
#include <vector>

#include "vidfeat/descriptors.hpp"
#include "vidfeat/gmm.hpp"
#include "vidfeat/pca.hpp"
#include "vidfeat/video.hpp"

namespace vidfeat {

// Fisher-vector gradients w.r.t. means then variances, component-major.
// Empty descriptor sets give a zero vector of length 2*D*K.
Eigen::VectorXd fisher_vector(const Eigen::MatrixXd& descs, const GmmModel& gmm);

// sign(v)*|v|^alpha, then l2 normalization; zero stays zero.
Eigen::VectorXd power_l2_normalize(const Eigen::VectorXd& v, double alpha = 0.5);

struct KindEncoder {
  DescriptorKind kind = DescriptorKind::traj_shape;
  PcaModel pca;  // halves the kind's dimension
  GmmModel gmm;

  int block_dim() const { return 2 * gmm.dim() * gmm.components(); }
};

struct FisherEncoder {
  std::vector<KindEncoder> kinds;  // canonical kind order
  double alpha = 0.5;

  int total_dim() const;
  const KindEncoder* find(DescriptorKind kind) const;
};

struct EncoderTrainOpts {
  int gmm_k = 256;
  int max_samples = 256000;  // per kind, sampled without replacement
  double alpha = 0.5;
  bool whiten = false;
  GmmTrainOpts gmm;
  std::uint64_t seed = 0;
};

FisherEncoder train_fisher_encoder(
    const std::vector<std::pair<DescriptorKind, Eigen::MatrixXd>>& samples_per_kind,
    const EncoderTrainOpts& opts);

Eigen::VectorXd encode_video(const VideoDescriptors& vd, const FisherEncoder& encoder);

void save_encoder(const FisherEncoder& encoder, const std::filesystem::path& path);
FisherEncoder load_encoder(const std::filesystem::path& path);

// Runs the extractor on frame-subsampled copies of the video (every
// (skip+1)-th frame) and unions the descriptor sets. Levels whose
// subsampled video is shorter than 16 frames are skipped.
struct MifsResult {
  VideoDescriptors descriptors;
  std::vector<int> levels_used;
  std::vector<int> levels_skipped;
};

MifsResult mifs_stack(const GrayVideo& video, const std::vector<int>& skips,
                      const std::function<VideoDescriptors(const GrayVideo&)>& extractor);

GrayVideo subsample_frames(const GrayVideo& video, int keep_every);

}  // namespace vidfeat
