#include "vidfeat/encoding.hpp"

#include <algorithm>
#include <cmath>

#include "vidfeat/error.hpp"
#include "vidfeat/rng.hpp"
#include "vidfeat/tensor_file.hpp"
#include "vidfeat/trajectory.hpp"

namespace vidfeat {

Eigen::VectorXd fisher_vector(const Eigen::MatrixXd& descs, const GmmModel& gmm) {
  int K = gmm.components();
  int D = gmm.dim();
  Eigen::VectorXd fv = Eigen::VectorXd::Zero(2 * D * K);
  Eigen::Index M = descs.rows();
  if (M == 0) return fv;
  if (descs.cols() != D) throw std::invalid_argument("fisher_vector: dimension mismatch");

  Eigen::MatrixXd R = gmm_posteriors(gmm, descs);
  Eigen::MatrixXd sigma = gmm.variances.cwiseSqrt();
  double inv_M = 1.0 / static_cast<double>(M);
  for (int k = 0; k < K; ++k) {
    Eigen::RowVectorXd inv_sigma = sigma.row(k).cwiseInverse();
    Eigen::MatrixXd Z = (descs.rowwise() - gmm.means.row(k)) * inv_sigma.asDiagonal();
    Eigen::VectorXd gmu = Z.transpose() * R.col(k);
    Eigen::VectorXd gsig = (Z.array().square() - 1.0).matrix().transpose() * R.col(k);
    fv.segment(Eigen::Index(k) * D, D) = gmu * (inv_M / std::sqrt(gmm.weights(k)));
    fv.segment(Eigen::Index(K + k) * D, D) = gsig * (inv_M / std::sqrt(2.0 * gmm.weights(k)));
  }
  return fv;
}

Eigen::VectorXd power_l2_normalize(const Eigen::VectorXd& v, double alpha) {
  Eigen::VectorXd out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i)
    out(i) = std::copysign(std::pow(std::abs(v(i)), alpha), v(i));
  double norm = out.norm();
  if (norm > 0.0) out /= norm;
  return out;
}

int FisherEncoder::total_dim() const {
  int total = 0;
  for (const KindEncoder& ke : kinds) total += ke.block_dim();
  return total;
}

const KindEncoder* FisherEncoder::find(DescriptorKind kind) const {
  for (const KindEncoder& ke : kinds)
    if (ke.kind == kind) return &ke;
  return nullptr;
}

FisherEncoder train_fisher_encoder(
    const std::vector<std::pair<DescriptorKind, Eigen::MatrixXd>>& samples_per_kind,
    const EncoderTrainOpts& opts) {
  if (samples_per_kind.empty())
    throw std::invalid_argument("train_fisher_encoder: no descriptor kinds given");
  FisherEncoder enc;
  enc.alpha = opts.alpha;
  for (DescriptorKind kind : kAllKinds) {
    const Eigen::MatrixXd* samples = nullptr;
    for (const auto& [k, mat] : samples_per_kind)
      if (k == kind) samples = &mat;
    if (!samples) continue;

    Eigen::MatrixXd X = *samples;
    if (X.rows() > opts.max_samples) {
      auto rng = make_rng(opts.seed, std::string("encoder_sample_") +
                                         std::string(kind_name(kind)));
      std::vector<Eigen::Index> idx(X.rows());
      for (Eigen::Index i = 0; i < X.rows(); ++i) idx[i] = i;
      std::shuffle(idx.begin(), idx.end(), rng);
      Eigen::MatrixXd sub(opts.max_samples, X.cols());
      for (int i = 0; i < opts.max_samples; ++i) sub.row(i) = X.row(idx[i]);
      X = std::move(sub);
    }

    KindEncoder ke;
    ke.kind = kind;
    int half = (static_cast<int>(X.cols()) + 1) / 2;
    ke.pca = pca_train(X, half, opts.whiten);
    GmmTrainOpts gopts = opts.gmm;
    gopts.seed = derive_seed(opts.seed, std::string("encoder_gmm_") +
                                            std::string(kind_name(kind)));
    ke.gmm = gmm_train(pca_apply(ke.pca, X), opts.gmm_k, gopts).model;
    enc.kinds.push_back(std::move(ke));
  }
  return enc;
}

Eigen::VectorXd encode_video(const VideoDescriptors& vd, const FisherEncoder& encoder) {
  Eigen::VectorXd out(encoder.total_dim());
  Eigen::Index off = 0;
  for (const KindEncoder& ke : encoder.kinds) {
    const DescriptorMatrix& dm = vd.of(ke.kind);
    int block = ke.block_dim();
    if (dm.rows() == 0) {
      out.segment(off, block).setZero();
    } else {
      if (dm.dim != ke.pca.input_dim())
        throw std::invalid_argument(
            std::string("encode_video: descriptor dim mismatch for kind ") +
            std::string(kind_name(ke.kind)));
      Eigen::MatrixXd X(dm.rows(), dm.dim);
      for (int r = 0; r < dm.rows(); ++r)
        for (int c = 0; c < dm.dim; ++c) X(r, c) = dm.row(r)[c];
      Eigen::VectorXd fv = fisher_vector(pca_apply(ke.pca, X), ke.gmm);
      out.segment(off, block) = power_l2_normalize(fv, encoder.alpha);
    }
    off += block;
  }
  return out;
}

void save_encoder(const FisherEncoder& encoder, const std::filesystem::path& path) {
  TensorFile tf;
  std::vector<float> kinds_present;
  for (const KindEncoder& ke : encoder.kinds)
    kinds_present.push_back(static_cast<float>(static_cast<int>(ke.kind)));
  tf.add("kinds", {static_cast<std::uint32_t>(kinds_present.size())}, kinds_present);
  tf.add("alpha", {1}, {static_cast<float>(encoder.alpha)});
  for (const KindEncoder& ke : encoder.kinds) {
    std::string p(kind_name(ke.kind));
    tf.add_vector(p + "_pca_mean", ke.pca.mean);
    tf.add_matrix(p + "_pca_basis", ke.pca.basis);
    tf.add_vector(p + "_pca_scales", ke.pca.scales);
    tf.add(p + "_pca_whiten", {1}, {ke.pca.whiten ? 1.0f : 0.0f});
    tf.add_vector(p + "_gmm_weights", ke.gmm.weights);
    tf.add_matrix(p + "_gmm_means", ke.gmm.means);
    tf.add_matrix(p + "_gmm_variances", ke.gmm.variances);
  }
  tf.save(path);
}

FisherEncoder load_encoder(const std::filesystem::path& path) {
  TensorFile tf = TensorFile::load(path);
  try {
    FisherEncoder enc;
    enc.alpha = tf.get("alpha").values.at(0);
    for (float kf : tf.get("kinds").values) {
      int ki = static_cast<int>(kf);
      if (ki < 0 || ki >= kNumDescriptorKinds)
        throw IoError(IoError::Kind::bad_format, "encoder file lists unknown kind");
      KindEncoder ke;
      ke.kind = static_cast<DescriptorKind>(ki);
      std::string p(kind_name(ke.kind));
      ke.pca.mean = tf.vector(p + "_pca_mean");
      ke.pca.basis = tf.matrix(p + "_pca_basis");
      ke.pca.scales = tf.vector(p + "_pca_scales");
      ke.pca.whiten = tf.get(p + "_pca_whiten").values.at(0) != 0.0f;
      ke.gmm.weights = tf.vector(p + "_gmm_weights");
      ke.gmm.means = tf.matrix(p + "_gmm_means");
      ke.gmm.variances = tf.matrix(p + "_gmm_variances");
      if (ke.gmm.means.rows() != ke.gmm.weights.size() ||
          ke.gmm.means.cols() != ke.pca.output_dim())
        throw IoError(IoError::Kind::bad_format, "inconsistent encoder tensors at " + p);
      enc.kinds.push_back(std::move(ke));
    }
    return enc;
  } catch (const std::out_of_range& e) {
    throw IoError(IoError::Kind::bad_format,
                  std::string("encoder file missing tensor: ") + e.what());
  }
}

GrayVideo subsample_frames(const GrayVideo& video, int keep_every) {
  if (keep_every < 1) throw std::invalid_argument("subsample_frames: keep_every must be >= 1");
  GrayVideo out;
  out.width = video.width;
  out.height = video.height;
  out.frames = (video.frames + keep_every - 1) / keep_every;
  out.data.reserve(std::size_t(out.width) * out.height * out.frames);
  for (std::uint32_t t = 0; t < video.frames; t += keep_every) {
    const float* src = video.data.data() + video.frame_offset(t);
    out.data.insert(out.data.end(), src, src + std::size_t(video.width) * video.height);
  }
  return out;
}

MifsResult mifs_stack(const GrayVideo& video, const std::vector<int>& skips,
                      const std::function<VideoDescriptors(const GrayVideo&)>& extractor) {
  std::vector<int> levels = skips;
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  if (levels.empty() || levels.front() < 0)
    throw std::invalid_argument("mifs_stack: skips must be nonnegative");

  MifsResult result;
  result.descriptors.video_width = video.width;
  result.descriptors.video_height = video.height;
  result.descriptors.video_frames = video.frames;
  for (int skip : levels) {
    GrayVideo sub = subsample_frames(video, skip + 1);
    if (sub.frames < static_cast<std::uint32_t>(kTrajectoryLength + 1)) {
      result.levels_skipped.push_back(skip);
      continue;
    }
    VideoDescriptors vd = extractor(sub);
    result.levels_used.push_back(skip);
    result.descriptors.locations.insert(result.descriptors.locations.end(),
                                        vd.locations.begin(), vd.locations.end());
    for (DescriptorKind kind : kAllKinds) {
      const DescriptorMatrix& src = vd.of(kind);
      if (src.rows() == 0) continue;
      DescriptorMatrix& dst = result.descriptors.of(kind);
      for (int r = 0; r < src.rows(); ++r) dst.append(src.row(r));
    }
  }
  return result;
}

}  // namespace vidfeat
