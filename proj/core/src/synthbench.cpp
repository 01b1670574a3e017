#include "vidfeat/synthbench.hpp"

#include <cmath>
#include <numbers>

#include "vidfeat/encoding.hpp"
#include "vidfeat/mir.hpp"
#include "vidfeat/pipeline.hpp"
#include "vidfeat/rng.hpp"
#include "vidfeat/svm.hpp"

namespace vidfeat {

namespace {

std::string motion_class_name(int c, int classes) {
  if (c == classes - 1) return "oscillate";
  double deg = 360.0 * c / (classes - 1);
  return "move_" + std::to_string(static_cast<int>(std::lround(deg)));
}

MotionSpec motion_for(int c, int classes, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (c == classes - 1) {
    float period = static_cast<float>(7.0 + 3.0 * u(rng));
    float amplitude = static_cast<float>(2.5 + u(rng));
    return MotionSpec::oscillate(0, period, amplitude);
  }
  double angle = 2.0 * std::numbers::pi * c / (classes - 1) + 0.12 * (u(rng) - 0.5);
  double speed = 0.9 + 0.5 * u(rng);
  return MotionSpec::translate(static_cast<float>(speed * std::cos(angle)),
                               static_cast<float>(speed * std::sin(angle)));
}

}  // namespace

PipelineConfig desk_scale_config() {
  PipelineConfig cfg;
  cfg.pyramid_scales = 2;
  cfg.encode_k = 8;
  cfg.convisa_samples = 5000;
  return cfg;
}

SynthBenchReport run_synthetic_benchmark(const SynthBenchOptions& opts) {
  if (opts.classes < 2 || opts.classes > 9)
    throw std::invalid_argument("bench: classes must be in [2, 9]");
  if (opts.videos_per_class < 2)
    throw std::invalid_argument("bench: need at least 2 videos per class");
  PipelineConfig cfg = opts.config;
  cfg.seed = opts.seed;
  cfg.validate();

  SynthBenchReport report;
  for (int c = 0; c < opts.classes; ++c)
    report.class_names.push_back(motion_class_name(c, opts.classes));

  std::vector<VideoFeatures> train_features, test_features;
  std::vector<int> train_labels;
  std::vector<std::string> test_ids;
  for (int c = 0; c < opts.classes; ++c) {
    for (int v = 0; v < opts.videos_per_class; ++v) {
      std::uint64_t vseed = derive_seed(opts.seed, "video_" + std::to_string(c) + "_" +
                                                       std::to_string(v));
      auto rng = make_rng(vseed, "motion");
      MotionSpec spec = motion_for(c, opts.classes, rng);
      GrayVideo video =
          synth_video(spec, opts.width, opts.height, opts.frames, derive_seed(vseed, "texture"));
      VideoFeatures vf = extract_features(video, cfg);
      if (v % 2 == 0) {
        train_features.push_back(std::move(vf));
        train_labels.push_back(c);
      } else {
        test_features.push_back(std::move(vf));
        report.test_truth.push_back(c);
        test_ids.push_back(report.class_names[c] + "_v" + std::to_string(v));
      }
    }
  }
  report.train_count = static_cast<int>(train_features.size());
  report.test_count = static_cast<int>(test_features.size());

  VolumeReservoir reservoir(cfg.convisa_samples, derive_seed(opts.seed, "bench_volumes"));
  for (const VideoFeatures& vf : train_features)
    for (int i = 0; i < vf.rows(); ++i) reservoir.offer(vf.pixel_volumes[i], vf.flow_volumes[i]);

  std::vector<const float*> pvols, fvols;
  for (const PixelVolume& v : reservoir.pixel()) pvols.push_back(v.data.data());
  for (const FlowVolume& v : reservoir.flow()) fvols.push_back(v.data.data());
  ConvIsaTrainOpts copts;
  copts.isa = cfg.isa;
  copts.seed = derive_seed(opts.seed, "bench_convisa");
  TwoStreamModel model = train_two_stream(pvols, fvols, cfg.convisa, copts);

  for (VideoFeatures& vf : train_features) append_learned_descriptors(vf, model, cfg);
  for (VideoFeatures& vf : test_features) append_learned_descriptors(vf, model, cfg);

  std::vector<const VideoDescriptors*> train_ptrs;
  for (const VideoFeatures& vf : train_features) train_ptrs.push_back(&vf.descriptors);
  EncoderTrainOpts eopts;
  eopts.gmm_k = cfg.encode_k;
  eopts.max_samples = cfg.encode_max_samples;
  eopts.alpha = cfg.encode_alpha;
  eopts.whiten = cfg.encode_whiten;
  eopts.seed = derive_seed(opts.seed, "bench_encoder");
  FisherEncoder encoder = train_fisher_encoder(gather_descriptor_samples(train_ptrs), eopts);

  Eigen::MatrixXd Xtrain(report.train_count, encoder.total_dim());
  for (int i = 0; i < report.train_count; ++i)
    Xtrain.row(i) = encode_video(train_features[i].descriptors, encoder).transpose();
  Eigen::MatrixXd Xtest(report.test_count, encoder.total_dim());
  for (int i = 0; i < report.test_count; ++i)
    Xtest.row(i) = encode_video(test_features[i].descriptors, encoder).transpose();

  SvmTrainOpts sopts;
  sopts.C = cfg.svm_c;
  sopts.seed = derive_seed(opts.seed, "bench_svm");
  std::vector<LinearModel> models = ova_train(Xtrain, train_labels, opts.classes, sopts);

  report.baseline_scores = ova_predict(models, Xtest, report.class_names, test_ids);
  report.macc_baseline = eval_macc(report.baseline_scores, report.test_truth);
  report.map_baseline = eval_map(report.baseline_scores, report.test_truth);

  MirResult mir = mir_rerank(report.baseline_scores, cfg.mir);
  report.mir_iterations = mir.iterations_used;
  report.fused_scores = rank_score_fuse(mir.scores, report.baseline_scores);
  report.macc_fused = eval_macc(report.fused_scores, report.test_truth);
  report.map_fused = eval_map(report.fused_scores, report.test_truth);
  return report;
}

}  // namespace vidfeat
