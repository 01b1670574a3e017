#include "vidfeat/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "vidfeat/config.hpp"
#include "vidfeat/encoding.hpp"
#include "vidfeat/error.hpp"
#include "vidfeat/manifest.hpp"
#include "vidfeat/mir.hpp"
#include "vidfeat/pipeline.hpp"
#include "vidfeat/rng.hpp"
#include "vidfeat/svm.hpp"
#include "vidfeat/synthbench.hpp"

namespace vidfeat {

namespace {

namespace fs = std::filesystem;

PipelineConfig config_from(const std::string& path) {
  return path.empty() ? PipelineConfig{} : load_config(path);
}

std::string sanitize_id(const std::string& id) {
  std::string out;
  for (char c : id)
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-') ? c : '_';
  return out;
}

fs::path feature_path(const fs::path& dir, const std::string& id) {
  return dir / (sanitize_id(id) + ".feat.tcn");
}

GrayVideo load_entry_video(const std::string& path, const std::string& format) {
  VideoFormat fmt;
  if (format == "rgv") fmt = VideoFormat::rgv;
  else if (format == "pgm") fmt = VideoFormat::pgm_sequence;
  else fmt = fs::path(path).extension() == ".rgv" ? VideoFormat::rgv : VideoFormat::pgm_sequence;
  return load_video(path, fmt);
}

std::vector<ManifestEntry> pick_split(const DatasetManifest& m, const std::string& split) {
  if (split == "train") return m.split(false);
  if (split == "test") return m.split(true);
  return m.entries;
}

// One label per training instance; multi-label entries are rejected.
std::vector<int> single_labels(const DatasetManifest& m, const std::vector<ManifestEntry>& entries) {
  std::vector<int> labels;
  for (const ManifestEntry& e : entries) {
    if (e.labels.size() != 1)
      throw std::invalid_argument("entry '" + e.path + "' must have exactly one label here");
    labels.push_back(m.label_index(e.labels[0]));
  }
  return labels;
}

struct CommonPaths {
  std::string config;
  std::string manifest;
  std::string features;
};

void run_extract(const CommonPaths& common, const std::string& split, const std::string& format,
                 const std::string& video_root) {
  PipelineConfig cfg = config_from(common.config);
  DatasetManifest manifest = load_manifest(common.manifest);
  fs::create_directories(common.features);
  for (const ManifestEntry& e : pick_split(manifest, split)) {
    fs::path video_path = video_root.empty() ? fs::path(e.path) : fs::path(video_root) / e.path;
    GrayVideo video = load_entry_video(video_path.string(), format);
    VideoFeatures vf = extract_features(video, cfg);
    save_features(vf, feature_path(common.features, e.path));
    std::cout << "extracted " << e.path << ": " << vf.rows() << " trajectories\n";
  }
}

void run_train_convisa(const CommonPaths& common, const std::string& output) {
  PipelineConfig cfg = config_from(common.config);
  DatasetManifest manifest = load_manifest(common.manifest);
  VolumeReservoir reservoir(cfg.convisa_samples, derive_seed(cfg.seed, "convisa_volumes"));
  for (const ManifestEntry& e : manifest.split(false)) {
    VideoFeatures vf = load_features(feature_path(common.features, e.path));
    for (int i = 0; i < vf.rows(); ++i) reservoir.offer(vf.pixel_volumes[i], vf.flow_volumes[i]);
  }
  if (reservoir.pixel().empty())
    throw std::invalid_argument("train-convisa: no volumes in the train split");

  std::vector<const float*> pvols, fvols;
  for (const PixelVolume& v : reservoir.pixel()) pvols.push_back(v.data.data());
  for (const FlowVolume& v : reservoir.flow()) fvols.push_back(v.data.data());
  ConvIsaTrainOpts copts;
  copts.isa = cfg.isa;
  copts.seed = derive_seed(cfg.seed, "convisa_train");
  TwoStreamModel model = train_two_stream(pvols, fvols, cfg.convisa, copts);
  save_two_stream(model, output);
  std::cout << "trained two-stream model on " << pvols.size() << " volumes per stream -> "
            << output << "\n";
}

void run_describe(const CommonPaths& common, const std::string& model_path,
                  const std::string& split) {
  PipelineConfig cfg = config_from(common.config);
  DatasetManifest manifest = load_manifest(common.manifest);
  TwoStreamModel model = load_two_stream(model_path);
  for (const ManifestEntry& e : pick_split(manifest, split)) {
    fs::path fpath = feature_path(common.features, e.path);
    VideoFeatures vf = load_features(fpath);
    append_learned_descriptors(vf, model, cfg);
    save_features(vf, fpath);
    std::cout << "described " << e.path << ": " << vf.rows() << " rows\n";
  }
}

void run_train_encoder(const CommonPaths& common, const std::string& output) {
  PipelineConfig cfg = config_from(common.config);
  DatasetManifest manifest = load_manifest(common.manifest);
  std::vector<VideoFeatures> features;
  for (const ManifestEntry& e : manifest.split(false))
    features.push_back(load_features(feature_path(common.features, e.path)));
  std::vector<const VideoDescriptors*> ptrs;
  for (const VideoFeatures& vf : features) ptrs.push_back(&vf.descriptors);

  EncoderTrainOpts eopts;
  eopts.gmm_k = cfg.encode_k;
  eopts.max_samples = cfg.encode_max_samples;
  eopts.alpha = cfg.encode_alpha;
  eopts.whiten = cfg.encode_whiten;
  eopts.seed = derive_seed(cfg.seed, "encoder_train");
  FisherEncoder encoder = train_fisher_encoder(gather_descriptor_samples(ptrs), eopts);
  save_encoder(encoder, output);
  std::cout << "trained encoder: total dimension " << encoder.total_dim() << " -> " << output
            << "\n";
}

void run_encode(const CommonPaths& common, const std::string& encoder_path,
                const std::string& split, const std::string& output) {
  DatasetManifest manifest = load_manifest(common.manifest);
  FisherEncoder encoder = load_encoder(encoder_path);
  std::vector<ManifestEntry> entries = pick_split(manifest, split);
  if (entries.empty()) throw std::invalid_argument("encode: split '" + split + "' is empty");

  VideoRepresentations reps;
  reps.features.resize(static_cast<Eigen::Index>(entries.size()), encoder.total_dim());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    VideoFeatures vf = load_features(feature_path(common.features, entries[i].path));
    reps.features.row(static_cast<Eigen::Index>(i)) =
        encode_video(vf.descriptors, encoder).transpose();
    reps.ids.push_back(entries[i].path);
  }
  save_representations(reps, output);
  std::cout << "encoded " << entries.size() << " videos -> " << output << "\n";
}

void run_train_svm(const CommonPaths& common, const std::string& reps_path,
                   const std::string& output) {
  PipelineConfig cfg = config_from(common.config);
  DatasetManifest manifest = load_manifest(common.manifest);
  VideoRepresentations reps = load_representations(reps_path);

  std::vector<int> labels;
  for (const std::string& id : reps.ids) {
    const ManifestEntry* found = nullptr;
    for (const ManifestEntry& e : manifest.entries)
      if (e.path == id) found = &e;
    if (!found) throw std::invalid_argument("train-svm: id '" + id + "' not in manifest");
    if (found->labels.size() != 1)
      throw std::invalid_argument("train-svm: '" + id + "' must have exactly one label");
    labels.push_back(manifest.label_index(found->labels[0]));
  }
  SvmTrainOpts sopts;
  sopts.C = cfg.svm_c;
  sopts.seed = derive_seed(cfg.seed, "svm_train");
  std::vector<LinearModel> models =
      ova_train(reps.features, labels, static_cast<int>(manifest.classes.size()), sopts);
  save_svm(models, manifest.classes, output);
  std::cout << "trained " << models.size() << " one-vs-all models -> " << output << "\n";
}

void run_predict(const std::string& model_path, const std::string& reps_path,
                 const std::string& output) {
  auto [models, names] = load_svm(model_path);
  VideoRepresentations reps = load_representations(reps_path);
  ScoreMatrix sm = ova_predict(models, reps.features, names, reps.ids);
  save_scores_csv(sm, output);
  std::cout << "predicted " << sm.num_instances() << " x " << sm.num_classes() << " scores -> "
            << output << "\n";
}

void run_mir(const std::string& input, const std::string& output, const MirParams& params,
             bool fuse) {
  ScoreMatrix original = load_scores_csv(input);
  MirResult result = mir_rerank(original, params);
  ScoreMatrix final_scores = fuse ? rank_score_fuse(result.scores, original) : result.scores;
  save_scores_csv(final_scores, output);
  std::cout << "mir: " << result.iterations_used << " iterations, final max change "
            << (result.max_changes.empty() ? 0.0 : result.max_changes.back())
            << (fuse ? ", fused with original scores" : "") << " -> " << output << "\n";
}

void run_eval(const std::string& scores_path, const std::string& manifest_path) {
  ScoreMatrix sm = load_scores_csv(scores_path);
  DatasetManifest manifest = load_manifest(manifest_path);
  if (sm.class_names != manifest.classes)
    throw std::invalid_argument("eval: score classes do not match manifest classes");

  std::vector<int> first_truth;
  std::vector<std::vector<int>> full_truth;
  for (const std::string& id : sm.instance_ids) {
    const ManifestEntry* found = nullptr;
    for (const ManifestEntry& e : manifest.entries)
      if (e.path == id) found = &e;
    if (!found) throw std::invalid_argument("eval: id '" + id + "' not in manifest");
    std::vector<int> labels;
    for (const std::string& l : found->labels) labels.push_back(manifest.label_index(l));
    first_truth.push_back(labels[0]);
    full_truth.push_back(std::move(labels));
  }
  std::printf("MAcc=%.6f MAP=%.6f\n", eval_macc(sm, first_truth), eval_map(sm, full_truth));
}

void run_bench(const SynthBenchOptions& opts) {
  SynthBenchReport r = run_synthetic_benchmark(opts);
  std::printf("bench-synthetic: classes=%zu videos=%d train=%d test=%d\n", r.class_names.size(),
              (r.train_count + r.test_count) / static_cast<int>(r.class_names.size()),
              r.train_count, r.test_count);
  std::printf("baseline: MAcc=%.6f MAP=%.6f\n", r.macc_baseline, r.map_baseline);
  std::printf("mir+fusion: MAcc=%.6f MAP=%.6f (iterations=%d)\n", r.macc_fused, r.map_fused,
              r.mir_iterations);
}

void write_filter_grid(const Eigen::MatrixXd& filters, int rf_s, int rf_t, int channels,
                       int channel, const fs::path& out) {
  int m = static_cast<int>(filters.rows());
  int grid_cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(m))));
  int grid_rows = (m + grid_cols - 1) / grid_cols;
  int cell = rf_s + 1;
  std::uint32_t w = static_cast<std::uint32_t>(grid_cols * cell + 1);
  std::uint32_t h = static_cast<std::uint32_t>(grid_rows * cell + 1);
  std::vector<float> image(std::size_t(w) * h, 0.0f);

  int t_mid = rf_t / 2;
  for (int f = 0; f < m; ++f) {
    auto value = [&](int x, int y) {
      return filters(f, x + Eigen::Index(rf_s) * (y + Eigen::Index(rf_s) * (t_mid + Eigen::Index(rf_t) * channel)));
    };
    double lo = value(0, 0), hi = value(0, 0);
    for (int y = 0; y < rf_s; ++y)
      for (int x = 0; x < rf_s; ++x) {
        lo = std::min(lo, value(x, y));
        hi = std::max(hi, value(x, y));
      }
    double range = hi > lo ? hi - lo : 1.0;
    int gx = (f % grid_cols) * cell + 1;
    int gy = (f / grid_cols) * cell + 1;
    for (int y = 0; y < rf_s; ++y)
      for (int x = 0; x < rf_s; ++x)
        image[std::size_t(gy + y) * w + gx + x] = static_cast<float>((value(x, y) - lo) / range);
  }
  (void)channels;
  save_pgm_scaled(image.data(), w, h, out);
}

void run_export_filters(const std::string& model_path, const std::string& out_dir) {
  TwoStreamModel model = load_two_stream(model_path);
  fs::create_directories(out_dir);
  Eigen::MatrixXd pixel_filters = layer1_filters(model.pixel_model);
  Eigen::MatrixXd flow_filters = layer1_filters(model.flow_model);
  const ConvIsaGeometry& g = model.pixel_model.geometry;
  write_filter_grid(pixel_filters, g.rf_spatial, g.rf_temporal, 1, 0,
                    fs::path(out_dir) / "pixel_layer1.pgm");
  const ConvIsaGeometry& gf = model.flow_model.geometry;
  write_filter_grid(flow_filters, gf.rf_spatial, gf.rf_temporal, 2, 0,
                    fs::path(out_dir) / "flow_layer1_u.pgm");
  write_filter_grid(flow_filters, gf.rf_spatial, gf.rf_temporal, 2, 1,
                    fs::path(out_dir) / "flow_layer1_v.pgm");
  std::cout << "exported layer-1 filter grids to " << out_dir << "\n";
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"vidfeat: dense-trajectory video features, two-stream ConvISA descriptors, "
               "Fisher-vector encoding, one-vs-all SVM, and iterative re-ranking"};
  app.require_subcommand(1);

  auto common = std::make_shared<CommonPaths>();
  auto strings = std::make_shared<std::vector<std::string>>(16);
  auto& s = *strings;

  auto add_common = [&](CLI::App* sub, bool with_features = true) {
    sub->add_option("--config", common->config, "pipeline config file (key=value)");
    sub->add_option("--manifest", common->manifest, "dataset manifest")->required();
    if (with_features)
      sub->add_option("--features", common->features, "feature file directory")->required();
  };

  auto* extract = app.add_subcommand("extract", "videos -> trajectories, volumes, descriptors");
  add_common(extract);
  s[0] = "all";
  extract->add_option("--split", s[0], "train, test, or all")
      ->check(CLI::IsMember({"train", "test", "all"}));
  s[1] = "auto";
  extract->add_option("--format", s[1], "video format: rgv, pgm, or auto")
      ->check(CLI::IsMember({"rgv", "pgm", "auto"}));
  extract->add_option("--video-root", s[2], "prefix for manifest video paths");
  extract->callback([&, common]() { run_extract(*common, s[0], s[1], s[2]); });

  auto* trainc = app.add_subcommand("train-convisa", "train the two-stream stacked model");
  add_common(trainc);
  trainc->add_option("--output", s[3], "model file to write")->required();
  trainc->callback([&, common]() { run_train_convisa(*common, s[3]); });

  auto* describe = app.add_subcommand("describe", "add learned lop/lof rows to feature files");
  add_common(describe);
  describe->add_option("--model", s[4], "two-stream model file")->required();
  s[5] = "all";
  describe->add_option("--split", s[5], "train, test, or all")
      ->check(CLI::IsMember({"train", "test", "all"}));
  describe->callback([&, common]() { run_describe(*common, s[4], s[5]); });

  auto* traine = app.add_subcommand("train-encoder", "train the per-kind Fisher encoder");
  add_common(traine);
  traine->add_option("--output", s[6], "encoder file to write")->required();
  traine->callback([&, common]() { run_train_encoder(*common, s[6]); });

  auto* encode = app.add_subcommand("encode", "encode feature files to video representations");
  add_common(encode);
  encode->add_option("--encoder", s[7], "encoder file")->required();
  encode->add_option("--split", s[8], "train or test")
      ->required()
      ->check(CLI::IsMember({"train", "test"}));
  encode->add_option("--output", s[9], "representations file to write")->required();
  encode->callback([&, common]() { run_encode(*common, s[7], s[8], s[9]); });

  auto* trains = app.add_subcommand("train-svm", "train one-vs-all linear SVMs");
  add_common(trains, false);
  trains->add_option("--representations", s[10], "training representations")->required();
  trains->add_option("--output", s[11], "svm model file to write")->required();
  trains->callback([&, common]() { run_train_svm(*common, s[10], s[11]); });

  auto* predict = app.add_subcommand("predict", "write raw decision scores as CSV");
  predict->add_option("--model", s[12], "svm model file")->required();
  predict->add_option("--representations", s[13], "representations to score")->required();
  predict->add_option("--output", s[14], "score CSV to write")->required();
  predict->callback([&]() { run_predict(s[12], s[13], s[14]); });

  auto mir_params = std::make_shared<MirParams>();
  auto mir_io = std::make_shared<std::pair<std::string, std::string>>();
  auto fuse = std::make_shared<bool>(false);
  auto* mir = app.add_subcommand("mir", "re-rank a score CSV (optionally fuse with original)");
  mir->add_option("--input", mir_io->first, "score CSV to read")->required();
  mir->add_option("--output", mir_io->second, "score CSV to write")->required();
  mir->add_option("--eta", mir_params->eta, "annealing factor in (0,1]");
  mir->add_option("--alpha", mir_params->alpha, "competitor decay, > 0");
  mir->add_option("--iters", mir_params->max_iters, "iteration budget W");
  mir->add_option("--tol", mir_params->convergence_tol, "max-change stopping tolerance");
  mir->add_flag("--fuse", *fuse, "min-max + z-score the result and add the original scores");
  mir->callback(
      [mir_params, mir_io, fuse]() { run_mir(mir_io->first, mir_io->second, *mir_params, *fuse); });

  auto* eval = app.add_subcommand("eval", "print MAcc and MAP for a score CSV");
  eval->add_option("--scores", s[15], "score CSV")->required();
  eval->add_option("--manifest", common->manifest, "dataset manifest")->required();
  eval->callback([&, common]() { run_eval(s[15], common->manifest); });

  auto bench = std::make_shared<SynthBenchOptions>();
  auto bench_config = std::make_shared<std::string>();
  auto* benchcmd = app.add_subcommand("bench-synthetic", "end-to-end synthetic benchmark");
  benchcmd->add_option("--classes", bench->classes, "number of motion classes (2-9)");
  benchcmd->add_option("--videos-per-class", bench->videos_per_class, "videos per class");
  benchcmd->add_option("--seed", bench->seed, "master seed");
  benchcmd->add_option("--width", bench->width, "video width");
  benchcmd->add_option("--height", bench->height, "video height");
  benchcmd->add_option("--frames", bench->frames, "video frames");
  benchcmd->add_option("--config", *bench_config, "config file (defaults to desk scale)");
  benchcmd->callback([bench, bench_config]() {
    if (!bench_config->empty()) bench->config = load_config(*bench_config);
    run_bench(*bench);
  });

  auto exp_io = std::make_shared<std::pair<std::string, std::string>>();
  auto* expf = app.add_subcommand("export-filters", "write layer-1 filter grids as PGM images");
  expf->add_option("--model", exp_io->first, "two-stream model file")->required();
  expf->add_option("--output-dir", exp_io->second, "directory for the PGM files")->required();
  expf->callback([exp_io]() { run_export_filters(exp_io->first, exp_io->second); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::out_of_range& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace vidfeat
