// Microbenchmarks for the hot paths: flow, descriptors, ISA, layer-1
// convolution, Fisher encoding, SVM training, and tracking.
#include <benchmark/benchmark.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <vector>

#include "vidfeat/convisa.hpp"
#include "vidfeat/descriptors.hpp"
#include "vidfeat/encoding.hpp"
#include "vidfeat/flow.hpp"
#include "vidfeat/gmm.hpp"
#include "vidfeat/isa.hpp"
#include "vidfeat/rng.hpp"
#include "vidfeat/svm.hpp"
#include "vidfeat/trajectory.hpp"
#include "vidfeat/video.hpp"

using namespace vidfeat;

namespace {

Eigen::MatrixXd gaussian(int rows, int cols, std::uint64_t seed) {
  auto rng = make_rng(seed, "bench");
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = g(rng);
  return m;
}

Eigen::MatrixXd orthonormal_rows(int rows, int cols, std::uint64_t seed) {
  Eigen::MatrixXd m = gaussian(cols, rows, seed);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(cols, rows);
  return q.transpose();
}

PixelVolume random_pixel_volume(std::uint64_t seed) {
  auto rng = make_rng(seed, "bench_pv");
  std::uniform_real_distribution<float> uni(0.0f, 1.0f);
  PixelVolume pv;
  pv.data.resize(kPixelVolumeSize);
  for (float& v : pv.data) v = uni(rng);
  return pv;
}

FlowVolume random_flow_volume(std::uint64_t seed) {
  auto rng = make_rng(seed, "bench_fv");
  std::uniform_real_distribution<float> uni(-2.0f, 2.0f);
  FlowVolume fv;
  fv.data.resize(kFlowVolumeSize);
  for (float& v : fv.data) v = uni(rng);
  return fv;
}

void BM_ComputeFlow(benchmark::State& state) {
  auto side = static_cast<std::uint32_t>(state.range(0));
  GrayVideo v = synth_video(MotionSpec::translate(1.5f, 0.5f), side, side, 2, 1);
  FlowParams params;
  for (auto _ : state) {
    FlowField f = compute_flow(frame_view(v, 0), frame_view(v, 1), params);
    benchmark::DoNotOptimize(f.u.data());
  }
}
BENCHMARK(BM_ComputeFlow)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_RectifyFlow(benchmark::State& state) {
  GrayVideo v = synth_video(MotionSpec::translate(2.0f, -1.0f), 128, 128, 2, 2);
  FlowField f = compute_flow(frame_view(v, 0), frame_view(v, 1), {});
  std::vector<PointMatch> matches = matches_from_flow(f, 8);
  for (auto _ : state) {
    RectifyResult r = rectify_flow(f, matches, 3);
    benchmark::DoNotOptimize(r.flow.u.data());
  }
}
BENCHMARK(BM_RectifyFlow)->Unit(benchmark::kMillisecond);

void BM_Hog(benchmark::State& state) {
  PixelVolume pv = random_pixel_volume(4);
  for (auto _ : state) {
    auto d = hog(pv);
    benchmark::DoNotOptimize(d.data());
  }
}
BENCHMARK(BM_Hog);

void BM_Hof(benchmark::State& state) {
  FlowVolume fv = random_flow_volume(5);
  for (auto _ : state) {
    auto d = hof(fv);
    benchmark::DoNotOptimize(d.data());
  }
}
BENCHMARK(BM_Hof);

void BM_Mbh(benchmark::State& state) {
  FlowVolume fv = random_flow_volume(6);
  for (auto _ : state) {
    auto d = mbh(fv);
    benchmark::DoNotOptimize(d.data());
  }
}
BENCHMARK(BM_Mbh);

void BM_IsaActivationBatch(benchmark::State& state) {
  IsaLayer layer{orthonormal_rows(32, 32, 7), 2};
  Eigen::MatrixXd X = gaussian(256, 32, 8);
  for (auto _ : state) {
    Eigen::MatrixXd a = isa_activation_batch(layer, X);
    benchmark::DoNotOptimize(a.data());
  }
}
BENCHMARK(BM_IsaActivationBatch);

void BM_IsaGrad(benchmark::State& state) {
  IsaLayer layer{orthonormal_rows(32, 32, 9), 2};
  Eigen::MatrixXd X = gaussian(256, 32, 10);
  for (auto _ : state) {
    Eigen::MatrixXd g = isa_grad(X, layer, 1e-8);
    benchmark::DoNotOptimize(g.data());
  }
}
BENCHMARK(BM_IsaGrad);

void BM_ConvolveLayer1(benchmark::State& state) {
  ConvIsaGeometry geom;
  PcaModel pca1;
  pca1.mean = Eigen::VectorXd::Zero(geom.sub_dim(1));
  pca1.basis = orthonormal_rows(geom.pca1_dim, geom.sub_dim(1), 11);
  pca1.scales = Eigen::VectorXd::Ones(geom.pca1_dim);
  IsaLayer isa1{orthonormal_rows(geom.pca1_dim, geom.pca1_dim, 12), geom.group1};
  PixelVolume pv = random_pixel_volume(13);
  for (auto _ : state) {
    Eigen::VectorXd c = convolve_layer1(pv.data, geom, 1, pca1, isa1);
    benchmark::DoNotOptimize(c.data());
  }
}
BENCHMARK(BM_ConvolveLayer1)->Unit(benchmark::kMillisecond);

GmmModel bench_gmm(int K, int D) {
  GmmModel g;
  g.weights = Eigen::VectorXd::Constant(K, 1.0 / K);
  g.means = gaussian(K, D, 14);
  g.variances = gaussian(K, D, 15).array().abs() + 0.5;
  return g;
}

void BM_GmmPosteriors(benchmark::State& state) {
  GmmModel g = bench_gmm(64, 48);
  Eigen::MatrixXd X = gaussian(1000, 48, 16);
  for (auto _ : state) {
    Eigen::MatrixXd p = gmm_posteriors(g, X);
    benchmark::DoNotOptimize(p.data());
  }
}
BENCHMARK(BM_GmmPosteriors)->Unit(benchmark::kMillisecond);

void BM_FisherVector(benchmark::State& state) {
  GmmModel g = bench_gmm(64, 48);
  Eigen::MatrixXd X = gaussian(1000, 48, 17);
  for (auto _ : state) {
    Eigen::VectorXd fv = fisher_vector(X, g);
    benchmark::DoNotOptimize(fv.data());
  }
}
BENCHMARK(BM_FisherVector)->Unit(benchmark::kMillisecond);

void BM_SvmTrain(benchmark::State& state) {
  Eigen::MatrixXd X = gaussian(200, 512, 18);
  std::vector<int> y(200);
  for (int i = 0; i < 200; ++i) {
    y[i] = i % 2 == 0 ? 1 : -1;
    X(i, 0) += y[i] * 3.0;
  }
  for (auto _ : state) {
    LinearModel m = svm_train(X, y, {});
    benchmark::DoNotOptimize(m.w.data());
  }
}
BENCHMARK(BM_SvmTrain)->Unit(benchmark::kMillisecond);

void BM_ExtractTrajectories(benchmark::State& state) {
  GrayVideo v = synth_video(MotionSpec::translate(1.3f, 0.7f), 64, 64, 18, 19);
  ScalePyramid pyr = build_scale_pyramid(v, 1, 1.0f / std::sqrt(2.0f));
  std::vector<FlowSequence> flows;
  for (const GrayVideo& level : pyr.levels) flows.push_back(compute_flow_sequence(level, {}));
  TrackerConfig cfg;
  for (auto _ : state) {
    auto trajs = extract_trajectories(pyr, flows, cfg);
    benchmark::DoNotOptimize(trajs.data());
  }
}
BENCHMARK(BM_ExtractTrajectories)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
