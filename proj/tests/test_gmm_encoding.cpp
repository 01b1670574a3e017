#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <vidfeat/encoding.hpp>
#include <vidfeat/error.hpp>
#include <vidfeat/gmm.hpp>

using namespace vidfeat;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("vf_enc_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { std::error_code ec; fs::remove_all(path, ec); }
};

Eigen::MatrixXd gaussian_matrix(int rows, int cols, std::uint64_t seed, double sigma = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, sigma);
  Eigen::MatrixXd X(rows, cols);
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < X.cols(); ++j) X(i, j) = gauss(rng);
  return X;
}

// Direct per-sample evaluation of the normalized gradient statistics.
Eigen::VectorXd brute_fisher(const Eigen::MatrixXd& X, const GmmModel& g) {
  int K = g.components();
  int D = g.dim();
  Eigen::Index N = X.rows();
  Eigen::VectorXd fv = Eigen::VectorXd::Zero(2 * D * K);
  for (Eigen::Index t = 0; t < N; ++t) {
    Eigen::VectorXd logp(K);
    for (int k = 0; k < K; ++k) {
      double lp = std::log(g.weights(k));
      for (int d = 0; d < D; ++d) {
        double z = X(t, d) - g.means(k, d);
        lp += -0.5 * (std::log(2.0 * M_PI * g.variances(k, d)) +
                      z * z / g.variances(k, d));
      }
      logp(k) = lp;
    }
    double mx = logp.maxCoeff();
    Eigen::VectorXd post = (logp.array() - mx).exp();
    post /= post.sum();
    for (int k = 0; k < K; ++k)
      for (int d = 0; d < D; ++d) {
        double sd = std::sqrt(g.variances(k, d));
        double z = (X(t, d) - g.means(k, d)) / sd;
        fv(k * D + d) += post(k) * z / std::sqrt(g.weights(k));
        fv((K + k) * D + d) += post(k) * (z * z - 1.0) / std::sqrt(2.0 * g.weights(k));
      }
  }
  return fv / static_cast<double>(N);
}

}  // namespace

TEST_CASE("single-component fit matches the sample moments") {
  Eigen::MatrixXd X = gaussian_matrix(500, 3, 42);
  X.col(1).array() += 2.5;
  X.col(2) *= 0.5;

  GmmTrainResult r = gmm_train(X, 1, {});
  Eigen::RowVectorXd mu = X.colwise().mean();
  Eigen::RowVectorXd var =
      (X.rowwise() - mu).array().square().colwise().mean();
  CHECK((r.model.means.row(0) - mu).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((r.model.variances.row(0) - var).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(r.model.weights(0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("well-separated clusters are recovered") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> noise(0.0, 0.15);
  const double centers[3][2] = {{0.0, 0.0}, {10.0, 0.0}, {0.0, 10.0}};
  Eigen::MatrixXd X(600, 2);
  for (int i = 0; i < 600; ++i) {
    int c = i % 3;
    X(i, 0) = centers[c][0] + noise(rng);
    X(i, 1) = centers[c][1] + noise(rng);
  }
  GmmTrainOpts opts;
  opts.seed = 1;
  GmmTrainResult r = gmm_train(X, 3, opts);

  for (const auto& c : centers) {
    double best = 1e12;
    for (int k = 0; k < 3; ++k) {
      double d = std::hypot(r.model.means(k, 0) - c[0], r.model.means(k, 1) - c[1]);
      best = std::min(best, d);
    }
    CHECK(best < 0.2);
  }
  for (int k = 0; k < 3; ++k) CHECK(r.model.weights(k) == doctest::Approx(1.0 / 3).epsilon(0.05));
}

TEST_CASE("EM log-likelihood never decreases") {
  Eigen::MatrixXd X = gaussian_matrix(400, 4, 9);
  X.topRows(200).array() += 3.0;
  GmmTrainOpts opts;
  opts.seed = 2;
  GmmTrainResult r = gmm_train(X, 4, opts);
  REQUIRE(r.log_likelihood.size() >= 2);
  for (std::size_t i = 1; i < r.log_likelihood.size(); ++i)
    CHECK(r.log_likelihood[i] >= r.log_likelihood[i - 1] - 1e-8);
}

TEST_CASE("posteriors are responsibilities on the simplex") {
  Eigen::MatrixXd X = gaussian_matrix(300, 3, 21);
  GmmTrainOpts opts;
  opts.seed = 3;
  opts.max_iters = 30;
  GmmModel m = gmm_train(X, 5, opts).model;

  Eigen::MatrixXd R = gmm_posteriors(m, X);
  CHECK(R.rows() == 300);
  CHECK(R.cols() == 5);
  CHECK(R.minCoeff() >= 0.0);
  for (Eigen::Index i = 0; i < R.rows(); ++i)
    CHECK(R.row(i).sum() == doctest::Approx(1.0).epsilon(1e-10));

  CHECK_THROWS_AS(gmm_posteriors(m, gaussian_matrix(10, 4, 1)), std::invalid_argument);
}

TEST_CASE("training rejects undersized sample sets") {
  CHECK_THROWS_AS(gmm_train(gaussian_matrix(25, 2, 1), 3, {}), std::invalid_argument);
  CHECK_THROWS_AS(gmm_train(gaussian_matrix(25, 2, 1), 0, {}), std::invalid_argument);
  CHECK_NOTHROW(gmm_train(gaussian_matrix(30, 2, 1), 3, {}));
}

TEST_CASE("fisher vector matches a direct evaluation") {
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> unif(0.2, 2.0);
  GmmModel g;
  const int K = 4, D = 3;
  g.weights = Eigen::VectorXd(K);
  g.weights << 0.1, 0.4, 0.3, 0.2;
  g.means = gaussian_matrix(K, D, 100, 2.0);
  g.variances = Eigen::MatrixXd(K, D);
  for (int k = 0; k < K; ++k)
    for (int d = 0; d < D; ++d) g.variances(k, d) = unif(rng);

  Eigen::MatrixXd X = gaussian_matrix(50, D, 101, 2.0);
  Eigen::VectorXd fast = fisher_vector(X, g);
  Eigen::VectorXd slow = brute_fisher(X, g);
  REQUIRE(fast.size() == 2 * D * K);
  CHECK((fast - slow).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("fisher vector closed form at the component mean") {
  GmmModel g;
  g.weights = Eigen::VectorXd::Ones(1);
  g.means = Eigen::MatrixXd::Zero(1, 1);
  g.variances = Eigen::MatrixXd::Ones(1, 1);

  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(1, 1);
  Eigen::VectorXd fv = fisher_vector(X, g);
  REQUIRE(fv.size() == 2);
  CHECK(fv(0) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(fv(1) == doctest::Approx(-1.0 / std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("fisher vector of an empty set is zero") {
  GmmModel g;
  g.weights = Eigen::VectorXd::Ones(2) * 0.5;
  g.means = Eigen::MatrixXd::Zero(2, 3);
  g.variances = Eigen::MatrixXd::Ones(2, 3);
  Eigen::VectorXd fv = fisher_vector(Eigen::MatrixXd(0, 3), g);
  CHECK(fv.size() == 12);
  CHECK(fv.cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(fisher_vector(Eigen::MatrixXd::Zero(5, 2), g), std::invalid_argument);
}

TEST_CASE("fisher vector is invariant to descriptor order") {
  GmmModel g;
  g.weights = Eigen::VectorXd::Ones(2) * 0.5;
  g.means = Eigen::MatrixXd::Zero(2, 2);
  g.means(1, 0) = 4.0;
  g.variances = Eigen::MatrixXd::Ones(2, 2);

  Eigen::MatrixXd X = gaussian_matrix(40, 2, 55);
  Eigen::MatrixXd P = X.colwise().reverse();
  Eigen::VectorXd a = fisher_vector(X, g);
  Eigen::VectorXd b = fisher_vector(P, g);
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("power normalization worked example") {
  Eigen::VectorXd v(2);
  v << 4.0, -9.0;
  Eigen::VectorXd out = power_l2_normalize(v, 0.5);
  CHECK(out(0) == doctest::Approx(2.0 / std::sqrt(13.0)).epsilon(1e-12));
  CHECK(out(1) == doctest::Approx(-3.0 / std::sqrt(13.0)).epsilon(1e-12));
  CHECK(out.norm() == doctest::Approx(1.0).epsilon(1e-12));

  Eigen::VectorXd zero = power_l2_normalize(Eigen::VectorXd::Zero(4), 0.5);
  CHECK(zero.cwiseAbs().maxCoeff() == 0.0);

  Eigen::VectorXd lin = power_l2_normalize(v, 1.0);
  CHECK(lin(0) == doctest::Approx(4.0 / std::hypot(4.0, 9.0)).epsilon(1e-12));
}

TEST_CASE("encoder blocks follow canonical kind order and sizes") {
  std::vector<std::pair<DescriptorKind, Eigen::MatrixXd>> samples;
  samples.emplace_back(DescriptorKind::lop, gaussian_matrix(400, 200, 60));
  samples.emplace_back(DescriptorKind::hog, gaussian_matrix(400, kHogDim, 61));

  EncoderTrainOpts opts;
  opts.gmm_k = 8;
  opts.gmm.max_iters = 15;
  opts.seed = 4;
  FisherEncoder enc = train_fisher_encoder(samples, opts);

  REQUIRE(enc.kinds.size() == 2);
  CHECK(enc.kinds[0].kind == DescriptorKind::hog);
  CHECK(enc.kinds[1].kind == DescriptorKind::lop);
  CHECK(enc.kinds[0].block_dim() == 2 * 48 * 8);
  CHECK(enc.kinds[1].block_dim() == 2 * 100 * 8);
  CHECK(enc.total_dim() == 2368);
  CHECK(enc.find(DescriptorKind::hog) == &enc.kinds[0]);
  CHECK(enc.find(DescriptorKind::hof) == nullptr);

  CHECK_THROWS_AS(train_fisher_encoder({}, opts), std::invalid_argument);
}

TEST_CASE("encoding fills present kinds and zeros missing ones") {
  std::vector<std::pair<DescriptorKind, Eigen::MatrixXd>> samples;
  samples.emplace_back(DescriptorKind::hog, gaussian_matrix(300, 10, 70));
  samples.emplace_back(DescriptorKind::hof, gaussian_matrix(300, 8, 71));
  EncoderTrainOpts opts;
  opts.gmm_k = 4;
  opts.gmm.max_iters = 10;
  FisherEncoder enc = train_fisher_encoder(samples, opts);
  int hog_block = enc.kinds[0].block_dim();
  int hof_block = enc.kinds[1].block_dim();

  VideoDescriptors vd;
  std::mt19937_64 rng(72);
  std::normal_distribution<float> gauss;
  for (int r = 0; r < 20; ++r) {
    std::vector<float> row(10);
    for (auto& x : row) x = gauss(rng);
    vd.of(DescriptorKind::hog).append(row);
  }

  Eigen::VectorXd code = encode_video(vd, enc);
  REQUIRE(code.size() == hog_block + hof_block);
  CHECK(code.head(hog_block).norm() == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(code.tail(hof_block).cwiseAbs().maxCoeff() == 0.0);

  VideoDescriptors bad;
  std::vector<float> wrong(7, 0.5f);
  bad.of(DescriptorKind::hog).append(wrong);
  CHECK_THROWS_AS(encode_video(bad, enc), std::invalid_argument);
}

TEST_CASE("oversized sample sets are subsampled deterministically") {
  std::vector<std::pair<DescriptorKind, Eigen::MatrixXd>> samples;
  samples.emplace_back(DescriptorKind::mbh, gaussian_matrix(900, 6, 80));
  EncoderTrainOpts opts;
  opts.gmm_k = 2;
  opts.max_samples = 200;
  opts.gmm.max_iters = 10;
  opts.seed = 11;
  FisherEncoder a = train_fisher_encoder(samples, opts);
  FisherEncoder b = train_fisher_encoder(samples, opts);
  CHECK((a.kinds[0].gmm.means - b.kinds[0].gmm.means).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.kinds[0].pca.basis - b.kinds[0].pca.basis).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("encoder round trips through disk") {
  TempDir tmp;
  std::vector<std::pair<DescriptorKind, Eigen::MatrixXd>> samples;
  samples.emplace_back(DescriptorKind::traj_shape, gaussian_matrix(300, 12, 90));
  samples.emplace_back(DescriptorKind::lof, gaussian_matrix(300, 14, 91));
  EncoderTrainOpts opts;
  opts.gmm_k = 3;
  opts.gmm.max_iters = 10;
  opts.alpha = 0.4;
  FisherEncoder enc = train_fisher_encoder(samples, opts);

  fs::path file = tmp.path / "encoder.tcn";
  save_encoder(enc, file);
  FisherEncoder back = load_encoder(file);

  REQUIRE(back.kinds.size() == 2);
  CHECK(back.alpha == doctest::Approx(0.4).epsilon(1e-6));
  CHECK(back.kinds[0].kind == DescriptorKind::traj_shape);
  CHECK(back.kinds[1].kind == DescriptorKind::lof);
  CHECK(back.total_dim() == enc.total_dim());

  VideoDescriptors vd;
  std::mt19937_64 rng(92);
  std::normal_distribution<float> gauss;
  for (int r = 0; r < 15; ++r) {
    std::vector<float> row(12);
    for (auto& x : row) x = gauss(rng);
    vd.of(DescriptorKind::traj_shape).append(row);
  }
  Eigen::VectorXd before = encode_video(vd, enc);
  Eigen::VectorXd after = encode_video(vd, back);
  CHECK((before - after).cwiseAbs().maxCoeff() < 1e-4);

  CHECK_THROWS_AS(load_encoder(tmp.path / "none.tcn"), IoError);
}

TEST_CASE("frame subsampling keeps every n-th frame") {
  GrayVideo v;
  v.width = 2;
  v.height = 2;
  v.frames = 10;
  v.data.resize(40);
  for (std::uint32_t t = 0; t < 10; ++t)
    for (int i = 0; i < 4; ++i) v.data[t * 4 + i] = static_cast<float>(t);

  GrayVideo s = subsample_frames(v, 3);
  CHECK(s.frames == 4);
  CHECK(s.at(0, 0, 0) == 0.0f);
  CHECK(s.at(0, 0, 1) == 3.0f);
  CHECK(s.at(0, 0, 2) == 6.0f);
  CHECK(s.at(0, 0, 3) == 9.0f);

  GrayVideo same = subsample_frames(v, 1);
  CHECK(same.frames == 10);
  CHECK(same.data == v.data);

  CHECK_THROWS_AS(subsample_frames(v, 0), std::invalid_argument);
}

TEST_CASE("temporal stacking unions levels and skips short ones") {
  GrayVideo v;
  v.width = 4;
  v.height = 4;
  v.frames = 40;
  v.data.assign(std::size_t(4) * 4 * 40, 0.0f);

  auto extractor = [](const GrayVideo& sub) {
    VideoDescriptors vd;
    vd.video_width = sub.width;
    vd.video_height = sub.height;
    vd.video_frames = sub.frames;
    for (std::uint32_t t = 0; t < sub.frames; ++t) {
      vd.locations.push_back({0.0f, 0.0f, static_cast<float>(t)});
      std::vector<float> row{static_cast<float>(sub.frames), static_cast<float>(t)};
      vd.of(DescriptorKind::hog).append(row);
    }
    return vd;
  };

  MifsResult one = mifs_stack(v, {0}, extractor);
  CHECK(one.levels_used == std::vector<int>{0});
  CHECK(one.levels_skipped.empty());
  CHECK(one.descriptors.of(DescriptorKind::hog).rows() == 40);
  CHECK(one.descriptors.video_frames == 40);

  MifsResult two = mifs_stack(v, {0, 1}, extractor);
  CHECK(two.levels_used == std::vector<int>{0, 1});
  CHECK(two.descriptors.of(DescriptorKind::hog).rows() == 60);
  CHECK(two.descriptors.locations.size() == 60);

  MifsResult skipped = mifs_stack(v, {0, 4}, extractor);
  CHECK(skipped.levels_used == std::vector<int>{0});
  CHECK(skipped.levels_skipped == std::vector<int>{4});
  CHECK(skipped.descriptors.of(DescriptorKind::hog).rows() == 40);

  CHECK_THROWS_AS(mifs_stack(v, {}, extractor), std::invalid_argument);
  CHECK_THROWS_AS(mifs_stack(v, {-1, 0}, extractor), std::invalid_argument);
}
