#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace vidfeat {

// Diagonal-covariance Gaussian mixture.
struct GmmModel {
  Eigen::VectorXd weights;    // K, on the simplex
  Eigen::MatrixXd means;      // K x D
  Eigen::MatrixXd variances;  // K x D, >= the training variance floor

  int components() const { return static_cast<int>(weights.size()); }
  int dim() const { return static_cast<int>(means.cols()); }
};

struct GmmTrainOpts {
  int max_iters = 200;
  double tol = 1e-5;  // stop when the mean log-likelihood gain drops below
  std::uint64_t seed = 0;
};

struct GmmTrainResult {
  GmmModel model;
  std::vector<double> log_likelihood;  // mean per-sample, one entry per EM iteration
};

// k-means++ seeding, a few Lloyd rounds, then EM. Variance floor is
// 1e-4 times the mean per-dimension sample variance.
GmmTrainResult gmm_train(const Eigen::MatrixXd& samples, int K, const GmmTrainOpts& opts = {});

// Responsibilities (N x K), computed in log space. Optionally returns the
// mean per-sample log-likelihood.
Eigen::MatrixXd gmm_posteriors(const GmmModel& model, const Eigen::MatrixXd& X,
                               double* mean_log_likelihood = nullptr);

}  // namespace vidfeat
