#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace vidfeat {

// Orthonormal projection whose grouped activations are driven sparse.
// Groups are contiguous runs of group_size rows of W.
struct IsaLayer {
  Eigen::MatrixXd W;  // m x n, orthonormal rows
  int group_size = 1;

  int input_dim() const { return static_cast<int>(W.cols()); }
  int num_units() const { return static_cast<int>(W.rows()) / group_size; }
};

struct IsaTrainOpts {
  double learning_rate = 0.5;
  int epochs = 100;
  int batch_size = 0;  // 0 = full batch
  double smooth_eps = 1e-8;
  std::uint64_t seed = 0;
};

struct IsaTrainResult {
  IsaLayer layer;
  std::vector<double> loss_curve;  // initial loss, then one entry per epoch
};

// Sum over contiguous groups of the group ℓ2 magnitudes.
double group_l1_norm(const Eigen::VectorXd& a, int group_size);

// p_i = sqrt(sum of squared projections within group i).
Eigen::VectorXd isa_activation(const IsaLayer& layer, const Eigen::VectorXd& x);
// Rows are instances; output is T x num_units.
Eigen::MatrixXd isa_activation_batch(const IsaLayer& layer, const Eigen::MatrixXd& X);

// Smoothed objective: sum_t sum_i sqrt(group-square-sum + smooth_eps).
double isa_loss(const Eigen::MatrixXd& X, const IsaLayer& layer, double smooth_eps);
Eigen::MatrixXd isa_grad(const Eigen::MatrixXd& X, const IsaLayer& layer, double smooth_eps);

// W' = (W W^T)^(-1/2) W.
Eigen::MatrixXd symmetric_orthonormalize(const Eigen::MatrixXd& W);

// Projected gradient descent on whitened data (rows = instances) with a
// square W (m = n = data dim) and permanent step halving on loss increase.
IsaTrainResult train_isa(const Eigen::MatrixXd& whitened, int group_size,
                         const IsaTrainOpts& opts = {});

}  // namespace vidfeat
