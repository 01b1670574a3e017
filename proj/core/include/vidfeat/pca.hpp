#pragma once

#include <Eigen/Dense>

namespace vidfeat {

struct PcaModel {
  Eigen::VectorXd mean;    // n
  Eigen::MatrixXd basis;   // k x n, rows are principal directions, eigenvalue-descending
  Eigen::VectorXd scales;  // k, 1/sqrt(lambda + reg) when whitening, else ones
  bool whiten = false;

  int input_dim() const { return static_cast<int>(basis.cols()); }
  int output_dim() const { return static_cast<int>(basis.rows()); }
};

// Top-dim eigenvectors of the centered covariance of X (rows = instances).
// Whitening regularizer: 1e-5 * trace(cov) / n.
PcaModel pca_train(const Eigen::MatrixXd& X, int dim, bool whiten);

Eigen::MatrixXd pca_apply(const PcaModel& model, const Eigen::MatrixXd& X);
Eigen::VectorXd pca_apply_vec(const PcaModel& model, const Eigen::VectorXd& x);
// Maps projections back to the input space (exact inverse for k = n).
Eigen::MatrixXd pca_invert(const PcaModel& model, const Eigen::MatrixXd& Y);

}  // namespace vidfeat
