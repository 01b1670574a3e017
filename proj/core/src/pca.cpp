#include "vidfeat/pca.hpp"

#include <cmath>

#include <lapacke.h>

#include "vidfeat/error.hpp"

namespace vidfeat {
namespace {

// Ascending eigenvalues, matching Eigen's SelfAdjointEigenSolver layout.
void symmetric_eigen(const Eigen::MatrixXd& C, Eigen::VectorXd& eigenvalues,
                     Eigen::MatrixXd& eigenvectors) {
  Eigen::Index n = C.rows();
  if (n < 256) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
    if (es.info() != Eigen::Success) throw NumericError("pca_train: eigensolve failed");
    eigenvalues = es.eigenvalues();
    eigenvectors = es.eigenvectors();
    return;
  }
  // dsyevd is much faster for the large covariance matrices of layer-2 PCA.
  eigenvectors = C;
  eigenvalues.resize(n);
  lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'U', static_cast<lapack_int>(n),
                                   eigenvectors.data(), static_cast<lapack_int>(n),
                                   eigenvalues.data());
  if (info != 0) throw NumericError("pca_train: dsyevd failed");
}

}  // namespace

PcaModel pca_train(const Eigen::MatrixXd& X, int dim, bool whiten) {
  Eigen::Index T = X.rows();
  Eigen::Index n = X.cols();
  if (dim < 1 || dim > n) throw std::invalid_argument("pca_train: dim out of range");
  if (T <= dim) throw std::invalid_argument("pca_train: need more instances than dim");

  PcaModel model;
  model.whiten = whiten;
  model.mean = X.colwise().mean();

  Eigen::VectorXd ev;
  Eigen::MatrixXd evec;
  double trace = 0.0;
  bool gram = T < n;
  Eigen::MatrixXd centered;
  if (gram) {
    // Fewer instances than dims: the T x T Gram matrix shares the nonzero
    // spectrum and its eigenvectors map back through the data matrix.
    centered = X.rowwise() - model.mean.transpose();
    Eigen::MatrixXd G = centered * centered.transpose() / static_cast<double>(T);
    trace = G.trace();
    if (!(trace > 0.0)) throw NumericError("pca_train: zero covariance (constant data)");
    symmetric_eigen(G, ev, evec);
  } else {
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(n, n);
    constexpr Eigen::Index kBlock = 8192;
    for (Eigen::Index r0 = 0; r0 < T; r0 += kBlock) {
      Eigen::Index rows = std::min(kBlock, T - r0);
      Eigen::MatrixXd block = X.middleRows(r0, rows);
      block.rowwise() -= model.mean.transpose();
      C.noalias() += block.transpose() * block;
    }
    C /= static_cast<double>(T);
    trace = C.trace();
    if (!(trace > 0.0)) throw NumericError("pca_train: zero covariance (constant data)");
    symmetric_eigen(C, ev, evec);
  }

  double reg = whiten ? 1e-5 * trace / static_cast<double>(n) : 0.0;
  model.basis.resize(dim, n);
  model.scales.resize(dim);
  for (int i = 0; i < dim; ++i) {
    Eigen::Index src = ev.size() - 1 - i;  // eigenvalues come out ascending
    double lambda = std::max(ev(src), 0.0);
    Eigen::VectorXd dir;
    if (gram) {
      if (!(lambda > 1e-12 * trace))
        throw NumericError("pca_train: data rank below requested dimension");
      dir = centered.transpose() * evec.col(src) / std::sqrt(lambda * T);
    } else {
      dir = evec.col(src);
    }
    Eigen::Index max_idx;
    dir.cwiseAbs().maxCoeff(&max_idx);
    if (dir(max_idx) < 0.0) dir = -dir;
    model.basis.row(i) = dir.transpose();
    model.scales(i) = whiten ? 1.0 / std::sqrt(lambda + reg) : 1.0;
  }
  return model;
}

Eigen::MatrixXd pca_apply(const PcaModel& model, const Eigen::MatrixXd& X) {
  if (X.cols() != model.basis.cols())
    throw std::invalid_argument("pca_apply: input dimension mismatch");
  Eigen::MatrixXd Y = (X.rowwise() - model.mean.transpose()) * model.basis.transpose();
  if (model.whiten) Y = Y * model.scales.asDiagonal();
  return Y;
}

Eigen::VectorXd pca_apply_vec(const PcaModel& model, const Eigen::VectorXd& x) {
  if (x.size() != model.basis.cols())
    throw std::invalid_argument("pca_apply_vec: input dimension mismatch");
  Eigen::VectorXd y = model.basis * (x - model.mean);
  if (model.whiten) y = y.cwiseProduct(model.scales);
  return y;
}

Eigen::MatrixXd pca_invert(const PcaModel& model, const Eigen::MatrixXd& Y) {
  if (Y.cols() != model.basis.rows())
    throw std::invalid_argument("pca_invert: projection dimension mismatch");
  Eigen::MatrixXd Z = Y;
  if (model.whiten) Z = Z * model.scales.cwiseInverse().asDiagonal();
  Eigen::MatrixXd X = Z * model.basis;
  X.rowwise() += model.mean.transpose();
  return X;
}

}  // namespace vidfeat
