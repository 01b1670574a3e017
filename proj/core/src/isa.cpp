#include "vidfeat/isa.hpp"

#include <cmath>

#include "vidfeat/error.hpp"
#include "vidfeat/rng.hpp"

namespace vidfeat {
namespace {

void check_layer(const IsaLayer& layer) {
  if (layer.group_size < 1 || layer.W.rows() % layer.group_size != 0)
    throw std::invalid_argument("IsaLayer: rows not divisible by group_size");
}

// Per-instance, per-group sums of squared projections. A = X * W^T.
Eigen::MatrixXd group_square_sums(const Eigen::MatrixXd& A, int group_size) {
  Eigen::Index T = A.rows();
  Eigen::Index d = A.cols() / group_size;
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(T, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (int k = 0; k < group_size; ++k)
      S.col(i) += A.col(i * group_size + k).cwiseAbs2();
  return S;
}

}  // namespace

double group_l1_norm(const Eigen::VectorXd& a, int group_size) {
  if (group_size < 1 || a.size() % group_size != 0)
    throw std::invalid_argument("group_l1_norm: length not divisible by group_size");
  double total = 0.0;
  for (Eigen::Index i = 0; i < a.size(); i += group_size) {
    double s = 0.0;
    for (int k = 0; k < group_size; ++k) s += a(i + k) * a(i + k);
    total += std::sqrt(s);
  }
  return total;
}

Eigen::VectorXd isa_activation(const IsaLayer& layer, const Eigen::VectorXd& x) {
  check_layer(layer);
  if (x.size() != layer.W.cols())
    throw std::invalid_argument("isa_activation: input dimension mismatch");
  Eigen::VectorXd a = layer.W * x;
  Eigen::VectorXd p(layer.num_units());
  for (int i = 0; i < p.size(); ++i) {
    double s = 0.0;
    for (int k = 0; k < layer.group_size; ++k)
      s += a(i * layer.group_size + k) * a(i * layer.group_size + k);
    p(i) = std::sqrt(s);
  }
  return p;
}

Eigen::MatrixXd isa_activation_batch(const IsaLayer& layer, const Eigen::MatrixXd& X) {
  check_layer(layer);
  if (X.cols() != layer.W.cols())
    throw std::invalid_argument("isa_activation_batch: input dimension mismatch");
  Eigen::MatrixXd A = X * layer.W.transpose();
  return group_square_sums(A, layer.group_size).cwiseSqrt();
}

double isa_loss(const Eigen::MatrixXd& X, const IsaLayer& layer, double smooth_eps) {
  check_layer(layer);
  if (X.rows() == 0) throw std::invalid_argument("isa_loss: empty batch");
  if (X.cols() != layer.W.cols())
    throw std::invalid_argument("isa_loss: input dimension mismatch");
  Eigen::MatrixXd A = X * layer.W.transpose();
  Eigen::MatrixXd S = group_square_sums(A, layer.group_size);
  return (S.array() + smooth_eps).sqrt().sum();
}

Eigen::MatrixXd isa_grad(const Eigen::MatrixXd& X, const IsaLayer& layer, double smooth_eps) {
  check_layer(layer);
  if (X.rows() == 0) throw std::invalid_argument("isa_grad: empty batch");
  if (X.cols() != layer.W.cols())
    throw std::invalid_argument("isa_grad: input dimension mismatch");
  Eigen::MatrixXd A = X * layer.W.transpose();  // T x m
  Eigen::MatrixXd S = group_square_sums(A, layer.group_size);
  Eigen::MatrixXd Sinv = (S.array() + smooth_eps).rsqrt();
  // Row k of the gradient: sum_t A_tk / p~_{t,g(k)} * X_t.
  Eigen::MatrixXd R(A.rows(), A.cols());
  for (Eigen::Index k = 0; k < A.cols(); ++k)
    R.col(k) = A.col(k).cwiseProduct(Sinv.col(k / layer.group_size));
  return R.transpose() * X;
}

Eigen::MatrixXd symmetric_orthonormalize(const Eigen::MatrixXd& W) {
  Eigen::MatrixXd M = W * W.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
  if (es.info() != Eigen::Success)
    throw NumericError("symmetric_orthonormalize: eigensolve failed");
  const Eigen::VectorXd& ev = es.eigenvalues();
  double max_ev = ev.maxCoeff();
  if (!(max_ev > 0.0) || ev.minCoeff() <= 1e-12 * max_ev)
    throw NumericError("symmetric_orthonormalize: rank-deficient W");
  Eigen::VectorXd inv_sqrt = ev.array().rsqrt();
  return es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose() * W;
}

IsaTrainResult train_isa(const Eigen::MatrixXd& whitened, int group_size,
                         const IsaTrainOpts& opts) {
  Eigen::Index T = whitened.rows();
  Eigen::Index n = whitened.cols();
  if (T == 0 || n == 0) throw std::invalid_argument("train_isa: empty data");
  if (group_size < 1 || n % group_size != 0)
    throw std::invalid_argument("train_isa: dim not divisible by group_size");
  if (!(opts.learning_rate > 0.0) || !(opts.smooth_eps > 0.0))
    throw std::invalid_argument("train_isa: learning_rate and smooth_eps must be positive");

  auto rng = make_rng(opts.seed, "isa_init");
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd G0(n, n);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < n; ++c) G0(r, c) = gauss(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(G0);
  Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);

  IsaLayer layer;
  layer.W = Q.transpose();
  layer.group_size = group_size;

  double inv_T = 1.0 / static_cast<double>(T);
  double loss = isa_loss(whitened, layer, opts.smooth_eps);
  if (!std::isfinite(loss)) throw NumericError("train_isa: non-finite initial loss");

  IsaTrainResult result;
  result.loss_curve.push_back(loss);
  double lr = opts.learning_rate;

  int B = opts.batch_size;
  bool full_batch = B <= 0 || B >= T;

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    if (full_batch) {
      Eigen::MatrixXd grad = isa_grad(whitened, layer, opts.smooth_eps) * inv_T;
      bool accepted = false;
      while (lr > 1e-14) {
        IsaLayer cand = layer;
        cand.W = symmetric_orthonormalize(layer.W - lr * grad);
        double cand_loss = isa_loss(whitened, cand, opts.smooth_eps);
        if (!std::isfinite(cand_loss)) throw NumericError("train_isa: loss diverged");
        if (cand_loss <= loss) {
          layer = std::move(cand);
          loss = cand_loss;
          accepted = true;
          lr = std::min(lr * 2.0, opts.learning_rate);
          break;
        }
        lr *= 0.5;
      }
      result.loss_curve.push_back(loss);
      if (!accepted) break;
    } else {
      // Minibatch epoch with rollback: redo the epoch at half step if the
      // full loss went up, keeping the recorded curve non-increasing.
      auto erng = make_rng(opts.seed, "isa_epoch_" + std::to_string(epoch));
      std::vector<Eigen::Index> perm(T);
      for (Eigen::Index i = 0; i < T; ++i) perm[i] = i;
      std::shuffle(perm.begin(), perm.end(), erng);

      bool accepted = false;
      while (lr > 1e-14) {
        IsaLayer cand = layer;
        for (Eigen::Index off = 0; off + B <= T; off += B) {
          Eigen::MatrixXd batch(B, n);
          for (int r = 0; r < B; ++r) batch.row(r) = whitened.row(perm[off + r]);
          Eigen::MatrixXd grad = isa_grad(batch, cand, opts.smooth_eps) / B;
          cand.W = symmetric_orthonormalize(cand.W - lr * grad);
        }
        double cand_loss = isa_loss(whitened, cand, opts.smooth_eps);
        if (!std::isfinite(cand_loss)) throw NumericError("train_isa: loss diverged");
        if (cand_loss <= loss) {
          layer = std::move(cand);
          loss = cand_loss;
          accepted = true;
          lr = std::min(lr * 2.0, opts.learning_rate);
          break;
        }
        lr *= 0.5;
      }
      result.loss_curve.push_back(loss);
      if (!accepted) break;
    }
  }

  result.layer = std::move(layer);
  return result;
}

}  // namespace vidfeat
