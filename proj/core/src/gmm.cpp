#include "vidfeat/gmm.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "vidfeat/error.hpp"
#include "vidfeat/rng.hpp"

namespace vidfeat {
namespace {

constexpr double kLog2Pi = 1.8378770664093453;

// Log density of every sample under every component, N x K.
Eigen::MatrixXd component_log_densities(const GmmModel& m, const Eigen::MatrixXd& X) {
  Eigen::Index N = X.rows();
  int K = m.components();
  Eigen::MatrixXd L(N, K);
  for (int k = 0; k < K; ++k) {
    Eigen::ArrayXd var = m.variances.row(k).transpose().array();
    double log_norm = -0.5 * (m.dim() * kLog2Pi + var.log().sum());
    Eigen::ArrayXd inv_var = var.inverse();
    for (Eigen::Index n = 0; n < N; ++n) {
      Eigen::ArrayXd d = X.row(n).transpose().array() - m.means.row(k).transpose().array();
      L(n, k) = log_norm - 0.5 * (d.square() * inv_var).sum();
    }
  }
  return L;
}

// In-place: rows of (log w_k + log N_k) -> responsibilities; returns the
// mean per-sample log-likelihood.
double normalize_log_rows(Eigen::MatrixXd& L) {
  double total = 0.0;
  for (Eigen::Index n = 0; n < L.rows(); ++n) {
    double mx = L.row(n).maxCoeff();
    double sum = (L.row(n).array() - mx).exp().sum();
    double lse = mx + std::log(sum);
    total += lse;
    L.row(n) = (L.row(n).array() - lse).exp();
  }
  return total / static_cast<double>(L.rows());
}

std::vector<Eigen::Index> kmeanspp_seeds(const Eigen::MatrixXd& X, int K,
                                         std::mt19937_64& rng) {
  Eigen::Index N = X.rows();
  std::vector<Eigen::Index> centers;
  std::uniform_int_distribution<Eigen::Index> first(0, N - 1);
  centers.push_back(first(rng));
  Eigen::VectorXd d2 = (X.rowwise() - X.row(centers[0])).rowwise().squaredNorm();
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  while (static_cast<int>(centers.size()) < K) {
    double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      double r = uni(rng) * total;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < N; ++i) {
        acc += d2(i);
        if (acc >= r) {
          pick = i;
          break;
        }
      }
    } else {
      pick = first(rng);
    }
    centers.push_back(pick);
    d2 = d2.cwiseMin((X.rowwise() - X.row(pick)).rowwise().squaredNorm());
  }
  return centers;
}

}  // namespace

Eigen::MatrixXd gmm_posteriors(const GmmModel& model, const Eigen::MatrixXd& X,
                               double* mean_log_likelihood) {
  if (X.cols() != model.dim())
    throw std::invalid_argument("gmm_posteriors: dimension mismatch");
  Eigen::MatrixXd L = component_log_densities(model, X);
  for (int k = 0; k < model.components(); ++k)
    L.col(k).array() += std::log(model.weights(k));
  double ll = normalize_log_rows(L);
  if (mean_log_likelihood) *mean_log_likelihood = ll;
  return L;
}

GmmTrainResult gmm_train(const Eigen::MatrixXd& samples, int K, const GmmTrainOpts& opts) {
  Eigen::Index S = samples.rows();
  Eigen::Index D = samples.cols();
  if (K < 1) throw std::invalid_argument("gmm_train: K must be >= 1");
  if (S < 10 * static_cast<Eigen::Index>(K))
    throw std::invalid_argument("gmm_train: need at least 10*K samples");

  Eigen::VectorXd data_mean = samples.colwise().mean();
  Eigen::VectorXd data_var =
      ((samples.rowwise() - data_mean.transpose()).array().square().colwise().sum() /
       static_cast<double>(S))
          .transpose();
  double floor = 1e-4 * data_var.mean();
  if (!(floor > 0.0)) floor = 1e-12;

  auto rng = make_rng(opts.seed, "gmm_train");
  std::vector<Eigen::Index> seeds = kmeanspp_seeds(samples, K, rng);

  Eigen::MatrixXd centers(K, D);
  for (int k = 0; k < K; ++k) centers.row(k) = samples.row(seeds[k]);

  // A few Lloyd rounds to settle the seeds.
  std::vector<int> assign(S, 0);
  for (int round = 0; round < 10; ++round) {
    for (Eigen::Index n = 0; n < S; ++n) {
      double best = std::numeric_limits<double>::max();
      for (int k = 0; k < K; ++k) {
        double d = (samples.row(n) - centers.row(k)).squaredNorm();
        if (d < best) {
          best = d;
          assign[n] = k;
        }
      }
    }
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(K, D);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(K);
    for (Eigen::Index n = 0; n < S; ++n) {
      sums.row(assign[n]) += samples.row(n);
      counts(assign[n]) += 1.0;
    }
    for (int k = 0; k < K; ++k)
      if (counts(k) > 0.0) centers.row(k) = sums.row(k) / counts(k);
  }

  GmmModel m;
  m.means = centers;
  m.weights = Eigen::VectorXd::Constant(K, 1.0 / K);
  m.variances = data_var.transpose().replicate(K, 1).cwiseMax(floor);

  GmmTrainResult result;
  bool reinitialized = false;
  double prev_ll = -std::numeric_limits<double>::infinity();
  Eigen::MatrixXd X2 = samples.cwiseAbs2();
  for (int iter = 0; iter < opts.max_iters; ++iter) {
    double ll;
    Eigen::MatrixXd R = gmm_posteriors(m, samples, &ll);
    if (!std::isfinite(ll)) throw NumericError("gmm_train: log-likelihood diverged");
    result.log_likelihood.push_back(ll);

    Eigen::VectorXd Nk = R.colwise().sum();
    int collapsed = -1;
    for (int k = 0; k < K; ++k)
      if (Nk(k) < 1e-8 * static_cast<double>(S)) collapsed = k;
    if (collapsed >= 0) {
      if (reinitialized)
        throw NumericError("gmm_train: component collapsed twice");
      reinitialized = true;
      // Restart the component at the sample the model explains worst.
      Eigen::MatrixXd L = component_log_densities(m, samples);
      Eigen::Index worst;
      L.rowwise().maxCoeff().minCoeff(&worst);
      m.means.row(collapsed) = samples.row(worst);
      m.variances.row(collapsed) = data_var.transpose().cwiseMax(floor);
      m.weights = Eigen::VectorXd::Constant(K, 1.0 / K);
      prev_ll = -std::numeric_limits<double>::infinity();
      continue;
    }

    m.weights = Nk / static_cast<double>(S);
    Eigen::MatrixXd Sx = R.transpose() * samples;
    Eigen::MatrixXd Sxx = R.transpose() * X2;
    for (int k = 0; k < K; ++k) {
      Eigen::RowVectorXd mu = Sx.row(k) / Nk(k);
      Eigen::RowVectorXd ex2 = Sxx.row(k) / Nk(k);
      m.means.row(k) = mu;
      m.variances.row(k) = (ex2 - mu.cwiseAbs2()).cwiseMax(floor);
    }

    if (iter > 0 && ll - prev_ll < opts.tol) break;
    prev_ll = ll;
  }
  result.model = std::move(m);
  return result;
}

}  // namespace vidfeat
