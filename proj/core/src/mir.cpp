#include "vidfeat/mir.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace vidfeat {

void MirParams::validate() const {
  if (!(alpha > 0.0)) throw std::invalid_argument("mir: alpha must be > 0");
  if (!(eta > 0.0 && eta <= 1.0)) throw std::invalid_argument("mir: eta must be in (0, 1]");
  if (max_iters < 1) throw std::invalid_argument("mir: max_iters must be >= 1");
  if (!(convergence_tol >= 0.0)) throw std::invalid_argument("mir: convergence_tol must be >= 0");
}

MirResult mir_rerank(const ScoreMatrix& sm, const MirParams& params) {
  params.validate();
  int n = sm.num_instances();
  int k = sm.num_classes();
  if (k < 2) throw std::invalid_argument("mir_rerank: need at least 2 classes");
  if (!sm.scores.allFinite()) throw std::invalid_argument("mir_rerank: non-finite score");

  std::vector<double> decay(k);  // decay[r] for competitor rank r = 1..K-1
  for (int r = 1; r < k; ++r) decay[r] = std::exp(-params.alpha * r);

  MirResult result;
  result.scores = sm;
  Eigen::MatrixXd cur = sm.scores;
  Eigen::MatrixXd next(n, k);
  std::vector<double> others(k - 1);

  double anneal = 1.0;  // eta^(w-1)
  for (int w = 1; w < params.max_iters; ++w) {
    double max_change = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < k; ++j) {
        int m = 0;
        for (int c = 0; c < k; ++c)
          if (c != j) others[m++] = cur(i, c);
        std::sort(others.begin(), others.end(), std::greater<>());
        double penalty = 0.0;
        for (int r = 1; r < k; ++r) penalty += decay[r] * others[r - 1];
        next(i, j) = cur(i, j) - anneal * penalty;
        max_change = std::max(max_change, std::abs(next(i, j) - cur(i, j)));
      }
    }
    cur.swap(next);
    ++result.iterations_used;
    result.max_changes.push_back(max_change);
    if (max_change < params.convergence_tol) break;
    anneal *= params.eta;
  }
  result.scores.scores = std::move(cur);
  return result;
}

ScoreMatrix rank_score_fuse(const ScoreMatrix& reranked, const ScoreMatrix& original) {
  if (reranked.scores.rows() != original.scores.rows() ||
      reranked.scores.cols() != original.scores.cols())
    throw std::invalid_argument("rank_score_fuse: shape mismatch");
  Eigen::Index n = original.scores.rows();

  ScoreMatrix out = original;
  for (Eigen::Index c = 0; c < original.scores.cols(); ++c) {
    Eigen::VectorXd col = reranked.scores.col(c);
    double lo = col.minCoeff();
    double hi = col.maxCoeff();
    if (hi > lo)
      col = (col.array() - lo) / (hi - lo);
    else
      col.setZero();
    double mean = col.mean();
    double sd = std::sqrt((col.array() - mean).square().sum() / static_cast<double>(n));
    sd = std::max(sd, 1e-12);
    out.scores.col(c) = ((col.array() - mean) / sd) + original.scores.col(c).array();
  }
  return out;
}

}  // namespace vidfeat
