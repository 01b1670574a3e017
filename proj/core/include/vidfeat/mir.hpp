#pragma once

#include <vector>

#include "vidfeat/scores.hpp"

namespace vidfeat {

struct MirParams {
  double eta = 0.5;    // annealing factor in (0, 1]
  double alpha = 1.0;  // competitor weight decay, > 0
  int max_iters = 5;   // W; at most W-1 update steps run
  double convergence_tol = 1e-9;

  void validate() const;
};

struct MirResult {
  ScoreMatrix scores;
  int iterations_used = 0;          // update steps actually applied
  std::vector<double> max_changes;  // max |delta| per applied step
};

// Iteratively suppresses each score by the exponentially weighted sum of the
// row's other scores sorted descending, annealed by eta per iteration.
// Updates within an iteration all read the previous iteration's matrix.
MirResult mir_rerank(const ScoreMatrix& scores, const MirParams& params = {});

// Min-max scales each re-ranked column to [0,1], z-scores it (std floor
// 1e-12), and adds the original scores.
ScoreMatrix rank_score_fuse(const ScoreMatrix& reranked, const ScoreMatrix& original);

}  // namespace vidfeat
