#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <string>
#include <vector>

namespace vidfeat {

// Per-instance decision values for K classes, with row/column labels.
struct ScoreMatrix {
  std::vector<std::string> class_names;   // K
  std::vector<std::string> instance_ids;  // N
  Eigen::MatrixXd scores;                 // N x K

  int num_instances() const { return static_cast<int>(scores.rows()); }
  int num_classes() const { return static_cast<int>(scores.cols()); }
};

// CSV layout: "id,<class names>" header, then one row per instance.
void save_scores_csv(const ScoreMatrix& scores, const std::filesystem::path& path);
ScoreMatrix load_scores_csv(const std::filesystem::path& path);

// Row-wise argmax; ties go to the lowest class index.
std::vector<int> row_argmax(const Eigen::MatrixXd& scores);

// Mean over classes of within-class accuracy under row-argmax prediction.
double eval_macc(const ScoreMatrix& scores, const std::vector<int>& truth);

// Mean over classes of average precision; precision is evaluated at each
// positive's rank, ranking each column descending with ties broken by
// instance order. Multi-label truth lists every relevant class per instance.
double eval_map(const ScoreMatrix& scores, const std::vector<std::vector<int>>& truth);
double eval_map(const ScoreMatrix& scores, const std::vector<int>& truth);

}  // namespace vidfeat
