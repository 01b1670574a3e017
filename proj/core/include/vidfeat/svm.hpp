#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "vidfeat/scores.hpp"

namespace vidfeat {

struct LinearModel {
  Eigen::VectorXd w;
  double b = 0.0;

  double decision(const Eigen::VectorXd& x) const { return w.dot(x) + b; }
};

struct SvmTrainOpts {
  double C = 100.0;
  double gap_tol = 1e-3;  // stop at duality gap <= gap_tol * C * N
  int max_epochs = 10000;
  std::uint64_t seed = 0;
};

// L1-loss SVM by dual coordinate descent over seeded per-epoch permutations.
// The bias rides along as an implicit all-ones feature.
LinearModel svm_train(const Eigen::MatrixXd& X, const std::vector<int>& y,
                      const SvmTrainOpts& opts = {});

// One binary model per class (that class vs the rest).
std::vector<LinearModel> ova_train(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                                   int num_classes, const SvmTrainOpts& opts = {});

Eigen::MatrixXd ova_decision(const std::vector<LinearModel>& models, const Eigen::MatrixXd& X);

// Raw decision values; default labels are class_<k> and the row index.
ScoreMatrix ova_predict(const std::vector<LinearModel>& models, const Eigen::MatrixXd& X,
                        std::vector<std::string> class_names = {},
                        std::vector<std::string> instance_ids = {});

// Tensor container plus a "<path>.classes" text sidecar for the names.
void save_svm(const std::vector<LinearModel>& models, const std::vector<std::string>& class_names,
              const std::filesystem::path& path);
std::pair<std::vector<LinearModel>, std::vector<std::string>> load_svm(
    const std::filesystem::path& path);

}  // namespace vidfeat
