#include "vidfeat/svm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "vidfeat/error.hpp"
#include "vidfeat/rng.hpp"
#include "vidfeat/tensor_file.hpp"

namespace vidfeat {

LinearModel svm_train(const Eigen::MatrixXd& X, const std::vector<int>& y,
                      const SvmTrainOpts& opts) {
  Eigen::Index n = X.rows();
  Eigen::Index dim = X.cols();
  if (static_cast<Eigen::Index>(y.size()) != n)
    throw std::invalid_argument("svm_train: label count mismatch");
  if (opts.C <= 0.0) throw std::invalid_argument("svm_train: C must be positive");
  bool has_pos = false, has_neg = false;
  for (int yi : y) {
    if (yi == 1) has_pos = true;
    else if (yi == -1) has_neg = true;
    else throw std::invalid_argument("svm_train: labels must be +1 or -1");
  }
  if (!has_pos || !has_neg) throw std::invalid_argument("svm_train: both classes required");

  Eigen::VectorXd w = Eigen::VectorXd::Zero(dim);
  double b = 0.0;
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd qii(n);
  for (Eigen::Index i = 0; i < n; ++i) qii(i) = X.row(i).squaredNorm() + 1.0;

  std::vector<Eigen::Index> perm(n);
  std::iota(perm.begin(), perm.end(), Eigen::Index(0));
  auto rng = make_rng(opts.seed, "svm_perm");
  double gap_limit = opts.gap_tol * opts.C * static_cast<double>(n);

  for (int epoch = 0; epoch < opts.max_epochs; ++epoch) {
    std::shuffle(perm.begin(), perm.end(), rng);
    for (Eigen::Index i : perm) {
      double yi = y[i];
      double grad = yi * (X.row(i).dot(w) + b) - 1.0;
      double pg = grad;
      if (alpha(i) <= 0.0) pg = std::min(grad, 0.0);
      else if (alpha(i) >= opts.C) pg = std::max(grad, 0.0);
      if (pg == 0.0) continue;
      double a_new = std::clamp(alpha(i) - grad / qii(i), 0.0, opts.C);
      double delta = (a_new - alpha(i)) * yi;
      if (delta != 0.0) {
        w += delta * X.row(i).transpose();
        b += delta;
        alpha(i) = a_new;
      }
    }

    Eigen::VectorXd margins = X * w;
    double hinge = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      hinge += std::max(0.0, 1.0 - y[i] * (margins(i) + b));
    double wnorm2 = w.squaredNorm() + b * b;
    double primal = 0.5 * wnorm2 + opts.C * hinge;
    double dual = alpha.sum() - 0.5 * wnorm2;
    if (!std::isfinite(primal) || !std::isfinite(dual))
      throw NumericError("svm_train: objective diverged");
    if (primal - dual <= gap_limit) {
      if (!w.allFinite() || !std::isfinite(b)) throw NumericError("svm_train: non-finite model");
      return {std::move(w), b};
    }
  }
  throw NumericError("svm_train: duality gap tolerance not reached");
}

std::vector<LinearModel> ova_train(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                                   int num_classes, const SvmTrainOpts& opts) {
  if (num_classes < 2) throw std::invalid_argument("ova_train: need at least 2 classes");
  if (static_cast<Eigen::Index>(labels.size()) != X.rows())
    throw std::invalid_argument("ova_train: label count mismatch");
  std::vector<int> counts(num_classes, 0);
  for (int l : labels) {
    if (l < 0 || l >= num_classes) throw std::invalid_argument("ova_train: label out of range");
    ++counts[l];
  }
  for (int c = 0; c < num_classes; ++c)
    if (counts[c] == 0)
      throw std::invalid_argument("ova_train: class " + std::to_string(c) + " is empty");

  std::vector<LinearModel> models;
  models.reserve(num_classes);
  std::vector<int> y(labels.size());
  for (int c = 0; c < num_classes; ++c) {
    for (std::size_t i = 0; i < labels.size(); ++i) y[i] = labels[i] == c ? 1 : -1;
    SvmTrainOpts copts = opts;
    copts.seed = derive_seed(opts.seed, "ova_class_" + std::to_string(c));
    models.push_back(svm_train(X, y, copts));
  }
  return models;
}

Eigen::MatrixXd ova_decision(const std::vector<LinearModel>& models, const Eigen::MatrixXd& X) {
  if (models.empty()) throw std::invalid_argument("ova_decision: no models");
  Eigen::MatrixXd scores(X.rows(), static_cast<Eigen::Index>(models.size()));
  for (std::size_t k = 0; k < models.size(); ++k) {
    if (models[k].w.size() != X.cols())
      throw std::invalid_argument("ova_decision: feature dimension mismatch");
    scores.col(k) = (X * models[k].w).array() + models[k].b;
  }
  return scores;
}

ScoreMatrix ova_predict(const std::vector<LinearModel>& models, const Eigen::MatrixXd& X,
                        std::vector<std::string> class_names,
                        std::vector<std::string> instance_ids) {
  ScoreMatrix sm;
  sm.scores = ova_decision(models, X);
  if (class_names.empty())
    for (std::size_t k = 0; k < models.size(); ++k)
      class_names.push_back("class_" + std::to_string(k));
  if (instance_ids.empty())
    for (Eigen::Index i = 0; i < X.rows(); ++i) instance_ids.push_back(std::to_string(i));
  if (class_names.size() != models.size() ||
      static_cast<Eigen::Index>(instance_ids.size()) != X.rows())
    throw std::invalid_argument("ova_predict: label counts do not match data");
  sm.class_names = std::move(class_names);
  sm.instance_ids = std::move(instance_ids);
  return sm;
}

void save_svm(const std::vector<LinearModel>& models, const std::vector<std::string>& class_names,
              const std::filesystem::path& path) {
  if (models.empty() || models.size() != class_names.size())
    throw std::invalid_argument("save_svm: need one class name per model");
  Eigen::MatrixXd W(models.size(), models[0].w.size());
  Eigen::VectorXd bias(models.size());
  for (std::size_t k = 0; k < models.size(); ++k) {
    if (models[k].w.size() != W.cols())
      throw std::invalid_argument("save_svm: inconsistent model dimensions");
    W.row(k) = models[k].w.transpose();
    bias(k) = models[k].b;
  }
  TensorFile tf;
  tf.add_matrix("weights", W);
  tf.add_vector("bias", bias);
  tf.save(path);

  std::filesystem::path side = path;
  side += ".classes";
  std::ofstream os(side, std::ios::trunc);
  if (!os) throw IoError(IoError::Kind::missing_file, "cannot open for write: " + side.string());
  for (const std::string& name : class_names) {
    if (name.empty() || name.find_first_of(",\r\n") != std::string::npos)
      throw std::invalid_argument("save_svm: bad class name '" + name + "'");
    os << name << '\n';
  }
}

std::pair<std::vector<LinearModel>, std::vector<std::string>> load_svm(
    const std::filesystem::path& path) {
  TensorFile tf = TensorFile::load(path);
  Eigen::MatrixXd W;
  Eigen::VectorXd bias;
  try {
    W = tf.matrix("weights");
    bias = tf.vector("bias");
  } catch (const std::out_of_range& e) {
    throw IoError(IoError::Kind::bad_format, std::string("svm model file: ") + e.what());
  }
  if (W.rows() != bias.size() || W.rows() < 1)
    throw IoError(IoError::Kind::bad_format, "svm model tensors are inconsistent");

  std::filesystem::path side = path;
  side += ".classes";
  std::ifstream is(side);
  if (!is) throw IoError(IoError::Kind::missing_file, "missing class sidecar: " + side.string());
  std::vector<std::string> names;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) names.push_back(line);
  }
  if (static_cast<Eigen::Index>(names.size()) != W.rows())
    throw IoError(IoError::Kind::bad_format, "class sidecar count does not match model");

  std::vector<LinearModel> models(W.rows());
  for (Eigen::Index k = 0; k < W.rows(); ++k) {
    models[k].w = W.row(k).transpose();
    models[k].b = bias(k);
  }
  return {std::move(models), std::move(names)};
}

}  // namespace vidfeat
