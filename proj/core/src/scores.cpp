#include "vidfeat/scores.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "vidfeat/error.hpp"

namespace vidfeat {

namespace {

void check_label(const std::string& s, const char* what) {
  if (s.empty() || s.find_first_of(",\r\n") != std::string::npos)
    throw std::invalid_argument(std::string(what) + " must be nonempty and comma-free: '" + s + "'");
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t pos = 0;
  while (true) {
    std::size_t comma = line.find(',', pos);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(pos));
      return fields;
    }
    fields.push_back(line.substr(pos, comma - pos));
    pos = comma + 1;
  }
}

}  // namespace

void save_scores_csv(const ScoreMatrix& sm, const std::filesystem::path& path) {
  int n = sm.num_instances();
  int k = sm.num_classes();
  if (n < 1 || k < 1) throw std::invalid_argument("save_scores_csv: empty score matrix");
  if (static_cast<int>(sm.class_names.size()) != k ||
      static_cast<int>(sm.instance_ids.size()) != n)
    throw std::invalid_argument("save_scores_csv: label counts do not match matrix shape");
  if (!sm.scores.allFinite()) throw std::invalid_argument("save_scores_csv: non-finite score");

  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError(IoError::Kind::missing_file, "cannot open for write: " + path.string());
  os << "id";
  for (const std::string& name : sm.class_names) {
    check_label(name, "class name");
    os << ',' << name;
  }
  os << '\n';
  char buf[32];
  for (int i = 0; i < n; ++i) {
    check_label(sm.instance_ids[i], "instance id");
    os << sm.instance_ids[i];
    for (int j = 0; j < k; ++j) {
      std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(static_cast<float>(sm.scores(i, j))));
      os << ',' << buf;
    }
    os << '\n';
  }
  if (!os) throw IoError(IoError::Kind::truncated_payload, "short write: " + path.string());
}

ScoreMatrix load_scores_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError(IoError::Kind::missing_file, "cannot open: " + path.string());
  std::string line;
  if (!std::getline(is, line))
    throw IoError(IoError::Kind::corrupt_header, "empty score CSV: " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header = split_csv(line);
  if (header.size() < 2 || header[0] != "id")
    throw IoError(IoError::Kind::corrupt_header, "score CSV header must be 'id,<classes>'");

  ScoreMatrix sm;
  sm.class_names.assign(header.begin() + 1, header.end());
  int k = static_cast<int>(sm.class_names.size());
  std::vector<double> values;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields = split_csv(line);
    if (static_cast<int>(fields.size()) != k + 1)
      throw IoError(IoError::Kind::bad_format,
                    "score CSV row has " + std::to_string(fields.size()) + " fields, expected " +
                        std::to_string(k + 1));
    sm.instance_ids.push_back(fields[0]);
    for (int j = 1; j <= k; ++j) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(fields[j], &used);
      } catch (const std::exception&) {
        throw IoError(IoError::Kind::bad_format, "score CSV has non-numeric field: " + fields[j]);
      }
      if (used != fields[j].size() || !std::isfinite(v))
        throw IoError(IoError::Kind::bad_format, "score CSV has bad value: " + fields[j]);
      values.push_back(v);
    }
  }
  int n = static_cast<int>(sm.instance_ids.size());
  if (n < 1) throw IoError(IoError::Kind::bad_format, "score CSV has no data rows");
  sm.scores.resize(n, k);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) sm.scores(i, j) = values[std::size_t(i) * k + j];
  return sm;
}

std::vector<int> row_argmax(const Eigen::MatrixXd& scores) {
  std::vector<int> out(scores.rows());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    int best = 0;
    for (Eigen::Index j = 1; j < scores.cols(); ++j)
      if (scores(i, j) > scores(i, best)) best = static_cast<int>(j);
    out[i] = best;
  }
  return out;
}

double eval_macc(const ScoreMatrix& sm, const std::vector<int>& truth) {
  int n = sm.num_instances();
  int k = sm.num_classes();
  if (static_cast<int>(truth.size()) != n)
    throw std::invalid_argument("eval_macc: truth size mismatch");
  std::vector<int> total(k, 0), correct(k, 0);
  std::vector<int> pred = row_argmax(sm.scores);
  for (int i = 0; i < n; ++i) {
    if (truth[i] < 0 || truth[i] >= k)
      throw std::invalid_argument("eval_macc: truth label out of range");
    ++total[truth[i]];
    if (pred[i] == truth[i]) ++correct[truth[i]];
  }
  double acc = 0.0;
  for (int c = 0; c < k; ++c) {
    if (total[c] == 0)
      throw std::invalid_argument("eval_macc: class " + std::to_string(c) + " has no instances");
    acc += static_cast<double>(correct[c]) / total[c];
  }
  return acc / k;
}

double eval_map(const ScoreMatrix& sm, const std::vector<std::vector<int>>& truth) {
  int n = sm.num_instances();
  int k = sm.num_classes();
  if (static_cast<int>(truth.size()) != n)
    throw std::invalid_argument("eval_map: truth size mismatch");
  std::vector<std::vector<char>> relevant(n, std::vector<char>(k, 0));
  for (int i = 0; i < n; ++i)
    for (int c : truth[i]) {
      if (c < 0 || c >= k) throw std::invalid_argument("eval_map: truth label out of range");
      relevant[i][c] = 1;
    }

  double map = 0.0;
  for (int c = 0; c < k; ++c) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return sm.scores(a, c) > sm.scores(b, c); });
    int seen = 0;
    double ap = 0.0;
    for (int rank = 1; rank <= n; ++rank) {
      if (relevant[order[rank - 1]][c]) {
        ++seen;
        ap += static_cast<double>(seen) / rank;
      }
    }
    if (seen == 0)
      throw std::invalid_argument("eval_map: class " + std::to_string(c) + " has no positives");
    map += ap / seen;
  }
  return map / k;
}

double eval_map(const ScoreMatrix& sm, const std::vector<int>& truth) {
  std::vector<std::vector<int>> multi(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) multi[i] = {truth[i]};
  return eval_map(sm, multi);
}

}  // namespace vidfeat
