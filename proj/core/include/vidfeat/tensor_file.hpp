#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vidfeat/error.hpp"

namespace vidfeat {

// Dense float32 tensor with a name and shape. Values are row-major
// (last index fastest).
struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> shape;
  std::vector<float> values;

  std::size_t element_count() const;
};

// Container of named tensors, serialized to the TCN1 binary format:
// magic "TCN1", u16 version, u32 tensor count, a table of
// (name, dtype, shape, byte offset) entries, then tightly packed
// little-endian float32 payloads in table order.
class TensorFile {
 public:
  void add(std::string name, std::vector<std::uint32_t> shape, std::vector<float> values);
  void add_matrix(const std::string& name, const Eigen::MatrixXd& m);
  void add_vector(const std::string& name, const Eigen::VectorXd& v);

  bool has(const std::string& name) const;
  const NamedTensor& get(const std::string& name) const;
  Eigen::MatrixXd matrix(const std::string& name) const;
  Eigen::VectorXd vector(const std::string& name) const;

  const std::vector<NamedTensor>& tensors() const { return tensors_; }

  void save(const std::filesystem::path& path) const;
  static TensorFile load(const std::filesystem::path& path);

 private:
  std::vector<NamedTensor> tensors_;
};

}  // namespace vidfeat
