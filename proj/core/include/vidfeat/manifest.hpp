#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace vidfeat {

struct ManifestEntry {
  std::string path;  // doubles as the instance id
  std::vector<std::string> labels;
  bool is_test = false;
};

// Text format, one record per line:
//   class <name>
//   train <path> <label>[,<label>...]
//   test  <path> <label>[,<label>...]
struct DatasetManifest {
  std::vector<std::string> classes;
  std::vector<ManifestEntry> entries;

  int label_index(const std::string& name) const;  // -1 when unknown
  std::vector<ManifestEntry> split(bool test) const;

  void validate() const;
};

DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

}  // namespace vidfeat
