#include "vidfeat/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "vidfeat/error.hpp"

namespace vidfeat {

int DatasetManifest::label_index(const std::string& name) const {
  auto it = std::find(classes.begin(), classes.end(), name);
  return it == classes.end() ? -1 : static_cast<int>(it - classes.begin());
}

std::vector<ManifestEntry> DatasetManifest::split(bool test) const {
  std::vector<ManifestEntry> out;
  for (const ManifestEntry& e : entries)
    if (e.is_test == test) out.push_back(e);
  return out;
}

void DatasetManifest::validate() const {
  if (classes.empty())
    throw IoError(IoError::Kind::bad_format, "manifest declares no classes");
  for (std::size_t i = 0; i < classes.size(); ++i)
    for (std::size_t j = i + 1; j < classes.size(); ++j)
      if (classes[i] == classes[j])
        throw IoError(IoError::Kind::bad_format, "manifest repeats class '" + classes[i] + "'");
  bool any_train = false, any_test = false;
  for (const ManifestEntry& e : entries) {
    (e.is_test ? any_test : any_train) = true;
    if (e.labels.empty())
      throw IoError(IoError::Kind::bad_format, "manifest entry '" + e.path + "' has no labels");
    for (const std::string& l : e.labels)
      if (label_index(l) < 0)
        throw IoError(IoError::Kind::bad_format,
                      "manifest entry '" + e.path + "' uses undeclared label '" + l + "'");
  }
  if (!any_train || !any_test)
    throw IoError(IoError::Kind::bad_format, "manifest needs nonempty train and test splits");
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError(IoError::Kind::missing_file, "cannot open manifest: " + path.string());
  DatasetManifest m;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    std::string where = path.string() + ":" + std::to_string(lineno);
    if (tag == "class") {
      std::string name, extra;
      if (!(ls >> name) || (ls >> extra))
        throw IoError(IoError::Kind::bad_format, "bad class line at " + where);
      m.classes.push_back(name);
    } else if (tag == "train" || tag == "test") {
      ManifestEntry e;
      e.is_test = tag == "test";
      std::string labels, extra;
      if (!(ls >> e.path >> labels) || (ls >> extra))
        throw IoError(IoError::Kind::bad_format, "bad " + tag + " line at " + where);
      std::size_t pos = 0;
      while (pos <= labels.size()) {
        std::size_t comma = labels.find(',', pos);
        std::string one =
            comma == std::string::npos ? labels.substr(pos) : labels.substr(pos, comma - pos);
        if (one.empty()) throw IoError(IoError::Kind::bad_format, "empty label at " + where);
        e.labels.push_back(one);
        if (comma == std::string::npos) break;
        pos = comma + 1;
      }
      m.entries.push_back(std::move(e));
    } else {
      throw IoError(IoError::Kind::bad_format, "unknown manifest tag '" + tag + "' at " + where);
    }
  }
  m.validate();
  return m;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  manifest.validate();
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError(IoError::Kind::missing_file, "cannot open for write: " + path.string());
  for (const std::string& c : manifest.classes) os << "class " << c << '\n';
  for (const ManifestEntry& e : manifest.entries) {
    os << (e.is_test ? "test " : "train ") << e.path << ' ';
    for (std::size_t i = 0; i < e.labels.size(); ++i) os << (i ? "," : "") << e.labels[i];
    os << '\n';
  }
}

}  // namespace vidfeat
