#include "vidfeat/config.hpp"

#include <climits>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "vidfeat/error.hpp"

namespace vidfeat {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw ConfigError("config key '" + key + "' has bad value '" + value + "'");
}

long long parse_ll(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    long long v = std::stoll(value, &used);
    if (used != value.size()) bad_value(key, value);
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    bad_value(key, value);
  }
}

int parse_int(const std::string& key, const std::string& value) {
  long long v = parse_ll(key, value);
  if (v < INT_MIN || v > INT_MAX) bad_value(key, value);
  return static_cast<int>(v);
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    std::uint64_t v = std::stoull(value, &used);
    if (used != value.size() || value[0] == '-') bad_value(key, value);
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    bad_value(key, value);
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    double v = std::stod(value, &used);
    if (used != value.size() || !std::isfinite(v)) bad_value(key, value);
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    bad_value(key, value);
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value);
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  std::size_t pos = 0;
  while (pos <= value.size()) {
    std::size_t comma = value.find(',', pos);
    std::string item = trim(comma == std::string::npos ? value.substr(pos)
                                                       : value.substr(pos, comma - pos));
    if (item.empty()) bad_value(key, value);
    out.push_back(parse_int(key, item));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (out.empty()) bad_value(key, value);
  return out;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct KeyDef {
  const char* name;
  std::function<void(PipelineConfig&, const std::string&)> apply;
  std::function<std::string(const PipelineConfig&)> print;
};

const std::vector<KeyDef>& key_table() {
  static const std::vector<KeyDef> table = {
      {"seed", [](PipelineConfig& c, const std::string& v) { c.seed = parse_u64("seed", v); },
       [](const PipelineConfig& c) { return std::to_string(c.seed); }},
      {"pyramid.scales",
       [](PipelineConfig& c, const std::string& v) { c.pyramid_scales = parse_int("pyramid.scales", v); },
       [](const PipelineConfig& c) { return std::to_string(c.pyramid_scales); }},
      {"pyramid.factor",
       [](PipelineConfig& c, const std::string& v) { c.pyramid_factor = parse_double("pyramid.factor", v); },
       [](const PipelineConfig& c) { return fmt_double(c.pyramid_factor); }},
      {"flow.levels",
       [](PipelineConfig& c, const std::string& v) { c.flow.pyramid_levels = parse_int("flow.levels", v); },
       [](const PipelineConfig& c) { return std::to_string(c.flow.pyramid_levels); }},
      {"flow.radius",
       [](PipelineConfig& c, const std::string& v) { c.flow.window_radius = parse_int("flow.radius", v); },
       [](const PipelineConfig& c) { return std::to_string(c.flow.window_radius); }},
      {"flow.iterations",
       [](PipelineConfig& c, const std::string& v) { c.flow.iterations = parse_int("flow.iterations", v); },
       [](const PipelineConfig& c) { return std::to_string(c.flow.iterations); }},
      {"flow.sigma",
       [](PipelineConfig& c, const std::string& v) { c.flow.sigma = static_cast<float>(parse_double("flow.sigma", v)); },
       [](const PipelineConfig& c) { return fmt_double(c.flow.sigma); }},
      {"stabilize.enabled",
       [](PipelineConfig& c, const std::string& v) { c.stabilize_enabled = parse_bool("stabilize.enabled", v); },
       [](const PipelineConfig& c) { return std::string(c.stabilize_enabled ? "true" : "false"); }},
      {"stabilize.grid_step",
       [](PipelineConfig& c, const std::string& v) { c.stabilize_grid_step = parse_int("stabilize.grid_step", v); },
       [](const PipelineConfig& c) { return std::to_string(c.stabilize_grid_step); }},
      {"track.step",
       [](PipelineConfig& c, const std::string& v) { c.track.step = parse_int("track.step", v); },
       [](const PipelineConfig& c) { return std::to_string(c.track.step); }},
      {"track.texture_threshold",
       [](PipelineConfig& c, const std::string& v) {
         c.track.texture_threshold = static_cast<float>(parse_double("track.texture_threshold", v));
       },
       [](const PipelineConfig& c) { return fmt_double(c.track.texture_threshold); }},
      {"track.refresh",
       [](PipelineConfig& c, const std::string& v) { c.track.refresh = parse_int("track.refresh", v); },
       [](const PipelineConfig& c) { return std::to_string(c.track.refresh); }},
      {"track.static_tol",
       [](PipelineConfig& c, const std::string& v) {
         c.track.static_tol = static_cast<float>(parse_double("track.static_tol", v));
       },
       [](const PipelineConfig& c) { return fmt_double(c.track.static_tol); }},
      {"track.max_jump",
       [](PipelineConfig& c, const std::string& v) {
         c.track.max_jump = static_cast<float>(parse_double("track.max_jump", v));
       },
       [](const PipelineConfig& c) { return fmt_double(c.track.max_jump); }},
      {"hof.zero_thresh",
       [](PipelineConfig& c, const std::string& v) {
         c.hof_zero_thresh = static_cast<float>(parse_double("hof.zero_thresh", v));
       },
       [](const PipelineConfig& c) { return fmt_double(c.hof_zero_thresh); }},
      {"descriptors.root_sift",
       [](PipelineConfig& c, const std::string& v) { c.root_sift = parse_bool("descriptors.root_sift", v); },
       [](const PipelineConfig& c) { return std::string(c.root_sift ? "true" : "false"); }},
      {"descriptors.xyt",
       [](PipelineConfig& c, const std::string& v) { c.xyt = parse_bool("descriptors.xyt", v); },
       [](const PipelineConfig& c) { return std::string(c.xyt ? "true" : "false"); }},
      {"convisa.rf_spatial",
       [](PipelineConfig& c, const std::string& v) { c.convisa.rf_spatial = parse_int("convisa.rf_spatial", v); },
       [](const PipelineConfig& c) { return std::to_string(c.convisa.rf_spatial); }},
      {"convisa.rf_temporal",
       [](PipelineConfig& c, const std::string& v) { c.convisa.rf_temporal = parse_int("convisa.rf_temporal", v); },
       [](const PipelineConfig& c) { return std::to_string(c.convisa.rf_temporal); }},
      {"convisa.stride_spatial",
       [](PipelineConfig& c, const std::string& v) {
         c.convisa.stride_spatial = parse_int("convisa.stride_spatial", v);
       },
       [](const PipelineConfig& c) { return std::to_string(c.convisa.stride_spatial); }},
      {"convisa.stride_temporal",
       [](PipelineConfig& c, const std::string& v) {
         c.convisa.stride_temporal = parse_int("convisa.stride_temporal", v);
       },
       [](const PipelineConfig& c) { return std::to_string(c.convisa.stride_temporal); }},
      {"convisa.pca1",
       [](PipelineConfig& c, const std::string& v) { c.convisa.pca1_dim = parse_int("convisa.pca1", v); },
       [](const PipelineConfig& c) { return std::to_string(c.convisa.pca1_dim); }},
      {"convisa.group1",
       [](PipelineConfig& c, const std::string& v) { c.convisa.group1 = parse_int("convisa.group1", v); },
       [](const PipelineConfig& c) { return std::to_string(c.convisa.group1); }},
      {"convisa.pca2",
       [](PipelineConfig& c, const std::string& v) { c.convisa.output_dim = parse_int("convisa.pca2", v); },
       [](const PipelineConfig& c) { return std::to_string(c.convisa.output_dim); }},
      {"convisa.group2",
       [](PipelineConfig& c, const std::string& v) { c.convisa.group2 = parse_int("convisa.group2", v); },
       [](const PipelineConfig& c) { return std::to_string(c.convisa.group2); }},
      {"convisa.samples",
       [](PipelineConfig& c, const std::string& v) { c.convisa_samples = parse_int("convisa.samples", v); },
       [](const PipelineConfig& c) { return std::to_string(c.convisa_samples); }},
      {"convisa.isa_lr",
       [](PipelineConfig& c, const std::string& v) { c.isa.learning_rate = parse_double("convisa.isa_lr", v); },
       [](const PipelineConfig& c) { return fmt_double(c.isa.learning_rate); }},
      {"convisa.isa_epochs",
       [](PipelineConfig& c, const std::string& v) { c.isa.epochs = parse_int("convisa.isa_epochs", v); },
       [](const PipelineConfig& c) { return std::to_string(c.isa.epochs); }},
      {"convisa.isa_batch",
       [](PipelineConfig& c, const std::string& v) { c.isa.batch_size = parse_int("convisa.isa_batch", v); },
       [](const PipelineConfig& c) { return std::to_string(c.isa.batch_size); }},
      {"convisa.isa_eps",
       [](PipelineConfig& c, const std::string& v) { c.isa.smooth_eps = parse_double("convisa.isa_eps", v); },
       [](const PipelineConfig& c) { return fmt_double(c.isa.smooth_eps); }},
      {"encode.k",
       [](PipelineConfig& c, const std::string& v) { c.encode_k = parse_int("encode.k", v); },
       [](const PipelineConfig& c) { return std::to_string(c.encode_k); }},
      {"encode.alpha",
       [](PipelineConfig& c, const std::string& v) { c.encode_alpha = parse_double("encode.alpha", v); },
       [](const PipelineConfig& c) { return fmt_double(c.encode_alpha); }},
      {"encode.max_samples",
       [](PipelineConfig& c, const std::string& v) { c.encode_max_samples = parse_int("encode.max_samples", v); },
       [](const PipelineConfig& c) { return std::to_string(c.encode_max_samples); }},
      {"encode.whiten",
       [](PipelineConfig& c, const std::string& v) { c.encode_whiten = parse_bool("encode.whiten", v); },
       [](const PipelineConfig& c) { return std::string(c.encode_whiten ? "true" : "false"); }},
      {"encode.mifs_skips",
       [](PipelineConfig& c, const std::string& v) { c.mifs_skips = parse_int_list("encode.mifs_skips", v); },
       [](const PipelineConfig& c) {
         std::string s;
         for (std::size_t i = 0; i < c.mifs_skips.size(); ++i)
           s += (i ? "," : "") + std::to_string(c.mifs_skips[i]);
         return s;
       }},
      {"svm.c",
       [](PipelineConfig& c, const std::string& v) { c.svm_c = parse_double("svm.c", v); },
       [](const PipelineConfig& c) { return fmt_double(c.svm_c); }},
      {"mir.eta",
       [](PipelineConfig& c, const std::string& v) { c.mir.eta = parse_double("mir.eta", v); },
       [](const PipelineConfig& c) { return fmt_double(c.mir.eta); }},
      {"mir.alpha",
       [](PipelineConfig& c, const std::string& v) { c.mir.alpha = parse_double("mir.alpha", v); },
       [](const PipelineConfig& c) { return fmt_double(c.mir.alpha); }},
      {"mir.iters",
       [](PipelineConfig& c, const std::string& v) { c.mir.max_iters = parse_int("mir.iters", v); },
       [](const PipelineConfig& c) { return std::to_string(c.mir.max_iters); }},
      {"mir.tol",
       [](PipelineConfig& c, const std::string& v) { c.mir.convergence_tol = parse_double("mir.tol", v); },
       [](const PipelineConfig& c) { return fmt_double(c.mir.convergence_tol); }},
  };
  return table;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError("config violates: " + message);
}

}  // namespace

void PipelineConfig::validate() const {
  require(pyramid_scales >= 1, "pyramid.scales >= 1");
  require(pyramid_factor > 0.0 && pyramid_factor <= 1.0, "pyramid.factor in (0, 1]");
  require(flow.pyramid_levels >= 1, "flow.levels >= 1");
  require(flow.window_radius >= 1, "flow.radius >= 1");
  require(flow.iterations >= 1, "flow.iterations >= 1");
  require(flow.sigma > 0.0f, "flow.sigma > 0");
  require(stabilize_grid_step >= 1, "stabilize.grid_step >= 1");
  require(track.step >= 1, "track.step >= 1");
  require(track.texture_threshold >= 0.0f && track.texture_threshold <= 1.0f,
          "track.texture_threshold in [0, 1]");
  require(track.refresh >= 1, "track.refresh >= 1");
  require(track.static_tol >= 0.0f, "track.static_tol >= 0");
  require(track.max_jump > 0.0f, "track.max_jump > 0");
  require(hof_zero_thresh >= 0.0f, "hof.zero_thresh >= 0");
  convisa.validate(stream_channels(Stream::pixel));
  convisa.validate(stream_channels(Stream::flow));
  require(convisa_samples >= 1, "convisa.samples >= 1");
  require(isa.learning_rate > 0.0, "convisa.isa_lr > 0");
  require(isa.epochs >= 1, "convisa.isa_epochs >= 1");
  require(isa.batch_size >= 0, "convisa.isa_batch >= 0");
  require(isa.smooth_eps > 0.0, "convisa.isa_eps > 0");
  require(encode_k >= 1, "encode.k >= 1");
  require(encode_alpha > 0.0 && encode_alpha <= 1.0, "encode.alpha in (0, 1]");
  require(encode_max_samples >= 1, "encode.max_samples >= 1");
  require(!mifs_skips.empty(), "encode.mifs_skips nonempty");
  for (int s : mifs_skips) require(s >= 0, "encode.mifs_skips >= 0");
  require(svm_c > 0.0, "svm.c > 0");
  require(mir.alpha > 0.0, "mir.alpha > 0");
  require(mir.eta > 0.0 && mir.eta <= 1.0, "mir.eta in (0, 1]");
  require(mir.max_iters >= 1, "mir.iters >= 1");
  require(mir.convergence_tol >= 0.0, "mir.tol >= 0");
}

PipelineConfig parse_config(const std::string& text) {
  PipelineConfig cfg;
  std::set<std::string> seen;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + " is not key=value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("config line " + std::to_string(lineno) + " has empty key or value");
    if (!seen.insert(key).second) throw ConfigError("duplicate config key '" + key + "'");
    bool found = false;
    for (const KeyDef& def : key_table()) {
      if (key == def.name) {
        def.apply(cfg, value);
        found = true;
        break;
      }
    }
    if (!found) throw ConfigError("unknown config key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError(IoError::Kind::missing_file, "cannot open config: " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_string(const PipelineConfig& cfg) {
  std::string out = "# vidfeat pipeline configuration\n";
  for (const KeyDef& def : key_table()) out += std::string(def.name) + " = " + def.print(cfg) + "\n";
  return out;
}

void save_config(const PipelineConfig& cfg, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError(IoError::Kind::missing_file, "cannot open for write: " + path.string());
  os << config_to_string(cfg);
}

}  // namespace vidfeat
