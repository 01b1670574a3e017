#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include <vidfeat/config.hpp>
#include <vidfeat/error.hpp>
#include <vidfeat/manifest.hpp>

using namespace vidfeat;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("vf_cfg_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { std::error_code ec; fs::remove_all(path, ec); }
};

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::trunc);
  os << text;
}

void expect_config_error(const std::string& text, const std::string& needle) {
  try {
    parse_config(text);
    FAIL_CHECK("expected ConfigError for: " << text);
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find(needle) != std::string::npos);
  }
}

}  // namespace

TEST_CASE("default configuration is valid") {
  PipelineConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.seed == 0);
  CHECK(cfg.pyramid_scales == 8);
  CHECK(cfg.track.step == 5);
  CHECK(cfg.convisa.output_dim == 200);
  CHECK(cfg.encode_k == 256);
  CHECK(cfg.mifs_skips == std::vector<int>{0, 1, 2});
  CHECK(cfg.mir.max_iters == 5);
  CHECK_FALSE(cfg.stabilize_enabled);
  CHECK_FALSE(cfg.xyt);
  CHECK(cfg.root_sift);

  PipelineConfig parsed = parse_config("");
  CHECK(parsed.encode_k == cfg.encode_k);
  CHECK(parsed.pyramid_factor == cfg.pyramid_factor);
}

TEST_CASE("configuration text round trips exactly") {
  PipelineConfig cfg;
  cfg.seed = 12345;
  cfg.pyramid_scales = 3;
  cfg.pyramid_factor = 0.5;
  cfg.flow.iterations = 7;
  cfg.track.static_tol = 0.25f;
  cfg.root_sift = false;
  cfg.xyt = true;
  cfg.convisa.stride_spatial = 8;
  cfg.convisa.output_dim = 150;
  cfg.encode_alpha = 0.3;
  cfg.mifs_skips = {0, 2};
  cfg.svm_c = 10.0;
  cfg.mir.eta = 0.25;

  std::string text = config_to_string(cfg);
  PipelineConfig back = parse_config(text);
  CHECK(back.seed == 12345);
  CHECK(back.pyramid_scales == 3);
  CHECK(back.flow.iterations == 7);
  CHECK(back.track.static_tol == 0.25f);
  CHECK_FALSE(back.root_sift);
  CHECK(back.xyt);
  CHECK(back.convisa.stride_spatial == 8);
  CHECK(back.convisa.output_dim == 150);
  CHECK(back.encode_alpha == 0.3);
  CHECK(back.mifs_skips == std::vector<int>{0, 2});
  CHECK(back.svm_c == 10.0);
  CHECK(back.mir.eta == 0.25);

  CHECK(config_to_string(back) == text);
}

TEST_CASE("parser accepts comments, blanks, and loose whitespace") {
  PipelineConfig cfg = parse_config(
      "# a comment\n"
      "\n"
      "  seed = 7  \n"
      "encode.k=32 # trailing note\n"
      "\tflow.radius\t=\t9\n");
  CHECK(cfg.seed == 7);
  CHECK(cfg.encode_k == 32);
  CHECK(cfg.flow.window_radius == 9);
}

TEST_CASE("parser rejects malformed and unknown input") {
  expect_config_error("bogus.key = 1\n", "unknown config key");
  expect_config_error("seed = 1\nseed = 2\n", "duplicate config key");
  expect_config_error("seed 7\n", "not key=value");
  expect_config_error("seed =\n", "empty key or value");
  expect_config_error("= 3\n", "empty key or value");
  expect_config_error("seed = abc\n", "bad value");
  expect_config_error("seed = -4\n", "bad value");
  expect_config_error("flow.levels = 1.5\n", "bad value");
  expect_config_error("encode.alpha = nan\n", "bad value");
  expect_config_error("descriptors.xyt = maybe\n", "bad value");
  expect_config_error("encode.mifs_skips = 0,,2\n", "bad value");
}

TEST_CASE("validation failures name the broken rule") {
  expect_config_error("pyramid.scales = 0\n", "pyramid.scales >= 1");
  expect_config_error("encode.alpha = 1.5\n", "encode.alpha in (0, 1]");
  expect_config_error("encode.mifs_skips = -1\n", "encode.mifs_skips >= 0");
  expect_config_error("svm.c = 0\n", "svm.c > 0");
  expect_config_error("mir.eta = 0\n", "mir.eta in (0, 1]");
  expect_config_error("convisa.stride_spatial = 5\n",
                      "(32 - rf_spatial) % stride_spatial == 0");
  expect_config_error("convisa.pca2 = 4000\n", "output_dim");
}

TEST_CASE("published study settings are accepted") {
  const char* settings[] = {
      "convisa.stride_spatial = 4\n",
      "convisa.stride_spatial = 8\n",
      "convisa.stride_temporal = 2\n",
      "convisa.rf_spatial = 8\nconvisa.stride_spatial = 8\nconvisa.pca1 = 300\n",
      "convisa.rf_spatial = 24\nconvisa.stride_spatial = 8\n",
      "convisa.rf_temporal = 10\nconvisa.stride_temporal = 5\n",
      "encode.mifs_skips = 0\n",
      "encode.mifs_skips = 0,1,2,3\n",
  };
  for (const char* text : settings) {
    CAPTURE(text);
    CHECK_NOTHROW(parse_config(text));
  }
  for (int dim = 50; dim <= 300; dim += 50) {
    std::string text = "convisa.pca2 = " + std::to_string(dim) + "\n";
    CHECK_NOTHROW(parse_config(text));
  }
}

TEST_CASE("config files load and save through disk") {
  TempDir tmp;
  PipelineConfig cfg;
  cfg.seed = 99;
  cfg.encode_k = 16;
  fs::path file = tmp.path / "pipeline.cfg";
  save_config(cfg, file);
  PipelineConfig back = load_config(file);
  CHECK(back.seed == 99);
  CHECK(back.encode_k == 16);

  CHECK_THROWS_AS(load_config(tmp.path / "absent.cfg"), IoError);
}

TEST_CASE("manifests parse records and expose splits") {
  TempDir tmp;
  fs::path file = tmp.path / "data.manifest";
  write_text(file,
             "# tiny dataset\n"
             "class walk\n"
             "class run\n"
             "\n"
             "train videos/a.rgv walk\n"
             "train videos/b.rgv run,walk\n"
             "test videos/c.rgv run\n");
  DatasetManifest m = load_manifest(file);
  CHECK(m.classes == std::vector<std::string>{"walk", "run"});
  REQUIRE(m.entries.size() == 3);
  CHECK(m.entries[0].path == "videos/a.rgv");
  CHECK_FALSE(m.entries[0].is_test);
  CHECK(m.entries[1].labels == std::vector<std::string>{"run", "walk"});
  CHECK(m.entries[2].is_test);

  CHECK(m.split(false).size() == 2);
  CHECK(m.split(true).size() == 1);
  CHECK(m.split(true)[0].path == "videos/c.rgv");

  CHECK(m.label_index("walk") == 0);
  CHECK(m.label_index("run") == 1);
  CHECK(m.label_index("jump") == -1);
}

TEST_CASE("manifests round trip through disk") {
  TempDir tmp;
  DatasetManifest m;
  m.classes = {"clap", "wave"};
  m.entries.push_back({"x/1.rgv", {"clap"}, false});
  m.entries.push_back({"x/2.rgv", {"wave", "clap"}, false});
  m.entries.push_back({"x/3.rgv", {"wave"}, true});

  fs::path file = tmp.path / "m.manifest";
  save_manifest(m, file);
  DatasetManifest back = load_manifest(file);
  CHECK(back.classes == m.classes);
  REQUIRE(back.entries.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back.entries[i].path == m.entries[i].path);
    CHECK(back.entries[i].labels == m.entries[i].labels);
    CHECK(back.entries[i].is_test == m.entries[i].is_test);
  }
}

TEST_CASE("manifest structural problems raise bad_format") {
  TempDir tmp;
  auto expect_bad = [&](const char* name, const std::string& text, const std::string& needle) {
    fs::path file = tmp.path / name;
    write_text(file, text);
    try {
      load_manifest(file);
      FAIL_CHECK("expected IoError for " << name);
    } catch (const IoError& e) {
      CHECK(e.kind() == IoError::Kind::bad_format);
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };

  expect_bad("noclass.manifest", "train a.rgv x\ntest b.rgv x\n", "no classes");
  expect_bad("dupclass.manifest",
             "class a\nclass a\ntrain v.rgv a\ntest w.rgv a\n", "repeats class");
  expect_bad("unknownlabel.manifest",
             "class a\ntrain v.rgv b\ntest w.rgv a\n", "undeclared");
  expect_bad("nosplit.manifest", "class a\ntrain v.rgv a\n", "nonempty train and test");
  expect_bad("badclassline.manifest", "class\n", "bad class line");
  expect_bad("badtrainline.manifest", "class a\ntrain v.rgv\n", "bad train line");
  expect_bad("extrafield.manifest", "class a\ntrain v.rgv a extra\n", "bad train line");
  expect_bad("unknowntag.manifest", "class a\nvalidate v.rgv a\n", "unknown manifest tag");
  expect_bad("emptylabel.manifest", "class a\ntrain v.rgv a,,a\n", "empty label");
  expect_bad("nolabels.manifest", "class a\ntrain v.rgv ,\ntest w.rgv a\n", "empty label");

  CHECK_THROWS_AS(load_manifest(tmp.path / "missing.manifest"), IoError);
  try {
    load_manifest(tmp.path / "missing.manifest");
  } catch (const IoError& e) {
    CHECK(e.kind() == IoError::Kind::missing_file);
  }
}
