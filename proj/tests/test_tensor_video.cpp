#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "vidfeat/rng.hpp"
#include "vidfeat/tensor_file.hpp"
#include "vidfeat/video.hpp"

using namespace vidfeat;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("vidfeat_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::vector<char> read_bytes(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::vector<char>(std::istreambuf_iterator<char>(is), {});
}

void write_bytes(const fs::path& p, const std::vector<char>& bytes) {
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("tensor container round trip is bit exact") {
  TempDir tmp;
  auto rng = make_rng(7, "tensor_rt");
  std::uniform_real_distribution<float> uni(-5.0f, 5.0f);

  TensorFile tf;
  std::vector<float> a(24);
  for (float& v : a) v = uni(rng);
  tf.add("alpha", {2, 3, 4}, a);
  Eigen::MatrixXd m(3, 5);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 5; ++j) m(i, j) = uni(rng);
  tf.add_matrix("beta", m);
  Eigen::VectorXd v(6);
  for (int i = 0; i < 6; ++i) v(i) = uni(rng);
  tf.add_vector("gamma", v);

  fs::path p = tmp.path / "t.tcn";
  tf.save(p);
  TensorFile back = TensorFile::load(p);

  CHECK(back.has("alpha"));
  CHECK(back.get("alpha").shape == std::vector<std::uint32_t>{2, 3, 4});
  CHECK(back.get("alpha").values == a);
  CHECK(back.matrix("beta").cast<float>() == m.cast<float>().eval());
  CHECK(back.vector("gamma").cast<float>() == v.cast<float>().eval());

  back.save(tmp.path / "t2.tcn");
  CHECK(read_bytes(p) == read_bytes(tmp.path / "t2.tcn"));
}

TEST_CASE("tensor container reports structured errors") {
  TempDir tmp;
  TensorFile tf;
  tf.add("x", {4}, {1, 2, 3, 4});
  fs::path p = tmp.path / "t.tcn";
  tf.save(p);

  CHECK_THROWS_AS(tf.get("missing"), std::out_of_range);
  CHECK_THROWS_AS(TensorFile::load(tmp.path / "absent.tcn"), IoError);

  auto bytes = read_bytes(p);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  write_bytes(tmp.path / "bad_magic.tcn", bad_magic);
  CHECK_THROWS_AS(TensorFile::load(tmp.path / "bad_magic.tcn"), IoError);

  auto truncated = bytes;
  truncated.resize(truncated.size() - 6);
  write_bytes(tmp.path / "trunc.tcn", truncated);
  CHECK_THROWS_AS(TensorFile::load(tmp.path / "trunc.tcn"), IoError);

  SUBCASE("matrix/vector accessors check rank") {
    TensorFile t2;
    t2.add("cube", {2, 2, 2}, std::vector<float>(8, 1.0f));
    CHECK_THROWS(t2.matrix("cube"));
    CHECK_THROWS(t2.vector("cube"));
  }
}

TEST_CASE("rgv decodes u8 samples to [0,1]") {
  TempDir tmp;
  fs::path p = tmp.path / "v.rgv";
  std::vector<char> bytes = {'R', 'G', 'V', '1'};
  auto put_u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  put_u32(2);
  put_u32(2);
  put_u32(1);
  for (unsigned char b : {0, 255, 0, 255}) bytes.push_back(static_cast<char>(b));
  write_bytes(p, bytes);

  GrayVideo v = load_video(p, VideoFormat::rgv);
  CHECK(v.width == 2);
  CHECK(v.height == 2);
  CHECK(v.frames == 1);
  CHECK(v.data == std::vector<float>{0.0f, 1.0f, 0.0f, 1.0f});
}

TEST_CASE("rgv errors are reported distinctly") {
  TempDir tmp;

  CHECK_THROWS_WITH_AS(load_video(tmp.path / "none.rgv", VideoFormat::rgv),
                       doctest::Contains("cannot open"), IoError);

  fs::path bad = tmp.path / "bad.rgv";
  write_bytes(bad, {'N', 'O', 'P', 'E', 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0});
  try {
    load_video(bad, VideoFormat::rgv);
    CHECK(false);
  } catch (const IoError& e) {
    CHECK(e.kind() == IoError::Kind::corrupt_header);
  }

  fs::path trunc = tmp.path / "trunc.rgv";
  std::vector<char> bytes = {'R', 'G', 'V', '1'};
  auto put_u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  put_u32(4);
  put_u32(4);
  put_u32(2);
  for (int i = 0; i < 16; ++i) bytes.push_back(7);  // needs 32 payload bytes
  write_bytes(trunc, bytes);
  try {
    load_video(trunc, VideoFormat::rgv);
    CHECK(false);
  } catch (const IoError& e) {
    CHECK(e.kind() == IoError::Kind::truncated_payload);
  }
}

TEST_CASE("rgv round trip is bit exact") {
  TempDir tmp;
  GrayVideo v = synth_video(MotionSpec::translate(1.0f, 0.5f), 33, 17, 4, 11);
  // Quantize to the u8 grid the container stores.
  for (float& x : v.data) x = std::round(x * 255.0f) / 255.0f;
  fs::path p = tmp.path / "v.rgv";
  save_rgv(v, p);
  GrayVideo back = load_video(p, VideoFormat::rgv);
  CHECK(back.width == v.width);
  CHECK(back.height == v.height);
  CHECK(back.frames == v.frames);
  CHECK(back.data == v.data);
}

TEST_CASE("pgm sequence round trips through a directory") {
  TempDir tmp;
  GrayVideo v;
  v.width = 8;
  v.height = 8;
  v.frames = 3;
  v.data.resize(8 * 8 * 3);
  for (std::size_t i = 0; i < v.data.size(); ++i)
    v.data[i] = static_cast<float>((i * 7) % 256) / 255.0f;
  fs::path dir = tmp.path / "frames";
  fs::create_directories(dir);
  save_pgm_sequence(v, dir);

  GrayVideo back = load_video(dir, VideoFormat::pgm_sequence);
  CHECK(back.width == 8);
  CHECK(back.height == 8);
  CHECK(back.frames == 3);
  CHECK(back.data == v.data);
}

TEST_CASE("scale pyramid geometry") {
  GrayVideo v = synth_video(MotionSpec::still_scene(), 64, 64, 15, 3);

  SUBCASE("64x64 with 8 scales keeps 3 usable levels") {
    ScalePyramid pyr = build_scale_pyramid(v, 8, 0.7071067811865476f);
    REQUIRE(pyr.levels.size() == 3);
    CHECK(pyr.levels[0].width == 64);
    CHECK(pyr.levels[1].width == 45);
    CHECK(pyr.levels[2].width == 32);
    for (const auto& lvl : pyr.levels) {
      CHECK(lvl.width >= 32);
      CHECK(lvl.height >= 32);
      CHECK(lvl.frames == 15);
    }
  }

  SUBCASE("one scale returns the input unchanged") {
    ScalePyramid pyr = build_scale_pyramid(v, 1, 0.7071067811865476f);
    REQUIRE(pyr.levels.size() == 1);
    CHECK(pyr.levels[0].data == v.data);
  }

  SUBCASE("constant video stays constant at every level") {
    GrayVideo c;
    c.width = 64;
    c.height = 64;
    c.frames = 15;
    c.data.assign(std::size_t(64) * 64 * 15, 0.375f);
    ScalePyramid pyr = build_scale_pyramid(c, 8, 0.7071067811865476f);
    for (const auto& lvl : pyr.levels)
      for (float x : lvl.data) CHECK(x == doctest::Approx(0.375f).epsilon(1e-6));
  }

  SUBCASE("to_base maps level coordinates back to level 0") {
    ScalePyramid pyr = build_scale_pyramid(v, 8, 0.7071067811865476f);
    CHECK(pyr.to_base(10.0f, 0) == doctest::Approx(10.0f));
    CHECK(pyr.to_base(16.0f, 2) == doctest::Approx(32.0f).epsilon(0.01));
  }
}

TEST_CASE("synthetic videos") {
  SUBCASE("deterministic given seed") {
    GrayVideo a = synth_video(MotionSpec::translate(1, 0), 48, 48, 16, 7);
    GrayVideo b = synth_video(MotionSpec::translate(1, 0), 48, 48, 16, 7);
    CHECK(a.data == b.data);
    GrayVideo c = synth_video(MotionSpec::translate(1, 0), 48, 48, 16, 8);
    CHECK(a.data != c.data);
  }

  SUBCASE("still scene repeats frame 0") {
    GrayVideo v = synth_video(MotionSpec::still_scene(), 40, 40, 5, 1);
    for (std::uint32_t t = 1; t < v.frames; ++t)
      for (std::uint32_t y = 0; y < v.height; ++y)
        for (std::uint32_t x = 0; x < v.width; ++x) CHECK(v.at(x, y, t) == v.at(x, y, 0));
  }

  SUBCASE("integer translation shifts the pattern exactly") {
    GrayVideo v = synth_video(MotionSpec::translate(2, 0), 48, 48, 2, 9);
    for (std::uint32_t y = 0; y < 48; ++y)
      for (std::uint32_t x = 2; x < 48; ++x)
        CHECK(v.at(x, y, 1) == doctest::Approx(v.at(x - 2, y, 0)).epsilon(1e-6));
  }

  SUBCASE("values stay inside [0,1]") {
    GrayVideo v = synth_video(MotionSpec::oscillate(0, 8, 3), 40, 40, 20, 4);
    for (float x : v.data) {
      CHECK(x >= 0.0f);
      CHECK(x <= 1.0f);
    }
  }

  SUBCASE("ground-truth flow of translate is the velocity") {
    MotionSpec spec = MotionSpec::translate(1.5f, -0.5f);
    auto [u, vflow] = spec.flow_at(3);
    CHECK(u == doctest::Approx(1.5f));
    CHECK(vflow == doctest::Approx(-0.5f));
  }

  SUBCASE("dimension checks") {
    CHECK_THROWS_AS(synth_video(MotionSpec::still_scene(), 0, 32, 16, 1), std::invalid_argument);
  }
}

TEST_CASE("resize preserves constants and dimensions") {
  GrayVideo c;
  c.width = 20;
  c.height = 10;
  c.frames = 2;
  c.data.assign(std::size_t(20) * 10 * 2, 0.25f);
  GrayVideo r = resize_bilinear(c, 13, 7);
  CHECK(r.width == 13);
  CHECK(r.height == 7);
  CHECK(r.frames == 2);
  for (float x : r.data) CHECK(x == doctest::Approx(0.25f).epsilon(1e-6));
}
